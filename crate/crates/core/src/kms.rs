//! KMS states for graph algebras under the gauge dynamics: existence,
//! enumeration at a fixed inverse temperature, uniqueness on strongly
//! connected graphs, admissible temperatures, and state evaluation on pairs
//! of path words.
//!
//! All comparisons run on `lambda = e^beta` so that integer spectral radii
//! stay exact end to end; transcendental arithmetic never enters the
//! decision paths.

use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{validate_path, DirectedGraph, GraphError, PathWord};
use crate::linalg::{self, IntMatrix, Rat};
use crate::spectral::{self, TaggedReal, TaggedVec};

/// Largest eigenspace dimension the extreme-point scan will accept.
pub const EIGENSPACE_CAP: usize = 12;
/// Budget on the number of support subsets scanned during enumeration.
pub const ENUMERATION_BUDGET: u64 = 5_000_000;
pub const NUMERIC_STATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum KmsError {
    #[error("graph has a sink; the KMS analysis covers sink-free graphs only")]
    GraphHasSink,
    #[error("graph is not strongly connected; use kms_simplex for the full polytope")]
    NotStronglyConnected,
    #[error("eigenspace dimension {0} exceeds the enumeration cap {EIGENSPACE_CAP}")]
    EigenspaceTooLarge(usize),
    #[error("extreme-point scan over C({m}, {k}) support sets exceeds the budget")]
    EnumerationBudget { m: usize, k: usize },
    #[error("state carries {got} weights but the graph has {expected} vertices")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("e^beta must be positive, got {0}")]
    NonPositiveLambda(String),
    #[error("invalid path word: {0}")]
    Path(#[from] GraphError),
    #[error("edge word does not compose into a path")]
    NotAPath,
    #[error("weights are not a probability vector: {0}")]
    NotProbability(String),
}

/// An inverse temperature `beta = ln(lambda)`, stored through `lambda = e^beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseTemperature {
    lambda: TaggedReal,
}

impl InverseTemperature {
    pub fn from_lambda(lambda: TaggedReal) -> Result<Self, KmsError> {
        let positive = match &lambda {
            TaggedReal::Exact(r) => r.is_positive(),
            TaggedReal::Numeric { value, .. } => *value > 0.0,
        };
        if !positive {
            return Err(KmsError::NonPositiveLambda(lambda.to_string()));
        }
        Ok(InverseTemperature { lambda })
    }

    /// `e^beta`.
    pub fn lambda(&self) -> &TaggedReal {
        &self.lambda
    }

    /// Numeric value of `beta` itself.
    pub fn ln_value(&self) -> f64 {
        self.lambda.value().ln()
    }

    pub fn is_exact(&self) -> bool {
        self.lambda.is_exact()
    }
}

impl std::fmt::Display for InverseTemperature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ln({})", self.lambda)
    }
}

#[derive(Serialize, Deserialize)]
struct BetaRepr {
    #[serde(skip_serializing_if = "Option::is_none")]
    log_of: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_of_numeric: Option<f64>,
    approx: f64,
}

impl Serialize for InverseTemperature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = match &self.lambda {
            TaggedReal::Exact(r) => {
                BetaRepr { log_of: Some(r.to_string()), log_of_numeric: None, approx: self.ln_value() }
            }
            TaggedReal::Numeric { value, .. } => {
                BetaRepr { log_of: None, log_of_numeric: Some(*value), approx: self.ln_value() }
            }
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for InverseTemperature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = BetaRepr::deserialize(d)?;
        let lambda = if let Some(text) = repr.log_of {
            TaggedReal::Exact(
                Rat::from_str(&text).map_err(|e| D::Error::custom(format!("bad fraction {text:?}: {e}")))?,
            )
        } else if let Some(v) = repr.log_of_numeric {
            TaggedReal::Numeric { value: v, tolerance: NUMERIC_STATE_TOLERANCE }
        } else {
            return Err(D::Error::custom("expected log_of or log_of_numeric"));
        };
        InverseTemperature::from_lambda(lambda).map_err(D::Error::custom)
    }
}

/// How to pick `beta` for [`kms_simplex`]: the critical temperature, an
/// exact `e^beta`, or a numeric `e^beta`.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaSpec {
    Critical,
    Lambda(Rat),
    LambdaNumeric(f64),
}

/// A gauge-KMS state: the inverse temperature plus the vertex weight vector.
/// By the structure theory this pair is the complete data of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct KmsState {
    pub beta: InverseTemperature,
    pub weights: TaggedVec,
    pub factors_through: bool,
}

impl KmsState {
    /// Validates the probability vector and records whether the state
    /// factors through the graph algebra (eigenvector check).
    pub fn new(g: &DirectedGraph, beta: InverseTemperature, weights: TaggedVec) -> Result<Self, KmsError> {
        if weights.len() != g.vertex_count() {
            return Err(KmsError::DimensionMismatch { expected: g.vertex_count(), got: weights.len() });
        }
        match &weights {
            TaggedVec::Exact(v) => {
                if v.iter().any(|x| x.is_negative()) {
                    return Err(KmsError::NotProbability("negative entry".into()));
                }
                let sum: Rat = v.iter().sum();
                if !sum.is_one() {
                    return Err(KmsError::NotProbability(format!("entries sum to {sum}")));
                }
            }
            TaggedVec::Numeric { entries, tolerance } => {
                let slack = tolerance.max(NUMERIC_STATE_TOLERANCE) * entries.len() as f64;
                if entries.iter().any(|&x| x < -slack) {
                    return Err(KmsError::NotProbability("negative entry".into()));
                }
                let sum: f64 = entries.iter().sum();
                if (sum - 1.0).abs() > slack {
                    return Err(KmsError::NotProbability(format!("entries sum to {sum}")));
                }
            }
        }
        let mut state = KmsState { beta, weights, factors_through: false };
        state.factors_through = eigen_equation_holds(g, &state);
        Ok(state)
    }

    pub fn weight_value(&self, v: usize) -> f64 {
        self.weights.value_at(v)
    }
}

#[derive(Serialize, Deserialize)]
struct KmsStateRepr {
    beta: InverseTemperature,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights_numeric: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights_tolerance: Option<f64>,
    factors_through: bool,
}

impl Serialize for KmsState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = match &self.weights {
            TaggedVec::Exact(v) => KmsStateRepr {
                beta: self.beta.clone(),
                weights: Some(v.iter().map(|r| r.to_string()).collect()),
                weights_numeric: None,
                weights_tolerance: None,
                factors_through: self.factors_through,
            },
            TaggedVec::Numeric { entries, tolerance } => KmsStateRepr {
                beta: self.beta.clone(),
                weights: None,
                weights_numeric: Some(entries.clone()),
                weights_tolerance: Some(*tolerance),
                factors_through: self.factors_through,
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for KmsState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = KmsStateRepr::deserialize(d)?;
        let weights = if let Some(texts) = repr.weights {
            let mut v = Vec::with_capacity(texts.len());
            for t in texts {
                v.push(Rat::from_str(&t).map_err(|e| D::Error::custom(format!("bad fraction {t:?}: {e}")))?);
            }
            TaggedVec::Exact(v)
        } else if let Some(entries) = repr.weights_numeric {
            TaggedVec::Numeric { entries, tolerance: repr.weights_tolerance.unwrap_or(NUMERIC_STATE_TOLERANCE) }
        } else {
            return Err(D::Error::custom("expected weights or weights_numeric"));
        };
        Ok(KmsState { beta: repr.beta, weights, factors_through: repr.factors_through })
    }
}

/// All KMS states at one inverse temperature: eigenspace basis, extreme
/// points (sorted, exact where possible), and the affine dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmsPolytope {
    pub beta: InverseTemperature,
    pub eigenspace_basis: Vec<TaggedVec>,
    pub extreme_points: Vec<KmsState>,
    pub dimension: usize,
    /// Set when an irrational `e^beta` forced the scan out of exact mode.
    pub numeric_fallback: bool,
}

impl KmsPolytope {
    pub fn is_empty(&self) -> bool {
        self.extreme_points.is_empty()
    }

    /// Membership: a vector is in the polytope iff it is a probability
    /// vector satisfying the eigen equation at this beta.
    pub fn contains(&self, g: &DirectedGraph, state: &KmsState) -> bool {
        state.weights.len() == g.vertex_count()
            && lambda_close(self.beta.lambda(), state.beta.lambda())
            && eigen_equation_holds_at(g, &state.weights, self.beta.lambda())
    }
}

fn lambda_close(a: &TaggedReal, b: &TaggedReal) -> bool {
    match (a, b) {
        (TaggedReal::Exact(x), TaggedReal::Exact(y)) => x == y,
        _ => (a.value() - b.value()).abs() <= NUMERIC_STATE_TOLERANCE,
    }
}

/// `ln(rho(D))`, the critical inverse temperature. The only KMS entry point
/// precondition: the graph must have no sink.
pub fn critical_inverse_temperature(g: &DirectedGraph) -> Result<InverseTemperature, KmsError> {
    if g.has_sink() {
        return Err(KmsError::GraphHasSink);
    }
    InverseTemperature::from_lambda(spectral::spectral_radius(&g.vertex_matrix()))
}

fn resolve_lambda(g: &DirectedGraph, spec: &BetaSpec) -> Result<TaggedReal, KmsError> {
    match spec {
        BetaSpec::Critical => Ok(spectral::spectral_radius(&g.vertex_matrix())),
        BetaSpec::Lambda(r) => {
            if !r.is_positive() {
                return Err(KmsError::NonPositiveLambda(r.to_string()));
            }
            Ok(TaggedReal::Exact(r.clone()))
        }
        BetaSpec::LambdaNumeric(v) => {
            if *v <= 0.0 {
                return Err(KmsError::NonPositiveLambda(v.to_string()));
            }
            Ok(TaggedReal::Numeric { value: *v, tolerance: NUMERIC_STATE_TOLERANCE })
        }
    }
}

/// The polytope `{N : DN = e^beta N, N >= 0, sum N = 1}` with extreme points
/// enumerated as basic feasible solutions. Empty iff no KMS state exists at
/// this temperature.
pub fn kms_simplex(g: &DirectedGraph, spec: &BetaSpec) -> Result<KmsPolytope, KmsError> {
    if g.has_sink() {
        return Err(KmsError::GraphHasSink);
    }
    let d = g.vertex_matrix();
    let lambda = resolve_lambda(g, spec)?;
    match &lambda {
        TaggedReal::Exact(r) => {
            let basis = spectral::eigenspace_at(&d, r);
            polytope_from_exact_basis(g, InverseTemperature::from_lambda(lambda.clone())?, basis)
        }
        TaggedReal::Numeric { value, .. } => {
            let beta = InverseTemperature::from_lambda(lambda.clone())?;
            let basis = if matches!(spec, BetaSpec::Critical) && spectral::is_irreducible(&d) {
                let (_, v) = linalg::power_iteration(&d);
                vec![v]
            } else {
                let n = d.size();
                let shifted: Vec<Vec<f64>> = (0..n)
                    .map(|i| (0..n).map(|j| d.get(i, j) as f64 - if i == j { *value } else { 0.0 }).collect())
                    .collect();
                linalg::null_space_f64(&shifted, 1e-6)
            };
            polytope_from_numeric_basis(g, beta, basis)
        }
    }
}

fn check_enumeration_budget(m: usize, dim: usize) -> Result<(), KmsError> {
    if dim > EIGENSPACE_CAP {
        return Err(KmsError::EigenspaceTooLarge(dim));
    }
    if dim > 0 && linalg::binomial(m, dim - 1) > ENUMERATION_BUDGET {
        return Err(KmsError::EnumerationBudget { m, k: dim - 1 });
    }
    Ok(())
}

pub(crate) fn polytope_from_exact_basis(
    g: &DirectedGraph,
    beta: InverseTemperature,
    basis: Vec<Vec<Rat>>,
) -> Result<KmsPolytope, KmsError> {
    check_enumeration_budget(g.vertex_count(), basis.len())?;
    let vertices = linalg::simplex_section_vertices(&basis);
    let dimension = affine_rank_exact(&vertices);
    let extreme_points = vertices
        .into_iter()
        .map(|v| {
            let state = KmsState::new(g, beta.clone(), TaggedVec::Exact(v)).expect("vertex scan yields probability vectors");
            debug_assert!(state.factors_through);
            state
        })
        .collect();
    Ok(KmsPolytope {
        beta,
        eigenspace_basis: basis.into_iter().map(TaggedVec::Exact).collect(),
        extreme_points,
        dimension,
        numeric_fallback: false,
    })
}

pub(crate) fn polytope_from_numeric_basis(
    g: &DirectedGraph,
    beta: InverseTemperature,
    basis: Vec<Vec<f64>>,
) -> Result<KmsPolytope, KmsError> {
    check_enumeration_budget(g.vertex_count(), basis.len())?;
    let vertices = linalg::simplex_section_vertices_f64(&basis, NUMERIC_STATE_TOLERANCE);
    let dimension = affine_rank_f64(&vertices);
    let extreme_points = vertices
        .into_iter()
        .map(|v| {
            KmsState::new(g, beta.clone(), TaggedVec::Numeric { entries: v, tolerance: NUMERIC_STATE_TOLERANCE })
                .expect("vertex scan yields probability vectors")
        })
        .collect();
    Ok(KmsPolytope {
        beta,
        eigenspace_basis: basis
            .into_iter()
            .map(|entries| TaggedVec::Numeric { entries, tolerance: NUMERIC_STATE_TOLERANCE })
            .collect(),
        extreme_points,
        dimension,
        numeric_fallback: true,
    })
}

/// The sub-polytope of KMS states at `beta` whose weights are equal on every
/// listed coordinate pair: the eigen system is extended by the equalities and
/// the extreme points re-enumerated.
pub(crate) fn polytope_with_equal_coordinates(
    g: &DirectedGraph,
    beta: &InverseTemperature,
    pairs: &[(usize, usize)],
) -> Result<KmsPolytope, KmsError> {
    let n = g.vertex_count();
    let d = g.vertex_matrix();
    match beta.lambda() {
        TaggedReal::Exact(r) => {
            let mut system = d.shifted(r);
            for &(a, b) in pairs {
                let mut row = vec![Rat::zero(); n];
                row[a] = linalg::rat_int(1);
                row[b] = linalg::rat_int(-1);
                system.push(row);
            }
            let basis = linalg::null_space(&system);
            polytope_from_exact_basis(g, beta.clone(), basis)
        }
        TaggedReal::Numeric { value, .. } => {
            let mut system: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| d.get(i, j) as f64 - if i == j { *value } else { 0.0 }).collect())
                .collect();
            for &(a, b) in pairs {
                let mut row = vec![0.0; n];
                row[a] = 1.0;
                row[b] = -1.0;
                system.push(row);
            }
            let basis = linalg::null_space_f64(&system, 1e-6);
            polytope_from_numeric_basis(g, beta.clone(), basis)
        }
    }
}

fn affine_rank_exact(points: &[Vec<Rat>]) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let diffs: Vec<Vec<Rat>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(points[0].iter()).map(|(a, b)| a - b).collect())
        .collect();
    linalg::rank(&diffs)
}

fn affine_rank_f64(points: &[Vec<f64>]) -> usize {
    if points.len() <= 1 {
        return 0;
    }
    let diffs: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(points[0].iter()).map(|(a, b)| a - b).collect())
        .collect();
    let cols = diffs[0].len();
    cols - linalg::null_space_f64(&diffs, 1e-7).len()
}

/// The unique KMS state of a strongly connected graph: critical temperature,
/// weights the normalized Perron vector.
pub fn unique_kms(g: &DirectedGraph) -> Result<KmsState, KmsError> {
    if g.has_sink() {
        return Err(KmsError::GraphHasSink);
    }
    if !g.is_strongly_connected() {
        return Err(KmsError::NotStronglyConnected);
    }
    let report = spectral::perron_data(&g.vertex_matrix()).expect("strongly connected means irreducible");
    let beta = InverseTemperature::from_lambda(report.radius.clone())?;
    let weights = report.perron_right.expect("perron data on irreducible input");
    let state = KmsState::new(g, beta, weights)?;
    debug_assert!(state.factors_through);
    Ok(state)
}

/// Why a set of inverse temperatures is exhaustive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmissibilityCertificate {
    /// A strictly positive left eigenvector at the spectral radius pins the
    /// only possible temperature to the critical one.
    PositiveLeftEigenvector,
    /// Candidates enumerated over component spectral radii and filtered by
    /// nonemptiness of the state polytope.
    EigenvalueEnumeration,
}

impl AdmissibilityCertificate {
    pub fn describe(self) -> &'static str {
        match self {
            AdmissibilityCertificate::PositiveLeftEigenvector => {
                "strictly positive left eigenvector at the spectral radius forces the critical temperature"
            }
            AdmissibilityCertificate::EigenvalueEnumeration => {
                "candidates enumerated over component spectral radii, kept when a state exists"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleReport {
    pub temperatures: Vec<InverseTemperature>,
    pub certificate: AdmissibilityCertificate,
}

/// The set of inverse temperatures at which a KMS state can occur.
///
/// When the spectral radius carries a strictly positive left eigenvector the
/// answer is exactly the critical temperature. Otherwise every admissible
/// `e^beta` is the spectral radius of some strongly connected component
/// (a nonnegative eigenvector restricts to a positive eigenvector on its
/// support), so those radii are scanned and kept when the polytope is
/// nonempty.
pub fn admissible_inverse_temperatures(g: &DirectedGraph) -> Result<AdmissibleReport, KmsError> {
    if g.has_sink() {
        return Err(KmsError::GraphHasSink);
    }
    let d = g.vertex_matrix();
    let radius = spectral::spectral_radius(&d);
    if has_positive_left_eigenvector(&d, &radius) {
        return Ok(AdmissibleReport {
            temperatures: vec![InverseTemperature::from_lambda(radius)?],
            certificate: AdmissibilityCertificate::PositiveLeftEigenvector,
        });
    }

    let mut exact_candidates: Vec<Rat> = Vec::new();
    let mut numeric_candidates: Vec<f64> = Vec::new();
    for comp in g.strongly_connected_components() {
        let sub = g.induced_subgraph(&comp);
        match spectral::spectral_radius(&sub.vertex_matrix()) {
            TaggedReal::Exact(r) => {
                if r.is_positive() {
                    exact_candidates.push(r);
                }
            }
            TaggedReal::Numeric { value, .. } => {
                if value > NUMERIC_STATE_TOLERANCE {
                    numeric_candidates.push(value);
                }
            }
        }
    }
    exact_candidates.sort();
    exact_candidates.dedup();
    numeric_candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    numeric_candidates.dedup_by(|a, b| (*a - *b).abs() <= NUMERIC_STATE_TOLERANCE);

    let mut temperatures = Vec::new();
    for r in exact_candidates {
        let p = kms_simplex(g, &BetaSpec::Lambda(r.clone()))?;
        if !p.is_empty() {
            temperatures.push(InverseTemperature::from_lambda(TaggedReal::Exact(r))?);
        }
    }
    for v in numeric_candidates {
        let p = kms_simplex(g, &BetaSpec::LambdaNumeric(v))?;
        if !p.is_empty() {
            temperatures.push(InverseTemperature::from_lambda(TaggedReal::Numeric {
                value: v,
                tolerance: NUMERIC_STATE_TOLERANCE,
            })?);
        }
    }
    temperatures.sort_by(|a, b| a.lambda().value().partial_cmp(&b.lambda().value()).unwrap());
    Ok(AdmissibleReport { temperatures, certificate: AdmissibilityCertificate::EigenvalueEnumeration })
}

/// Looks for a strictly positive left eigenvector at the radius: a
/// one-dimensional positive eigenspace, the all-ones vector (equal column
/// sums), or a positive sum of nonnegative basis vectors.
fn has_positive_left_eigenvector(d: &IntMatrix, radius: &TaggedReal) -> bool {
    match radius {
        TaggedReal::Exact(r) => {
            let n = d.size();
            // all-ones shortcut: every column sums to the radius
            if (0..n).all(|j| &linalg::rat_int(d.col_sum(j) as i64) == r) {
                return true;
            }
            let basis = spectral::eigenspace_at(&d.transpose(), r);
            if basis.is_empty() {
                return false;
            }
            if basis.len() == 1 && basis[0].iter().all(|x| x.is_positive()) {
                return true;
            }
            if basis.iter().all(|b| b.iter().all(|x| !x.is_negative())) {
                let sum: Vec<Rat> = (0..n)
                    .map(|i| basis.iter().map(|b| b[i].clone()).sum())
                    .collect();
                return sum.iter().all(|x| x.is_positive());
            }
            false
        }
        TaggedReal::Numeric { value, .. } => {
            let (est, left) = linalg::power_iteration(&d.transpose());
            if (est - value).abs() > 1e-7 * value.max(1.0) {
                return false;
            }
            let residual = d
                .transpose()
                .matvec_f64(&left)
                .iter()
                .zip(left.iter())
                .map(|(av, v)| (av - value * v).abs())
                .fold(0.0f64, f64::max);
            residual <= 1e-7 * value.max(1.0) && left.iter().all(|&x| x > NUMERIC_STATE_TOLERANCE)
        }
    }
}

fn eigen_equation_holds(g: &DirectedGraph, state: &KmsState) -> bool {
    eigen_equation_holds_at(g, &state.weights, state.beta.lambda())
}

fn eigen_equation_holds_at(g: &DirectedGraph, weights: &TaggedVec, lambda: &TaggedReal) -> bool {
    let d = g.vertex_matrix();
    match (weights, lambda) {
        (TaggedVec::Exact(v), TaggedReal::Exact(r)) => {
            d.matvec_rat(v).iter().zip(v.iter()).all(|(dv, x)| dv == &(x * r))
        }
        _ => {
            let v: Vec<f64> = (0..weights.len()).map(|i| weights.value_at(i)).collect();
            let lam = lambda.value();
            let tol = numeric_tolerance(weights) * (1.0 + lam);
            d.matvec_f64(&v).iter().zip(v.iter()).all(|(dv, x)| (dv - lam * x).abs() <= tol)
        }
    }
}

fn numeric_tolerance(weights: &TaggedVec) -> f64 {
    match weights {
        TaggedVec::Exact(_) => NUMERIC_STATE_TOLERANCE,
        TaggedVec::Numeric { tolerance, .. } => tolerance.max(NUMERIC_STATE_TOLERANCE),
    }
}

/// `tau(S_mu S_nu^*)`: zero unless the words are equal, else
/// `e^(-beta |mu|) N(t(mu))`. Exact rational when both the state and
/// `e^beta` are exact.
pub fn evaluate_state(
    g: &DirectedGraph,
    state: &KmsState,
    mu: &PathWord,
    nu: &PathWord,
) -> Result<TaggedReal, KmsError> {
    if state.weights.len() != g.vertex_count() {
        return Err(KmsError::DimensionMismatch { expected: g.vertex_count(), got: state.weights.len() });
    }
    let mu_check = validate_path(g, mu)?;
    let nu_check = validate_path(g, nu)?;
    if !mu_check.valid || !nu_check.valid {
        return Err(KmsError::NotAPath);
    }
    if mu != nu {
        return Ok(TaggedReal::Exact(Rat::zero()));
    }
    let target = mu_check.target;
    let len = mu.len();
    match (&state.weights, state.beta.lambda()) {
        (TaggedVec::Exact(v), TaggedReal::Exact(r)) => {
            let mut value = v[target].clone();
            for _ in 0..len {
                value /= r;
            }
            Ok(TaggedReal::Exact(value))
        }
        _ => {
            let lam = state.beta.lambda().value();
            let value = state.weights.value_at(target) * lam.powi(-(len as i32));
            Ok(TaggedReal::Numeric { value, tolerance: numeric_tolerance(&state.weights) })
        }
    }
}

/// The subinvariance inequality `(DN)_i <= e^beta N_i` for every vertex,
/// exactly in rational mode.
pub fn check_toeplitz_subinvariance(g: &DirectedGraph, state: &KmsState) -> Result<bool, KmsError> {
    if state.weights.len() != g.vertex_count() {
        return Err(KmsError::DimensionMismatch { expected: g.vertex_count(), got: state.weights.len() });
    }
    let d = g.vertex_matrix();
    match (&state.weights, state.beta.lambda()) {
        (TaggedVec::Exact(v), TaggedReal::Exact(r)) => {
            Ok(d.matvec_rat(v).iter().zip(v.iter()).all(|(dv, x)| dv <= &(x * r)))
        }
        _ => {
            let v: Vec<f64> = (0..state.weights.len()).map(|i| state.weights.value_at(i)).collect();
            let lam = state.beta.lambda().value();
            let tol = numeric_tolerance(&state.weights) * (1.0 + lam);
            Ok(d.matvec_f64(&v).iter().zip(v.iter()).all(|(dv, x)| *dv <= lam * x + tol))
        }
    }
}

/// The eigen equation `DN = e^beta N`, i.e. whether the state descends from
/// the Toeplitz extension to the graph algebra itself.
pub fn factors_through(g: &DirectedGraph, state: &KmsState) -> Result<bool, KmsError> {
    if state.weights.len() != g.vertex_count() {
        return Err(KmsError::DimensionMismatch { expected: g.vertex_count(), got: state.weights.len() });
    }
    Ok(eigen_equation_holds(g, state))
}

/// The uniform probability vector as a KMS state at the given temperature,
/// when it actually satisfies the eigen equation there (equivalently: all
/// row sums equal `e^beta`).
pub fn uniform_state(g: &DirectedGraph, beta: &InverseTemperature) -> Option<KmsState> {
    let m = g.vertex_count();
    let weights = match beta.lambda() {
        TaggedReal::Exact(_) => TaggedVec::Exact(vec![linalg::rat_frac(1, m as i64); m]),
        TaggedReal::Numeric { .. } => TaggedVec::Numeric {
            entries: vec![1.0 / m as f64; m],
            tolerance: NUMERIC_STATE_TOLERANCE,
        },
    };
    let state = KmsState::new(g, beta.clone(), weights).ok()?;
    state.factors_through.then_some(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, disjoint_union, make_circulant};
    use crate::linalg::{rat_frac, rat_int};

    fn fib_graph() -> DirectedGraph {
        build_graph(2, &[(0, 0), (0, 1), (1, 0)]).unwrap()
    }

    #[test]
    fn critical_temperature_examples() {
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let beta = critical_inverse_temperature(&c3).unwrap();
        assert_eq!(beta.lambda(), &TaggedReal::exact_int(1));
        assert_eq!(beta.ln_value(), 0.0);

        let c4 = make_circulant(&[1, 0, 1, 0]).unwrap();
        let beta = critical_inverse_temperature(&c4).unwrap();
        assert_eq!(beta.lambda(), &TaggedReal::exact_int(2));

        let sink = build_graph(2, &[(0, 1)]).unwrap();
        assert_eq!(critical_inverse_temperature(&sink), Err(KmsError::GraphHasSink));
    }

    #[test]
    fn circulant_simplex_is_a_segment() {
        let c4 = make_circulant(&[1, 0, 1, 0]).unwrap();
        let p = kms_simplex(&c4, &BetaSpec::Lambda(rat_int(2))).unwrap();
        assert_eq!(p.dimension, 1);
        assert!(!p.numeric_fallback);
        let weights: Vec<_> = p
            .extreme_points
            .iter()
            .map(|s| s.weights.as_exact().unwrap().to_vec())
            .collect();
        assert_eq!(
            weights,
            vec![
                vec![rat_int(0), rat_frac(1, 2), rat_int(0), rat_frac(1, 2)],
                vec![rat_frac(1, 2), rat_int(0), rat_frac(1, 2), rat_int(0)],
            ]
        );
        for s in &p.extreme_points {
            assert!(s.factors_through);
        }
    }

    #[test]
    fn no_state_when_lambda_is_not_an_eigenvalue() {
        // det(D - 2I) = 1 for this graph, so 2 is not an eigenvalue
        let p = kms_simplex(&fib_graph(), &BetaSpec::Lambda(rat_int(2))).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.dimension, 0);
    }

    #[test]
    fn unique_state_on_three_cycle() {
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let s = unique_kms(&c3).unwrap();
        assert_eq!(s.weights.as_exact().unwrap(), &[rat_frac(1, 3), rat_frac(1, 3), rat_frac(1, 3)]);
        assert!(s.factors_through);

        // the polytope at the critical temperature is that single point
        let p = kms_simplex(&c3, &BetaSpec::Critical).unwrap();
        assert_eq!(p.extreme_points.len(), 1);
        assert_eq!(p.extreme_points[0], s);
    }

    #[test]
    fn unique_state_golden_ratio() {
        let s = unique_kms(&fib_graph()).unwrap();
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((s.beta.ln_value() - phi.ln()).abs() < 1e-10);
        let TaggedVec::Numeric { entries, .. } = &s.weights else { panic!("irrational radius") };
        assert!((entries[0] - 0.6180339887498949).abs() < 1e-9);
        assert!((entries[1] - 0.3819660112501051).abs() < 1e-9);
    }

    #[test]
    fn unique_requires_strong_connectivity() {
        let loop1 = build_graph(1, &[(0, 0)]).unwrap();
        let g = disjoint_union(&loop1, &loop1);
        assert_eq!(unique_kms(&g), Err(KmsError::NotStronglyConnected));
    }

    #[test]
    fn admissible_circulant_single_temperature() {
        let c4 = make_circulant(&[1, 0, 1, 0]).unwrap();
        let report = admissible_inverse_temperatures(&c4).unwrap();
        assert_eq!(report.certificate, AdmissibilityCertificate::PositiveLeftEigenvector);
        assert_eq!(report.temperatures.len(), 1);
        assert_eq!(report.temperatures[0].lambda(), &TaggedReal::exact_int(2));
    }

    #[test]
    fn admissible_golden_ratio_left_perron() {
        let report = admissible_inverse_temperatures(&fib_graph()).unwrap();
        assert_eq!(report.certificate, AdmissibilityCertificate::PositiveLeftEigenvector);
        assert_eq!(report.temperatures.len(), 1);
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((report.temperatures[0].lambda().value() - phi).abs() < 1e-9);
    }

    #[test]
    fn admissible_enumeration_two_temperatures() {
        // loop plus complete-with-loops on two vertices: component radii 1, 2;
        // each carries a nonnegative eigenvector in the full graph
        let loop1 = build_graph(1, &[(0, 0)]).unwrap();
        let k2 = build_graph(2, &[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let g = disjoint_union(&loop1, &k2);
        let report = admissible_inverse_temperatures(&g).unwrap();
        assert_eq!(report.certificate, AdmissibilityCertificate::EigenvalueEnumeration);
        let lambdas: Vec<_> = report.temperatures.iter().map(|t| t.lambda().clone()).collect();
        assert_eq!(lambdas, vec![TaggedReal::exact_int(1), TaggedReal::exact_int(2)]);
    }

    #[test]
    fn admissible_enumeration_discards_unreachable_radius() {
        // two-vertex chain with loops: SCC radii both 1, only one temperature
        let g = build_graph(2, &[(0, 0), (0, 1), (1, 1)]).unwrap();
        let report = admissible_inverse_temperatures(&g).unwrap();
        assert_eq!(report.certificate, AdmissibilityCertificate::EigenvalueEnumeration);
        assert_eq!(report.temperatures.len(), 1);
        assert_eq!(report.temperatures[0].lambda(), &TaggedReal::exact_int(1));
    }

    #[test]
    fn evaluate_state_cases() {
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let s = unique_kms(&c3).unwrap();
        // projection value at the anchor
        let v = evaluate_state(&c3, &s, &PathWord::empty(1), &PathWord::empty(1)).unwrap();
        assert_eq!(v, TaggedReal::Exact(rat_frac(1, 3)));
        // distinct anchors are orthogonal projections
        let v = evaluate_state(&c3, &s, &PathWord::empty(0), &PathWord::empty(1)).unwrap();
        assert_eq!(v, TaggedReal::Exact(rat_int(0)));
        // mu = nu one edge: lambda = 1 so value is the target weight
        let v = evaluate_state(&c3, &s, &PathWord::edges(vec![0]), &PathWord::edges(vec![0])).unwrap();
        assert_eq!(v, TaggedReal::Exact(rat_frac(1, 3)));
        // mu != nu of equal length
        let v = evaluate_state(&c3, &s, &PathWord::edges(vec![0]), &PathWord::edges(vec![1])).unwrap();
        assert_eq!(v, TaggedReal::Exact(rat_int(0)));
        // non-composing word
        assert_eq!(
            evaluate_state(&c3, &s, &PathWord::edges(vec![0, 0]), &PathWord::edges(vec![0, 0])),
            Err(KmsError::NotAPath)
        );
    }

    #[test]
    fn subinvariance_and_factoring() {
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let uniform = |lambda: Rat| {
            KmsState::new(
                &c3,
                InverseTemperature::from_lambda(TaggedReal::Exact(lambda)).unwrap(),
                TaggedVec::Exact(vec![rat_frac(1, 3); 3]),
            )
            .unwrap()
        };
        // beta = ln 2: DN = N <= 2N strictly, but the eigen equation fails
        let s2 = uniform(rat_int(2));
        assert!(check_toeplitz_subinvariance(&c3, &s2).unwrap());
        assert!(!factors_through(&c3, &s2).unwrap());
        assert!(!s2.factors_through);
        // beta = ln(1/e) ~ negative temperature: subinvariance fails
        let sneg = KmsState::new(
            &c3,
            InverseTemperature::from_lambda(TaggedReal::Numeric { value: (-1.0f64).exp(), tolerance: 1e-12 })
                .unwrap(),
            TaggedVec::Exact(vec![rat_frac(1, 3); 3]),
        )
        .unwrap();
        assert!(!check_toeplitz_subinvariance(&c3, &sneg).unwrap());
        // equality case: members of the simplex satisfy both
        let s1 = uniform(rat_int(1));
        assert!(check_toeplitz_subinvariance(&c3, &s1).unwrap());
        assert!(factors_through(&c3, &s1).unwrap());
    }

    #[test]
    fn polytope_membership() {
        let c4 = make_circulant(&[1, 0, 1, 0]).unwrap();
        let p = kms_simplex(&c4, &BetaSpec::Lambda(rat_int(2))).unwrap();
        let mid = KmsState::new(
            &c4,
            p.beta.clone(),
            TaggedVec::Exact(vec![rat_frac(1, 4); 4]),
        )
        .unwrap();
        assert!(p.contains(&c4, &mid));
        let outside = KmsState::new(
            &c4,
            p.beta.clone(),
            TaggedVec::Exact(vec![rat_frac(1, 2), rat_frac(1, 2), rat_int(0), rat_int(0)]),
        )
        .unwrap();
        assert!(!p.contains(&c4, &outside));
    }

    #[test]
    fn uniform_state_membership_for_circulants() {
        for row in [[0i64, 1, 0, 0].as_slice(), &[1, 1, 0], &[1, 0, 1, 0, 1]] {
            let g = make_circulant(row).unwrap();
            let beta = critical_inverse_temperature(&g).unwrap();
            let u = uniform_state(&g, &beta).expect("uniform vector is always a critical state on circulants");
            let p = kms_simplex(&g, &BetaSpec::Critical).unwrap();
            assert!(p.contains(&g, &u));
        }
    }

    #[test]
    fn state_serialization_schema() {
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let s = unique_kms(&c3).unwrap();
        let json: serde_json::Value = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(json["beta"]["log_of"], "1");
        assert_eq!(json["weights"][0], "1/3");
        assert_eq!(json["factors_through"], true);
        let back: KmsState = serde_json::from_value(json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_probability_vectors() {
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let beta = critical_inverse_temperature(&c3).unwrap();
        let bad = KmsState::new(&c3, beta.clone(), TaggedVec::Exact(vec![rat_int(1), rat_int(0)]));
        assert!(matches!(bad, Err(KmsError::DimensionMismatch { .. })));
        let bad = KmsState::new(&c3, beta.clone(), TaggedVec::Exact(vec![rat_int(1), rat_int(1), rat_int(-1)]));
        assert!(matches!(bad, Err(KmsError::NotProbability(_))));
        let bad = KmsState::new(&c3, beta, TaggedVec::Exact(vec![rat_int(1), rat_int(1), rat_int(0)]));
        assert!(matches!(bad, Err(KmsError::NotProbability(_))));
    }
}
