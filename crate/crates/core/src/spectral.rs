//! Spectral analysis of nonnegative integer matrices: spectral radius with
//! an exact-integer fast path, exact rational eigenspaces, Perron data for
//! irreducible matrices, and circulant spectra via roots of unity.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{self, IntMatrix, Rat};

pub const RADIUS_INT_MATCH: f64 = 1e-8;
pub const RADIUS_NUMERIC_TOLERANCE: f64 = 1e-10;
pub const PERRON_NUMERIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpectralError {
    #[error("Perron data requires irreducibility")]
    Reducible,
}

/// A real quantity tagged with its exactness: a reduced fraction, or a float
/// with an absolute tolerance.
#[derive(Debug, Clone, PartialEq)]
pub enum TaggedReal {
    Exact(Rat),
    Numeric { value: f64, tolerance: f64 },
}

impl TaggedReal {
    pub fn exact_int(v: i64) -> Self {
        TaggedReal::Exact(linalg::rat_int(v))
    }

    pub fn value(&self) -> f64 {
        match self {
            TaggedReal::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            TaggedReal::Numeric { value, .. } => *value,
        }
    }

    pub fn as_exact(&self) -> Option<&Rat> {
        match self {
            TaggedReal::Exact(r) => Some(r),
            TaggedReal::Numeric { .. } => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, TaggedReal::Exact(_))
    }
}

impl fmt::Display for TaggedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaggedReal::Exact(r) => write!(f, "{r}"),
            TaggedReal::Numeric { value, .. } => write!(f, "{value}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TaggedRealRepr {
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    approx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    numeric: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

impl Serialize for TaggedReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = match self {
            TaggedReal::Exact(r) => TaggedRealRepr {
                exact: Some(r.to_string()),
                approx: Some(self.value()),
                numeric: None,
                tolerance: None,
            },
            TaggedReal::Numeric { value, tolerance } => TaggedRealRepr {
                exact: None,
                approx: None,
                numeric: Some(*value),
                tolerance: Some(*tolerance),
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TaggedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = TaggedRealRepr::deserialize(d)?;
        if let Some(text) = repr.exact {
            let r = Rat::from_str(&text).map_err(|e| D::Error::custom(format!("bad fraction {text:?}: {e}")))?;
            Ok(TaggedReal::Exact(r))
        } else if let (Some(value), Some(tolerance)) = (repr.numeric, repr.tolerance) {
            Ok(TaggedReal::Numeric { value, tolerance })
        } else {
            Err(D::Error::custom("expected either exact or numeric+tolerance"))
        }
    }
}

/// A vector tagged with its exactness, mirroring [`TaggedReal`].
#[derive(Debug, Clone, PartialEq)]
pub enum TaggedVec {
    Exact(Vec<Rat>),
    Numeric { entries: Vec<f64>, tolerance: f64 },
}

impl TaggedVec {
    pub fn len(&self) -> usize {
        match self {
            TaggedVec::Exact(v) => v.len(),
            TaggedVec::Numeric { entries, .. } => entries.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value_at(&self, i: usize) -> f64 {
        match self {
            TaggedVec::Exact(v) => v[i].to_f64().unwrap_or(f64::NAN),
            TaggedVec::Numeric { entries, .. } => entries[i],
        }
    }

    pub fn as_exact(&self) -> Option<&[Rat]> {
        match self {
            TaggedVec::Exact(v) => Some(v),
            TaggedVec::Numeric { .. } => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, TaggedVec::Exact(_))
    }
}

#[derive(Serialize, Deserialize)]
struct TaggedVecRepr {
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    numeric: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
}

impl Serialize for TaggedVec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = match self {
            TaggedVec::Exact(v) => TaggedVecRepr {
                exact: Some(v.iter().map(|r| r.to_string()).collect()),
                numeric: None,
                tolerance: None,
            },
            TaggedVec::Numeric { entries, tolerance } => TaggedVecRepr {
                exact: None,
                numeric: Some(entries.clone()),
                tolerance: Some(*tolerance),
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TaggedVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = TaggedVecRepr::deserialize(d)?;
        if let Some(texts) = repr.exact {
            let mut v = Vec::with_capacity(texts.len());
            for t in texts {
                v.push(Rat::from_str(&t).map_err(|e| D::Error::custom(format!("bad fraction {t:?}: {e}")))?);
            }
            Ok(TaggedVec::Exact(v))
        } else if let (Some(entries), Some(tolerance)) = (repr.numeric, repr.tolerance) {
            Ok(TaggedVec::Numeric { entries, tolerance })
        } else {
            Err(D::Error::custom("expected either exact or numeric+tolerance"))
        }
    }
}

/// Spectral radius, eigenvalue status, and eigenspace data at the radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub radius: TaggedReal,
    pub radius_is_eigenvalue: bool,
    pub multiplicity: usize,
    pub right_eigenspace_basis: Vec<TaggedVec>,
    pub left_eigenspace_basis: Vec<TaggedVec>,
    pub perron_right: Option<TaggedVec>,
    pub perron_left: Option<TaggedVec>,
}

/// Largest eigenvalue modulus of a nonnegative integer matrix.
///
/// Integer radii are detected exactly: the power-iteration estimate is
/// matched (within 1e-8) against integer candidates in the Perron row-sum
/// band, and the candidate is confirmed by an exact rank test of `D - rI`.
/// Anything else is returned as the numeric estimate with tolerance 1e-10.
pub fn spectral_radius(d: &IntMatrix) -> TaggedReal {
    let (estimate, _) = linalg::power_iteration(d);
    let lo = d.min_row_sum();
    let hi = d.max_row_sum();
    let candidate = estimate.round();
    if candidate >= 0.0
        && (estimate - candidate).abs() <= RADIUS_INT_MATCH
        && candidate >= lo as f64
        && candidate <= hi as f64
    {
        let r = linalg::rat_int(candidate as i64);
        if is_eigenvalue(d, &r) {
            return TaggedReal::Exact(r);
        }
    }
    TaggedReal::Numeric { value: estimate, tolerance: RADIUS_NUMERIC_TOLERANCE }
}

/// True iff `lambda` is an eigenvalue of `d`, by exact rank computation.
pub fn is_eigenvalue(d: &IntMatrix, lambda: &Rat) -> bool {
    linalg::rank(&d.shifted(lambda)) < d.size()
}

/// Exact rational basis of `{v : D v = lambda v}`; empty iff `lambda` is not
/// an eigenvalue. Residuals are exactly zero.
pub fn eigenspace_at(d: &IntMatrix, lambda: &Rat) -> Vec<Vec<Rat>> {
    linalg::null_space(&d.shifted(lambda))
}

/// Irreducibility of the nonzero pattern: every index pair is joined by a
/// path through nonzero entries.
pub fn is_irreducible(d: &IntMatrix) -> bool {
    let n = d.size();
    if n == 1 {
        return true;
    }
    let reach = |transpose: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                let entry = if transpose { d.get(w, v) } else { d.get(v, w) };
                if entry != 0 && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach(false) && reach(true)
}

fn normalize_sum_one(v: &[Rat]) -> Vec<Rat> {
    let total: Rat = v.iter().sum();
    v.iter().map(|x| x / &total).collect()
}

/// Radius plus one-dimensional positive left/right eigendata for an
/// irreducible matrix. Exact when the radius is an integer, numeric with
/// tolerance 1e-9 otherwise; Perron vectors are normalized to entry sum 1.
pub fn perron_data(d: &IntMatrix) -> Result<SpectralReport, SpectralError> {
    if !is_irreducible(d) {
        return Err(SpectralError::Reducible);
    }
    let radius = spectral_radius(d);
    match &radius {
        TaggedReal::Exact(r) => {
            let right = eigenspace_at(d, r);
            let left = eigenspace_at(&d.transpose(), r);
            debug_assert_eq!(right.len(), 1, "irreducible matrices have a simple radius");
            debug_assert_eq!(left.len(), 1);
            let pr = normalize_sum_one(&right[0]);
            let pl = normalize_sum_one(&left[0]);
            debug_assert!(pr.iter().all(|x| x.is_positive()));
            let multiplicity = right.len();
            Ok(SpectralReport {
                radius,
                radius_is_eigenvalue: true,
                multiplicity,
                right_eigenspace_basis: right.into_iter().map(TaggedVec::Exact).collect(),
                left_eigenspace_basis: left.into_iter().map(TaggedVec::Exact).collect(),
                perron_right: Some(TaggedVec::Exact(pr)),
                perron_left: Some(TaggedVec::Exact(pl)),
            })
        }
        TaggedReal::Numeric { .. } => {
            let (_, right) = linalg::power_iteration(d);
            let (_, left) = linalg::power_iteration(&d.transpose());
            let right = TaggedVec::Numeric { entries: right, tolerance: PERRON_NUMERIC_TOLERANCE };
            let left = TaggedVec::Numeric { entries: left, tolerance: PERRON_NUMERIC_TOLERANCE };
            Ok(SpectralReport {
                radius,
                radius_is_eigenvalue: true,
                multiplicity: 1,
                right_eigenspace_basis: vec![right.clone()],
                left_eigenspace_basis: vec![left.clone()],
                perron_right: Some(right),
                perron_left: Some(left),
            })
        }
    }
}

/// Spectral report for an arbitrary nonnegative integer matrix (no
/// irreducibility assumption). Perron vectors are attached only when the
/// eigenspace at the radius is one-dimensional and strictly positive.
pub fn spectral_report(d: &IntMatrix) -> SpectralReport {
    let radius = spectral_radius(d);
    match &radius {
        TaggedReal::Exact(r) => {
            let right = eigenspace_at(d, r);
            let left = eigenspace_at(&d.transpose(), r);
            let multiplicity = right.len();
            let positive_single = |basis: &[Vec<Rat>]| {
                (basis.len() == 1 && basis[0].iter().all(|x| x.is_positive()))
                    .then(|| TaggedVec::Exact(normalize_sum_one(&basis[0])))
            };
            let perron_right = positive_single(&right);
            let perron_left = positive_single(&left);
            SpectralReport {
                radius_is_eigenvalue: multiplicity > 0,
                multiplicity,
                right_eigenspace_basis: right.into_iter().map(TaggedVec::Exact).collect(),
                left_eigenspace_basis: left.into_iter().map(TaggedVec::Exact).collect(),
                perron_right,
                perron_left,
                radius,
            }
        }
        TaggedReal::Numeric { value, .. } => {
            let (_, right) = linalg::power_iteration(d);
            let (_, left) = linalg::power_iteration(&d.transpose());
            let residual = d
                .matvec_f64(&right)
                .iter()
                .zip(right.iter())
                .map(|(dv, v)| (dv - value * v).abs())
                .fold(0.0f64, f64::max);
            let ok = residual <= 1e-6 * value.max(1.0);
            let strictly_positive = |v: &[f64]| v.iter().all(|&x| x > PERRON_NUMERIC_TOLERANCE);
            let as_tagged = |v: Vec<f64>| TaggedVec::Numeric { entries: v, tolerance: PERRON_NUMERIC_TOLERANCE };
            SpectralReport {
                radius_is_eigenvalue: ok,
                multiplicity: if ok { 1 } else { 0 },
                perron_right: strictly_positive(&right).then(|| as_tagged(right.clone())),
                perron_left: strictly_positive(&left).then(|| as_tagged(left.clone())),
                right_eigenspace_basis: vec![as_tagged(right)],
                left_eigenspace_basis: vec![as_tagged(left)],
                radius,
            }
        }
    }
}

/// Eigenvalues of the circulant matrix with the given first row, evaluated
/// as root-of-unity sums: `lambda_l = sum_j d_j eps^(l j)`.
///
/// `lambda_0` comes out as the exact row sum since all exponents reduce to
/// zero there.
pub fn circulant_spectrum(first_row: &[i64]) -> Vec<Complex64> {
    let m = first_row.len();
    (0..m)
        .map(|l| {
            (0..m)
                .map(|j| {
                    let e = (l * j) % m;
                    let angle = 2.0 * std::f64::consts::PI * e as f64 / m as f64;
                    Complex64::new(angle.cos(), angle.sin()) * first_row[j] as f64
                })
                .sum()
        })
        .collect()
}
