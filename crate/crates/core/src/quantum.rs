//! Sound, computable verdicts about the quantum symmetry of a graph.
//!
//! The quantum automorphism group is never materialized. Instead, a fixed
//! list of decision rules — each a theorem about quantum vertex transitivity
//! or quantum-invariant states — is applied to computable data: classical
//! vertex transitivity, Perron eigenvectors, stable pair colorings, and
//! explicitly asserted facts about union components. Certificates and
//! refutations are mutually exclusive by soundness of the rules; when no
//! rule fires the verdict is `unknown` rather than a guess.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::DirectedGraph;
use crate::kms::{self, KmsError, KmsPolytope, KmsState};
use crate::spectral::{self, TaggedVec};
use crate::symmetry;

#[derive(Debug, Error, PartialEq)]
pub enum QuantumError {
    #[error("polytope is over {got} vertices but the graph has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("report requires a strongly connected graph")]
    NotStronglyConnected,
    #[error("kms error: {0}")]
    Kms(#[from] KmsError),
}

/// Stable coloring of ordered vertex pairs under iterated pair refinement.
///
/// The vertex cells (diagonal colors) are coarser than both the classical
/// orbits and the quantum orbits, which is what makes them usable for sound
/// refutations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherentPartition {
    pub vertex_cells: Vec<Vec<usize>>,
    pub pair_color_count: usize,
    pub rounds: usize,
}

/// Iterates pair recoloring to its fixed point. The initial color of (i, j)
/// is (i == j, D[i][j], D[j][i]); each round recolors (i, j) by the multiset
/// over k of (color(i, k), color(k, j)). Refinement is monotone, so the
/// round count is bounded by the number of pairs.
pub fn coherent_partition(g: &DirectedGraph) -> CoherentPartition {
    let n = g.vertex_count();
    let d = g.vertex_matrix();
    let pair = |i: usize, j: usize| i * n + j;

    let mut colors: Vec<u32> = vec![0; n * n];
    {
        let mut keyed: Vec<((bool, u64, u64), usize)> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                keyed.push(((i == j, d.get(i, j), d.get(j, i)), pair(i, j)));
            }
        }
        keyed.sort();
        let mut next_color = 0u32;
        let mut prev = None;
        for (key, idx) in keyed {
            if prev.as_ref() != Some(&key) {
                if prev.is_some() {
                    next_color += 1;
                }
                prev = Some(key);
            }
            colors[idx] = next_color;
        }
    }

    let mut color_count = colors.iter().max().map(|&c| c as usize + 1).unwrap_or(0);
    let mut rounds = 0usize;
    loop {
        rounds += 1;
        let mut keyed: Vec<(Vec<(u32, u32)>, usize)> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut sig: Vec<(u32, u32)> =
                    (0..n).map(|k| (colors[pair(i, k)], colors[pair(k, j)])).collect();
                sig.sort_unstable();
                keyed.push((sig, pair(i, j)));
            }
        }
        keyed.sort();
        let mut next = vec![0u32; n * n];
        let mut next_color = 0u32;
        let mut prev: Option<&Vec<(u32, u32)>> = None;
        for (key, idx) in &keyed {
            if prev != Some(key) {
                if prev.is_some() {
                    next_color += 1;
                }
                prev = Some(key);
            }
            next[*idx] = next_color;
        }
        let new_count = next_color as usize + 1;
        colors = next;
        if new_count == color_count {
            break;
        }
        debug_assert!(new_count > color_count, "pair refinement never merges colors");
        color_count = new_count;
    }

    let mut cells: Vec<(u32, Vec<usize>)> = Vec::new();
    for v in 0..n {
        let c = colors[pair(v, v)];
        match cells.iter_mut().find(|(col, _)| *col == c) {
            Some((_, cell)) => cell.push(v),
            None => cells.push((c, vec![v])),
        }
    }
    cells.sort_by_key(|(_, cell)| cell[0]);
    CoherentPartition {
        vertex_cells: cells.into_iter().map(|(_, cell)| cell).collect(),
        pair_color_count: color_count,
        rounds,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QvtStatus {
    CertifiedQvt,
    RefutedQvt,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleApplication {
    pub rule: String,
    pub cite: String,
}

/// Three-valued verdict on quantum vertex transitivity, carrying the rules
/// that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QSymVerdict {
    pub status: QvtStatus,
    pub provenance: Vec<RuleApplication>,
}

/// Facts about a disjoint union supplied by the caller for the union
/// certification rule: where the first component ends, and on whose
/// authority the two components are quantum isomorphic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnionQvtContext {
    pub first_vertex_count: usize,
    pub quantum_isomorphism_basis: String,
}

/// Outcome of evaluating every rule independently (used to audit soundness:
/// no graph may be both certified and refuted).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleDiagnostics {
    pub r1_certifies: bool,
    pub r2_certifies: Option<bool>,
    pub r3_refutes: bool,
    pub r4_refutes: bool,
}

fn tagged_vec_is_constant(v: &TaggedVec) -> bool {
    match v {
        TaggedVec::Exact(xs) => xs.windows(2).all(|w| w[0] == w[1]),
        TaggedVec::Numeric { entries, .. } => {
            let max = entries.iter().cloned().fold(f64::MIN, f64::max);
            let min = entries.iter().cloned().fold(f64::MAX, f64::min);
            max - min <= 1e-8
        }
    }
}

fn split_components(g: &DirectedGraph, first: usize) -> Option<(DirectedGraph, DirectedGraph)> {
    let n = g.vertex_count();
    if first == 0 || first >= n {
        return None;
    }
    let crosses = g
        .edges()
        .iter()
        .any(|&(s, t)| (s < first) != (t < first));
    if crosses {
        return None;
    }
    let left: Vec<usize> = (0..first).collect();
    let right: Vec<usize> = (first..n).collect();
    Some((g.induced_subgraph(&left), g.induced_subgraph(&right)))
}

/// Evaluates each verdict rule on its own.
pub fn rule_diagnostics(g: &DirectedGraph, context: Option<&UnionQvtContext>) -> RuleDiagnostics {
    let group = symmetry::automorphism_group(g);
    let r1 = symmetry::is_vertex_transitive(&group);

    let r2 = context.and_then(|ctx| {
        let (g1, g2) = split_components(g, ctx.first_vertex_count)?;
        let v1 = qvt_verdict(&g1, None);
        let v2 = qvt_verdict(&g2, None);
        Some(v1.status == QvtStatus::CertifiedQvt && v2.status == QvtStatus::CertifiedQvt)
    });

    let r3 = g.is_strongly_connected() && {
        let report = spectral::perron_data(&g.vertex_matrix()).expect("strongly connected is irreducible");
        let perron = report.perron_right.expect("perron data carries the right vector");
        !tagged_vec_is_constant(&perron)
    };

    let r4 = coherent_partition(g).vertex_cells.len() > 1;

    RuleDiagnostics { r1_certifies: r1, r2_certifies: r2, r3_refutes: r3, r4_refutes: r4 }
}

/// Applies, in order, the first conclusive rule:
///
/// - R1 certify: the classical group already acts transitively.
/// - R2 certify: a disjoint union of two quantum-isomorphic, certified
///   components (the quantum isomorphism is an asserted context fact).
/// - R3 refute: strongly connected with a non-constant Perron vector, so the
///   quantum action cannot be ergodic.
/// - R4 refute: the stable pair coloring splits the vertices; cells are
///   coarser than quantum orbits, so more than one cell excludes a single
///   orbit. A single cell certifies nothing in this direction.
pub fn qvt_verdict(g: &DirectedGraph, context: Option<&UnionQvtContext>) -> QSymVerdict {
    let diag = rule_diagnostics(g, context);
    debug_assert!(
        !((diag.r1_certifies || diag.r2_certifies == Some(true)) && (diag.r3_refutes || diag.r4_refutes)),
        "certify and refute rules fired together"
    );
    if diag.r1_certifies {
        return QSymVerdict {
            status: QvtStatus::CertifiedQvt,
            provenance: vec![RuleApplication {
                rule: "R1".into(),
                cite: "classical vertex transitivity implies quantum vertex transitivity".into(),
            }],
        };
    }
    if diag.r2_certifies == Some(true) {
        let ctx = context.expect("R2 fired only with context");
        return QSymVerdict {
            status: QvtStatus::CertifiedQvt,
            provenance: vec![RuleApplication {
                rule: "R2".into(),
                cite: format!(
                    "disjoint union of quantum-isomorphic, quantum vertex transitive components stays quantum vertex transitive; components quantum isomorphic by: {}",
                    ctx.quantum_isomorphism_basis
                ),
            }],
        };
    }
    if diag.r3_refutes {
        return QSymVerdict {
            status: QvtStatus::RefutedQvt,
            provenance: vec![RuleApplication {
                rule: "R3".into(),
                cite: "strongly connected with non-constant Perron eigenvector: the quantum action is non-ergodic, hence not quantum vertex transitive".into(),
            }],
        };
    }
    if diag.r4_refutes {
        return QSymVerdict {
            status: QvtStatus::RefutedQvt,
            provenance: vec![RuleApplication {
                rule: "R4".into(),
                cite: "stable pair-refinement colors split the vertex set; quantum orbits refine stable cells, so one orbit is impossible".into(),
            }],
        };
    }
    QSymVerdict { status: QvtStatus::Unknown, provenance: vec![] }
}

/// The quantum-invariant slice of a KMS polytope, as far as the sound rules
/// determine it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumInvariantReport {
    /// The uniform state, whenever it lies in the polytope: uniform weights
    /// are quantum-invariant unconditionally (column sums of the magic
    /// unitary are 1).
    pub uniform_member: Option<KmsState>,
    pub determination: QuantumInvariantSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantumInvariantSet {
    /// Certified quantum vertex transitivity forces equal weights, so the
    /// quantum-invariant set is exactly the uniform member.
    ExactlyUniform { state: KmsState },
    /// Certified transitivity but the uniform vector is not a state at this
    /// temperature: the quantum-invariant set is empty.
    EmptyCertified,
    /// Necessary condition only: states constant on each asserted quantum
    /// orbit (the caller supplied the orbit partition).
    OrbitConstrained { polytope: KmsPolytope },
    /// Nothing beyond the uniform member can be concluded.
    UndeterminedBeyondUniform,
}

/// Determines the quantum-invariant KMS states at the polytope's temperature.
///
/// With a certified verdict the answer is exact: invariance forces all
/// vertex weights equal, so the set is `{uniform}` intersected with the
/// polytope. Otherwise only the unconditional uniform membership and, when
/// quantum orbits are asserted, the constancy filter are reported.
pub fn quantum_invariant_kms(
    g: &DirectedGraph,
    polytope: &KmsPolytope,
    verdict: &QSymVerdict,
    asserted_quantum_orbits: Option<&[Vec<usize>]>,
) -> Result<QuantumInvariantReport, QuantumError> {
    for p in &polytope.extreme_points {
        if p.weights.len() != g.vertex_count() {
            return Err(QuantumError::DimensionMismatch { expected: g.vertex_count(), got: p.weights.len() });
        }
    }
    let uniform_member = kms::uniform_state(g, &polytope.beta);
    let determination = match verdict.status {
        QvtStatus::CertifiedQvt => match &uniform_member {
            Some(u) => QuantumInvariantSet::ExactlyUniform { state: u.clone() },
            None => QuantumInvariantSet::EmptyCertified,
        },
        _ => match asserted_quantum_orbits {
            Some(orbits) => {
                let pairs: Vec<(usize, usize)> = orbits
                    .iter()
                    .flat_map(|o| o.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>())
                    .collect();
                let constrained = kms::polytope_with_equal_coordinates(g, &polytope.beta, &pairs)?;
                QuantumInvariantSet::OrbitConstrained { polytope: constrained }
            }
            None => QuantumInvariantSet::UndeterminedBeyondUniform,
        },
    };
    Ok(QuantumInvariantReport { uniform_member, determination })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErgodicityVerdict {
    /// Non-constant Perron vector: the unique KMS state separates vertices,
    /// so the quantum action on functions on vertices is not ergodic.
    NonErgodic,
    /// Constant Perron vector; this criterion is silent.
    UndeterminedByThisRule,
}

/// For a strongly connected graph: the unique KMS state, the unconditional
/// fact that the quantum symmetry preserves it, and the ergodicity
/// consequence of its Perron vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StronglyConnectedQuantumReport {
    pub state: KmsState,
    pub quantum_invariant: bool,
    pub basis: String,
    pub ergodicity: ErgodicityVerdict,
}

pub fn strongly_connected_quantum_report(
    g: &DirectedGraph,
) -> Result<StronglyConnectedQuantumReport, QuantumError> {
    if !g.is_strongly_connected() {
        return Err(QuantumError::NotStronglyConnected);
    }
    let state = kms::unique_kms(g)?;
    let ergodicity = if tagged_vec_is_constant(&state.weights) {
        ErgodicityVerdict::UndeterminedByThisRule
    } else {
        ErgodicityVerdict::NonErgodic
    };
    Ok(StronglyConnectedQuantumReport {
        state,
        quantum_invariant: true,
        basis: "the quantum automorphism group preserves the unique KMS state of a strongly connected graph"
            .into(),
        ergodicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, disjoint_union, make_circulant};
    use crate::kms::{kms_simplex, BetaSpec};
    use crate::linalg::rat_int;

    #[test]
    fn coherent_partition_three_cycle_single_cell() {
        let g = make_circulant(&[0, 1, 0]).unwrap();
        let cp = coherent_partition(&g);
        assert_eq!(cp.vertex_cells, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn coherent_partition_path_splits_everything() {
        let g = build_graph(3, &[(0, 1), (1, 2)]).unwrap();
        let cp = coherent_partition(&g);
        assert_eq!(cp.vertex_cells.len(), 3);
    }

    #[test]
    fn coherent_partition_round_bound() {
        let g = build_graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2), (1, 3)]).unwrap();
        let cp = coherent_partition(&g);
        assert!(cp.rounds <= 25);
        assert!(cp.pair_color_count <= 25);
    }

    #[test]
    fn cells_are_unions_of_classical_orbits() {
        for row in [[0i64, 1, 0].as_slice(), &[1, 0, 1, 0], &[0, 1, 1, 0, 0]] {
            let g = make_circulant(row).unwrap();
            let cp = coherent_partition(&g);
            let group = symmetry::automorphism_group(&g);
            let cell_of = |v: usize| cp.vertex_cells.iter().position(|c| c.contains(&v)).unwrap();
            for gen in &group.generators {
                for v in 0..g.vertex_count() {
                    assert_eq!(cell_of(v), cell_of(gen.apply(v)));
                }
            }
        }
    }

    #[test]
    fn refutes_by_nonconstant_perron() {
        let g = build_graph(2, &[(0, 0), (0, 1), (1, 0)]).unwrap();
        let verdict = qvt_verdict(&g, None);
        assert_eq!(verdict.status, QvtStatus::RefutedQvt);
        assert_eq!(verdict.provenance[0].rule, "R3");
    }

    #[test]
    fn certifies_vertex_transitive_graph() {
        let g = make_circulant(&[0, 1, 0, 1]).unwrap();
        let verdict = qvt_verdict(&g, None);
        assert_eq!(verdict.status, QvtStatus::CertifiedQvt);
        assert_eq!(verdict.provenance[0].rule, "R1");
    }

    #[test]
    fn refutes_union_of_different_cycles_by_stable_cells() {
        // not strongly connected and no R1/R2, so the stable coloring rule fires
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let c4 = make_circulant(&[0, 1, 0, 0]).unwrap();
        let g = disjoint_union(&c3, &c4);
        let verdict = qvt_verdict(&g, None);
        assert_eq!(verdict.status, QvtStatus::RefutedQvt);
        assert_eq!(verdict.provenance[0].rule, "R4");
    }

    #[test]
    fn union_rule_with_context() {
        // two isomorphic 3-cycles: both components certified, union asserted
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let g = disjoint_union(&c3, &c3);
        let ctx = UnionQvtContext {
            first_vertex_count: 3,
            quantum_isomorphism_basis: "components are classically isomorphic".into(),
        };
        let verdict = qvt_verdict(&g, Some(&ctx));
        assert_eq!(verdict.status, QvtStatus::CertifiedQvt);
        // this union is also classically vertex transitive, so R1 wins the order
        assert_eq!(verdict.provenance[0].rule, "R1");

        // context with a bad split is ignored
        let bad = UnionQvtContext { first_vertex_count: 2, quantum_isomorphism_basis: "wrong".into() };
        let verdict = qvt_verdict(&g, Some(&bad));
        assert_eq!(verdict.status, QvtStatus::CertifiedQvt);
    }

    #[test]
    fn quantum_invariant_uniform_for_circulant() {
        let g = make_circulant(&[1, 0, 1, 0]).unwrap();
        let p = kms_simplex(&g, &BetaSpec::Lambda(rat_int(2))).unwrap();
        let verdict = qvt_verdict(&g, None);
        assert_eq!(verdict.status, QvtStatus::CertifiedQvt);
        let report = quantum_invariant_kms(&g, &p, &verdict, None).unwrap();
        let QuantumInvariantSet::ExactlyUniform { state } = &report.determination else {
            panic!("expected the uniform point, got {:?}", report.determination);
        };
        assert_eq!(state.weights.as_exact().unwrap(), &vec![crate::linalg::rat_frac(1, 4); 4]);
        assert!(report.uniform_member.is_some());
    }

    #[test]
    fn strongly_connected_report_cases() {
        // non-constant Perron vector: non-ergodic
        let g = build_graph(2, &[(0, 0), (0, 1), (1, 0)]).unwrap();
        let report = strongly_connected_quantum_report(&g).unwrap();
        assert!(report.quantum_invariant);
        assert_eq!(report.ergodicity, ErgodicityVerdict::NonErgodic);

        // uniform Perron vector: rule is silent
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let report = strongly_connected_quantum_report(&c3).unwrap();
        assert_eq!(report.ergodicity, ErgodicityVerdict::UndeterminedByThisRule);

        let path = build_graph(2, &[(0, 1), (1, 1)]).unwrap();
        assert_eq!(strongly_connected_quantum_report(&path), Err(QuantumError::NotStronglyConnected));
    }

    #[test]
    fn verdict_serialization() {
        let g = make_circulant(&[0, 1, 0]).unwrap();
        let verdict = qvt_verdict(&g, None);
        let json: serde_json::Value = serde_json::from_str(&serde_json::to_string(&verdict).unwrap()).unwrap();
        assert_eq!(json["status"], "certified_qvt");
        assert_eq!(json["provenance"][0]["rule"], "R1");
        let back: QSymVerdict = serde_json::from_value(json).unwrap();
        assert_eq!(back, verdict);
    }
}
