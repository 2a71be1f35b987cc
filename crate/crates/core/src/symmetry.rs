//! Classical graph symmetry: automorphism groups by equitable-partition
//! refinement with individualization backtracking, isomorphism testing with
//! the same engine, orbit computation, a stabilizer chain for exact group
//! order, and invariance filtering of KMS polytopes.
//!
//! Everything is deterministic: cells are kept sorted, the branch target is
//! always the lowest-index vertex of the first smallest non-singleton cell,
//! and candidates are tried in ascending order.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::One;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::DirectedGraph;
use crate::kms::{KmsError, KmsPolytope, KmsState};
use crate::spectral::TaggedVec;

#[derive(Debug, Error, PartialEq)]
pub enum SymmetryError {
    #[error("permutation images are not a bijection on 0..{0}")]
    NotABijection(usize),
    #[error("object has {got} entries but the graph has {expected} vertices")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("components are isomorphic; the product rule needs non-isomorphic components")]
    IsomorphicComponents,
    #[error("component {0} is not connected")]
    NotConnected(usize),
    #[error("kms error: {0}")]
    Kms(#[from] KmsError),
}

/// A vertex permutation given by its image list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self, SymmetryError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in &images {
            if v >= n || seen[v] {
                return Err(SymmetryError::NotABijection(n));
            }
            seen[v] = true;
        }
        Ok(Permutation { images })
    }

    pub fn identity(n: usize) -> Self {
        Permutation { images: (0..n).collect() }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, v: usize) -> usize {
        self.images[v]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.images.len()];
        for (v, &w) in self.images.iter().enumerate() {
            inv[w] = v;
        }
        Permutation { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// Adjacency preservation: every edge maps to an edge (a bijection on a
    /// finite edge set, so non-edges are preserved automatically).
    pub fn is_automorphism(&self, g: &DirectedGraph) -> bool {
        self.images.len() == g.vertex_count()
            && g.edges().iter().all(|&(s, t)| g.has_edge(self.apply(s), self.apply(t)))
    }

    /// Checks that applying this map edge-by-edge turns `g1` into `g2`.
    pub fn is_isomorphism(&self, g1: &DirectedGraph, g2: &DirectedGraph) -> bool {
        self.images.len() == g1.vertex_count()
            && g1.vertex_count() == g2.vertex_count()
            && g1.edge_count() == g2.edge_count()
            && g1.edges().iter().all(|&(s, t)| g2.has_edge(self.apply(s), self.apply(t)))
    }
}

/// Generators, vertex orbits, and the exact order of `Aut(g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutomorphismGroup {
    pub generators: Vec<Permutation>,
    pub orbits: Vec<Vec<usize>>,
    pub order: BigUint,
}

#[derive(Serialize, Deserialize)]
struct AutomorphismGroupRepr {
    generators: Vec<Vec<usize>>,
    orbits: Vec<Vec<usize>>,
    order: String,
}

impl Serialize for AutomorphismGroup {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AutomorphismGroupRepr {
            generators: self.generators.iter().map(|p| p.images.clone()).collect(),
            orbits: self.orbits.clone(),
            order: self.order.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AutomorphismGroup {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = AutomorphismGroupRepr::deserialize(d)?;
        let mut generators = Vec::with_capacity(repr.generators.len());
        for images in repr.generators {
            generators.push(Permutation::new(images).map_err(D::Error::custom)?);
        }
        let order = repr.order.parse::<BigUint>().map_err(D::Error::custom)?;
        Ok(AutomorphismGroup { generators, orbits: repr.orbits, order })
    }
}

/// Aligned ordered partitions of the two vertex sets; refinement keeps the
/// cell lists structurally identical on both sides.
type PairCells = Vec<(Vec<usize>, Vec<usize>)>;

fn unit_partition(n1: usize, n2: usize) -> PairCells {
    vec![((0..n1).collect(), (0..n2).collect())]
}

fn cell_index_map(cells: &PairCells, side_right: bool, n: usize) -> Vec<usize> {
    let mut map = vec![0usize; n];
    for (idx, cell) in cells.iter().enumerate() {
        let verts = if side_right { &cell.1 } else { &cell.0 };
        for &v in verts {
            map[v] = idx;
        }
    }
    map
}

fn vertex_signatures(g: &DirectedGraph, cell_of: &[usize], ncells: usize) -> Vec<Vec<(u32, u32)>> {
    let mut sigs = vec![vec![(0u32, 0u32); ncells]; g.vertex_count()];
    for &(s, t) in g.edges() {
        sigs[s][cell_of[t]].0 += 1;
        sigs[t][cell_of[s]].1 += 1;
    }
    sigs
}

/// Refines both partitions to the common equitable fixed point, splitting by
/// per-cell (out-degree, in-degree) signature vectors. Returns false when
/// the signature multisets of an aligned cell pair disagree, which proves no
/// isomorphism respects the current partition.
fn joint_refine(g1: &DirectedGraph, g2: &DirectedGraph, cells: &mut PairCells) -> bool {
    loop {
        let ncells = cells.len();
        let cell_of_1 = cell_index_map(cells, false, g1.vertex_count());
        let cell_of_2 = cell_index_map(cells, true, g2.vertex_count());
        let sig1 = vertex_signatures(g1, &cell_of_1, ncells);
        let sig2 = vertex_signatures(g2, &cell_of_2, ncells);
        let mut next: PairCells = Vec::with_capacity(ncells);
        let mut split = false;
        for (left, right) in cells.iter() {
            if left.len() != right.len() {
                return false;
            }
            if left.len() == 1 {
                if sig1[left[0]] != sig2[right[0]] {
                    return false;
                }
                next.push((left.clone(), right.clone()));
                continue;
            }
            let mut lgroups: BTreeMap<&Vec<(u32, u32)>, Vec<usize>> = BTreeMap::new();
            for &v in left {
                lgroups.entry(&sig1[v]).or_default().push(v);
            }
            let mut rgroups: BTreeMap<&Vec<(u32, u32)>, Vec<usize>> = BTreeMap::new();
            for &v in right {
                rgroups.entry(&sig2[v]).or_default().push(v);
            }
            if lgroups.len() != rgroups.len() {
                return false;
            }
            if lgroups.len() > 1 {
                split = true;
            }
            for ((lk, lv), (rk, rv)) in lgroups.into_iter().zip(rgroups) {
                if lk != rk || lv.len() != rv.len() {
                    return false;
                }
                next.push((lv, rv));
            }
        }
        *cells = next;
        if !split {
            return true;
        }
    }
}

fn first_smallest_non_singleton(cells: &PairCells) -> Option<usize> {
    let min_size = cells.iter().map(|(l, _)| l.len()).filter(|&s| s > 1).min()?;
    cells.iter().position(|(l, _)| l.len() == min_size)
}

fn individualize(cells: &PairCells, cell: usize, v: usize, w: usize) -> PairCells {
    let mut next = Vec::with_capacity(cells.len() + 1);
    for (idx, (left, right)) in cells.iter().enumerate() {
        if idx == cell {
            next.push((vec![v], vec![w]));
            next.push((
                left.iter().copied().filter(|&x| x != v).collect(),
                right.iter().copied().filter(|&x| x != w).collect(),
            ));
        } else {
            next.push((left.clone(), right.clone()));
        }
    }
    next
}

/// Completes an already-refined compatible partition pair to a bijection, or
/// proves none extends it. Branch target: lowest-index vertex of the first
/// smallest non-singleton cell; candidates ascending.
fn extend_search(g1: &DirectedGraph, g2: &DirectedGraph, cells: PairCells) -> Option<Permutation> {
    match first_smallest_non_singleton(&cells) {
        None => {
            let mut images = vec![0usize; g1.vertex_count()];
            for (left, right) in &cells {
                images[left[0]] = right[0];
            }
            let p = Permutation { images };
            p.is_isomorphism(g1, g2).then_some(p)
        }
        Some(c) => {
            let v = cells[c].0[0];
            let candidates = cells[c].1.clone();
            for &w in &candidates {
                let mut next = individualize(&cells, c, v, w);
                if joint_refine(g1, g2, &mut next) {
                    if let Some(p) = extend_search(g1, g2, next) {
                        return Some(p);
                    }
                }
            }
            None
        }
    }
}

/// A vertex bijection turning `g1` into `g2`, if one exists. The returned
/// certificate verifies by direct adjacency check.
pub fn are_isomorphic(g1: &DirectedGraph, g2: &DirectedGraph) -> Option<Permutation> {
    if g1.vertex_count() != g2.vertex_count() || g1.edge_count() != g2.edge_count() {
        return None;
    }
    let mut cells = unit_partition(g1.vertex_count(), g2.vertex_count());
    if !joint_refine(g1, g2, &mut cells) {
        return None;
    }
    extend_search(g1, g2, cells)
}

fn orbit_closure(start: usize, gens: &[&Permutation], n: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    let mut orbit = vec![start];
    while let Some(v) = stack.pop() {
        for g in gens {
            for w in [g.apply(v), g.inverse().apply(v)] {
                if !seen[w] {
                    seen[w] = true;
                    orbit.push(w);
                    stack.push(w);
                }
            }
        }
    }
    orbit.sort_unstable();
    orbit
}

/// The automorphism group: generators from a stabilizer-chain search, vertex
/// orbits, and the exact order (product of fundamental orbit lengths).
pub fn automorphism_group(g: &DirectedGraph) -> AutomorphismGroup {
    let n = g.vertex_count();
    let mut cells = unit_partition(n, n);
    let refined = joint_refine(g, g, &mut cells);
    debug_assert!(refined, "a graph is always compatible with itself");

    // base path: individualize the canonical base point at each level
    let mut path: Vec<(PairCells, usize, usize)> = Vec::new();
    while let Some(c) = first_smallest_non_singleton(&cells) {
        let b = cells[c].0[0];
        path.push((cells.clone(), c, b));
        cells = individualize(&cells, c, b, b);
        let ok = joint_refine(g, g, &mut cells);
        debug_assert!(ok);
    }

    let mut generators: Vec<Permutation> = Vec::new();
    let mut generator_levels: Vec<usize> = Vec::new();
    let mut order = BigUint::one();
    for i in (0..path.len()).rev() {
        let (cells_i, c_i, b_i) = &path[i];
        let candidates = cells_i[*c_i].1.clone();
        let fixed_prefix_orbit = |gens: &[Permutation], levels: &[usize]| -> Vec<usize> {
            let refs: Vec<&Permutation> =
                gens.iter().zip(levels).filter(|(_, &l)| l >= i).map(|(g, _)| g).collect();
            orbit_closure(*b_i, &refs, n)
        };
        let mut orbit = fixed_prefix_orbit(&generators, &generator_levels);
        for &w in &candidates {
            if w == *b_i || orbit.binary_search(&w).is_ok() {
                continue;
            }
            let mut pp = individualize(cells_i, *c_i, *b_i, w);
            if !joint_refine(g, g, &mut pp) {
                continue;
            }
            if let Some(sigma) = extend_search(g, g, pp) {
                debug_assert!(sigma.is_automorphism(g));
                generators.push(sigma);
                generator_levels.push(i);
                orbit = fixed_prefix_orbit(&generators, &generator_levels);
            }
        }
        order *= BigUint::from(orbit.len());
    }

    let orbits = vertex_orbits(n, &generators);
    AutomorphismGroup { generators, orbits, order }
}

fn vertex_orbits(n: usize, gens: &[Permutation]) -> Vec<Vec<usize>> {
    let refs: Vec<&Permutation> = gens.iter().collect();
    let mut assigned = vec![false; n];
    let mut orbits = Vec::new();
    for v in 0..n {
        if assigned[v] {
            continue;
        }
        let orbit = orbit_closure(v, &refs, n);
        for &w in &orbit {
            assigned[w] = true;
        }
        orbits.push(orbit);
    }
    orbits
}

/// Single orbit = the group moves every vertex to every other.
pub fn is_vertex_transitive(group: &AutomorphismGroup) -> bool {
    group.orbits.len() == 1
}

/// Invariance of the weight vector under the group: checking the generators
/// suffices, because the fixed vectors of a group are exactly the common
/// fixed vectors of any generating set.
pub fn is_state_invariant(group: &AutomorphismGroup, state: &KmsState) -> Result<bool, SymmetryError> {
    let n = state.weights.len();
    for gen in &group.generators {
        if gen.degree() != n {
            return Err(SymmetryError::DimensionMismatch { expected: gen.degree(), got: n });
        }
    }
    match &state.weights {
        TaggedVec::Exact(v) => Ok(group
            .generators
            .iter()
            .all(|g| (0..n).all(|i| v[g.apply(i)] == v[i]))),
        TaggedVec::Numeric { entries, tolerance } => {
            let tol = tolerance.max(1e-12);
            Ok(group
                .generators
                .iter()
                .all(|g| (0..n).all(|i| (entries[g.apply(i)] - entries[i]).abs() <= tol)))
        }
    }
}

/// Intersects a KMS polytope with the fixed subspace of the group: the
/// defining eigen system is extended by the orbit equalities and the extreme
/// points are re-enumerated.
pub fn invariant_kms_subpolytope(
    g: &DirectedGraph,
    group: &AutomorphismGroup,
    polytope: &KmsPolytope,
) -> Result<KmsPolytope, SymmetryError> {
    let n = g.vertex_count();
    for gen in &group.generators {
        if gen.degree() != n {
            return Err(SymmetryError::DimensionMismatch { expected: n, got: gen.degree() });
        }
    }
    let orbit_rows: Vec<(usize, usize)> = group
        .orbits
        .iter()
        .flat_map(|orbit| orbit.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>())
        .collect();
    Ok(crate::kms::polytope_with_equal_coordinates(g, &polytope.beta, &orbit_rows)?)
}

fn is_weakly_connected(g: &DirectedGraph) -> bool {
    let n = g.vertex_count();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        let neighbors = g
            .out_edge_ids(v)
            .iter()
            .map(|&e| g.target(e))
            .chain(g.in_edge_ids(v).iter().map(|&e| g.source(e)))
            .collect::<Vec<_>>();
        for w in neighbors {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

/// For non-isomorphic connected graphs the automorphism group of the union
/// is the direct product of the component groups. Verifies the order
/// identity and that every computed generator is block diagonal.
pub fn verify_union_aut_product(g1: &DirectedGraph, g2: &DirectedGraph) -> Result<bool, SymmetryError> {
    if !is_weakly_connected(g1) {
        return Err(SymmetryError::NotConnected(1));
    }
    if !is_weakly_connected(g2) {
        return Err(SymmetryError::NotConnected(2));
    }
    if are_isomorphic(g1, g2).is_some() {
        return Err(SymmetryError::IsomorphicComponents);
    }
    let a1 = automorphism_group(g1);
    let a2 = automorphism_group(g2);
    let union = crate::graph::disjoint_union(g1, g2);
    let au = automorphism_group(&union);
    let split = g1.vertex_count();
    let block_diagonal = au.generators.iter().all(|p| {
        (0..split).all(|v| p.apply(v) < split)
            && (split..union.vertex_count()).all(|v| p.apply(v) >= split)
    });
    Ok(au.order == &a1.order * &a2.order && block_diagonal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, disjoint_union, make_circulant};
    use crate::kms::{kms_simplex, BetaSpec};
    use crate::linalg::{rat_frac, rat_int};

    /// Brute-force oracle: all permutations preserving adjacency.
    fn brute_force(g: &DirectedGraph) -> Vec<Permutation> {
        let n = g.vertex_count();
        let mut images: Vec<usize> = (0..n).collect();
        let mut found = Vec::new();
        permute(&mut images, 0, &mut |imgs| {
            let p = Permutation { images: imgs.to_vec() };
            if p.is_automorphism(g) {
                found.push(p);
            }
        });
        found
    }

    fn permute(xs: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == xs.len() {
            visit(xs);
            return;
        }
        for i in k..xs.len() {
            xs.swap(k, i);
            permute(xs, k + 1, visit);
            xs.swap(k, i);
        }
    }

    #[test]
    fn three_cycle_rotations() {
        let g = make_circulant(&[0, 1, 0]).unwrap();
        let group = automorphism_group(&g);
        assert_eq!(group.order, BigUint::from(3u32));
        assert_eq!(group.orbits, vec![vec![0, 1, 2]]);
        assert!(is_vertex_transitive(&group));
        assert_eq!(brute_force(&g).len(), 3);
    }

    #[test]
    fn circulant_4_contains_shift() {
        let g = make_circulant(&[1, 0, 1, 0]).unwrap();
        let group = automorphism_group(&g);
        // loops everywhere plus the two 2-cycles {0,2} and {1,3}: dihedral of order 8
        assert_eq!(group.order, BigUint::from(8u32));
        let shift = Permutation::new(vec![1, 2, 3, 0]).unwrap();
        assert!(shift.is_automorphism(&g));
        assert!(group.order >= BigUint::from(4u32));
        assert_eq!(brute_force(&g).len(), 8);
    }

    #[test]
    fn asymmetric_path_trivial_group() {
        let g = build_graph(3, &[(0, 1), (1, 2)]).unwrap();
        let group = automorphism_group(&g);
        assert_eq!(group.order, BigUint::one());
        assert!(group.generators.is_empty());
        assert_eq!(group.orbits.len(), 3);
        assert_eq!(brute_force(&g).len(), 1);
    }

    #[test]
    fn generators_preserve_adjacency() {
        let g = make_circulant(&[1, 1, 0, 0, 1]).unwrap();
        let group = automorphism_group(&g);
        for gen in &group.generators {
            assert!(gen.is_automorphism(&g));
        }
    }

    #[test]
    fn isomorphism_self_and_counterexamples() {
        let g = make_circulant(&[0, 1, 0]).unwrap();
        let iso = are_isomorphic(&g, &g).unwrap();
        assert!(iso.is_isomorphism(&g, &g));

        let path = build_graph(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(are_isomorphic(&g, &path).is_none());
    }

    #[test]
    fn isomorphism_finds_relabeling() {
        let g1 = build_graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).unwrap();
        // relabel through v -> (v*2 + 1) mod 5
        let relabel = |v: usize| (v * 2 + 1) % 5;
        let edges: Vec<_> = g1.edges().iter().map(|&(s, t)| (relabel(s), relabel(t))).collect();
        let g2 = build_graph(5, &edges).unwrap();
        let iso = are_isomorphic(&g1, &g2).expect("graphs are isomorphic by construction");
        assert!(iso.is_isomorphism(&g1, &g2));
        let back = are_isomorphic(&g2, &g1).expect("isomorphism is symmetric");
        assert!(back.is_isomorphism(&g2, &g1));
    }

    #[test]
    fn state_invariance() {
        let g = make_circulant(&[1, 0, 1, 0]).unwrap();
        let group = automorphism_group(&g);
        let p = kms_simplex(&g, &BetaSpec::Lambda(rat_int(2))).unwrap();
        // extreme point (1/2, 0, 1/2, 0) moves under the shift
        let extreme = &p.extreme_points[1];
        assert_eq!(extreme.weights.as_exact().unwrap()[0], rat_frac(1, 2));
        assert!(!is_state_invariant(&group, extreme).unwrap());
        // uniform is invariant
        let uniform = crate::kms::uniform_state(&g, &p.beta).unwrap();
        assert!(is_state_invariant(&group, &uniform).unwrap());
    }

    #[test]
    fn invariant_subpolytope_is_single_uniform_point() {
        let g = make_circulant(&[1, 0, 1, 0]).unwrap();
        let group = automorphism_group(&g);
        let p = kms_simplex(&g, &BetaSpec::Lambda(rat_int(2))).unwrap();
        assert_eq!(p.extreme_points.len(), 2);
        let inv = invariant_kms_subpolytope(&g, &group, &p).unwrap();
        assert_eq!(inv.extreme_points.len(), 1);
        assert_eq!(inv.dimension, 0);
        assert_eq!(inv.extreme_points[0].weights.as_exact().unwrap(), &vec![rat_frac(1, 4); 4]);
    }

    #[test]
    fn invariant_subpolytope_trivial_group_unchanged() {
        let g = make_circulant(&[1, 0, 1, 0]).unwrap();
        let trivial = AutomorphismGroup {
            generators: vec![],
            orbits: (0..4).map(|v| vec![v]).collect(),
            order: BigUint::one(),
        };
        let p = kms_simplex(&g, &BetaSpec::Lambda(rat_int(2))).unwrap();
        let inv = invariant_kms_subpolytope(&g, &trivial, &p).unwrap();
        assert_eq!(inv.extreme_points, p.extreme_points);
        assert_eq!(inv.dimension, p.dimension);
    }

    #[test]
    fn union_product_rule() {
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let c4 = make_circulant(&[0, 1, 0, 0]).unwrap();
        assert_eq!(verify_union_aut_product(&c3, &c4), Ok(true));
        assert_eq!(
            verify_union_aut_product(&c3, &c3),
            Err(SymmetryError::IsomorphicComponents)
        );
    }

    #[test]
    fn union_aut_orders_multiply() {
        let c3 = make_circulant(&[0, 1, 0]).unwrap();
        let c4 = make_circulant(&[0, 1, 0, 0]).unwrap();
        let u = disjoint_union(&c3, &c4);
        let group = automorphism_group(&u);
        assert_eq!(group.order, BigUint::from(12u32));
        assert_eq!(group.orbits.len(), 2);
    }

    #[test]
    fn small_graph_oracle_agreement() {
        // every digraph on 3 vertices: order and orbits against brute force
        for mask in 0u32..(1 << 9) {
            let mut edges = Vec::new();
            for b in 0..9 {
                if mask & (1 << b) != 0 {
                    edges.push((b / 3, b % 3));
                }
            }
            let g = build_graph(3, &edges).unwrap();
            let group = automorphism_group(&g);
            let brute = brute_force(&g);
            assert_eq!(group.order, BigUint::from(brute.len()), "mask {mask}");
            let mut brute_orbits = vertex_orbits(3, &brute);
            brute_orbits.sort();
            let mut got = group.orbits.clone();
            got.sort();
            assert_eq!(got, brute_orbits, "mask {mask}");
        }
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![1, 0, 2]).is_ok());
        assert_eq!(Permutation::new(vec![1, 1, 2]), Err(SymmetryError::NotABijection(3)));
        assert_eq!(Permutation::new(vec![3, 0, 1]), Err(SymmetryError::NotABijection(3)));
    }
}
