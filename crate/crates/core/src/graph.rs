//! Finite directed graphs without multiple edges, together with their vertex
//! matrices, path words, and the constructors used throughout: circulants,
//! disjoint unions, and orientations of undirected graphs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::IntMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex count must be positive")]
    EmptyVertexSet,
    #[error("edge ({0}, {1}) has an endpoint outside 0..{2}")]
    EndpointOutOfRange(usize, usize, usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("expected {expected} labels, got {got}")]
    LabelCountMismatch { expected: usize, got: usize },
    #[error("circulant row entry {0} is not 0 or 1")]
    CirculantEntryNotBinary(i64),
    #[error("trivial circulant graph has a sink")]
    TrivialCirculant,
    #[error("edge id {0} out of range (graph has {1} edges)")]
    EdgeIdOutOfRange(usize, usize),
    #[error("anchor vertex {0} out of range 0..{1}")]
    AnchorOutOfRange(usize, usize),
    #[error("graph file: {0}")]
    Format(String),
}

/// A finite directed graph without multiple edges.
///
/// Vertices are `0..vertex_count`; edges are stored sorted lexicographically,
/// and the position of an edge in that order is its edge id. Graphs are
/// immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    labels: Option<Vec<String>>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl DirectedGraph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        Self::with_labels(vertex_count, edges, None)
    }

    pub fn with_labels(
        vertex_count: usize,
        mut edges: Vec<(usize, usize)>,
        labels: Option<Vec<String>>,
    ) -> Result<Self, GraphError> {
        if vertex_count == 0 {
            return Err(GraphError::EmptyVertexSet);
        }
        if let Some(l) = &labels {
            if l.len() != vertex_count {
                return Err(GraphError::LabelCountMismatch { expected: vertex_count, got: l.len() });
            }
        }
        for &(s, t) in &edges {
            if s >= vertex_count || t >= vertex_count {
                return Err(GraphError::EndpointOutOfRange(s, t, vertex_count));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }
        let mut out_edges = vec![Vec::new(); vertex_count];
        let mut in_edges = vec![Vec::new(); vertex_count];
        for (id, &(s, t)) in edges.iter().enumerate() {
            out_edges[s].push(id);
            in_edges[t].push(id);
        }
        Ok(DirectedGraph { vertex_count, edges, labels, out_edges, in_edges })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn source(&self, edge_id: usize) -> usize {
        self.edges[edge_id].0
    }

    pub fn target(&self, edge_id: usize) -> usize {
        self.edges[edge_id].1
    }

    pub fn out_edge_ids(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    pub fn in_edge_ids(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_edges[v].len()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_edges[v].len()
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.edges.binary_search(&(s, t)).is_ok()
    }

    /// The vertex matrix: `D[i][j] = 1` iff there is an edge from i to j.
    pub fn vertex_matrix(&self) -> IntMatrix {
        let mut d = IntMatrix::zero(self.vertex_count);
        for &(s, t) in &self.edges {
            d.set(s, t, 1);
        }
        d
    }

    /// A vertex with no outgoing edge.
    pub fn has_sink(&self) -> bool {
        self.out_edges.iter().any(|e| e.is_empty())
    }

    /// True iff every ordered vertex pair is joined by a directed path,
    /// equivalently the vertex matrix is irreducible.
    pub fn is_strongly_connected(&self) -> bool {
        if self.vertex_count == 1 {
            return true;
        }
        self.reaches_all(false) && self.reaches_all(true)
    }

    fn reaches_all(&self, reversed: bool) -> bool {
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            let ids = if reversed { &self.in_edges[v] } else { &self.out_edges[v] };
            for &e in ids {
                let w = if reversed { self.source(e) } else { self.target(e) };
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.vertex_count
    }

    /// Strongly connected components as sorted vertex lists, in ascending
    /// order of their smallest vertex.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        // iterative Tarjan
        let n = self.vertex_count;
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack: Vec<usize> = Vec::new();
        let mut next_index = 0usize;
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut call: Vec<(usize, usize)> = Vec::new();

        for root in 0..n {
            if index[root] != usize::MAX {
                continue;
            }
            call.push((root, 0));
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut ei)) = call.last_mut() {
                if *ei < self.out_edges[v].len() {
                    let w = self.target(self.out_edges[v][*ei]);
                    *ei += 1;
                    if index[w] == usize::MAX {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        while let Some(w) = stack.pop() {
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        comps.push(comp);
                    }
                }
            }
        }
        comps.sort_by_key(|c| c[0]);
        comps
    }

    /// The subgraph induced by `vertices` (which must be sorted); vertex i of
    /// the result is `vertices[i]`.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> DirectedGraph {
        let mut pos = vec![usize::MAX; self.vertex_count];
        for (i, &v) in vertices.iter().enumerate() {
            pos[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(s, t)| pos[s] != usize::MAX && pos[t] != usize::MAX)
            .map(|&(s, t)| (pos[s], pos[t]))
            .collect();
        DirectedGraph::new(vertices.len(), edges).expect("induced subgraph is well formed")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphFile::from(self)).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        DirectedGraph::with_labels(file.m, file.edges, file.labels)
    }
}

/// On-disk graph format: `m`, lexicographically sorted `edges`, optional
/// `labels`.
#[derive(Serialize, Deserialize)]
struct GraphFile {
    m: usize,
    edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl From<&DirectedGraph> for GraphFile {
    fn from(g: &DirectedGraph) -> Self {
        GraphFile { m: g.vertex_count, edges: g.edges.clone(), labels: g.labels.clone() }
    }
}

/// Builds a graph from an explicit edge list, rejecting multi-edges.
pub fn build_graph(m: usize, edges: &[(usize, usize)]) -> Result<DirectedGraph, GraphError> {
    DirectedGraph::new(m, edges.to_vec())
}

/// Directs an undirected edge list: each pair {i, j} contributes both (i, j)
/// and (j, i), so the vertex matrix is symmetric.
pub fn orient(m: usize, undirected: &[(usize, usize)]) -> Result<DirectedGraph, GraphError> {
    let mut edges = Vec::with_capacity(2 * undirected.len());
    for &(i, j) in undirected {
        edges.push((i, j));
        if i != j {
            edges.push((j, i));
        }
    }
    DirectedGraph::new(m, edges)
}

/// Circulant graph from its first matrix row: `D[i][j] = row[(j - i) mod m]`.
pub fn make_circulant(first_row: &[i64]) -> Result<DirectedGraph, GraphError> {
    let m = first_row.len();
    if m == 0 {
        return Err(GraphError::EmptyVertexSet);
    }
    for &v in first_row {
        if v != 0 && v != 1 {
            return Err(GraphError::CirculantEntryNotBinary(v));
        }
    }
    if first_row.iter().all(|&v| v == 0) {
        return Err(GraphError::TrivialCirculant);
    }
    let mut edges = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if first_row[(j + m - i) % m] == 1 {
                edges.push((i, j));
            }
        }
    }
    DirectedGraph::new(m, edges)
}

/// Disjoint union with g1's vertices first and g2's offset by `|V1|`; the
/// vertex matrix is block diagonal.
pub fn disjoint_union(g1: &DirectedGraph, g2: &DirectedGraph) -> DirectedGraph {
    let offset = g1.vertex_count;
    let mut edges: Vec<(usize, usize)> = g1.edges.clone();
    edges.extend(g2.edges.iter().map(|&(s, t)| (s + offset, t + offset)));
    let labels = match (&g1.labels, &g2.labels) {
        (Some(a), Some(b)) => {
            let mut l = a.clone();
            l.extend(b.iter().cloned());
            Some(l)
        }
        _ => None,
    };
    DirectedGraph::with_labels(g1.vertex_count + g2.vertex_count, edges, labels)
        .expect("union of valid graphs is valid")
}

/// A word in the path space: either a (possibly trivial) sequence of edges,
/// or the empty word anchored at a vertex, standing for that vertex's
/// projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathWord {
    Empty { anchor: usize },
    Edges(Vec<usize>),
}

impl PathWord {
    pub fn empty(anchor: usize) -> Self {
        PathWord::Empty { anchor }
    }

    pub fn edges(ids: Vec<usize>) -> Self {
        if ids.is_empty() {
            panic!("edge word must be nonempty; use PathWord::empty(anchor)");
        }
        PathWord::Edges(ids)
    }

    /// Word length |mu|; the empty word has length 0.
    pub fn len(&self) -> usize {
        match self {
            PathWord::Empty { .. } => 0,
            PathWord::Edges(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathCheck {
    pub valid: bool,
    pub source: usize,
    pub target: usize,
}

/// Checks that consecutive edges compose and reports the endpoints. The
/// empty word at v is a valid path from v to v.
pub fn validate_path(g: &DirectedGraph, word: &PathWord) -> Result<PathCheck, GraphError> {
    match word {
        PathWord::Empty { anchor } => {
            if *anchor >= g.vertex_count() {
                return Err(GraphError::AnchorOutOfRange(*anchor, g.vertex_count()));
            }
            Ok(PathCheck { valid: true, source: *anchor, target: *anchor })
        }
        PathWord::Edges(ids) => {
            for &e in ids {
                if e >= g.edge_count() {
                    return Err(GraphError::EdgeIdOutOfRange(e, g.edge_count()));
                }
            }
            let valid = ids.windows(2).all(|w| g.target(w[0]) == g.source(w[1]));
            Ok(PathCheck { valid, source: g.source(ids[0]), target: g.target(*ids.last().unwrap()) })
        }
    }
}
