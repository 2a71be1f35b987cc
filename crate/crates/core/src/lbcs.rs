//! Linear binary constraint systems: parsing, homogenization, F2
//! satisfiability, and compilation into game graphs, with the magic-square
//! instance built in.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DirectedGraph, GraphError};

/// Largest support size for which satisfying assignments are enumerated.
pub const MAX_SUPPORT: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum LbcsError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("line {line}: repeated variable x{var}")]
    RepeatedVariable { line: usize, var: usize },
    #[error("constraint {index} has an out-of-range variable x{var} (n = {n})")]
    VariableOutOfRange { index: usize, var: usize, n: usize },
    #[error("constraint {index} repeats variable x{var}")]
    RepeatedVariableInConstraint { index: usize, var: usize },
    #[error("constraint {index} has {size} support variables; the enumeration bound is {MAX_SUPPORT}")]
    SupportTooLarge { index: usize, size: usize },
    #[error("graph construction failed: {0}")]
    Graph(#[from] GraphError),
}

/// One F2-linear equation: the sum of the support variables equals `rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    /// Sorted, duplicate-free variable indices.
    pub support: Vec<usize>,
    pub rhs: bool,
}

/// A system of F2-linear equations over binary variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearBinarySystem {
    pub variable_count: usize,
    pub constraints: Vec<Constraint>,
}

impl LinearBinarySystem {
    pub fn new(variable_count: usize, constraints: Vec<(Vec<usize>, bool)>) -> Result<Self, LbcsError> {
        let mut out = Vec::with_capacity(constraints.len());
        for (index, (mut support, rhs)) in constraints.into_iter().enumerate() {
            support.sort_unstable();
            if let Some(w) = support.windows(2).find(|w| w[0] == w[1]) {
                return Err(LbcsError::RepeatedVariableInConstraint { index, var: w[0] + 1 });
            }
            if let Some(&v) = support.iter().find(|&&v| v >= variable_count) {
                return Err(LbcsError::VariableOutOfRange { index, var: v + 1, n: variable_count });
            }
            out.push(Constraint { support, rhs });
        }
        Ok(LinearBinarySystem { variable_count, constraints: out })
    }
}

impl fmt::Display for LinearBinarySystem {
    /// The same grammar `parse_lbcs` reads: one constraint per line,
    /// variables 1-based.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constraints {
            let terms: Vec<String> = c.support.iter().map(|v| format!("x{}", v + 1)).collect();
            writeln!(f, "{} = {}", terms.join(" + "), if c.rhs { 1 } else { 0 })?;
        }
        Ok(())
    }
}

/// Parses the line grammar `x<i> (+ x<j>)* = <0|1>`, with `#` comments and
/// blank lines ignored. Variable names are 1-based in the text.
pub fn parse_lbcs(text: &str) -> Result<LinearBinarySystem, LbcsError> {
    let mut constraints: Vec<(Vec<usize>, bool)> = Vec::new();
    let mut max_var = 0usize;
    for (line_idx, raw_line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut support: Vec<usize> = Vec::new();
        let mut chars = line.char_indices().peekable();
        let syntax = |col: usize, message: &str| LbcsError::Syntax {
            line: line_no,
            col: col + 1,
            message: message.to_string(),
        };

        let mut expect_variable = true;
        let rhs: bool;
        loop {
            while matches!(chars.peek(), Some((_, c)) if c.is_whitespace()) {
                chars.next();
            }
            let Some(&(col, c)) = chars.peek() else {
                return Err(syntax(line.len(), "unexpected end of line; expected `= <0|1>`"));
            };
            if expect_variable {
                if c != 'x' {
                    return Err(syntax(col, "expected a variable like `x1`"));
                }
                chars.next();
                let mut digits = String::new();
                while matches!(chars.peek(), Some((_, d)) if d.is_ascii_digit()) {
                    digits.push(chars.next().unwrap().1);
                }
                if digits.is_empty() {
                    return Err(syntax(col, "variable needs an index, like `x1`"));
                }
                let var: usize = digits
                    .parse()
                    .map_err(|_| syntax(col, "variable index does not fit in usize"))?;
                if var == 0 {
                    return Err(syntax(col, "variable indices are 1-based"));
                }
                if support.contains(&(var - 1)) {
                    return Err(LbcsError::RepeatedVariable { line: line_no, var });
                }
                support.push(var - 1);
                max_var = max_var.max(var);
                expect_variable = false;
            } else if c == '+' {
                chars.next();
                expect_variable = true;
            } else if c == '=' {
                chars.next();
                while matches!(chars.peek(), Some((_, d)) if d.is_whitespace()) {
                    chars.next();
                }
                let Some((vcol, v)) = chars.next() else {
                    return Err(syntax(line.len(), "expected 0 or 1 after `=`"));
                };
                rhs = match v {
                    '0' => false,
                    '1' => true,
                    _ => return Err(syntax(vcol, "right-hand side must be 0 or 1")),
                };
                if let Some(&(col, c)) = chars.find(|(_, c)| !c.is_whitespace()).as_ref() {
                    return Err(syntax(col, &format!("unexpected trailing `{c}`")));
                }
                break;
            } else {
                return Err(syntax(col, "expected `+` or `=`"));
            }
        }
        if support.is_empty() {
            return Err(syntax(0, "constraint has empty support"));
        }
        support.sort_unstable();
        constraints.push((support, rhs));
    }
    LinearBinarySystem::new(max_var, constraints)
}

/// Same supports, every right-hand side set to zero.
pub fn homogenize(sys: &LinearBinarySystem) -> LinearBinarySystem {
    LinearBinarySystem {
        variable_count: sys.variable_count,
        constraints: sys
            .constraints
            .iter()
            .map(|c| Constraint { support: c.support.clone(), rhs: false })
            .collect(),
    }
}

/// Gaussian elimination over F2; a satisfying assignment with free variables
/// set to zero, or `None`.
pub fn solve_f2(sys: &LinearBinarySystem) -> Option<Vec<bool>> {
    let n = sys.variable_count;
    // rows carry the rhs in the last column
    let mut rows: Vec<Vec<bool>> = sys
        .constraints
        .iter()
        .map(|c| {
            let mut row = vec![false; n + 1];
            for &v in &c.support {
                row[v] = true;
            }
            row[n] = c.rhs;
            row
        })
        .collect();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][c]) else {
            continue;
        };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r && rows[i][c] {
                let (src, dst) = if i < r {
                    let (a, b) = rows.split_at_mut(r);
                    (&b[0], &mut a[i])
                } else {
                    let (a, b) = rows.split_at_mut(i);
                    (&a[r], &mut b[0])
                };
                for j in 0..=n {
                    dst[j] ^= src[j];
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    // inconsistent row: 0 = 1
    if rows.iter().any(|row| row[n] && row[..n].iter().all(|&b| !b)) {
        return None;
    }
    let mut assignment = vec![false; n];
    for (row, &c) in rows.iter().zip(&pivot_cols) {
        assignment[c] = row[n];
    }
    Some(assignment)
}

/// A vertex of the game graph: a constraint together with one of its
/// satisfying assignments (bits aligned with the sorted support).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintVertex {
    pub constraint_index: usize,
    pub assignment: Vec<bool>,
}

impl ConstraintVertex {
    /// Display label `C<l>:<bits>` with a 1-based constraint number.
    pub fn label(&self) -> String {
        let bits: String = self.assignment.iter().map(|&b| if b { '1' } else { '0' }).collect();
        format!("C{}:{}", self.constraint_index + 1, bits)
    }
}

/// The compiled game graph plus its vertex table and any constraints that
/// contributed no vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGraph {
    pub graph: DirectedGraph,
    pub vertices: Vec<ConstraintVertex>,
    pub empty_blocks: Vec<usize>,
}

/// Compiles the system into its game graph.
///
/// Vertices are all (constraint, satisfying assignment) pairs, ordered by
/// constraint index and then lexicographically by assignment over the sorted
/// support. Two vertices are adjacent iff their assignments are
/// inconsistent: the same constraint with different assignments, or two
/// constraints assigning different values to a shared variable. The result
/// carries both directions of every edge, so the vertex matrix is symmetric.
pub fn constraint_graph(sys: &LinearBinarySystem) -> Result<ConstraintGraph, LbcsError> {
    let mut vertices: Vec<ConstraintVertex> = Vec::new();
    let mut empty_blocks: Vec<usize> = Vec::new();
    for (index, c) in sys.constraints.iter().enumerate() {
        let s = c.support.len();
        if s > MAX_SUPPORT {
            return Err(LbcsError::SupportTooLarge { index, size: s });
        }
        let before = vertices.len();
        // lexicographic order over the bit string = numeric order with
        // support[0] as the most significant bit
        for value in 0u32..(1u32 << s) {
            let assignment: Vec<bool> = (0..s).map(|b| value & (1 << (s - 1 - b)) != 0).collect();
            let parity = assignment.iter().filter(|&&b| b).count() % 2 == 1;
            if parity == c.rhs {
                vertices.push(ConstraintVertex { constraint_index: index, assignment });
            }
        }
        if vertices.len() == before {
            empty_blocks.push(index);
        }
    }

    let m = vertices.len();
    let inconsistent = |a: &ConstraintVertex, b: &ConstraintVertex| -> bool {
        if a.constraint_index == b.constraint_index {
            return a.assignment != b.assignment;
        }
        let sa = &sys.constraints[a.constraint_index].support;
        let sb = &sys.constraints[b.constraint_index].support;
        for (pa, &va) in sa.iter().enumerate() {
            if let Some(pb) = sb.iter().position(|&vb| vb == va) {
                if a.assignment[pa] != b.assignment[pb] {
                    return true;
                }
            }
        }
        false
    };
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if inconsistent(&vertices[i], &vertices[j]) {
                edges.push((i, j));
                edges.push((j, i));
            }
        }
    }
    let labels: Vec<String> = vertices.iter().map(|v| v.label()).collect();
    let graph = DirectedGraph::with_labels(m.max(1), edges, (m > 0).then_some(labels))?;
    Ok(ConstraintGraph { graph, vertices, empty_blocks })
}

/// The magic-square system: nine variables in a 3x3 arrangement, row sums
/// zero, column sums zero except the last, which is one.
pub fn mermin_peres() -> LinearBinarySystem {
    LinearBinarySystem::new(
        9,
        vec![
            (vec![0, 1, 2], false),
            (vec![3, 4, 5], false),
            (vec![6, 7, 8], false),
            (vec![0, 3, 6], false),
            (vec![1, 4, 7], false),
            (vec![2, 5, 8], true),
        ],
    )
    .expect("built-in system is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_constraint() {
        let sys = parse_lbcs("x1 + x2 = 0").unwrap();
        assert_eq!(sys.variable_count, 2);
        assert_eq!(sys.constraints, vec![Constraint { support: vec![0, 1], rhs: false }]);
    }

    #[test]
    fn parse_comments_and_blank_lines() {
        let text = "# header\n\nx1 + x3 = 1   # inline note\n   \nx2 = 0\n";
        let sys = parse_lbcs(text).unwrap();
        assert_eq!(sys.variable_count, 3);
        assert_eq!(sys.constraints.len(), 2);
        assert_eq!(sys.constraints[0].support, vec![0, 2]);
        assert!(sys.constraints[0].rhs);
    }

    #[test]
    fn parse_rejects_repeated_variable() {
        assert_eq!(
            parse_lbcs("x1 + x1 = 0"),
            Err(LbcsError::RepeatedVariable { line: 1, var: 1 })
        );
    }

    #[test]
    fn parse_error_positions() {
        match parse_lbcs("x1 + y2 = 0") {
            Err(LbcsError::Syntax { line: 1, col: 6, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_lbcs("x1 = 2") {
            Err(LbcsError::Syntax { line: 1, col: 6, message }) => {
                assert!(message.contains("0 or 1"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_lbcs("x1 + x2\nx3 = 0") {
            Err(LbcsError::Syntax { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn display_parse_round_trip() {
        let sys = mermin_peres();
        let text = sys.to_string();
        let back = parse_lbcs(&text).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn homogenize_zeroes_rhs() {
        let sys = mermin_peres();
        let h = homogenize(&sys);
        assert!(h.constraints.iter().all(|c| !c.rhs));
        assert_eq!(h.constraints[5].support, sys.constraints[5].support);
        // already homogeneous: unchanged
        assert_eq!(homogenize(&h), h);
        // single inhomogeneous constraint
        let single = LinearBinarySystem::new(1, vec![(vec![0], true)]).unwrap();
        assert_eq!(homogenize(&single).constraints[0], Constraint { support: vec![0], rhs: false });
    }

    #[test]
    fn magic_square_unsatisfiable_homogenization_satisfiable() {
        let sys = mermin_peres();
        assert_eq!(sys.constraints.len(), 6);
        assert!(sys.constraints.iter().all(|c| c.support.len() == 3));
        // summing all six equations gives 0 = 1
        assert_eq!(solve_f2(&sys), None);
        let h = homogenize(&sys);
        let sol = solve_f2(&h).expect("homogeneous systems admit zero");
        assert!(sol.iter().all(|&b| !b));
    }

    #[test]
    fn solve_simple_systems() {
        let sys = parse_lbcs("x1 = 1").unwrap();
        assert_eq!(solve_f2(&sys), Some(vec![true]));

        let sys = parse_lbcs("x1 + x2 = 1\nx2 = 1\nx1 + x3 = 0").unwrap();
        let sol = solve_f2(&sys).unwrap();
        for c in &sys.constraints {
            let parity = c.support.iter().filter(|&&v| sol[v]).count() % 2 == 1;
            assert_eq!(parity, c.rhs);
        }
    }

    #[test]
    fn magic_square_graph_shape() {
        let cg = constraint_graph(&mermin_peres()).unwrap();
        assert_eq!(cg.graph.vertex_count(), 24);
        assert_eq!(cg.graph.edge_count(), 216);
        assert!(cg.empty_blocks.is_empty());
        assert!(cg.graph.is_strongly_connected());
        for v in 0..24 {
            assert_eq!(cg.graph.out_degree(v), 9);
        }
        let d = cg.graph.vertex_matrix();
        assert_eq!(d, d.transpose());
    }

    #[test]
    fn magic_square_block_one_neighbors() {
        let cg = constraint_graph(&mermin_peres()).unwrap();
        // (C1, 000) is vertex 0; its neighborhood is pinned by the construction
        let labels = cg.graph.labels().unwrap();
        assert_eq!(labels[0], "C1:000");
        let mut neighbor_labels: Vec<&str> = cg
            .graph
            .out_edge_ids(0)
            .iter()
            .map(|&e| labels[cg.graph.target(e)].as_str())
            .collect();
        neighbor_labels.sort_unstable();
        assert_eq!(
            neighbor_labels,
            vec![
                "C1:011", "C1:101", "C1:110", "C4:101", "C4:110", "C5:101", "C5:110", "C6:100",
                "C6:111",
            ]
        );
    }

    #[test]
    fn homogenized_block_one_neighbors_swap_in_c6() {
        let cg = constraint_graph(&homogenize(&mermin_peres())).unwrap();
        let labels = cg.graph.labels().unwrap();
        let mut neighbor_labels: Vec<&str> = cg
            .graph
            .out_edge_ids(0)
            .iter()
            .map(|&e| labels[cg.graph.target(e)].as_str())
            .collect();
        neighbor_labels.sort_unstable();
        assert_eq!(
            neighbor_labels,
            vec![
                "C1:011", "C1:101", "C1:110", "C4:101", "C4:110", "C5:101", "C5:110", "C6:101",
                "C6:110",
            ]
        );
    }

    #[test]
    fn blocks_are_cliques_of_expected_size() {
        let sys = parse_lbcs("x1 + x2 + x3 + x4 = 1\nx2 + x5 = 0").unwrap();
        let cg = constraint_graph(&sys).unwrap();
        for (index, c) in sys.constraints.iter().enumerate() {
            let block: Vec<usize> = (0..cg.vertices.len())
                .filter(|&v| cg.vertices[v].constraint_index == index)
                .collect();
            assert_eq!(block.len(), 1 << (c.support.len() - 1));
            for &a in &block {
                for &b in &block {
                    if a != b {
                        assert!(cg.graph.has_edge(a, b));
                    }
                }
            }
        }
    }

    #[test]
    fn support_bound_enforced() {
        let big: Vec<usize> = (0..21).collect();
        let sys = LinearBinarySystem::new(21, vec![(big, false)]).unwrap();
        assert_eq!(
            constraint_graph(&sys),
            Err(LbcsError::SupportTooLarge { index: 0, size: 21 })
        );
    }

    #[test]
    fn empty_support_block_is_flagged() {
        // constructed programmatically; the parser rejects empty supports
        let sys = LinearBinarySystem::new(1, vec![(vec![], true), (vec![0], false)]).unwrap();
        let cg = constraint_graph(&sys).unwrap();
        assert_eq!(cg.empty_blocks, vec![0]);
        assert_eq!(cg.vertices.len(), 1);
    }
}
