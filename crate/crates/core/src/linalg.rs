//! Dense linear algebra over exact rationals and `f64`.
//!
//! Everything downstream (eigenspaces, KMS polytopes, invariant subpolytopes)
//! reduces to a handful of primitives here: fraction-exact Gaussian
//! elimination, null-space bases in a canonical integer form, deterministic
//! power iteration, and vertex enumeration for slices of the probability
//! simplex by a linear subspace.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rat = BigRational;

/// Square matrix with nonnegative integer entries (a vertex matrix, or any
/// block combination used by the spectral routines).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    size: usize,
    data: Vec<u64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("matrix is not square: row {row} has length {len}, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: i64 },
    #[error("matrix must have at least one row")]
    Empty,
}

impl IntMatrix {
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, MatrixError> {
        let size = rows.len();
        if size == 0 {
            return Err(MatrixError::Empty);
        }
        let mut data = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(MatrixError::NotSquare { row: i, len: row.len(), expected: size });
            }
            for (j, &v) in row.iter().enumerate() {
                if v < 0 {
                    return Err(MatrixError::NegativeEntry { row: i, col: j, value: v });
                }
                data.push(v as u64);
            }
        }
        Ok(IntMatrix { size, data })
    }

    pub fn zero(size: usize) -> Self {
        IntMatrix { size, data: vec![0; size * size] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.data[i * self.size + j] = v;
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zero(self.size);
        for i in 0..self.size {
            for j in 0..self.size {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Block-diagonal combination `diag(self, other)`.
    pub fn block_diag(&self, other: &IntMatrix) -> IntMatrix {
        let n = self.size + other.size;
        let mut out = IntMatrix::zero(n);
        for i in 0..self.size {
            for j in 0..self.size {
                out.set(i, j, self.get(i, j));
            }
        }
        for i in 0..other.size {
            for j in 0..other.size {
                out.set(self.size + i, self.size + j, other.get(i, j));
            }
        }
        out
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        (0..self.size).map(|j| self.get(i, j)).sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.size).map(|i| self.get(i, j)).sum()
    }

    pub fn max_row_sum(&self) -> u64 {
        (0..self.size).map(|i| self.row_sum(i)).max().unwrap_or(0)
    }

    pub fn min_row_sum(&self) -> u64 {
        (0..self.size).map(|i| self.row_sum(i)).min().unwrap_or(0)
    }

    /// `D - lambda * I` as a rational matrix.
    pub fn shifted(&self, lambda: &Rat) -> Vec<Vec<Rat>> {
        let n = self.size;
        let mut out = vec![vec![Rat::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                out[i][j] = Rat::from_integer(BigInt::from(self.get(i, j)));
                if i == j {
                    out[i][j] -= lambda.clone();
                }
            }
        }
        out
    }

    pub fn matvec_rat(&self, v: &[Rat]) -> Vec<Rat> {
        let n = self.size;
        (0..n)
            .map(|i| {
                let mut acc = Rat::zero();
                for j in 0..n {
                    let d = self.get(i, j);
                    if d != 0 {
                        acc += Rat::from_integer(BigInt::from(d)) * &v[j];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn matvec_f64(&self, v: &[f64]) -> Vec<f64> {
        let n = self.size;
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j) as f64 * v[j]).sum())
            .collect()
    }
}

pub fn rat_int(v: i64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

pub fn rat_frac(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(mat: &mut [Vec<Rat>]) -> Vec<usize> {
    let rows = mat.len();
    if rows == 0 {
        return vec![];
    }
    let cols = mat[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !mat[i][c].is_zero()) else {
            continue;
        };
        mat.swap(r, p);
        let inv = mat[r][c].recip();
        for x in mat[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !mat[i][c].is_zero() {
                let factor = mat[i][c].clone();
                for j in 0..cols {
                    let sub = &factor * &mat[r][j];
                    mat[i][j] -= sub;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(mat: &[Vec<Rat>]) -> usize {
    let mut work = mat.to_vec();
    rref(&mut work).len()
}

/// Scales a rational vector to coprime integers with positive leading entry.
pub fn canonicalize(v: &[Rat]) -> Vec<Rat> {
    let mut lcm = BigInt::one();
    for x in v {
        lcm = lcm.lcm(x.denom());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Rat::from_integer(lcm.clone())).to_integer()).collect();
    let mut gcd = BigInt::zero();
    for x in &ints {
        gcd = gcd.gcd(x);
    }
    if gcd.is_zero() {
        return v.to_vec();
    }
    let mut scaled: Vec<BigInt> = ints.into_iter().map(|x| x / &gcd).collect();
    if let Some(first) = scaled.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in scaled.iter_mut() {
                *x = -x.clone();
            }
        }
    }
    scaled.into_iter().map(Rat::from_integer).collect()
}

/// Basis of `{x : mat x = 0}` by fraction-exact elimination.
///
/// Basis vectors are ordered by ascending free column and canonicalized to
/// coprime integer entries with positive leading coefficient.
pub fn null_space(mat: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    if mat.is_empty() {
        return vec![];
    }
    let cols = mat[0].len();
    let mut work = mat.to_vec();
    let pivots = rref(&mut work);
    let pivot_set: Vec<bool> = {
        let mut s = vec![false; cols];
        for &c in &pivots {
            s[c] = true;
        }
        s
    };
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_set[free] {
            continue;
        }
        let mut v = vec![Rat::zero(); cols];
        v[free] = Rat::one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -work[r][free].clone();
        }
        basis.push(canonicalize(&v));
    }
    basis
}

/// Solves a square rational system; `None` when singular.
pub fn solve_square(mut a: Vec<Vec<Rat>>, mut b: Vec<Rat>) -> Option<Vec<Rat>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).find(|&i| !a[i][c].is_zero())?;
        a.swap(c, p);
        b.swap(c, p);
        let inv = a[c][c].recip();
        for x in a[c].iter_mut() {
            *x *= &inv;
        }
        b[c] *= &inv;
        for i in 0..n {
            if i != c && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..n {
                    let sub = &f * &a[c][j];
                    a[i][j] -= sub;
                }
                let sub = &f * &b[c];
                b[i] -= sub;
            }
        }
    }
    Some(b)
}

/// Vertices of `{x = c1 B1 + ... + cd Bd : x >= 0, sum(x) = 1}`.
///
/// Enumerates basic feasible solutions: every vertex pins `d - 1` coordinates
/// of `x` to zero, so all coordinate subsets of that size are scanned and the
/// resulting square systems solved exactly. Output is sorted and deduplicated.
pub fn simplex_section_vertices(basis: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let d = basis.len();
    if d == 0 {
        return vec![];
    }
    let m = basis[0].len();
    let col_sums: Vec<Rat> = basis.iter().map(|b| b.iter().sum()).collect();

    let mut vertices: Vec<Vec<Rat>> = Vec::new();
    let mut subset = first_subset(d - 1);
    loop {
        // rows: x_i = 0 for i in subset, then the normalization row
        let mut a: Vec<Vec<Rat>> = subset
            .iter()
            .map(|&i| basis.iter().map(|b| b[i].clone()).collect())
            .collect();
        a.push(col_sums.clone());
        let mut rhs = vec![Rat::zero(); d - 1];
        rhs.push(Rat::one());
        if let Some(c) = solve_square(a, rhs) {
            let x: Vec<Rat> = (0..m)
                .map(|i| {
                    let mut acc = Rat::zero();
                    for (k, b) in basis.iter().enumerate() {
                        acc += &c[k] * &b[i];
                    }
                    acc
                })
                .collect();
            if x.iter().all(|v| !v.is_negative()) {
                vertices.push(x);
            }
        }
        if !next_subset(&mut subset, m) {
            break;
        }
    }
    vertices.sort();
    vertices.dedup();
    vertices
}

/// Numeric counterpart of [`simplex_section_vertices`].
pub fn simplex_section_vertices_f64(basis: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let d = basis.len();
    if d == 0 {
        return vec![];
    }
    let m = basis[0].len();
    let col_sums: Vec<f64> = basis.iter().map(|b| b.iter().sum()).collect();
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut subset = first_subset(d - 1);
    loop {
        let mut a: Vec<Vec<f64>> = subset
            .iter()
            .map(|&i| basis.iter().map(|b| b[i]).collect())
            .collect();
        a.push(col_sums.clone());
        let mut rhs = vec![0.0; d - 1];
        rhs.push(1.0);
        if let Some(c) = solve_square_f64(&mut a, &mut rhs, tol) {
            let x: Vec<f64> = (0..m)
                .map(|i| basis.iter().enumerate().map(|(k, b)| c[k] * b[i]).sum())
                .collect();
            if x.iter().all(|&v| v >= -tol) {
                vertices.push(x.iter().map(|&v| v.max(0.0)).collect());
            }
        }
        if !next_subset(&mut subset, m) {
            break;
        }
    }
    vertices.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vertices.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol.max(1e-7)));
    vertices
}

fn solve_square_f64(a: &mut [Vec<f64>], b: &mut [f64], tol: f64) -> Option<Vec<f64>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[p][c].abs() <= tol {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        let inv = 1.0 / a[c][c];
        for x in a[c].iter_mut() {
            *x *= inv;
        }
        b[c] *= inv;
        for i in 0..n {
            if i != c && a[i][c] != 0.0 {
                let f = a[i][c];
                for j in 0..n {
                    a[i][j] -= f * a[c][j];
                }
                b[i] -= f * b[c];
            }
        }
    }
    Some(b.to_vec())
}

/// Numeric null-space basis with `tol` as the rank cutoff on pivots.
pub fn null_space_f64(mat: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    if mat.is_empty() {
        return vec![];
    }
    let cols = mat[0].len();
    let rows = mat.len();
    let mut work = mat.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let p = (r..rows).max_by(|&i, &j| work[i][c].abs().partial_cmp(&work[j][c].abs()).unwrap()).unwrap();
        if work[p][c].abs() <= tol {
            continue;
        }
        work.swap(r, p);
        let inv = 1.0 / work[r][c];
        for x in work[r].iter_mut() {
            *x *= inv;
        }
        for i in 0..rows {
            if i != r && work[i][c] != 0.0 {
                let f = work[i][c];
                for j in 0..cols {
                    work[i][j] -= f * work[r][j];
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let pivot_set: Vec<bool> = {
        let mut s = vec![false; cols];
        for &c in &pivots {
            s[c] = true;
        }
        s
    };
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_set[free] {
            continue;
        }
        let mut v = vec![0.0; cols];
        v[free] = 1.0;
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -work[row][free];
        }
        basis.push(v);
    }
    basis
}

const POWER_ITERATION_CAP: usize = 100_000;
const RAYLEIGH_CONVERGENCE: f64 = 1e-12;

/// Dominant eigenvalue and eigenvector of a nonnegative integer matrix by
/// power iteration on `D + I` (the shift removes periodicity; the spectral
/// radius of a nonnegative matrix shifts by exactly one).
///
/// Starts from the all-ones vector and stops when successive Rayleigh
/// quotients differ by less than 1e-12, capped at 1e5 iterations.
pub fn power_iteration(d: &IntMatrix) -> (f64, Vec<f64>) {
    let n = d.size();
    let mut x = vec![1.0f64; n];
    let mut rq_prev = f64::INFINITY;
    for _ in 0..POWER_ITERATION_CAP {
        let mut y = d.matvec_f64(&x);
        for i in 0..n {
            y[i] += x[i]; // shifted: (D + I) x
        }
        let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (0.0, vec![1.0 / n as f64; n]);
        }
        for v in y.iter_mut() {
            *v /= norm;
        }
        let ay = {
            let mut t = d.matvec_f64(&y);
            for i in 0..n {
                t[i] += y[i];
            }
            t
        };
        let rq: f64 = y.iter().zip(ay.iter()).map(|(a, b)| a * b).sum();
        x = y;
        if (rq - rq_prev).abs() < RAYLEIGH_CONVERGENCE {
            rq_prev = rq;
            break;
        }
        rq_prev = rq;
    }
    let sum: f64 = x.iter().sum();
    if sum > 0.0 {
        for v in x.iter_mut() {
            *v /= sum;
        }
    }
    ((rq_prev - 1.0).max(0.0), x)
}

fn first_subset(k: usize) -> Vec<usize> {
    (0..k).collect()
}

/// Advances a sorted k-subset of `0..m` to its lexicographic successor.
fn next_subset(subset: &mut [usize], m: usize) -> bool {
    let k = subset.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < m - (k - i) {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `C(m, k)` saturating at `u64::MAX`; used to guard enumeration budgets.
pub fn binomial(m: usize, k: usize) -> u64 {
    if k > m {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k.min(m - k) {
        acc = acc * (m - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}
