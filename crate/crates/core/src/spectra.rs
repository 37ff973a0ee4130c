//! Left eigenvectors of the Laplacian or adjacency matrix, and the influence
//! coordinate system built from their real parts.
//!
//! Two independent routes compute the eigenpairs:
//!
//! * [`Solver::Dense`]: full eigendecomposition of `Mᵀ` (right eigenvectors of
//!   `Mᵀ` are left eigenvectors of `M`), symmetric solver when `M = Mᵀ`.
//! * [`Solver::Iterative`]: subspace iteration with Rayleigh-Ritz extraction on
//!   `Mᵀ`, shift-inverted around zero for the Laplacian and plain for the
//!   adjacency matrix.
//!
//! Every returned pair is checked against `‖vM − λv‖∞ ≤ 1e-8 ‖M‖∞` with
//! `‖v‖₂ = 1`; a failed check is an error, never a silent result.
//!
//! Normalisation: each complex eigenvector is scaled to unit 2-norm and rotated
//! so its largest-modulus entry (lowest index on ties) is real and positive;
//! the exposed vector is the real part. Conjugate partners therefore expose
//! identical real parts.
//!
//! When the graph is not strongly connected the Laplacian's null space is
//! spanned by the stationary vectors of its closed classes (strongly
//! connected components without outgoing edges). Those are computed per class
//! and the first vector is their normalised sum, so it stays entrywise
//! nonnegative and covers every class; the remaining class vectors follow as
//! further zero-eigenvalue vectors.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Laplacian};

/// Backward-error bound on every returned eigenpair, relative to `‖M‖∞`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Two real-part columns closer than this (max-abs, after sign alignment) are
/// treated as the same column.
pub const DUPLICATE_TOLERANCE: f64 = 1e-10;
/// Graphs up to this size use the dense route under [`Solver::Auto`].
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Laplacian,
    Adjacency,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Laplacian => "laplacian",
            MatrixKind::Adjacency => "adjacency",
        })
    }
}

impl FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplacian" => Ok(MatrixKind::Laplacian),
            "adjacency" => Ok(MatrixKind::Adjacency),
            other => Err(Error::InvalidArgument(format!("unknown matrix kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Dense up to [`DENSE_LIMIT`] vertices, iterative above.
    #[default]
    Auto,
    Dense,
    Iterative,
}

/// Ordered left eigenpairs with the real parts of their vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub kind: MatrixKind,
    pub eigenvalues: Vec<Complex64>,
    /// Real parts of the normalised left eigenvectors, one `Vec` per pair.
    pub vectors: Vec<Vec<f64>>,
    /// `‖vM − λv‖∞` of the complex pair before taking real parts.
    pub residuals: Vec<f64>,
}

impl SpectralBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// CSV: one header row of eigenvalues, then one row per vertex.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        let header: Vec<String> = self.eigenvalues.iter().map(|l| format_complex(*l)).collect();
        writeln!(w, "{}", header.join(","))?;
        let n = self.vectors.first().map_or(0, Vec::len);
        for i in 0..n {
            let row: Vec<String> = self.vectors.iter().map(|v| v[i].to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        z.re.to_string()
    } else if z.im > 0.0 {
        format!("{}+{}i", z.re, z.im)
    } else {
        format!("{}-{}i", z.re, -z.im)
    }
}

/// Per-vertex coordinates `e` (n x y, real parts of the selected eigenvectors)
/// and their Euclidean row norms `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceCoordinates {
    y: usize,
    e: Vec<f64>,
    s: Vec<f64>,
    /// Indices into the source basis of the selected columns.
    columns: Vec<usize>,
}

impl InfluenceCoordinates {
    /// Builds coordinates directly from columns (each of length n).
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let y = columns.len();
        if y == 0 {
            return Err(Error::InvalidArgument("need at least one column".into()));
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidArgument("columns differ in length".into()));
        }
        let mut e = vec![0.0; n * y];
        for (j, col) in columns.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                e[i * y + j] = x;
            }
        }
        let s = e
            .chunks_exact(y)
            .map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        Ok(Self {
            y,
            e,
            s,
            columns: (0..y).collect(),
        })
    }

    pub fn y(&self) -> usize {
        self.y
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    /// Coordinates of vertex `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.e[i * self.y..(i + 1) * self.y]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.e[i * self.y + j]).collect()
    }

    /// First column: real part of the first left eigenvector.
    pub fn v1(&self) -> Vec<f64> {
        self.column(0)
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn source_columns(&self) -> &[usize] {
        &self.columns
    }

    /// Same coordinates with vertex `i` moved to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let mut e = vec![0.0; self.e.len()];
        let mut s = vec![0.0; n];
        for i in 0..n {
            e[perm[i] * self.y..(perm[i] + 1) * self.y].copy_from_slice(self.row(i));
            s[perm[i]] = self.s[i];
        }
        Self {
            y: self.y,
            e,
            s,
            columns: self.columns.clone(),
        }
    }
}

/// Picks `y` columns from `basis`: the first vector, then each next vector
/// whose real part does not duplicate an earlier column (a conjugate partner).
pub fn select_input_vectors(basis: &SpectralBasis, y: usize) -> Result<InfluenceCoordinates> {
    if y == 0 {
        return Err(Error::InvalidArgument("y must be at least 1".into()));
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(y);
    for (idx, v) in basis.vectors.iter().enumerate() {
        if chosen.len() == y {
            break;
        }
        let duplicate = chosen.iter().any(|&c| {
            let u = &basis.vectors[c];
            let same = u.iter().zip(v).all(|(a, b)| (a - b).abs() <= DUPLICATE_TOLERANCE);
            let flipped = u.iter().zip(v).all(|(a, b)| (a + b).abs() <= DUPLICATE_TOLERANCE);
            same || flipped
        });
        if !duplicate {
            chosen.push(idx);
        }
    }
    if chosen.len() < y {
        return Err(Error::InsufficientVectors {
            requested: y,
            available: chosen.len(),
        });
    }
    let cols: Vec<Vec<f64>> = chosen.iter().map(|&c| basis.vectors[c].clone()).collect();
    let mut coords = InfluenceCoordinates::from_columns(&cols)?;
    coords.columns = chosen;
    Ok(coords)
}

/// Eigenvectors for a `y`-column coordinate system, requesting more pairs from
/// the solver while conjugate duplicates leave too few distinct columns.
pub fn influence_coordinates(
    g: &Graph,
    y: usize,
    kind: MatrixKind,
    solver: Solver,
) -> Result<InfluenceCoordinates> {
    let n = g.n();
    if y == 0 || y > n {
        return Err(Error::InvalidArgument(format!(
            "cannot select {y} eigenvectors for {n} vertices"
        )));
    }
    let mut count = (y + 2).min(n);
    loop {
        let basis = left_eigs_with(g, kind, count, solver)?;
        match select_input_vectors(&basis, y) {
            Err(Error::InsufficientVectors { .. }) if count < n => {
                count = (2 * count).min(n);
            }
            other => return other,
        }
    }
}

/// The `count` most dominant left eigenpairs of the Laplacian (ascending real
/// part) or adjacency matrix (descending modulus).
pub fn left_eigs(g: &Graph, kind: MatrixKind, count: usize) -> Result<SpectralBasis> {
    left_eigs_with(g, kind, count, Solver::Auto)
}

pub fn left_eigs_with(
    g: &Graph,
    kind: MatrixKind,
    count: usize,
    solver: Solver,
) -> Result<SpectralBasis> {
    let n = g.n();
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!(
            "requested {count} eigenpairs of a {n}-vertex graph"
        )));
    }
    let op = Operator::new(g, kind);
    let dense = match solver {
        Solver::Auto => n <= DENSE_LIMIT,
        Solver::Dense => true,
        Solver::Iterative => false,
    };

    let needs_null_basis = kind == MatrixKind::Laplacian && !g.is_strongly_connected();
    let mut pairs = if needs_null_basis {
        laplacian_with_null_basis(g, &op, count, dense)?
    } else if dense {
        dense_pairs(&op, count)?
    } else {
        iterative_pairs(&op, count)?
    };
    pairs.truncate(count);

    let norm = op.norm_inf();
    let mut basis = SpectralBasis {
        kind,
        eigenvalues: Vec::with_capacity(count),
        vectors: Vec::with_capacity(count),
        residuals: Vec::with_capacity(count),
    };
    for p in pairs {
        let residual = op.left_residual(&p.vector, p.value);
        if residual > RESIDUAL_TOLERANCE * norm + 1e-14 {
            return Err(Error::NoConvergence { residual });
        }
        basis.eigenvalues.push(p.value);
        basis.vectors.push(p.vector.iter().map(|z| z.re).collect());
        basis.residuals.push(residual);
    }
    Ok(basis)
}

#[derive(Debug, Clone)]
struct Pair {
    value: Complex64,
    vector: Vec<Complex64>,
}

impl Pair {
    fn new(value: Complex64, vector: Vec<Complex64>) -> Self {
        Self {
            value,
            vector: normalize_phase(vector),
        }
    }
}

/// Unit 2-norm, largest-modulus entry rotated onto the positive real axis.
fn normalize_phase(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // non-finite vectors are left as they are for the caller to reject
    let Some(pivot) = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)) else {
        return v;
    };
    let phase = v[pivot] / v[pivot].norm();
    let scale = phase.conj() / norm;
    for z in &mut v {
        *z *= scale;
    }
    v[pivot].im = 0.0;
    v
}

fn order(kind: MatrixKind, a: Complex64, b: Complex64) -> Ordering {
    match kind {
        MatrixKind::Laplacian => a
            .re
            .total_cmp(&b.re)
            .then_with(|| b.im.total_cmp(&a.im)),
        MatrixKind::Adjacency => b
            .norm()
            .total_cmp(&a.norm())
            .then_with(|| b.re.total_cmp(&a.re))
            .then_with(|| b.im.total_cmp(&a.im)),
    }
}

fn sort_pairs(kind: MatrixKind, pairs: &mut [Pair]) {
    pairs.sort_by(|a, b| order(kind, a.value, b.value));
}

/// The Laplacian or adjacency matrix of a graph, seen through its transpose.
struct Operator {
    kind: MatrixKind,
    n: usize,
    /// Diagonal of M (degrees for the Laplacian, zero for adjacency).
    diag: Vec<f64>,
    /// Rows of M: off-diagonal `(j, m_ij)`.
    rows: Vec<Vec<(usize, f64)>>,
    symmetric: bool,
}

impl Operator {
    fn new(g: &Graph, kind: MatrixKind) -> Self {
        let n = g.n();
        let (diag, rows) = match kind {
            MatrixKind::Laplacian => {
                let l = g.laplacian();
                let rows = (0..n).map(|i| l.off_diagonal(i).to_vec()).collect();
                (l.diagonal().to_vec(), rows)
            }
            MatrixKind::Adjacency => (vec![0.0; n], (0..n).map(|i| g.out_edges(i).to_vec()).collect()),
        };
        Self {
            kind,
            n,
            diag,
            rows,
            symmetric: g.is_symmetric(),
        }
    }

    fn norm_inf(&self) -> f64 {
        self.diag
            .iter()
            .zip(&self.rows)
            .map(|(d, r)| d.abs() + r.iter().map(|&(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Dense `Mᵀ`.
    fn dense_transpose(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.diag[i];
            for &(j, v) in &self.rows[i] {
                m[(j, i)] = v;
            }
        }
        m
    }

    /// `Mᵀ - shift I` in compressed column form.
    fn sparse_transpose(&self, shift: f64) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.n + self.rows.iter().map(Vec::len).sum::<usize>());
        for i in 0..self.n {
            t.push(Triplet::new(i, i, self.diag[i] - shift));
            for &(j, v) in &self.rows[i] {
                t.push(Triplet::new(j, i, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| Error::Numerical(format!("sparse assembly failed: {e:?}")))
    }

    /// `(Mᵀ x)_j = Σ_i m_ij x_i`, i.e. the row-vector product `x M`.
    fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().zip(&self.diag).map(|(a, d)| a * d).collect();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[j] += x[i] * v;
            }
        }
        out
    }

    fn left_residual(&self, v: &[Complex64], lambda: Complex64) -> f64 {
        let re: Vec<f64> = v.iter().map(|z| z.re).collect();
        let im: Vec<f64> = v.iter().map(|z| z.im).collect();
        let (mre, mim) = (self.left_mul(&re), self.left_mul(&im));
        (0..self.n)
            .map(|j| (Complex64::new(mre[j], mim[j]) - lambda * v[j]).norm())
            .fold(0.0, f64::max)
    }
}

/// All eigenpairs of `Mᵀ`, sorted; the leading `needed` pairs are finite and
/// meet the residual bound.
fn dense_pairs(op: &Operator, needed: usize) -> Result<Vec<Pair>> {
    let mt = op.dense_transpose();
    let mut pairs: Vec<Pair> = if op.symmetric {
        let evd = mt
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("symmetric eigendecomposition failed: {e:?}")))?;
        let (s, u) = (evd.S(), evd.U());
        (0..op.n)
            .map(|k| {
                let v = (0..op.n).map(|i| Complex64::new(u[(i, k)], 0.0)).collect();
                Pair::new(Complex64::new(s[k], 0.0), v)
            })
            .collect()
    } else {
        return reflected_pairs(op, &mt, needed);
    };
    sort_pairs(op.kind, &mut pairs);
    Ok(pairs)
}

/// Reflections tried by [`reflected_pairs`] before giving up.
const DENSE_ATTEMPTS: usize = 4;

/// Non-symmetric dense eigenpairs of `Mᵀ` (given as `mt`).
///
/// The QR iteration runs on `H Mᵀ H` for a fixed Householder reflection `H`,
/// which keeps the spectrum while spreading the zero pattern: on some exactly
/// reducible sparse Laplacians the iteration on `Mᵀ` itself never terminates.
/// Eigenvectors map back through `H`. A decomposition with non-finite or
/// inaccurate pairs among the leading `needed` is discarded and the next
/// reflection of a fixed sequence is tried.
fn reflected_pairs(op: &Operator, mt: &Mat<f64>, needed: usize) -> Result<Vec<Pair>> {
    let n = op.n;
    let bound = RESIDUAL_TOLERANCE * op.norm_inf() + 1e-14;
    let mut last = String::from("no attempt");
    for attempt in 0..DENSE_ATTEMPTS {
        let h = reflector(n, attempt);
        let evd = match reflect(mt, &h).eigen() {
            Ok(evd) => evd,
            Err(e) => {
                last = format!("{e:?}");
                continue;
            }
        };
        let (s, u) = (evd.S(), evd.U());
        if (0..n).any(|k| !(s[k].re.is_finite() && s[k].im.is_finite())) {
            last = "non-finite eigenvalue".into();
            continue;
        }
        let mut pairs: Vec<Pair> = (0..n)
            .map(|k| {
                let w: Vec<Complex64> = (0..n).map(|i| u[(i, k)]).collect();
                let dot: Complex64 = w.iter().zip(&h).map(|(x, &hi)| x * hi).sum();
                Pair::new(s[k], w.iter().zip(&h).map(|(x, &hi)| x - dot * (2.0 * hi)).collect())
            })
            .collect();
        sort_pairs(op.kind, &mut pairs);
        let bad = pairs.iter().take(needed).position(|p| {
            !p.vector.iter().all(|z| z.re.is_finite() && z.im.is_finite())
                || !(op.left_residual(&p.vector, p.value) <= bound)
        });
        match bad {
            None => return Ok(pairs),
            Some(k) => last = format!("inaccurate eigenpair {k}"),
        }
    }
    Err(Error::Numerical(format!(
        "dense eigendecomposition failed after {DENSE_ATTEMPTS} reflections: {last}"
    )))
}

/// Unit vector `h` of the reflection `H = I − 2hhᵀ` for a given attempt.
fn reflector(n: usize, attempt: usize) -> Vec<f64> {
    let freq = 0.754_877_666 + 0.569_840_291 * attempt as f64;
    let mut h: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * freq).sin() + 1.5).collect();
    let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    h.iter_mut().for_each(|x| *x /= norm);
    h
}

/// `H M H` in O(n²) for `H = I − 2hhᵀ`.
fn reflect(m: &Mat<f64>, h: &[f64]) -> Mat<f64> {
    let n = m.nrows();
    let mh: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[(i, j)] * h[j]).sum()).collect();
    let hm: Vec<f64> = (0..n).map(|j| (0..n).map(|i| h[i] * m[(i, j)]).sum()).collect();
    let hmh: f64 = h.iter().zip(&mh).map(|(a, b)| a * b).sum();
    Mat::from_fn(n, n, |i, j| {
        m[(i, j)] - 2.0 * h[i] * hm[j] - 2.0 * mh[i] * h[j] + 4.0 * hmh * h[i] * h[j]
    })
}

const MAX_SUBSPACE_ITERATIONS: usize = 3000;

/// Subspace iteration on `Mᵀ` (shift-inverted near zero for the Laplacian)
/// with Rayleigh-Ritz extraction against `Mᵀ` itself.
fn iterative_pairs(op: &Operator, count: usize) -> Result<Vec<Pair>> {
    let n = op.n;
    let block = (count + count.max(6)).min(n);
    let norm = op.norm_inf().max(f64::MIN_POSITIVE);
    let tol = 1e-11 * norm;

    let solve: Option<Lu<usize, f64>> = match op.kind {
        MatrixKind::Laplacian => {
            let shift = -1e-6 * norm.max(1.0);
            let a = op.sparse_transpose(shift)?;
            Some(
                a.sp_lu()
                    .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?,
            )
        }
        MatrixKind::Adjacency => None,
    };
    let apply = |q: &Mat<f64>| -> Mat<f64> {
        match &solve {
            Some(lu) => lu.solve(q),
            None => map_columns(q, |x| op.left_mul(x)),
        }
    };

    let mut q = orthonormalize(&start_block(n, block));
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_SUBSPACE_ITERATIONS {
        q = orthonormalize(&apply(&q));
        let pairs = ritz_pairs(op, &q)?;
        let wanted = &pairs[..count.min(pairs.len())];
        worst = wanted
            .iter()
            .map(|p| op.left_residual(&p.vector, p.value))
            .fold(0.0, f64::max);
        if worst <= tol {
            return Ok(pairs.into_iter().take(count).collect());
        }
    }
    Err(Error::NoConvergence { residual: worst })
}

fn map_columns(q: &Mat<f64>, f: impl Fn(&[f64]) -> Vec<f64>) -> Mat<f64> {
    let cols: Vec<Vec<f64>> = (0..q.ncols()).map(|j| f(&col_vec(q, j))).collect();
    Mat::from_fn(q.nrows(), q.ncols(), |i, j| cols[j][i])
}

fn col_vec(m: &Mat<f64>, j: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

/// Deterministic start block: a constant column, then seeded uniform noise.
fn start_block(n: usize, block: usize) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cd1);
    let noise: Vec<f64> = (0..n * block).map(|_| rng.random::<f64>() - 0.5).collect();
    Mat::from_fn(n, block, |i, j| if j == 0 { 1.0 } else { noise[j * n + i] })
}

fn orthonormalize(z: &Mat<f64>) -> Mat<f64> {
    z.qr().compute_thin_Q()
}

/// Ritz pairs of `Mᵀ` on the span of `q`, sorted by the operator's ordering.
fn ritz_pairs(op: &Operator, q: &Mat<f64>) -> Result<Vec<Pair>> {
    let (n, p) = (q.nrows(), q.ncols());
    let mq = map_columns(q, |x| op.left_mul(x));
    let h = q.transpose() * &mq;
    let evd = h
        .eigen()
        .map_err(|e| Error::Numerical(format!("projected eigenproblem failed: {e:?}")))?;
    let (s, w) = (evd.S(), evd.U());
    let mut pairs: Vec<Pair> = (0..p)
        .map(|k| {
            let v = (0..n)
                .map(|i| (0..p).map(|l| w[(l, k)] * q[(i, l)]).sum())
                .collect();
            Pair::new(s[k], v)
        })
        .collect();
    sort_pairs(op.kind, &mut pairs);
    Ok(pairs)
}

/// Laplacian pairs for a graph that is not strongly connected: canonical
/// nonnegative null vectors (one per closed class) followed by the nonzero
/// part of the spectrum.
fn laplacian_with_null_basis(
    g: &Graph,
    op: &Operator,
    count: usize,
    dense: bool,
) -> Result<Vec<Pair>> {
    let n = g.n();
    let classes = g.closed_classes();
    let q = classes.len();
    let mut class_vectors: Vec<Vec<f64>> = classes
        .iter()
        .map(|class| class_stationary_vector(g, class, dense))
        .collect::<Result<_>>()?;
    // Label-free order: classes reached by more vertices first, then larger
    // classes, then by their sorted stationary weights. Only classes alike in
    // all three keep the order in which they were found.
    let keys: Vec<(usize, usize, Vec<i64>)> = classes
        .iter()
        .zip(&class_vectors)
        .map(|(class, v)| {
            let basin = g.reaching(class).iter().filter(|&&r| r).count();
            let mut weights: Vec<i64> = class.iter().map(|&i| (v[i] * 1e9).round() as i64).collect();
            weights.sort_unstable_by(|a, b| b.cmp(a));
            (basin, class.len(), weights)
        })
        .collect();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (&keys[a], &keys[b]);
        kb.0.cmp(&ka.0).then(kb.1.cmp(&ka.1)).then_with(|| kb.2.cmp(&ka.2))
    });
    class_vectors = order.iter().map(|&k| std::mem::take(&mut class_vectors[k])).collect();

    let mut pairs = Vec::with_capacity(count.max(q));
    let zero = Complex64::new(0.0, 0.0);
    let mut first = vec![0.0; n];
    for v in &class_vectors {
        for (f, x) in first.iter_mut().zip(v) {
            *f += x;
        }
    }
    pairs.push(Pair::new(zero, first.into_iter().map(|x| Complex64::new(x, 0.0)).collect()));
    for v in class_vectors.iter().skip(1) {
        pairs.push(Pair::new(zero, v.iter().map(|&x| Complex64::new(x, 0.0)).collect()));
    }

    if count > q {
        let rest = if dense {
            dense_pairs(op, count.min(n))?
        } else {
            iterative_pairs(op, count.min(n))?
        };
        // ascending real part puts the q zero eigenvalues first
        pairs.extend(rest.into_iter().skip(q));
    }
    Ok(pairs)
}

/// Unit-norm nonnegative left null vector of a closed class, embedded in `n`.
fn class_stationary_vector(g: &Graph, class: &[usize], dense: bool) -> Result<Vec<f64>> {
    let mut full = vec![0.0; g.n()];
    if class.len() == 1 {
        full[class[0]] = 1.0;
        return Ok(full);
    }
    let sub = g.induced_subgraph(class);
    let solver = if dense { Solver::Dense } else { Solver::Iterative };
    let basis = left_eigs_with(&sub, MatrixKind::Laplacian, 1, solver)?;
    for (&v, &x) in class.iter().zip(&basis.vectors[0]) {
        full[v] = x.max(0.0);
    }
    let norm = full.iter().map(|x| x * x).sum::<f64>().sqrt();
    full.iter_mut().for_each(|x| *x /= norm);
    Ok(full)
}

/// Smallest-real-part eigenvalue of `L + diag(c)` for a fixed Laplacian.
///
/// `L + diag(c)` is a Z-matrix, so that eigenvalue is real; when every vertex
/// can reach the support of `c` it is positive and the matrix is a
/// nonsingular M-matrix whose inverse is nonnegative. Small systems use a
/// dense eigenvalue solve; larger ones run inverse subspace iteration with a
/// sparse LU whose symbolic factorisation is reused across calls, warm-started
/// from the previous call's subspace.
pub struct PerturbedSpectrum {
    n: usize,
    diag: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    symbolic: Option<SymbolicLu<usize>>,
    warm: Option<Mat<f64>>,
}

/// Systems up to this size are solved densely.
const PERTURBED_DENSE_LIMIT: usize = 48;
const PERTURBED_BLOCK: usize = 4;

impl PerturbedSpectrum {
    pub fn new(lap: &Laplacian) -> Self {
        let n = lap.n();
        Self {
            n,
            diag: lap.diagonal().to_vec(),
            rows: (0..n).map(|i| lap.off_diagonal(i).to_vec()).collect(),
            symbolic: None,
            warm: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn matrix(&self, c: &[f64]) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.n + self.rows.iter().map(Vec::len).sum::<usize>());
        for i in 0..self.n {
            t.push(Triplet::new(i, i, self.diag[i] + c[i]));
            for &(j, v) in &self.rows[i] {
                t.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| Error::Numerical(format!("sparse assembly failed: {e:?}")))
    }

    fn mul(&self, c: &[f64], x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.diag[i] + c[i]) * x[i] + self.rows[i].iter().map(|&(j, v)| v * x[j]).sum::<f64>()
            })
            .collect()
    }

    /// Dense reference computation of the smallest real part.
    pub fn dense_min_real(&self, c: &[f64]) -> Result<f64> {
        let mut m = Mat::<f64>::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.diag[i] + c[i];
            for &(j, v) in &self.rows[i] {
                m[(i, j)] = v;
            }
        }
        let ev = m
            .eigenvalues()
            .map_err(|e| Error::Numerical(format!("eigenvalues failed: {e:?}")))?;
        Ok(ev.iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
    }

    /// Smallest real part of the spectrum of `L + diag(c)`. Requires the
    /// matrix to be nonsingular for the iterative route (every vertex reaches
    /// the support of `c`).
    pub fn min_real(&mut self, c: &[f64]) -> Result<f64> {
        if c.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: c.len(),
            });
        }
        if self.n <= PERTURBED_DENSE_LIMIT {
            return self.dense_min_real(c);
        }
        let m = self.matrix(c)?;
        let symbolic = match &self.symbolic {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLu::try_new(m.symbolic())
                    .map_err(|e| Error::Numerical(format!("symbolic LU failed: {e:?}")))?;
                self.symbolic = Some(s.clone());
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, m.as_ref())
            .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;

        let n = self.n;
        let norm = (0..n)
            .map(|i| (self.diag[i] + c[i]).abs() + self.rows[i].iter().map(|&(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut q = match self.warm.take() {
            Some(w) => w,
            None => orthonormalize(&start_block(n, PERTURBED_BLOCK.min(n))),
        };
        let mut previous = f64::NAN;
        let mut residual = f64::INFINITY;
        for it in 0..MAX_SUBSPACE_ITERATIONS {
            q = orthonormalize(&lu.solve(&q));
            let p = q.ncols();
            let mq = map_columns(&q, |x| self.mul(c, x));
            let h = q.transpose() * &mq;
            let evd = h
                .eigen()
                .map_err(|e| Error::Numerical(format!("projected eigenproblem failed: {e:?}")))?;
            let (s, w) = (evd.S(), evd.U());
            let k = (0..p)
                .min_by(|&a, &b| s[a].re.total_cmp(&s[b].re))
                .expect("nonempty block");
            let theta = s[k];
            let x: Vec<Complex64> = (0..n)
                .map(|i| (0..p).map(|l| w[(l, k)] * q[(i, l)]).sum())
                .collect();
            let xr: Vec<f64> = x.iter().map(|z| z.re).collect();
            let xi: Vec<f64> = x.iter().map(|z| z.im).collect();
            let (mr, mi) = (self.mul(c, &xr), self.mul(c, &xi));
            let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            residual = (0..n)
                .map(|i| (Complex64::new(mr[i], mi[i]) - theta * x[i]).norm())
                .fold(0.0, f64::max)
                / xnorm;
            let settled = (theta.re - previous).abs() <= 1e-14 * theta.re.abs().max(1e-300);
            previous = theta.re;
            if residual <= 1e-13 * norm && (settled || it > 0 && residual <= 1e-15 * norm) {
                self.warm = Some(q);
                return Ok(theta.re);
            }
        }
        Err(Error::NoConvergence { residual })
    }
}
