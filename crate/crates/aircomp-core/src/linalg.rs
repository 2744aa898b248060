//! Complex Hermitian linear algebra used by the channel model, the MMSE
//! estimator, and the transceiver designs.
//!
//! Everything here is dense, double precision, and dimensioned for matrices
//! up to a few hundred rows (the largest matrix in play is the `L·N`-stacked
//! combiner system). Positive semi-definite factorization goes through an
//! eigendecomposition with negative-eigenvalue clamping because spatial
//! correlation matrices can be numerically rank-deficient for small angular
//! spread; positive definite solves go through Cholesky.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float as _;

use crate::{Error, Result};

/// Complex column vector.
pub type CVec = Vec<Complex64>;

/// Relative tolerance for the Hermitian-symmetry check on construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Relative tolerance below which negative eigenvalues are treated as
/// numerically zero in [`psd_factor`].
pub const PSD_TOL: f64 = 1e-10;

/// Inner product `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Euclidean norm `‖v‖²`.
pub fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// General dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[Complex64]) -> CVec {
        debug_assert_eq!(v.len(), self.cols);
        let mut out = vec![Complex64::ZERO; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(v).map(|(a, x)| a * x).sum();
        }
        out
    }

    /// `self^H · v`.
    pub fn adjoint_mul_vec(&self, v: &[Complex64]) -> CVec {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![Complex64::ZERO; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * v[i];
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm_sq(&self.data).sqrt()
    }

    pub fn column(&self, j: usize) -> CVec {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Hermitian matrix stored densely with exact conjugate symmetry.
///
/// Construction from raw entries verifies `a_ij = conj(a_ji)` within
/// [`HERMITIAN_TOL`] relative to the largest entry magnitude and then
/// symmetrizes, so downstream quadratic forms have real diagonals by
/// construction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        let scale = data.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let tol = HERMITIAN_TOL * scale.max(1e-300);
        for i in 0..dim {
            for j in i..dim {
                if (data[i * dim + j] - data[j * dim + i].conj()).norm() > tol {
                    return Err(Error::NotHermitian);
                }
            }
        }
        let mut m = Self { dim, data };
        m.symmetrize();
        Ok(m)
    }

    /// Builds from the upper triangle of `f`; the lower triangle is mirrored.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(f(i, i).re, 0.0);
            for j in i + 1..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v.conj();
            }
        }
        m
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(s, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        if i == j {
            self.data[i * self.dim + i] = Complex64::new(v.re, 0.0);
        } else {
            self.data[i * self.dim + j] = v;
            self.data[j * self.dim + i] = v.conj();
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i].re).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for x in &mut out.data {
            *x *= s;
        }
        out
    }

    /// `self += s · other`.
    pub fn add_assign_scaled(&mut self, other: &HermitianMatrix, s: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// `self += s · I`.
    pub fn add_assign_identity(&mut self, s: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += s;
        }
    }

    /// Rank-one update `self += w · v v^H`.
    pub fn add_assign_outer(&mut self, v: &[Complex64], w: f64) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i * self.dim + j] += w * v[i] * v[j].conj();
            }
        }
    }

    /// Difference `self − other`; errors if the result would not make sense
    /// dimensionally.
    pub fn sub(&self, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> CVec {
        debug_assert_eq!(v.len(), self.dim);
        let mut out = vec![Complex64::ZERO; self.dim];
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            out[i] = row.iter().zip(v).map(|(a, x)| a * x).sum();
        }
        out
    }

    pub fn to_cmatrix(&self) -> CMatrix {
        CMatrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    /// Symmetrizes a general matrix product that is Hermitian in exact
    /// arithmetic, e.g. `R Ξ⁻¹ R`.
    pub fn from_product(m: &CMatrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch {
                expected: m.rows,
                found: m.cols,
            });
        }
        let mut h = Self {
            dim: m.rows,
            data: m.data.clone(),
        };
        h.symmetrize();
        Ok(h)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm_sq(&self.data).sqrt()
    }

    fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            self.data[i * n + i] = Complex64::new(self.data[i * n + i].re, 0.0);
            for j in i + 1..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }
}

/// Cholesky factorization `A = L L^H` of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    // lower triangle, row-major full storage
    l: Vec<Complex64>,
}

impl Cholesky {
    pub fn new(a: &HermitianMatrix) -> Result<Self> {
        let n = a.dim;
        let mut l = vec![Complex64::ZERO; n * n];
        for j in 0..n {
            let mut sum = a.get(j, j).re;
            for k in 0..j {
                sum -= l[j * n + k].norm_sqr();
            }
            if !(sum > 0.0) || !sum.is_finite() {
                return Err(Error::SingularMatrix);
            }
            let diag = sum.sqrt();
            l[j * n + j] = Complex64::new(diag, 0.0);
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / diag;
            }
        }
        Ok(Self { dim: n, l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `A x = b`.
    pub fn solve_vec(&self, b: &[Complex64]) -> Result<CVec> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: b.len(),
            });
        }
        let n = self.dim;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[i * n + k];
                x[i] = x[i] - lik * x[k];
            }
            x[i] /= self.l[i * n + i];
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = self.l[k * n + i].conj();
                x[i] = x[i] - lki * x[k];
            }
            x[i] /= self.l[i * n + i];
        }
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &CMatrix) -> Result<CMatrix> {
        if b.rows != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: b.rows,
            });
        }
        let mut out = CMatrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let col: CVec = (0..b.rows).map(|i| b[(i, j)]).collect();
            let x = self.solve_vec(&col)?;
            for i in 0..b.rows {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }
}

/// Solves the Hermitian positive definite system `A x = b`.
pub fn hermitian_solve(a: &HermitianMatrix, b: &[Complex64]) -> Result<CVec> {
    Cholesky::new(a)?.solve_vec(b)
}

/// Quadratic form `v^H M v` of a Hermitian `M`, returned as a real number.
///
/// The imaginary part is pure roundoff for exactly-symmetric storage and is
/// discarded after a debug assertion.
pub fn quad_form(v: &[Complex64], m: &HermitianMatrix) -> Result<f64> {
    if v.len() != m.dim {
        return Err(Error::DimensionMismatch {
            expected: m.dim,
            found: v.len(),
        });
    }
    let mv = m.mul_vec(v);
    let q = inner(v, &mv);
    debug_assert!(q.im.abs() <= 1e-10 * (1.0 + q.re.abs()));
    Ok(q.re)
}

/// Maximum of the generalized Rayleigh quotient `v^H h h^H v / v^H B v`
/// over `v`, which equals `h^H B⁻¹ h` for positive definite `B`.
///
/// A positive semidefinite `B` is handled through its eigendecomposition:
/// directions with negligible eigenvalue contribute nothing unless `h`
/// overlaps them, in which case the quotient is unbounded and infinity is
/// returned.
pub fn rayleigh_max(h: &[Complex64], b: &HermitianMatrix) -> Result<f64> {
    if h.len() != b.dim {
        return Err(Error::DimensionMismatch {
            expected: b.dim,
            found: h.len(),
        });
    }
    match hermitian_solve(b, h) {
        Ok(x) => Ok(inner(h, &x).re.max(0.0)),
        Err(Error::SingularMatrix) => {
            let n = b.dim;
            let (vals, vecs) = eigen_hermitian(b)?;
            let lam_max = vals.iter().fold(0.0_f64, |a, &v| a.max(v));
            let tol = f64::EPSILON * lam_max * n as f64;
            let h_scale = norm_sq(h);
            let mut quot = 0.0;
            for (i, &lam) in vals.iter().enumerate() {
                let mut proj = Complex64::ZERO;
                for j in 0..n {
                    proj += vecs[(j, i)].conj() * h[j];
                }
                let comp = proj.norm_sqr();
                if lam > tol {
                    quot += comp / lam;
                } else if comp > 1e-12 * h_scale {
                    return Ok(f64::INFINITY);
                }
            }
            Ok(quot)
        }
        Err(e) => Err(e),
    }
}

/// Eigendecomposition of a Hermitian matrix: returns eigenvalues in
/// ascending order and the unitary matrix of eigenvectors as columns.
///
/// Householder tridiagonalization followed by implicit-shift QL on the
/// real symmetric tridiagonal form, with eigenvectors accumulated through
/// both stages.
pub fn eigen_hermitian(a: &HermitianMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.dim;
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let mut work = a.to_cmatrix();
    let mut q = CMatrix::identity(n);

    // Householder reduction to Hermitian tridiagonal form.
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1; // length of the column below the diagonal
        let mut x = vec![Complex64::ZERO; m];
        for i in 0..m {
            x[i] = work[(k + 1 + i, k)];
        }
        let xnorm = norm_sq(&x).sqrt();
        let tail: f64 = x[1..].iter().map(|c| c.norm_sqr()).sum();
        if xnorm == 0.0 || tail == 0.0 {
            continue; // already tridiagonal in this column
        }
        // alpha = -phase(x0) * |x|
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            Complex64::ONE
        };
        let alpha = -phase * xnorm;
        let mut u = x.clone();
        u[0] -= alpha;
        let unorm = norm_sq(&u).sqrt();
        if unorm == 0.0 {
            continue;
        }
        for c in &mut u {
            *c /= unorm;
        }
        // Two-sided update of the trailing block: A <- H A H with
        // H = I - 2 u u^H.
        let mut p = vec![Complex64::ZERO; m];
        for i in 0..m {
            let mut s = Complex64::ZERO;
            for j in 0..m {
                s += work[(k + 1 + i, k + 1 + j)] * u[j];
            }
            p[i] = s;
        }
        let kappa = inner(&u, &p).re; // u^H A u, real
        let w: CVec = p
            .iter()
            .zip(&u)
            .map(|(pi, ui)| 2.0 * (pi - kappa * ui))
            .collect();
        for i in 0..m {
            for j in 0..m {
                let delta = u[i] * w[j].conj() + w[i] * u[j].conj();
                let cur = work[(k + 1 + i, k + 1 + j)];
                work[(k + 1 + i, k + 1 + j)] = cur - delta;
            }
        }
        // Column k collapses to alpha·e1.
        work[(k + 1, k)] = alpha;
        work[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            work[(i, k)] = Complex64::ZERO;
            work[(k, i)] = Complex64::ZERO;
        }
        // Accumulate Q <- Q H (H acts on columns k+1..n).
        for row in 0..n {
            let mut s = Complex64::ZERO;
            for j in 0..m {
                s += q[(row, k + 1 + j)] * u[j];
            }
            for j in 0..m {
                let cur = q[(row, k + 1 + j)];
                q[(row, k + 1 + j)] = cur - 2.0 * s * u[j].conj();
            }
        }
    }

    // Phase-scale so the subdiagonal becomes real and nonnegative.
    let mut d = vec![0.0_f64; n];
    let mut e = vec![0.0_f64; n];
    let mut theta = vec![Complex64::ONE; n];
    for i in 0..n {
        d[i] = work[(i, i)].re;
    }
    for i in 0..n - 1 {
        let sub = work[(i + 1, i)];
        let r = sub.norm();
        theta[i + 1] = if r > 0.0 {
            theta[i] * sub / r
        } else {
            theta[i]
        };
        e[i] = r;
    }
    for j in 0..n {
        for row in 0..n {
            let cur = q[(row, j)];
            q[(row, j)] = cur * theta[j];
        }
    }

    tridiagonal_ql(&mut d, &mut e, &mut q)?;

    // Sort ascending with matching eigenvector columns.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(core::cmp::Ordering::Equal));
    let sorted_d: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut sorted_q = CMatrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for row in 0..n {
            sorted_q[(row, new_j)] = q[(row, old_j)];
        }
    }
    Ok((sorted_d, sorted_q))
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix, rotations
/// accumulated into the complex columns of `z`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut CMatrix) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    // absolute deflation floor: off-diagonals this small relative to the
    // whole matrix are below attainable accuracy, even where the local
    // diagonal entries are tiny (clustered near-zero eigenvalues)
    let anorm = d
        .iter()
        .zip(e.iter())
        .map(|(di, ei)| di.abs() + ei.abs())
        .fold(0.0_f64, f64::max);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * (dd + anorm) {
                    e[m] = 0.0;
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::EigenNoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let (mut s, mut c) = (1.0_f64, 1.0_f64);
            let mut p = 0.0_f64;
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in 0..z.rows {
                    let fz = z[(row, i + 1)];
                    let zi = z[(row, i)];
                    z[(row, i + 1)] = s * zi + c * fz;
                    z[(row, i)] = c * zi - s * fz;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Projects a numerically-PSD Hermitian matrix onto the PSD cone by
/// clamping eigenvalues in `[-rel_tol·|tr(M)|, 0)` to zero.
///
/// Matrices formed as differences (`C = R − B`) can pick up tiny negative
/// eigenvalues from cancellation; downstream scaling by large powers turns
/// those into failed factorizations unless removed here.
pub fn psd_clamp(m: &HermitianMatrix, rel_tol: f64) -> Result<HermitianMatrix> {
    let n = m.dim();
    let (eigvals, eigvecs) = eigen_hermitian(m)?;
    let tol = rel_tol * m.trace().abs();
    if eigvals.iter().any(|&lam| lam < -tol) {
        return Err(Error::NotPsd {
            min_eigenvalue: eigvals[0],
            tolerance: tol,
        });
    }
    if eigvals.iter().all(|&lam| lam >= 0.0) {
        return Ok(m.clone());
    }
    let mut scaled = eigvecs.clone();
    for j in 0..n {
        let lam = eigvals[j].max(0.0);
        for i in 0..n {
            let cur = scaled[(i, j)];
            scaled[(i, j)] = cur * lam;
        }
    }
    HermitianMatrix::from_product(&scaled.matmul(&eigvecs.adjoint()))
}

/// Factorizes a numerically positive semi-definite Hermitian matrix as
/// `M = F F^H`, clamping eigenvalues in `[-ε·tr(M)/dim, 0)` to zero.
///
/// Fails with [`Error::NotPsd`] if an eigenvalue is below the tolerance.
pub fn psd_factor(m: &HermitianMatrix) -> Result<CMatrix> {
    let n = m.dim;
    let (eigvals, eigvecs) = eigen_hermitian(m)?;
    let tol = if n > 0 {
        PSD_TOL * m.trace().abs() / n as f64
    } else {
        0.0
    };
    let mut f = eigvecs;
    for j in 0..n {
        let lam = eigvals[j];
        if lam < -tol {
            return Err(Error::NotPsd {
                min_eigenvalue: lam,
                tolerance: tol,
            });
        }
        let s = lam.max(0.0).sqrt();
        for i in 0..n {
            let cur = f[(i, j)];
            f[(i, j)] = cur * s;
        }
    }
    Ok(f)
}
