//! Dense complex matrix helpers on top of `faer`.
//!
//! Everything in the library works on `Matrix = Mat<c64>` in the occupation
//! number basis; this module keeps the small amount of glue (commutators,
//! norms, Hermitian eigendecomposition, random draws) in one place.

use faer::{Mat, Side};
use rand::Rng;
use rand_distr::StandardNormal;

pub use faer::c64 as C64;

pub type Matrix = Mat<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Pins `faer` to sequential kernels. Results are then bitwise reproducible
/// for a fixed binary, which the run records rely on.
pub fn init_deterministic() {
    faer::set_global_parallelism(faer::Par::Seq);
}

pub fn zeros(n: usize) -> Matrix {
    Matrix::zeros(n, n)
}

pub fn identity(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn diagonal(values: &[f64]) -> Matrix {
    let n = values.len();
    Matrix::from_fn(n, n, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
}

pub fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    a * b
}

/// `[a, b] = ab - ba`
pub fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
    let ab = a * b;
    let ba = b * a;
    &ab - &ba
}

/// `{a, b} = ab + ba`
pub fn anticommutator(a: &Matrix, b: &Matrix) -> Matrix {
    let ab = a * b;
    let ba = b * a;
    &ab + &ba
}

pub fn adjoint(a: &Matrix) -> Matrix {
    a.adjoint().to_owned()
}

pub fn scale(a: &Matrix, c: C64) -> Matrix {
    Matrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * c)
}

pub fn scale_real(a: &Matrix, c: f64) -> Matrix {
    scale(a, C64::new(c, 0.0))
}

/// `dst += c * src`
pub fn add_scaled(dst: &mut Matrix, c: C64, src: &Matrix) {
    assert_eq!(dst.nrows(), src.nrows());
    assert_eq!(dst.ncols(), src.ncols());
    if c == ZERO {
        return;
    }
    for j in 0..dst.ncols() {
        let s = src.col_as_slice(j);
        let d = dst.col_as_slice_mut(j);
        for (x, y) in d.iter_mut().zip(s) {
            *x += c * *y;
        }
    }
}

pub fn add_scaled_real(dst: &mut Matrix, c: f64, src: &Matrix) {
    add_scaled(dst, C64::new(c, 0.0), src)
}

pub fn trace(a: &Matrix) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `tr(a^† b)`, the unnormalized Hilbert-Schmidt inner product.
pub fn hs_inner(a: &Matrix, b: &Matrix) -> C64 {
    let mut acc = ZERO;
    for j in 0..a.ncols() {
        for (x, y) in a.col_as_slice(j).iter().zip(b.col_as_slice(j)) {
            acc += x.conj() * y;
        }
    }
    acc
}

/// `tr(a b)` without forming the product.
pub fn trace_of_product(a: &Matrix, b: &Matrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for j in 0..n {
        let bj = b.col_as_slice(j);
        for (k, bkj) in bj.iter().enumerate() {
            acc += a[(j, k)] * bkj;
        }
    }
    acc
}

pub fn max_abs(a: &Matrix) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for x in a.col_as_slice(j) {
            m = m.max(x.norm());
        }
    }
    m
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.norm_l2()
}

pub fn is_zero(a: &Matrix) -> bool {
    (0..a.ncols()).all(|j| a.col_as_slice(j).iter().all(|x| *x == ZERO))
}

/// `max |a - a^†|`
pub fn hermitian_deviation(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

fn anti_hermitian_deviation(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] + a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn hermitian_part(a: &Matrix) -> Matrix {
    let n = a.nrows();
    Matrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Eigenvalues of a Hermitian matrix in nondecreasing order.
pub fn eigvalsh(h: &Matrix) -> Vec<f64> {
    h.self_adjoint_eigenvalues(Side::Lower).expect("hermitian eigenvalue solver failed")
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues nondecreasing.
pub fn eigh(h: &Matrix) -> (Vec<f64>, Matrix) {
    let evd = h.self_adjoint_eigen(Side::Lower).expect("hermitian eigen solver failed");
    let vals = evd.S().column_vector().iter().map(|x| x.re).collect();
    (vals, evd.U().to_owned())
}

/// Operator (spectral) norm.
///
/// Hermitian and anti-Hermitian inputs go through their eigenvalues; anything
/// else through the largest eigenvalue of `a^† a`.
pub fn op_norm(a: &Matrix) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    let tol = 1e-14 * scale * (n as f64);
    if hermitian_deviation(a) <= tol {
        let h = hermitian_part(a);
        return eigvalsh(&h).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }
    if anti_hermitian_deviation(a) <= tol {
        let h = Matrix::from_fn(n, n, |i, j| (a[(i, j)] - a[(j, i)].conj()) * C64::new(0.0, 0.5));
        return eigvalsh(&h).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }
    let g = a.adjoint() * a;
    let g = hermitian_part(&g);
    eigvalsh(&g).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// `u a u^†`
pub fn conjugate(u: &Matrix, a: &Matrix) -> Matrix {
    let ua = u * a;
    &ua * u.adjoint()
}

/// `u^† a u`
pub fn conjugate_adjoint(u: &Matrix, a: &Matrix) -> Matrix {
    let ua = u.adjoint() * a;
    &ua * u
}

/// `exp(-i t h)` for Hermitian `h`, via its eigendecomposition.
pub fn expm_hermitian(h: &Matrix, t: f64) -> Matrix {
    let (vals, vecs) = eigh(h);
    expm_from_eigen(&vals, &vecs, t)
}

pub fn expm_from_eigen(vals: &[f64], vecs: &Matrix, t: f64) -> Matrix {
    let n = vals.len();
    let phases: Vec<C64> = vals.iter().map(|e| C64::from_polar(1.0, -t * e)).collect();
    let scaled = Matrix::from_fn(n, n, |i, j| vecs[(i, j)] * phases[j]);
    &scaled * vecs.adjoint()
}

/// `‖u^† u - 1‖` in operator norm. Works for isometries (tall `u`) too.
pub fn unitarity_defect(u: &Matrix) -> f64 {
    let g = u.adjoint() * u;
    let k = g.nrows();
    let d = Matrix::from_fn(k, k, |i, j| if i == j { g[(i, j)] - ONE } else { g[(i, j)] });
    op_norm(&hermitian_part(&d))
}

/// Löwdin (polar) orthonormalization of the columns: `u (u^† u)^{-1/2}`.
pub fn polar_orthonormalize(u: &Matrix) -> Matrix {
    let g = hermitian_part(&(u.adjoint() * u));
    let (vals, vecs) = eigh(&g);
    let k = vals.len();
    let inv_sqrt = Matrix::from_fn(k, k, |i, j| vecs[(i, j)] * (1.0 / vals[j].max(1e-300).sqrt()));
    let g_inv_sqrt = &inv_sqrt * vecs.adjoint();
    u * &g_inv_sqrt
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let a = random_complex_matrix(rng, n, n);
    hermitian_part(&a)
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}
