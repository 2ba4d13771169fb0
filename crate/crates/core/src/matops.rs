//! Dense real-matrix utilities shared by every other module.
//!
//! All matrices in this crate are small (at most a few dozen rows), so the
//! routines favour accuracy and simplicity over asymptotic speed.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Margin used by [`is_hurwitz`]: real parts must be below `-HURWITZ_MARGIN`.
pub const HURWITZ_MARGIN: f64 = 1e-12;

/// Tolerance for the skew-symmetry test in [`check_neutral_stability`].
pub const SKEW_TOLERANCE: f64 = 1e-12;

pub(crate) fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} contains non-finite entries")))
    }
}

fn ensure_nonempty(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(invalid(format!("{what} has a zero dimension")));
    }
    Ok(())
}

fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    ensure_nonempty(m, what)?;
    if m.nrows() != m.ncols() {
        return Err(invalid(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    ensure_nonempty(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    Ok(norm2(m))
}

/// Spectral norm without input validation, for hot paths on known-good data.
pub(crate) fn norm2(m: &Matrix) -> f64 {
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn frobenius_norm(m: &Matrix) -> Result<f64> {
    ensure_nonempty(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    Ok(m.norm())
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Stacks the columns of `m` into a single column.
pub fn vec_mat(m: &Matrix) -> Matrix {
    Matrix::from_column_slice(m.len(), 1, m.as_slice())
}

/// Inverse of [`vec_mat`]: refills a `rows x cols` matrix column by column.
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(invalid(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Matrix::from_column_slice(rows, cols, v))
}

// Padé coefficients and 1-norm thresholds from Higham's scaling-and-squaring
// analysis (degrees 3, 5, 7, 9, 13).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
#[allow(clippy::excessive_precision)]
const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068,
    5.371920351148152,
];

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Odd/even split `(U, V)` of a low-degree Padé approximant.
fn pade_low(a: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.nrows();
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u = &ident * b[1];
    let mut v = &ident * b[0];
    for k in (2..b.len()).step_by(2) {
        power = &power * &a2;
        v += &power * b[k];
        if k + 1 < b.len() {
            u += &power * b[k + 1];
        }
    }
    (a * u, v)
}

fn pade13(a: &Matrix) -> (Matrix, Matrix) {
    let b = &PADE13;
    let n = a.nrows();
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    (u, v)
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn mat_exp(m: &Matrix) -> Result<Matrix> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    Ok(expm_unchecked(m))
}

pub(crate) fn expm_unchecked(m: &Matrix) -> Matrix {
    let norm = one_norm(m);
    let (u, v, squarings) = if norm < THETA[0] {
        let (u, v) = pade_low(m, &PADE3);
        (u, v, 0)
    } else if norm < THETA[1] {
        let (u, v) = pade_low(m, &PADE5);
        (u, v, 0)
    } else if norm < THETA[2] {
        let (u, v) = pade_low(m, &PADE7);
        (u, v, 0)
    } else if norm < THETA[3] {
        let (u, v) = pade_low(m, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA[4]).log2().ceil().max(0.0) as i32;
        let scaled = m * 2f64.powi(-s);
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let numer = &v + &u;
    let denom = v - u;
    // q(A) is well conditioned for these norms, so LU never fails in practice.
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for in-range norms");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Solves a dense square system, rejecting numerically singular matrices.
pub(crate) fn solve_dense(a: &Matrix, b: &Matrix) -> Option<Matrix> {
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(max > 0.0) || min <= 1e-13 * max {
        return None;
    }
    a.clone().lu().solve(b)
}

/// Solves `X·m + mᵀ·X = c·I` for symmetric `X`.
///
/// The equation is vectorized into `(mᵀ ⊗ I + I ⊗ mᵀ) vec(X) = c vec(I)` and
/// solved densely; the result is symmetrized.
pub fn solve_sym_lyapunov(m: &Matrix, c: f64) -> Result<Matrix> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    if !c.is_finite() {
        return Err(invalid("right-hand side scale must be finite"));
    }
    let n = m.nrows();
    let ident = Matrix::identity(n, n);
    let mt = m.transpose();
    let op = kron(&mt, &ident) + kron(&ident, &mt);
    let rhs = vec_mat(&(&ident * c));
    let sol = solve_dense(&op, &rhs).ok_or_else(|| {
        Error::NoSolution("Lyapunov operator is singular (two eigenvalues of m sum to zero)".into())
    })?;
    let x = unvec(sol.as_slice(), n, n)?;
    Ok((&x + x.transpose()) * 0.5)
}

/// True iff every eigenvalue has real part below `-HURWITZ_MARGIN`.
pub fn is_hurwitz(m: &Matrix) -> Result<bool> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    Ok(max_real_eigenvalue(m) < -HURWITZ_MARGIN)
}

pub(crate) fn max_real_eigenvalue(m: &Matrix) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Accepts exactly the skew-symmetric exosystem matrices (zero included).
pub fn check_neutral_stability(s: &Matrix) -> Result<bool> {
    ensure_square(s, "matrix")?;
    ensure_finite(s, "matrix")?;
    let sum = s + s.transpose();
    Ok(sum.iter().all(|x| x.abs() <= SKEW_TOLERANCE))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eigen_range(m: &Matrix) -> Result<(f64, f64)> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    let sym = (m + m.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    Ok((ev.min(), ev.max()))
}
