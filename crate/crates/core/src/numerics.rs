//! Small shared linear-algebra helpers.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Largest real part over the eigenvalues of a real square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    spectral_abscissa(a) < 0.0
}

/// Extremal eigenvalues of a symmetric matrix, as (min, max).
pub fn sym_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    (lo, hi)
}

/// Joint diagonal balancing of a matrix pair by powers of two.
///
/// Returns scales `d` such that the similarity x -> D^{-1} x with
/// D = diag(d) maps (A, A_d) to (D^{-1}AD, D^{-1}A_dD) with more even
/// row/column magnitudes. Powers of two keep the transform exact in
/// floating point; eigenvalues and delay margins are invariant under it.
pub fn balance_pair(a: &DMatrix<f64>, a_d: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut d = DVector::from_element(n, 1.0f64);
    let mut ab = a.clone();
    let mut adb = a_d.clone();
    for _pass in 0..16 {
        let mut converged = true;
        for i in 0..n {
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..n {
                if j != i {
                    row += ab[(i, j)].abs() + adb[(i, j)].abs();
                    col += ab[(j, i)].abs() + adb[(j, i)].abs();
                }
            }
            if row == 0.0 || col == 0.0 {
                continue;
            }
            // scale factor nearest to sqrt(row/col), as a power of two
            let f = (row / col).sqrt().log2().round();
            if f == 0.0 {
                continue;
            }
            let s = f.exp2();
            if !s.is_finite() || s == 0.0 {
                continue;
            }
            converged = false;
            d[i] *= s;
            for j in 0..n {
                ab[(i, j)] /= s;
                adb[(i, j)] /= s;
                ab[(j, i)] *= s;
                adb[(j, i)] *= s;
            }
        }
        if converged {
            break;
        }
    }
    d
}

/// Applies the similarity induced by `balance_pair` scales to a matrix.
pub fn apply_balance(m: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| m[(i, j)] * d[j] / d[i])
}

/// Real 2n x 2n embedding of a complex matrix; its eigenvalue multiset is
/// the union of the eigenvalues of M and their conjugates, so moduli are
/// recovered exactly while arguments stay sign-ambiguous.
pub fn complex_embedding(m: &CMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)];
            r[(i, j)] = v.re;
            r[(i, j + n)] = -v.im;
            r[(i + n, j)] = v.im;
            r[(i + n, j + n)] = v.re;
        }
    }
    r
}

/// Estimate of || M^{-1} || by two rounds of inverse iteration from a
/// fixed deterministic vector; returns a large value when M is close to
/// singular, or `None` when the LU factorization fails outright.
pub fn resolvent_growth(m: &CMatrix) -> Option<f64> {
    let n = m.nrows();
    let lu = m.clone().lu();
    let w = DVector::from_fn(n, |i, _| {
        C64::new(1.0 / ((i + 1) as f64), 0.5 / ((i + 2) as f64))
    });
    let w = &w / C64::new(w.norm(), 0.0);
    let v1 = lu.solve(&w)?;
    let g1 = v1.norm();
    if !g1.is_finite() || g1 == 0.0 {
        return Some(g1.max(0.0));
    }
    let v2 = lu.solve(&(&v1 / C64::new(g1, 0.0)))?;
    Some(g1.max(v2.norm()))
}
