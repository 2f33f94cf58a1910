//! Delay-dependent stability LMI: construction, feasibility checking and
//! independent certificate auditing.
//!
//! For x'(t) = A x(t) + A_d x(t - tau) with an uncertain constant delay in
//! [0, tau_d], asymptotic stability holds if there are P > 0, Q > 0, V > 0
//! and a square W making the 4m x 4m block matrix
//!
//!   [ (1,1)      -W'A_d     A'A_d'V    tau_d(W' + P) ]
//!   [ -A_d'W     -Q         A_d'A_d'V  0             ]
//!   [ V A_d A    V A_d A_d  -V         0             ]
//!   [ tau_d(W+P) 0          0          -V            ]
//!
//! negative definite, where (1,1) = (A+A_d)'P + P(A+A_d) + W'A_d + A_d'W + Q.
//! Strictness is realized as <= -eps I on the stability block together
//! with -P, -Q, -V diagonal blocks, so one semidefinite feasibility
//! problem hosts the whole criterion. The criterion is sufficient only:
//! an infeasible report never proves instability.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::numerics::sym_eig_range;
use crate::sdpkernel::{self, CoeffMat, KernelOptions, KernelStatus, SdpFeasibility};
use crate::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Number of free scalars in one m x m symmetric matrix.
pub fn sym_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Packs a symmetric matrix into a vector with off-diagonal entries
/// scaled by sqrt(2), so Euclidean and Frobenius inner products agree.
pub fn sym_to_vec(mat: &DMatrix<f64>) -> Vec<f64> {
    let m = mat.nrows();
    let mut out = Vec::with_capacity(sym_len(m));
    for a in 0..m {
        for b in a..m {
            out.push(if a == b {
                mat[(a, a)]
            } else {
                SQRT2 * mat[(a, b)]
            });
        }
    }
    out
}

/// Inverse of [`sym_to_vec`].
pub fn vec_to_sym(v: &[f64], m: usize) -> DMatrix<f64> {
    let mut mat = DMatrix::zeros(m, m);
    let mut k = 0;
    for a in 0..m {
        for b in a..m {
            if a == b {
                mat[(a, a)] = v[k];
            } else {
                mat[(a, b)] = v[k] / SQRT2;
                mat[(b, a)] = v[k] / SQRT2;
            }
            k += 1;
        }
    }
    mat
}

/// The symbolic feasibility problem for one (A, A_d, tau_d, eps).
///
/// Decision variables are packed as [svec(P); svec(Q); svec(V); vec(W)]
/// of total length 3 m(m+1)/2 + m^2.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub a: DMatrix<f64>,
    pub a_d: DMatrix<f64>,
    pub tau_d: f64,
    /// Absolute strictness margin.
    pub epsilon: f64,
    // cached products shared by every evaluation
    a_total: DMatrix<f64>,
    ada: DMatrix<f64>,
    adad: DMatrix<f64>,
}

/// Concrete feasibility witness with its audit evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub m: usize,
    pub tau_d: f64,
    pub epsilon: f64,
    /// Row-major m x m matrices.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub residuals: Residuals,
    /// System matrices the certificate refers to, row-major, so the
    /// document is auditable on its own.
    pub a: Vec<f64>,
    pub a_d: Vec<f64>,
}

/// Eigenvalue evidence recomputed from the certificate matrices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Residuals {
    /// Max eigenvalue of the assembled stability block; feasible means
    /// at most -eps.
    pub block_max_eig: f64,
    pub p_min_eig: f64,
    pub q_min_eig: f64,
    pub v_min_eig: f64,
}

/// Outcome of a feasibility check.
#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(Certificate),
    Infeasible(InfeasibleReport),
}

/// Diagnostics of a check that did not certify. "Not certified" only:
/// the criterion is sufficient, so this never proves instability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfeasibleReport {
    /// Best achieved max-eigenvalue slack; stayed above -eps.
    pub best_slack: f64,
    pub iterations: usize,
    pub mu_trace: Vec<f64>,
}

/// Audit verdict with the recomputed residuals.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub residuals: Residuals,
}

/// Default strictness: 1e-6 relative to the magnitude of the constant
/// matrix data entering the stability block.
pub fn default_epsilon(a: &DMatrix<f64>, a_d: &DMatrix<f64>) -> f64 {
    1e-6 * (a + a_d).norm().max(1.0)
}

/// Builds the symbolic LMI for the given system and delay bound.
pub fn build_lmi(
    a: &DMatrix<f64>,
    a_d: &DMatrix<f64>,
    tau_d: f64,
    epsilon: f64,
) -> Result<LmiProblem> {
    let m = a.nrows();
    if a.ncols() != m || a_d.nrows() != m || a_d.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, A_d is {}x{}",
            a.nrows(),
            a.ncols(),
            a_d.nrows(),
            a_d.ncols()
        )));
    }
    if !(tau_d >= 0.0) {
        return Err(Error::InvalidParam(format!("tau_d = {tau_d} must be >= 0")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParam(format!("epsilon = {epsilon} must be > 0")));
    }
    let a_total = a + a_d;
    let ada = a_d * a;
    let adad = a_d * a_d;
    Ok(LmiProblem {
        a: a.clone(),
        a_d: a_d.clone(),
        tau_d,
        epsilon,
        a_total,
        ada,
        adad,
    })
}

impl LmiProblem {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_vars(&self) -> usize {
        3 * sym_len(self.m()) + self.m() * self.m()
    }

    /// Evaluates the affine map at concrete matrices: the stability block
    /// followed by the -P, -Q, -V positivity blocks.
    pub fn eval(
        &self,
        p: &DMatrix<f64>,
        q: &DMatrix<f64>,
        v: &DMatrix<f64>,
        w: &DMatrix<f64>,
    ) -> Vec<DMatrix<f64>> {
        let m = self.m();
        let mut big = DMatrix::zeros(4 * m, 4 * m);

        let block_11 = self.a_total.transpose() * p
            + p * &self.a_total
            + w.transpose() * &self.a_d
            + self.a_d.transpose() * w
            + q;
        let block_12 = -(w.transpose() * &self.a_d);
        let block_13 = self.ada.transpose() * v; // A' A_d' V
        let block_14 = (w.transpose() + p) * self.tau_d;
        let block_23 = self.adad.transpose() * v; // A_d' A_d' V

        big.view_mut((0, 0), (m, m)).copy_from(&block_11);
        big.view_mut((0, m), (m, m)).copy_from(&block_12);
        big.view_mut((m, 0), (m, m)).copy_from(&block_12.transpose());
        big.view_mut((0, 2 * m), (m, m)).copy_from(&block_13);
        big.view_mut((2 * m, 0), (m, m)).copy_from(&block_13.transpose());
        big.view_mut((0, 3 * m), (m, m)).copy_from(&block_14);
        big.view_mut((3 * m, 0), (m, m)).copy_from(&block_14.transpose());
        big.view_mut((m, m), (m, m)).copy_from(&(-q));
        big.view_mut((m, 2 * m), (m, m)).copy_from(&block_23);
        big.view_mut((2 * m, m), (m, m)).copy_from(&block_23.transpose());
        big.view_mut((2 * m, 2 * m), (m, m)).copy_from(&(-v));
        big.view_mut((3 * m, 3 * m), (m, m)).copy_from(&(-v));

        vec![big, -p, -q, -v]
    }

    /// Splits a packed variable vector into (P, Q, V, W).
    pub fn unpack(&self, x: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let m = self.m();
        let s = sym_len(m);
        let p = vec_to_sym(&x[0..s], m);
        let q = vec_to_sym(&x[s..2 * s], m);
        let v = vec_to_sym(&x[2 * s..3 * s], m);
        let w = DMatrix::from_fn(m, m, |r, c| x[3 * s + r * m + c]);
        (p, q, v, w)
    }

    /// Lowers the symbolic problem to the kernel's canonical form by
    /// evaluating the affine map on every unit variable.
    pub fn to_sdp(&self) -> SdpFeasibility {
        let m = self.m();
        let blocks = vec![4 * m, m, m, m];
        let f0: Vec<DMatrix<f64>> = blocks.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        let k = self.n_vars();
        let mut coeffs = Vec::with_capacity(k);
        let mut x = vec![0.0f64; k];
        for i in 0..k {
            x[i] = 1.0;
            let (p, q, v, w) = self.unpack(&x);
            x[i] = 0.0;
            let evald = self.eval(&p, &q, &v, &w);
            let mut c = CoeffMat::new(blocks.len());
            for (b, mat) in evald.iter().enumerate() {
                let d = mat.nrows();
                for r in 0..d {
                    for col in 0..d {
                        let val = mat[(r, col)];
                        if val != 0.0 {
                            c.add(b, r, col, val);
                        }
                    }
                }
            }
            coeffs.push(c);
        }
        SdpFeasibility {
            blocks,
            f0,
            coeffs,
            target_slack: self.epsilon,
        }
    }

    fn residuals_of(
        &self,
        p: &DMatrix<f64>,
        q: &DMatrix<f64>,
        v: &DMatrix<f64>,
        w: &DMatrix<f64>,
    ) -> Residuals {
        let blocks = self.eval(p, q, v, w);
        Residuals {
            block_max_eig: sym_eig_range(&blocks[0]).1,
            p_min_eig: sym_eig_range(p).0,
            q_min_eig: sym_eig_range(q).0,
            v_min_eig: sym_eig_range(v).0,
        }
    }
}

fn row_major(mat: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(mat.nrows() * mat.ncols());
    for r in 0..mat.nrows() {
        for c in 0..mat.ncols() {
            out.push(mat[(r, c)]);
        }
    }
    out
}

fn from_row_major(v: &[f64], m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |r, c| v[r * m + c])
}

/// Runs the feasibility kernel on the lowered problem.
///
/// Feasible results carry a certificate that passes [`verify_certificate`];
/// infeasible reports carry the best slack and iteration diagnostics.
/// Numerical breakdown surfaces as [`Error::SolverFailure`], which callers
/// must treat as "unknown".
pub fn check_feasible(problem: &LmiProblem, opts: &KernelOptions) -> Result<Feasibility> {
    let sdp = problem.to_sdp();
    let result = sdpkernel::solve(&sdp, opts)?;
    match result.status {
        KernelStatus::StrictlyFeasible => {
            let (p, q, v, w) = problem.unpack(&result.x);
            let residuals = problem.residuals_of(&p, &q, &v, &w);
            Ok(Feasibility::Feasible(Certificate {
                m: problem.m(),
                tau_d: problem.tau_d,
                epsilon: problem.epsilon,
                p: row_major(&p),
                q: row_major(&q),
                v: row_major(&v),
                w: row_major(&w),
                residuals,
                a: row_major(&problem.a),
                a_d: row_major(&problem.a_d),
            }))
        }
        KernelStatus::NotCertified => Ok(Feasibility::Infeasible(InfeasibleReport {
            best_slack: result.slack,
            iterations: result.iterations,
            mu_trace: result.mu_trace,
        })),
        KernelStatus::NumericalFailure => Err(Error::SolverFailure(format!(
            "kernel breakdown after {} Newton steps (best slack {})",
            result.iterations, result.slack
        ))),
    }
}

/// Recomputes every block of the criterion from the certificate matrices
/// and checks the eigenvalue evidence at tolerance eps/2.
pub fn verify_certificate(problem: &LmiProblem, cert: &Certificate) -> Result<Verdict> {
    let m = problem.m();
    if cert.m != m
        || cert.p.len() != m * m
        || cert.q.len() != m * m
        || cert.v.len() != m * m
        || cert.w.len() != m * m
    {
        return Err(Error::DimensionMismatch(format!(
            "certificate for m = {}, problem has m = {m}",
            cert.m
        )));
    }
    let p = from_row_major(&cert.p, m);
    let q = from_row_major(&cert.q, m);
    let v = from_row_major(&cert.v, m);
    let w = from_row_major(&cert.w, m);
    let residuals = problem.residuals_of(&p, &q, &v, &w);
    let eps = problem.epsilon;
    let pass = residuals.block_max_eig <= -eps / 2.0
        && residuals.p_min_eig >= eps / 2.0
        && residuals.q_min_eig >= eps / 2.0
        && residuals.v_min_eig >= eps / 2.0;
    Ok(Verdict { pass, residuals })
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialization")
    }

    pub fn from_json(s: &str) -> Result<Certificate> {
        serde_json::from_str(s)
            .map_err(|e| Error::InvalidParam(format!("certificate parse: {e}")))
    }

    /// Rebuilds the LMI this certificate claims to witness.
    pub fn problem(&self) -> Result<LmiProblem> {
        let a = from_row_major(&self.a, self.m);
        let a_d = from_row_major(&self.a_d, self.m);
        build_lmi(&a, &a_d, self.tau_d, self.epsilon)
    }
}
