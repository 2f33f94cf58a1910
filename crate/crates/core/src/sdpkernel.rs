//! Dense semidefinite feasibility kernel.
//!
//! Solves "find x with F0 + sum_i x_i F_i <= -eps I" over a block-diagonal
//! symmetric structure by phase-1 minimization of the worst eigenvalue:
//! minimize t subject to F(x) <= t I, via damped-Newton log-det barrier
//! path following on phi(x, t) = t/mu - log det(tI - F(x)).
//!
//! The reported slack is always the true maximum eigenvalue of F(x),
//! reassembled from the problem data, never an internal quantity. A run
//! is deterministic for identical inputs and options.

use nalgebra::DMatrix;

use crate::numerics::sym_eig_range;
use crate::{Error, Result};

/// One sparse symmetric coefficient matrix, stored per block as triplets
/// over the full matrix (both triangles).
#[derive(Debug, Clone, Default)]
pub struct CoeffMat {
    /// Per block: (row, col, value) entries.
    pub entries: Vec<Vec<(u32, u32, f64)>>,
}

impl CoeffMat {
    pub fn new(n_blocks: usize) -> Self {
        CoeffMat {
            entries: vec![Vec::new(); n_blocks],
        }
    }

    /// Adds a single entry.
    pub fn add(&mut self, block: usize, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.entries[block].push((r as u32, c as u32, v));
        }
    }

    /// Adds a symmetric pair (r,c) and (c,r), or the diagonal entry once.
    pub fn add_sym(&mut self, block: usize, r: usize, c: usize, v: f64) {
        self.add(block, r, c, v);
        if r != c {
            self.add(block, c, r, v);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|e| e.is_empty())
    }

    /// Merges duplicate positions and drops zeros.
    fn compress(&mut self) {
        for block in &mut self.entries {
            block.sort_by_key(|&(r, c, _)| (r, c));
            let mut out: Vec<(u32, u32, f64)> = Vec::with_capacity(block.len());
            for &(r, c, v) in block.iter() {
                match out.last_mut() {
                    Some(last) if last.0 == r && last.1 == c => last.2 += v,
                    _ => out.push((r, c, v)),
                }
            }
            out.retain(|&(_, _, v)| v != 0.0);
            *block = out;
        }
    }
}

/// Block-diagonal semidefinite feasibility problem.
#[derive(Debug, Clone)]
pub struct SdpFeasibility {
    /// Symmetric block sizes.
    pub blocks: Vec<usize>,
    /// Constant term, one dense symmetric matrix per block.
    pub f0: Vec<DMatrix<f64>>,
    /// Coefficient matrices, one per scalar variable.
    pub coeffs: Vec<CoeffMat>,
    /// Required strict margin: certified means lambda_max(F(x)) <= -eps.
    pub target_slack: f64,
}

/// Solver options; defaults follow conventional interior-point practice.
#[derive(Debug, Clone)]
pub struct KernelOptions {
    /// Barrier gap tolerance relative to the problem scale.
    pub gap_tol: f64,
    /// Cap on total Newton steps.
    pub max_newton_steps: usize,
    /// Armijo sufficient-decrease constant for backtracking.
    pub armijo: f64,
    /// Barrier parameter shrink factor between outer iterations.
    pub mu_shrink: f64,
    /// Newton decrement threshold that ends one centering phase.
    pub center_tol: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            gap_tol: 1e-8,
            max_newton_steps: 200,
            armijo: 0.01,
            mu_shrink: 20.0,
            center_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelStatus {
    /// A witness with lambda_max(F(x)) <= -eps was found.
    StrictlyFeasible,
    /// Converged without certifying; best slack stayed above -eps. This
    /// means "not certified", never "proven infeasible".
    NotCertified,
    /// Numerical breakdown or iteration cap; feasibility unknown.
    NumericalFailure,
}

/// Kernel outcome with the audit trail of the run.
#[derive(Debug, Clone)]
pub struct KernelResult {
    pub status: KernelStatus,
    /// Variable vector of the best iterate seen.
    pub x: Vec<f64>,
    /// True maximum eigenvalue of F(x) at that iterate.
    pub slack: f64,
    /// Total Newton steps taken.
    pub iterations: usize,
    /// Barrier parameter after each outer iteration.
    pub mu_trace: Vec<f64>,
    /// Best slack after each outer iteration; non-increasing.
    pub slack_trace: Vec<f64>,
}

impl SdpFeasibility {
    pub fn n_vars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if self.f0.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} constant blocks for {} block sizes",
                self.f0.len(),
                self.blocks.len()
            )));
        }
        for (b, (m, &size)) in self.f0.iter().zip(&self.blocks).enumerate() {
            if m.nrows() != size || m.ncols() != size {
                return Err(Error::DimensionMismatch(format!(
                    "constant block {b} is {}x{}, expected {size}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let asym = (m - m.transpose()).norm();
            if asym > 1e-9 * (1.0 + m.norm()) {
                return Err(Error::DimensionMismatch(format!(
                    "constant block {b} is not symmetric (deviation {asym})"
                )));
            }
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.entries.len() != self.blocks.len() {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {i} covers {} blocks, expected {}",
                    c.entries.len(),
                    self.blocks.len()
                )));
            }
            for (b, entries) in c.entries.iter().enumerate() {
                let size = self.blocks[b] as u32;
                let mut sum = std::collections::HashMap::new();
                for &(r, cc, v) in entries {
                    if r >= size || cc >= size {
                        return Err(Error::DimensionMismatch(format!(
                            "coefficient {i} block {b} entry ({r},{cc}) out of range"
                        )));
                    }
                    *sum.entry((r, cc)).or_insert(0.0) += v;
                }
                for (&(r, cc), &v) in &sum {
                    let vt = sum.get(&(cc, r)).copied().unwrap_or(0.0);
                    if (v - vt).abs() > 1e-9 * (1.0 + v.abs()) {
                        return Err(Error::DimensionMismatch(format!(
                            "coefficient {i} block {b} asymmetric at ({r},{cc})"
                        )));
                    }
                }
            }
        }
        if !(self.target_slack > 0.0) {
            return Err(Error::InvalidParam(format!(
                "target slack {} must be > 0",
                self.target_slack
            )));
        }
        Ok(())
    }

    /// Dense evaluation of F(x) = F0 + sum_i x_i F_i.
    pub fn eval(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out = self.f0.clone();
        for (xi, coeff) in x.iter().zip(&self.coeffs) {
            if *xi == 0.0 {
                continue;
            }
            for (block, entries) in out.iter_mut().zip(&coeff.entries) {
                for &(r, c, v) in entries {
                    block[(r as usize, c as usize)] += xi * v;
                }
            }
        }
        out
    }

    /// True maximum eigenvalue of F(x), the quantity all feasibility
    /// claims are made about.
    pub fn max_eigenvalue(&self, x: &[f64]) -> f64 {
        self.eval(x)
            .iter()
            .map(|b| sym_eig_range(b).1)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Per-variable data preprocessed for fast Hessian assembly.
struct PreppedCoeff {
    /// Per block: sorted unique rows touched by the coefficient.
    rows: Vec<Vec<u32>>,
    /// Per block: (row position in `rows`, col, value).
    entries: Vec<Vec<(u32, u32, f64)>>,
}

struct Workspace {
    blocks: Vec<usize>,
    /// index of active (nonzero-coefficient) variables
    active: Vec<usize>,
    prepped: Vec<PreppedCoeff>,
    /// flat row-major S^{-1} per block
    s_inv: Vec<Vec<f64>>,
    /// scratch: W (rowset x d) and T (d x d) per block, sized to the max
    w: Vec<f64>,
    t: Vec<f64>,
}

fn prep_coeff(c: &CoeffMat) -> PreppedCoeff {
    let mut rows = Vec::with_capacity(c.entries.len());
    let mut entries = Vec::with_capacity(c.entries.len());
    for block in &c.entries {
        let mut rs: Vec<u32> = block.iter().map(|&(r, _, _)| r).collect();
        rs.sort_unstable();
        rs.dedup();
        let pos = |r: u32| rs.binary_search(&r).unwrap() as u32;
        let es: Vec<(u32, u32, f64)> = block.iter().map(|&(r, c, v)| (pos(r), c, v)).collect();
        rows.push(rs);
        entries.push(es);
    }
    PreppedCoeff { rows, entries }
}

/// Solves the phase-1 feasibility problem.
///
/// Strictly feasible iterates satisfy tI - F(x) > 0 throughout; the
/// verdict thresholds are always applied to the reassembled true slack.
pub fn solve(problem: &SdpFeasibility, opts: &KernelOptions) -> Result<KernelResult> {
    problem.validate()?;
    let mut problem = problem.clone();
    for c in &mut problem.coeffs {
        c.compress();
    }
    let eps = problem.target_slack;
    let nu = problem.total_dim() as f64;
    let k_all = problem.n_vars();

    // exclude variables with entirely zero coefficients; their Newton
    // rows would be identically singular
    let active: Vec<usize> = (0..k_all)
        .filter(|&i| !problem.coeffs[i].is_empty())
        .collect();
    let k = active.len();

    let d_max = problem.blocks.iter().copied().max().unwrap_or(0);
    let mut ws = Workspace {
        blocks: problem.blocks.clone(),
        prepped: active
            .iter()
            .map(|&i| prep_coeff(&problem.coeffs[i]))
            .collect(),
        active,
        s_inv: problem.blocks.iter().map(|&d| vec![0.0; d * d]).collect(),
        w: vec![0.0; d_max * d_max],
        t: vec![0.0; d_max * d_max],
    };

    // start at x = 0 with t strictly above lambda_max(F0)
    let mut x = vec![0.0f64; k];
    let slack0 = problem.max_eigenvalue(&vec![0.0; k_all]);
    let scale = slack0.abs().max(1.0);
    let mut t = slack0 + 0.1 * scale;

    let active_idx = ws.active.clone();
    let full_x = move |xa: &[f64]| {
        let mut full = vec![0.0f64; k_all];
        for (j, &i) in active_idx.iter().enumerate() {
            full[i] = xa[j];
        }
        full
    };

    let mut best_x = x.clone();
    let mut best_slack = slack0;
    let mut iterations = 0usize;
    let mut mu_trace = Vec::new();
    let mut slack_trace = Vec::new();

    // S = tI - F(x); factorize to check interiority and get log det
    let chol_logdet = |s_blocks: &[DMatrix<f64>]| -> Option<f64> {
        let mut logdet = 0.0;
        for b in s_blocks {
            let chol = b.clone().cholesky()?;
            for i in 0..b.nrows() {
                let di = chol.l_dirty()[(i, i)];
                if !(di > 0.0) {
                    return None;
                }
                logdet += di.ln();
            }
        }
        Some(2.0 * logdet)
    };
    let s_blocks = |xa: &[f64], t: f64| -> Vec<DMatrix<f64>> {
        let mut f = problem.eval(&full_x(xa));
        for b in &mut f {
            let d = b.nrows();
            for i in 0..d {
                for j in 0..d {
                    b[(i, j)] = -b[(i, j)];
                }
                b[(i, i)] += t;
            }
        }
        f
    };

    let mut s_now = s_blocks(&x, t);
    let mut logdet = match chol_logdet(&s_now) {
        Some(v) => v,
        None => {
            return Err(Error::SolverFailure(
                "initial point not interior; constant term eigenvalue estimate failed".into(),
            ))
        }
    };

    // initial barrier parameter from t-stationarity: 1/mu = tr(S^{-1})
    refresh_s_inv(&mut ws, &s_now);
    let tr_sinv: f64 = (0..ws.blocks.len())
        .map(|b| {
            let d = ws.blocks[b];
            (0..d).map(|i| ws.s_inv[b][i * d + i]).sum::<f64>()
        })
        .sum();
    let mut mu = (1.0 / tr_sinv).max(1e-12);

    let gap_floor = opts.gap_tol * scale;
    let safety = 1.5; // inexact centering slop on the nu*mu gap bound

    loop {
        // one centering phase at the current mu
        let mut centered = false;
        while iterations < opts.max_newton_steps {
            refresh_s_inv(&mut ws, &s_now);
            let (grad, hess) = newton_system(&mut ws, mu);
            let step = match solve_newton(&hess, &grad) {
                Some(s) => s,
                None => {
                    return Ok(KernelResult {
                        status: KernelStatus::NumericalFailure,
                        x: full_x(&best_x),
                        slack: best_slack,
                        iterations,
                        mu_trace,
                        slack_trace,
                    })
                }
            };
            let decrement2: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
            iterations += 1;
            if decrement2 <= opts.center_tol * opts.center_tol {
                centered = true;
                break;
            }

            // backtracking line search on phi = t/mu - log det S
            let phi0 = t / mu - logdet;
            let slope = -decrement2;
            let mut alpha = 1.0f64;
            let mut accepted = false;
            for _ in 0..60 {
                let mut x_try = x.clone();
                for (xi, si) in x_try.iter_mut().zip(&step) {
                    *xi += alpha * si;
                }
                let t_try = t + alpha * step[k];
                let s_try = s_blocks(&x_try, t_try);
                if let Some(ld) = chol_logdet(&s_try) {
                    let phi_try = t_try / mu - ld;
                    if phi_try <= phi0 + opts.armijo * alpha * slope {
                        x = x_try;
                        t = t_try;
                        s_now = s_try;
                        logdet = ld;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // stuck: the direction gives no interior decrease
                centered = true;
                break;
            }
        }

        // incumbent tracking against the reassembled true slack
        let slack_here = problem.max_eigenvalue(&full_x(&x));
        if slack_here < best_slack {
            best_slack = slack_here;
            best_x = x.clone();
        }
        mu_trace.push(mu);
        slack_trace.push(best_slack);

        if best_slack <= -eps {
            return Ok(KernelResult {
                status: KernelStatus::StrictlyFeasible,
                x: full_x(&best_x),
                slack: best_slack,
                iterations,
                mu_trace,
                slack_trace,
            });
        }
        // central-path bound: t - t_min <= nu * mu at an (approximate)
        // center, so a lower bound on the best achievable slack
        let t_lower = t - safety * nu * mu;
        if centered && t_lower > -eps {
            return Ok(KernelResult {
                status: KernelStatus::NotCertified,
                x: full_x(&best_x),
                slack: best_slack,
                iterations,
                mu_trace,
                slack_trace,
            });
        }
        if centered && safety * nu * mu <= gap_floor.min(0.25 * eps) {
            return Ok(KernelResult {
                status: KernelStatus::NotCertified,
                x: full_x(&best_x),
                slack: best_slack,
                iterations,
                mu_trace,
                slack_trace,
            });
        }
        if iterations >= opts.max_newton_steps {
            return Ok(KernelResult {
                status: KernelStatus::NumericalFailure,
                x: full_x(&best_x),
                slack: best_slack,
                iterations,
                mu_trace,
                slack_trace,
            });
        }
        mu /= opts.mu_shrink;
    }
}

fn refresh_s_inv(ws: &mut Workspace, s_now: &[DMatrix<f64>]) {
    for (b, block) in s_now.iter().enumerate() {
        let d = block.nrows();
        let inv = block
            .clone()
            .cholesky()
            .expect("S stays positive definite between factorizations")
            .inverse();
        let dst = &mut ws.s_inv[b];
        for r in 0..d {
            for c in 0..d {
                dst[r * d + c] = inv[(r, c)];
            }
        }
    }
}

/// Builds the gradient and Hessian of phi(x, t) = t/mu - log det(tI - F(x))
/// over the active variables plus t (last index).
fn newton_system(ws: &mut Workspace, mu: f64) -> (Vec<f64>, DMatrix<f64>) {
    let Workspace {
        blocks,
        active,
        prepped,
        s_inv,
        w: w_buf,
        t: t_scratch,
    } = ws;
    let k = active.len();
    let nb = blocks.len();
    let mut grad = vec![0.0f64; k + 1];
    let mut hess = DMatrix::<f64>::zeros(k + 1, k + 1);

    // t components: grad_t = 1/mu - tr(S^{-1}); H_tt = ||S^{-1}||_F^2
    let mut tr_sinv = 0.0;
    let mut fro2 = 0.0;
    for b in 0..nb {
        let d = blocks[b];
        let sb = &s_inv[b];
        for i in 0..d {
            tr_sinv += sb[i * d + i];
        }
        fro2 += sb.iter().map(|v| v * v).sum::<f64>();
    }
    grad[k] = 1.0 / mu - tr_sinv;
    hess[(k, k)] = fro2;

    for i in 0..k {
        // T_i = S^{-1} F_i S^{-1} per block, exploiting the row sparsity
        // of F_i; grad_i = tr(S^{-1} F_i); H_it = -tr(T_i)
        let mut gi = 0.0;
        let mut tr_ti = 0.0;
        for b in 0..nb {
            let d = blocks[b];
            if d == 0 {
                continue;
            }
            let rows = &prepped[i].rows[b];
            let entries = &prepped[i].entries[b];
            if entries.is_empty() {
                continue;
            }
            let sb = &s_inv[b];

            let nr = rows.len();
            let w = &mut w_buf[..nr * d];
            w.fill(0.0);
            // W = F_i S^{-1} restricted to the touched rows
            for &(rp, c, v) in entries {
                let r = rows[rp as usize] as usize;
                gi += v * sb[c as usize * d + r];
                let src = &sb[c as usize * d..c as usize * d + d];
                let dst = &mut w[rp as usize * d..rp as usize * d + d];
                for (di, si) in dst.iter_mut().zip(src) {
                    *di += v * si;
                }
            }
            // T = S^{-1} W over the touched rows
            let t_buf = &mut t_scratch[..d * d];
            t_buf.fill(0.0);
            for (rp, &r) in rows.iter().enumerate() {
                let wrow = &w[rp * d..(rp + 1) * d];
                for p in 0..d {
                    let s_pr = sb[p * d + r as usize];
                    if s_pr == 0.0 {
                        continue;
                    }
                    let dst = &mut t_buf[p * d..(p + 1) * d];
                    for (di, wi) in dst.iter_mut().zip(wrow) {
                        *di += s_pr * wi;
                    }
                }
            }
            for p in 0..d {
                tr_ti += t_buf[p * d + p];
            }
            // H_ij = <T_i, F_j> for j >= i within this block
            for j in i..k {
                let e_j = &prepped[j].entries[b];
                if e_j.is_empty() {
                    continue;
                }
                let rows_j = &prepped[j].rows[b];
                let mut acc = 0.0;
                for &(rp, c, v) in e_j {
                    let r = rows_j[rp as usize] as usize;
                    acc += v * t_buf[r * d + c as usize];
                }
                hess[(i, j)] += acc;
            }
        }
        grad[i] = gi;
        hess[(i, k)] = -tr_ti;
        hess[(k, i)] = -tr_ti;
    }

    // mirror the upper triangle
    for i in 0..k {
        for j in (i + 1)..k {
            hess[(j, i)] = hess[(i, j)];
        }
    }
    (grad, hess)
}

/// Solves H s = -g with progressive ridge regularization; `None` when the
/// system stays numerically unsolvable.
fn solve_newton(hess: &DMatrix<f64>, grad: &[f64]) -> Option<Vec<f64>> {
    let n = grad.len();
    let rhs = nalgebra::DVector::from_fn(n, |i, _| -grad[i]);
    let diag_scale = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut ridge = 0.0f64;
    for attempt in 0..8 {
        let mut h = hess.clone();
        if ridge > 0.0 {
            for i in 0..n {
                h[(i, i)] += ridge;
            }
        }
        if let Some(chol) = h.cholesky() {
            let s = chol.solve(&rhs);
            if s.iter().all(|v| v.is_finite()) {
                return Some(s.iter().copied().collect());
            }
        }
        ridge = if attempt == 0 {
            1e-12 * diag_scale
        } else {
            ridge * 100.0
        };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_problem() -> SdpFeasibility {
        // F(x) = -1 + x
        let mut c = CoeffMat::new(1);
        c.add(0, 0, 0, 1.0);
        SdpFeasibility {
            blocks: vec![1],
            f0: vec![DMatrix::from_element(1, 1, -1.0)],
            coeffs: vec![c],
            target_slack: 1e-6,
        }
    }

    #[test]
    fn scalar_inequality_is_certified() {
        let p = scalar_problem();
        let r = solve(&p, &KernelOptions::default()).unwrap();
        assert_eq!(r.status, KernelStatus::StrictlyFeasible);
        assert!(r.slack <= -1e-6);
        assert!(r.x[0] < 1.0 - 1e-6);
    }

    #[test]
    fn two_by_two_offdiagonal_needs_x_below_minus_one() {
        // F(x) = [[x, 1], [1, x]]: eigenvalues x - 1 and x + 1
        let mut c = CoeffMat::new(1);
        c.add(0, 0, 0, 1.0);
        c.add(0, 1, 1, 1.0);
        let mut f0 = DMatrix::zeros(2, 2);
        f0[(0, 1)] = 1.0;
        f0[(1, 0)] = 1.0;
        let p = SdpFeasibility {
            blocks: vec![2],
            f0: vec![f0],
            coeffs: vec![c],
            target_slack: 1e-6,
        };
        let r = solve(&p, &KernelOptions::default()).unwrap();
        assert_eq!(r.status, KernelStatus::StrictlyFeasible);
        assert!(r.x[0] <= -1.0 - 1e-6 + 1e-12, "x = {}", r.x[0]);
        assert!((r.slack - (r.x[0] + 1.0)).abs() < 1e-9);
    }

    fn random_sym(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
        let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-scale..scale));
        (&m + m.transpose()) * 0.5
    }

    /// Feasible instance: F0 = G - (lambda_max(G) + delta) I is certified
    /// at x = 0 by construction.
    pub(crate) fn feasible_instance(rng: &mut ChaCha8Rng) -> SdpFeasibility {
        let two_blocks = rng.gen_bool(0.5);
        let blocks: Vec<usize> = if two_blocks {
            vec![rng.gen_range(2..5), rng.gen_range(1..4)]
        } else {
            vec![rng.gen_range(2..7)]
        };
        let delta = rng.gen_range(0.05..0.5);
        let f0: Vec<DMatrix<f64>> = blocks
            .iter()
            .map(|&d| {
                let g = random_sym(rng, d, 1.0);
                let lmax = sym_eig_range(&g).1;
                let mut m = g;
                for i in 0..d {
                    m[(i, i)] -= lmax + delta;
                }
                m
            })
            .collect();
        let n_vars = rng.gen_range(1..6);
        let coeffs = (0..n_vars)
            .map(|_| {
                let mut c = CoeffMat::new(blocks.len());
                for (b, &d) in blocks.iter().enumerate() {
                    let m = random_sym(rng, d, 1.0);
                    for r in 0..d {
                        for col in r..d {
                            c.add_sym(b, r, col, m[(r, col)]);
                        }
                    }
                }
                c
            })
            .collect();
        SdpFeasibility {
            blocks,
            f0,
            coeffs,
            target_slack: 1e-6,
        }
    }

    /// Infeasible instance via a trace obstruction: all coefficients are
    /// traceless while tr(F0) = gamma * dim > 0, so lambda_max(F(x)) >=
    /// gamma for every x.
    pub(crate) fn infeasible_instance(rng: &mut ChaCha8Rng) -> SdpFeasibility {
        let blocks = vec![rng.gen_range(2..6usize)];
        let d = blocks[0];
        let gamma = rng.gen_range(0.2..1.0);
        let mut f0 = random_sym(rng, d, 1.0);
        let tr: f64 = (0..d).map(|i| f0[(i, i)]).sum();
        let shift = (gamma * d as f64 - tr) / d as f64;
        for i in 0..d {
            f0[(i, i)] += shift;
        }
        let n_vars = rng.gen_range(1..6);
        let coeffs = (0..n_vars)
            .map(|_| {
                let mut m = random_sym(rng, d, 1.0);
                let tr: f64 = (0..d).map(|i| m[(i, i)]).sum();
                for i in 0..d {
                    m[(i, i)] -= tr / d as f64;
                }
                let mut c = CoeffMat::new(1);
                for r in 0..d {
                    for col in r..d {
                        c.add_sym(0, r, col, m[(r, col)]);
                    }
                }
                c
            })
            .collect();
        SdpFeasibility {
            blocks,
            f0: vec![f0],
            coeffs,
            target_slack: 1e-6,
        }
    }

    #[test]
    fn constructed_instances_are_classified_correctly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let opts = KernelOptions::default();
        for i in 0..40 {
            let p = feasible_instance(&mut rng);
            let r = solve(&p, &opts).unwrap();
            assert_eq!(
                r.status,
                KernelStatus::StrictlyFeasible,
                "feasible instance {i} misclassified (slack {})",
                r.slack
            );
        }
        for i in 0..40 {
            let p = infeasible_instance(&mut rng);
            let r = solve(&p, &opts).unwrap();
            assert_eq!(
                r.status,
                KernelStatus::NotCertified,
                "infeasible instance {i} misclassified (slack {})",
                r.slack
            );
        }
    }

    #[test]
    fn reported_slack_matches_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = feasible_instance(&mut rng);
            let r = solve(&p, &KernelOptions::default()).unwrap();
            let recon = p.max_eigenvalue(&r.x);
            assert!(
                (recon - r.slack).abs() <= 1e-9 * (1.0 + recon.abs()),
                "slack {} vs reconstruction {}",
                r.slack,
                recon
            );
        }
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p = feasible_instance(&mut rng);
        let r1 = solve(&p, &KernelOptions::default()).unwrap();
        let r2 = solve(&p, &KernelOptions::default()).unwrap();
        assert_eq!(r1.iterations, r2.iterations);
        assert_eq!(r1.slack.to_bits(), r2.slack.to_bits());
        for (a, b) in r1.x.iter().zip(&r2.x) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn slack_trace_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let p = infeasible_instance(&mut rng);
            let r = solve(&p, &KernelOptions::default()).unwrap();
            for w in r.slack_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-15);
            }
        }
    }

    #[test]
    fn zero_coefficient_variables_are_tolerated() {
        let mut p = scalar_problem();
        p.coeffs.push(CoeffMat::new(1)); // dead variable
        let r = solve(&p, &KernelOptions::default()).unwrap();
        assert_eq!(r.status, KernelStatus::StrictlyFeasible);
        assert_eq!(r.x[1], 0.0);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let mut c = CoeffMat::new(1);
        c.add(0, 0, 1, 1.0); // missing mirror entry
        let p = SdpFeasibility {
            blocks: vec![2],
            f0: vec![DMatrix::zeros(2, 2)],
            coeffs: vec![c],
            target_slack: 1e-6,
        };
        assert!(matches!(
            solve(&p, &KernelOptions::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
