//! Assembly of the n-PV delayed closed-loop model
//!   x'(t) = A x'(t) + A_d x'(t - tau) + F s'(t),   y'(t) = C x'(t).
//!
//! State ordering: all subsystem blocks first, then all controller
//! scalars. Only the controller-output path into each subsystem is
//! delayed, so A_d is nonzero only in the subsystem rows; the controller
//! integrators see the undelayed voltage error and live in A.
//! Disturbance channels are ordered (sigma_1, vref_1, sigma_2, vref_2, ...).

use nalgebra::{DMatrix, DVector};

use crate::powernet::SensitivityMatrix;
use crate::pvplant::{Controller, Subsystem, SUBSYSTEM_STATES};
use crate::{Error, Result};

/// Delayed linear time-invariant model with state labels.
#[derive(Debug, Clone)]
pub struct DelayedLti {
    pub a: DMatrix<f64>,
    pub a_d: DMatrix<f64>,
    /// Disturbance map, one sigma and one vref column per PV.
    pub f: DMatrix<f64>,
    /// Output map: one d-axis current row per PV followed by one zero row
    /// per controller block.
    pub c: DMatrix<f64>,
    /// Per-state names, subsystem states then controller states; the PV
    /// index follows the order of `pv_buses` in the network description.
    pub labels: Vec<String>,
}

impl DelayedLti {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_pv(&self) -> usize {
        self.a.nrows() / (SUBSYSTEM_STATES + 1)
    }

    /// Index of the sigma disturbance channel of PV `i`.
    pub fn sigma_channel(i: usize) -> usize {
        2 * i
    }

    /// Index of the vref disturbance channel of PV `i`.
    pub fn vref_channel(i: usize) -> usize {
        2 * i + 1
    }

    /// Index of the output row carrying i_d of PV `i`.
    pub fn output_row(i: usize) -> usize {
        i
    }
}

/// Assembles the delayed closed-loop model from per-PV subsystems,
/// grid-voltage controllers and the current-to-voltage sensitivities.
///
/// The sensitivity entries must be in units consistent with the
/// subsystem output and the controller voltage-error input (volts of bus
/// voltage per ampere of d-axis current when the subsystems are in SI and
/// the controller acts on per-unit voltage errors; see
/// [`SensitivityMatrix::per_ampere`]).
pub fn assemble(
    subsystems: &[Subsystem],
    controllers: &[Controller],
    sens: &SensitivityMatrix,
) -> Result<DelayedLti> {
    let n = subsystems.len();
    if n == 0 {
        return Err(Error::DimensionMismatch("no subsystems".into()));
    }
    if controllers.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} subsystems but {} controllers",
            n,
            controllers.len()
        )));
    }
    if sens.z.nrows() != n || sens.z.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "sensitivity matrix is {}x{}, expected {n}x{n}",
            sens.z.nrows(),
            sens.z.ncols()
        )));
    }
    let ns = SUBSYSTEM_STATES;
    for (i, s) in subsystems.iter().enumerate() {
        if s.a.nrows() != ns || s.a.ncols() != ns {
            return Err(Error::DimensionMismatch(format!(
                "subsystem {i} has a {}x{} state matrix",
                s.a.nrows(),
                s.a.ncols()
            )));
        }
    }

    let m = n * ns + n;
    let mut a = DMatrix::zeros(m, m);
    let mut a_d = DMatrix::zeros(m, m);
    let mut f = DMatrix::zeros(m, 2 * n);
    let mut c = DMatrix::zeros(2 * n, m);

    let sub_row = |i: usize| i * ns;
    let ctrl_row = |i: usize| n * ns + i;

    for i in 0..n {
        let si = &subsystems[i];
        let fi = &controllers[i];

        // subsystem block diagonal of A
        a.view_mut((sub_row(i), sub_row(i)), (ns, ns)).copy_from(&si.a);

        // controller dynamics: z_i' = a_f z_i + b_f (vref_i - V_i),
        // V_i = sum_k Z_ik y_k + V_i0; the constant part is carried by the
        // disturbance convention, the feedback part lands in A.
        a[(ctrl_row(i), ctrl_row(i))] = fi.a_f;
        for k in 0..n {
            let coupling = -(fi.b_f * sens.z[(i, k)]);
            let row = &subsystems[k].c * coupling;
            a.view_mut((ctrl_row(i), sub_row(k)), (1, ns)).copy_from(&row);
        }

        // delayed controller output into the subsystem input:
        // u_i(t-tau) = c_f z_i(t-tau) + d_f (vref_i - V_i)(t-tau)
        for k in 0..n {
            let gain = -(fi.d_f * sens.z[(i, k)]);
            let block = &si.b * &subsystems[k].c * gain;
            a_d.view_mut((sub_row(i), sub_row(k)), (ns, ns)).copy_from(&block);
        }
        a_d.view_mut((sub_row(i), ctrl_row(i)), (ns, 1))
            .copy_from(&(&si.b * fi.c_f));

        // disturbances: sigma_i drives the subsystem through H_i; vref_i
        // drives the subsystem feedthrough B_i d_f and the controller b_f
        f.view_mut((sub_row(i), DelayedLti::sigma_channel(i)), (ns, 1))
            .copy_from(&si.h);
        f.view_mut((sub_row(i), DelayedLti::vref_channel(i)), (ns, 1))
            .copy_from(&(&si.b * fi.d_f));
        f[(ctrl_row(i), DelayedLti::vref_channel(i))] = fi.b_f;

        // outputs: i_d of each PV, then a zero row per controller block
        c.view_mut((i, sub_row(i)), (1, ns)).copy_from(&si.c);
    }

    let mut labels = Vec::with_capacity(m);
    for i in 0..n {
        for k in 1..=ns {
            labels.push(format!("pv{}_x{}", i + 1, k));
        }
    }
    for i in 0..n {
        labels.push(format!("ctrl{}_z", i + 1));
    }

    Ok(DelayedLti { a, a_d, f, c, labels })
}

/// Equilibrium state for a constant disturbance vector:
/// x_ss = -(A + A_d)^{-1} F sigma.
pub fn steady_state(model: &DelayedLti, sigma: &DVector<f64>) -> Result<DVector<f64>> {
    if sigma.len() != model.f.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "disturbance vector has {} entries, model has {} channels",
            sigma.len(),
            model.f.ncols()
        )));
    }
    let total = &model.a + &model.a_d;
    let rhs = -(&model.f * sigma);
    total
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularEquilibrium("A + A_d is singular".into()))
}
