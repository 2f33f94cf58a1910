//! Per-PV linear models: the seven-state subsystem (panel, dc link,
//! inverter and its local controllers) and the scalar grid-voltage
//! controller.
//!
//! State chain of the subsystem, all quantities in SI units:
//!   x1  PI1 integrator on the PV-current error e1 = i_pv - i_pv_ref
//!   x2  PI2 integrator on the dc-voltage error e2 = V_dc - V_dcref
//!   x3  first-order response of the d-axis current reference
//!   x4  PI3 integrator on the current error e3 = x3 - x5
//!   x5  d-axis output current i_d (the subsystem output)
//!   x6  inverter dc input current
//!   x7  dc-link voltage V_dc = V_pv
//! with i_pv = (V_oc - x7)/R_pv, so the V_oc deviation enters only
//! through that path and the reference input only through PI1.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Physical and controller constants of one PV system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PvParams {
    /// PI proportional gains [K_P1, K_P2, K_P3, K_P4].
    pub kp: [f64; 4],
    /// PI integral gains [K_I1, K_I2, K_I3, K_I4] in 1/s.
    pub ki: [f64; 4],
    /// Open-circuit voltage of the panel string (V).
    pub v_oc: f64,
    /// Voltage at the maximum power point (V).
    pub v_mpp: f64,
    /// Current at the maximum power point (A).
    pub i_mpp: f64,
    /// Nominal dc reference voltage (V).
    pub v_dc_ref_nom: f64,
    /// d-axis grid voltage (V, peak phase).
    pub e_d: f64,
    /// Time constant of the i_d reference first-order response (s).
    pub tau_ref: f64,
    /// Inverter input-current time constant (s).
    pub tau2: f64,
    /// Current-loop lag constant (s).
    pub tau_cur: f64,
    /// dc-link capacitance (F).
    pub c_dc: f64,
    /// Voltage-error-to-current conversion gain (A per p.u. volt).
    pub k4: f64,
}

impl PvParams {
    /// Documented default parameter set for a ~300 kW plant on a 0.4 kV
    /// residential feeder. These values are engineering assumptions of
    /// this project; none are published data.
    pub fn default_lv() -> Self {
        PvParams {
            kp: [0.15, 10.0, 5.0, 0.05],
            ki: [2.0, 100.0, 200.0, 1.0],
            v_oc: 820.0,
            v_mpp: 700.0,
            i_mpp: 410.0,
            v_dc_ref_nom: 700.0,
            e_d: 326.6,
            tau_ref: 0.02,
            tau2: 0.02,
            tau_cur: 0.005,
            c_dc: 0.01,
            k4: 1.0e5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_oc > self.v_mpp && self.v_mpp > 0.0) {
            return Err(Error::InvalidParam(format!(
                "require v_oc > v_mpp > 0, got v_oc = {}, v_mpp = {}",
                self.v_oc, self.v_mpp
            )));
        }
        if self.i_mpp <= 0.0 {
            return Err(Error::InvalidParam(format!("i_mpp = {} <= 0", self.i_mpp)));
        }
        for (name, v) in [
            ("tau_ref", self.tau_ref),
            ("tau2", self.tau2),
            ("tau_cur", self.tau_cur),
            ("c_dc", self.c_dc),
            ("v_dc_ref_nom", self.v_dc_ref_nom),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidParam(format!("{name} = {v} must be > 0")));
            }
        }
        for g in self.kp.iter().chain(self.ki.iter()) {
            if *g < 0.0 {
                return Err(Error::InvalidParam(format!("negative gain {g}")));
            }
        }
        if self.kp[3] == 0.0 && self.ki[3] == 0.0 {
            return Err(Error::InvalidParam(
                "K_P4 and K_I4 must not both be zero".into(),
            ));
        }
        if self.k4 < 0.0 {
            return Err(Error::InvalidParam(format!("k4 = {} < 0", self.k4)));
        }
        if self.e_d < 0.0 {
            return Err(Error::InvalidParam(format!("e_d = {} < 0", self.e_d)));
        }
        Ok(())
    }
}

/// Linear realization of one PV subsystem: dx = a x + b u + h sigma,
/// y = c x, with u the (possibly delayed) current reference and sigma the
/// open-circuit voltage deviation.
#[derive(Debug, Clone)]
pub struct Subsystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub h: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

/// Scalar grid-voltage controller: dz = a_f z + b_f w, u = c_f z + d_f w
/// with w the voltage error.
#[derive(Debug, Clone, Copy)]
pub struct Controller {
    pub a_f: f64,
    pub b_f: f64,
    pub c_f: f64,
    pub d_f: f64,
}

/// Number of subsystem states.
pub const SUBSYSTEM_STATES: usize = 7;

/// Equivalent panel resistance from the linearized V-I segment between
/// the maximum power point and open circuit.
pub fn r_pv(params: &PvParams) -> Result<f64> {
    if params.i_mpp <= 0.0 || params.v_oc <= params.v_mpp {
        return Err(Error::DegenerateCurve(format!(
            "v_oc = {}, v_mpp = {}, i_mpp = {}",
            params.v_oc, params.v_mpp, params.i_mpp
        )));
    }
    Ok((params.v_oc - params.v_mpp) / params.i_mpp)
}

/// Inverter output-to-input current ratio from lossless power balance.
pub fn k2(params: &PvParams) -> Result<f64> {
    if params.v_dc_ref_nom <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "v_dc_ref_nom = {} <= 0",
            params.v_dc_ref_nom
        )));
    }
    Ok(3.0 * params.e_d / (2.0 * params.v_dc_ref_nom))
}

/// Builds the canonical seven-state realization of the PV subsystem.
pub fn build_subsystem(params: &PvParams) -> Result<Subsystem> {
    params.validate()?;
    let rp = r_pv(params)?;
    let k2v = k2(params)?;
    let [kp1, kp2, kp3, _] = params.kp;
    let [ki1, ki2, ki3, _] = params.ki;
    let (tr, t2, tc, c) = (params.tau_ref, params.tau2, params.tau_cur, params.c_dc);

    let n = SUBSYSTEM_STATES;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut h = DVector::zeros(n);

    // x1' = e1 = i_pv - u, i_pv = (V_oc - x7)/R_pv
    a[(0, 6)] = -1.0 / rp;
    b[0] = -1.0;
    h[0] = 1.0 / rp;

    // V_dcref = K_P1 e1 + K_I1 x1
    // x2' = e2 = x7 - V_dcref
    a[(1, 0)] = -ki1;
    a[(1, 6)] = 1.0 + kp1 / rp;
    b[1] = kp1;
    h[1] = -kp1 / rp;

    // i_dref_raw = K_P2 e2 + K_I2 x2;  x3' = (i_dref_raw - x3)/tau_ref
    a[(2, 0)] = -kp2 * ki1 / tr;
    a[(2, 1)] = ki2 / tr;
    a[(2, 2)] = -1.0 / tr;
    a[(2, 6)] = kp2 * (1.0 + kp1 / rp) / tr;
    b[2] = kp2 * kp1 / tr;
    h[2] = -kp2 * kp1 / (rp * tr);

    // x4' = e3 = x3 - x5
    a[(3, 2)] = 1.0;
    a[(3, 4)] = -1.0;

    // x5' = (K_P3 e3 + K_I3 x4 - x5)/tau_cur
    a[(4, 2)] = kp3 / tc;
    a[(4, 3)] = ki3 / tc;
    a[(4, 4)] = -(kp3 + 1.0) / tc;

    // x6' = (K2 x5 - x6)/tau2
    a[(5, 4)] = k2v / t2;
    a[(5, 5)] = -1.0 / t2;

    // x7' = (i_pv - x6)/C_dc
    a[(6, 5)] = -1.0 / c;
    a[(6, 6)] = -1.0 / (rp * c);
    h[6] = 1.0 / (rp * c);

    let mut cvec = RowDVector::zeros(n);
    cvec[4] = 1.0;

    Ok(Subsystem {
        a,
        b,
        h,
        c: cvec,
        d: 0.0,
    })
}

/// Builds the scalar grid-voltage controller realization.
pub fn build_controller(params: &PvParams) -> Result<Controller> {
    params.validate()?;
    Ok(Controller {
        a_f: 0.0,
        b_f: params.k4 * params.ki[3],
        c_f: 1.0,
        d_f: params.k4 * params.kp[3],
    })
}
