//! Feeder impedance model: bus impedance matrix, PV voltage
//! sensitivities and base voltages.
//!
//! The network is reduced to the affine relation V_j = sum_i Z_ji i_di + V_j0
//! over the PV buses: injected d-axis currents map to bus voltages through
//! the impedance matrix of the passive feeder, while the slack voltage and
//! constant-current loads are folded into the base voltage V_j0.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::numerics::{C64, CMatrix};
use crate::{Error, Result};

pub type BusId = usize;

/// One series branch of the feeder, impedances in per unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    pub resistance: f64,
    pub reactance: f64,
}

/// Constant-power load converted to a constant current at nominal voltage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Load {
    pub bus: BusId,
    pub active: f64,
    pub reactive: f64,
}

/// Static description of the feeder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub buses: Vec<BusId>,
    pub slack: BusId,
    #[serde(default = "default_slack_voltage")]
    pub slack_voltage: f64,
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub loads: Vec<Load>,
    /// Buses hosting PV systems, in model order.
    pub pv_buses: Vec<BusId>,
}

fn default_slack_voltage() -> f64 {
    1.0
}

/// Scalarization of the complex impedance entries used by the real-valued
/// closed-loop model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensitivityMode {
    /// Real part of Z_ij: in-phase voltage response to d-axis current.
    RealPart,
    /// Magnitude of Z_ij.
    Magnitude,
}

/// Real current-to-voltage sensitivities over the PV buses plus the base
/// voltages with zero PV injection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityMatrix {
    /// n x n, per-unit volts per unit of injected d-axis current, ordered
    /// by `pv_buses`.
    pub z: DMatrix<f64>,
    /// Base voltage magnitudes V_j0 in per unit.
    pub v0: DVector<f64>,
}

/// Bus impedance matrix over the non-slack buses, together with the
/// zero-injection complex bus voltages.
#[derive(Debug, Clone)]
pub struct Zbus {
    /// Non-slack bus ids in row/column order.
    pub order: Vec<BusId>,
    /// Z = Y_rr^{-1} with the slack row/column eliminated.
    pub z: CMatrix,
    /// Complex bus voltages with all PV currents at zero.
    pub v0: DVector<C64>,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(Error::InvalidNetwork("no buses".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for &b in &self.buses {
            if !seen.insert(b) {
                return Err(Error::InvalidNetwork(format!("duplicate bus id {b}")));
            }
        }
        if !seen.contains(&self.slack) {
            return Err(Error::InvalidNetwork(format!(
                "slack bus {} not in bus list",
                self.slack
            )));
        }
        if !(self.slack_voltage > 0.0 && self.slack_voltage < 2.0) {
            return Err(Error::InvalidNetwork(format!(
                "slack voltage {} outside (0, 2) p.u.",
                self.slack_voltage
            )));
        }
        for br in &self.branches {
            if !seen.contains(&br.from) || !seen.contains(&br.to) {
                return Err(Error::InvalidNetwork(format!(
                    "branch {}-{} references unknown bus",
                    br.from, br.to
                )));
            }
            if br.from == br.to {
                return Err(Error::InvalidNetwork(format!(
                    "branch {}-{} is a self-loop",
                    br.from, br.to
                )));
            }
            if br.resistance < 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "branch {}-{} has negative resistance",
                    br.from, br.to
                )));
            }
            if br.resistance == 0.0 && br.reactance == 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "branch {}-{} has zero impedance",
                    br.from, br.to
                )));
            }
        }
        for ld in &self.loads {
            if !seen.contains(&ld.bus) {
                return Err(Error::InvalidNetwork(format!(
                    "load references unknown bus {}",
                    ld.bus
                )));
            }
        }
        if self.pv_buses.is_empty() {
            return Err(Error::InvalidNetwork("no PV buses".into()));
        }
        let mut pv_seen = std::collections::HashSet::new();
        for &b in &self.pv_buses {
            if b == self.slack {
                return Err(Error::InvalidNetwork(format!("PV at slack bus {b}")));
            }
            if !seen.contains(&b) {
                return Err(Error::InvalidNetwork(format!("PV at unknown bus {b}")));
            }
            if !pv_seen.insert(b) {
                return Err(Error::InvalidNetwork(format!("duplicate PV bus {b}")));
            }
        }
        Ok(())
    }

    /// Non-slack buses in declaration order.
    fn reduced_order(&self) -> Vec<BusId> {
        self.buses
            .iter()
            .copied()
            .filter(|&b| b != self.slack)
            .collect()
    }

    fn is_connected(&self) -> bool {
        use std::collections::{HashMap, HashSet, VecDeque};
        let mut adj: HashMap<BusId, Vec<BusId>> = HashMap::new();
        for br in &self.branches {
            adj.entry(br.from).or_default().push(br.to);
            adj.entry(br.to).or_default().push(br.from);
        }
        let mut visited = HashSet::new();
        let mut queue = VecDeque::from([self.slack]);
        visited.insert(self.slack);
        while let Some(b) = queue.pop_front() {
            if let Some(next) = adj.get(&b) {
                for &t in next {
                    if visited.insert(t) {
                        queue.push_back(t);
                    }
                }
            }
        }
        self.buses.iter().all(|b| visited.contains(b))
    }
}

/// Builds the bus impedance matrix of the feeder with the slack bus
/// eliminated, plus the zero-injection bus voltages.
///
/// Loads enter as constant currents computed at nominal voltage, so the
/// current-to-voltage relation stays exactly affine.
pub fn build_zbus(spec: &NetworkSpec) -> Result<Zbus> {
    spec.validate()?;
    if !spec.is_connected() {
        return Err(Error::SingularNetwork(
            "feeder graph is not connected to the slack bus".into(),
        ));
    }
    let order = spec.reduced_order();
    let index: std::collections::HashMap<BusId, usize> =
        order.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let n = order.len();

    // reduced admittance and the slack coupling column
    let mut y_rr = CMatrix::zeros(n, n);
    let mut y_rs = DVector::<C64>::zeros(n);
    for br in &spec.branches {
        let y = C64::new(1.0, 0.0) / C64::new(br.resistance, br.reactance);
        match (index.get(&br.from), index.get(&br.to)) {
            (Some(&i), Some(&j)) => {
                y_rr[(i, i)] += y;
                y_rr[(j, j)] += y;
                y_rr[(i, j)] -= y;
                y_rr[(j, i)] -= y;
            }
            (Some(&i), None) => {
                y_rr[(i, i)] += y;
                y_rs[i] -= y;
            }
            (None, Some(&j)) => {
                y_rr[(j, j)] += y;
                y_rs[j] -= y;
            }
            (None, None) => {}
        }
    }

    let z = y_rr.clone().lu().try_inverse().ok_or_else(|| {
        Error::SingularNetwork("admittance matrix is numerically singular".into())
    })?;

    // constant load currents at nominal voltage; consumption draws p - jq
    let mut i_load = DVector::<C64>::zeros(n);
    for ld in &spec.loads {
        if let Some(&i) = index.get(&ld.bus) {
            i_load[i] -= C64::new(ld.active, -ld.reactive);
        }
    }
    let v_s = C64::new(spec.slack_voltage, 0.0);
    let rhs = i_load - &y_rs * v_s;
    let v0 = &z * rhs;

    Ok(Zbus { order, z, v0 })
}

/// Scalarizes the PV-bus rows/columns of the impedance matrix and the
/// base voltage magnitudes into the real sensitivity data used by the
/// closed-loop model.
pub fn sensitivity(spec: &NetworkSpec, zbus: &Zbus, mode: SensitivityMode) -> Result<SensitivityMatrix> {
    let n = spec.pv_buses.len();
    let mut pos = Vec::with_capacity(n);
    for &b in &spec.pv_buses {
        let p = zbus
            .order
            .iter()
            .position(|&o| o == b)
            .ok_or_else(|| Error::InvalidNetwork(format!("PV bus {b} not in impedance matrix")))?;
        pos.push(p);
    }
    let z = DMatrix::from_fn(n, n, |i, j| {
        let v = zbus.z[(pos[i], pos[j])];
        match mode {
            SensitivityMode::RealPart => v.re,
            SensitivityMode::Magnitude => v.norm(),
        }
    });
    let v0 = DVector::from_fn(n, |j, _| zbus.v0[pos[j]].norm());

    for i in 0..n {
        if z[(i, i)] <= 0.0 {
            return Err(Error::InvalidNetwork(format!(
                "non-positive driving-point sensitivity at PV bus {}",
                spec.pv_buses[i]
            )));
        }
        for j in 0..n {
            if (z[(i, j)] - z[(j, i)]).abs() > 1e-9 {
                return Err(Error::InvalidNetwork(
                    "sensitivity matrix asymmetric beyond tolerance".into(),
                ));
            }
        }
        if !(v0[i] > 0.0 && v0[i] < 2.0) {
            return Err(Error::InvalidNetwork(format!(
                "base voltage {} p.u. at PV bus {} outside (0, 2)",
                v0[i], spec.pv_buses[i]
            )));
        }
    }
    Ok(SensitivityMatrix { z, v0 })
}

impl SensitivityMatrix {
    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    /// Rescales the sensitivities by 1/i_base so that they map amperes of
    /// d-axis current to per-unit volts. Used at the boundary between the
    /// per-unit network and the SI subsystem models.
    pub fn per_ampere(&self, i_base: f64) -> SensitivityMatrix {
        SensitivityMatrix {
            z: &self.z / i_base,
            v0: self.v0.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn branch(from: BusId, to: BusId, r: f64, x: f64) -> Branch {
        Branch {
            from,
            to,
            resistance: r,
            reactance: x,
        }
    }

    /// Seven-node residential feeder: radial chain 0..=6 plus a long line
    /// from bus 1 to the remote PV at bus 7. Line data are assumptions of
    /// this project, not published values.
    pub(crate) fn two_pv_feeder() -> NetworkSpec {
        NetworkSpec {
            buses: (0..=7).collect(),
            slack: 0,
            slack_voltage: 1.0,
            branches: vec![
                branch(0, 1, 0.010, 0.004),
                branch(1, 2, 0.015, 0.006),
                branch(2, 3, 0.015, 0.006),
                branch(3, 4, 0.015, 0.006),
                branch(4, 5, 0.015, 0.006),
                branch(5, 6, 0.015, 0.006),
                branch(1, 7, 0.120, 0.048),
            ],
            loads: vec![
                Load { bus: 1, active: 0.060, reactive: 0.020 },
                Load { bus: 2, active: 0.055, reactive: 0.018 },
                Load { bus: 3, active: 0.050, reactive: 0.016 },
                Load { bus: 4, active: 0.045, reactive: 0.015 },
                Load { bus: 5, active: 0.050, reactive: 0.016 },
                Load { bus: 6, active: 0.040, reactive: 0.013 },
            ],
            pv_buses: vec![6, 7],
        }
    }

    /// Independent admittance assembly used as the inversion oracle:
    /// builds the full (slack included) matrix entry by entry, then takes
    /// the reduced block.
    fn assemble_reduced_y_oracle(spec: &NetworkSpec) -> CMatrix {
        let all = &spec.buses;
        let full_idx: std::collections::HashMap<BusId, usize> =
            all.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let nf = all.len();
        let mut y = CMatrix::zeros(nf, nf);
        for br in &spec.branches {
            let zb = C64::new(br.resistance, br.reactance);
            let yb = C64::new(1.0, 0.0) / zb;
            let (i, j) = (full_idx[&br.from], full_idx[&br.to]);
            y[(i, i)] += yb;
            y[(j, j)] += yb;
            y[(i, j)] -= yb;
            y[(j, i)] -= yb;
        }
        let keep: Vec<usize> = all
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != spec.slack)
            .map(|(i, _)| i)
            .collect();
        CMatrix::from_fn(keep.len(), keep.len(), |i, j| y[(keep[i], keep[j])])
    }

    #[test]
    fn single_branch_zbus_equals_branch_impedance() {
        let spec = NetworkSpec {
            buses: vec![0, 1],
            slack: 0,
            slack_voltage: 1.0,
            branches: vec![branch(0, 1, 0.1, 0.2)],
            loads: vec![],
            pv_buses: vec![1],
        };
        let zbus = build_zbus(&spec).unwrap();
        assert_eq!(zbus.order, vec![1]);
        assert!((zbus.z[(0, 0)] - C64::new(0.1, 0.2)).norm() < 1e-14);
        // no loads: base voltage equals the slack voltage
        assert!((zbus.v0[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn radial_chain_accumulates_series_impedance() {
        let spec = NetworkSpec {
            buses: vec![0, 1, 2],
            slack: 0,
            slack_voltage: 1.0,
            branches: vec![branch(0, 1, 0.1, 0.1), branch(1, 2, 0.1, 0.1)],
            loads: vec![],
            pv_buses: vec![2],
        };
        let zbus = build_zbus(&spec).unwrap();
        let i2 = zbus.order.iter().position(|&b| b == 2).unwrap();
        let i1 = zbus.order.iter().position(|&b| b == 1).unwrap();
        assert!((zbus.z[(i2, i2)] - C64::new(0.2, 0.2)).norm() < 1e-13);
        assert!((zbus.z[(i1, i2)] - C64::new(0.1, 0.1)).norm() < 1e-13);
    }

    #[test]
    fn feeder_zbus_matches_independent_inversion() {
        let spec = two_pv_feeder();
        let zbus = build_zbus(&spec).unwrap();
        let y_oracle = assemble_reduced_y_oracle(&spec);
        let z_oracle = y_oracle.lu().try_inverse().unwrap();
        let dev = (&zbus.z - &z_oracle)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-10, "max deviation {dev}");
    }

    #[test]
    fn zbus_times_ybus_is_identity() {
        let spec = two_pv_feeder();
        let zbus = build_zbus(&spec).unwrap();
        let y = assemble_reduced_y_oracle(&spec);
        let prod = &zbus.z * &y;
        let n = prod.nrows();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - C64::new(want, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn disconnected_island_is_rejected() {
        let spec = NetworkSpec {
            buses: vec![0, 1, 2, 3],
            slack: 0,
            slack_voltage: 1.0,
            branches: vec![branch(0, 1, 0.1, 0.1), branch(2, 3, 0.1, 0.1)],
            loads: vec![],
            pv_buses: vec![1],
        };
        match build_zbus(&spec) {
            Err(Error::SingularNetwork(_)) => {}
            other => panic!("expected SingularNetwork, got {other:?}"),
        }
    }

    #[test]
    fn zero_injection_voltage_is_v0() {
        // Eq-7 form: with all PV currents zero the bus voltage is v0 by
        // construction; check v0 is sensible for the loaded feeder.
        let spec = two_pv_feeder();
        let zbus = build_zbus(&spec).unwrap();
        let sens = sensitivity(&spec, &zbus, SensitivityMode::RealPart).unwrap();
        for j in 0..sens.n() {
            assert!(sens.v0[j] > 0.9 && sens.v0[j] < 1.0, "v0 = {}", sens.v0[j]);
        }
    }

    #[test]
    fn single_pv_real_part_scalarization() {
        let spec = NetworkSpec {
            buses: vec![0, 1],
            slack: 0,
            slack_voltage: 1.0,
            branches: vec![branch(0, 1, 0.1, 0.2)],
            loads: vec![],
            pv_buses: vec![1],
        };
        let zbus = build_zbus(&spec).unwrap();
        let sens = sensitivity(&spec, &zbus, SensitivityMode::RealPart).unwrap();
        assert!((sens.z[(0, 0)] - 0.1).abs() < 1e-14);
        let mag = sensitivity(&spec, &zbus, SensitivityMode::Magnitude).unwrap();
        assert!((mag.z[(0, 0)] - (0.05f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sensitivity_matches_finite_difference_power_flow() {
        // Independent oracle: perturb the injected d-axis current at each
        // PV bus in a full linear power-flow solve (own assembly), current
        // aligned with the base voltage phasor, and difference the voltage
        // magnitudes.
        let spec = two_pv_feeder();
        let zbus = build_zbus(&spec).unwrap();
        let sens = sensitivity(&spec, &zbus, SensitivityMode::RealPart).unwrap();

        let y = assemble_reduced_y_oracle(&spec);
        let order: Vec<BusId> = spec.buses.iter().copied().filter(|&b| b != 0).collect();
        let idx: std::collections::HashMap<BusId, usize> =
            order.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        // slack coupling for the oracle: branches touching the slack
        let mut rhs0 = DVector::<C64>::zeros(order.len());
        for br in &spec.branches {
            let yb = C64::new(1.0, 0.0) / C64::new(br.resistance, br.reactance);
            if br.from == spec.slack {
                rhs0[idx[&br.to]] += yb * C64::new(spec.slack_voltage, 0.0);
            } else if br.to == spec.slack {
                rhs0[idx[&br.from]] += yb * C64::new(spec.slack_voltage, 0.0);
            }
        }
        for ld in &spec.loads {
            rhs0[idx[&ld.bus]] -= C64::new(ld.active, -ld.reactive);
        }
        let lu = y.lu();
        let v_base = lu.solve(&rhs0).unwrap();

        let delta = 1e-6;
        for (j, &bj) in spec.pv_buses.iter().enumerate() {
            let angle = v_base[idx[&bj]].arg();
            let mut rhs = rhs0.clone();
            rhs[idx[&bj]] += C64::from_polar(delta, angle);
            let v_pert = lu.solve(&rhs).unwrap();
            for (i, &bi) in spec.pv_buses.iter().enumerate() {
                let fd = (v_pert[idx[&bi]].norm() - v_base[idx[&bi]].norm()) / delta;
                let rel = (sens.z[(i, j)] - fd).abs() / fd.abs();
                assert!(
                    rel < 0.05,
                    "z[{i}][{j}] = {} vs fd {} (rel {rel})",
                    sens.z[(i, j)],
                    fd
                );
            }
        }
    }

    #[test]
    fn superposition_of_injections_is_exact() {
        let spec = two_pv_feeder();
        let zbus = build_zbus(&spec).unwrap();
        let sens = sensitivity(&spec, &zbus, SensitivityMode::RealPart).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let a = DVector::from_fn(sens.n(), |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(sens.n(), |_, _| rng.gen_range(-1.0..1.0));
            let both = &sens.z * (&a + &b);
            let split = &sens.z * &a + &sens.z * &b;
            assert!((both - split).norm() < 1e-12);
        }
    }

    #[test]
    fn radial_additivity_on_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(2..9usize);
            let mut branches = Vec::new();
            let mut path_z: Vec<C64> = vec![C64::new(0.0, 0.0); n + 1];
            for b in 1..=n {
                let parent = if b == 1 { 0 } else { rng.gen_range(0..b) };
                let r = rng.gen_range(0.01..0.2);
                let x = rng.gen_range(0.005..0.1);
                branches.push(branch(parent, b, r, x));
                path_z[b] = path_z[parent] + C64::new(r, x);
            }
            let spec = NetworkSpec {
                buses: (0..=n).collect(),
                slack: 0,
                slack_voltage: 1.0,
                branches,
                loads: vec![],
                pv_buses: vec![n],
            };
            let zbus = build_zbus(&spec).unwrap();
            for (i, &b) in zbus.order.iter().enumerate() {
                assert!(
                    (zbus.z[(i, i)] - path_z[b]).norm() < 1e-11,
                    "driving-point impedance at bus {b}"
                );
            }
        }
    }

    #[test]
    fn validation_catches_malformed_specs() {
        let mut spec = two_pv_feeder();
        spec.pv_buses = vec![6, 6];
        assert!(matches!(spec.validate(), Err(Error::InvalidNetwork(_))));

        let mut spec = two_pv_feeder();
        spec.pv_buses = vec![0];
        assert!(matches!(spec.validate(), Err(Error::InvalidNetwork(_))));

        let mut spec = two_pv_feeder();
        spec.branches[0].resistance = -0.1;
        assert!(matches!(spec.validate(), Err(Error::InvalidNetwork(_))));
    }
}
