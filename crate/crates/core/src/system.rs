//! Nodal admittance blocks and the fixed-point data `Z`, `w`.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{inverse, CMatrix, LinalgError};
use crate::loads::{assemble_load_admittance, LoadError, LoadSet};
use crate::network::{NetworkModel, Phase};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error(
        "Y + Y_L is singular ({0}); check for isolated or unloaded subnetworks without a path \
         to ground (e.g. delta-delta sections may need a small shunt admittance)"
    )]
    IllPosed(LinalgError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Linalg(LinalgError),
}

/// Partitioned nodal admittance: non-slack rows first, slack phases a, b, c last.
#[derive(Debug, Clone, PartialEq)]
pub struct BusAdmittance {
    pub y: CMatrix,
    pub y_ns: CMatrix,
    pub y_sn: CMatrix,
    pub y_ss: CMatrix,
}

impl BusAdmittance {
    /// Slack current injection `i_S = Y_SN v + Y_SS v_S`.
    pub fn slack_injection(&self, v: &[Complex64], v_s: &[Complex64; 3]) -> Vec<Complex64> {
        let a = self.y_sn.matvec(v).expect("dimensions fixed at assembly");
        let b = self.y_ss.matvec(v_s).expect("3x3");
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }

    /// Network-side injection `Y v + Y_NS v_S`.
    pub fn network_injection(&self, v: &[Complex64], v_s: &[Complex64; 3]) -> Vec<Complex64> {
        let a = self.y.matvec(v).expect("dimensions fixed at assembly");
        let b = self.y_ns.matvec(v_s).expect("dimensions fixed at assembly");
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }
}

/// Position in the full (J + 3) nodal ordering.
fn full_position(network: &NetworkModel, node: usize, phase: Phase) -> usize {
    if node == network.slack() {
        network.dim() + phase.index()
    } else {
        network
            .index()
            .lin(node, phase)
            .expect("phase validated against node")
    }
}

pub fn assemble_bus_admittance(network: &NetworkModel) -> BusAdmittance {
    let j = network.dim();
    let mut full = CMatrix::zeros(j + 3, j + 3);
    let mut stamp = |node: usize, phases: &[Phase], block: &CMatrix, other: Option<usize>| {
        for (p, &pp) in phases.iter().enumerate() {
            for (q, &qq) in phases.iter().enumerate() {
                let y = block[(p, q)];
                let row = full_position(network, node, pp);
                full[(row, full_position(network, node, qq))] += y;
                if let Some(m) = other {
                    full[(row, full_position(network, m, qq))] -= y;
                }
            }
        }
    };
    for branch in network.branches() {
        let from = network.node_position(&branch.from).expect("validated");
        let to = network.node_position(&branch.to).expect("validated");
        let phases = branch.phases.as_slice();
        stamp(from, phases, &branch.series, Some(to));
        stamp(to, phases, &branch.series, Some(from));
        if let Some(sh) = &branch.shunt_from {
            stamp(from, phases, sh, None);
        }
        if let Some(sh) = &branch.shunt_to {
            stamp(to, phases, sh, None);
        }
    }
    for (n, node) in network.nodes().iter().enumerate() {
        if let Some(sh) = &node.shunt {
            stamp(n, node.phases.as_slice(), sh, None);
        }
    }
    let block = |r0: usize, rows: usize, c0: usize, cols: usize| {
        let mut m = CMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = full[(r0 + r, c0 + c)];
            }
        }
        m
    };
    BusAdmittance {
        y: block(0, j, 0, j),
        y_ns: block(0, j, j, 3),
        y_sn: block(j, 3, 0, j),
        y_ss: block(j, 3, j, 3),
    }
}

/// Everything the Z-Bus iteration and the certificate share.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub bus: BusAdmittance,
    pub y_l: CMatrix,
    /// `(Y + Y_L)^{-1}`
    pub z: CMatrix,
    /// No-load voltage `-Z Y_NS v_S`.
    pub w: Vec<Complex64>,
    pub v_s: [Complex64; 3],
}

impl SystemMatrices {
    pub fn new(network: &NetworkModel, loads: &LoadSet) -> Result<SystemMatrices, SystemError> {
        let bus = assemble_bus_admittance(network);
        let y_l = assemble_load_admittance(network, loads)?;
        compute_fixed_point_data(bus, y_l, network.slack_voltage())
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

pub fn compute_fixed_point_data(
    bus: BusAdmittance,
    y_l: CMatrix,
    v_s: [Complex64; 3],
) -> Result<SystemMatrices, SystemError> {
    let total = bus.y.add(&y_l).map_err(SystemError::Linalg)?;
    let z = inverse(&total).map_err(|e| match e {
        LinalgError::Singular { .. } => SystemError::IllPosed(e),
        other => SystemError::Linalg(other),
    })?;
    let y_ns_vs = bus.y_ns.matvec(&v_s).map_err(SystemError::Linalg)?;
    let w = z
        .matvec(&y_ns_vs)
        .map_err(SystemError::Linalg)?
        .into_iter()
        .map(|x| -x)
        .collect();
    Ok(SystemMatrices {
        bus,
        y_l,
        z,
        w,
        v_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inf_norm_diff;
    use crate::loads::Zip;
    use crate::network::{default_slack_voltage, BranchSpec, ConnectionKind, NodeSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_node(y_t: f64) -> NetworkModel {
        let nodes = vec![
            NodeSpec::new("S", ConnectionKind::Slack, &Phase::ALL),
            NodeSpec::new("1", ConnectionKind::Wye, &Phase::ALL),
        ];
        let branch = BranchSpec::new(
            "S",
            "1",
            &Phase::ALL,
            CMatrix::identity(3).scale(c(y_t, 0.0)),
        );
        NetworkModel::new(nodes, vec![branch]).unwrap()
    }

    #[test]
    fn two_node_blocks() {
        let bus = assemble_bus_admittance(&two_node(0.5));
        let half = CMatrix::identity(3).scale(c(0.5, 0.0));
        assert_eq!(bus.y, half);
        assert_eq!(bus.y_ns, half.scale(c(-1.0, 0.0)));
        assert_eq!(bus.y_sn, half.scale(c(-1.0, 0.0)));
        assert_eq!(bus.y_ss, half);
    }

    #[test]
    fn two_node_fixed_point_data() {
        let net = two_node(0.5);
        let mut loads = LoadSet::new();
        for p in Phase::ALL {
            loads
                .add_wye(
                    &net,
                    "1",
                    p,
                    Zip::new(c(-0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)),
                )
                .unwrap();
        }
        let sys = SystemMatrices::new(&net, &loads).unwrap();
        assert_eq!(sys.y_l, CMatrix::identity(3).scale(c(0.5, 0.0)));
        assert!(inf_norm_diff(sys.z.as_slice(), CMatrix::identity(3).as_slice()) < 1e-15);
        let half_vs: Vec<_> = default_slack_voltage().iter().map(|v| v * 0.5).collect();
        assert!(inf_norm_diff(&sys.w, &half_vs) < 1e-15);
    }

    #[test]
    fn single_node_with_shunt() {
        let y_sh = c(0.1, 0.2);
        let nodes = vec![
            NodeSpec::new("S", ConnectionKind::Slack, &Phase::ALL),
            NodeSpec::new("1", ConnectionKind::Wye, &[Phase::B])
                .with_shunt(CMatrix::from_diagonal(&[y_sh])),
        ];
        let series = c(1.0, -3.0);
        let branch = BranchSpec::new("S", "1", &[Phase::B], CMatrix::from_diagonal(&[series]));
        let bus = assemble_bus_admittance(&NetworkModel::new(nodes, vec![branch]).unwrap());
        assert_eq!(bus.y[(0, 0)], series + y_sh);
        assert_eq!(bus.y_ns[(0, 1)], -series);
        assert_eq!(bus.y_ns[(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn identity_algebra() {
        let bus = BusAdmittance {
            y: CMatrix::identity(3),
            y_ns: CMatrix::identity(3).scale(c(-1.0, 0.0)),
            y_sn: CMatrix::identity(3).scale(c(-1.0, 0.0)),
            y_ss: CMatrix::identity(3),
        };
        let vs = default_slack_voltage();
        let sys = compute_fixed_point_data(bus, CMatrix::zeros(3, 3), vs).unwrap();
        assert_eq!(sys.w, vs.to_vec());
    }

    #[test]
    fn isolated_node_is_ill_posed() {
        let nodes = vec![
            NodeSpec::new("S", ConnectionKind::Slack, &Phase::ALL),
            NodeSpec::new("1", ConnectionKind::Wye, &[Phase::A]),
        ];
        let net = NetworkModel::new(nodes, vec![]).unwrap();
        assert!(matches!(
            SystemMatrices::new(&net, &LoadSet::new()),
            Err(SystemError::IllPosed(_))
        ));
    }

    #[test]
    fn slack_injection_matches_branch_flow() {
        let net = two_node(0.5);
        let bus = assemble_bus_admittance(&net);
        let vs = default_slack_voltage();
        let v = vec![c(0.9, 0.05), c(-0.4, -0.8), c(-0.45, 0.75)];
        let i_s = bus.slack_injection(&v, &vs);
        for p in 0..3 {
            let flow = 0.5 * (vs[p] - v[p]);
            assert!((i_s[p] - flow).norm() < 1e-15);
        }
    }
}
