//! Built-in example feeders and a random small-network generator.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::loads::{LoadError, LoadSet, Zip};
use crate::network::{BranchSpec, ConnectionKind, NetworkError, NetworkModel, NodeSpec, Phase};

/// Raw text of the three-node admittance and load fixture.
pub const THREE_NODE_FIXTURE: &str = include_str!("../data/three_node_admittance.json");

pub const MAX_RANDOM_NODES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("theta must lie in (0, 1], got {0}")]
    ThetaOutOfRange(f64),
    #[error("node count must lie in 1..={MAX_RANDOM_NODES}, got {0}")]
    NodeCount(usize),
    #[error("delta fraction must lie in [0, 1], got {0}")]
    DeltaFraction(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Load(#[from] LoadError),
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Single three-phase wye node behind an ideal phase-decoupled line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoNodeParams {
    pub y_t: f64,
    pub y_l: f64,
    pub i_l: f64,
    pub s_l: f64,
}

impl Default for TwoNodeParams {
    fn default() -> Self {
        TwoNodeParams {
            y_t: 0.5,
            y_l: 0.5,
            i_l: 0.5,
            s_l: -0.5,
        }
    }
}

impl TwoNodeParams {
    pub fn with_s_l(s_l: f64) -> TwoNodeParams {
        TwoNodeParams {
            s_l,
            ..TwoNodeParams::default()
        }
    }

    /// Real roots of `(y_t + y_L) v² - (y_t - i_L) v + s_L = 0`, larger first.
    /// `None` when the discriminant is negative.
    pub fn analytic_roots(&self) -> Option<(f64, f64)> {
        let a = self.y_t + self.y_l;
        let b = self.y_t - self.i_l;
        let disc = b * b - 4.0 * a * self.s_l;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        Some(((b + sq) / (2.0 * a), (b - sq) / (2.0 * a)))
    }

    /// The real nonnegative phase-a magnitude, taking the larger root.
    pub fn analytic_solution(&self) -> Option<f64> {
        self.analytic_roots()
            .map(|(hi, _)| hi)
            .filter(|v| *v >= 0.0)
    }
}

pub fn two_node(params: &TwoNodeParams) -> Result<(NetworkModel, LoadSet), ReferenceError> {
    let nodes = vec![
        NodeSpec::new("S", ConnectionKind::Slack, &Phase::ALL),
        NodeSpec::new("1", ConnectionKind::Wye, &Phase::ALL),
    ];
    let series = CMatrix::identity(3).scale(c(params.y_t, 0.0));
    let network = NetworkModel::new(nodes, vec![BranchSpec::new("S", "1", &Phase::ALL, series)])?;
    let mut loads = LoadSet::new();
    let zip = Zip::new(c(params.s_l, 0.0), c(params.i_l, 0.0), c(params.y_l, 0.0));
    for p in Phase::ALL {
        loads.add_wye(&network, "1", p, zip)?;
    }
    Ok((network, loads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeNodeParams {
    pub theta: f64,
}

#[derive(Debug, Deserialize)]
struct ThreeNodeFixture {
    y_1s: [[[f64; 2]; 3]; 3],
    y_12: [[[f64; 2]; 3]; 3],
    s_l1: [[f64; 2]; 3],
    s_l2: [[f64; 2]; 3],
}

/// Parsed fixture: series blocks of edges (1,S) and (1,2) and the unscaled loads.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeNodeData {
    pub y_1s: CMatrix,
    pub y_12: CMatrix,
    pub s_l1: [Complex64; 3],
    pub s_l2: [Complex64; 3],
}

fn block(raw: &[[[f64; 2]; 3]; 3]) -> CMatrix {
    let rows: Vec<Vec<Complex64>> = raw
        .iter()
        .map(|r| r.iter().map(|&[re, im]| c(re, im)).collect())
        .collect();
    CMatrix::from_rows(&rows).expect("3x3")
}

pub fn three_node_data() -> &'static ThreeNodeData {
    static DATA: OnceLock<ThreeNodeData> = OnceLock::new();
    DATA.get_or_init(|| {
        let raw: ThreeNodeFixture =
            serde_json::from_str(THREE_NODE_FIXTURE).expect("bundled fixture parses");
        let vec3 = |v: &[[f64; 2]; 3]| {
            [
                c(v[0][0], v[0][1]),
                c(v[1][0], v[1][1]),
                c(v[2][0], v[2][1]),
            ]
        };
        ThreeNodeData {
            y_1s: block(&raw.y_1s),
            y_12: block(&raw.y_12),
            s_l1: vec3(&raw.s_l1),
            s_l2: vec3(&raw.s_l2),
        }
    })
}

pub fn three_node(params: &ThreeNodeParams) -> Result<(NetworkModel, LoadSet), ReferenceError> {
    let theta = params.theta;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(ReferenceError::ThetaOutOfRange(theta));
    }
    let data = three_node_data();
    let nodes = vec![
        NodeSpec::new("1", ConnectionKind::Wye, &Phase::ALL),
        NodeSpec::new("2", ConnectionKind::Wye, &Phase::ALL),
        NodeSpec::new("S", ConnectionKind::Slack, &Phase::ALL),
    ];
    let branches = vec![
        BranchSpec::new("1", "S", &Phase::ALL, data.y_1s.clone()),
        BranchSpec::new("1", "2", &Phase::ALL, data.y_12.clone()),
    ];
    let network = NetworkModel::new(nodes, branches)?;
    let mut loads = LoadSet::new();
    for (p, phase) in Phase::ALL.into_iter().enumerate() {
        loads.add_wye(&network, "1", phase, Zip::power(data.s_l1[p] * theta))?;
        loads.add_wye(&network, "2", phase, Zip::power(data.s_l2[p] * theta))?;
    }
    Ok((network, loads))
}

fn random_block(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(rng.gen_range(1.0..3.0), -rng.gen_range(4.0..10.0));
        for j in 0..i {
            let coupling = c(rng.gen_range(0.0..0.05), -rng.gen_range(0.0..0.2));
            m[(i, j)] = coupling;
            m[(j, i)] = coupling;
        }
    }
    m
}

fn random_zip(rng: &mut ChaCha8Rng) -> Zip {
    // |s| <= 0.05 per unit
    let s = c(rng.gen_range(0.0..0.035), rng.gen_range(0.0..0.035));
    let i = if rng.gen_bool(0.5) {
        c(rng.gen_range(0.0..0.02), rng.gen_range(-0.01..0.01))
    } else {
        Complex64::new(0.0, 0.0)
    };
    let y = if rng.gen_bool(0.5) {
        c(rng.gen_range(0.0..0.03), -rng.gen_range(0.0..0.01))
    } else {
        Complex64::new(0.0, 0.0)
    };
    Zip::new(s, i, y)
}

/// Radial feeder with `node_count` non-slack nodes hanging off the slack.
///
/// Every child uses a subset of its parent's phases. A node becomes delta with
/// probability `delta_fraction`; delta nodes always get at least two phases.
pub fn random_small_network(
    seed: u64,
    node_count: usize,
    delta_fraction: f64,
) -> Result<(NetworkModel, LoadSet), ReferenceError> {
    if node_count == 0 || node_count > MAX_RANDOM_NODES {
        return Err(ReferenceError::NodeCount(node_count));
    }
    if !(0.0..=1.0).contains(&delta_fraction) {
        return Err(ReferenceError::DeltaFraction(delta_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![NodeSpec::new("S", ConnectionKind::Slack, &Phase::ALL)];
    let mut branches = Vec::new();
    for k in 1..=node_count {
        let is_delta = rng.gen_bool(delta_fraction);
        let min_phases = if is_delta { 2 } else { 1 };
        let candidates: Vec<usize> = (0..nodes.len())
            .filter(|&p| nodes[p].phases.len() >= min_phases)
            .collect();
        let parent = candidates[rng.gen_range(0..candidates.len())];
        let parent_phases = nodes[parent].phases.as_slice().to_vec();
        let count = if rng.gen_bool(0.6) {
            parent_phases.len()
        } else {
            rng.gen_range(min_phases..=parent_phases.len())
        };
        let mut phases = parent_phases.clone();
        while phases.len() > count {
            phases.remove(rng.gen_range(0..phases.len()));
        }
        let id = format!("n{k}");
        let kind = if is_delta {
            ConnectionKind::Delta
        } else {
            ConnectionKind::Wye
        };
        let series = random_block(&mut rng, phases.len());
        branches.push(BranchSpec::new(
            nodes[parent].id.clone(),
            id.clone(),
            &phases,
            series,
        ));
        nodes.push(NodeSpec::new(id, kind, &phases));
    }

    let network = NetworkModel::new(nodes, branches)?;
    let mut loads = LoadSet::new();
    for node in network.nodes() {
        match node.kind {
            ConnectionKind::Slack => {}
            ConnectionKind::Wye => {
                for p in node.phases.iter() {
                    loads.add_wye(&network, &node.id, p, random_zip(&mut rng))?;
                }
            }
            ConnectionKind::Delta => {
                let phases = node.phases.as_slice();
                if phases.len() == 3 {
                    for p in Phase::ALL {
                        loads.add_delta(
                            &network,
                            &node.id,
                            (p, p.right_shift()),
                            random_zip(&mut rng),
                        )?;
                    }
                } else {
                    loads.add_delta(
                        &network,
                        &node.id,
                        (phases[0], phases[1]),
                        random_zip(&mut rng),
                    )?;
                }
            }
        }
    }
    Ok((network, loads))
}
