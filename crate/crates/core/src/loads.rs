//! ZIP load models for wye and delta connections.
//!
//! Injection currents follow the load convention: a positive nominal power
//! draws current out of the node, so every component carries a leading minus
//! sign. The constant-current part keeps `|i|` fixed and rotates with the
//! voltage angle, so its apparent power scales with `|v|`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::network::{
    delta_pairing, ConnectionKind, DeltaPairing, LineToLineSelector, NetworkModel, NodeSpec, Phase,
};

/// Voltages (or line-to-line voltages) below this magnitude are treated as zero.
pub const SINGULAR_VOLTAGE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("zero voltage at node '{node}' phase {phase} carrying constant-power/current load")]
    SingularVoltage { node: String, phase: Phase },
    #[error("zero line-to-line voltage at node '{node}' pair {pair} carrying constant-power/current load")]
    SingularPairVoltage { node: String, pair: PhasePair },
    #[error("load references unknown node '{0}'")]
    UnknownNode(String),
    #[error("load on slack node '{0}' is not allowed")]
    SlackLoad(String),
    #[error("wye load on non-wye node '{0}'")]
    WyeOnDelta(String),
    #[error("delta load on non-delta node '{0}'")]
    DeltaOnWye(String),
    #[error("node '{node}': phase {phase} not available")]
    PhaseUnavailable { node: String, phase: Phase },
    #[error("node '{node}': delta pair needs two distinct phases")]
    DegeneratePair { node: String },
    #[error("node '{node}': conflicting duplicate load entry for {what}")]
    Conflict { node: String, what: String },
}

/// Nominal ZIP parameters of one load element (per unit).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Zip {
    pub s: Complex64,
    pub i: Complex64,
    pub y: Complex64,
}

impl Zip {
    pub fn new(s: Complex64, i: Complex64, y: Complex64) -> Zip {
        Zip { s, i, y }
    }

    pub fn power(s: Complex64) -> Zip {
        Zip {
            s,
            ..Zip::default()
        }
    }

    /// True when the constant-power or constant-current part is nonzero.
    pub fn is_voltage_dependent(&self) -> bool {
        self.s != Complex64::new(0.0, 0.0) || self.i != Complex64::new(0.0, 0.0)
    }
}

/// Unordered phase pair, stored with the lower phase first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhasePair(Phase, Phase);

impl PhasePair {
    pub fn new(p: Phase, q: Phase) -> Option<PhasePair> {
        match p.cmp(&q) {
            std::cmp::Ordering::Less => Some(PhasePair(p, q)),
            std::cmp::Ordering::Greater => Some(PhasePair(q, p)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn first(&self) -> Phase {
        self.0
    }

    pub fn second(&self) -> Phase {
        self.1
    }
}

impl fmt::Display for PhasePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0, self.1)
    }
}

/// Per-component injection currents, each of length `|Ω_n|` or `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZipCurrents {
    pub power: Vec<Complex64>,
    pub current: Vec<Complex64>,
    pub impedance: Vec<Complex64>,
}

impl ZipCurrents {
    fn zeros(n: usize) -> ZipCurrents {
        let z = vec![Complex64::new(0.0, 0.0); n];
        ZipCurrents {
            power: z.clone(),
            current: z.clone(),
            impedance: z,
        }
    }

    pub fn total(&self) -> Vec<Complex64> {
        self.power
            .iter()
            .zip(&self.current)
            .zip(&self.impedance)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }

    /// `i_PQ + i_I`, the part that stays outside `Y_L`.
    pub fn nonlinear(&self) -> Vec<Complex64> {
        self.power
            .iter()
            .zip(&self.current)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Wye injection at one node. `loads[p]` is aligned with `v_n[p]`.
pub fn wye_injection(
    node: &NodeSpec,
    v_n: &[Complex64],
    loads: &[Zip],
) -> Result<ZipCurrents, LoadError> {
    let mut out = ZipCurrents::zeros(v_n.len());
    for (p, (&v, zip)) in v_n.iter().zip(loads).enumerate() {
        if zip.is_voltage_dependent() && v.norm() < SINGULAR_VOLTAGE {
            return Err(LoadError::SingularVoltage {
                node: node.id.clone(),
                phase: node.phases.as_slice()[p],
            });
        }
        if zip.s != Complex64::new(0.0, 0.0) {
            out.power[p] = -(zip.s / v).conj();
        }
        if zip.i != Complex64::new(0.0, 0.0) {
            out.current[p] = -(v / v.norm()) * zip.i;
        }
        out.impedance[p] = -zip.y * v;
    }
    Ok(out)
}

/// Delta injection at one node from all incident phase-pair loads.
pub fn delta_injection(
    node: &NodeSpec,
    v_n: &[Complex64],
    loads: &[(PhasePair, Zip)],
) -> Result<ZipCurrents, LoadError> {
    let mut out = ZipCurrents::zeros(v_n.len());
    for &(pair, zip) in loads {
        let sel = LineToLineSelector::between(&node.phases, pair.first(), pair.second())
            .ok_or_else(|| LoadError::PhaseUnavailable {
                node: node.id.clone(),
                phase: if node.phases.contains(pair.first()) {
                    pair.second()
                } else {
                    pair.first()
                },
            })?;
        let u = sel.apply(v_n);
        if zip.is_voltage_dependent() && u.norm() < SINGULAR_VOLTAGE {
            return Err(LoadError::SingularPairVoltage {
                node: node.id.clone(),
                pair,
            });
        }
        // Current leaving through the pair element, seen from the `plus` phase.
        let pq = if zip.s != Complex64::new(0.0, 0.0) {
            (zip.s / u).conj()
        } else {
            Complex64::new(0.0, 0.0)
        };
        let ci = if zip.i != Complex64::new(0.0, 0.0) {
            zip.i * u / u.norm()
        } else {
            Complex64::new(0.0, 0.0)
        };
        let z = zip.y * u;
        out.power[sel.plus] -= pq;
        out.power[sel.minus] += pq;
        out.current[sel.plus] -= ci;
        out.current[sel.minus] += ci;
        out.impedance[sel.plus] -= z;
        out.impedance[sel.minus] += z;
    }
    Ok(out)
}

/// All wye and delta ZIP loads of a network, keyed by node position.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadSet {
    wye: BTreeMap<(usize, Phase), Zip>,
    delta: BTreeMap<(usize, PhasePair), Zip>,
}

impl LoadSet {
    pub fn new() -> LoadSet {
        LoadSet::default()
    }

    pub fn add_wye(
        &mut self,
        network: &NetworkModel,
        node: &str,
        phase: Phase,
        zip: Zip,
    ) -> Result<(), LoadError> {
        let n = network
            .node_position(node)
            .ok_or_else(|| LoadError::UnknownNode(node.to_string()))?;
        let spec = network.node(n);
        match spec.kind {
            ConnectionKind::Slack => return Err(LoadError::SlackLoad(node.to_string())),
            ConnectionKind::Delta => return Err(LoadError::WyeOnDelta(node.to_string())),
            ConnectionKind::Wye => {}
        }
        if !spec.phases.contains(phase) {
            return Err(LoadError::PhaseUnavailable {
                node: node.to_string(),
                phase,
            });
        }
        match self.wye.get(&(n, phase)) {
            Some(existing) if *existing != zip => Err(LoadError::Conflict {
                node: node.to_string(),
                what: format!("phase {phase}"),
            }),
            _ => {
                self.wye.insert((n, phase), zip);
                Ok(())
            }
        }
    }

    pub fn add_delta(
        &mut self,
        network: &NetworkModel,
        node: &str,
        pair: (Phase, Phase),
        zip: Zip,
    ) -> Result<(), LoadError> {
        let n = network
            .node_position(node)
            .ok_or_else(|| LoadError::UnknownNode(node.to_string()))?;
        let spec = network.node(n);
        match spec.kind {
            ConnectionKind::Slack => return Err(LoadError::SlackLoad(node.to_string())),
            ConnectionKind::Wye => return Err(LoadError::DeltaOnWye(node.to_string())),
            ConnectionKind::Delta => {}
        }
        let key = PhasePair::new(pair.0, pair.1).ok_or_else(|| LoadError::DegeneratePair {
            node: node.to_string(),
        })?;
        for phase in [pair.0, pair.1] {
            if !spec.phases.contains(phase) {
                return Err(LoadError::PhaseUnavailable {
                    node: node.to_string(),
                    phase,
                });
            }
        }
        match self.delta.get(&(n, key)) {
            Some(existing) if *existing != zip => Err(LoadError::Conflict {
                node: node.to_string(),
                what: format!("pair {key}"),
            }),
            _ => {
                self.delta.insert((n, key), zip);
                Ok(())
            }
        }
    }

    pub fn wye_entries(&self) -> impl Iterator<Item = (usize, Phase, Zip)> + '_ {
        self.wye.iter().map(|(&(n, p), &z)| (n, p, z))
    }

    pub fn delta_entries(&self) -> impl Iterator<Item = (usize, PhasePair, Zip)> + '_ {
        self.delta.iter().map(|(&(n, p), &z)| (n, p, z))
    }

    pub fn wye_load(&self, node: usize, phase: Phase) -> Zip {
        self.wye.get(&(node, phase)).copied().unwrap_or_default()
    }

    pub fn delta_load(&self, node: usize, pair: PhasePair) -> Zip {
        self.delta.get(&(node, pair)).copied().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.wye.is_empty() && self.delta.is_empty()
    }

    /// Multiplies every constant-power and constant-current entry by `factor`.
    pub fn scaled(&self, factor: f64) -> LoadSet {
        let scale = |z: &Zip| Zip {
            s: z.s * factor,
            i: z.i * factor,
            y: z.y,
        };
        LoadSet {
            wye: self.wye.iter().map(|(k, z)| (*k, scale(z))).collect(),
            delta: self.delta.iter().map(|(k, z)| (*k, scale(z))).collect(),
        }
    }

    fn node_delta_loads(&self, node: usize) -> Vec<(PhasePair, Zip)> {
        self.delta
            .range((node, PhasePair(Phase::A, Phase::A))..=(node, PhasePair(Phase::C, Phase::C)))
            .map(|(&(_, pair), &z)| (pair, z))
            .collect()
    }

    /// Direct ZIP evaluation of the full length-`J` injection vector.
    pub fn injection(
        &self,
        network: &NetworkModel,
        v: &[Complex64],
    ) -> Result<ZipCurrents, LoadError> {
        let j = network.dim();
        let mut out = ZipCurrents::zeros(j);
        for (n, node) in network.nodes().iter().enumerate() {
            let range = network.index().node_indices(n);
            if range.is_empty() {
                continue;
            }
            let v_n = &v[range.clone()];
            let local = match node.kind {
                ConnectionKind::Wye => {
                    let zips: Vec<Zip> = node.phases.iter().map(|p| self.wye_load(n, p)).collect();
                    wye_injection(node, v_n, &zips)?
                }
                ConnectionKind::Delta => delta_injection(node, v_n, &self.node_delta_loads(n))?,
                ConnectionKind::Slack => continue,
            };
            for (offset, k) in range.enumerate() {
                out.power[k] = local.power[offset];
                out.current[k] = local.current[offset];
                out.impedance[k] = local.impedance[offset];
            }
        }
        Ok(out)
    }
}

/// Constant-impedance admittance matrix `Y_L`, so that `i_Z(v) = -Y_L v`.
pub fn assemble_load_admittance(
    network: &NetworkModel,
    loads: &LoadSet,
) -> Result<CMatrix, LoadError> {
    let index = network.index();
    let mut y_l = CMatrix::zeros(index.len(), index.len());
    for (n, phase, zip) in loads.wye_entries() {
        let j = index
            .lin(n, phase)
            .ok_or_else(|| LoadError::PhaseUnavailable {
                node: network.node(n).id.clone(),
                phase,
            })?;
        y_l[(j, j)] += zip.y;
    }
    for (n, pair, zip) in loads.delta_entries() {
        let lookup = |phase: Phase| {
            index
                .lin(n, phase)
                .ok_or_else(|| LoadError::PhaseUnavailable {
                    node: network.node(n).id.clone(),
                    phase,
                })
        };
        let j = lookup(pair.first())?;
        let k = lookup(pair.second())?;
        y_l[(j, j)] += zip.y;
        y_l[(k, k)] += zip.y;
        y_l[(j, k)] -= zip.y;
        y_l[(k, j)] -= zip.y;
    }
    Ok(y_l)
}

/// Per-index load aliases `s_L^k`, `i_L^k` and the delta selectors `e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedLoads {
    pub power: Vec<Complex64>,
    pub current: Vec<Complex64>,
    /// `Some` exactly for delta indices.
    pub pairing: Vec<Option<DeltaPairing>>,
}

impl IndexedLoads {
    pub fn new(network: &NetworkModel, loads: &LoadSet) -> IndexedLoads {
        let index = network.index();
        let j = index.len();
        let mut power = vec![Complex64::new(0.0, 0.0); j];
        let mut current = vec![Complex64::new(0.0, 0.0); j];
        let mut pairing = vec![None; j];
        for k in 0..j {
            let n = index.node_of(k);
            let node = network.node(n);
            let phase = index.phase_of(k);
            match node.kind {
                ConnectionKind::Wye => {
                    let zip = loads.wye_load(n, phase);
                    power[k] = zip.s;
                    current[k] = zip.i;
                }
                ConnectionKind::Delta => {
                    let pair = delta_pairing(node, phase).expect("delta index has a valid phase");
                    if pair.paired {
                        let zip = loads
                            .delta_load(n, PhasePair::new(phase, pair.partner).expect("distinct"));
                        power[k] = zip.s;
                        current[k] = zip.i;
                    }
                    pairing[k] = Some(pair);
                }
                ConnectionKind::Slack => unreachable!("slack has no linear indices"),
            }
        }
        IndexedLoads {
            power,
            current,
            pairing,
        }
    }

    /// True when any delta index carries constant-power or constant-current load.
    pub fn has_delta_load(&self) -> bool {
        self.pairing.iter().enumerate().any(|(k, p)| {
            p.is_some()
                && (self.power[k] != Complex64::new(0.0, 0.0)
                    || self.current[k] != Complex64::new(0.0, 0.0))
        })
    }
}
