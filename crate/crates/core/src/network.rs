//! Three-phase network topology and linear indexing.
//!
//! Every non-slack voltage is addressed by a linear index `j` in
//! `0..J`, where `J` is the total number of available phases over the
//! non-slack nodes. Indices are assigned in node declaration order and,
//! within a node, in `a < b < c` order. Matrices, reports and trace files
//! all depend on this ordering.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::CMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("duplicate node id '{0}'")]
    DuplicateNode(String),
    #[error("network must contain exactly one slack node, found {0}")]
    SlackCount(usize),
    #[error("slack node '{0}' must have all three phases")]
    SlackPhases(String),
    #[error("network has no non-slack nodes")]
    Empty,
    #[error("node '{node}': {reason}")]
    InvalidPhases { node: String, reason: String },
    #[error("branch {index}: unknown node '{node}'")]
    UnknownNode { index: usize, node: String },
    #[error("branch {index}: phase {phase} not available at node '{node}'")]
    BranchPhase {
        index: usize,
        node: String,
        phase: Phase,
    },
    #[error("branch {index}: {what} block is {rows}x{cols}, expected {expected}x{expected}")]
    BlockShape {
        index: usize,
        what: &'static str,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("branch {index}: connects node '{node}' to itself")]
    SelfLoop { index: usize, node: String },
    #[error("node '{node}': shunt block is {rows}x{cols}, expected {expected}x{expected}")]
    ShuntShape {
        node: String,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("phase {phase} not available at node '{node}'")]
    PhaseUnavailable { node: String, phase: Phase },
    #[error("node '{0}' is not delta-connected")]
    NotDelta(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    /// Cyclic successor: a -> b -> c -> a.
    pub fn right_shift(self) -> Phase {
        match self {
            Phase::A => Phase::B,
            Phase::B => Phase::C,
            Phase::C => Phase::A,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::A => "a",
            Phase::B => "b",
            Phase::C => "c",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        match s {
            "a" | "A" => Some(Phase::A),
            "b" | "B" => Some(Phase::B),
            "c" | "C" => Some(Phase::C),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn right_shift(phase: Phase) -> Phase {
    phase.right_shift()
}

/// Ordered, duplicate-free subset of `{a, b, c}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhaseSet(Vec<Phase>);

impl PhaseSet {
    /// Sorts into `a < b < c` order. Returns `None` on duplicates.
    pub fn new(phases: &[Phase]) -> Option<PhaseSet> {
        let mut v = phases.to_vec();
        v.sort();
        let before = v.len();
        v.dedup();
        (v.len() == before).then_some(PhaseSet(v))
    }

    pub fn abc() -> PhaseSet {
        PhaseSet(Phase::ALL.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, phase: Phase) -> bool {
        self.0.contains(&phase)
    }

    /// Position of `phase` within the set.
    pub fn position(&self, phase: Phase) -> Option<usize> {
        self.0.iter().position(|&p| p == phase)
    }

    pub fn iter(&self) -> impl Iterator<Item = Phase> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[Phase] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConnectionKind {
    Wye,
    Delta,
    Slack,
}

impl ConnectionKind {
    pub fn label(self) -> &'static str {
        match self {
            ConnectionKind::Wye => "wye",
            ConnectionKind::Delta => "delta",
            ConnectionKind::Slack => "slack",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: String,
    pub kind: ConnectionKind,
    pub phases: PhaseSet,
    /// Optional shunt admittance to ground over `phases` (per unit).
    pub shunt: Option<CMatrix>,
}

impl NodeSpec {
    pub fn new(id: impl Into<String>, kind: ConnectionKind, phases: &[Phase]) -> NodeSpec {
        let phases = PhaseSet::new(phases).unwrap_or_else(|| PhaseSet(phases.to_vec()));
        NodeSpec {
            id: id.into(),
            kind,
            phases,
            shunt: None,
        }
    }

    pub fn with_shunt(mut self, shunt: CMatrix) -> NodeSpec {
        self.shunt = Some(shunt);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub from: String,
    pub to: String,
    /// Phases covered by the admittance blocks; must be available at both ends.
    pub phases: PhaseSet,
    pub series: CMatrix,
    pub shunt_from: Option<CMatrix>,
    pub shunt_to: Option<CMatrix>,
}

impl BranchSpec {
    pub fn new(
        from: impl Into<String>,
        to: impl Into<String>,
        phases: &[Phase],
        series: CMatrix,
    ) -> BranchSpec {
        BranchSpec {
            from: from.into(),
            to: to.into(),
            phases: PhaseSet::new(phases).unwrap_or_else(|| PhaseSet(phases.to_vec())),
            series,
            shunt_from: None,
            shunt_to: None,
        }
    }
}

/// Signed incidence vector `e` with `e^T v_n = v_n^φ - v_n^φ'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineToLineSelector {
    /// Local position (within the node's phase set) of the `+1` entry.
    pub plus: usize,
    /// Local position of the `-1` entry.
    pub minus: usize,
    pub len: usize,
}

impl LineToLineSelector {
    pub fn between(phases: &PhaseSet, from: Phase, to: Phase) -> Option<LineToLineSelector> {
        if from == to {
            return None;
        }
        Some(LineToLineSelector {
            plus: phases.position(from)?,
            minus: phases.position(to)?,
            len: phases.len(),
        })
    }

    pub fn entries(&self) -> Vec<i8> {
        let mut e = vec![0; self.len];
        e[self.plus] = 1;
        e[self.minus] = -1;
        e
    }

    pub fn apply(&self, v_node: &[Complex64]) -> Complex64 {
        v_node[self.plus] - v_node[self.minus]
    }

    pub fn reversed(&self) -> LineToLineSelector {
        LineToLineSelector {
            plus: self.minus,
            minus: self.plus,
            len: self.len,
        }
    }

    pub fn one_norm(&self) -> f64 {
        2.0
    }
}

/// Result of pairing a delta phase with its right shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeltaPairing {
    pub phase: Phase,
    /// `r(φ)` when paired, otherwise the only other phase of the node.
    pub partner: Phase,
    pub selector: LineToLineSelector,
    /// When false, the index carries no load in the certificate vectors.
    pub paired: bool,
}

pub fn delta_pairing(node: &NodeSpec, phase: Phase) -> Result<DeltaPairing, NetworkError> {
    if node.kind != ConnectionKind::Delta {
        return Err(NetworkError::NotDelta(node.id.clone()));
    }
    if !node.phases.contains(phase) {
        return Err(NetworkError::PhaseUnavailable {
            node: node.id.clone(),
            phase,
        });
    }
    let shifted = phase.right_shift();
    let (partner, paired) = if node.phases.contains(shifted) {
        (shifted, true)
    } else {
        let other = node.phases.iter().find(|&p| p != phase).ok_or_else(|| {
            NetworkError::InvalidPhases {
                node: node.id.clone(),
                reason: "delta node needs at least two phases".into(),
            }
        })?;
        (other, false)
    };
    let selector = LineToLineSelector::between(&node.phases, phase, partner)
        .expect("both phases are available");
    Ok(DeltaPairing {
        phase,
        partner,
        selector,
        paired,
    })
}

/// Bijection between available `(node, phase)` pairs and linear indices.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    entries: Vec<(usize, Phase)>,
    lookup: HashMap<(usize, Phase), usize>,
    node_ranges: Vec<Range<usize>>,
    wye: Vec<usize>,
    delta: Vec<usize>,
    delta_order: Vec<Option<usize>>,
}

impl IndexMap {
    /// Total number of non-slack voltage unknowns.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lin(&self, node: usize, phase: Phase) -> Option<usize> {
        self.lookup.get(&(node, phase)).copied()
    }

    pub fn node_of(&self, j: usize) -> usize {
        self.entries[j].0
    }

    pub fn phase_of(&self, j: usize) -> Phase {
        self.entries[j].1
    }

    /// Indices belonging to a node (empty for the slack node).
    pub fn node_indices(&self, node: usize) -> Range<usize> {
        self.node_ranges[node].clone()
    }

    pub fn wye_indices(&self) -> &[usize] {
        &self.wye
    }

    pub fn delta_indices(&self) -> &[usize] {
        &self.delta
    }

    /// Position of `j` within the delta index list.
    pub fn delta_order(&self, j: usize) -> Option<usize> {
        self.delta_order[j]
    }
}

pub fn build_index_map(nodes: &[NodeSpec]) -> Result<IndexMap, NetworkError> {
    validate_nodes(nodes)?;
    let mut entries = Vec::new();
    let mut lookup = HashMap::new();
    let mut node_ranges = Vec::with_capacity(nodes.len());
    let mut wye = Vec::new();
    let mut delta = Vec::new();
    for (n, node) in nodes.iter().enumerate() {
        let start = entries.len();
        if node.kind != ConnectionKind::Slack {
            for phase in node.phases.iter() {
                let j = entries.len();
                entries.push((n, phase));
                lookup.insert((n, phase), j);
                match node.kind {
                    ConnectionKind::Wye => wye.push(j),
                    ConnectionKind::Delta => delta.push(j),
                    ConnectionKind::Slack => unreachable!(),
                }
            }
        }
        node_ranges.push(start..entries.len());
    }
    if entries.is_empty() {
        return Err(NetworkError::Empty);
    }
    let mut delta_order = vec![None; entries.len()];
    for (l, &k) in delta.iter().enumerate() {
        delta_order[k] = Some(l);
    }
    Ok(IndexMap {
        entries,
        lookup,
        node_ranges,
        wye,
        delta,
        delta_order,
    })
}

fn validate_nodes(nodes: &[NodeSpec]) -> Result<(), NetworkError> {
    let mut seen = HashMap::new();
    for node in nodes {
        if seen.insert(node.id.as_str(), ()).is_some() {
            return Err(NetworkError::DuplicateNode(node.id.clone()));
        }
        if PhaseSet::new(node.phases.as_slice()).is_none() {
            return Err(NetworkError::InvalidPhases {
                node: node.id.clone(),
                reason: "duplicate phase".into(),
            });
        }
        let count = node.phases.len();
        match node.kind {
            ConnectionKind::Wye if count == 0 => {
                return Err(NetworkError::InvalidPhases {
                    node: node.id.clone(),
                    reason: "wye node needs at least one phase".into(),
                })
            }
            ConnectionKind::Delta if count < 2 => {
                return Err(NetworkError::InvalidPhases {
                    node: node.id.clone(),
                    reason: "delta node needs at least two phases".into(),
                })
            }
            ConnectionKind::Slack if count != 3 => {
                return Err(NetworkError::SlackPhases(node.id.clone()))
            }
            _ => {}
        }
        if let Some(shunt) = &node.shunt {
            if shunt.rows() != count || shunt.cols() != count {
                return Err(NetworkError::ShuntShape {
                    node: node.id.clone(),
                    rows: shunt.rows(),
                    cols: shunt.cols(),
                    expected: count,
                });
            }
        }
    }
    let slacks = nodes
        .iter()
        .filter(|n| n.kind == ConnectionKind::Slack)
        .count();
    if slacks != 1 {
        return Err(NetworkError::SlackCount(slacks));
    }
    Ok(())
}

/// Default slack voltage `{1, e^{-j2π/3}, e^{j2π/3}}`.
pub fn default_slack_voltage() -> [Complex64; 3] {
    let angle = 2.0 * std::f64::consts::PI / 3.0;
    [
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.0, -angle),
        Complex64::from_polar(1.0, angle),
    ]
}

/// Validated network: nodes, branches, slack voltage and the index map.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    nodes: Vec<NodeSpec>,
    branches: Vec<BranchSpec>,
    slack: usize,
    slack_voltage: [Complex64; 3],
    index: IndexMap,
}

impl NetworkModel {
    pub fn new(
        nodes: Vec<NodeSpec>,
        branches: Vec<BranchSpec>,
    ) -> Result<NetworkModel, NetworkError> {
        NetworkModel::with_slack_voltage(nodes, branches, default_slack_voltage())
    }

    pub fn with_slack_voltage(
        nodes: Vec<NodeSpec>,
        branches: Vec<BranchSpec>,
        slack_voltage: [Complex64; 3],
    ) -> Result<NetworkModel, NetworkError> {
        let index = build_index_map(&nodes)?;
        let slack = nodes
            .iter()
            .position(|n| n.kind == ConnectionKind::Slack)
            .expect("validated");
        let model = NetworkModel {
            nodes,
            branches,
            slack,
            slack_voltage,
            index,
        };
        model.validate_branches()?;
        Ok(model)
    }

    fn validate_branches(&self) -> Result<(), NetworkError> {
        for (index, branch) in self.branches.iter().enumerate() {
            let from =
                self.node_position(&branch.from)
                    .ok_or_else(|| NetworkError::UnknownNode {
                        index,
                        node: branch.from.clone(),
                    })?;
            let to = self
                .node_position(&branch.to)
                .ok_or_else(|| NetworkError::UnknownNode {
                    index,
                    node: branch.to.clone(),
                })?;
            if from == to {
                return Err(NetworkError::SelfLoop {
                    index,
                    node: branch.from.clone(),
                });
            }
            if PhaseSet::new(branch.phases.as_slice()).is_none() || branch.phases.is_empty() {
                return Err(NetworkError::InvalidPhases {
                    node: format!("{}-{}", branch.from, branch.to),
                    reason: "branch phases must be a non-empty set".into(),
                });
            }
            for end in [from, to] {
                let node = &self.nodes[end];
                if let Some(phase) = branch.phases.iter().find(|&p| !node.phases.contains(p)) {
                    return Err(NetworkError::BranchPhase {
                        index,
                        node: node.id.clone(),
                        phase,
                    });
                }
            }
            let expected = branch.phases.len();
            let blocks = [
                ("series", Some(&branch.series)),
                ("shunt_from", branch.shunt_from.as_ref()),
                ("shunt_to", branch.shunt_to.as_ref()),
            ];
            for (what, block) in blocks {
                if let Some(m) = block {
                    if m.rows() != expected || m.cols() != expected {
                        return Err(NetworkError::BlockShape {
                            index,
                            what,
                            rows: m.rows(),
                            cols: m.cols(),
                            expected,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn branches(&self) -> &[BranchSpec] {
        &self.branches
    }

    pub fn node(&self, n: usize) -> &NodeSpec {
        &self.nodes[n]
    }

    pub fn node_position(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn slack_voltage(&self) -> [Complex64; 3] {
        self.slack_voltage
    }

    pub fn index(&self) -> &IndexMap {
        &self.index
    }

    /// Number of non-slack voltage unknowns `J`.
    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// Slice of `v` belonging to node `n`.
    pub fn node_voltage<'a>(&self, v: &'a [Complex64], n: usize) -> &'a [Complex64] {
        &v[self.index.node_indices(n)]
    }

    /// Flat start: every node takes the slack voltage restricted to its phases.
    pub fn flat_voltage(&self) -> Vec<Complex64> {
        (0..self.dim())
            .map(|j| self.slack_voltage[self.index.phase_of(j).index()])
            .collect()
    }

    /// Selector `e_k` for a delta index (paired or not).
    pub fn delta_selector(&self, k: usize) -> Option<DeltaPairing> {
        let n = self.index.node_of(k);
        delta_pairing(&self.nodes[n], self.index.phase_of(k)).ok()
    }
}
