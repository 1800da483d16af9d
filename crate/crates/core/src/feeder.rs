//! JSON feeder files: parsing, validation into a model, and emission.
//!
//! Complex numbers are `[re, im]` pairs, matrices are row-major lists of
//! such pairs. All quantities are per unit; `base` is carried along as
//! metadata only.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::loads::{LoadError, LoadSet, Zip};
use crate::network::{
    default_slack_voltage, BranchSpec, ConnectionKind, NetworkError, NetworkModel, NodeSpec, Phase,
};

pub const SCHEMA_VERSION: &str = "1";

pub type ComplexPair = [f64; 2];

#[derive(Debug, Error)]
pub enum FeederError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Syntax and type errors, with the line and column reported by the parser.
    #[error("malformed feeder file: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("unsupported schema_version {0:?}, expected \"1\"")]
    SchemaVersion(String),
    #[error("{at}: {message}")]
    Schema { at: String, message: String },
    #[error("{at}: {source}")]
    Network {
        at: String,
        #[source]
        source: NetworkError,
    },
    #[error("{at}: {source}")]
    Load {
        at: String,
        #[source]
        source: LoadError,
    },
}

fn schema(at: impl Into<String>, message: impl Into<String>) -> FeederError {
    FeederError::Schema {
        at: at.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_base_va: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_base_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlackEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage: Option<[ComplexPair; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    /// `"wye"` or `"delta"`.
    pub kind: String,
    pub phases: Vec<String>,
    /// Optional shunt admittance to ground over `phases`, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shunt: Option<Vec<ComplexPair>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchEntry {
    pub from: String,
    pub to: String,
    pub phases: Vec<String>,
    pub series: Vec<ComplexPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shunt_from: Option<Vec<ComplexPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shunt_to: Option<Vec<ComplexPair>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WyeLoadEntry {
    pub node: String,
    pub phase: String,
    #[serde(default)]
    pub s: ComplexPair,
    #[serde(default)]
    pub i: ComplexPair,
    #[serde(default)]
    pub y: ComplexPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaLoadEntry {
    pub node: String,
    pub pair: [String; 2],
    #[serde(default)]
    pub s: ComplexPair,
    #[serde(default)]
    pub i: ComplexPair,
    #[serde(default)]
    pub y: ComplexPair,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadsEntry {
    #[serde(default)]
    pub wye: Vec<WyeLoadEntry>,
    #[serde(default)]
    pub delta: Vec<DeltaLoadEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederFile {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseInfo>,
    pub slack: SlackEntry,
    pub nodes: Vec<NodeEntry>,
    pub branches: Vec<BranchEntry>,
    #[serde(default)]
    pub loads: LoadsEntry,
}

fn to_complex(p: ComplexPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn to_pair(z: Complex64) -> ComplexPair {
    [z.re, z.im]
}

fn parse_phase(at: &str, s: &str) -> Result<Phase, FeederError> {
    Phase::parse(s).ok_or_else(|| schema(at, format!("unknown phase {s:?}")))
}

/// Phases must be listed once each in `a, b, c` order; blocks are indexed the same way.
fn parse_phases(at: &str, list: &[String]) -> Result<Vec<Phase>, FeederError> {
    let phases = list
        .iter()
        .map(|s| parse_phase(at, s))
        .collect::<Result<Vec<_>, _>>()?;
    if phases.is_empty() {
        return Err(schema(at, "phase list is empty"));
    }
    if phases.windows(2).any(|w| w[0] >= w[1]) {
        return Err(schema(
            at,
            "phases must be distinct and listed in a, b, c order",
        ));
    }
    Ok(phases)
}

fn parse_block(at: &str, entries: &[ComplexPair], n: usize) -> Result<CMatrix, FeederError> {
    if entries.len() != n * n {
        return Err(schema(
            at,
            format!(
                "expected {} entries for a {n}x{n} block, got {}",
                n * n,
                entries.len()
            ),
        ));
    }
    for (k, e) in entries.iter().enumerate() {
        if !e[0].is_finite() || !e[1].is_finite() {
            return Err(schema(format!("{at}[{k}]"), "non-finite value"));
        }
    }
    CMatrix::from_row_major(n, n, entries.iter().copied().map(to_complex).collect())
        .map_err(|e| schema(at, e.to_string()))
}

fn block_entries(m: &CMatrix) -> Vec<ComplexPair> {
    m.as_slice().iter().copied().map(to_pair).collect()
}

fn phase_labels(phases: &[Phase]) -> Vec<String> {
    phases.iter().map(|p| p.label().to_string()).collect()
}

fn check_finite(at: &str, values: &[ComplexPair]) -> Result<(), FeederError> {
    if values.iter().flatten().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(schema(at, "non-finite value"))
    }
}

impl FeederFile {
    pub fn parse(text: &str) -> Result<FeederFile, FeederError> {
        let file: FeederFile = serde_json::from_str(text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(FeederError::SchemaVersion(file.schema_version));
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<FeederFile, FeederError> {
        let text = fs::read_to_string(path).map_err(|source| FeederError::Io {
            path: path.display().to_string(),
            source,
        })?;
        FeederFile::parse(&text)
    }

    /// Pretty JSON with a trailing newline.
    pub fn emit(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("feeder serializes");
        s.push('\n');
        s
    }

    /// Validates and builds the network model and load set.
    pub fn to_model(&self) -> Result<(NetworkModel, LoadSet), FeederError> {
        let mut nodes = vec![NodeSpec::new(
            self.slack.id.clone(),
            ConnectionKind::Slack,
            &Phase::ALL,
        )];
        for (k, entry) in self.nodes.iter().enumerate() {
            let at = format!("nodes[{k}] ({})", entry.id);
            let kind = match entry.kind.as_str() {
                "wye" => ConnectionKind::Wye,
                "delta" => ConnectionKind::Delta,
                "slack" => {
                    return Err(schema(
                        at,
                        "the slack node is declared in the `slack` section",
                    ))
                }
                other => {
                    return Err(schema(
                        at,
                        format!("unknown kind {other:?}, expected \"wye\" or \"delta\""),
                    ))
                }
            };
            let phases = parse_phases(&at, &entry.phases)?;
            let mut spec = NodeSpec::new(entry.id.clone(), kind, &phases);
            if let Some(sh) = &entry.shunt {
                spec = spec.with_shunt(parse_block(&format!("{at}.shunt"), sh, phases.len())?);
            }
            nodes.push(spec);
        }

        let mut branches = Vec::with_capacity(self.branches.len());
        for (k, entry) in self.branches.iter().enumerate() {
            let at = format!("branches[{k}] ({}-{})", entry.from, entry.to);
            let phases = parse_phases(&at, &entry.phases)?;
            let n = phases.len();
            let mut b = BranchSpec::new(
                entry.from.clone(),
                entry.to.clone(),
                &phases,
                parse_block(&format!("{at}.series"), &entry.series, n)?,
            );
            if let Some(sh) = &entry.shunt_from {
                b.shunt_from = Some(parse_block(&format!("{at}.shunt_from"), sh, n)?);
            }
            if let Some(sh) = &entry.shunt_to {
                b.shunt_to = Some(parse_block(&format!("{at}.shunt_to"), sh, n)?);
            }
            branches.push(b);
        }

        let slack_voltage = match &self.slack.voltage {
            Some(v) => {
                check_finite("slack.voltage", v)?;
                [to_complex(v[0]), to_complex(v[1]), to_complex(v[2])]
            }
            None => default_slack_voltage(),
        };
        let network =
            NetworkModel::with_slack_voltage(nodes, branches, slack_voltage).map_err(|source| {
                FeederError::Network {
                    at: "network".into(),
                    source,
                }
            })?;

        let mut loads = LoadSet::new();
        for (k, entry) in self.loads.wye.iter().enumerate() {
            let at = format!("loads.wye[{k}] ({})", entry.node);
            check_finite(&at, &[entry.s, entry.i, entry.y])?;
            let phase = parse_phase(&at, &entry.phase)?;
            let zip = Zip::new(
                to_complex(entry.s),
                to_complex(entry.i),
                to_complex(entry.y),
            );
            loads
                .add_wye(&network, &entry.node, phase, zip)
                .map_err(|source| FeederError::Load { at, source })?;
        }
        for (k, entry) in self.loads.delta.iter().enumerate() {
            let at = format!("loads.delta[{k}] ({})", entry.node);
            check_finite(&at, &[entry.s, entry.i, entry.y])?;
            let p = parse_phase(&at, &entry.pair[0])?;
            let q = parse_phase(&at, &entry.pair[1])?;
            let zip = Zip::new(
                to_complex(entry.s),
                to_complex(entry.i),
                to_complex(entry.y),
            );
            loads
                .add_delta(&network, &entry.node, (p, q), zip)
                .map_err(|source| FeederError::Load { at, source })?;
        }
        Ok((network, loads))
    }

    /// Serializable form of a model. The slack voltage is always written out.
    pub fn from_model(
        network: &NetworkModel,
        loads: &LoadSet,
        base: Option<BaseInfo>,
    ) -> FeederFile {
        let slack = network.node(network.slack());
        let vs = network.slack_voltage();
        let nodes = network
            .nodes()
            .iter()
            .filter(|n| n.kind != ConnectionKind::Slack)
            .map(|n| NodeEntry {
                id: n.id.clone(),
                kind: match n.kind {
                    ConnectionKind::Delta => "delta",
                    _ => "wye",
                }
                .to_string(),
                phases: phase_labels(n.phases.as_slice()),
                shunt: n.shunt.as_ref().map(block_entries),
            })
            .collect();
        let branches = network
            .branches()
            .iter()
            .map(|b| BranchEntry {
                from: b.from.clone(),
                to: b.to.clone(),
                phases: phase_labels(b.phases.as_slice()),
                series: block_entries(&b.series),
                shunt_from: b.shunt_from.as_ref().map(block_entries),
                shunt_to: b.shunt_to.as_ref().map(block_entries),
            })
            .collect();
        let wye = loads
            .wye_entries()
            .map(|(n, p, z)| WyeLoadEntry {
                node: network.node(n).id.clone(),
                phase: p.label().to_string(),
                s: to_pair(z.s),
                i: to_pair(z.i),
                y: to_pair(z.y),
            })
            .collect();
        let delta = loads
            .delta_entries()
            .map(|(n, pair, z)| DeltaLoadEntry {
                node: network.node(n).id.clone(),
                pair: [
                    pair.first().label().to_string(),
                    pair.second().label().to_string(),
                ],
                s: to_pair(z.s),
                i: to_pair(z.i),
                y: to_pair(z.y),
            })
            .collect();
        FeederFile {
            schema_version: SCHEMA_VERSION.to_string(),
            base,
            slack: SlackEntry {
                id: slack.id.clone(),
                voltage: Some([to_pair(vs[0]), to_pair(vs[1]), to_pair(vs[2])]),
            },
            nodes,
            branches,
            loads: LoadsEntry { wye, delta },
        }
    }
}

pub fn parse_feeder(path: &Path) -> Result<(NetworkModel, LoadSet), FeederError> {
    FeederFile::read(path)?.to_model()
}

/// `{"schema_version": "1", "values": [[re, im], ...]}`, used for custom `Λ` and initial voltages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFile {
    pub schema_version: String,
    pub values: Vec<ComplexPair>,
}

impl VectorFile {
    pub fn new(values: &[Complex64]) -> VectorFile {
        VectorFile {
            schema_version: SCHEMA_VERSION.to_string(),
            values: values.iter().copied().map(to_pair).collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Vec<Complex64>, FeederError> {
        let text = fs::read_to_string(path).map_err(|source| FeederError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: VectorFile = serde_json::from_str(&text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(FeederError::SchemaVersion(file.schema_version));
        }
        check_finite("values", &file.values)?;
        Ok(file.values.into_iter().map(to_complex).collect())
    }

    pub fn emit(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("vector serializes");
        s.push('\n');
        s
    }
}
