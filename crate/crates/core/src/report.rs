//! JSON reports for `solve` and `certify`.
//!
//! Both re-parse under their own schema and re-emit byte-identically.

use serde::{Deserialize, Serialize};

use crate::certificate::{CertificateResult, ConditionCoefficients};
use crate::feeder::{ComplexPair, SCHEMA_VERSION};
use crate::network::NetworkModel;
use crate::solver::{empirical_rate, SolveConfig, SolveStatus, SolveTrace};

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn emit<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoltageEntry {
    pub node: String,
    pub phase: String,
    pub v: ComplexPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfigEcho {
    pub lambda: String,
    pub init: String,
    pub tol: f64,
    pub max_iters: usize,
    pub divergence_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveReport {
    pub schema_version: String,
    pub status: String,
    pub iterations: usize,
    /// `‖v[t+1] - v[t]‖_∞` per step.
    pub diffs: Vec<f64>,
    pub residual: Option<f64>,
    pub empirical_rate: Option<f64>,
    pub non_contracting_tail: bool,
    pub singular_at: Option<usize>,
    /// Final iterate, the solution when converged.
    pub voltages: Vec<VoltageEntry>,
    pub config: SolveConfigEcho,
}

impl SolveReport {
    pub fn new(network: &NetworkModel, trace: &SolveTrace, cfg: &SolveConfig) -> SolveReport {
        let index = network.index();
        let voltages = trace
            .last()
            .iter()
            .enumerate()
            .map(|(k, v)| VoltageEntry {
                node: network.node(index.node_of(k)).id.clone(),
                phase: index.phase_of(k).label().to_string(),
                v: [v.re, v.im],
            })
            .collect();
        SolveReport {
            schema_version: SCHEMA_VERSION.to_string(),
            status: trace.status.label().to_string(),
            iterations: trace.iterations(),
            diffs: trace
                .diffs
                .iter()
                .map(|&d| if d.is_finite() { d } else { f64::MAX })
                .collect(),
            residual: trace.residual.and_then(finite),
            empirical_rate: empirical_rate(trace).ok().and_then(finite),
            non_contracting_tail: trace.non_contracting_tail(),
            singular_at: trace.singular_at,
            voltages,
            config: SolveConfigEcho {
                lambda: cfg.lambda.label().to_string(),
                init: cfg.initial.label().to_string(),
                tol: cfg.tol,
                max_iters: cfg.max_iters,
                divergence_threshold: cfg.divergence_threshold,
            },
        }
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged.label()
    }

    pub fn to_json(&self) -> String {
        emit(self)
    }

    pub fn from_json(text: &str) -> Result<SolveReport, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsReport {
    pub a1: f64,
    pub a2: f64,
    #[serde(rename = "A_Y")]
    pub a_y: f64,
    #[serde(rename = "A_D")]
    pub a_d: f64,
    #[serde(rename = "B_Y")]
    pub b_y: f64,
    #[serde(rename = "B_D")]
    pub b_d: f64,
    #[serde(rename = "C_Y")]
    pub c_y: f64,
    #[serde(rename = "C_D")]
    pub c_d: f64,
    #[serde(rename = "D_Y")]
    pub d_y: f64,
    #[serde(rename = "D_D")]
    pub d_d: f64,
}

impl From<&ConditionCoefficients> for CoefficientsReport {
    fn from(k: &ConditionCoefficients) -> Self {
        CoefficientsReport {
            a1: k.a1,
            a2: k.a2,
            a_y: k.a_y,
            a_d: k.a_d,
            b_y: k.b_y,
            b_d: k.b_d,
            c_y: k.c_y,
            c_d: k.c_d,
            d_y: k.d_y,
            d_d: k.d_d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertConfigEcho {
    pub lambda: String,
    pub curve_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertReport {
    pub schema_version: String,
    pub feasible: bool,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub alpha_at_rmin: Option<f64>,
    pub coefficients: CoefficientsReport,
    pub alpha_curve: Vec<[f64; 2]>,
    /// All feasible intervals, the first of which is `[r_min, r_max]`.
    pub intervals: Vec<[f64; 2]>,
    pub config: CertConfigEcho,
}

impl CertReport {
    pub fn new(result: &CertificateResult, lambda_label: &str, curve_samples: usize) -> CertReport {
        CertReport {
            schema_version: SCHEMA_VERSION.to_string(),
            feasible: result.feasible,
            r_min: result.r_min,
            r_max: result.r_max,
            alpha_at_rmin: result.alpha_at_rmin,
            coefficients: CoefficientsReport::from(&result.coefficients),
            alpha_curve: result.alpha_curve.iter().map(|&(r, a)| [r, a]).collect(),
            intervals: result.intervals.iter().map(|&(a, b)| [a, b]).collect(),
            config: CertConfigEcho {
                lambda: lambda_label.to_string(),
                curve_samples,
            },
        }
    }

    pub fn to_json(&self) -> String {
        emit(self)
    }

    pub fn from_json(text: &str) -> Result<CertReport, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::certify;
    use crate::reference::{three_node, two_node, ThreeNodeParams, TwoNodeParams};
    use crate::solver::{solve, LambdaChoice};
    use crate::system::SystemMatrices;

    #[test]
    fn cert_report_round_trip() {
        for theta in [0.05, 0.12] {
            let (net, loads) = three_node(&ThreeNodeParams { theta }).unwrap();
            let res = certify(&net, &loads, &LambdaChoice::Identity, 50).unwrap();
            let text = CertReport::new(&res, "identity", 50).to_json();
            let back = CertReport::from_json(&text).unwrap();
            assert_eq!(back.to_json(), text);
            assert_eq!(back.feasible, theta < 0.1);
        }
    }

    #[test]
    fn cert_report_field_names() {
        let (net, loads) = three_node(&ThreeNodeParams { theta: 0.05 }).unwrap();
        let res = certify(&net, &loads, &LambdaChoice::Identity, 5).unwrap();
        let value: serde_json::Value =
            serde_json::from_str(&CertReport::new(&res, "identity", 5).to_json()).unwrap();
        for key in [
            "feasible",
            "r_min",
            "r_max",
            "alpha_at_rmin",
            "coefficients",
            "alpha_curve",
        ] {
            assert!(value.get(key).is_some(), "{key}");
        }
        for key in [
            "a1", "a2", "A_Y", "A_D", "B_Y", "B_D", "C_Y", "C_D", "D_Y", "D_D",
        ] {
            assert!(value["coefficients"].get(key).is_some(), "{key}");
        }
        assert_eq!(value["alpha_curve"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn solve_report_round_trip() {
        for s in [-0.5, -0.1] {
            let (net, loads) = two_node(&TwoNodeParams::with_s_l(s)).unwrap();
            let sys = SystemMatrices::new(&net, &loads).unwrap();
            let cfg = SolveConfig::default();
            let trace = solve(&net, &sys, &loads, &cfg).unwrap();
            let text = SolveReport::new(&net, &trace, &cfg).to_json();
            let back = SolveReport::from_json(&text).unwrap();
            assert_eq!(back.to_json(), text);
            assert_eq!(back.voltages.len(), 3);
            assert_eq!(back.voltages[1].phase, "b");
        }
    }
}
