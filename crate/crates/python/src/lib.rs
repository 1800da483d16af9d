//! Python bindings: feeders, the Z-Bus solver and the contraction certificate.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use zbuscert::certificate::{certify_system, CertificateResult};
use zbuscert::feeder::{parse_feeder, FeederFile};
use zbuscert::loads::LoadSet;
use zbuscert::network::{NetworkModel, Phase};
use zbuscert::reference::{
    random_small_network, three_node, two_node, ThreeNodeParams, TwoNodeParams,
};
use zbuscert::report::{CertReport, SolveReport};
use zbuscert::solver::{
    empirical_rate, solve, InitialVoltage, LambdaChoice, SolveConfig, SolveTrace,
};
use zbuscert::system::SystemMatrices;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// `"identity"`, `"diag-w"`, or a list of complex diagonal entries.
#[derive(FromPyObject)]
enum LambdaArg {
    Name(String),
    Values(Vec<Complex64>),
}

impl LambdaArg {
    fn choice(self) -> PyResult<LambdaChoice> {
        match self {
            LambdaArg::Name(s) if s == "identity" => Ok(LambdaChoice::Identity),
            LambdaArg::Name(s) if s == "diag-w" => Ok(LambdaChoice::DiagW),
            LambdaArg::Name(s) => Err(value_error(format!("unknown lambda {s:?}"))),
            LambdaArg::Values(v) => Ok(LambdaChoice::Custom(v)),
        }
    }
}

/// `"no-load"`, `"flat"`, or a list of complex initial voltages.
#[derive(FromPyObject)]
enum InitArg {
    Name(String),
    Values(Vec<Complex64>),
}

impl InitArg {
    fn choice(self) -> PyResult<InitialVoltage> {
        match self {
            InitArg::Name(s) if s == "no-load" => Ok(InitialVoltage::NoLoad),
            InitArg::Name(s) if s == "flat" => Ok(InitialVoltage::Flat),
            InitArg::Name(s) => Err(value_error(format!("unknown init {s:?}"))),
            InitArg::Values(v) => Ok(InitialVoltage::Custom(v)),
        }
    }
}

/// A validated feeder: network model plus ZIP loads.
#[pyclass(module = "zbuscert_py", skip_from_py_object)]
#[derive(Clone)]
struct Feeder {
    network: NetworkModel,
    loads: LoadSet,
}

impl Feeder {
    fn system(&self) -> PyResult<SystemMatrices> {
        SystemMatrices::new(&self.network, &self.loads).map_err(value_error)
    }
}

#[pymethods]
impl Feeder {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Feeder> {
        let (network, loads) = FeederFile::parse(text)
            .and_then(|f| f.to_model())
            .map_err(value_error)?;
        Ok(Feeder { network, loads })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Feeder> {
        let (network, loads) = parse_feeder(&path).map_err(value_error)?;
        Ok(Feeder { network, loads })
    }

    #[staticmethod]
    #[pyo3(signature = (s_l, y_t=0.5, y_l=0.5, i_l=0.5))]
    fn two_node(s_l: f64, y_t: f64, y_l: f64, i_l: f64) -> PyResult<Feeder> {
        let (network, loads) =
            two_node(&TwoNodeParams { y_t, y_l, i_l, s_l }).map_err(value_error)?;
        Ok(Feeder { network, loads })
    }

    #[staticmethod]
    fn three_node(theta: f64) -> PyResult<Feeder> {
        let (network, loads) = three_node(&ThreeNodeParams { theta }).map_err(value_error)?;
        Ok(Feeder { network, loads })
    }

    #[staticmethod]
    #[pyo3(signature = (seed, node_count=3, delta_fraction=0.5))]
    fn random(seed: u64, node_count: usize, delta_fraction: f64) -> PyResult<Feeder> {
        let (network, loads) =
            random_small_network(seed, node_count, delta_fraction).map_err(value_error)?;
        Ok(Feeder { network, loads })
    }

    fn to_json(&self) -> String {
        FeederFile::from_model(&self.network, &self.loads, None).emit()
    }

    /// Number of non-slack node phases.
    #[getter]
    fn dim(&self) -> usize {
        self.network.dim()
    }

    /// `(node, phase)` label for every linear index.
    fn labels(&self) -> Vec<(String, String)> {
        let index = self.network.index();
        (0..index.len())
            .map(|k| {
                (
                    self.network.node(index.node_of(k)).id.clone(),
                    index.phase_of(k).label().to_string(),
                )
            })
            .collect()
    }

    fn no_load_voltage(&self) -> PyResult<Vec<Complex64>> {
        Ok(self.system()?.w)
    }

    /// Copy with constant-power and constant-current loads multiplied by `factor`.
    fn scaled(&self, factor: f64) -> Feeder {
        Feeder {
            network: self.network.clone(),
            loads: self.loads.scaled(factor),
        }
    }

    #[pyo3(signature = (lambda_=None, init=None, tol=1e-10, max_iters=100))]
    fn solve(
        &self,
        lambda_: Option<LambdaArg>,
        init: Option<InitArg>,
        tol: f64,
        max_iters: usize,
    ) -> PyResult<SolveResult> {
        let cfg = SolveConfig {
            tol,
            max_iters,
            lambda: match lambda_ {
                Some(l) => l.choice()?,
                None => LambdaChoice::Identity,
            },
            initial: match init {
                Some(i) => i.choice()?,
                None => InitialVoltage::NoLoad,
            },
            ..SolveConfig::default()
        };
        let system = self.system()?;
        let trace = solve(&self.network, &system, &self.loads, &cfg).map_err(value_error)?;
        Ok(SolveResult::new(&self.network, trace, &cfg))
    }

    #[pyo3(signature = (lambda_=None, curve_samples=200))]
    fn certify(&self, lambda_: Option<LambdaArg>, curve_samples: usize) -> PyResult<CertResult> {
        let lambda = match lambda_ {
            Some(l) => l.choice()?,
            None => LambdaChoice::Identity,
        };
        let system = self.system()?;
        let result = certify_system(&self.network, &system, &self.loads, &lambda, curve_samples)
            .map_err(value_error)?;
        Ok(CertResult {
            report: CertReport::new(&result, lambda.label(), curve_samples),
            result,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Feeder(nodes={}, branches={}, dim={})",
            self.network.nodes().len(),
            self.network.branches().len(),
            self.network.dim()
        )
    }
}

#[pyclass(module = "zbuscert_py", get_all)]
struct SolveResult {
    status: String,
    converged: bool,
    iterations: usize,
    diffs: Vec<f64>,
    empirical_ratios: Vec<f64>,
    residual: Option<f64>,
    empirical_rate: Option<f64>,
    non_contracting_tail: bool,
    solution: Option<Vec<Complex64>>,
    last_iterate: Vec<Complex64>,
    report_json: String,
}

impl SolveResult {
    fn new(network: &NetworkModel, trace: SolveTrace, cfg: &SolveConfig) -> SolveResult {
        let report = SolveReport::new(network, &trace, cfg);
        SolveResult {
            status: trace.status.label().to_string(),
            converged: report.converged(),
            iterations: trace.iterations(),
            empirical_rate: empirical_rate(&trace).ok(),
            non_contracting_tail: trace.non_contracting_tail(),
            residual: trace.residual,
            last_iterate: trace.last().to_vec(),
            diffs: trace.diffs,
            empirical_ratios: trace.empirical_ratios,
            solution: trace.solution,
            report_json: report.to_json(),
        }
    }
}

#[pymethods]
impl SolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(status={:?}, iterations={})",
            self.status, self.iterations
        )
    }
}

#[pyclass(module = "zbuscert_py")]
struct CertResult {
    result: CertificateResult,
    report: CertReport,
}

#[pymethods]
impl CertResult {
    #[getter]
    fn feasible(&self) -> bool {
        self.result.feasible
    }

    #[getter]
    fn r_min(&self) -> Option<f64> {
        self.result.r_min
    }

    #[getter]
    fn r_max(&self) -> Option<f64> {
        self.result.r_max
    }

    #[getter]
    fn alpha_at_rmin(&self) -> Option<f64> {
        self.result.alpha_at_rmin
    }

    #[getter]
    fn intervals(&self) -> Vec<(f64, f64)> {
        self.result.intervals.clone()
    }

    #[getter]
    fn alpha_curve(&self) -> Vec<(f64, f64)> {
        self.result.alpha_curve.clone()
    }

    #[getter]
    fn coefficients(&self) -> BTreeMap<&'static str, f64> {
        let k = &self.result.coefficients;
        BTreeMap::from([
            ("a1", k.a1),
            ("a2", k.a2),
            ("A_Y", k.a_y),
            ("A_D", k.a_d),
            ("B_Y", k.b_y),
            ("B_D", k.b_d),
            ("C_Y", k.c_y),
            ("C_D", k.c_d),
            ("D_Y", k.d_y),
            ("D_D", k.d_d),
        ])
    }

    /// Contraction modulus bound at radius `r`.
    fn alpha_at(&self, r: f64) -> f64 {
        self.result.alpha_at(r)
    }

    fn to_json(&self) -> String {
        self.report.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "CertResult(feasible={}, r_min={:?}, r_max={:?})",
            self.result.feasible, self.result.r_min, self.result.r_max
        )
    }
}

/// Cyclic phase successor: a -> b -> c -> a.
#[pyfunction]
fn right_shift(phase: &str) -> PyResult<&'static str> {
    Phase::parse(phase)
        .map(|p| p.right_shift().label())
        .ok_or_else(|| value_error(format!("unknown phase {phase:?}")))
}

/// Larger real root of the two-node voltage quadratic, if real and nonnegative.
#[pyfunction]
#[pyo3(signature = (s_l, y_t=0.5, y_l=0.5, i_l=0.5))]
fn two_node_analytic(s_l: f64, y_t: f64, y_l: f64, i_l: f64) -> Option<f64> {
    TwoNodeParams { y_t, y_l, i_l, s_l }.analytic_solution()
}

/// Z-Bus load flow for unbalanced three-phase feeders with contraction certificates.
#[pymodule]
mod zbuscert_py {
    #[pymodule_export]
    use super::{right_shift, two_node_analytic, CertResult, Feeder, SolveResult};
}
