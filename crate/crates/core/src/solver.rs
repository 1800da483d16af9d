//! Z-Bus fixed-point iteration `v <- Z [i_PQ(v) + i_I(v)] + w`.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{inf_norm_diff, inf_norm_vector};
use crate::loads::{LoadError, LoadSet};
use crate::network::NetworkModel;
use crate::system::SystemMatrices;

/// Nodal balance tolerance a converged solution must meet.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;
/// Slack on the ball radius when testing membership.
pub const BALL_SLACK: f64 = 1e-12;
/// Step differences below this are roundoff-dominated and excluded from rate estimates.
pub const RATE_NOISE_FLOOR: f64 = 1e-10;
/// Geometric-mean ratio at or above which a tail is labelled non-contracting.
pub const NON_CONTRACTING_RATIO: f64 = 0.999;
const TAIL_WINDOW: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("need at least 3 iterates to estimate a rate, have {0}")]
    InsufficientIterates(usize),
    #[error("no step difference above the noise floor")]
    NoRateData,
    #[error("Λ must have nonzero diagonal entries (index {0})")]
    SingularLambda(usize),
    #[error("expected a vector of length {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

/// Diagonal scaling `Λ` relating `v = Λ u`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LambdaChoice {
    #[default]
    Identity,
    /// `Λ = diag(w)`, which moves the ball center to the all-ones vector.
    DiagW,
    Custom(Vec<Complex64>),
}

impl LambdaChoice {
    pub fn label(&self) -> &'static str {
        match self {
            LambdaChoice::Identity => "identity",
            LambdaChoice::DiagW => "diag-w",
            LambdaChoice::Custom(_) => "custom",
        }
    }

    /// Diagonal entries for a given system; every entry must be nonzero.
    pub fn resolve(&self, system: &SystemMatrices) -> Result<Vec<Complex64>, SolveError> {
        let j = system.dim();
        let entries = match self {
            LambdaChoice::Identity => vec![Complex64::new(1.0, 0.0); j],
            LambdaChoice::DiagW => system.w.clone(),
            LambdaChoice::Custom(d) => {
                if d.len() != j {
                    return Err(SolveError::Length {
                        expected: j,
                        got: d.len(),
                    });
                }
                d.clone()
            }
        };
        if let Some(k) = entries
            .iter()
            .position(|x| x.norm() == 0.0 || !x.norm().is_finite())
        {
            return Err(SolveError::SingularLambda(k));
        }
        Ok(entries)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialVoltage {
    /// `v[0] = w`
    #[default]
    NoLoad,
    /// Every node starts at the slack voltage restricted to its phases.
    Flat,
    Custom(Vec<Complex64>),
}

impl InitialVoltage {
    pub fn label(&self) -> &'static str {
        match self {
            InitialVoltage::NoLoad => "no-load",
            InitialVoltage::Flat => "flat",
            InitialVoltage::Custom(_) => "custom",
        }
    }

    pub fn resolve(
        &self,
        network: &NetworkModel,
        system: &SystemMatrices,
    ) -> Result<Vec<Complex64>, SolveError> {
        match self {
            InitialVoltage::NoLoad => Ok(system.w.clone()),
            InitialVoltage::Flat => Ok(network.flat_voltage()),
            InitialVoltage::Custom(v) if v.len() == system.dim() => Ok(v.clone()),
            InitialVoltage::Custom(v) => Err(SolveError::Length {
                expected: system.dim(),
                got: v.len(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub divergence_threshold: f64,
    pub initial: InitialVoltage,
    pub lambda: LambdaChoice,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iters: 100,
            tol: 1e-10,
            divergence_threshold: 1e6,
            initial: InitialVoltage::NoLoad,
            lambda: LambdaChoice::Identity,
        }
    }
}

impl SolveConfig {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol > 0.0) {
            return Err(SolveError::Config("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(SolveError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxItersReached,
    Diverged,
    SingularVoltage,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxItersReached => "max_iters_reached",
            SolveStatus::Diverged => "diverged",
            SolveStatus::SingularVoltage => "singular_voltage",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// `v[0], v[1], ...`
    pub iterates: Vec<Vec<Complex64>>,
    /// `‖v[t+1] - v[t]‖_∞`
    pub diffs: Vec<f64>,
    /// `‖Λ^{-1}(v[t+1] - v[t])‖_∞`
    pub scaled_diffs: Vec<f64>,
    /// `diffs[t] / diffs[t-1]`, in the scaled norm.
    pub empirical_ratios: Vec<f64>,
    pub status: SolveStatus,
    pub solution: Option<Vec<Complex64>>,
    /// `‖Y v + Y_NS v_S - i(v)‖_∞` at the solution.
    pub residual: Option<f64>,
    /// Iterate at which a singular load voltage was met.
    pub singular_at: Option<usize>,
    pub lambda: Vec<Complex64>,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn last(&self) -> &[Complex64] {
        self.iterates.last().expect("trace always holds v[0]")
    }

    /// Geometric mean of the last ten ratios is at least 0.999.
    pub fn non_contracting_tail(&self) -> bool {
        let ratios: Vec<f64> = self
            .diffs
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect();
        if ratios.len() < TAIL_WINDOW {
            return false;
        }
        let tail = &ratios[ratios.len() - TAIL_WINDOW..];
        if tail.iter().any(|&r| r <= 0.0) {
            return false;
        }
        let log_mean = tail.iter().map(|r| r.ln()).sum::<f64>() / TAIL_WINDOW as f64;
        log_mean.exp() >= NON_CONTRACTING_RATIO
    }

    /// Iterates map onto CSV rows `t, diff_inf_norm, empirical_ratio, max_abs_voltage`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,diff_inf_norm,empirical_ratio,max_abs_voltage\n");
        for (t, v) in self.iterates.iter().enumerate() {
            let diff = if t == 0 {
                String::new()
            } else {
                self.diffs[t - 1].to_string()
            };
            let ratio = if t >= 2 {
                let prev = self.diffs[t - 2];
                if prev > 0.0 {
                    (self.diffs[t - 1] / prev).to_string()
                } else {
                    String::new()
                }
            } else {
                String::new()
            };
            out.push_str(&format!("{t},{diff},{ratio},{}\n", inf_norm_vector(v)));
        }
        out
    }
}

/// One Z-Bus step and its scaled form `T(u)`.
#[derive(Debug, Clone, Copy)]
pub struct ZBusMap<'a> {
    pub network: &'a NetworkModel,
    pub system: &'a SystemMatrices,
    pub loads: &'a LoadSet,
}

impl<'a> ZBusMap<'a> {
    pub fn new(
        network: &'a NetworkModel,
        system: &'a SystemMatrices,
        loads: &'a LoadSet,
    ) -> ZBusMap<'a> {
        ZBusMap {
            network,
            system,
            loads,
        }
    }

    /// `Z [i_PQ(v) + i_I(v)] + w`
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>, LoadError> {
        let currents = self.loads.injection(self.network, v)?;
        let zi = self
            .system
            .z
            .matvec(&currents.nonlinear())
            .expect("length J");
        Ok(zi.iter().zip(&self.system.w).map(|(a, b)| a + b).collect())
    }

    /// `T(u) = Λ^{-1} Z [i_PQ(Λu) + i_I(Λu)] + Λ^{-1} w`
    pub fn apply_scaled(
        &self,
        u: &[Complex64],
        lambda: &[Complex64],
    ) -> Result<Vec<Complex64>, LoadError> {
        let v: Vec<Complex64> = u.iter().zip(lambda).map(|(a, l)| a * l).collect();
        let currents = self.loads.injection(self.network, &v)?;
        let zi = self
            .system
            .z
            .matvec(&currents.nonlinear())
            .expect("length J");
        Ok(zi
            .iter()
            .zip(&self.system.w)
            .zip(lambda)
            .map(|((a, b), l)| a / l + b / l)
            .collect())
    }

    /// Nodal balance mismatch `‖Y v + Y_NS v_S - i(v)‖_∞` from direct ZIP evaluation.
    pub fn residual(&self, v: &[Complex64]) -> Result<f64, LoadError> {
        let injected = self.loads.injection(self.network, v)?.total();
        let network_side = self.system.bus.network_injection(v, &self.system.v_s);
        Ok(inf_norm_diff(&network_side, &injected))
    }
}

fn scaled_norm(d: &[Complex64], lambda: &[Complex64]) -> f64 {
    d.iter()
        .zip(lambda)
        .map(|(x, l)| (x / l).norm())
        .fold(0.0, f64::max)
}

pub fn solve(
    network: &NetworkModel,
    system: &SystemMatrices,
    loads: &LoadSet,
    cfg: &SolveConfig,
) -> Result<SolveTrace, SolveError> {
    cfg.validate()?;
    let lambda = cfg.lambda.resolve(system)?;
    let v0 = cfg.initial.resolve(network, system)?;
    let map = ZBusMap::new(network, system, loads);

    let mut trace = SolveTrace {
        iterates: vec![v0],
        diffs: Vec::new(),
        scaled_diffs: Vec::new(),
        empirical_ratios: Vec::new(),
        status: SolveStatus::MaxItersReached,
        solution: None,
        residual: None,
        singular_at: None,
        lambda,
    };

    for t in 0..cfg.max_iters {
        let current = trace.last().to_vec();
        let next = match map.apply(&current) {
            Ok(v) => v,
            Err(_) => {
                trace.status = SolveStatus::SingularVoltage;
                trace.singular_at = Some(t);
                return Ok(trace);
            }
        };
        let step: Vec<Complex64> = next.iter().zip(&current).map(|(a, b)| a - b).collect();
        let diff = inf_norm_vector(&step);
        let scaled = scaled_norm(&step, &trace.lambda);
        if let Some(&prev) = trace.scaled_diffs.last() {
            trace
                .empirical_ratios
                .push(if prev > 0.0 { scaled / prev } else { f64::NAN });
        }
        trace.diffs.push(diff);
        trace.scaled_diffs.push(scaled);
        let magnitude = inf_norm_vector(&next);
        trace.iterates.push(next);

        if !magnitude.is_finite() || magnitude > cfg.divergence_threshold {
            trace.status = SolveStatus::Diverged;
            return Ok(trace);
        }
        if diff <= cfg.tol {
            let solution = trace.last().to_vec();
            trace.residual = map.residual(&solution).ok();
            trace.solution = Some(solution);
            trace.status = SolveStatus::Converged;
            return Ok(trace);
        }
    }
    Ok(trace)
}

/// True iff `‖Λ^{-1}(v - w)‖_∞ ≤ R` (with a `1e-12` slack).
pub fn membership_in_ball(
    v: &[Complex64],
    w: &[Complex64],
    lambda: &[Complex64],
    radius: f64,
) -> bool {
    ball_distance(v, w, lambda) <= radius + BALL_SLACK
}

/// `‖Λ^{-1}(v - w)‖_∞`
pub fn ball_distance(v: &[Complex64], w: &[Complex64], lambda: &[Complex64]) -> f64 {
    v.iter()
        .zip(w)
        .zip(lambda)
        .map(|((a, b), l)| ((a - b) / l).norm())
        .fold(0.0, f64::max)
}

/// Largest successive-difference ratio in the `Λ`-scaled norm.
///
/// Ratios whose denominator sits below [`RATE_NOISE_FLOOR`] are skipped,
/// since near convergence both differences are dominated by roundoff.
pub fn empirical_rate(trace: &SolveTrace) -> Result<f64, SolveError> {
    empirical_rate_from_diffs(trace.iterates.len(), &trace.scaled_diffs)
}

pub fn empirical_rate_from_diffs(iterates: usize, scaled_diffs: &[f64]) -> Result<f64, SolveError> {
    if iterates < 3 || scaled_diffs.len() < 2 {
        return Err(SolveError::InsufficientIterates(iterates));
    }
    scaled_diffs
        .windows(2)
        .filter(|w| w[0] > RATE_NOISE_FLOOR)
        .map(|w| w[1] / w[0])
        .reduce(f64::max)
        .ok_or(SolveError::NoRateData)
}
