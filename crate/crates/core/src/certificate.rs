//! Sufficient conditions for the Z-Bus map to contract on a ball.
//!
//! For a radius `R` around the scaled no-load voltage `Λ^{-1} w`, four
//! conditions are checked:
//!
//! * C1: `1 - R λ̄ / w̲ > 0` keeps line-to-neutral voltages away from zero,
//! * C2: `1 - 2R λ̄ / ρ̲ > 0` does the same for delta line-to-line voltages,
//! * C3: the image of the ball stays inside the ball (self-mapping),
//! * C4: the Lipschitz bound of the map on the ball is below one.
//!
//! All four are rational in `R` with coefficients that depend only on the
//! feeder, so the feasible radii are found once per network by a dense scan
//! followed by bisection of every boundary.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::loads::{IndexedLoads, LoadSet};
use crate::network::NetworkModel;
use crate::solver::{LambdaChoice, SolveError};
use crate::system::{SystemError, SystemMatrices};

pub const SCAN_POINTS: usize = 100_000;
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_CURVE_SAMPLES: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error(
        "certificate undefined: |w| = 0 at index {index} carrying constant-power/current load"
    )]
    ZeroNoLoadVoltage { index: usize },
    #[error("certificate undefined: zero no-load line-to-line voltage at delta index {index}")]
    ZeroLineToLine { index: usize },
    #[error(transparent)]
    Lambda(#[from] SolveError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Feeder aggregates entering the four conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateQuantities {
    /// `min_k |w_k|`
    pub w_min: f64,
    /// `max_k |λ_k|`
    pub lambda_max: f64,
    /// `min_{k ∈ J_Δ} |e_k^T w_n|`, `+∞` when there are no delta indices.
    pub rho_min: f64,
    pub lambda: Vec<Complex64>,
    pub s_y: Vec<Complex64>,
    pub i_y: Vec<Complex64>,
    pub w_y: Vec<Complex64>,
    /// Columns of `Z` at wye indices, `J × |J_Y|`.
    pub z_y: CMatrix,
    pub lambda_y: Vec<Complex64>,
    pub s_d: Vec<Complex64>,
    pub i_d: Vec<Complex64>,
    /// `e_k^T w_n` per delta index.
    pub w_d: Vec<Complex64>,
    /// `Z_{•k} - Z_{•k'}` for paired delta indices, zero columns otherwise.
    pub z_d: CMatrix,
    /// Per-node maximum of `|λ_l|`, one entry per delta index.
    pub lambda_d: Vec<f64>,
    /// Whether any delta index carries constant-power or constant-current load.
    pub delta_active: bool,
}

pub fn compute_quantities(
    network: &NetworkModel,
    system: &SystemMatrices,
    loads: &IndexedLoads,
    lambda: &LambdaChoice,
) -> Result<CertificateQuantities, CertificateError> {
    let lambda = lambda.resolve(system)?;
    let index = network.index();
    let j = index.len();
    let wye = index.wye_indices();
    let delta = index.delta_indices();

    let w_min = system
        .w
        .iter()
        .map(|x| x.norm())
        .fold(f64::INFINITY, f64::min);
    let lambda_max = lambda.iter().map(|x| x.norm()).fold(0.0, f64::max);

    for &k in wye {
        let loaded = loads.power[k] != Complex64::new(0.0, 0.0)
            || loads.current[k] != Complex64::new(0.0, 0.0);
        if loaded && system.w[k].norm() == 0.0 {
            return Err(CertificateError::ZeroNoLoadVoltage { index: k });
        }
    }

    let mut z_y = CMatrix::zeros(j, wye.len());
    for (col, &k) in wye.iter().enumerate() {
        for row in 0..j {
            z_y[(row, col)] = system.z[(row, k)];
        }
    }

    let mut z_d = CMatrix::zeros(j, delta.len());
    let mut w_d = Vec::with_capacity(delta.len());
    let mut lambda_d = Vec::with_capacity(delta.len());
    let mut rho_min = f64::INFINITY;
    for (col, &k) in delta.iter().enumerate() {
        let n = index.node_of(k);
        let pairing = loads.pairing[k].expect("delta index has a pairing");
        let w_n = network.node_voltage(&system.w, n);
        let wd = pairing.selector.apply(w_n);
        rho_min = rho_min.min(wd.norm());
        w_d.push(wd);
        let node_max = index
            .node_indices(n)
            .map(|l| lambda[l].norm())
            .fold(0.0, f64::max);
        lambda_d.push(node_max);
        if pairing.paired {
            let partner = index
                .lin(n, pairing.partner)
                .expect("partner phase available");
            for row in 0..j {
                z_d[(row, col)] = system.z[(row, k)] - system.z[(row, partner)];
            }
        }
        let loaded = loads.power[k] != Complex64::new(0.0, 0.0)
            || loads.current[k] != Complex64::new(0.0, 0.0);
        if loaded && wd.norm() == 0.0 {
            return Err(CertificateError::ZeroLineToLine { index: k });
        }
    }

    Ok(CertificateQuantities {
        w_min,
        lambda_max,
        rho_min,
        s_y: wye.iter().map(|&k| loads.power[k]).collect(),
        i_y: wye.iter().map(|&k| loads.current[k]).collect(),
        w_y: wye.iter().map(|&k| system.w[k]).collect(),
        z_y,
        lambda_y: wye.iter().map(|&k| lambda[k]).collect(),
        s_d: delta.iter().map(|&k| loads.power[k]).collect(),
        i_d: delta.iter().map(|&k| loads.current[k]).collect(),
        w_d,
        z_d,
        lambda_d,
        delta_active: loads.has_delta_load(),
        lambda,
    })
}

/// `‖Λ^{-1} M diag(d)‖_∞` where only the magnitudes of `d` matter.
fn scaled_column_norm(m: &CMatrix, lambda: &[Complex64], column_weight: &[f64]) -> f64 {
    (0..m.rows())
        .map(|row| {
            let sum: f64 = m
                .row(row)
                .iter()
                .zip(column_weight)
                .filter(|(_, &wt)| wt != 0.0)
                .map(|(z, wt)| z.norm() * wt)
                .sum();
            // +0.0 turns the empty-sum -0.0 into 0.0
            sum / lambda[row].norm() + 0.0
        })
        .fold(0.0, f64::max)
}

/// Coefficients of the conditions as functions of the radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCoefficients {
    /// `λ̄ / w̲`
    pub a1: f64,
    /// `2 λ̄ / ρ̲`, zero when no delta load is present.
    pub a2: f64,
    pub a_y: f64,
    pub a_d: f64,
    pub b_y: f64,
    pub b_d: f64,
    pub c_y: f64,
    pub c_d: f64,
    pub d_y: f64,
    pub d_d: f64,
    /// When false, C2 is vacuous and every delta term vanishes.
    pub delta_active: bool,
}

impl ConditionCoefficients {
    pub fn from_quantities(q: &CertificateQuantities) -> ConditionCoefficients {
        let weight = |num: &[Complex64],
                      den: &[Complex64],
                      extra: &dyn Fn(usize) -> f64,
                      power: i32|
         -> Vec<f64> {
            num.iter()
                .enumerate()
                .map(|(k, s)| {
                    let s = s.norm();
                    if s == 0.0 {
                        0.0
                    } else {
                        s * extra(k) / den[k].norm().powi(power)
                    }
                })
                .collect()
        };
        let one = |_: usize| 1.0;
        let lam_y = |k: usize| q.lambda_y[k].norm();
        let lam_d = |k: usize| q.lambda_d[k];

        let a_y = scaled_column_norm(&q.z_y, &q.lambda, &weight(&q.s_y, &q.w_y, &one, 1));
        let b_y = scaled_column_norm(&q.z_y, &q.lambda, &weight(&q.i_y, &q.w_y, &one, 0));
        let c_y = scaled_column_norm(&q.z_y, &q.lambda, &weight(&q.s_y, &q.w_y, &lam_y, 2));
        let d_y = scaled_column_norm(&q.z_y, &q.lambda, &weight(&q.i_y, &q.w_y, &lam_y, 1));
        let a_d = scaled_column_norm(&q.z_d, &q.lambda, &weight(&q.s_d, &q.w_d, &one, 1));
        let b_d = scaled_column_norm(&q.z_d, &q.lambda, &weight(&q.i_d, &q.w_d, &one, 0));
        let c_d = scaled_column_norm(&q.z_d, &q.lambda, &weight(&q.s_d, &q.w_d, &lam_d, 2));
        let d_d = scaled_column_norm(&q.z_d, &q.lambda, &weight(&q.i_d, &q.w_d, &lam_d, 1));

        let a2 = if q.delta_active {
            2.0 * q.lambda_max / q.rho_min
        } else {
            0.0
        };
        ConditionCoefficients {
            a1: q.lambda_max / q.w_min,
            a2,
            a_y,
            a_d,
            b_y,
            b_d,
            c_y,
            c_d,
            d_y,
            d_d,
            delta_active: q.delta_active,
        }
    }

    /// Largest radius before C1 or C2 turns non-positive.
    pub fn radius_cap(&self) -> f64 {
        let cap1 = if self.a1 > 0.0 {
            1.0 / self.a1
        } else {
            f64::INFINITY
        };
        let cap2 = if self.delta_active && self.a2 > 0.0 {
            1.0 / self.a2
        } else {
            f64::INFINITY
        };
        let cap = cap1.min(cap2);
        cap * (1.0 - 1e-12)
    }

    /// Multiplies the constant-power and constant-current terms by `factor`.
    pub fn with_load_scale(&self, factor: f64) -> ConditionCoefficients {
        ConditionCoefficients {
            a_y: self.a_y * factor,
            a_d: self.a_d * factor,
            b_y: self.b_y * factor,
            b_d: self.b_d * factor,
            c_y: self.c_y * factor,
            c_d: self.c_d * factor,
            d_y: self.d_y * factor,
            d_d: self.d_d * factor,
            ..*self
        }
    }
}

/// Left/right-hand values of the four conditions at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionValues {
    pub c1: f64,
    /// `+∞` when C2 is vacuous.
    pub c2: f64,
    /// `R - (C3 left side)`; nonnegative when C3 holds.
    pub c3_slack: f64,
    /// Left side of C4, the contraction modulus bound.
    pub c4_value: f64,
}

impl ConditionValues {
    pub fn c1_holds(&self) -> bool {
        self.c1 > 0.0
    }

    pub fn c2_holds(&self) -> bool {
        self.c2 > 0.0
    }

    pub fn c3_holds(&self) -> bool {
        self.c1_holds() && self.c2_holds() && self.c3_slack >= 0.0
    }

    pub fn c4_holds(&self) -> bool {
        self.c1_holds() && self.c2_holds() && self.c4_value < 1.0
    }

    pub fn all_hold(&self) -> bool {
        self.c1_holds() && self.c2_holds() && self.c3_holds() && self.c4_holds()
    }
}

pub fn condition_values(coeffs: &ConditionCoefficients, radius: f64) -> ConditionValues {
    let c1 = 1.0 - radius * coeffs.a1;
    let c2 = if coeffs.delta_active {
        1.0 - radius * coeffs.a2
    } else {
        f64::INFINITY
    };
    if c1 <= 0.0 || c2 <= 0.0 {
        return ConditionValues {
            c1,
            c2,
            c3_slack: f64::NEG_INFINITY,
            c4_value: f64::INFINITY,
        };
    }
    // Delta terms are exactly zero when C2 is vacuous; skip them to avoid 0/∞.
    let (ad, cd, dd) = if coeffs.delta_active {
        (
            coeffs.a_d / c2,
            2.0 * coeffs.c_d / (c2 * c2),
            4.0 * coeffs.d_d / c2,
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    let c3_lhs = coeffs.a_y / c1 + ad + coeffs.b_y + coeffs.b_d;
    let c4_value = coeffs.c_y / (c1 * c1) + cd + 2.0 * coeffs.d_y / c1 + dd;
    ConditionValues {
        c1,
        c2,
        c3_slack: radius - c3_lhs,
        c4_value,
    }
}

fn feasible_at(coeffs: &ConditionCoefficients, radius: f64) -> bool {
    radius > 0.0 && condition_values(coeffs, radius).all_hold()
}

/// Limit of the conditions as `R -> 0+`: C3 holds only if every load norm vanishes.
fn feasible_at_zero(coeffs: &ConditionCoefficients) -> bool {
    let v = condition_values(coeffs, 0.0);
    v.c3_slack >= 0.0 && v.c4_value < 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateResult {
    pub feasible: bool,
    /// Every maximal feasible interval found, in increasing order.
    pub intervals: Vec<(f64, f64)>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub alpha_curve: Vec<(f64, f64)>,
    pub alpha_at_rmin: Option<f64>,
    pub coefficients: ConditionCoefficients,
}

impl CertificateResult {
    /// Contraction modulus bound at a radius inside the certified interval.
    pub fn alpha_at(&self, radius: f64) -> f64 {
        condition_values(&self.coefficients, radius).c4_value
    }
}

/// Bisects `[infeasible, feasible]` (in either order) down to the boundary tolerance
/// and returns the feasible end.
fn refine(coeffs: &ConditionCoefficients, mut bad: f64, mut good: f64) -> f64 {
    while (good - bad).abs() > BOUNDARY_TOLERANCE {
        let mid = 0.5 * (good + bad);
        if feasible_at(coeffs, mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

pub fn solve_region(coeffs: &ConditionCoefficients, curve_samples: usize) -> CertificateResult {
    let cap = coeffs.radius_cap();
    let mut intervals = Vec::new();
    if cap.is_finite() && cap > 0.0 {
        let grid = |i: usize| cap * i as f64 / SCAN_POINTS as f64;
        let flags: Vec<bool> = (1..=SCAN_POINTS)
            .map(|i| feasible_at(coeffs, grid(i)))
            .collect();
        let mut i = 0;
        while i < flags.len() {
            if !flags[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i < flags.len() && flags[i] {
                i += 1;
            }
            let end = i - 1;
            // flags[k] corresponds to grid(k + 1)
            let lower = if start == 0 {
                if feasible_at_zero(coeffs) {
                    0.0
                } else {
                    refine(coeffs, 0.0, grid(1))
                }
            } else {
                refine(coeffs, grid(start), grid(start + 1))
            };
            let upper = if end + 1 == flags.len() {
                cap
            } else {
                refine(coeffs, grid(end + 2), grid(end + 1))
            };
            intervals.push((lower, upper));
        }
    }

    let feasible = !intervals.is_empty();
    let (r_min, r_max) = intervals
        .first()
        .map_or((None, None), |&(a, b)| (Some(a), Some(b)));
    let mut alpha_curve = Vec::new();
    if let (Some(lo), Some(hi)) = (r_min, r_max) {
        let n = curve_samples.max(2);
        for s in 0..n {
            let r = lo + (hi - lo) * s as f64 / (n - 1) as f64;
            alpha_curve.push((r, condition_values(coeffs, r).c4_value));
        }
    }
    CertificateResult {
        feasible,
        alpha_at_rmin: r_min.map(|r| condition_values(coeffs, r).c4_value),
        intervals,
        r_min,
        r_max,
        alpha_curve,
        coefficients: *coeffs,
    }
}

/// Full pipeline: assemble, compute quantities and coefficients, solve for radii.
pub fn certify(
    network: &NetworkModel,
    loads: &LoadSet,
    lambda: &LambdaChoice,
    curve_samples: usize,
) -> Result<CertificateResult, CertificateError> {
    let system = SystemMatrices::new(network, loads)?;
    certify_system(network, &system, loads, lambda, curve_samples)
}

pub fn certify_system(
    network: &NetworkModel,
    system: &SystemMatrices,
    loads: &LoadSet,
    lambda: &LambdaChoice,
    curve_samples: usize,
) -> Result<CertificateResult, CertificateError> {
    let indexed = IndexedLoads::new(network, loads);
    let q = compute_quantities(network, system, &indexed, lambda)?;
    Ok(solve_region(
        &ConditionCoefficients::from_quantities(&q),
        curve_samples,
    ))
}

/// `Λ^{-1} w`, the ball center in scaled coordinates.
pub fn scaled_center(q: &CertificateQuantities, w: &[Complex64]) -> Vec<Complex64> {
    w.iter().zip(&q.lambda).map(|(a, l)| a / l).collect()
}
