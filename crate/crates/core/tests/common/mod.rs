#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zbuscert::certificate::{compute_quantities, CertificateQuantities};
use zbuscert::linalg::CMatrix;
use zbuscert::loads::{IndexedLoads, LoadSet, Zip};
use zbuscert::network::NetworkModel;
use zbuscert::reference::random_small_network;
use zbuscert::solver::LambdaChoice;
use zbuscert::system::SystemMatrices;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Uniform point in the closed unit disk.
pub fn unit_disk(rng: &mut ChaCha8Rng) -> Complex64 {
    let r = rng.gen::<f64>().sqrt();
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(r, t)
}

pub struct Instance {
    pub network: NetworkModel,
    pub loads: LoadSet,
    pub system: SystemMatrices,
}

pub fn random_instance(seed: u64, delta_fraction: f64) -> Instance {
    let nodes = 1 + (seed as usize % 5);
    let (network, loads) = random_small_network(seed, nodes, delta_fraction).unwrap();
    let system = SystemMatrices::new(&network, &loads).unwrap();
    Instance {
        network,
        loads,
        system,
    }
}

/// Keeps only the constant-power or only the constant-current part of every load.
pub fn only(loads: &LoadSet, network: &NetworkModel, power: bool) -> LoadSet {
    let mut out = LoadSet::new();
    let pick = |z: Zip| {
        if power {
            Zip::power(z.s)
        } else {
            Zip::new(c(0.0, 0.0), z.i, c(0.0, 0.0))
        }
    };
    for (n, pair, z) in loads.delta_entries() {
        out.add_delta(
            network,
            &network.node(n).id,
            (pair.first(), pair.second()),
            pick(z),
        )
        .unwrap();
    }
    for (n, p, z) in loads.wye_entries() {
        out.add_wye(network, &network.node(n).id, p, pick(z))
            .unwrap();
    }
    out
}

pub fn quantities(inst: &Instance, loads: &LoadSet) -> (IndexedLoads, CertificateQuantities) {
    let indexed = IndexedLoads::new(&inst.network, loads);
    let q = compute_quantities(
        &inst.network,
        &inst.system,
        &indexed,
        &LambdaChoice::Identity,
    )
    .unwrap();
    (indexed, q)
}

/// `w` perturbed by up to `radius` per entry.
pub fn perturbed(rng: &mut ChaCha8Rng, w: &[Complex64], radius: f64) -> Vec<Complex64> {
    w.iter().map(|x| x + unit_disk(rng) * radius).collect()
}

pub fn matvec(m: &CMatrix, x: &[Complex64]) -> Vec<Complex64> {
    m.matvec(x).unwrap()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Lemma 1 and 2 sides for one delta-only instance at voltage `v`:
/// returns `(lemma1_gap, lemma2_gap, lemma2_gap_with_plus_sign, max |Z i_I|)`.
pub fn lemma_gaps(inst: &Instance, v: &[Complex64]) -> (f64, f64, f64, f64) {
    let net = &inst.network;
    let pq = only(&inst.loads, net, true);
    let ci = only(&inst.loads, net, false);

    let (idx_pq, q_pq) = quantities(inst, &pq);
    let lhs1 = matvec(&inst.system.z, &pq.injection(net, v).unwrap().power);
    let mut rhs1 = vec![c(0.0, 0.0); v.len()];
    let (idx_ci, q_ci) = quantities(inst, &ci);
    let lhs2 = matvec(&inst.system.z, &ci.injection(net, v).unwrap().current);
    let mut rhs2 = vec![c(0.0, 0.0); v.len()];

    for (col, &k) in net.index().delta_indices().iter().enumerate() {
        let n = net.index().node_of(k);
        let e = idx_pq.pairing[k]
            .unwrap()
            .selector
            .apply(net.node_voltage(v, n));
        let t1 = -(idx_pq.power[k] / e).conj();
        let t2 = -idx_ci.current[k] * e / e.norm();
        for j in 0..v.len() {
            rhs1[j] += q_pq.z_d[(j, col)] * t1;
            rhs2[j] += q_ci.z_d[(j, col)] * t2;
        }
    }
    let plus: Vec<Complex64> = rhs2.iter().map(|x| -x).collect();
    let scale = lhs2.iter().map(|x| x.norm()).fold(0.0, f64::max);
    (
        max_diff(&lhs1, &rhs1),
        max_diff(&lhs2, &rhs2),
        max_diff(&lhs2, &plus),
        scale,
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct TheoremOutcome {
    pub networks: usize,
    pub runs: usize,
    pub all_converged: bool,
    pub stayed_in_ball: bool,
    pub max_pairwise_gap: f64,
    pub max_rate_excess: f64,
    pub bound_violations: usize,
}

/// Solves `inits` random starts inside `D'_{r_max}` on `networks` certified random feeders.
pub fn theorem_suite(networks: usize, inits: usize) -> TheoremOutcome {
    use zbuscert::certificate::certify_system;
    use zbuscert::solver::{
        empirical_rate, membership_in_ball, solve, InitialVoltage, SolveConfig, SolveStatus,
    };

    let mut out = TheoremOutcome {
        networks: 0,
        runs: 0,
        all_converged: true,
        stayed_in_ball: true,
        max_pairwise_gap: 0.0,
        max_rate_excess: f64::NEG_INFINITY,
        bound_violations: 0,
    };
    let mut r = rng(2024);
    let mut seed = 0u64;
    while out.networks < networks {
        seed += 1;
        let delta_fraction = [0.0, 0.5, 1.0][(seed % 3) as usize];
        let inst = random_instance(seed, delta_fraction);
        let lambda = if seed % 2 == 0 {
            LambdaChoice::Identity
        } else {
            LambdaChoice::DiagW
        };
        let cert = certify_system(&inst.network, &inst.system, &inst.loads, &lambda, 2).unwrap();
        if !cert.feasible {
            continue;
        }
        out.networks += 1;
        let radius = cert.r_max.unwrap();
        let alpha = cert.alpha_at(radius);
        let lam = lambda.resolve(&inst.system).unwrap();
        let lam_max = lam.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let lam_min = lam.iter().map(|x| x.norm()).fold(f64::INFINITY, f64::min);
        let w = &inst.system.w;

        let mut finals: Vec<Vec<Complex64>> = Vec::new();
        for _ in 0..inits {
            let v0: Vec<Complex64> = w
                .iter()
                .zip(&lam)
                .map(|(wk, lk)| wk + lk * unit_disk(&mut r) * radius)
                .collect();
            let cfg = SolveConfig {
                max_iters: 20_000,
                initial: InitialVoltage::Custom(v0.clone()),
                lambda: lambda.clone(),
                ..SolveConfig::default()
            };
            let trace = solve(&inst.network, &inst.system, &inst.loads, &cfg).unwrap();
            out.runs += 1;
            if trace.status != SolveStatus::Converged {
                out.all_converged = false;
                continue;
            }
            if !trace
                .iterates
                .iter()
                .all(|v| membership_in_ball(v, w, &lam, radius))
            {
                out.stayed_in_ball = false;
            }
            if let Ok(rate) = empirical_rate(&trace) {
                out.max_rate_excess = out.max_rate_excess.max(rate - alpha);
            }
            let vf = trace.solution.clone().unwrap();
            let b = lam_max / lam_min * max_diff(&v0, &vf);
            for (t, v) in trace.iterates.iter().enumerate() {
                // 1e-9 absorbs the distance between the last iterate and the exact fixed point.
                if max_diff(v, &vf) > b * alpha.powi(t as i32) + 1e-9 {
                    out.bound_violations += 1;
                }
            }
            finals.push(vf);
        }
        for a in &finals {
            for b in &finals {
                out.max_pairwise_gap = out.max_pairwise_gap.max(max_diff(a, b));
            }
        }
    }
    out
}
