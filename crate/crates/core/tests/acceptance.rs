#![allow(clippy::needless_range_loop)]

//! Acceptance suite: one PASS/FAIL line per criterion, including its
//! runtime bound. Exits with status 1 if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use infera::affiliated::random_affiliated_prior;
use infera::ising::{bethe_fixed_point, ising_tree_distribution, magnetization_exact, nu_bethe_limit, sensitivity_profile, tree_root_ratios};
use infera::mechanism::{max_biased_profile, noisy_sum_tail_profile, parity_mechanism_m1_profile, NoisySumSampler};
use infera::{
    covariance_ratio_bounds, dobrushin_bounds, influence_matrix, mechanism_nu, nu_closed_form, nu_exact, IsingTreeModel,
    JointDistribution, Mechanism, PrivacyBudget,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: whether its checks held and a short summary of
/// the measured quantities.
struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, f64, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_budget(rng: &mut ChaCha8Rng, n: usize, max: f64) -> PrivacyBudget {
    PrivacyBudget::new((0..n).map(|_| rng.random_range(0.01..=max)).collect()).unwrap()
}

fn twins_clones() -> Outcome {
    let mut worst = 0.0f64;
    for n in 2..=4 {
        for eps in [0.1, 0.5] {
            let d = JointDistribution::perfectly_correlated(n, 0.5).unwrap();
            let nu = nu_exact(&d, &PrivacyBudget::uniform(n, eps).unwrap(), 0).unwrap().nu;
            worst = worst.max((nu - n as f64 * eps).abs());
        }
    }
    outcome(worst <= 1e-6, format!("max |ν - nε| = {worst:.2e} (tol 1e-6)"))
}

fn independence_collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=5);
        let d = JointDistribution::product(&common::random_product_marginals(&mut rng, n)).unwrap();
        let b = random_budget(&mut rng, n, 1.0);
        let a = rng.random_range(0..n);
        worst = worst.max((nu_exact(&d, &b, a).unwrap().nu - b.get(a)).abs());
    }
    outcome(worst <= 1e-6, format!("20 product priors, max |ν - ε_a| = {worst:.2e} (tol 1e-6)"))
}

fn affiliated_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_nu, mut worst_ratio) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.random_range(2..=5);
        let d = random_affiliated_prior(n, 1.0, 1.0, &mut rng).unwrap();
        let b = random_budget(&mut rng, n, 1.0);
        let a = rng.random_range(0..n);
        let cf = nu_closed_form(&d, &b, a, false).unwrap().nu;
        let cert = nu_exact(&d, &b, a).unwrap();
        worst_nu = worst_nu.max((cf - cert.nu).abs());
        let mb = max_biased_profile(n, &b, cert.direction.1).unwrap();
        let w = cert.witness.values();
        let scale = w[0] / mb.get(0);
        for x in 0..w.len() {
            worst_ratio = worst_ratio.max((w[x] - scale * mb.get(x)).abs());
        }
    }
    outcome(
        worst_nu <= 1e-6 && worst_ratio <= 1e-6,
        format!("50 affiliated priors, max |exact - closed form| = {worst_nu:.2e}, witness deviation = {worst_ratio:.2e} (tol 1e-6)"),
    )
}

fn noisy_sum() -> Outcome {
    let mut proportional = true;
    for n in 1..=6 {
        for eps in [0.1, 0.5, 2.0] {
            for z in 0..2 {
                let ns = noisy_sum_tail_profile(n, eps, z).unwrap();
                let mb = max_biased_profile(n, &PrivacyBudget::uniform(n, eps).unwrap(), z).unwrap();
                let c = ns.get(0) / mb.get(0);
                proportional &= (0..ns.values().len()).all(|x| (ns.get(x) - c * mb.get(x)).abs() <= 1e-15);
            }
        }
    }
    let eps = 0.5;
    let samples = 100_000;
    let mut worst_sigmas = 0.0f64;
    for x in [vec![0usize, 0, 0], vec![1, 0, 0], vec![1, 1, 0], vec![1, 1, 1]] {
        let k = x.iter().sum::<usize>();
        let mut sampler = NoisySumSampler::new(eps, 0xacce55 + k as u64).unwrap();
        let hits = (0..samples).filter(|_| sampler.sample(&x) <= 0.0).count();
        let p = 0.5 * (-eps * k as f64).exp();
        let sigma = (p * (1.0 - p) / samples as f64).sqrt();
        worst_sigmas = worst_sigmas.max((hits as f64 / samples as f64 - p).abs() / sigma);
    }
    outcome(
        proportional && worst_sigmas <= 3.0,
        format!("proportional = {proportional}, worst Monte Carlo deviation = {worst_sigmas:.2}σ (tol 3σ)"),
    )
}

fn parity_counterexample() -> Outcome {
    let (r, s, eps) = (2, 2, 0.2);
    let d = JointDistribution::parity_constrained(r, s).unwrap();
    let b = PrivacyBudget::uniform(2 * r + 1, eps).unwrap();
    let m1 = mechanism_nu(&d, &Mechanism::Profile(parity_mechanism_m1_profile(r, s, eps).unwrap()), 0).unwrap();
    let mb = mechanism_nu(&d, &Mechanism::Profile(max_biased_profile(2 * r + 1, &b, 0).unwrap()), 0).unwrap();
    let exact = nu_exact(&d, &b, 0).unwrap().nu;
    outcome(
        m1 >= 0.6 - 1e-9 && mb <= 0.36 + 1e-9 && exact >= m1 - 1e-9,
        format!("ν(M1) = {m1:.9}, ν(max-biased) = {mb:.9}, exact = {exact:.9}"),
    )
}

fn dobrushin_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut checked, mut with_delta, mut attempts) = (0, 0, 0);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_delta_excess = f64::NEG_INFINITY;
    while checked < 30 && attempts < 10_000 {
        attempts += 1;
        let n = rng.random_range(2..=4);
        let probs = common::random_positive_prior(&mut rng, n, 2);
        let d = JointDistribution::from_dense(n, 2, probs).unwrap();
        let inf = influence_matrix(&d).unwrap();
        if inf.spectral_norm.is_none_or(|s| s >= 1.0) {
            continue;
        }
        let b = random_budget(&mut rng, n, 1.0);
        let bound = dobrushin_bounds(&inf, &b).unwrap();
        let a = rng.random_range(0..n);
        let nu = nu_exact(&d, &b, a).unwrap().nu;
        worst_excess = worst_excess.max(nu - bound.nu_bound[a]);
        if let Some(nd) = &bound.nu_delta_bound {
            worst_delta_excess = worst_delta_excess.max(nu - nd[a]);
            with_delta += 1;
        }
        checked += 1;
    }
    let pass = checked == 30 && worst_excess <= 1e-6 && worst_delta_excess <= 1e-6;
    outcome(
        pass,
        format!(
            "{checked} priors ({with_delta} with δ), max ν - 2(Φε)_a = {worst_excess:.3e}, max ν - 2ε_a/δ = {worst_delta_excess:.3e} (tol 1e-6)"
        ),
    )
}

fn bethe_consistency() -> Outcome {
    let (j, h) = (0.3, 0.1);
    let dist = ising_tree_distribution(&IsingTreeModel::new(2, 3, j, h).unwrap()).unwrap();
    let m = magnetization_exact(&dist, 0, 0.0).unwrap();
    let enumerated = (1.0 + m) / (1.0 - m);
    let recursion = tree_root_ratios(j, h, 2, 3).unwrap().x_n;
    let err = (enumerated - recursion).abs();
    outcome(err <= 1e-9, format!("15-node root odds: recursion {recursion:.12}, enumeration {enumerated:.12}, |Δ| = {err:.2e} (tol 1e-9)"))
}

fn fixed_point_laws() -> Outcome {
    let mut exact_one = true;
    let mut worst = 0.0f64;
    for d in [2, 3, 4] {
        for j in [0.1, 0.5, 0.7, 1.5] {
            exact_one &= bethe_fixed_point(j, 0.0, d).unwrap().x_fixed == 1.0;
        }
        for h in [-0.5, 0.05, 0.3] {
            worst = worst.max((bethe_fixed_point(0.0, h, d).unwrap().x_fixed - (2.0 * h).exp()).abs());
        }
    }
    let spont = bethe_fixed_point(0.7, 1e-6, 2).unwrap().ln_x;
    outcome(
        exact_one && worst <= 1e-12 && spont > 0.05,
        format!("x(J,0) = 1: {exact_one}, max |x(0,h) - e^{{2h}}| = {worst:.2e} (tol 1e-12), ln x(0.7, 1e-6) = {spont:.6} (> 0.05)"),
    )
}

fn near_critical_slope() -> Outcome {
    let eps = 1e-6;
    let d = 2;
    let mut pass = true;
    let mut parts = Vec::new();
    for delta in [0.5, 0.25] {
        let j = ((1.0 - delta) / d as f64).atanh();
        let slope = (nu_bethe_limit(j, 2.0 * eps, d).unwrap() - nu_bethe_limit(j, eps, d).unwrap()) / eps;
        pass &= slope > 1.0 / delta;
        parts.push(format!("δ={delta}: dν/dε = {slope:.6} > {}", 1.0 / delta));
    }
    outcome(pass, parts.join(", "))
}

fn sensitivity_discontinuity() -> Outcome {
    let (j, h0, d, e0, e1) = (3.0, 0.3, 2, 0.2, 1.0);
    let p = sensitivity_profile(j, h0, d, &[e0, e1]).unwrap();
    let (r0, r1) = (p[0].1 / e0, p[1].1 / e1);
    outcome(r0 < 2.0 && r1 > 10.0, format!("J={j}, h0={h0}, d={d}: ν(ε0)/ε0 = {r0:.4} (< 2), ν(ε1)/ε1 = {r1:.4} (> 10)"))
}

fn lemma_fg() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_first, mut worst_second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let k = rng.random_range(2..=10);
        let a: f64 = rng.random_range(0.0..2.0);
        let b: f64 = rng.random_range(0.0..2.0);
        let mut p: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        let av: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=2.0 * a).exp()).collect();
        let bv: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=2.0 * b).exp()).collect();
        let e = |f: &dyn Fn(usize) -> f64| (0..k).map(|i| p[i] * f(i)).sum::<f64>();
        let ratio = e(&|i| av[i] * bv[i]) / (e(&|i| av[i]) * e(&|i| bv[i]));
        let (tight, loose) = covariance_ratio_bounds(a, b);
        worst_first = worst_first.max(ratio - tight);
        worst_second = worst_second.max(tight - loose);
    }
    outcome(
        worst_first <= 1e-12 && worst_second <= 1e-12,
        format!("1000 instances, max excess {worst_first:.2e} / {worst_second:.2e} (slack 1e-12)"),
    )
}

fn brute_force_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let grid = 0.1;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=3 {
        for _ in 0..10 {
            let probs = common::random_positive_prior(&mut rng, n, 2);
            let d = JointDistribution::from_dense(n, 2, probs.clone()).unwrap();
            let steps: Vec<i64> = (0..n).map(|_| rng.random_range(1..=4)).collect();
            let b = PrivacyBudget::new(steps.iter().map(|&s| s as f64 * grid).collect()).unwrap();
            let a = rng.random_range(0..n);
            let nu = nu_exact(&d, &b, a).unwrap().nu;
            worst = worst.max((nu - common::brute_force_nu(&probs, n, &steps, grid, a)).abs());
            cases += 1;
        }
    }
    outcome(worst <= 1e-3, format!("{cases} priors n ≤ 3, max |exact - brute force| = {worst:.2e} (tol 1e-3)"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("twins/clones ν = nε", 1.0, twins_clones),
        ("independence collapse ν = ε_a", 10.0, independence_collapse),
        ("affiliated closed form equals LP", 60.0, affiliated_equivalence),
        ("noisy-sum tail profile", 5.0, noisy_sum),
        ("parity counterexample", 5.0, parity_counterexample),
        ("influence bound soundness", 60.0, dobrushin_soundness),
        ("recursion vs enumeration", 2.0, bethe_consistency),
        ("fixed-point laws", 1.0, fixed_point_laws),
        ("near-critical slope", 1.0, near_critical_slope),
        ("sensitivity discontinuity", 1.0, sensitivity_discontinuity),
        ("covariance ratio inequalities", 2.0, lemma_fg),
        ("brute-force LP oracle", 30.0, brute_force_oracle),
    ];
    let mut failures = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run);
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs_f64(*limit);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {}: {name}: {detail} [{:.3} s, limit {limit} s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            elapsed.as_secs_f64(),
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
