//! Independent reference implementations used by the integration tests.
//!
//! Everything here works on raw probability vectors with its own indexing
//! and summation so that agreement with the library is meaningful.

#![allow(dead_code)]

use rand::Rng;

/// Bit `i` of a binary database index.
pub fn bit(x: usize, i: usize) -> usize {
    (x >> i) & 1
}

/// Exact worst-case `ν_a` over all `ε`-DP event profiles when every `ε_i` is
/// an integer multiple `steps[i]` of a common `grid`.
///
/// Every vertex of the feasible cone has `ln m(x) - ln m(0)` equal to a sum
/// of `±ε_i` along adjacent pairs, so it is `grid · k(x)` with integer `k`.
/// Enumerating all integer labelings with `k(0) = 0` and
/// `|k(x) - k(x')| ≤ steps[i]` for `x ~_i x'` therefore visits every vertex.
pub fn brute_force_nu(probs: &[f64], n: usize, steps: &[i64], grid: f64, a: usize) -> f64 {
    assert_eq!(probs.len(), 1 << n);
    assert_eq!(steps.len(), n);
    let len = 1usize << n;
    let mut k = vec![0i64; len];
    let mut best = f64::NEG_INFINITY;
    // Conditional masses by value of x_a.
    let mass = |z: usize| -> f64 { (0..len).filter(|&x| bit(x, a) == z).map(|x| probs[x]).sum() };
    let (m0, m1) = (mass(0), mass(1));

    fn assign(
        x: usize,
        len: usize,
        n: usize,
        steps: &[i64],
        k: &mut Vec<i64>,
        visit: &mut dyn FnMut(&[i64]),
    ) {
        if x == len {
            visit(k);
            return;
        }
        let total: i64 = steps.iter().sum();
        let (mut lo, mut hi) = (-total, total);
        for i in 0..n {
            if bit(x, i) == 1 {
                let y = x ^ (1 << i);
                lo = lo.max(k[y] - steps[i]);
                hi = hi.min(k[y] + steps[i]);
            }
        }
        for v in lo..=hi {
            k[x] = v;
            assign(x + 1, len, n, steps, k, visit);
        }
    }

    let mut visit = |k: &[i64]| {
        // Constraints against higher-indexed neighbours were checked when
        // those were assigned, so every complete labeling is feasible.
        let mut s = [0.0f64; 2];
        for x in 0..len {
            s[bit(x, a)] += probs[x] * (grid * k[x] as f64).exp();
        }
        let r01 = (s[1] / m1) / (s[0] / m0);
        best = best.max(r01.ln()).max((1.0 / r01).ln());
    };
    assign(1, len, n, steps, &mut k, &mut visit);
    best
}

/// Conditional distribution of coordinate `i` given the other coordinates of
/// `x`, by explicit enumeration over the alphabet. `None` for a null context.
fn conditional(probs: &[f64], n: usize, q: usize, i: usize, x: &[usize]) -> Option<Vec<f64>> {
    let index = |d: &[usize]| d.iter().rev().fold(0usize, |acc, &v| acc * q + v);
    let _ = n;
    let mut d = x.to_vec();
    let vals: Vec<f64> = (0..q)
        .map(|v| {
            d[i] = v;
            probs[index(&d)]
        })
        .collect();
    let total: f64 = vals.iter().sum();
    (total > 0.0).then(|| vals.iter().map(|p| p / total).collect())
}

fn all_databases(n: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..q).map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Influence matrix straight from the definition: maximum over every nonempty
/// subset `S` of the alphabet and every pair of admissible contexts that
/// differ in coordinate `j` only.
pub fn influence_by_subsets(probs: &[f64], n: usize, q: usize) -> Vec<Vec<f64>> {
    let dbs = all_databases(n, q);
    let mut gamma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut best = 1.0f64;
            for x in &dbs {
                if x[i] != 0 {
                    continue;
                }
                for v in 0..q {
                    if v == x[j] {
                        continue;
                    }
                    let mut y = x.clone();
                    y[j] = v;
                    let (Some(p), Some(r)) = (conditional(probs, n, q, i, x), conditional(probs, n, q, i, &y)) else {
                        continue;
                    };
                    for mask in 1..(1usize << q) {
                        let num: f64 = (0..q).filter(|s| mask >> s & 1 == 1).map(|s| p[s]).sum();
                        let den: f64 = (0..q).filter(|s| mask >> s & 1 == 1).map(|s| r[s]).sum();
                        if num == 0.0 {
                            continue;
                        }
                        best = best.max(if den == 0.0 { f64::INFINITY } else { num / den });
                    }
                }
            }
            gamma[i][j] = 0.5 * best.ln();
        }
    }
    gamma
}

/// `Z⁺` and `Z⁻` at `site` for `exp(J Σ_edges σσ + Σ h_i σ_i)`, summing over
/// spin configurations directly.
pub fn ising_partition(n: usize, edges: &[(usize, usize)], j: f64, fields: &[f64], site: usize) -> (f64, f64) {
    let mut z = [0.0f64; 2];
    for s in 0..(1usize << n) {
        let spin = |i: usize| if s >> i & 1 == 1 { 1.0 } else { -1.0 };
        let e: f64 = edges.iter().map(|&(a, b)| j * spin(a) * spin(b)).sum::<f64>()
            + (0..n).map(|i| fields[i] * spin(i)).sum::<f64>();
        z[if spin(site) > 0.0 { 0 } else { 1 }] += e.exp();
    }
    (z[0], z[1])
}

/// Edges of a complete `d`-ary tree of the given depth, breadth first.
pub fn complete_tree_edges(d: usize, depth: usize) -> (usize, Vec<(usize, usize)>) {
    let mut edges = Vec::new();
    let mut level = vec![0usize];
    let mut next_id = 1;
    for _ in 0..depth {
        let mut next = Vec::new();
        for &p in &level {
            for _ in 0..d {
                edges.push((p, next_id));
                next.push(next_id);
                next_id += 1;
            }
        }
        level = next;
    }
    (next_id, edges)
}

/// Random strictly positive prior on `q^n` databases.
pub fn random_positive_prior<R: Rng>(rng: &mut R, n: usize, q: usize) -> Vec<f64> {
    let len = q.pow(n as u32);
    let w: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Random product prior on `n` bits with each `Pr(x_i = 1)` in `[0.05, 0.95]`.
pub fn random_product_marginals<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let p = rng.random_range(0.05..0.95);
            vec![1.0 - p, p]
        })
        .collect()
}

/// Random `ε`-DP profile: `ln m(x) = Σ_i c_i x_i + s·noise(x)` with
/// `|c_i| ≤ ε_i - 2s` and `|noise| ≤ 1`, so every adjacent log-ratio is at
/// most `ε_i`. The constraint is re-checked explicitly.
pub fn random_dp_profile<R: Rng>(rng: &mut R, n: usize, eps: &[f64]) -> Vec<f64> {
    let len = 1usize << n;
    let min_eps = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = rng.random_range(0.0..=0.25) * min_eps;
    let coef: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let c = e - 2.0 * scale;
            if c > 0.0 { rng.random_range(-c..=c) } else { 0.0 }
        })
        .collect();
    let u: Vec<f64> = (0..len)
        .map(|x| (0..n).map(|i| coef[i] * bit(x, i) as f64).sum::<f64>() + scale * rng.random_range(-1.0..=1.0))
        .collect();
    assert!((0..len).all(|x| (0..n).all(|i| (u[x] - u[x ^ (1 << i)]).abs() <= eps[i] + 1e-12)));
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    u.into_iter().map(|v| (v - max).exp()).collect()
}

/// `ν_a` of a profile by the definition, using both orderings.
pub fn profile_nu_oracle(probs: &[f64], n: usize, m: &[f64], a: usize) -> f64 {
    let len = 1usize << n;
    let mut s = [0.0f64; 2];
    let mut w = [0.0f64; 2];
    for x in 0..len {
        s[bit(x, a)] += probs[x] * m[x];
        w[bit(x, a)] += probs[x];
    }
    let r = (s[1] / w[1]) / (s[0] / w[0]);
    r.ln().abs()
}

/// Largest singular value of a small dense matrix by the symmetric
/// eigendecomposition of `ΓᵀΓ`.
pub fn spectral_norm_oracle(gamma: &[Vec<f64>]) -> f64 {
    let n = gamma.len();
    let g = nalgebra::DMatrix::from_fn(n, n, |r, c| gamma[r][c]);
    let gram = g.transpose() * &g;
    let eig = nalgebra::SymmetricEigen::new(gram);
    eig.eigenvalues.iter().copied().fold(0.0f64, f64::max).sqrt()
}

/// `(I - Γ)⁻¹` via nalgebra's LU.
pub fn phi_oracle(gamma: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = gamma.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 } - gamma[r][c]);
    let inv = m.try_inverse().expect("I - Γ invertible");
    (0..n).map(|r| (0..n).map(|c| inv[(r, c)]).collect()).collect()
}
