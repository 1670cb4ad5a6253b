//! Multiplicative influence matrix and the Dobrushin-style bounds on `ν`.
//!
//! `γ_ij` is half the log of the largest ratio
//! `Pr(x_i ∈ S | x_{-i}) / Pr(x_i ∈ S | x'_{-i})` over contexts that differ
//! only in coordinate `j`. When `‖Γ‖ < 1`, `Φ = (I - Γ)⁻¹` exists and
//! `ν_i ≤ 2 (Φε)_i`; when additionally `Γε ≤ (1 - δ) ε` componentwise,
//! `ν_i ≤ 2ε_i / δ`.

use serde::Serialize;

use crate::dist::JointDistribution;
use crate::error::{InferaError, Result};
use crate::mechanism::PrivacyBudget;
use crate::numeric::{digit, identity, kahan_sum, mat_mul, mat_vec, remove_digit, solve_dense, with_digit};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceMatrix {
    /// `gamma[i][j]`; unbounded entries are `f64::INFINITY`.
    pub gamma: Vec<Vec<f64>>,
    /// Largest singular value, absent when some entry is unbounded.
    pub spectral_norm: Option<f64>,
    pub unbounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DobrushinBound {
    pub phi: Vec<Vec<f64>>,
    /// `2 Φ ε`.
    pub nu_bound: Vec<f64>,
    /// `1 - max_i (Γε)_i / ε_i` when that is positive and the condition holds
    /// at every coordinate.
    pub delta: Option<f64>,
    /// `2 ε / δ`, present exactly when `delta` is.
    pub nu_delta_bound: Option<Vec<f64>>,
}

/// Conditional distribution of `x_i` given the context of `index`
/// (the digit at `i` is ignored). `None` when the context has zero mass.
fn conditional_of(dist: &JointDistribution, index: usize, i: usize) -> Option<Vec<f64>> {
    let k = dist.alphabet();
    let probs: Vec<f64> = (0..k).map(|v| dist.prob(with_digit(index, i, v, k))).collect();
    let total = kahan_sum(probs.iter().copied());
    (total > 0.0).then(|| probs.into_iter().map(|p| p / total).collect())
}

/// Build `Γ` from a dense prior over any finite alphabet.
///
/// The maximum over subsets `S` of the support reduces to singletons: the
/// ratio of two sums of positive terms is a mediant of the termwise ratios
/// and never exceeds the largest one. Contexts with zero marginal are
/// skipped (the conditional is undefined there). If two admissible adjacent
/// contexts disagree on which values of `x_i` have positive probability the
/// entry is unbounded.
pub fn influence_matrix(dist: &JointDistribution) -> Result<InfluenceMatrix> {
    let n = dist.n();
    let k = dist.alphabet();
    let mut gamma = vec![vec![0.0_f64; n]; n];
    for i in 0..n {
        // Contexts are enumerated as full indices with x_i = 0.
        let contexts: Vec<usize> = (0..dist.len()).filter(|&x| digit(x, i, k) == 0).collect();
        let conds: Vec<Option<Vec<f64>>> = contexts.iter().map(|&x| conditional_of(dist, x, i)).collect();
        if conds.iter().all(Option::is_none) {
            return Err(InferaError::DegenerateDistribution(i));
        }
        let rest_of = |x: usize| remove_digit(x, i, k);
        for (j, entry) in gamma[i].iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let mut max_log_ratio = 0.0_f64;
            for (c, &x) in contexts.iter().enumerate() {
                let Some(p) = &conds[c] else { continue };
                let xj = digit(x, j, k);
                for v in (xj + 1)..k {
                    let y = with_digit(x, j, v, k);
                    let Some(q) = &conds[rest_of(y)] else { continue };
                    for s in 0..k {
                        let (a, b) = (p[s], q[s]);
                        if a == 0.0 && b == 0.0 {
                            continue;
                        }
                        if a == 0.0 || b == 0.0 {
                            max_log_ratio = f64::INFINITY;
                            break;
                        }
                        max_log_ratio = max_log_ratio.max((a / b).ln().abs());
                    }
                }
            }
            *entry = 0.5 * max_log_ratio;
        }
    }
    let unbounded = gamma.iter().flatten().any(|g| g.is_infinite());
    let spectral_norm = if unbounded { None } else { Some(spectral_norm(&gamma)?) };
    Ok(InfluenceMatrix { gamma, spectral_norm, unbounded })
}

/// Largest singular value by power iteration on `ΓᵀΓ`, started from the
/// normalized all-ones vector and stopped when the Rayleigh quotient changes
/// by less than `1e-10` relative.
pub fn spectral_norm(gamma: &[Vec<f64>]) -> Result<f64> {
    let n = gamma.len();
    if gamma.iter().any(|row| row.len() != n) {
        return Err(InferaError::DimensionMismatch("influence matrix must be square".into()));
    }
    if gamma.iter().flatten().any(|g| !g.is_finite()) {
        return Err(InferaError::Unbounded);
    }
    if n == 0 {
        return Ok(0.0);
    }
    let gt: Vec<Vec<f64>> = (0..n).map(|c| (0..n).map(|r| gamma[r][c]).collect()).collect();
    let gram = mat_mul(&gt, gamma);
    if gram.iter().flatten().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0_f64;
    for _ in 0..100_000 {
        let w = mat_vec(&gram, &v);
        let norm = kahan_sum(w.iter().map(|x| x * x)).sqrt();
        if norm == 0.0 {
            // Start vector orthogonal to the range; fall back to basis vectors.
            v = vec![0.0; n];
            v[(lambda as usize) % n] = 1.0;
            lambda += 1.0;
            continue;
        }
        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let rayleigh = kahan_sum(next.iter().zip(&mat_vec(&gram, &next)).map(|(a, b)| a * b));
        let done = (rayleigh - lambda).abs() <= 1e-10 * rayleigh.abs();
        lambda = rayleigh;
        v = next;
        if done {
            break;
        }
    }
    Ok(lambda.max(0.0).sqrt())
}

/// Truncated Neumann series `Σ_m Γ^m`, stopped when the largest entry of the
/// latest term drops below `tol`. `None` if `max_terms` is reached first.
pub fn neumann_series(gamma: &[Vec<f64>], tol: f64, max_terms: usize) -> Option<Vec<Vec<f64>>> {
    let n = gamma.len();
    let mut sum = identity(n);
    let mut term = identity(n);
    for _ in 0..max_terms {
        term = mat_mul(&term, gamma);
        let largest = term.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
        for r in 0..n {
            for c in 0..n {
                sum[r][c] += term[r][c];
            }
        }
        if largest < tol {
            return Some(sum);
        }
    }
    None
}

/// `Φ = (I - Γ)⁻¹`, `2Φε` and, when the row condition holds, `δ` and `2ε/δ`.
pub fn dobrushin_bounds(influence: &InfluenceMatrix, budget: &PrivacyBudget) -> Result<DobrushinBound> {
    let gamma = &influence.gamma;
    let n = gamma.len();
    budget.check_len(n)?;
    if influence.unbounded {
        return Err(InferaError::Unbounded);
    }
    let norm = match influence.spectral_norm {
        Some(s) => s,
        None => spectral_norm(gamma)?,
    };
    if norm >= 1.0 {
        return Err(InferaError::SpectralNormTooLarge(norm));
    }
    let eps = budget.as_slice();
    let i_minus_g: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 } - gamma[r][c]).collect())
        .collect();
    let phi = solve_dense(&i_minus_g, &identity(n))
        .ok_or_else(|| InferaError::Consistency("I - Γ is numerically singular".into()))?;
    let check = mat_mul(&i_minus_g, &phi);
    let residual = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| (check[r][c] - if r == c { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    if residual > 1e-9 {
        return Err(InferaError::Consistency(format!("(I - Γ)Φ differs from I by {residual:e}")));
    }
    let nu_bound: Vec<f64> = mat_vec(&phi, eps).into_iter().map(|v| 2.0 * v).collect();

    let g_eps = mat_vec(gamma, eps);
    let mut worst = 0.0_f64;
    let mut holds = true;
    for i in 0..n {
        if eps[i] > 0.0 {
            worst = worst.max(g_eps[i] / eps[i]);
        } else if g_eps[i] > 0.0 {
            holds = false;
        }
    }
    let delta = (holds && worst < 1.0 && eps.iter().any(|&e| e > 0.0)).then_some(1.0 - worst);
    let nu_delta_bound = delta.map(|d| eps.iter().map(|e| 2.0 * e / d).collect());
    Ok(DobrushinBound { phi, nu_bound, delta, nu_delta_bound })
}

/// Bounds on `E[AB] / (E[A] E[B])` for positive `A`, `B` whose ranges
/// satisfy `sup/inf ≤ e^{2a}` and `e^{2b}`:
/// `(1 + (e^{2a} - 1)(e^{2b} - 1) / (e^a + e^b)², e^{ab})`. The first never
/// exceeds the second.
pub fn covariance_ratio_bounds(a: f64, b: f64) -> (f64, f64) {
    let tight = 1.0 + (2.0 * a).exp_m1() * (2.0 * b).exp_m1() / (a.exp() + b.exp()).powi(2);
    (tight, (a * b).exp())
}
