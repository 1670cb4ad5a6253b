//! Mechanisms as event profiles and finite outcome tables.
//!
//! An [`EventProfile`] is `m(x) = Pr(M(x) ∈ S)` for one distinguished outcome
//! set `S`. Every quantity in this crate depends on a mechanism only through
//! such profiles, so they double as the variable object of the exact LP.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::JointDistribution;
use crate::error::{InferaError, Result};
use crate::numeric::{checked_pow, digit, insert_digit, kahan_sum, with_digit};

/// Per-individual differential privacy parameters `ε_i ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrivacyBudget(Vec<f64>);

impl PrivacyBudget {
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(InferaError::InvalidParameter("empty privacy budget".into()));
        }
        if let Some(e) = eps.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
            return Err(InferaError::InvalidParameter(format!("epsilon {e} must be finite and >= 0")));
        }
        Ok(Self(eps))
    }

    pub fn uniform(n: usize, eps: f64) -> Result<Self> {
        Self::new(vec![eps; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.0.iter().copied())
    }

    /// Componentwise `self ≤ other + tol`.
    pub fn within(&self, other: &PrivacyBudget, tol: f64) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| *a <= b + tol)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(InferaError::DimensionMismatch(format!(
                "budget has {} entries, distribution has n = {n}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// `m(x) = Pr(M(x) ∈ S)` over `X^n`, every entry in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventProfile {
    n: usize,
    alphabet: usize,
    m: Vec<f64>,
}

impl EventProfile {
    pub fn new(n: usize, alphabet: usize, m: Vec<f64>) -> Result<Self> {
        let len = checked_pow(alphabet, n)
            .ok_or_else(|| InferaError::DimensionMismatch("profile too large".into()))?;
        if m.len() != len {
            return Err(InferaError::DimensionMismatch(format!(
                "profile has {} entries, expected {len}",
                m.len()
            )));
        }
        if let Some((index, &value)) = m.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v <= 1.0)) {
            return Err(InferaError::InvalidProfile { index, value });
        }
        Ok(Self { n, alphabet, m })
    }

    /// Binary profile from entries, inferring `n` from the length.
    pub fn binary(m: Vec<f64>) -> Result<Self> {
        let len = m.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(InferaError::DimensionMismatch(format!(
                "binary profile length {len} is not a power of two"
            )));
        }
        Self::new(len.trailing_zeros() as usize, 2, m)
    }

    /// Divide by the maximum entry so the largest value is exactly 1.
    /// Ratios, and therefore audit and `ν`, are unchanged.
    pub fn from_unscaled(n: usize, alphabet: usize, m: Vec<f64>) -> Result<Self> {
        let max = m.iter().copied().fold(0.0_f64, f64::max);
        if !(max > 0.0) || !max.is_finite() {
            return Err(InferaError::InvalidParameter("profile has no positive finite entry".into()));
        }
        Self::new(n, alphabet, m.into_iter().map(|v| v / max).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn values(&self) -> &[f64] {
        &self.m
    }

    pub fn get(&self, x: usize) -> f64 {
        self.m[x]
    }
}

/// A mechanism with `k` named outcomes; column `x` of `table` is the output
/// distribution on database `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeTable {
    n: usize,
    alphabet: usize,
    outcomes: Vec<String>,
    table: Vec<Vec<f64>>,
}

impl OutcomeTable {
    /// `table[o][x] = Pr(M(x) = o)`.
    pub fn new(n: usize, alphabet: usize, outcomes: Vec<String>, table: Vec<Vec<f64>>) -> Result<Self> {
        let len = checked_pow(alphabet, n)
            .ok_or_else(|| InferaError::DimensionMismatch("table too large".into()))?;
        if outcomes.len() != table.len() || table.is_empty() {
            return Err(InferaError::DimensionMismatch("one table row per outcome required".into()));
        }
        if table.iter().any(|row| row.len() != len) {
            return Err(InferaError::DimensionMismatch(format!("each row needs {len} entries")));
        }
        for (o, row) in table.iter().enumerate() {
            if let Some((x, &v)) = row.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
                return Err(InferaError::NegativeProbability { index: o * len + x, value: v });
            }
        }
        for x in 0..len {
            let s = kahan_sum(table.iter().map(|row| row[x]));
            if (s - 1.0).abs() > 1e-12 {
                return Err(InferaError::DimensionMismatch(format!(
                    "column {x} sums to {s}, expected 1"
                )));
            }
        }
        Ok(Self { n, alphabet, outcomes, table })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn row(&self, o: usize) -> &[f64] {
        &self.table[o]
    }

    /// Two-outcome realization of a profile: `o` with probability `m(x)`,
    /// `o'` otherwise.
    pub fn from_profile(profile: &EventProfile) -> Self {
        let m = profile.values().to_vec();
        let rest = m.iter().map(|v| 1.0 - v).collect();
        Self {
            n: profile.n,
            alphabet: profile.alphabet,
            outcomes: vec!["in".into(), "out".into()],
            table: vec![m, rest],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Mechanism {
    Profile(EventProfile),
    Table(OutcomeTable),
}

impl Mechanism {
    pub fn n(&self) -> usize {
        match self {
            Mechanism::Profile(p) => p.n,
            Mechanism::Table(t) => t.n,
        }
    }

    pub fn alphabet(&self) -> usize {
        match self {
            Mechanism::Profile(p) => p.alphabet,
            Mechanism::Table(t) => t.alphabet,
        }
    }
}

/// Maximally `z`-biased profile: `m(x) ∝ Π_i exp(-ε_i |x_i - z|)`, scaled to
/// a maximum of 1 (attained at the constant database `z…z`).
pub fn max_biased_profile(n: usize, budget: &PrivacyBudget, z: usize) -> Result<EventProfile> {
    if z > 1 {
        return Err(InferaError::UnsupportedAlphabet(z + 1));
    }
    budget.check_len(n)?;
    let len = checked_pow(2, n).ok_or_else(|| InferaError::DimensionMismatch("n too large".into()))?;
    let eps = budget.as_slice();
    let m = (0..len)
        .map(|x| {
            let cost: f64 = (0..n).filter(|&i| (x >> i & 1) != z).map(|i| eps[i]).sum();
            (-cost).exp()
        })
        .collect();
    EventProfile::new(n, 2, m)
}

/// Exact tail probability of the Laplace noisy sum `|x| + Y`,
/// `Y ~ Laplace(0, 1/ε)`: `Pr(· ≤ 0)` for `z = 0`, `Pr(· ≥ n)` for `z = 1`.
pub fn noisy_sum_tail_profile(n: usize, eps: f64, z: usize) -> Result<EventProfile> {
    if z > 1 {
        return Err(InferaError::UnsupportedAlphabet(z + 1));
    }
    if !(eps >= 0.0) {
        return Err(InferaError::InvalidParameter(format!("epsilon {eps} must be >= 0")));
    }
    let len = checked_pow(2, n).ok_or_else(|| InferaError::DimensionMismatch("n too large".into()))?;
    let m = (0..len)
        .map(|x| {
            let w = x.count_ones() as f64;
            let dist = if z == 0 { w } else { n as f64 - w };
            0.5 * (-eps * dist).exp()
        })
        .collect();
    EventProfile::new(n, 2, m)
}

/// One Laplace(0, `scale`) draw by inverse CDF from a uniform on `(-½, ½)`.
pub fn laplace_inverse_cdf(u: f64, scale: f64) -> f64 {
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Seeded sampler for the noisy-sum mechanism `Σ x_i + Laplace(0, 1/ε)`.
///
/// Uniforms come from ChaCha8 seeded by `seed_from_u64`, 53-bit mantissa
/// draws mapped to `(-½, ½)`, then [`laplace_inverse_cdf`].
pub struct NoisySumSampler {
    scale: f64,
    rng: ChaCha8Rng,
}

impl NoisySumSampler {
    pub fn new(eps: f64, seed: u64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(InferaError::InvalidParameter(format!("epsilon {eps} must be > 0")));
        }
        Ok(Self { scale: 1.0 / eps, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn sample(&mut self, x: &[usize]) -> f64 {
        let u: f64 = loop {
            let u = self.rng.random::<f64>() - 0.5;
            if u > -0.5 {
                break u;
            }
        };
        let sum: usize = x.iter().sum();
        sum as f64 + laplace_inverse_cdf(u, self.scale)
    }
}

/// One noisy-sum output for database `x`, deterministic in `seed`.
pub fn sample_noisy_sum(x: &[usize], eps: f64, seed: u64) -> Result<f64> {
    Ok(NoisySumSampler::new(eps, seed)?.sample(x))
}

/// Number of odd entries among `x_a` and the `r` block sums of the parity
/// layout used by [`JointDistribution::parity_constrained`].
pub fn parity_odd_count(x: usize, r: usize, s: usize) -> usize {
    let block_mask = (1usize << s) - 1;
    (x & 1) + (0..r).filter(|i| ((x >> (1 + i * s)) & block_mask).count_ones() % 2 == 1).count()
}

/// `Pr(k(x) + Laplace(1/ε) ≤ 0) = ½·e^{-ε·k(x)}` where `k` is the odd count.
pub fn parity_mechanism_m1_profile(r: usize, s: usize, eps: f64) -> Result<EventProfile> {
    if r == 0 || s == 0 {
        return Err(InferaError::InvalidParameter("r and s must be at least 1".into()));
    }
    let n = 1 + r * s;
    let len = checked_pow(2, n).ok_or_else(|| InferaError::DimensionMismatch("n too large".into()))?;
    let m = (0..len)
        .map(|x| 0.5 * (-eps * parity_odd_count(x, r, s) as f64).exp())
        .collect();
    EventProfile::new(n, 2, m)
}

fn audit_values(n: usize, alphabet: usize, m: &[f64]) -> Vec<f64> {
    let mut eps = vec![0.0_f64; n];
    for x in 0..m.len() {
        for (i, e) in eps.iter_mut().enumerate() {
            let xi = digit(x, i, alphabet);
            for v in (xi + 1)..alphabet {
                let y = with_digit(x, i, v, alphabet);
                let (a, b) = (m[x], m[y]);
                let r = if a == b {
                    0.0
                } else if a == 0.0 || b == 0.0 {
                    f64::INFINITY
                } else {
                    (a / b).ln().abs()
                };
                *e = e.max(r);
            }
        }
    }
    eps
}

/// Event-level DP parameters: `ε_i = max |ln(m(x)/m(x'))|` over `x ~_i x'`.
///
/// This is the parameter with respect to the single event `S`. A two-outcome
/// mechanism realizing the profile (`S` or its complement) also has the
/// complement event to account for; scaling `m` down by a common factor
/// leaves these ratios unchanged and drives the complement's ratios to 1,
/// so the audit value is the parameter of a suitable full mechanism.
pub fn dp_audit(profile: &EventProfile) -> PrivacyBudget {
    PrivacyBudget(audit_values(profile.n, profile.alphabet, &profile.m))
}

/// DP parameters of a full outcome table: the max over outcomes of the
/// per-outcome audit. Zero against nonzero gives an infinite parameter.
pub fn dp_audit_table(table: &OutcomeTable) -> PrivacyBudget {
    let mut eps = vec![0.0_f64; table.n];
    for row in &table.table {
        for (e, v) in eps.iter_mut().zip(audit_values(table.n, table.alphabet, row)) {
            *e = e.max(v);
        }
    }
    PrivacyBudget(eps)
}

/// Weighted sums `Σ_y π^z(y)·m(z at a, y)` for each symbol `z`; `None` when
/// the slice is unsupported.
fn conditional_event_probs(dist: &JointDistribution, m: &[f64], a: usize) -> Result<Vec<Option<f64>>> {
    let alphabet = dist.alphabet();
    (0..alphabet)
        .map(|z| match dist.conditional_slice(a, z) {
            Ok(slice) => Ok(Some(kahan_sum(
                slice
                    .probs
                    .iter()
                    .enumerate()
                    .map(|(y, &p)| p * m[insert_digit(y, a, z, alphabet)]),
            ))),
            Err(InferaError::InsufficientSupport { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// `ln` of the largest ratio `Pr(S | x_a = z1) / Pr(S | x_a = z0)` for one
/// event. Returns `None` when `S` has probability zero under every branch.
fn event_nu(dist: &JointDistribution, m: &[f64], a: usize) -> Result<Option<f64>> {
    let probs = conditional_event_probs(dist, m, a)?;
    let supported: Vec<f64> = probs.iter().flatten().copied().collect();
    if supported.len() < 2 {
        return Err(InferaError::InsufficientSupport {
            index: a,
            value: probs.iter().position(Option::is_none).unwrap_or(0),
        });
    }
    let hi = supported.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = supported.iter().copied().fold(f64::INFINITY, f64::min);
    if hi == 0.0 {
        return Ok(None);
    }
    if lo == 0.0 {
        return Ok(Some(f64::INFINITY));
    }
    Ok(Some((hi / lo).ln()))
}

fn check_mechanism_shape(dist: &JointDistribution, n: usize, alphabet: usize) -> Result<()> {
    if dist.n() != n || dist.alphabet() != alphabet {
        return Err(InferaError::DimensionMismatch(format!(
            "mechanism over n={n}, alphabet={alphabet} vs distribution n={}, alphabet={}",
            dist.n(),
            dist.alphabet()
        )));
    }
    Ok(())
}

/// Inferential privacy parameter of one event profile for individual `a`.
pub fn profile_nu(dist: &JointDistribution, profile: &EventProfile, a: usize) -> Result<f64> {
    check_mechanism_shape(dist, profile.n, profile.alphabet)?;
    Ok(event_nu(dist, &profile.m, a)?.unwrap_or(0.0))
}

/// Inferential privacy parameter `ν_a` of a mechanism under prior `dist`.
///
/// For a table the maximum is taken over single outcomes. That loses
/// nothing: for any outcome set `S`, `Σ_{o∈S} p1(o) / Σ_{o∈S} p0(o)` is a
/// mediant of the per-outcome ratios and so never exceeds the largest of them.
///
/// A ratio with zero denominator and positive numerator yields
/// `f64::INFINITY` (unbounded `ν`).
pub fn mechanism_nu(dist: &JointDistribution, mechanism: &Mechanism, a: usize) -> Result<f64> {
    match mechanism {
        Mechanism::Profile(p) => profile_nu(dist, p, a),
        Mechanism::Table(t) => {
            check_mechanism_shape(dist, t.n, t.alphabet)?;
            let mut best = 0.0_f64;
            for row in &t.table {
                if let Some(nu) = event_nu(dist, row, a)? {
                    best = best.max(nu);
                }
            }
            Ok(best)
        }
    }
}

/// Signed `ln(Pr(S | x_a = z1) / Pr(S | x_a = z0))` for one ordered pair.
pub fn directional_nu(dist: &JointDistribution, profile: &EventProfile, a: usize, z0: usize, z1: usize) -> Result<f64> {
    check_mechanism_shape(dist, profile.n, profile.alphabet)?;
    let probs = conditional_event_probs(dist, &profile.m, a)?;
    let num = probs[z1].ok_or(InferaError::InsufficientSupport { index: a, value: z1 })?;
    let den = probs[z0].ok_or(InferaError::InsufficientSupport { index: a, value: z0 })?;
    Ok((num / den).ln())
}
