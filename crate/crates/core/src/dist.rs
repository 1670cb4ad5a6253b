//! Dense joint distributions over databases `x ∈ X^n`.
//!
//! Databases are indexed by a little-endian mixed-radix encoding: coordinate 0
//! is the least significant digit. For the binary alphabet the index is simply
//! the bit pattern with `x_i = (index >> i) & 1`.

use serde::Serialize;

use crate::error::{InferaError, Result};
use crate::numeric::{self, checked_pow, digit, insert_digit, kahan_sum, size_cap, KahanSum};

/// Mass tolerance used by the normalization invariants.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    n: usize,
    alphabet: usize,
    probs: Vec<f64>,
}

/// Conditional distribution of `x_{-a}` given `x_a = value`.
///
/// `probs` is indexed over `X^{n-1}` with coordinate `a` removed and the
/// remaining coordinates kept in their original order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalSlice {
    pub target: usize,
    pub value: usize,
    /// `Pr(x_a = value)` under the full distribution.
    pub mass: f64,
    pub probs: Vec<f64>,
}

/// Outcome of the positive-affiliation test. On failure `witness` holds two
/// database indices `x1, x2` with `π(x1 ∨ x2)·π(x1 ∧ x2) < π(x1)·π(x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffiliationCheck {
    pub affiliated: bool,
    pub witness: Option<(usize, usize)>,
}

fn check_dims(n: usize, alphabet: usize) -> Result<usize> {
    if n == 0 {
        return Err(InferaError::InvalidParameter("n must be at least 1".into()));
    }
    if alphabet < 2 {
        return Err(InferaError::InvalidParameter("alphabet size must be at least 2".into()));
    }
    let cap = size_cap();
    let len = checked_pow(alphabet, n).ok_or(InferaError::SizeCap {
        what: "distribution entries",
        needed: usize::MAX,
        cap,
    })?;
    if len > cap {
        return Err(InferaError::SizeCap { what: "distribution entries", needed: len, cap });
    }
    Ok(len)
}

impl JointDistribution {
    /// Build from unnormalized nonnegative weights; the result is divided by
    /// the (compensated) total.
    pub fn from_dense(n: usize, alphabet: usize, probs: Vec<f64>) -> Result<Self> {
        let len = check_dims(n, alphabet)?;
        if probs.len() != len {
            return Err(InferaError::DimensionMismatch(format!(
                "expected {len} probabilities for n={n}, alphabet={alphabet}, got {}",
                probs.len()
            )));
        }
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !(**p >= 0.0) || !p.is_finite()) {
            return Err(InferaError::NegativeProbability { index, value });
        }
        let total = kahan_sum(probs.iter().copied());
        if !(total > 0.0) {
            return Err(InferaError::ZeroMass);
        }
        let probs = probs.into_iter().map(|p| p / total).collect();
        Ok(Self { n, alphabet, probs })
    }

    /// Build from log-weights `ln π(x)` up to an additive constant.
    pub fn from_log_weights<F>(n: usize, alphabet: usize, mut log_weight: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> f64,
    {
        let len = check_dims(n, alphabet)?;
        let mut xs = vec![0usize; n];
        let mut logs = Vec::with_capacity(len);
        for idx in 0..len {
            for (i, x) in xs.iter_mut().enumerate() {
                *x = digit(idx, i, alphabet);
            }
            logs.push(log_weight(&xs));
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(InferaError::ZeroMass);
        }
        Self::from_dense(n, alphabet, logs.into_iter().map(|l| (l - max).exp()).collect())
    }

    /// Independent coordinates with the given per-coordinate marginals.
    pub fn product(marginals: &[Vec<f64>]) -> Result<Self> {
        let n = marginals.len();
        let alphabet = marginals.first().map_or(0, Vec::len);
        if n == 0 || marginals.iter().any(|m| m.len() != alphabet) {
            return Err(InferaError::DimensionMismatch(
                "marginals must be non-empty and share one alphabet size".into(),
            ));
        }
        for m in marginals {
            if m.iter().any(|p| !(*p >= 0.0)) || (kahan_sum(m.iter().copied()) - 1.0).abs() > 1e-9 {
                return Err(InferaError::DimensionMismatch(format!(
                    "marginal {m:?} is not a probability vector"
                )));
            }
        }
        let len = check_dims(n, alphabet)?;
        let probs = (0..len)
            .map(|idx| (0..n).map(|i| marginals[i][digit(idx, i, alphabet)]).product())
            .collect();
        Self::from_dense(n, alphabet, probs)
    }

    /// Clones: mass `1 - p_one` on all-zeros and `p_one` on all-ones.
    pub fn perfectly_correlated(n: usize, p_one: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_one) {
            return Err(InferaError::InvalidParameter(format!("p_one = {p_one} outside [0, 1]")));
        }
        let len = check_dims(n, 2)?;
        let mut probs = vec![0.0; len];
        probs[0] = 1.0 - p_one;
        probs[len - 1] += p_one;
        Self::from_dense(n, 2, probs)
    }

    /// Uniform distribution over solutions of `x_a + Σ_j x_ij ≡ 0 (mod 2)` for
    /// each block `i ∈ 0..r`. Coordinate 0 is `x_a`; `x_ij` sits at `1 + i·s + j`.
    pub fn parity_constrained(r: usize, s: usize) -> Result<Self> {
        if r == 0 || s == 0 {
            return Err(InferaError::InvalidParameter("r and s must be at least 1".into()));
        }
        let n = r
            .checked_mul(s)
            .and_then(|v| v.checked_add(1))
            .ok_or(InferaError::SizeCap { what: "parity coordinates", needed: usize::MAX, cap: size_cap() })?;
        let len = check_dims(n, 2)?;
        let probs = (0..len)
            .map(|idx| {
                let xa = idx & 1;
                let ok = (0..r).all(|i| {
                    let block = (idx >> (1 + i * s)) & ((1usize << s) - 1);
                    (xa + block.count_ones() as usize).is_multiple_of(2)
                });
                if ok {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_dense(n, 2, probs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn total_mass(&self) -> f64 {
        kahan_sum(self.probs.iter().copied())
    }

    fn check_index(&self, a: usize) -> Result<()> {
        if a >= self.n {
            return Err(InferaError::InvalidParameter(format!(
                "individual index {a} out of range for n = {}",
                self.n
            )));
        }
        Ok(())
    }

    fn require_binary(&self) -> Result<()> {
        if self.alphabet != 2 {
            return Err(InferaError::UnsupportedAlphabet(self.alphabet));
        }
        Ok(())
    }

    /// Marginal distribution of coordinate `i`.
    pub fn marginal(&self, i: usize) -> Vec<f64> {
        let mut acc = vec![KahanSum::new(); self.alphabet];
        for (idx, &p) in self.probs.iter().enumerate() {
            acc[digit(idx, i, self.alphabet)].add(p);
        }
        acc.iter().map(KahanSum::value).collect()
    }

    /// Marginal distribution of `x_{-a}` over `X^{n-1}`.
    pub fn marginal_without(&self, a: usize) -> Vec<f64> {
        let rest_len = self.len() / self.alphabet;
        (0..rest_len)
            .map(|y| kahan_sum((0..self.alphabet).map(|z| self.probs[insert_digit(y, a, z, self.alphabet)])))
            .collect()
    }

    /// `π^z`: the distribution of `x_{-a}` given `x_a = z`.
    pub fn conditional_slice(&self, a: usize, z: usize) -> Result<ConditionalSlice> {
        self.check_index(a)?;
        if z >= self.alphabet {
            return Err(InferaError::InvalidParameter(format!("symbol {z} outside alphabet")));
        }
        let rest_len = self.len() / self.alphabet;
        let joint: Vec<f64> = (0..rest_len)
            .map(|y| self.probs[insert_digit(y, a, z, self.alphabet)])
            .collect();
        let mass = kahan_sum(joint.iter().copied());
        if !(mass > 0.0) {
            return Err(InferaError::InsufficientSupport { index: a, value: z });
        }
        Ok(ConditionalSlice {
            target: a,
            value: z,
            mass,
            probs: joint.into_iter().map(|p| p / mass).collect(),
        })
    }

    /// Prior odds `Pr(x_a = 1) / Pr(x_a = 0)` for a binary prior.
    pub fn prior_odds(&self, a: usize) -> Result<f64> {
        self.require_binary()?;
        self.check_index(a)?;
        let m = self.marginal(a);
        if !(m[0] > 0.0) {
            return Err(InferaError::InsufficientSupport { index: a, value: 0 });
        }
        Ok(m[1] / m[0])
    }

    /// Test `π(x1 ∨ x2)·π(x1 ∧ x2) ≥ π(x1)·π(x2)` for all pairs.
    ///
    /// For a strictly positive `π` on the hypercube, `log π` is supermodular
    /// iff the inequality holds for every pair `x + e_i`, `x + e_j` with
    /// `x_i = x_j = 0` (the local-to-global lattice lemma), so only those
    /// `O(n²·2ⁿ)` pairs are checked. The lemma needs positivity: a prior with
    /// zeros can pass every local test while failing globally, so when any
    /// entry is zero the local pass is followed by an exhaustive check over
    /// pairs of support points (pairs involving a zero pass trivially).
    ///
    /// A product equal to zero on the right always passes; a zero on the left
    /// against a positive right fails.
    pub fn is_positively_affiliated(&self) -> Result<AffiliationCheck> {
        self.require_binary()?;
        let n = self.n;
        let p = &self.probs;
        let holds = |x1: usize, x2: usize| -> bool {
            let rhs = p[x1] * p[x2];
            if rhs == 0.0 {
                return true;
            }
            let lhs = p[x1 | x2] * p[x1 & x2];
            lhs >= rhs * (1.0 - 1e-12)
        };
        for x in 0..p.len() {
            for i in 0..n {
                if x >> i & 1 == 1 {
                    continue;
                }
                for j in (i + 1)..n {
                    if x >> j & 1 == 1 {
                        continue;
                    }
                    let (x1, x2) = (x | 1 << i, x | 1 << j);
                    if !holds(x1, x2) {
                        return Ok(AffiliationCheck { affiliated: false, witness: Some((x1, x2)) });
                    }
                }
            }
        }
        if p.contains(&0.0) {
            let support: Vec<usize> = (0..p.len()).filter(|&x| p[x] > 0.0).collect();
            for (k, &x1) in support.iter().enumerate() {
                for &x2 in &support[k + 1..] {
                    if !holds(x1, x2) {
                        return Ok(AffiliationCheck { affiliated: false, witness: Some((x1, x2)) });
                    }
                }
            }
        }
        Ok(AffiliationCheck { affiliated: true, witness: None })
    }

    /// `E[x_i x_j] ≥ E[x_i] E[x_j]` for every pair `i < j`.
    pub fn is_pairwise_positively_correlated(&self) -> Result<bool> {
        self.require_binary()?;
        let n = self.n;
        let means: Vec<f64> = (0..n).map(|i| self.marginal(i)[1]).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let mask = (1usize << i) | (1usize << j);
                let joint = kahan_sum(
                    self.probs
                        .iter()
                        .enumerate()
                        .filter(|(x, _)| x & mask == mask)
                        .map(|(_, &p)| p),
                );
                if joint < means[i] * means[j] - 1e-12 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Reweight by `exp(Σ_i fields[i]·σ_i)` with `σ_i = (-1)^{x_i}` (binary only).
    pub fn with_external_field(&self, fields: &[f64]) -> Result<Self> {
        self.require_binary()?;
        if fields.len() != self.n {
            return Err(InferaError::DimensionMismatch(format!(
                "{} fields for n = {}",
                fields.len(),
                self.n
            )));
        }
        let logs: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(x, &p)| {
                let h: f64 = (0..self.n)
                    .map(|i| if x >> i & 1 == 0 { fields[i] } else { -fields[i] })
                    .sum();
                if p > 0.0 {
                    p.ln() + h
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::from_dense(self.n, 2, logs.into_iter().map(|l| (l - max).exp()).collect())
    }

    pub fn digits(&self, index: usize) -> Vec<usize> {
        numeric::digits(index, self.n, self.alphabet)
    }
}

impl ConditionalSlice {
    pub fn total(&self) -> f64 {
        kahan_sum(self.probs.iter().copied())
    }
}
