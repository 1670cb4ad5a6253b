//! Closed-form worst-case `ν` for positively affiliated binary priors.
//!
//! When `log π` is supermodular the worst mechanism is maximally biased, so
//! `ν_a` reduces to two weighted sums per branch `z`:
//!
//! ```text
//! ν_a = max_z | ln( Σ_{x=(z,y)} π^z(y)·w_z(x) / Σ_{x=(1-z,y)} π^{1-z}(y)·w_z(x) ) |,
//! w_z(x) = exp(-Σ_i ε_i |x_i - z|)
//! ```

use rand::Rng;
use serde::Serialize;

use crate::dist::JointDistribution;
use crate::error::{InferaError, Result};
use crate::mechanism::PrivacyBudget;
use crate::numeric::{insert_digit, kahan_sum};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormResult {
    pub nu: f64,
    pub winning_z: usize,
    pub numerator: f64,
    pub denominator: f64,
    /// Set when the affiliation check was bypassed and failed.
    pub warning: Option<String>,
}

/// `(numerator, denominator)` of the `z` branch.
fn branch_sums(dist: &JointDistribution, budget: &PrivacyBudget, a: usize, z: usize) -> Result<(f64, f64)> {
    let eps = budget.as_slice();
    let n = dist.n();
    let weight = |x: usize| -> f64 {
        let cost: f64 = (0..n).filter(|&i| (x >> i & 1) != z).map(|i| eps[i]).sum();
        (-cost).exp()
    };
    let sum_for = |value: usize| -> Result<f64> {
        let slice = dist.conditional_slice(a, value)?;
        Ok(kahan_sum(
            slice
                .probs
                .iter()
                .enumerate()
                .map(|(y, &p)| p * weight(insert_digit(y, a, value, 2))),
        ))
    };
    Ok((sum_for(z)?, sum_for(1 - z)?))
}

fn check_inputs(dist: &JointDistribution, budget: &PrivacyBudget, a: usize) -> Result<()> {
    if dist.alphabet() != 2 {
        return Err(InferaError::UnsupportedAlphabet(dist.alphabet()));
    }
    budget.check_len(dist.n())?;
    if a >= dist.n() {
        return Err(InferaError::InvalidParameter(format!("individual {a} out of range")));
    }
    Ok(())
}

/// Closed-form `ν_a`. Fails with `NotAffiliated` unless the prior passes
/// [`JointDistribution::is_positively_affiliated`] or `force` is set; a
/// forced result on a non-affiliated prior carries a warning, since the
/// formula is then only the `ν` of the maximally biased mechanisms.
pub fn nu_closed_form(dist: &JointDistribution, budget: &PrivacyBudget, a: usize, force: bool) -> Result<ClosedFormResult> {
    check_inputs(dist, budget, a)?;
    let check = dist.is_positively_affiliated()?;
    let warning = if check.affiliated {
        None
    } else if force {
        let (x1, x2) = check.witness.unwrap_or_default();
        Some(format!(
            "prior is not positively affiliated (pair {x1}, {x2}); value is the maximally-biased ν, not a worst case"
        ))
    } else {
        let (x1, x2) = check.witness.unwrap_or_default();
        return Err(InferaError::NotAffiliated(x1, x2));
    };

    let mut best: Option<ClosedFormResult> = None;
    for z in 0..2 {
        let (numerator, denominator) = branch_sums(dist, budget, a, z)?;
        let nu = (numerator / denominator).ln().abs();
        if best.as_ref().is_none_or(|b| nu > b.nu) {
            best = Some(ClosedFormResult { nu, winning_z: z, numerator, denominator, warning: None });
        }
    }
    let mut res = best.expect("two branches evaluated");
    res.warning = warning;
    Ok(res)
}

/// Signed log-ratio `ln(Pr(S | x_a = z) / Pr(S | x_a = 1-z))` for the
/// maximally `z`-biased profile. No affiliation requirement.
pub fn nu_of_max_biased(dist: &JointDistribution, budget: &PrivacyBudget, a: usize, z: usize) -> Result<f64> {
    check_inputs(dist, budget, a)?;
    if z > 1 {
        return Err(InferaError::InvalidParameter(format!("z = {z} must be 0 or 1")));
    }
    let (num, den) = branch_sums(dist, budget, a, z)?;
    Ok((num / den).ln())
}

/// Random strictly positive log-supermodular prior:
/// `π(x) ∝ exp(Σ θ_i x_i + Σ_{i<j} J_ij x_i x_j)` with `θ_i ~ U(-θmax, θmax)`
/// and `J_ij ~ U(0, jmax)`. Nonnegative pairwise terms make `log π`
/// supermodular by construction.
pub fn random_affiliated_prior<R: Rng + ?Sized>(n: usize, theta_max: f64, j_max: f64, rng: &mut R) -> Result<JointDistribution> {
    let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-theta_max..=theta_max)).collect();
    let mut coupling = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            coupling[i][j] = rng.random_range(0.0..=j_max);
        }
    }
    JointDistribution::from_log_weights(n, 2, |x| {
        let mut s = 0.0;
        for i in 0..n {
            if x[i] == 1 {
                s += theta[i];
                for j in (i + 1)..n {
                    if x[j] == 1 {
                        s += coupling[i][j];
                    }
                }
            }
        }
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{directional_nu, max_biased_profile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn product_prior_gives_eps_a() {
        let d = JointDistribution::product(&[vec![0.2, 0.8], vec![0.6, 0.4], vec![0.5, 0.5]]).unwrap();
        let b = PrivacyBudget::new(vec![0.3, 0.1, 0.7]).unwrap();
        for a in 0..3 {
            let r = nu_closed_form(&d, &b, a, false).unwrap();
            assert!((r.nu - b.get(a)).abs() < 1e-12);
            assert!((r.nu - (r.numerator / r.denominator).ln().abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn twins_give_two_epsilon() {
        let d = JointDistribution::perfectly_correlated(2, 0.5).unwrap();
        let r = nu_closed_form(&d, &PrivacyBudget::uniform(2, 0.5).unwrap(), 0, false).unwrap();
        assert!((r.nu - 1.0).abs() < 1e-12);
        assert!(r.warning.is_none());
    }

    #[test]
    fn max_biased_matches_directional_profile_nu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_affiliated_prior(4, 0.5, 0.8, &mut rng).unwrap();
        let b = PrivacyBudget::new(vec![0.2, 0.5, 0.3, 0.1]).unwrap();
        for z in 0..2 {
            let p = max_biased_profile(4, &b, z).unwrap();
            let direct = directional_nu(&d, &p, 2, 1 - z, z).unwrap();
            let closed = nu_of_max_biased(&d, &b, 2, z).unwrap();
            assert!((direct - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn twins_branches_are_symmetric() {
        let d = JointDistribution::perfectly_correlated(3, 0.5).unwrap();
        let b = PrivacyBudget::uniform(3, 0.4).unwrap();
        let v0 = nu_of_max_biased(&d, &b, 1, 0).unwrap();
        let v1 = nu_of_max_biased(&d, &b, 1, 1).unwrap();
        assert!((v0 - v1).abs() < 1e-12);
    }

    #[test]
    fn parity_requires_force() {
        let d = JointDistribution::parity_constrained(2, 2).unwrap();
        let b = PrivacyBudget::uniform(5, 0.2).unwrap();
        assert!(matches!(nu_closed_form(&d, &b, 0, false), Err(InferaError::NotAffiliated(..))));
        let forced = nu_closed_form(&d, &b, 0, true).unwrap();
        assert!(forced.warning.is_some());
        let v = nu_of_max_biased(&d, &b, 0, 0).unwrap();
        assert!(v <= 0.2 + 2.0 * 2.0 * 0.2f64.powi(2) + 1e-9);
    }

    #[test]
    fn random_generator_is_affiliated() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d = random_affiliated_prior(4, 1.0, 1.0, &mut rng).unwrap();
            assert!(d.is_positively_affiliated().unwrap().affiliated);
        }
    }
}
