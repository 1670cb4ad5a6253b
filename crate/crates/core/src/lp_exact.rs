//! Exact worst-case `ν` over all `ε`-DP mechanisms.
//!
//! For a fixed direction `(z0, z1)` the largest posterior shift any
//! `ε`-differentially private mechanism can cause equals
//!
//! ```text
//! maximize   Σ_y π^{z1}(y)·m(z1, y)
//! subject to Σ_y π^{z0}(y)·m(z0, y) = 1
//!            m(x) ≤ e^{ε_i}·m(x')   for every i and every x ~_i x'
//!            m ≥ 0
//! ```
//!
//! The ratio form of the problem is invariant under scaling `m`, so the
//! normalization row costs nothing, and any feasible `m` scaled down far
//! enough is the event profile of a genuine two-outcome `ε`-DP mechanism.
//! The program is bounded: the ratio constraints on a connected hypercube
//! keep every entry within `e^{Σε}` of every other, and the normalization
//! row pins the overall scale.

use serde::Serialize;

use crate::dist::JointDistribution;
use crate::error::{InferaError, Result};
use crate::mechanism::{directional_nu, dp_audit, EventProfile, PrivacyBudget};
use crate::numeric::insert_digit;
use crate::simplex::{simplex_solve_with, LinearProgram, LpStatus, SimplexOptions, SparseRow};

/// Default cap on `n` for the LP.
pub const DEFAULT_LP_MAX_N: usize = 12;

/// Witness tolerance for the ratio constraints and the `ν` round trip.
pub const WITNESS_TOL: f64 = 1e-7;

/// Directions whose `ν` differ by at most this much are a tie, reported as `(0, 1)`.
const DIRECTION_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuCertificate {
    pub nu: f64,
    /// `(z0, z1)` attaining the maximum; `(0, 1)` on ties.
    pub direction: (usize, usize),
    /// Optimal profile rescaled so its largest entry is 1.
    pub witness: EventProfile,
    /// Raw LP optimum for the winning direction, `e^ν`.
    pub lp_objective: f64,
    /// `ν` for the directions `(0, 1)` and `(1, 0)`.
    pub directional: [f64; 2],
    pub iterations: usize,
}

/// LP for one direction `(z0, z1)` at individual `a`.
pub fn build_lp(dist: &JointDistribution, budget: &PrivacyBudget, a: usize, z0: usize, z1: usize) -> Result<LinearProgram> {
    if dist.alphabet() != 2 {
        return Err(InferaError::UnsupportedAlphabet(dist.alphabet()));
    }
    let n = dist.n();
    budget.check_len(n)?;
    if z0 > 1 || z1 > 1 || z0 == z1 {
        return Err(InferaError::InvalidParameter(format!("direction ({z0}, {z1}) must be (0,1) or (1,0)")));
    }
    let lo = dist.conditional_slice(a, z0)?;
    let hi = dist.conditional_slice(a, z1)?;
    let num_vars = dist.len();

    let mut objective = vec![0.0; num_vars];
    for (y, &p) in hi.probs.iter().enumerate() {
        objective[insert_digit(y, a, z1, 2)] = p;
    }
    let norm = SparseRow::new(
        lo.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(y, &p)| (insert_digit(y, a, z0, 2), p))
            .collect(),
        1.0,
    );

    let mut ineq = Vec::with_capacity(n * num_vars);
    for x in 0..num_vars {
        for i in 0..n {
            if x >> i & 1 == 1 {
                continue;
            }
            let y = x | 1 << i;
            let k = budget.get(i).exp();
            ineq.push(SparseRow::new(vec![(x, 1.0), (y, -k)], 0.0));
            ineq.push(SparseRow::new(vec![(y, 1.0), (x, -k)], 0.0));
        }
    }
    Ok(LinearProgram { num_vars, objective, eq_constraints: vec![norm], ineq_constraints: ineq })
}

pub fn nu_exact(dist: &JointDistribution, budget: &PrivacyBudget, a: usize) -> Result<NuCertificate> {
    nu_exact_with(dist, budget, a, DEFAULT_LP_MAX_N, &SimplexOptions::default())
}

/// [`nu_exact`] with an explicit cap on `n` and solver options.
pub fn nu_exact_with(
    dist: &JointDistribution,
    budget: &PrivacyBudget,
    a: usize,
    max_n: usize,
    opts: &SimplexOptions,
) -> Result<NuCertificate> {
    if dist.n() > max_n {
        return Err(InferaError::SizeCap { what: "LP individuals", needed: dist.n(), cap: max_n });
    }
    let mut results = Vec::with_capacity(2);
    let mut iterations = 0;
    for (z0, z1) in [(0, 1), (1, 0)] {
        let lp = build_lp(dist, budget, a, z0, z1)?;
        let sol = simplex_solve_with(&lp, opts)?;
        iterations += sol.iterations;
        if sol.status != LpStatus::Optimal {
            return Err(InferaError::LpFailed(sol.status.to_string()));
        }
        if !(sol.optimum > 0.0) {
            return Err(InferaError::Consistency(format!("LP optimum {} is not positive", sol.optimum)));
        }
        let violation = lp.max_violation(&sol.solution);
        if violation > WITNESS_TOL {
            return Err(InferaError::Consistency(format!("LP solution violates constraints by {violation:e}")));
        }
        results.push((sol.optimum, sol.solution));
    }
    let directional = [results[0].0.ln(), results[1].0.ln()];
    let win = if directional[1] > directional[0] + DIRECTION_TIE_TOL { 1 } else { 0 };
    let direction = if win == 0 { (0, 1) } else { (1, 0) };
    let (lp_objective, solution) = results.swap_remove(win);
    let nu = lp_objective.ln();

    let witness = EventProfile::from_unscaled(dist.n(), 2, solution)?;
    let audit = dp_audit(&witness);
    if !audit.within(budget, WITNESS_TOL) {
        return Err(InferaError::Consistency(format!(
            "witness audit {:?} exceeds budget {:?}",
            audit.as_slice(),
            budget.as_slice()
        )));
    }
    let replay = directional_nu(dist, &witness, a, direction.0, direction.1)?;
    if (replay - nu).abs() > WITNESS_TOL {
        return Err(InferaError::Consistency(format!("witness ν {replay} differs from LP ν {nu}")));
    }
    Ok(NuCertificate { nu, direction, witness, lp_objective, directional, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{mechanism_nu, Mechanism};
    use crate::simplex::simplex_solve;

    #[test]
    fn lp_shape() {
        let d = JointDistribution::product(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let b = PrivacyBudget::uniform(2, 0.3).unwrap();
        let lp = build_lp(&d, &b, 0, 0, 1).unwrap();
        assert_eq!(lp.num_vars, 4);
        assert_eq!(lp.eq_constraints.len(), 1);
        assert_eq!(lp.ineq_constraints.len(), 8);
    }

    #[test]
    fn twins_lp_touches_only_constant_databases() {
        let d = JointDistribution::perfectly_correlated(2, 0.5).unwrap();
        let b = PrivacyBudget::uniform(2, 0.5).unwrap();
        let lp = build_lp(&d, &b, 0, 0, 1).unwrap();
        let obj_support: Vec<usize> = (0..4).filter(|&x| lp.objective[x] != 0.0).collect();
        assert_eq!(obj_support, vec![3]);
        assert_eq!(lp.eq_constraints[0].coeffs, vec![(0, 1.0)]);
        let s = simplex_solve(&lp).unwrap();
        assert!((s.optimum - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_budget_forces_constant_profile() {
        let d = JointDistribution::from_dense(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let b = PrivacyBudget::uniform(2, 0.0).unwrap();
        let cert = nu_exact(&d, &b, 1).unwrap();
        assert!(cert.nu.abs() < 1e-9);
        assert!(cert.witness.values().iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn product_prior_optimum_is_e_to_eps_a() {
        let d = JointDistribution::product(&[vec![0.3, 0.7], vec![0.8, 0.2], vec![0.5, 0.5]]).unwrap();
        let b = PrivacyBudget::new(vec![0.25, 0.5, 0.1]).unwrap();
        for a in 0..3 {
            for (z0, z1) in [(0, 1), (1, 0)] {
                let s = simplex_solve(&build_lp(&d, &b, a, z0, z1).unwrap()).unwrap();
                assert!((s.optimum - b.get(a).exp()).abs() < 1e-9, "a={a} ({z0},{z1})");
            }
        }
    }

    #[test]
    fn clones_give_n_epsilon() {
        let d = JointDistribution::perfectly_correlated(3, 0.5).unwrap();
        let cert = nu_exact(&d, &PrivacyBudget::uniform(3, 0.3).unwrap(), 0).unwrap();
        assert!((cert.nu - 0.9).abs() < 1e-9);
        assert_eq!(cert.direction, (0, 1));
        let replay = mechanism_nu(&d, &Mechanism::Profile(cert.witness.clone()), 0).unwrap();
        assert!((replay - cert.nu).abs() < 1e-9);
        assert!((cert.lp_objective.ln() - cert.nu).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let d = JointDistribution::perfectly_correlated(2, 1.0).unwrap();
        let b = PrivacyBudget::uniform(2, 0.3).unwrap();
        assert!(matches!(nu_exact(&d, &b, 0), Err(InferaError::InsufficientSupport { .. })));
        let big = JointDistribution::product(&vec![vec![0.5, 0.5]; 13]).unwrap();
        assert!(matches!(
            nu_exact(&big, &PrivacyBudget::uniform(13, 0.1).unwrap(), 0),
            Err(InferaError::SizeCap { .. })
        ));
        let tern = JointDistribution::from_dense(2, 3, vec![1.0; 9]).unwrap();
        assert_eq!(build_lp(&tern, &b, 0, 0, 1), Err(InferaError::UnsupportedAlphabet(3)));
    }
}
