//! Ising priors on trees: exact Gibbs enumeration, the magnetization form of
//! `ν`, and the infinite-tree (Bethe lattice) recursion.
//!
//! Spins are `σ_i = (-1)^{x_i}`, so `x_i = 0` is spin up. The prior is
//! `π(x) ∝ exp(J Σ_{edges} σ_iσ_j + Σ_i h_i σ_i)` at inverse temperature 1.
//!
//! The recursion `y(x) = e^{2h} ((e^J x + e^{-J}) / (e^J + e^{-J} x))^d`
//! maps the root odds `Z⁺/Z⁻` of a depth-`n` complete `d`-ary tree to that
//! of depth `n + 1`. Starting from `x = 1` (no tree) the first step gives the
//! single node, `e^{2h}`.

use serde::Serialize;

use crate::dist::JointDistribution;
use crate::error::{InferaError, Result};
use crate::mechanism::PrivacyBudget;
use crate::numeric::{kahan_sum, ln_add_exp};

/// Relative step tolerance of the fixed-point iteration.
pub const FIXED_POINT_TOL: f64 = 1e-13;
/// Iteration cap of the fixed-point iteration.
pub const FIXED_POINT_MAX_ITER: usize = 1_000_000;
/// Field used as the `h → 0⁺` surrogate when probing spontaneous magnetization.
pub const SPONTANEOUS_FIELD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct IsingTreeModel {
    /// Children per internal node.
    pub d: usize,
    /// Levels below the root.
    pub depth: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub h0: f64,
}

impl IsingTreeModel {
    pub fn new(d: usize, depth: usize, j: f64, h0: f64) -> Result<Self> {
        let m = Self { d, depth, j, h0 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(InferaError::InvalidParameter(format!("branching factor d = {} must be at least 2", self.d)));
        }
        if !(self.j >= 0.0) || !self.j.is_finite() {
            return Err(InferaError::InvalidParameter(format!("interaction J = {} must be finite and nonnegative", self.j)));
        }
        if !self.h0.is_finite() {
            return Err(InferaError::InvalidParameter(format!("field h0 = {} must be finite", self.h0)));
        }
        Ok(())
    }

    /// `(d^{depth+1} - 1) / (d - 1)`, or `None` on overflow.
    pub fn node_count(&self) -> Option<usize> {
        let mut total: usize = 0;
        let mut level: usize = 1;
        for k in 0..=self.depth {
            total = total.checked_add(level)?;
            if k < self.depth {
                level = level.checked_mul(self.d)?;
            }
        }
        Some(total)
    }

    /// Breadth-first edges: node `k` has children `d·k + 1 ..= d·k + d`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.node_count().unwrap_or(0);
        (1..n).map(|c| ((c - 1) / self.d, c)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetheSolution {
    /// `x(J, h)`.
    pub x_fixed: f64,
    /// `ln x(J, h)`, kept separately since `x` can be very large or small.
    pub ln_x: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Sign of `h`: -1, 0 or 1.
    pub branch: i8,
}

/// Finite-tree root odds from the recursion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeRatios {
    /// `y^k(1)` for `k = 0..=depth+1`; entry `k` is the root odds of the
    /// depth-`(k-1)` tree and entry 0 is the seed.
    pub iterates: Vec<f64>,
    /// Root odds of the complete `d`-ary tree of the given depth.
    pub x_n: f64,
    /// Root odds of the same tree with `d + 1` children at the root.
    pub x_star_n: f64,
}

/// `π(x) ∝ exp(J Σ_edges σ_iσ_j + Σ_i fields[i] σ_i)` on `n` binary sites.
pub fn ising_distribution(n: usize, edges: &[(usize, usize)], j: f64, fields: &[f64]) -> Result<JointDistribution> {
    if fields.len() != n {
        return Err(InferaError::DimensionMismatch(format!("{} fields for {n} sites", fields.len())));
    }
    if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n || a == b) {
        return Err(InferaError::InvalidParameter(format!("edge ({a}, {b}) is not valid for {n} sites")));
    }
    let spin = |x: usize| if x == 0 { 1.0 } else { -1.0 };
    JointDistribution::from_log_weights(n, 2, |x| {
        let pair: f64 = edges.iter().map(|&(a, b)| spin(x[a]) * spin(x[b])).sum();
        let field: f64 = fields.iter().zip(x).map(|(h, &v)| h * spin(v)).sum();
        j * pair + field
    })
}

/// Dense prior of a complete-tree model, nodes in breadth-first order.
pub fn ising_tree_distribution(model: &IsingTreeModel) -> Result<JointDistribution> {
    model.validate()?;
    let n = model.node_count().ok_or(InferaError::SizeCap {
        what: "tree nodes",
        needed: usize::MAX,
        cap: usize::BITS as usize,
    })?;
    if n >= usize::BITS as usize {
        return Err(InferaError::SizeCap { what: "tree nodes", needed: n, cap: usize::BITS as usize - 1 });
    }
    ising_distribution(n, &model.edges(), model.j, &vec![model.h0; n])
}

/// `ln(Pr(x_site = 0) / Pr(x_site = 1))`, i.e. `ln((1+⟨σ⟩)/(1-⟨σ⟩))`.
fn log_spin_odds(dist: &JointDistribution, site: usize) -> Result<f64> {
    check_site(dist, site)?;
    let up = kahan_sum(dist.probs().iter().enumerate().filter(|(x, _)| x >> site & 1 == 0).map(|(_, &p)| p));
    let down = kahan_sum(dist.probs().iter().enumerate().filter(|(x, _)| x >> site & 1 == 1).map(|(_, &p)| p));
    Ok(up.ln() - down.ln())
}

fn check_site(dist: &JointDistribution, site: usize) -> Result<()> {
    if dist.alphabet() != 2 {
        return Err(InferaError::UnsupportedAlphabet(dist.alphabet()));
    }
    if site >= dist.n() {
        return Err(InferaError::InvalidParameter(format!("site {site} out of range for n = {}", dist.n())));
    }
    Ok(())
}

/// `⟨σ_site⟩` after adding `field_offset` to every site's field, by full
/// enumeration of the prior.
pub fn magnetization_exact(dist: &JointDistribution, site: usize, field_offset: f64) -> Result<f64> {
    check_site(dist, site)?;
    let shifted = dist.with_external_field(&vec![field_offset; dist.n()])?;
    Ok(kahan_sum(
        shifted
            .probs()
            .iter()
            .enumerate()
            .map(|(x, &p)| if x >> site & 1 == 0 { p } else { -p }),
    ))
}

/// Root-spin log odds `ln(Z⁺/Z⁻)` of `dist` after adding `field_offset` to
/// every site.
pub fn log_odds_exact(dist: &JointDistribution, site: usize, field_offset: f64) -> Result<f64> {
    check_site(dist, site)?;
    log_spin_odds(&dist.with_external_field(&vec![field_offset; dist.n()])?, site)
}

/// `ν_site` from magnetizations: with `ρ = π(x_a=1)/π(x_a=0)` and `m±` the
/// magnetization under the extra fields `±ε_i/2`,
/// `ν = max{ ln ρ + ln((1+m₊)/(1-m₊)), -ln ρ - ln((1+m₋)/(1-m₋)) }`.
///
/// Any strictly positive binary prior is accepted; the fields follow the
/// per-site budget, which for a uniform budget is the usual `±ε/2`.
pub fn nu_gibbs(dist: &JointDistribution, budget: &PrivacyBudget, site: usize) -> Result<f64> {
    check_site(dist, site)?;
    budget.check_len(dist.n())?;
    if let Some(value) = dist.marginal(site).iter().position(|&p| p == 0.0) {
        return Err(InferaError::InsufficientSupport { index: site, value });
    }
    let half: Vec<f64> = budget.as_slice().iter().map(|e| e / 2.0).collect();
    let neg: Vec<f64> = half.iter().map(|h| -h).collect();
    let ln_rho = -log_spin_odds(dist, site)?;
    let plus = log_spin_odds(&dist.with_external_field(&half)?, site)?;
    let minus = log_spin_odds(&dist.with_external_field(&neg)?, site)?;
    let nu = (ln_rho + plus).max(-ln_rho - minus);
    if !nu.is_finite() {
        return Err(InferaError::Consistency(format!("magnetization form of ν is not finite ({nu})")));
    }
    Ok(nu)
}

/// `ln y(e^u)`.
fn log_y(u: f64, j: f64, h: f64, d: usize) -> f64 {
    2.0 * h + d as f64 * (ln_add_exp(j + u, -j) - ln_add_exp(j, u - j))
}

fn check_recursion_params(j: f64, h: f64, d: usize) -> Result<()> {
    if d < 2 {
        return Err(InferaError::InvalidParameter(format!("branching factor d = {d} must be at least 2")));
    }
    if !(j >= 0.0) || !j.is_finite() {
        return Err(InferaError::InvalidParameter(format!("interaction J = {j} must be finite and nonnegative")));
    }
    if !h.is_finite() {
        return Err(InferaError::InvalidParameter(format!("field h = {h} must be finite")));
    }
    Ok(())
}

/// `x(J, h)`: the limit of `x_{k+1} = y(x_k)` from `x_0 = 1`, iterated in log
/// space until `|x_{k+1} - x_k| ≤ 1e-13·max(1, x_k)`.
pub fn bethe_fixed_point(j: f64, h: f64, d: usize) -> Result<BetheSolution> {
    bethe_fixed_point_with(j, h, d, FIXED_POINT_MAX_ITER)
}

/// [`bethe_fixed_point`] with an explicit iteration cap.
pub fn bethe_fixed_point_with(j: f64, h: f64, d: usize, max_iter: usize) -> Result<BetheSolution> {
    check_recursion_params(j, h, d)?;
    let branch = if h > 0.0 { 1 } else if h < 0.0 { -1 } else { 0 };
    let mut u = 0.0_f64;
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        let next = log_y(u, j, h, d);
        // |x' - x| = x·|e^{Δu} - 1|, compared against 1e-13·max(1, x).
        let rel = (next - u).exp_m1().abs();
        let change = if u >= 0.0 { rel } else { u.exp() * rel };
        u = next;
        if change <= FIXED_POINT_TOL {
            return Ok(BetheSolution { x_fixed: u.exp(), ln_x: u, iterations: it, converged: true, branch });
        }
        last_change = change;
    }
    Err(InferaError::NoConvergence { iterations: max_iter, last_change })
}

/// Root odds of the depth-`depth` complete tree (`x_n`) and of the same tree
/// with an extra child at the root (`x*_n`).
pub fn tree_root_ratios(j: f64, h: f64, d: usize, depth: usize) -> Result<TreeRatios> {
    check_recursion_params(j, h, d)?;
    let mut logs = Vec::with_capacity(depth + 2);
    logs.push(0.0_f64);
    for k in 0..=depth {
        logs.push(log_y(logs[k], j, h, d));
    }
    let ln_x_n = logs[depth + 1];
    // The extended root sees d + 1 copies of the depth-(depth-1) tree.
    let ln_star = 2.0 * h + (d + 1) as f64 * (ln_add_exp(j + logs[depth], -j) - ln_add_exp(j, logs[depth] - j));
    Ok(TreeRatios { iterates: logs.iter().map(|u| u.exp()).collect(), x_n: ln_x_n.exp(), x_star_n: ln_star.exp() })
}

/// Deep-tree limit of `ν` for trees of maximum degree `Δ = d + 1` under a
/// uniform budget: `(Δ/(Δ-1)) ln x(J, ε/2) - ε/(Δ-1)`.
pub fn nu_bethe_limit(j: f64, eps: f64, d: usize) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(InferaError::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    let sol = bethe_fixed_point(j, eps / 2.0, d)?;
    let df = d as f64;
    Ok((df + 1.0) / df * sol.ln_x - eps / df)
}

/// `tanh⁻¹(1/d)`: above it the tree has spontaneous magnetization.
pub fn critical_coupling(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(InferaError::InvalidParameter(format!("branching factor d = {d} must be at least 2")));
    }
    Ok((1.0 / d as f64).atanh())
}

/// Largest `ε ∈ (0, target]` with `nu_bethe_limit(J, ε, d) ≤ target`, by
/// bisection to `1e-10`. `None` when `ν` exceeds the target even at
/// `ε = 1e-10·target`, the surrogate for `ε → 0⁺`.
pub fn enforceable_epsilon(target_nu: f64, j: f64, d: usize) -> Result<Option<f64>> {
    if !(target_nu > 0.0) || !target_nu.is_finite() {
        return Err(InferaError::InvalidParameter(format!("target ν = {target_nu} must be positive")));
    }
    // ν = ε exactly at J = 0; the slack absorbs rounding in that case.
    let fits = |nu: f64| nu <= target_nu * (1.0 + 1e-12);
    if fits(nu_bethe_limit(j, target_nu, d)?) {
        return Ok(Some(target_nu));
    }
    let mut lo = 1e-10 * target_nu;
    let mut nu_lo = nu_bethe_limit(j, lo, d)?;
    if !fits(nu_lo) {
        return Ok(None);
    }
    let mut hi = target_nu;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let nu_mid = nu_bethe_limit(j, mid, d)?;
        if nu_mid < nu_lo - 1e-9 {
            return Err(InferaError::Consistency(format!(
                "ν is not monotone in ε: ν({mid}) = {nu_mid} < ν({lo}) = {nu_lo}"
            )));
        }
        if fits(nu_mid) {
            lo = mid;
            nu_lo = nu_mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

fn sensitivity_with<F>(h0: f64, eps_list: &[f64], mut w: F) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let w0 = w(h0)?;
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(InferaError::InvalidParameter(format!("ε = {eps} must be positive")));
            }
            let up = w(h0 + eps / 2.0)? - w0;
            let down = w0 - w(h0 - eps / 2.0)?;
            Ok((eps, up.max(down)))
        })
        .collect()
}

/// `ν(ε) = max{ w(h0 + ε/2) - w(h0), w(h0) - w(h0 - ε/2) }` with
/// `w(h) = ln x(J, h)` from the infinite-tree fixed point. This uses `w`
/// itself rather than the degree-`(d+1)` root correction of
/// [`nu_bethe_limit`].
pub fn sensitivity_profile(j: f64, h0: f64, d: usize, eps_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    sensitivity_with(h0, eps_list, |h| Ok(bethe_fixed_point(j, h, d)?.ln_x))
}

/// [`sensitivity_profile`] with `w_n(h) = ln x_n` of the depth-`depth` tree.
pub fn sensitivity_profile_finite(j: f64, h0: f64, d: usize, depth: usize, eps_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    sensitivity_with(h0, eps_list, |h| Ok(tree_root_ratios(j, h, d, depth)?.x_n.ln()))
}
