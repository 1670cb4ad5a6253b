//! Dense two-phase tableau simplex.
//!
//! Solves `maximize cᵀx  s.t.  A_eq x = b_eq,  A_le x ≤ b_le,  x ≥ 0`.
//! Entering columns follow Dantzig's rule until a run of degenerate pivots
//! trips the degeneracy counter; from then on Bland's rule is used until the
//! next pivot that makes progress. Ratio-test ties go to the largest pivot
//! element (the smallest basic index under Bland's rule), so pivoting is
//! fully deterministic.
//!
//! Right-hand sides are first shifted by a small deterministic perturbation
//! so that degenerate vertices split apart and pivots make progress. The
//! unperturbed right-hand side rides along as an extra tableau column; when
//! the final basis is feasible for it, that basis is optimal for the original
//! problem because reduced costs do not depend on the right-hand side.
//! Otherwise the solve is repeated with a smaller perturbation, and finally
//! with none.

use serde::Serialize;

use crate::error::{InferaError, Result};

/// One sparse constraint row `Σ coeff·x[var] (= or ≤) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// A maximization problem over nonnegative variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub eq_constraints: Vec<SparseRow>,
    pub ineq_constraints: Vec<SparseRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
    IterationLimit,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Unbounded => "unbounded",
            LpStatus::Infeasible => "infeasible",
            LpStatus::IterationLimit => "iteration-limit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub optimum: f64,
    pub solution: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Reduced-cost, pivot and feasibility tolerance.
    pub tol: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degeneracy_limit: usize,
    /// Upper bound on dense tableau entries.
    pub max_tableau_entries: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iterations: 1_000_000,
            degeneracy_limit: 50,
            max_tableau_entries: 1 << 27,
        }
    }
}

impl LinearProgram {
    pub fn num_constraints(&self) -> usize {
        self.eq_constraints.len() + self.ineq_constraints.len()
    }

    fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(InferaError::DimensionMismatch(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                self.num_vars
            )));
        }
        for row in self.eq_constraints.iter().chain(&self.ineq_constraints) {
            if let Some(&(j, _)) = row.coeffs.iter().find(|(j, _)| *j >= self.num_vars) {
                return Err(InferaError::DimensionMismatch(format!("variable index {j} out of range")));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|(_, a)| !a.is_finite()) {
                return Err(InferaError::InvalidParameter("non-finite LP coefficient".into()));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or nonnegativity bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self.eq_constraints.iter().map(|r| (r.eval(x) - r.rhs).abs());
        let le = self.ineq_constraints.iter().map(|r| (r.eval(x) - r.rhs).max(0.0));
        let nonneg = x.iter().map(|v| (-v).max(0.0));
        eq.chain(le).chain(nonneg).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    /// Reduced costs of the current phase; positive entries improve.
    cost: Vec<f64>,
    basis: Vec<usize>,
    /// Columns that may enter the basis.
    allowed: Vec<bool>,
    rhs_col: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.at(pr, pc);
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].iter().map(|v| v / p).collect();
        self.data[pr * w..(pr + 1) * w].copy_from_slice(&pivot_row);
        let nz: Vec<usize> = (0..w).filter(|&c| pivot_row[c] != 0.0).collect();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[r * w..(r + 1) * w];
            for &c in &nz {
                row[c] -= f * pivot_row[c];
            }
            row[pc] = 0.0;
        }
        let f = self.cost[pc];
        if f != 0.0 {
            for &c in &nz {
                self.cost[c] -= f * pivot_row[c];
            }
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Round-off can leave basic values slightly negative; snap them to zero.
    fn clamp_rhs(&mut self, tol: f64) {
        for r in 0..self.rows {
            let v = &mut self.data[r * self.width + self.rhs_col];
            if *v < 0.0 && *v > -tol {
                *v = 0.0;
            }
        }
    }

    fn set_phase_costs(&mut self, c: &[f64]) {
        let w = self.width;
        let mut cost = c.to_vec();
        cost.resize(w, 0.0);
        for r in 0..self.rows {
            let cb = c.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb == 0.0 {
                continue;
            }
            for (j, v) in cost.iter_mut().enumerate() {
                *v -= cb * self.data[r * w + j];
            }
        }
        self.cost = cost;
    }

    fn objective(&self, c: &[f64]) -> f64 {
        (0..self.rows)
            .map(|r| c.get(self.basis[r]).copied().unwrap_or(0.0) * self.at(r, self.rhs_col))
            .sum()
    }

    /// Run simplex iterations on the current cost row.
    fn optimize(&mut self, opts: &SimplexOptions, iterations: &mut usize) -> LpStatus {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if *iterations >= opts.max_iterations {
                return LpStatus::IterationLimit;
            }
            let candidates = (0..self.rhs_col).filter(|&j| self.allowed[j] && self.cost[j] > opts.tol);
            let entering = if bland {
                candidates.into_iter().next()
            } else {
                candidates.max_by(|&a, &b| self.cost[a].total_cmp(&self.cost[b]).then(b.cmp(&a)))
            };
            let Some(pc) = entering else {
                return LpStatus::Optimal;
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a <= opts.tol {
                    continue;
                }
                let ratio = self.at(r, self.rhs_col).max(0.0) / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        let tie = (ratio - bratio).abs() <= 1e-12 * bratio.abs().max(1.0);
                        let better_tie = if bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            a > self.at(br, pc) || a == self.at(br, pc) && self.basis[r] < self.basis[br]
                        };
                        if ratio < bratio && !tie || tie && better_tie {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
            let Some((pr, ratio)) = best else {
                return LpStatus::Unbounded;
            };
            if ratio <= opts.tol {
                degenerate_run += 1;
                if degenerate_run > opts.degeneracy_limit {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
            self.pivot(pr, pc);
            self.clamp_rhs(opts.tol);
            *iterations += 1;
        }
    }
}

pub fn simplex_solve(lp: &LinearProgram) -> Result<LpSolution> {
    simplex_solve_with(lp, &SimplexOptions::default())
}

pub fn simplex_solve_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    lp.validate()?;
    let mut last = None;
    for &perturbation in PERTURBATION_LEVELS {
        let (sol, shadow_violation) = solve_once(lp, opts, perturbation)?;
        match sol.status {
            LpStatus::Optimal if shadow_violation <= opts.tol => return Ok(sol),
            LpStatus::Optimal | LpStatus::IterationLimit => last = Some(sol),
            // Infeasibility or unboundedness of the perturbed problem is
            // decided on the unperturbed one.
            _ if perturbation > 0.0 => last = Some(sol),
            _ => return Ok(sol),
        }
    }
    let mut sol = last.expect("at least one attempt");
    if sol.status == LpStatus::Optimal {
        for v in sol.solution.iter_mut() {
            *v = v.max(0.0);
        }
        sol.optimum = lp.objective_value(&sol.solution);
    }
    Ok(sol)
}

/// Relative right-hand-side perturbations tried in order; the last attempt
/// solves the problem as stated.
const PERTURBATION_LEVELS: &[f64] = &[1e-7, 1e-10, 0.0];

/// Deterministic value in `[1, 2)` for row `r`.
fn row_jitter(r: usize) -> f64 {
    let mut z = (r as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    1.0 + (z >> 11) as f64 / (1u64 << 53) as f64
}

/// One solve with every right-hand side shifted by `perturbation`. The
/// tableau carries the unperturbed right-hand side in a shadow column, so
/// the returned point is the vertex of the final basis for the original
/// problem; the second value is its largest negative entry.
fn solve_once(lp: &LinearProgram, opts: &SimplexOptions, perturbation: f64) -> Result<(LpSolution, f64)> {
    let nv = lp.num_vars;
    // Normalize every row to a nonnegative right-hand side. A `≤` row whose
    // rhs was negative becomes a `≥` row (surplus plus artificial).
    struct Row<'a> {
        row: &'a SparseRow,
        sign: f64,
        slack: Option<f64>,
        artificial: bool,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(lp.num_constraints());
    for row in &lp.eq_constraints {
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        rows.push(Row { row, sign, slack: None, artificial: true });
    }
    for row in &lp.ineq_constraints {
        if row.rhs < 0.0 {
            rows.push(Row { row, sign: -1.0, slack: Some(-1.0), artificial: true });
        } else {
            rows.push(Row { row, sign: 1.0, slack: Some(1.0), artificial: false });
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.slack.is_some()).count();
    let n_art = rows.iter().filter(|r| r.artificial).count();
    let rhs_col = nv + n_slack + n_art;
    let shadow_col = rhs_col + 1;
    let width = rhs_col + 2;
    let entries = m.saturating_mul(width);
    if entries > opts.max_tableau_entries {
        return Err(InferaError::SizeCap {
            what: "simplex tableau entries",
            needed: entries,
            cap: opts.max_tableau_entries,
        });
    }

    let mut data = vec![0.0; entries];
    let mut basis = vec![0usize; m];
    let (mut next_slack, mut next_art) = (nv, nv + n_slack);
    for (r, spec) in rows.iter().enumerate() {
        let base = r * width;
        for &(j, a) in &spec.row.coeffs {
            data[base + j] += spec.sign * a;
        }
        let rhs = spec.sign * spec.row.rhs;
        data[base + shadow_col] = rhs;
        data[base + rhs_col] = rhs + perturbation * row_jitter(r) * rhs.max(1.0);
        if let Some(s) = spec.slack {
            data[base + next_slack] = s;
            if !spec.artificial {
                basis[r] = next_slack;
            }
            next_slack += 1;
        }
        if spec.artificial {
            data[base + next_art] = 1.0;
            basis[r] = next_art;
            next_art += 1;
        }
    }
    let is_art = |j: usize| j >= nv + n_slack && j < rhs_col;
    let mut tab = Tableau {
        rows: m,
        width,
        data,
        cost: vec![0.0; width],
        basis,
        allowed: vec![true; rhs_col],
        rhs_col,
    };
    let mut iterations = 0usize;

    if n_art > 0 {
        let phase1: Vec<f64> = (0..rhs_col).map(|j| if is_art(j) { -1.0 } else { 0.0 }).collect();
        tab.set_phase_costs(&phase1);
        let status = tab.optimize(opts, &mut iterations);
        if status == LpStatus::IterationLimit {
            return Ok((failed(status, nv, iterations), f64::INFINITY));
        }
        let infeasibility = -tab.objective(&phase1);
        if infeasibility > opts.tol.max(1e-9) {
            return Ok((failed(LpStatus::Infeasible, nv, iterations), f64::INFINITY));
        }
        // Drive artificials that stayed basic (at zero) out of the basis.
        for r in 0..m {
            if !is_art(tab.basis[r]) {
                continue;
            }
            if let Some(j) = (0..nv + n_slack).find(|&j| tab.at(r, j).abs() > opts.tol) {
                tab.pivot(r, j);
            }
        }
        for j in 0..rhs_col {
            if is_art(j) {
                tab.allowed[j] = false;
            }
        }
    }

    let mut c = lp.objective.clone();
    c.resize(rhs_col, 0.0);
    tab.set_phase_costs(&c);
    let status = tab.optimize(opts, &mut iterations);
    if status != LpStatus::Optimal {
        return Ok((failed(status, nv, iterations), f64::INFINITY));
    }
    let mut solution = vec![0.0; nv];
    let mut shadow_violation = 0.0f64;
    for r in 0..m {
        let v = tab.at(r, shadow_col);
        let b = tab.basis[r];
        if b < nv {
            solution[b] = v;
        }
        // Artificials must vanish; every other basic variable must be
        // nonnegative.
        shadow_violation = shadow_violation.max(if is_art(b) { v.abs() } else { -v });
    }
    let optimum = lp.objective_value(&solution);
    Ok((LpSolution { status, optimum, solution, iterations }, shadow_violation))
}

fn failed(status: LpStatus, nv: usize, iterations: usize) -> LpSolution {
    LpSolution { status, optimum: f64::NAN, solution: vec![0.0; nv], iterations }
}
