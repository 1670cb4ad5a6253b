//! Command-line front end.
//!
//! Every command prints a JSON report
//! `{command, inputs_digest, results, warnings, timing}` (or CSV for the
//! sweep-style commands). Floats in `results` carry 12 significant digits and
//! non-finite values are written as the strings `"inf"`, `"-inf"`, `"nan"`.
//!
//! Exit codes: 0 pass, 1 negative finding, 2 error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::affiliated::nu_closed_form;
use crate::dist::JointDistribution;
use crate::error::{InferaError, Result};
use crate::influence::{dobrushin_bounds, influence_matrix};
use crate::ising::{
    critical_coupling, enforceable_epsilon, ising_tree_distribution, nu_bethe_limit, nu_gibbs, sensitivity_profile,
    sensitivity_profile_finite, IsingTreeModel,
};
use crate::lp_exact::nu_exact;
use crate::mechanism::{
    dp_audit, dp_audit_table, max_biased_profile, mechanism_nu, EventProfile, Mechanism, NoisySumSampler, OutcomeTable,
    PrivacyBudget,
};
use crate::numeric::{set_size_cap, sig12};

/// Cross-method agreement tolerance for `nu --method all`.
pub const AGREEMENT_TOL: f64 = 1e-6;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "infera", version, about = "Inferential privacy of DP mechanisms under correlated priors")]
pub struct Cli {
    /// Maximum number of dense probability entries.
    #[arg(long, global = true, env = "INFERA_CAP")]
    pub cap: Option<usize>,
    /// Output format; `csv` is available for `ising sweep` and `ising sensitivity`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    ClosedForm,
    Gibbs,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Affiliation,
    Pairwise,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a prior for positive affiliation or pairwise positive correlation.
    Check {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, value_enum, default_value = "affiliation")]
        what: CheckKind,
    },
    /// Compute ν for one individual.
    Nu(NuArgs),
    /// Influence matrix and the bounds derived from it.
    Bound {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        eps: String,
    },
    /// Ising-tree and Bethe-lattice computations.
    #[command(subcommand)]
    Ising(IsingCommand),
    /// Re-audit a mechanism file: per-individual ε and optionally ν.
    Audit {
        #[arg(long)]
        mechanism: PathBuf,
        #[arg(long)]
        dist: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        target: usize,
    },
    /// Draw noisy-sum (Laplace) samples for a database.
    Sample {
        /// Database bits, comma separated.
        #[arg(long)]
        x: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
}

#[derive(Debug, Args)]
pub struct NuArgs {
    #[arg(long)]
    pub dist: PathBuf,
    /// Comma-separated ε, one per individual, or a single value for all.
    #[arg(long)]
    pub eps: String,
    #[arg(long, default_value_t = 0)]
    pub target: usize,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: Method,
    /// Evaluate the closed form even when the prior is not affiliated.
    #[arg(long)]
    pub force: bool,
    /// Write the LP witness as a mechanism file.
    #[arg(long)]
    pub witness: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum IsingCommand {
    /// Deep-tree limit of ν under a uniform budget.
    NuLimit {
        #[arg(long = "J")]
        j: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eps: f64,
    },
    /// ν over a grid of ε and J.
    Sweep {
        #[arg(long = "J")]
        j: String,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eps: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        h0: f64,
        /// Use exact enumeration on the complete tree of this depth.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Largest ε whose deep-tree ν stays within a target.
    Enforce {
        #[arg(long)]
        nu: f64,
        #[arg(long = "J")]
        j: f64,
        #[arg(long)]
        d: usize,
    },
    /// ν(ε) around a base field h0 from the fixed point of the recursion.
    Sensitivity {
        #[arg(long = "J")]
        j: f64,
        #[arg(long, allow_negative_numbers = true)]
        h0: f64,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eps: String,
        /// Use the finite tree of this depth instead of the limit.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Critical coupling `atanh(1/d)`.
    Critical {
        #[arg(long)]
        d: usize,
    },
}

/// Distribution file: dense table or named generator.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DistFile {
    Dense { n: usize, alphabet: usize, probs: Vec<f64> },
    Generator { generator: String, #[serde(default)] params: Value },
}

#[derive(Debug, Deserialize)]
struct ProductParams {
    marginals: Option<Vec<Vec<f64>>>,
    n: Option<usize>,
    p: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct TwinsParams {
    n: usize,
    #[serde(default = "half")]
    p: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
struct ParityParams {
    r: usize,
    s: usize,
}

#[derive(Debug, Deserialize)]
struct TreeParams {
    d: usize,
    depth: usize,
    #[serde(rename = "J")]
    j: f64,
    #[serde(default)]
    h0: f64,
}

/// Outcome labels of a table: explicit names or just a count.
#[derive(Debug, Deserialize, serde::Serialize)]
#[serde(untagged)]
pub enum Outcomes {
    Count(usize),
    Names(Vec<String>),
}

/// Mechanism file, discriminated by `kind`.
#[derive(Debug, Deserialize, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismFile {
    Profile {
        n: Option<usize>,
        #[serde(default = "binary")]
        alphabet: usize,
        m: Vec<f64>,
    },
    Table {
        n: Option<usize>,
        #[serde(default = "binary")]
        alphabet: usize,
        outcomes: Outcomes,
        table: Vec<Vec<f64>>,
    },
    MaxBiased {
        n: Option<usize>,
        eps: Vec<f64>,
        z: usize,
    },
}

fn binary() -> usize {
    2
}

/// `n` from the column count when not given explicitly.
fn infer_n(n: Option<usize>, alphabet: usize, len: usize) -> Result<usize> {
    if let Some(n) = n {
        return Ok(n);
    }
    let mut n = 0;
    let mut size = 1usize;
    while size < len && alphabet >= 2 {
        size = size.saturating_mul(alphabet);
        n += 1;
    }
    if size != len {
        return Err(InferaError::DimensionMismatch(format!("{len} entries is not a power of alphabet {alphabet}")));
    }
    Ok(n)
}

impl MechanismFile {
    pub fn from_profile(p: &EventProfile) -> Self {
        MechanismFile::Profile { n: Some(p.n()), alphabet: p.alphabet(), m: p.values().to_vec() }
    }

    pub fn into_mechanism(self) -> Result<Mechanism> {
        Ok(match self {
            MechanismFile::Profile { n, alphabet, m } => {
                let n = infer_n(n, alphabet, m.len())?;
                Mechanism::Profile(EventProfile::new(n, alphabet, m)?)
            }
            MechanismFile::Table { n, alphabet, outcomes, table } => {
                let n = infer_n(n, alphabet, table.first().map_or(0, Vec::len))?;
                let names = match outcomes {
                    Outcomes::Names(names) => names,
                    Outcomes::Count(k) => (0..k).map(|o| o.to_string()).collect(),
                };
                Mechanism::Table(OutcomeTable::new(n, alphabet, names, table)?)
            }
            MechanismFile::MaxBiased { n, eps, z } => {
                let n = n.unwrap_or(eps.len());
                let budget = if eps.len() == 1 && n > 1 { PrivacyBudget::uniform(n, eps[0])? } else { PrivacyBudget::new(eps)? };
                Mechanism::Profile(max_biased_profile(n, &budget, z)?)
            }
        })
    }
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> InferaError {
    InferaError::Parse(format!("{}: {e}", path.display()))
}

fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| InferaError::Io(format!("{}: {e}", path.display())))
}

fn from_params<T: serde::de::DeserializeOwned>(params: Value, what: &str) -> Result<T> {
    serde_json::from_value(params).map_err(|e| InferaError::Parse(format!("{what} params: {e}")))
}

/// Parse a distribution file's contents.
pub fn parse_distribution(text: &str) -> Result<JointDistribution> {
    let spec: DistFile = serde_json::from_str(text).map_err(|e| InferaError::Parse(e.to_string()))?;
    match spec {
        DistFile::Dense { n, alphabet, probs } => JointDistribution::from_dense(n, alphabet, probs),
        DistFile::Generator { generator, params } => match generator.as_str() {
            "product" => {
                let p: ProductParams = from_params(params, "product")?;
                match (p.marginals, p.n, p.p) {
                    (Some(m), _, _) => JointDistribution::product(&m),
                    (None, Some(n), Some(p)) => JointDistribution::product(&vec![vec![1.0 - p, p]; n]),
                    _ => Err(InferaError::Parse("product params need `marginals` or `n` and `p`".into())),
                }
            }
            "twins" => {
                let p: TwinsParams = from_params(params, "twins")?;
                JointDistribution::perfectly_correlated(p.n, p.p)
            }
            "parity" => {
                let p: ParityParams = from_params(params, "parity")?;
                JointDistribution::parity_constrained(p.r, p.s)
            }
            "ising_tree" => {
                let p: TreeParams = from_params(params, "ising_tree")?;
                ising_tree_distribution(&IsingTreeModel::new(p.d, p.depth, p.j, p.h0)?)
            }
            other => Err(InferaError::Parse(format!("unknown generator `{other}`"))),
        },
    }
}

/// Parse a mechanism file's contents.
pub fn parse_mechanism(text: &str) -> Result<Mechanism> {
    let spec: MechanismFile = serde_json::from_str(text).map_err(|e| InferaError::Parse(e.to_string()))?;
    spec.into_mechanism()
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| InferaError::Parse(format!("{what}: `{}`: {e}", t.trim())))
        })
        .collect()
}

/// A single ε is broadcast to all `n` individuals.
fn parse_budget(text: &str, n: usize) -> Result<PrivacyBudget> {
    let eps = parse_list(text, "eps")?;
    if eps.len() == 1 && n > 1 {
        PrivacyBudget::uniform(n, eps[0])
    } else {
        PrivacyBudget::new(eps)
    }
}

/// JSON number with 12 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::from("nan")
    } else if x.is_infinite() {
        Value::from(if x > 0.0 { "inf" } else { "-inf" })
    } else {
        serde_json::Number::from_f64(sig12(x)).map_or(Value::Null, Value::Number)
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn matrix(rows: &[Vec<f64>]) -> Value {
    Value::Array(rows.iter().map(|r| nums(r)).collect())
}

/// Round every float in `v` to 12 significant digits.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = num(x);
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

enum Output {
    Report { results: Value, warnings: Vec<String>, exit: i32 },
    Csv { text: String, exit: i32 },
}

fn report(results: Value, warnings: Vec<String>, exit: i32) -> Output {
    Output::Report { results, warnings, exit }
}

struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    fn new(command: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        Self { hasher }
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let text = read_input(path)?;
        self.hasher.update([0u8]);
        self.hasher.update(text.as_bytes());
        Ok(text)
    }

    fn dist(&mut self, path: &Path) -> Result<JointDistribution> {
        let text = self.read(path)?;
        parse_distribution(&text).map_err(|e| match e {
            InferaError::Parse(msg) => parse_err(path, msg),
            other => other,
        })
    }

    fn digest(self) -> String {
        let bytes = self.hasher.finalize();
        let mut s = String::with_capacity(64);
        for b in bytes.iter() {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}

fn require_json(format: Option<Format>) -> Result<()> {
    match format {
        Some(Format::Csv) => Err(InferaError::InvalidParameter(
            "csv output is only available for `ising sweep` and `ising sensitivity`".into(),
        )),
        _ => Ok(()),
    }
}

fn cmd_check(inputs: &mut Inputs, dist: &Path, what: CheckKind) -> Result<Output> {
    let d = inputs.dist(dist)?;
    match what {
        CheckKind::Affiliation => {
            let check = d.is_positively_affiliated()?;
            let witness = check.witness.map(|(a, b)| json!([{"index": a, "x": d.digits(a)}, {"index": b, "x": d.digits(b)}]));
            let exit = if check.affiliated { EXIT_PASS } else { EXIT_NEGATIVE };
            Ok(report(json!({"what": "affiliation", "pass": check.affiliated, "witness": witness}), vec![], exit))
        }
        CheckKind::Pairwise => {
            let pass = d.is_pairwise_positively_correlated()?;
            let exit = if pass { EXIT_PASS } else { EXIT_NEGATIVE };
            Ok(report(json!({"what": "pairwise", "pass": pass}), vec![], exit))
        }
    }
}

fn cmd_nu(inputs: &mut Inputs, args: &NuArgs) -> Result<Output> {
    let d = inputs.dist(&args.dist)?;
    let budget = parse_budget(&args.eps, d.n())?;
    budget.check_len(d.n())?;
    if args.target >= d.n() {
        return Err(InferaError::InvalidParameter(format!("target {} out of range for n = {}", args.target, d.n())));
    }
    let a = args.target;
    let mut results = Map::new();
    let mut warnings = Vec::new();
    let mut values: Vec<(&str, f64)> = Vec::new();
    let mut exit = EXIT_PASS;

    let want = |m: Method| args.method == m || args.method == Method::All;
    let all = args.method == Method::All;

    if want(Method::Exact) {
        match nu_exact(&d, &budget, a) {
            Ok(cert) => {
                if let Some(path) = &args.witness {
                    let text = serde_json::to_string_pretty(&MechanismFile::from_profile(&cert.witness))
                        .map_err(|e| InferaError::Io(e.to_string()))?;
                    std::fs::write(path, text + "\n").map_err(|e| InferaError::Io(format!("{}: {e}", path.display())))?;
                }
                values.push(("exact", cert.nu));
                results.insert(
                    "exact".into(),
                    json!({
                        "nu": num(cert.nu),
                        "direction": [cert.direction.0, cert.direction.1],
                        "directional": nums(&cert.directional),
                        "lp_objective": num(cert.lp_objective),
                        "iterations": cert.iterations,
                        "witness": nums(cert.witness.values()),
                    }),
                );
            }
            Err(e) if all => warnings.push(format!("exact: {e}")),
            Err(e) => return Err(e),
        }
    }
    if want(Method::ClosedForm) {
        match nu_closed_form(&d, &budget, a, args.force) {
            Ok(r) => {
                if let Some(w) = &r.warning {
                    warnings.push(format!("closed-form: {w}"));
                } else {
                    values.push(("closed-form", r.nu));
                }
                results.insert(
                    "closed_form".into(),
                    json!({
                        "nu": num(r.nu),
                        "winning_z": r.winning_z,
                        "numerator": num(r.numerator),
                        "denominator": num(r.denominator),
                    }),
                );
            }
            Err(InferaError::NotAffiliated(x1, x2)) if !all => {
                results.insert(
                    "closed_form".into(),
                    json!({"error": InferaError::NotAffiliated(x1, x2).to_string(), "witness": [d.digits(x1), d.digits(x2)]}),
                );
                exit = EXIT_NEGATIVE;
            }
            Err(e) if all => warnings.push(format!("closed-form: {e}")),
            Err(e) => return Err(e),
        }
    }
    if want(Method::Gibbs) {
        let affiliated = d.alphabet() == 2 && d.is_positively_affiliated()?.affiliated;
        match nu_gibbs(&d, &budget, a) {
            Ok(nu) => {
                if affiliated {
                    values.push(("gibbs", nu));
                } else {
                    warnings.push("gibbs: prior is not positively affiliated; value is the maximally-biased ν".into());
                }
                results.insert("gibbs".into(), json!({"nu": num(nu)}));
            }
            Err(e) if all => warnings.push(format!("gibbs: {e}")),
            Err(e) => return Err(e),
        }
    }
    if all {
        let mut agree = true;
        for (i, (m1, v1)) in values.iter().enumerate() {
            for (m2, v2) in &values[i + 1..] {
                if (v1 - v2).abs() > AGREEMENT_TOL {
                    agree = false;
                    warnings.push(format!("{m1} ({v1}) and {m2} ({v2}) disagree by more than {AGREEMENT_TOL:e}"));
                }
            }
        }
        results.insert("agree".into(), Value::Bool(agree));
    }
    results.insert("target".into(), json!(a));
    results.insert("eps".into(), nums(budget.as_slice()));
    Ok(report(Value::Object(results), warnings, exit))
}

fn cmd_bound(inputs: &mut Inputs, dist: &Path, eps: &str) -> Result<Output> {
    let d = inputs.dist(dist)?;
    let budget = parse_budget(eps, d.n())?;
    budget.check_len(d.n())?;
    let inf = influence_matrix(&d)?;
    let mut results = Map::new();
    let mut warnings = Vec::new();
    results.insert("gamma".into(), matrix(&inf.gamma));
    results.insert("unbounded".into(), Value::Bool(inf.unbounded));
    results.insert("spectral_norm".into(), inf.spectral_norm.map_or(Value::Null, num));
    results.insert("eps".into(), nums(budget.as_slice()));
    match dobrushin_bounds(&inf, &budget) {
        Ok(b) => {
            results.insert("phi".into(), matrix(&b.phi));
            results.insert("nu_bound".into(), nums(&b.nu_bound));
            results.insert("delta".into(), b.delta.map_or(Value::Null, num));
            results.insert("nu_delta_bound".into(), b.nu_delta_bound.as_deref().map_or(Value::Null, nums));
        }
        Err(e @ (InferaError::Unbounded | InferaError::SpectralNormTooLarge(_))) => {
            warnings.push(format!("no bound: {e}"));
        }
        Err(e) => return Err(e),
    }
    Ok(report(Value::Object(results), warnings, EXIT_PASS))
}

fn csv_line(fields: &[String]) -> String {
    fields.join(",") + "\n"
}

fn cmd_ising(cmd: &IsingCommand, format: Option<Format>) -> Result<Output> {
    let csv = format == Some(Format::Csv);
    match cmd {
        IsingCommand::NuLimit { j, d, eps } => {
            require_json(format)?;
            let nu = nu_bethe_limit(*j, *eps, *d)?;
            Ok(report(json!({"J": num(*j), "d": d, "eps": num(*eps), "nu": num(nu), "nu_over_eps": num(nu / eps)}), vec![], EXIT_PASS))
        }
        IsingCommand::Critical { d } => {
            require_json(format)?;
            Ok(report(json!({"d": d, "critical_J": num(critical_coupling(*d)?)}), vec![], EXIT_PASS))
        }
        IsingCommand::Enforce { nu, j, d } => {
            require_json(format)?;
            let eps = enforceable_epsilon(*nu, *j, *d)?;
            let exit = if eps.is_some() { EXIT_PASS } else { EXIT_NEGATIVE };
            Ok(report(
                json!({"target_nu": num(*nu), "J": num(*j), "d": d, "enforceable": eps.is_some(), "eps": eps.map_or(Value::Null, num)}),
                vec![],
                exit,
            ))
        }
        IsingCommand::Sensitivity { j, h0, d, eps, depth } => {
            let eps = parse_list(eps, "eps")?;
            let profile = match depth {
                Some(depth) => sensitivity_profile_finite(*j, *h0, *d, *depth, &eps)?,
                None => sensitivity_profile(*j, *h0, *d, &eps)?,
            };
            if csv {
                let mut text = csv_line(&["eps".into(), "nu".into()]);
                for (e, nu) in &profile {
                    text += &csv_line(&[fmt12(*e), fmt12(*nu)]);
                }
                return Ok(Output::Csv { text, exit: EXIT_PASS });
            }
            let rows: Vec<Value> = profile
                .iter()
                .map(|&(e, nu)| json!({"eps": num(e), "nu": num(nu), "ratio": num(nu / e)}))
                .collect();
            Ok(report(json!({"J": num(*j), "h0": num(*h0), "d": d, "depth": depth, "profile": rows}), vec![], EXIT_PASS))
        }
        IsingCommand::Sweep { j, d, eps, h0, depth } => {
            let js = parse_list(j, "J")?;
            let eps = parse_list(eps, "eps")?;
            let mut rows = Vec::new();
            for &jv in &js {
                for &e in &eps {
                    let (nu, backend) = match depth {
                        Some(depth) => {
                            let model = IsingTreeModel::new(*d, *depth, jv, *h0)?;
                            let dist = ising_tree_distribution(&model)?;
                            (nu_gibbs(&dist, &PrivacyBudget::uniform(dist.n(), e)?, 0)?, "exact")
                        }
                        None if *h0 == 0.0 => (nu_bethe_limit(jv, e, *d)?, "bethe"),
                        None => (sensitivity_profile(jv, *h0, *d, &[e])?[0].1, "sensitivity"),
                    };
                    rows.push((e, jv, nu, backend));
                }
            }
            if format == Some(Format::Json) {
                let rows: Vec<Value> = rows
                    .iter()
                    .map(|&(e, jv, nu, backend)| {
                        json!({"eps": num(e), "J": num(jv), "h0": num(*h0), "d": d, "nu": num(nu), "backend": backend})
                    })
                    .collect();
                return Ok(report(json!({"rows": rows}), vec![], EXIT_PASS));
            }
            let mut text = csv_line(&["eps", "J", "h0", "d", "nu", "backend"].map(String::from));
            for (e, jv, nu, backend) in rows {
                text += &csv_line(&[fmt12(e), fmt12(jv), fmt12(*h0), d.to_string(), fmt12(nu), backend.to_string()]);
            }
            Ok(Output::Csv { text, exit: EXIT_PASS })
        }
    }
}

/// Float with 12 significant digits in shortest form.
fn fmt12(x: f64) -> String {
    format!("{}", sig12(x))
}

fn cmd_audit(inputs: &mut Inputs, mechanism: &Path, dist: Option<&Path>, target: usize) -> Result<Output> {
    let text = inputs.read(mechanism)?;
    let mech = parse_mechanism(&text).map_err(|e| match e {
        InferaError::Parse(msg) => parse_err(mechanism, msg),
        other => other,
    })?;
    let eps = match &mech {
        Mechanism::Profile(p) => dp_audit(p),
        Mechanism::Table(t) => dp_audit_table(t),
    };
    let mut results = Map::new();
    results.insert("eps".into(), nums(eps.as_slice()));
    if let Some(path) = dist {
        let d = inputs.dist(path)?;
        results.insert("target".into(), json!(target));
        results.insert("nu".into(), num(mechanism_nu(&d, &mech, target)?));
    }
    Ok(report(Value::Object(results), vec![], EXIT_PASS))
}

fn cmd_sample(x: &str, eps: f64, seed: u64, count: usize) -> Result<Output> {
    let bits: Vec<usize> = x
        .split(',')
        .map(|t| match t.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(InferaError::Parse(format!("database bit `{other}` must be 0 or 1"))),
        })
        .collect::<Result<_>>()?;
    let mut sampler = NoisySumSampler::new(eps, seed)?;
    let samples: Vec<f64> = (0..count).map(|_| sampler.sample(&bits)).collect();
    Ok(report(json!({"x": bits, "eps": num(eps), "seed": seed, "samples": nums(&samples)}), vec![], EXIT_PASS))
}

fn dispatch(cli: &Cli, inputs: &mut Inputs) -> Result<Output> {
    match &cli.command {
        Command::Check { dist, what } => {
            require_json(cli.format)?;
            cmd_check(inputs, dist, *what)
        }
        Command::Nu(args) => {
            require_json(cli.format)?;
            cmd_nu(inputs, args)
        }
        Command::Bound { dist, eps } => {
            require_json(cli.format)?;
            cmd_bound(inputs, dist, eps)
        }
        Command::Ising(cmd) => cmd_ising(cmd, cli.format),
        Command::Audit { mechanism, dist, target } => {
            require_json(cli.format)?;
            cmd_audit(inputs, mechanism, dist.as_deref(), *target)
        }
        Command::Sample { x, eps, seed, count } => {
            require_json(cli.format)?;
            cmd_sample(x, *eps, *seed, *count)
        }
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| InferaError::Io(format!("{}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| InferaError::Io(e.to_string())),
    }
}

/// Run a parsed command line, writing the report to `stdout` (or `--out`)
/// and errors to `stderr`. Returns the exit code.
pub fn run(cli: &Cli, command_echo: &str, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if let Some(cap) = cli.cap {
        set_size_cap(cap);
    }
    let start = Instant::now();
    let mut inputs = Inputs::new(command_echo);
    let outcome = dispatch(cli, &mut inputs);
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let (text, exit) = match outcome {
        Ok(Output::Csv { text, exit }) => (text, exit),
        Ok(Output::Report { mut results, warnings, exit }) => {
            round_floats(&mut results);
            let report = json!({
                "command": command_echo,
                "inputs_digest": inputs.digest(),
                "results": results,
                "warnings": warnings,
                "timing": {"elapsed_ms": elapsed},
            });
            (serde_json::to_string_pretty(&report).unwrap_or_default() + "\n", exit)
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = emit(cli.out.as_deref(), &text, stdout) {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_ERROR;
    }
    exit
}

/// Parse `args` (including the program name) and run. Argument errors exit
/// with code 2; `--help` and `--version` exit with 0.
pub fn run_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let echo = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>().join(" ");
    match Cli::try_parse_from(&args) {
        Ok(cli) => run(&cli, &echo, stdout, stderr),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            code
        }
    }
}
