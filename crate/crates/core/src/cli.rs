//! Batch command-line interface. Every command writes one deterministic
//! document (JSON or markdown) and maps outcomes onto exit codes:
//! 0 pass, 1 check failure, 2 usage or configuration error, 3 I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use num_traits::{Signed, Zero};
use serde_json::json;

use crate::error::Error;
use crate::linfty;
use crate::normingset::ConstructionState;
use crate::norms::{self, Vector};
use crate::rational::{self, Q};
use crate::report::{self, CheckOutcome, Tracker};
use crate::sampling;
use crate::schreier::HereditaryFamily;
use crate::sequences::{self, BlockBasis};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const ALL_CHECKS: &[&str] = &["properties", "thm21", "compat", "biortho", "basis", "lower", "derive", "l1"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Md,
}

#[derive(Debug, Parser)]
#[command(name = "predual", version, about = "Exact finite-stage construction of an l1-predual norming set")]
pub struct Cli {
    /// Output format of the report.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the norming set level by level and save the state document.
    Build(BuildArgs),
    /// Run verification suites against a state.
    Verify(VerifyArgs),
    /// Certified bracket for the norm of a finitely supported vector.
    Norm(NormArgs),
    /// Iterated derivative of a hereditary family.
    Derive(DeriveArgs),
    /// Constructive l1 witness for a block sequence.
    Witness(WitnessArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Config {
    /// Scalar b with 0 < b < 1/4.
    #[arg(long, default_value = "1/5")]
    pub b: String,
    /// Maximum number of levels.
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    /// Coordinate budget; building stops before exceeding it.
    #[arg(long = "max-coord", default_value_t = 100_000)]
    pub max_coord: u64,
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// Load this state document instead of building from the config.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[command(flatten)]
    pub config: Config,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub config: Config,
    /// Where to write the state document.
    #[arg(long, default_value = "state.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Comma-separated subset of: properties, thm21, compat, biortho, basis, lower, derive, l1.
    #[arg(long, default_value = "properties,thm21,compat,biortho,basis,lower,derive,l1")]
    pub checks: String,
    #[arg(long, default_value = "1/1000")]
    pub eps: String,
    /// Depth cap K for coefficient enumeration.
    #[arg(long, default_value_t = 8)]
    pub depth: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of sampled vectors per sampled suite.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NormArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Sparse vector, e.g. `1:1,2:-1/2`.
    #[arg(long)]
    pub vector: String,
    #[arg(long, default_value = "1/1000")]
    pub eps: String,
    #[arg(long, default_value_t = 8)]
    pub depth: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeriveArgs {
    /// `An:<n>`, `schreier+<c>`, `restrict(<family>,<M>)` or `empty`.
    #[arg(long)]
    pub family: String,
    #[arg(long, default_value_t = 1)]
    pub iterations: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WitnessArgs {
    #[command(flatten)]
    pub state: StateArgs,
    #[arg(long)]
    pub k: usize,
    /// Unit blocks `e1,e2,…` or `;`-separated sparse vectors.
    #[arg(long)]
    pub blocks: String,
    /// Lower bound δ on designated coordinates; defaults to their minimum.
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failed command: exit code and message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Failure { code: EXIT_USAGE, message: e.to_string() }
    }
    fn io(path: &Path, e: impl ToString) -> Self {
        Failure { code: EXIT_IO, message: format!("{}: {}", path.display(), e.to_string()) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::usage(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// A finished command: the rendered document and whether it passed.
pub struct Outcome {
    pub document: String,
    pub passed: bool,
    pub out: Option<PathBuf>,
}

fn render<T: Serialize>(format: Format, doc: &T, md: impl FnOnce() -> String) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(doc).expect("documents serialize") + "\n",
        Format::Md => md(),
    }
}

impl Config {
    fn build(&self) -> CliResult<ConstructionState> {
        let b = rational::parse(&self.b)?;
        if self.levels < 2 {
            return Err(Failure::usage("--levels must be at least 2"));
        }
        if self.max_coord < 2 {
            return Err(Failure::usage("--max-coord must be at least 2"));
        }
        Ok(ConstructionState::build(b, self.levels, Some(self.max_coord))?)
    }
}

impl StateArgs {
    fn load(&self) -> CliResult<ConstructionState> {
        match &self.state {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
                Ok(ConstructionState::load_state(&text)?)
            }
            None => self.config.build(),
        }
    }
}

fn parse_eps(s: &str) -> CliResult<Q> {
    let eps = rational::parse(s)?;
    if eps <= Q::zero() {
        return Err(Failure::usage("--eps must be positive"));
    }
    Ok(eps)
}

fn cmd_build(format: Format, args: &BuildArgs) -> CliResult<Outcome> {
    let state = args.config.build()?;
    fs::write(&args.out, state.save_state()).map_err(|e| Failure::io(&args.out, e))?;
    let sizes = state.delta_sizes();
    let doc = json!({
        "command": "build",
        "b": rational::fmt(state.b()),
        "levels": state.level_count(),
        "delta_sizes": sizes,
        "max_coord": state.max_coord(),
        "functionals": state.functional_count(),
        "state": args.out.display().to_string(),
    });
    let document = render(format, &doc, || {
        let mut s = format!("# build\n\nb = {}, {} levels, max coordinate {}\n\n", rational::fmt(state.b()), state.level_count(), state.max_coord());
        s.push_str("| level | interval | size |\n|---|---|---|\n");
        for (n, l) in state.levels().iter().enumerate() {
            s.push_str(&format!("| {} | [{}, {}] | {} |\n", n + 1, l.lo, l.hi, l.width()));
        }
        s
    });
    Ok(Outcome { document, passed: true, out: None })
}

fn property_outcomes(state: &ConstructionState) -> Vec<CheckOutcome> {
    state
        .verify_properties()
        .checks
        .into_iter()
        .map(|c| CheckOutcome {
            check: format!("properties: {}", c.property),
            anchor: "construction property".into(),
            passed: c.passed,
            cases: c.checked as u64,
            observed: None,
            bound: None,
            counterexample: c.counterexample,
        })
        .collect()
}

fn derive_outcomes() -> Vec<CheckOutcome> {
    let mut t = Tracker::new("derive: (R*A_n)^(k) = R*A_(n-k)", "k-th derivative of R*A_n");
    let mut z = Tracker::new("derive: (R*A_n)^(n) is the zero point", "n-th derivative of R*A_n");
    for n in 1..=6u32 {
        for k in 1..=n {
            let got = HereditaryFamily::SizeBounded(n).iterated_derivative(k);
            t.holds(got == HereditaryFamily::SizeBounded(n - k), || format!("n={n} k={k}: got {got}"));
        }
        z.holds(HereditaryFamily::SizeBounded(n).iterated_derivative(n).is_zero_point_only(), || format!("n={n}"));
    }
    vec![t.finish(), z.finish()]
}

fn lower_outcome(state: &ConstructionState, chain: &[linfty::ExtensionOperator], seed: u64, samples: usize) -> CliResult<CheckOutcome> {
    let mut rng = sampling::rng(seed ^ 0x6c6f_7765);
    let half = rational::q(1, 2);
    let mut t = Tracker::new("lower estimate", "|(d*|I)(T_n x)| ≥ 1/2");
    for s in 0..samples {
        let op = &chain[s % chain.len()];
        let x = sampling::sign_patterns(&mut rng, 1, op.dim(), 0.5).pop().expect("one pattern");
        let r = linfty::lower_estimate_check(state, op, &x)?;
        t.at_least(&r.value.abs(), &half, || format!("n={} pattern {x}", op.n()));
    }
    Ok(t.finish())
}

fn l1_outcomes(state: &ConstructionState, chain: &[linfty::ExtensionOperator], seed: u64, samples: usize, depth: u32) -> CliResult<Vec<CheckOutcome>> {
    let op = &chain[chain.len().min(3) - 1];
    let mut rng = sampling::rng(seed ^ 0x6c31);
    let coeffs = sampling::sparse_vectors(&mut rng, 8, op.dim(), 3);
    let ys = sampling::sparse_vectors(&mut rng, samples.min(64), op.dim(), 3);
    let mut lower = Tracker::new(format!("l1 lower witness, n={}", op.n()), "‖Σ a_i b_i*‖ ≥ λ⁻¹Σ|a_i|");
    let mut upper = Tracker::new(format!("l1 upper samples, n={}", op.n()), "‖Σ a_i b_i*‖ ≤ (C/2 + 1)Σ|a_i|");
    for a in &coeffs {
        let r = linfty::l1_equivalence_check(state, op, a, &ys, depth)?;
        lower.holds(r.lower_certified, || {
            format!("a = {a}: value {} against Σ|a| = {}, ‖x‖ ≤ {}", rational::fmt(&r.witness_value), rational::fmt(&r.sum_abs), rational::fmt(&r.witness_norm_upper))
        });
        upper.holds(r.upper_samples.passed, || format!("a = {a}: {}", r.upper_samples.counterexample.clone().unwrap_or_default()));
    }
    Ok(vec![lower.finish(), upper.finish()])
}

pub fn parse_checks(list: &str) -> CliResult<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    let mut unknown = Vec::new();
    for c in list.split(',').map(str::trim).filter(|c| !c.is_empty()) {
        if ALL_CHECKS.contains(&c) {
            if !out.iter().any(|o| o == c) {
                out.push(c.to_string());
            }
        } else {
            unknown.push(c.to_string());
        }
    }
    if !unknown.is_empty() {
        return Err(Failure::usage(format!("unknown checks: {} (known: {})", unknown.join(", "), ALL_CHECKS.join(", "))));
    }
    if out.is_empty() {
        return Err(Failure::usage("no checks selected"));
    }
    Ok(out)
}

fn cmd_verify(format: Format, args: &VerifyArgs) -> CliResult<Outcome> {
    let checks = parse_checks(&args.checks)?;
    let eps = parse_eps(&args.eps)?;
    let state = args.state.load()?;
    let needs_chain = checks.iter().any(|c| matches!(c.as_str(), "thm21" | "compat" | "biortho" | "lower" | "l1"));
    let chain = if needs_chain { linfty::build_chain(&state, state.level_count())? } else { Vec::new() };
    let mut outcomes: Vec<CheckOutcome> = Vec::new();
    for c in &checks {
        match c.as_str() {
            "properties" => outcomes.extend(property_outcomes(&state)),
            "thm21" => {
                for op in &chain {
                    outcomes.extend(linfty::verify_dual_properties(&state, op)?);
                }
            }
            "compat" => outcomes.push(linfty::compatibility_check(&state, &chain)),
            "biortho" => {
                for op in &chain {
                    outcomes.push(linfty::biorthogonality_check(&state, op)?);
                }
            }
            "basis" => {
                let mut rng = sampling::rng(args.seed);
                let samples = sampling::sparse_vectors(&mut rng, args.samples, state.max_coord(), 4);
                outcomes.extend(norms::basis_bound_check(&state, &samples, &eps, args.depth)?.outcomes);
            }
            "lower" => outcomes.push(lower_outcome(&state, &chain, args.seed, args.samples)?),
            "derive" => outcomes.extend(derive_outcomes()),
            "l1" => outcomes.extend(l1_outcomes(&state, &chain, args.seed, args.samples, args.depth)?),
            _ => unreachable!("validated by parse_checks"),
        }
    }
    outcomes.sort_by(|a, b| a.check.cmp(&b.check));
    let passed = report::all_passed(&outcomes);
    let doc = json!({
        "command": "verify",
        "b": rational::fmt(state.b()),
        "levels": state.level_count(),
        "checks": outcomes,
        "passed": passed,
    });
    let document = render(format, &doc, || {
        format!("# verify\n\n{} levels, b = {}\n\n{}", state.level_count(), rational::fmt(state.b()), report::to_markdown(&outcomes))
    });
    Ok(Outcome { document, passed, out: args.out.clone() })
}

fn cmd_norm(format: Format, args: &NormArgs) -> CliResult<Outcome> {
    let eps = parse_eps(&args.eps)?;
    let x: Vector = args.vector.parse()?;
    let state = args.state.load()?;
    let (br, converged) = norms::norm_bracket_best(&state, &x, &eps, args.depth)?;
    let doc = json!({
        "command": "norm",
        "vector": x.to_string(),
        "epsilon": rational::fmt(&eps),
        "converged": converged,
        "bracket": br,
        "width": rational::fmt(&br.width()),
    });
    let document = render(format, &doc, || {
        format!(
            "# norm\n\n| vector | lower | upper | width | depth | converged |\n|---|---|---|---|---|---|\n| {} | {} | {} | {} | {} | {} |\n",
            x,
            rational::fmt(&br.lower),
            rational::fmt(&br.upper),
            rational::fmt(&br.width()),
            br.depth,
            converged
        )
    });
    Ok(Outcome { document, passed: converged, out: args.out.clone() })
}

fn cmd_derive(format: Format, args: &DeriveArgs) -> CliResult<Outcome> {
    let family: HereditaryFamily = args.family.parse()?;
    let steps: Vec<String> = (0..=args.iterations).map(|k| family.iterated_derivative(k).describe()).collect();
    let result = steps.last().cloned().unwrap_or_default();
    let doc = json!({
        "command": "derive",
        "family": family.to_string(),
        "iterations": args.iterations,
        "chain": steps,
        "result": result,
    });
    let document = render(format, &doc, || {
        let mut s = format!("# derive\n\n| k | derivative of {} |\n|---|---|\n", family);
        for (k, d) in steps.iter().enumerate() {
            s.push_str(&format!("| {k} | {d} |\n"));
        }
        s
    });
    Ok(Outcome { document, passed: true, out: args.out.clone() })
}

fn cmd_witness(format: Format, args: &WitnessArgs) -> CliResult<Outcome> {
    let basis: BlockBasis = args.blocks.parse()?;
    let delta = args.delta.as_deref().map(rational::parse).transpose()?;
    let state = args.state.load()?;
    let w = match sequences::l1_witness(&state, &basis, delta.as_ref(), args.k) {
        Ok(w) => w,
        Err(e @ Error::InsufficientLevels(_)) => return Err(Failure { code: EXIT_FAIL, message: e.to_string() }),
        Err(e) => return Err(e.into()),
    };
    let doc = json!({ "command": "witness", "witness": w });
    let document = render(format, &doc, || {
        let vals: Vec<String> = w.values.iter().map(rational::fmt).collect();
        format!(
            "# witness\n\n| k | F | functional | support | values | threshold | method |\n|---|---|---|---|---|---|---|\n| {} | {:?} | {} | {:?} | {} | {} | {} |\n",
            w.k,
            w.blocks,
            w.functional,
            w.support,
            vals.join(", "),
            rational::fmt(&w.threshold),
            serde_json::to_value(w.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
        )
    });
    Ok(Outcome { document, passed: true, out: args.out.clone() })
}

pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Build(a) => cmd_build(cli.format, a),
        Command::Verify(a) => cmd_verify(cli.format, a),
        Command::Norm(a) => cmd_norm(cli.format, a),
        Command::Derive(a) => cmd_derive(cli.format, a),
        Command::Witness(a) => cmd_witness(cli.format, a),
    }
}

/// Parses `args`, runs the command and writes the document to `stdout`
/// (or the `--out` file). Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            let _ = if code == EXIT_PASS { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok(o) => {
            let written = match &o.out {
                Some(path) => fs::write(path, &o.document).map_err(|e| Failure::io(path, e)),
                None => stdout.write_all(o.document.as_bytes()).map_err(|e| Failure::io(Path::new("<stdout>"), e)),
            };
            match written {
                Ok(()) if o.passed => EXIT_PASS,
                Ok(()) => EXIT_FAIL,
                Err(f) => {
                    let _ = writeln!(stderr, "error: {}", f.message);
                    f.code
                }
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
