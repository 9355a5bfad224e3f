//! Implementation of the `cvpath` command-line tool.
//!
//! Exit codes: 0 success, 1 malformed input, 2 circuit outside the supported
//! block/rotation structure, 3 a guard or oracle limit was hit, 4 a
//! `compare` run finished but the methods disagree.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use cvpath::analysis::{analyze_file, AnalysisReport};
use cvpath::circuit_file::{CircuitFile, StructureError};
use cvpath::fockoracle::{self, FockConfig, FockState, OracleError};
use cvpath::gkp::{self, DvCircuit};
use cvpath::moments::{MomentError, DEFAULT_DEGREE_GUARD};
use cvpath::pathprop::{self, BackpropError, CostReport, NAIVE_TERM_GUARD};
use cvpath::CircuitIR;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNSUPPORTED: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "CVPATH_THREADS";
/// Environment variable naming a config file, used when `--config` is absent.
pub const CONFIG_ENV: &str = "CVPATH_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "cvpath", version, about = "Expectation values of CV circuits with low symplectic coherence")]
struct Cli {
    /// TOML file with guards and tolerances.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expectation value by path back-propagation.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Path method against the naive back-propagation and the Fock oracle.
    Compare {
        file: PathBuf,
        /// Allowed |path - Fock| difference.
        #[arg(long)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Per-gate resource classification.
    Analyze {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Translate a {H, T, CNOT} qubit circuit into a CV circuit file.
    TranslateGkp {
        dvfile: PathBuf,
        /// Cubicity used for every T gate.
        #[arg(long = "gamma-t", allow_negative_numbers = true)]
        gamma_t: f64,
        /// Write to this path instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Parse and normalize a circuit file.
    Validate { file: PathBuf },
}

/// Optional settings read from a TOML file.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub threads: Option<usize>,
    pub naive_term_guard: f64,
    pub moment_degree_guard: u32,
    /// Allowed |path - naive| difference in `compare`.
    pub naive_tol: f64,
    pub fock: FockSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FockSection {
    pub start_cutoff: usize,
    pub max_cutoff: usize,
    pub memory_guard: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            threads: None,
            naive_term_guard: NAIVE_TERM_GUARD,
            moment_degree_guard: DEFAULT_DEGREE_GUARD,
            naive_tol: 1e-9,
            fock: FockSection::default(),
        }
    }
}

impl Default for FockSection {
    fn default() -> Self {
        let d = FockConfig::default();
        FockSection { start_cutoff: d.start_cutoff, max_cutoff: d.max_cutoff, memory_guard: d.memory_guard }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }

    pub fn fock_config(&self) -> FockConfig {
        FockConfig {
            start_cutoff: self.fock.start_cutoff,
            max_cutoff: self.fock.max_cutoff,
            memory_guard: self.fock.memory_guard,
            ..FockConfig::default()
        }
    }
}

/// An error message with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: String) -> Self {
        Failure { code: EXIT_INPUT, message }
    }
}

impl From<StructureError> for Failure {
    fn from(e: StructureError) -> Self {
        Failure { code: EXIT_UNSUPPORTED, message: e.to_string() }
    }
}

fn backprop_failure(e: BackpropError) -> Failure {
    let code = match e {
        BackpropError::TermGuard { .. } | BackpropError::Moment(MomentError::DegreeGuard { .. }) => EXIT_GUARD,
        BackpropError::NonHermitian(_) | BackpropError::WidthMismatch { .. } => EXIT_INPUT,
        _ => EXIT_GUARD,
    };
    Failure { code, message: e.to_string() }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn load_circuit(path: &Path) -> Result<CircuitFile, Failure> {
    let text = read_file(path)?;
    CircuitFile::parse(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Machine-readable output of `simulate`.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub value: f64,
    pub imag_residual: f64,
    pub path_count: usize,
    pub max_degree: u32,
    pub term_count: usize,
    pub wall_time_s: f64,
    pub cost: CostReport,
}

pub fn simulate(file: &CircuitFile, config: &Config) -> Result<SimulateReport, Failure> {
    let ir = file.circuit_ir()?;
    let res = pathprop::expectation_with_guard(&ir, file.state(), file.observable(), config.moment_degree_guard).map_err(backprop_failure)?;
    let mut cost = pathprop::cost_estimate(&ir, file.observable().degree());
    // keep the JSON report finite
    cost.formula_value = cost.formula_value.min(f64::MAX);
    cost.term_order = cost.term_order.min(f64::MAX);
    Ok(SimulateReport {
        value: res.value,
        imag_residual: res.imag_residual,
        path_count: res.backprop.path_count,
        max_degree: res.backprop.max_degree,
        term_count: res.backprop.term_count,
        wall_time_s: res.backprop.wall_time.as_secs_f64(),
        cost,
    })
}

/// Outcome of one reference method in `compare`.
#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub value: Option<f64>,
    /// Reason the method declined, if it did.
    pub declined: Option<String>,
}

impl MethodOutcome {
    fn ok(value: f64) -> Self {
        MethodOutcome { value: Some(value), declined: None }
    }

    fn declined(reason: String) -> Self {
        MethodOutcome { value: None, declined: Some(reason) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub path: f64,
    pub naive: MethodOutcome,
    pub fock: MethodOutcome,
    pub fock_cutoff: Option<usize>,
    pub path_naive_delta: Option<f64>,
    pub path_fock_delta: Option<f64>,
    pub naive_fock_delta: Option<f64>,
    pub tol: f64,
    pub naive_tol: f64,
    pub agree: bool,
}

impl CompareReport {
    pub fn exit_code(&self) -> i32 {
        if self.naive.declined.is_some() || self.fock.declined.is_some() {
            EXIT_GUARD
        } else if self.agree {
            EXIT_OK
        } else {
            EXIT_MISMATCH
        }
    }
}

pub fn compare(file: &CircuitFile, tol: f64, config: &Config) -> Result<CompareReport, Failure> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::input(format!("--tol must be positive and finite, got {tol}")));
    }
    let ir = file.circuit_ir()?;
    let path = simulate(file, config)?.value;
    let naive = naive_value(&ir, file, config);
    let (fock, fock_cutoff) = match fock_value(file, tol, config) {
        Ok(c) => (MethodOutcome::ok(c.value), Some(c.cutoff)),
        Err(e) => (MethodOutcome::declined(format!("Fock oracle declined: {e}")), None),
    };
    let delta = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(x, y)| (x - y).abs());
    let path_naive_delta = delta(Some(path), naive.value);
    let path_fock_delta = delta(Some(path), fock.value);
    let naive_fock_delta = delta(naive.value, fock.value);
    let agree = path_naive_delta.is_some_and(|d| d <= config.naive_tol) && path_fock_delta.is_some_and(|d| d <= tol);
    Ok(CompareReport {
        path,
        naive,
        fock,
        fock_cutoff,
        path_naive_delta,
        path_fock_delta,
        naive_fock_delta,
        tol,
        naive_tol: config.naive_tol,
        agree,
    })
}

fn naive_value(ir: &CircuitIR, file: &CircuitFile, config: &Config) -> MethodOutcome {
    let poly = match pathprop::naive_backprop_guarded(ir, file.observable(), config.naive_term_guard) {
        Ok(p) => p,
        Err(e) => return MethodOutcome::declined(format!("naive back-propagation declined: {e}")),
    };
    match cvpath::moments::MomentEvaluator::with_guard(file.state(), config.moment_degree_guard).expectation(&poly) {
        Ok(v) => MethodOutcome::ok(v.re),
        Err(e) => MethodOutcome::declined(format!("naive back-propagation declined: {e}")),
    }
}

fn fock_value(file: &CircuitFile, tol: f64, config: &Config) -> Result<fockoracle::Converged, OracleError> {
    let fc = config.fock_config();
    let m = file.modes();
    let first = (fc.start_cutoff as f64).powi(m as i32);
    if first > fc.memory_guard as f64 {
        return Err(OracleError::MemoryGuard { dim: first, guard: fc.memory_guard });
    }
    let prep = fockoracle::preparation_for(file.state())?;
    // converge a decade below the comparison tolerance
    fockoracle::converge_with(m, |n| FockState::vacuum(m, n), &prep, file.elements(), file.observable(), tol / 10.0, &fc)
}

pub fn analyze(file: &CircuitFile) -> AnalysisReport {
    analyze_file(file)
}

pub fn translate_gkp(text: &str, gamma_t: f64) -> Result<CircuitFile, Failure> {
    let dv = DvCircuit::parse(text).map_err(|e| Failure::input(e.to_string()))?;
    gkp::translate(&dv, gamma_t).map_err(|e| Failure::input(e.to_string()))
}

fn configure_threads(config: &Config) -> Result<(), Failure> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| Failure::input(format!("{THREADS_ENV}={v} is not a thread count")))?),
        Err(_) => None,
    };
    if let Some(n) = from_env.or(config.threads) {
        // a global pool may already exist when called repeatedly in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) {
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.12e}")).unwrap_or_else(|| "-".into())
}

/// Runs the tool with the given arguments and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let config_path = cli.config.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let config = match config_path {
        Some(p) => Config::load(&p)?,
        None => Config::default(),
    };
    configure_threads(&config)?;
    match cli.command {
        Command::Simulate { file, json } => {
            let f = load_circuit(&file)?;
            let r = simulate(&f, &config)?;
            if json {
                write_json(out, &r);
            } else {
                let _ = writeln!(out, "value           {:.15e}", r.value);
                let _ = writeln!(out, "imag residual   {:.3e}", r.imag_residual);
                let _ = writeln!(out, "paths           {}", r.path_count);
                let _ = writeln!(out, "max degree      {}", r.max_degree);
                let _ = writeln!(out, "terms           {}", r.term_count);
                let _ = writeln!(out, "wall time       {:.6} s", r.wall_time_s);
                let c = &r.cost;
                let _ = writeln!(out, "modes           {}", c.modes);
                let _ = writeln!(out, "cubic gates     {} (max {} per block)", c.total_cubics, c.max_block_cubics);
                let _ = writeln!(out, "rotation layers {}", c.rotation_layers);
                let _ = writeln!(out, "degree bound    {} (observable degree {})", c.degree_bound, c.observable_degree);
                let _ = writeln!(out, "cost            {} ~ {:.3e}", c.formula, c.formula_value);
                let _ = writeln!(out, "efficient       {}", c.efficient_regime);
            }
            Ok(EXIT_OK)
        }
        Command::Compare { file, tol, json } => {
            let f = load_circuit(&file)?;
            let r = compare(&f, tol, &config)?;
            if json {
                write_json(out, &r);
            } else {
                let _ = writeln!(out, "path            {:.12e}", r.path);
                let _ = writeln!(out, "naive           {}", opt(r.naive.value));
                let _ = writeln!(out, "fock            {}{}", opt(r.fock.value), r.fock_cutoff.map(|n| format!(" (cutoff {n})")).unwrap_or_default());
                let _ = writeln!(out, "|path - naive|  {}", opt(r.path_naive_delta));
                let _ = writeln!(out, "|path - fock|   {}", opt(r.path_fock_delta));
                let _ = writeln!(out, "|naive - fock|  {}", opt(r.naive_fock_delta));
                for reason in [&r.naive.declined, &r.fock.declined].into_iter().flatten() {
                    let _ = writeln!(out, "{reason}");
                }
                let _ = writeln!(out, "{}", if r.agree { "agree" } else { "disagree" });
            }
            Ok(r.exit_code())
        }
        Command::Analyze { file, json } => {
            let f = load_circuit(&file)?;
            let r = analyze(&f);
            if json {
                write_json(out, &r);
            } else {
                for g in &r.gates {
                    let line = g.line.map(|l| format!("line {l}")).unwrap_or_default();
                    let _ = writeln!(out, "{:>4}  {:<10} {:<26} {}", g.index, g.gate, g.class.label(), line);
                }
                let _ = writeln!(out, "modes {}  t {}  c {}  entangling {}", r.modes, r.t, r.c, r.entangling);
                if !r.supported {
                    let _ = writeln!(out, "structure: unsupported symplectic coherence structure");
                }
                let _ = writeln!(out, "verdict: {}", r.verdict.label());
            }
            Ok(EXIT_OK)
        }
        Command::TranslateGkp { dvfile, gamma_t, output } => {
            let text = read_file(&dvfile)?;
            let f = translate_gkp(&text, gamma_t)?;
            match output {
                Some(path) => std::fs::write(&path, f.serialize()).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
                None => {
                    let _ = write!(out, "{}", f.serialize());
                }
            }
            Ok(EXIT_OK)
        }
        Command::Validate { file } => {
            let f = load_circuit(&file)?;
            let ir = f.circuit_ir()?;
            let _ = writeln!(
                out,
                "ok: {} modes, {} gates, {} cubic, {} rotation layers",
                f.modes(),
                f.gates().len(),
                ir.total_cubics(),
                ir.rotation_count()
            );
            Ok(EXIT_OK)
        }
    }
}
