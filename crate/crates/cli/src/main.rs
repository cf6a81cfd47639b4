//! `kcge`: JSON-in / JSON-out front end for the k-CGE toolkit.
//!
//! Exit codes: 0 success, 2 invalid input, 3 size budget refused,
//! 64 command-line usage error.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use kcge::classifier::{classify, Budget, ClassificationReport, ClassifyOptions};
use kcge::disentangler::{
    build_disentangling_unitary, free_party_residual, two_depth_decompose, two_depth_decompose_with, TwoDepthRoles,
};
use kcge::json::{matrix_to_json, parse_state, to_json_pretty, StateJson};
use kcge::network::{algorithm1, cross_check, CrossCheck, NetworkBoundReport, NetworkGraph, CROSS_CHECK_MAX_DIM};
use kcge::witness::{
    fig4_csv, fig4_curves, fig4_grid, sample_radius_lower_bound, w4_theta_coefficients, werner_crossing_visibility,
    werner_state, werner_visibility_threshold, witness_value, Provenance, WitnessSpec,
};
use kcge::zoo::StateFamily;
use kcge::{KcgeError, PartySubset, PureState, Tolerance};

const EXIT_INVALID: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Kcge(#[from] KcgeError),

    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },

    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Kcge(e) if e.is_budget() => EXIT_BUDGET,
            _ => EXIT_INVALID,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "kcge", version, about = "k-connection genuine entanglement toolkit")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunConfig {
    /// Relative singular-value cutoff and reconstruction tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,

    /// Highest connection level to test.
    #[arg(long, global = true)]
    max_k: Option<usize>,

    /// Largest joint dimension the classifier will accept.
    #[arg(long, global = true)]
    budget_dim: Option<usize>,

    /// Largest number of size-floor(n/2) subsets the classifier will scan.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    budget_subsets: u128,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print progress notes on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

impl RunConfig {
    fn tolerance(&self) -> CliResult<Tolerance> {
        Ok(Tolerance::uniform(self.tol)?)
    }

    fn classify_options(&self) -> CliResult<ClassifyOptions> {
        let mut budget = Budget::default();
        if let Some(d) = self.budget_dim {
            budget.max_dim = positive(d, "--budget-dim")?;
        }
        budget.max_subsets = self.budget_subsets;
        if budget.max_subsets == 0 {
            return Err(CliError::Invalid("--budget-subsets must be positive".into()));
        }
        if self.max_k == Some(0) {
            return Err(CliError::Invalid("--max-k must be positive".into()));
        }
        Ok(ClassifyOptions { tol: self.tolerance()?, max_k: self.max_k, budget })
    }

    fn cross_check_dim(&self) -> CliResult<usize> {
        self.budget_dim.map_or(Ok(CROSS_CHECK_MAX_DIM), |d| positive(d, "--budget-dim"))
    }

    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("kcge: {}", msg.as_ref());
        }
    }
}

fn positive(v: usize, flag: &str) -> CliResult<usize> {
    if v == 0 {
        return Err(CliError::Invalid(format!("{flag} must be positive")));
    }
    Ok(v)
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a named family state from a parameter file and print its state JSON.
    Generate {
        /// Family parameters, e.g. {"family":"ghz","n":3,"d":2,"a":[...]}; `-` reads stdin.
        #[arg(long)]
        family: PathBuf,
    },
    /// Report the connection level of a pure state.
    Classify {
        #[arg(long)]
        state: PathBuf,
    },
    /// Build the unitary on `--cut` that frees `--free`.
    Disentangle {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        cut: Vec<usize>,
        #[arg(long)]
        free: usize,
    },
    /// Two-layer preparation circuit of a pure state.
    Decompose {
        #[arg(long)]
        state: PathBuf,
        /// Party prepared jointly with J in the first layer (default 0).
        #[arg(long, requires = "a2")]
        a1: Option<usize>,
        /// Party left untouched by the first layer (default 1).
        #[arg(long, requires = "a1")]
        a2: Option<usize>,
    },
    /// Witness radii and Werner visibilities.
    Witness {
        #[command(subcommand)]
        kind: WitnessKind,
    },
    /// Four-qubit W visibility curves as CSV.
    Fig4 {
        /// Number of angles strictly inside (0, π/2).
        #[arg(long, default_value_t = 200)]
        grid: usize,
    },
    /// Graph bound on the connection level of a network.
    Network {
        #[arg(long)]
        graph: PathBuf,
        /// Also classify the joint state with EPR edges.
        #[arg(long)]
        cross_check: bool,
    },
    /// Classify the joint network state and compare with the graph bound.
    CrossCheck {
        #[arg(long)]
        graph: PathBuf,
        /// State placed on every edge unit (maximally entangled when absent).
        #[arg(long)]
        edge_state: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum WitnessKind {
    /// GHZ target `Σ a_i |i…i⟩`.
    Ghz {
        #[arg(long)]
        n: usize,
        /// Coefficients a_1..a_d.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        params: Vec<f64>,
        #[arg(long)]
        werner: bool,
    },
    /// Four-qubit W-type target.
    W4 {
        #[arg(long, default_value_t = 2)]
        level: usize,
        /// Coefficients a_1..a_5.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "theta", required_unless_present = "theta")]
        params: Vec<f64>,
        /// Use a_1..a_4 = cos θ / 2, a_5 = sin θ.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        werner: bool,
    },
    /// Sampled lower bound on the radius for an arbitrary target.
    Sample {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

fn read_input(path: &Path) -> CliResult<String> {
    let io_err = |source| CliError::Io { path: path.display().to_string(), source };
    if path.as_os_str() == "-" {
        let mut buf = String::new();
        io::stdin().read_to_string(&mut buf).map_err(io_err)?;
        return Ok(buf);
    }
    fs::read_to_string(path).map_err(io_err)
}

fn load_state(path: &Path) -> CliResult<PureState> {
    parse_state(&read_input(path)?).map_err(|e| in_file(path, e))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_input(path)?).map_err(|e| in_file(path, KcgeError::from(e)))
}

fn in_file(path: &Path, e: KcgeError) -> CliError {
    match e {
        KcgeError::Json(j) => CliError::Invalid(format!("{}: malformed JSON: {j}", path.display())),
        other => CliError::Kcge(other),
    }
}

fn emit(config: &RunConfig, text: &str) -> CliResult<()> {
    match &config.out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source }),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io { path: "stdout".into(), source })
        }
    }
}

fn emit_json<T: Serialize>(config: &RunConfig, value: &T) -> CliResult<()> {
    let mut text = to_json_pretty(value)?;
    text.push('\n');
    emit(config, &text)
}

#[derive(Serialize)]
struct DisentangleOutput {
    act_on: Vec<usize>,
    free_party: usize,
    rank: usize,
    threshold: usize,
    unitary: Vec<Vec<[f64; 2]>>,
    residual: f64,
    output_state: StateJson,
}

#[derive(Serialize)]
struct DecomposeOutput {
    a1: usize,
    a2: usize,
    j: Vec<usize>,
    degenerate: bool,
    layer1_support: Vec<usize>,
    layer1: Vec<Vec<[f64; 2]>>,
    layer2_support: Vec<usize>,
    layer2: Vec<Vec<[f64; 2]>>,
    reconstruction_error: f64,
}

#[derive(Serialize)]
struct WernerOutput {
    dim: usize,
    visibility_threshold: f64,
    crossing_visibility: f64,
    witness_value_at_threshold: f64,
    witness_value_at_crossing: f64,
}

#[derive(Serialize)]
struct WitnessOutput {
    provenance: Provenance,
    level: usize,
    coefficients: Vec<f64>,
    radius: f64,
    witness_value_on_target: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    werner: Option<WernerOutput>,
}

#[derive(Serialize)]
struct SampleOutput {
    provenance: Provenance,
    level: usize,
    samples: usize,
    seed: u64,
    radius_lower_bound: f64,
}

#[derive(Serialize)]
struct NetworkOutput<'a> {
    #[serde(flatten)]
    report: &'a NetworkBoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_check: Option<CrossCheck>,
}

fn witness_output(spec: WitnessSpec, coefficients: Vec<f64>, werner: bool) -> CliResult<WitnessOutput> {
    let witness_value_on_target = witness_value(&spec, &spec.target.to_density())?;
    let werner = if werner {
        let dim = spec.target.dim();
        let visibility_threshold = werner_visibility_threshold(spec.radius, dim)?;
        let crossing_visibility = werner_crossing_visibility(spec.radius, dim)?.max(0.0);
        Some(WernerOutput {
            dim,
            visibility_threshold,
            crossing_visibility,
            witness_value_at_threshold: witness_value(&spec, &werner_state(&spec.target, visibility_threshold)?)?,
            witness_value_at_crossing: witness_value(&spec, &werner_state(&spec.target, crossing_visibility)?)?,
        })
    } else {
        None
    };
    Ok(WitnessOutput {
        provenance: spec.provenance,
        level: spec.level,
        coefficients,
        radius: spec.radius,
        witness_value_on_target,
        werner,
    })
}

fn run(cli: Cli) -> CliResult<()> {
    let config = &cli.config;
    match cli.command {
        Command::Generate { family } => {
            let fam: StateFamily = load_json(&family)?;
            let state = fam.build()?;
            config.note(format!("{:?} with claimed level {:?}", fam.kind(), fam.claimed_cge()));
            emit_json(config, &StateJson::from(&state))
        }
        Command::Classify { state } => {
            let state = load_state(&state)?;
            let report: ClassificationReport = classify(&state, &config.classify_options()?)?;
            emit_json(config, &report)
        }
        Command::Disentangle { state, cut, free } => {
            let state = load_state(&state)?;
            let act_on = PartySubset::cut(cut, state.n())?;
            let u = build_disentangling_unitary(&state, &act_on, free, &config.tolerance()?)?;
            let out = u.apply(&state)?;
            emit_json(
                config,
                &DisentangleOutput {
                    act_on: act_on.members().to_vec(),
                    free_party: free,
                    rank: u.rank,
                    threshold: u.threshold,
                    unitary: matrix_to_json(&u.unitary),
                    residual: free_party_residual(&out, free)?,
                    output_state: StateJson::from(&out),
                },
            )
        }
        Command::Decompose { state, a1, a2 } => {
            let state = load_state(&state)?;
            let tol = config.tolerance()?;
            let t = match (a1, a2) {
                (Some(a1), Some(a2)) => two_depth_decompose_with(&state, TwoDepthRoles { a1, a2 }, &tol)?,
                _ => two_depth_decompose(&state, &tol)?,
            };
            emit_json(
                config,
                &DecomposeOutput {
                    a1: t.roles.a1,
                    a2: t.roles.a2,
                    j: t.j.clone(),
                    degenerate: t.degenerate,
                    layer1_support: t.layer1_support.members().to_vec(),
                    layer1: matrix_to_json(&t.layer1),
                    layer2_support: t.layer2_support.members().to_vec(),
                    layer2: matrix_to_json(&t.layer2),
                    reconstruction_error: t.reconstruction_error,
                },
            )
        }
        Command::Witness { kind } => match kind {
            WitnessKind::Ghz { n, params, werner } => {
                let spec = WitnessSpec::ghz(n, params.len(), &params)?;
                emit_json(config, &witness_output(spec, params, werner)?)
            }
            WitnessKind::W4 { level, params, theta, werner } => {
                let a = match theta {
                    Some(t) => w4_theta_coefficients(t).to_vec(),
                    None => params,
                };
                let spec = WitnessSpec::w4(level, &a)?;
                emit_json(config, &witness_output(spec, a, werner)?)
            }
            WitnessKind::Sample { state, k, samples } => {
                let state = load_state(&state)?;
                let r = sample_radius_lower_bound(&state, k, samples, config.seed)?;
                emit_json(
                    config,
                    &SampleOutput {
                        provenance: Provenance::SampledLowerBound,
                        level: k,
                        samples,
                        seed: config.seed,
                        radius_lower_bound: r,
                    },
                )
            }
        },
        Command::Fig4 { grid } => {
            let rows = fig4_curves(&fig4_grid(positive(grid, "--grid")?))?;
            emit(config, &fig4_csv(&rows))
        }
        Command::Network { graph, cross_check: check } => {
            let g: NetworkGraph = load_json(&graph)?;
            let report = algorithm1(&g)?;
            if !check {
                return emit_json(config, &NetworkOutput { report: &report, cross_check: None });
            }
            match cross_check(&g, None, &config.classify_options()?, config.cross_check_dim()?) {
                Ok(cc) => emit_json(config, &NetworkOutput { report: &report, cross_check: Some(cc) }),
                Err(e) => {
                    // the graph bound stands on its own even when the joint state is refused
                    emit_json(config, &NetworkOutput { report: &report, cross_check: None })?;
                    Err(e.into())
                }
            }
        }
        Command::CrossCheck { graph, edge_state } => {
            let g: NetworkGraph = load_json(&graph)?;
            let edge_states = match edge_state {
                Some(path) => Some(vec![load_state(&path)?; g.edge_units().len()]),
                None => None,
            };
            match cross_check(&g, edge_states.as_deref(), &config.classify_options()?, config.cross_check_dim()?) {
                Ok(cc) => {
                    config.note(format!("classifier level {} vs bound {}", cc.classifier_level, cc.cge_upper_bound));
                    emit_json(config, &cc)
                }
                Err(e) if e.is_budget() => {
                    emit_json(config, &NetworkOutput { report: &algorithm1(&g)?, cross_check: None })?;
                    Err(e.into())
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("KCGE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Invalid(format!("KCGE_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|_| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kcge: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
