mod error;
mod request;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use serde_json::{json, Value};

use error::CliError;
use request::{build_request, canonical_key, load_config, CommandName, Entry, Format, ModelKind, Settings, Source, Suite};

/// Occupation times below zero and related ruin quantities for
/// spectrally negative Lévy risk models.
#[derive(Debug, Parser)]
#[command(name = "ruinlab", version, allow_negative_numbers = true)]
struct Cli {
    /// What to compute; may instead come from the config file.
    command: Option<CommandName>,

    /// Key-value (or JSON) config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective request as JSON and exit without computing.
    #[arg(long)]
    echo_config: bool,

    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Premium rate.
    #[arg(long)]
    c: Option<f64>,
    /// Claim arrival rate.
    #[arg(long)]
    eta: Option<f64>,
    /// Exponential claim size rate.
    #[arg(long)]
    alpha: Option<f64>,
    /// Phase-type sub-intensity matrix, row-major, comma separated.
    #[arg(long, value_delimiter = ',')]
    t_matrix: Option<Vec<f64>>,
    /// Phase-type initial vector, comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha_vec: Option<Vec<f64>>,
    /// Refraction rate; switches to the refracted process.
    #[arg(long)]
    delta: Option<f64>,
    /// Starting surplus.
    #[arg(long)]
    x: Option<f64>,

    /// exp:<rate>, fixed:<t>, inf, hypo:<r1,r2,...> or erlang:<t>,<n>.
    #[arg(long)]
    horizon: Option<String>,
    /// start:stop:points.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Parisian delay rate, or the killing rate for the identity suite.
    #[arg(long)]
    q: Option<f64>,
    /// Drawdown look-ahead time.
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_paths: Option<usize>,
    /// Euler step for models with a Brownian part.
    #[arg(long)]
    dt: Option<f64>,
    /// Brownian bridge refinement of the Euler occupation.
    #[arg(long)]
    bridge: bool,
    #[arg(long, value_enum)]
    suite: Option<Suite>,
}

impl Cli {
    /// Flag values as settings entries, in the config-file vocabulary.
    fn flag_settings(&self) -> Settings {
        let mut out = Settings::new();
        let mut put = |key: &str, value: Option<Value>| {
            if let Some(value) = value {
                out.insert(canonical_key(key), Entry { value, source: Source::Flag });
            }
        };
        put("command", self.command.map(|c| json!(c)));
        put("model", self.model.map(|m| json!(m)));
        for (key, v) in [
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("c", self.c),
            ("eta", self.eta),
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("x", self.x),
            ("q", self.q),
            ("s", self.s),
            ("dt", self.dt),
        ] {
            put(key, v.map(|v| json!(v)));
        }
        put("t_matrix", self.t_matrix.as_ref().map(|v| json!(v)));
        put("alpha_vec", self.alpha_vec.as_ref().map(|v| json!(v)));
        put("horizon", self.horizon.as_ref().map(|v| json!(v)));
        put("grid", self.grid.as_ref().map(|v| json!(v)));
        put("format", self.format.map(|v| json!(v)));
        put("output", self.output.as_ref().map(|v| json!(v)));
        put("seed", self.seed.map(|v| json!(v)));
        put("n_paths", self.n_paths.map(|v| json!(v)));
        put("bridge", self.bridge.then_some(Value::Bool(true)));
        put("suite", self.suite.map(|v| json!(v)));
        out
    }
}

/// Caps the global pool used by the analytical routines; simulation
/// builds its own pool from the same variable.
fn init_threads() {
    let n = std::env::var(ruinlab::montecarlo::THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Write { path: path.clone(), source }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Write { path: "<stdout>".into(), source })
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut settings = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.clone(), source })?;
            load_config(&text)?
        }
        None => Settings::new(),
    };
    settings.extend(cli.flag_settings());
    let req = build_request(&settings)?;
    if cli.echo_config {
        return emit(&(req.to_json() + "\n"), None);
    }
    let report = run::execute(&req)?;
    emit(&report.text, req.output.as_ref())?;
    report.failure.map_or(Ok(()), Err)
}

fn fail(e: &CliError) -> ExitCode {
    let mut err = std::io::stderr().lock();
    if e.exit_code() == 2 {
        let usage = Cli::command().render_usage();
        let _ = writeln!(err, "{usage}");
    }
    let _ = writeln!(err, "{}", e.record());
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let record = json!({
                "error": "UsageError",
                "message": e.kind().to_string(),
                "exit_code": 2,
            });
            eprintln!("{record}");
            return ExitCode::from(2);
        }
    };
    init_threads();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
