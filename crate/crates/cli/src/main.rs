use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use conscheme_cli::commands::{EXIT_IO, EXIT_OK, EXIT_USAGE};
use conscheme_cli::{cmd_check, cmd_compare, cmd_converge, cmd_run, parse_config_with_overrides};

/// Symplectic difference schemes for separable Hamiltonian systems.
#[derive(Parser)]
#[command(name = "conscheme", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write it as CSV.
    Run(Opts),
    /// Compare Verlet with the configured scheme at identical settings.
    Compare(Opts),
    /// Fit the global convergence order over the `steps` list.
    Converge(Opts),
    /// Derivative, reversibility, symplecticity and energy checks.
    Check(Opts),
}

/// Every flag mirrors the config key of the same name and overrides it.
#[derive(Args)]
struct Opts {
    /// Config file in `key = value` format.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    scheme: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    h: Option<String>,
    #[arg(long = "t_end", alias = "t-end", allow_hyphen_values = true)]
    t_end: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    q0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    ecc: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mass: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<String>,
    #[arg(long = "record_stride", alias = "record-stride", allow_hyphen_values = true)]
    record_stride: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tolerance: Option<String>,
    #[arg(long = "max_iterations", alias = "max-iterations", allow_hyphen_values = true)]
    max_iterations: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    method: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    output: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    steps: Option<String>,
    #[arg(long = "fd_step", alias = "fd-step", allow_hyphen_values = true)]
    fd_step: Option<String>,
    #[arg(long = "fd_eps", alias = "fd-eps", allow_hyphen_values = true)]
    fd_eps: Option<String>,
    #[arg(long = "energy_tol", alias = "energy-tol", allow_hyphen_values = true)]
    energy_tol: Option<String>,
}

impl Opts {
    fn overrides(&self) -> Vec<(String, String)> {
        let pairs = [
            ("model", &self.model),
            ("scheme", &self.scheme),
            ("h", &self.h),
            ("t_end", &self.t_end),
            ("q0", &self.q0),
            ("p0", &self.p0),
            ("ecc", &self.ecc),
            ("mass", &self.mass),
            ("omega", &self.omega),
            ("epsilon", &self.epsilon),
            ("sigma", &self.sigma),
            ("record_stride", &self.record_stride),
            ("tolerance", &self.tolerance),
            ("max_iterations", &self.max_iterations),
            ("method", &self.method),
            ("output", &self.output),
            ("steps", &self.steps),
            ("fd_step", &self.fd_step),
            ("fd_eps", &self.fd_eps),
            ("energy_tol", &self.energy_tol),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let (opts, run): (&Opts, fn(&_, &mut dyn Write) -> _) = match &cli.command {
        Command::Run(o) => (o, cmd_run),
        Command::Compare(o) => (o, cmd_compare),
        Command::Converge(o) => (o, cmd_converge),
        Command::Check(o) => (o, cmd_check),
    };

    let text = match &opts.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("i/o error: {}: {e}", path.display());
                return ExitCode::from(EXIT_IO as u8);
            }
        },
        None => String::new(),
    };
    let cfg = match parse_config_with_overrides(&text, &opts.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = run(&cfg, &mut out);
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
