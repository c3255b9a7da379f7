use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlheat_cli::commands::{cmd_bound, cmd_compare, cmd_solve, cmd_verify, CompareMode};
use nlheat_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "nlheat", version, about = "Heat equation with a weighted-average nonlocal condition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Zero-exclusion bound and determinant zero census.
    Bound(Common),
    /// Solution on the configured grid as CSV (x,t,re_q,im_q,trunc_est).
    Solve(Common),
    /// Residual checks against the configured tolerance.
    Verify(Common),
    /// Sup-norm comparison with the oracle or a limiting family.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "oracle")]
        mode: CompareMode,
        /// Multipoint orders, e.g. `10,20,40,80`.
        #[arg(long, value_delimiter = ',')]
        m_list: Option<Vec<usize>>,
        /// Dirichlet-limit indices, e.g. `10,20,50`.
        #[arg(long, value_delimiter = ',')]
        j_list: Option<Vec<usize>>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination (overrides `outputs.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pass/fail tolerance for `verify` and `compare --mode oracle`.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_lambda: Option<f64>,
    /// Panels per unit contour length.
    #[arg(long)]
    panels: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(t) = self.tol {
            cfg.outputs.tolerance = t;
            cfg.compare.oracle_tolerance = t;
        }
        if let Some(m) = self.max_lambda {
            cfg.contour.max_abs_lambda = m;
        }
        if let Some(n) = self.panels {
            cfg.contour.panels_per_unit = n;
        }
        cfg.contour.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    fn sink(&self, cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
        let path = self.out.clone().or_else(|| cfg.outputs.csv.as_ref().map(PathBuf::from));
        Ok(match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut log = io::stderr().lock();
    match cli.command {
        Command::Bound(c) => {
            let cfg = c.load()?;
            cmd_bound(&cfg, &mut c.sink(&cfg)?, &mut log)
        }
        Command::Solve(c) => {
            let cfg = c.load()?;
            cmd_solve(&cfg, &mut c.sink(&cfg)?, &mut log)
        }
        Command::Verify(c) => {
            let cfg = c.load()?;
            cmd_verify(&cfg, &mut c.sink(&cfg)?, &mut log)
        }
        Command::Compare {
            common,
            mode,
            m_list,
            j_list,
        } => {
            let mut cfg = common.load()?;
            if let Some(m) = m_list {
                cfg.compare.m_list = m;
            }
            if let Some(j) = j_list {
                cfg.compare.j_list = j;
            }
            cmd_compare(&cfg, mode, &mut common.sink(&cfg)?, &mut log)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
