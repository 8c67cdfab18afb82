mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use config::{parse_pairs, ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "shapediff", version, about = "Shape derivative checks and shape optimization runs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario from a config file, with flags overriding its keys.
    Run(RunArgs),
}

#[derive(Parser)]
struct RunArgs {
    /// Config file (same as --config)
    file: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// taylor, clover, ellipse-newton, poisson or spacetime-heat
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    maxh: Option<String>,
    #[arg(long)]
    order: Option<String>,
    /// Inner product for descent: h1, ela or elacr
    #[arg(long)]
    ip: Option<String>,
    #[arg(long)]
    gamma_cr: Option<String>,
    /// Newton regularization: tangential or h1
    #[arg(long)]
    regularization: Option<String>,
    /// Newton regularization weight
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    ellipse_a: Option<String>,
    /// volume-boundary or poisson
    #[arg(long)]
    taylor_problem: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    eps_grad: Option<String>,
    #[arg(long)]
    alpha0: Option<String>,
    #[arg(long)]
    alpha_incr: Option<String>,
    #[arg(long)]
    alpha_decr: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    alpha_max: Option<String>,
    #[arg(long)]
    move_nodes: Option<String>,
    #[arg(long)]
    smooth_sweeps: Option<String>,
    #[arg(long)]
    snapshot_every: Option<String>,
    /// Worker threads for assembly (0 = all cores)
    #[arg(long)]
    threads: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let flags = [
            ("scenario", &self.scenario),
            ("out", &self.out),
            ("maxh", &self.maxh),
            ("order", &self.order),
            ("ip", &self.ip),
            ("gamma_cr", &self.gamma_cr),
            ("regularization", &self.regularization),
            ("delta", &self.delta),
            ("ellipse_a", &self.ellipse_a),
            ("taylor_problem", &self.taylor_problem),
            ("max_iter", &self.max_iter),
            ("eps_grad", &self.eps_grad),
            ("alpha0", &self.alpha0),
            ("alpha_incr", &self.alpha_incr),
            ("alpha_decr", &self.alpha_decr),
            ("gamma", &self.gamma),
            ("alpha_max", &self.alpha_max),
            ("move_nodes", &self.move_nodes),
            ("smooth_sweeps", &self.smooth_sweeps),
            ("snapshot_every", &self.snapshot_every),
            ("threads", &self.threads),
        ];
        flags.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }

    fn load(&self) -> Result<RunConfig, ConfigError> {
        if let (Some(_), Some(_)) = (&self.file, &self.config) {
            return Err(ConfigError::Invalid("give the config file either positionally or with --config".into()));
        }
        let mut pairs = match self.file.as_ref().or(self.config.as_ref()) {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                parse_pairs(&text)?
            }
            None => Vec::new(),
        };
        pairs.extend(self.overrides());
        RunConfig::from_pairs(&pairs)
    }
}

fn main() -> ExitCode {
    let Cmd::Run(args) = Cli::parse().cmd;
    let cfg = match args.load() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let res = (|| {
        if cfg.threads > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global().context("starting thread pool")?;
        }
        run::run(&cfg)
    })();
    match res {
        Ok(true) => {
            println!("{} finished; results in {}", cfg.scenario, cfg.out.display());
            ExitCode::SUCCESS
        }
        Ok(false) => {
            eprintln!("{} finished but missed its targets; see {}", cfg.scenario, cfg.out.join("summary.txt").display());
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
