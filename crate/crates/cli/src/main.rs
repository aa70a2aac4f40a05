use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dislocade::evolver::BarrierKind;
use dislocade_cli::run::{AnalyzeKind, Extra};
use dislocade_cli::{execute, parse_config, Command, Outcome, RunConfig};

#[derive(Parser)]
#[command(name = "dislocade", version, about = "Nonlocal dislocation-dynamics laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; its keys take precedence over flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created when missing.
    #[arg(long = "out", global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fractional order in (0,1).
    #[arg(long, global = true)]
    s: Option<f64>,
}

#[derive(Subcommand)]
enum Sub {
    /// Heteroclinic layer, its corrector and constants.
    Layer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long = "half-width")]
        half_width: Option<f64>,
        #[arg(long)]
        dx: Option<f64>,
    },
    /// Signed particle system.
    Ode {
        #[command(flatten)]
        common: Common,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
    },
    /// Scaled fractional reaction-diffusion evolution.
    Pde {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
    },
    /// Canned collision and relaxation scenarios.
    Scenario {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Decay fits, PDE/ODE comparison, barrier residuals, equilibrium search.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// expfit, powfit, compare, residual or stationary.
        #[arg(long)]
        kind: AnalyzeKind,
        /// Two-column CSV (t, value) for the fits.
        #[arg(long)]
        input: Option<PathBuf>,
        /// vbar, hhat or wbar.
        #[arg(long, default_value = "vbar")]
        barrier: String,
        #[arg(long, default_value_t = 100)]
        starts: usize,
    },
    /// Acceptance criteria; exits with 2 when any fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// ode, pde or all.
        #[arg(long, default_value = "all")]
        scope: String,
    },
}

fn apply_common(cfg: &mut RunConfig, c: &Common) {
    if let Some(o) = &c.out {
        cfg.output = o.clone();
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(s) = c.s {
        cfg.s = s;
    }
}

fn build(cli: Cli) -> Result<(RunConfig, Extra), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    let mut extra = Extra::default();
    let common = match &cli.command {
        Sub::Layer {
            common,
            amplitude,
            half_width,
            dx,
        } => {
            cfg.command = Command::Layer;
            if let Some(a) = amplitude {
                cfg.potential.amplitude = *a;
            }
            if let Some(h) = half_width {
                cfg.layer.half_width = *h;
            }
            if let Some(h) = dx {
                cfg.layer.dx = *h;
            }
            common
        }
        Sub::Ode { common, t_end } => {
            cfg.command = Command::Ode;
            if let Some(t) = t_end {
                cfg.ode.t_end = *t;
            }
            common
        }
        Sub::Pde { common, eps, t_end } => {
            cfg.command = Command::Pde;
            if let Some(e) = eps {
                cfg.pde.epsilon = *e;
            }
            if let Some(t) = t_end {
                cfg.pde.t_end = *t;
            }
            common
        }
        Sub::Scenario {
            common,
            kind,
            n,
            k,
            eps,
            sigma,
            horizon,
        } => {
            cfg.command = Command::Scenario;
            let sc = &mut cfg.scenario;
            if let Some(v) = kind {
                sc.kind = v.clone();
            }
            if let Some(v) = n {
                sc.n = *v;
            }
            if let Some(v) = k {
                sc.k = *v;
            }
            if let Some(v) = eps {
                sc.epsilon = *v;
            }
            if let Some(v) = sigma {
                sc.sigma = *v;
            }
            if let Some(v) = horizon {
                sc.horizon = *v;
            }
            common
        }
        Sub::Analyze {
            common,
            kind,
            input,
            barrier,
            starts,
        } => {
            cfg.command = Command::Analyze;
            extra.analyze = *kind;
            extra.input = input.clone();
            extra.barrier = match barrier.as_str() {
                "vbar" => BarrierKind::VBar,
                "hhat" => BarrierKind::HHat,
                "wbar" => BarrierKind::WBar,
                other => return Err(format!("--barrier must be vbar, hhat or wbar, got {other:?}").into()),
            };
            extra.starts = *starts;
            common
        }
        Sub::Verify { common, scope } => {
            cfg.command = Command::Verify;
            extra.scope = scope.clone();
            common
        }
    };
    apply_common(&mut cfg, common);
    let command = cfg.command;
    let mut cfg = parse_config(common.config.as_deref(), &cfg)?;
    cfg.command = command;
    Ok((cfg, extra))
}

fn init_threads() {
    let Ok(v) = std::env::var("DISLOCADE_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n >= 1 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the worker pool: {e}");
            }
        }
        _ => log::warn!("ignoring DISLOCADE_THREADS={v:?}: expected a positive integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    init_threads();
    let cli = Cli::parse();
    let (cfg, extra) = match build(cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match execute(&cfg, &extra) {
        Ok(Outcome::Done(m)) => {
            for f in &m.files {
                println!("{}", m.output.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Ok(Outcome::VerificationFailed(m)) => {
            eprintln!("verification failed; see {}", m.output.join("verdicts.json").display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
