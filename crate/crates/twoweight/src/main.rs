use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use twoweight::cantor::SigmaVariant;
use twoweight::cli::{self, CliError, ExperimentConfig, FamilySource, PairSource, Subcommand};

/// Two-weight Hilbert transform experiments.
#[derive(Parser)]
#[command(name = "twoweight", version)]
struct Cli {
    /// Experiment config (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; reports go to stdout otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PairArgs {
    /// JSON file holding `{"omega": measure, "sigma": measure}`.
    #[arg(long)]
    pair: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FamilyArg {
    Triadic,
    Dyadic,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Condition constants over a family, swept over depths.
    Conditions {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        /// Interval list (JSON) used as the family.
        #[arg(long, conflicts_with = "family")]
        family_file: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Stopping forest, bilinear decomposition and Carleson tables.
    Decompose {
        #[command(flatten)]
        pair: PairArgs,
        /// Step function (JSON) paired against sigma.
        #[arg(long)]
        f: Option<PathBuf>,
        /// Step function (JSON) paired against omega.
        #[arg(long)]
        phi: Option<PathBuf>,
        #[arg(long)]
        r: Option<u32>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Finite-depth tables for the Cantor pair.
    Cantor {
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<SigmaVariant>,
        /// Section letters a..h, plus x for the blow-up and maximal tables.
        #[arg(long)]
        report: Option<String>,
        #[arg(long)]
        c: Option<f64>,
    },
    /// Monte-Carlo probability that a fixed interval is bad.
    Goodbad {
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<u32>>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Scale window as `n_min,n_max`.
        #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
        window: Option<Vec<i32>>,
    },
    /// Forward and dual testing constants.
    Testing {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        truncation: Option<f64>,
    },
}

fn parse_variant(s: &str) -> Result<SigmaVariant, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown variant {s}"))
}

#[derive(serde::Deserialize)]
struct PairFile {
    omega: twoweight::measure::Measure,
    sigma: twoweight::measure::Measure,
}

fn apply_pair(cfg: &mut ExperimentConfig, p: &PairArgs) -> Result<(), CliError> {
    if let Some(path) = &p.pair {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.clone(), message: e.to_string() })?;
        let pf: PairFile =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.pair = PairSource::Inline { omega: pf.omega, sigma: pf.sigma };
    }
    Ok(())
}

fn apply_family(cfg: &mut ExperimentConfig, f: Option<FamilyArg>) {
    match f {
        Some(FamilyArg::Dyadic) => cfg.family = FamilySource::Dyadic,
        Some(FamilyArg::Triadic) => cfg.family = FamilySource::Triadic,
        None => {}
    }
}

fn configure(cli: &Cli) -> Result<(ExperimentConfig, Subcommand), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    let sub = match &cli.command {
        Command::Conditions { pair, family, family_file, eps, gamma, depth } => {
            apply_pair(&mut cfg, pair)?;
            apply_family(&mut cfg, *family);
            if let Some(path) = family_file {
                cfg.family = FamilySource::File { path: path.clone() };
            }
            cfg.eps = eps.unwrap_or(cfg.eps);
            cfg.gamma = gamma.unwrap_or(cfg.gamma);
            if let Some(d) = depth {
                cfg.depths = vec![*d];
            }
            Subcommand::Conditions
        }
        Command::Decompose { pair, f, phi, r, eps, gamma, threshold, depth } => {
            apply_pair(&mut cfg, pair)?;
            if let Some(p) = f {
                cfg.decompose.f = Some(cli::FunctionInput::Path(p.clone()));
            }
            if let Some(p) = phi {
                cfg.decompose.phi = Some(cli::FunctionInput::Path(p.clone()));
            }
            cfg.r = r.unwrap_or(cfg.r);
            cfg.eps = eps.unwrap_or(cfg.eps);
            cfg.gamma = gamma.unwrap_or(cfg.gamma);
            cfg.threshold = threshold.or(cfg.threshold);
            cfg.window.depth = depth.unwrap_or(cfg.window.depth);
            Subcommand::Decompose
        }
        Command::Cantor { depth, variant, report, c } => {
            cfg.cantor.depth = depth.unwrap_or(cfg.cantor.depth);
            cfg.cantor.variant = variant.unwrap_or(cfg.cantor.variant);
            if let Some(r) = report {
                cfg.cantor.reports = r.clone();
            }
            cfg.cantor.c = c.unwrap_or(cfg.cantor.c);
            Subcommand::Cantor
        }
        Command::Goodbad { r, eps, trials, seed, window } => {
            if let Some(r) = r {
                cfg.goodbad.r = r.clone();
            }
            cfg.eps = eps.unwrap_or(cfg.eps);
            cfg.goodbad.trials = trials.unwrap_or(cfg.goodbad.trials);
            if let Some(s) = seed {
                cfg.seeds = vec![*s];
            }
            if let Some(w) = window {
                cfg.window.n_min = w[0];
                cfg.window.n_max = w[1];
            }
            Subcommand::Goodbad
        }
        Command::Testing { pair, family, depth, truncation } => {
            apply_pair(&mut cfg, pair)?;
            apply_family(&mut cfg, *family);
            if let Some(d) = depth {
                cfg.depths = vec![*d];
            }
            cfg.truncation = truncation.or(cfg.truncation);
            Subcommand::Testing
        }
    };
    Ok((cfg, sub))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure(&cli).and_then(|(cfg, sub)| {
        let out = cli::run(&cfg, sub)?;
        cli::write_output(&out, cfg.output.as_deref(), &mut std::io::stdout().lock())?;
        Ok(out.warnings)
    });
    match result {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
