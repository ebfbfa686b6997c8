use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ocsr::config::RunConfig;
use ocsr::pipeline;

#[derive(Parser)]
#[command(name = "ocsr", version, about = "Recognize molecule depictions as molecular graphs")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single-threaded numerics.
    #[arg(long, global = true)]
    deterministic: bool,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the train, val and test splits.
    Gen {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train one network: seg, atom, bond or charge.
    Train {
        #[arg(value_parser = pipeline::NETWORKS)]
        network: String,
        /// Continue from these weights.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Cut classifier inputs from ground-truth label maps.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Recognize an image or every image in a directory.
    Infer {
        input: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Use the label maps stored next to each image instead of networks.
        #[arg(long)]
        oracle: bool,
    },
    /// Score predictions against a rendered dataset and write a CSV report.
    Eval {
        pred: PathBuf,
        truth: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Compare even when config hashes differ.
        #[arg(long)]
        force: bool,
        /// Also score the trained networks.
        #[arg(long)]
        models: bool,
    },
    /// Convert a graph (JSON, SMILES file or SMILES string) to another format.
    Export {
        input: String,
        #[arg(short, long, default_value = "mol", value_parser = pipeline::EXPORT_FORMATS)]
        format: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> ocsr::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.deterministic {
        ocsr::nn::set_parallel(false);
    }
    match cli.command {
        Command::Gen { data } => {
            if let Some(d) = data {
                cfg.paths.data = d;
            }
            pipeline::cmd_gen(&cfg)?;
        }
        Command::Train {
            network,
            resume,
            oracle,
            steps,
        } => {
            if let Some(n) = steps {
                if network == "seg" {
                    cfg.seg.steps = n;
                } else {
                    cfg.cls.steps = n;
                }
            }
            let out = pipeline::cmd_train(&cfg, &network, resume.as_deref(), oracle)?;
            println!(
                "{}: steps {}..{}, final loss {:.4}",
                out.weights.display(),
                out.start_step + 1,
                out.start_step + out.losses.len(),
                out.losses.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Infer { input, out, oracle } => {
            let out = out.unwrap_or_else(|| cfg.paths.out.clone());
            let r = pipeline::cmd_infer(&cfg, &input, &out, oracle)?;
            println!("{} images, {} flagged", r.images, r.flagged);
            return Ok(r.flagged > 0);
        }
        Command::Eval {
            pred,
            truth,
            out,
            force,
            models,
        } => {
            let report = pipeline::cmd_eval(&cfg, &pred, &truth, force, models)?;
            let csv = report.to_csv(&cfg.hash());
            match out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Export { input, format, out } => {
            let text = pipeline::cmd_export(&input, &format, cfg.bond_length)?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(false)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = ["warn", "info", "debug"][cli.verbose.min(2) as usize];
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
