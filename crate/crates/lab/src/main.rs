use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ips_lab::config::{parse_pairs, Experiment, ExperimentConfig};
use ips_lab::{experiments, run_and_write, LabError};

/// Runs one experiment and writes summary.json plus CSV tables.
///
/// Exit codes: 0 pass, 1 statistical fail or insufficient data, 2 usage
/// error, 3 runtime or I/O error.
#[derive(Parser, Debug)]
#[command(name = "ips-lab", version)]
struct Cli {
    /// Experiment name, e.g. `two-site` or `lln-clt`.
    #[arg(required_unless_present = "schema", value_parser = |s: &str| s.parse::<Experiment>())]
    experiment: Option<Experiment>,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Extra `key=value` override; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the keys and CSV columns of every experiment and exit.
    #[arg(long)]
    schema: bool,
}

fn configure(cli: &Cli, experiment: Experiment) -> Result<ExperimentConfig, LabError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    let mut over = parse_pairs(&cli.set.join("\n"))?;
    let flags = [
        ("seed", cli.seed.map(|v| v.to_string())),
        ("reps", cli.reps.map(|v| v.to_string())),
        ("out", cli.out.as_ref().map(|v| v.display().to_string())),
        ("workers", cli.workers.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            over.retain(|(x, _)| x != k);
            over.push((k.to_string(), v));
        }
    }
    ExperimentConfig::build(experiment, &file, &over)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.schema {
        print!("{}", experiments::schema_markdown());
        return ExitCode::SUCCESS;
    }
    let experiment = cli.experiment.expect("clap enforces the experiment");
    let outcome = configure(&cli, experiment).and_then(|c| run_and_write(&c).map(|r| (c, r)));
    match outcome {
        Ok((config, (result, wall))) => {
            for f in &result.flags {
                println!("{:<5} {:<24} {}", if f.pass { "ok" } else { "FAIL" }, f.name, f.rule);
            }
            println!("{}: {:?} in {:.2?}, outputs in {}", experiment, result.status, wall, config.output.display());
            ExitCode::from(result.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("ips-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
