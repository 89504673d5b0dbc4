use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use veason_cli::commands::{self, CHECKPOINT_FILE, CURVES_FILE, MANIFEST_FILE, PREDICTIONS_FILE};
use veason_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "veason", version, about = "Video reasoning segmentation rewards, GRPO and evaluation on synthetic videos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Dataset manifest; defaults to `<out>/manifest.json`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Responses JSONL with `sample_id` and `response` fields.
    #[arg(long, global = true)]
    responses: Option<PathBuf>,
    /// Policy checkpoint; defaults to `<out>/checkpoint.json`.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Predictions JSONL; defaults to `<out>/predictions.jsonl`.
    #[arg(long, global = true)]
    predictions: Option<PathBuf>,
    /// Training curves CSV; defaults to `<out>/curves.csv`.
    #[arg(long, global = true)]
    curves: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic dataset manifest.
    Gen,
    /// Build reasoning records for every positive sample.
    Cot,
    /// Score responses against the manifest.
    Score,
    /// Train the toy policy with GRPO.
    Train,
    /// Evaluate predictions (J, F, J&F, R).
    Eval,
    /// Greedy-decode a checkpoint into mask predictions.
    Infer,
    /// Plot training curves as SVG.
    Report,
}

fn or_default(p: &Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| out.join(name))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let out = &cli.out;
    let manifest = or_default(&cli.manifest, out, MANIFEST_FILE);
    let wrote = |p: &Path| println!("wrote {}", p.display());
    match cli.command {
        Command::Gen => wrote(&commands::cmd_gen(&cfg, out)?),
        Command::Cot => wrote(&commands::cmd_cot(&cfg, &manifest, out)?),
        Command::Score => {
            let responses = cli
                .responses
                .as_ref()
                .ok_or_else(|| CliError::Validation("score needs --responses <path>".into()))?;
            wrote(&commands::cmd_score(&cfg, &manifest, responses, out)?)
        }
        Command::Train => {
            let (ck, curves) = commands::cmd_train(&cfg, &manifest, out)?;
            wrote(&ck);
            wrote(&curves);
        }
        Command::Infer => {
            let ck = or_default(&cli.checkpoint, out, CHECKPOINT_FILE);
            wrote(&commands::cmd_infer(&cfg, &manifest, &ck, out)?)
        }
        Command::Eval => {
            let preds = or_default(&cli.predictions, out, PREDICTIONS_FILE);
            print!("{}", commands::cmd_eval(&manifest, &preds, out)?.to_text());
        }
        Command::Report => {
            let curves = or_default(&cli.curves, out, CURVES_FILE);
            wrote(&commands::cmd_report(&curves, out)?)
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
