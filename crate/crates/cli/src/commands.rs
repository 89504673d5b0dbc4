//! One function per subcommand. Each reads its inputs, writes its outputs
//! under `out` and returns the paths it wrote.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use veason_core::cot;
use veason_core::env::{generate_dataset, Manifest, Sample};
use veason_core::eval::{evaluate, EvalReport, PredictionRecord};
use veason_core::grpo::{StepStats, STEP_STATS_HEADER};
use veason_core::policy::ToyPolicy;
use veason_core::response::ResponseRecord;
use veason_core::rewards::{total_reward, ScoreRecord};
use veason_core::train::{infer, train, Checkpoint};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::svg;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const COT_FILE: &str = "cot.jsonl";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const CURVES_SVG_FILE: &str = "curves.svg";

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(out: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Validation(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
        .collect()
}

fn to_json_pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes") + "\n"
}

pub fn load_manifest(path: &Path) -> Result<(Manifest, Vec<Sample>), CliError> {
    let manifest: Manifest = parse_json(path, &read(path)?)?;
    let samples = manifest.decode_samples()?;
    Ok((manifest, samples))
}

pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let manifest = generate_dataset(cfg.seed, &cfg.data)?;
    write(out, MANIFEST_FILE, &manifest.to_json())
}

pub fn cmd_cot(cfg: &RunConfig, manifest: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let (_, samples) = load_manifest(manifest)?;
    let records = cot::generate_records(cfg.seed, &samples)?;
    write(out, COT_FILE, &cot::to_jsonl(&records))
}

pub fn score_records(
    cfg: &RunConfig,
    samples: &[Sample],
    responses: &[ResponseRecord],
) -> Result<Vec<ScoreRecord>, CliError> {
    let known: HashSet<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
    let mut unknown: Vec<&str> = responses
        .iter()
        .map(|r| r.sample_id.as_str())
        .filter(|id| !known.contains(id))
        .collect();
    if !unknown.is_empty() {
        unknown.dedup();
        return Err(CliError::Validation(format!("responses name unknown sample ids: {}", unknown.join(", "))));
    }
    let propagator = cfg.propagator.build();
    responses
        .iter()
        .map(|r| {
            let s = samples.iter().find(|s| s.sample_id == r.sample_id).expect("checked above");
            let b = total_reward(&r.response, &s.scene(), &cfg.rewards, propagator.as_ref())?;
            Ok(ScoreRecord::new(r.sample_id.clone(), &b))
        })
        .collect()
}

pub fn cmd_score(cfg: &RunConfig, manifest: &Path, responses: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let (_, samples) = load_manifest(manifest)?;
    let responses: Vec<ResponseRecord> = read_jsonl(responses)?;
    let scores = score_records(cfg, &samples, &responses)?;
    write(out, SCORES_FILE, &to_jsonl(&scores))
}

pub fn curves_csv(stats: &[StepStats]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in stats {
        w.serialize(s).expect("stats serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

pub fn cmd_train(cfg: &RunConfig, manifest: &Path, out: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    let (_, samples) = load_manifest(manifest)?;
    if cfg.train.holdout >= samples.len() {
        return Err(CliError::Validation(format!(
            "train: holdout = {} leaves no training samples out of {}",
            cfg.train.holdout,
            samples.len()
        )));
    }
    let train_cfg = cfg.train_config();
    let init = ToyPolicy {
        temperature: train_cfg.temperature,
        ..ToyPolicy::uniform()
    };
    let outcome = train(cfg.seed, &samples[..samples.len() - cfg.train.holdout], init, &train_cfg, |_| {})?;
    let checkpoint = Checkpoint {
        seed: cfg.seed,
        config: train_cfg,
        policy: outcome.policy,
    };
    let ck = write(out, CHECKPOINT_FILE, &to_json_pretty(&checkpoint))?;
    let curves = write(out, CURVES_FILE, &curves_csv(&outcome.stats))?;
    Ok((ck, curves))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let ck: Checkpoint = parse_json(path, &read(path)?)?;
    if ToyPolicy::from_params(ck.policy.params.clone(), ck.policy.temperature).is_none() {
        return Err(CliError::Validation(format!(
            "{}: policy parameters have the wrong length, are not finite, or the temperature is not positive",
            path.display()
        )));
    }
    Ok(ck)
}

pub fn cmd_infer(cfg: &RunConfig, manifest: &Path, checkpoint: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let (_, samples) = load_manifest(manifest)?;
    let ck = load_checkpoint(checkpoint)?;
    let propagator = cfg.propagator.build();
    let preds = infer(&ck.policy, &samples, ck.seed, ck.config.noise_std, propagator.as_ref())?;
    write(out, PREDICTIONS_FILE, &to_jsonl(&preds))
}

pub fn cmd_eval(manifest: &Path, predictions: &Path, out: &Path) -> Result<EvalReport, CliError> {
    let (_, samples) = load_manifest(manifest)?;
    let preds: Vec<PredictionRecord> = read_jsonl(predictions)?;
    let report = evaluate(&samples, &preds)?;
    write(out, REPORT_JSON_FILE, &to_json_pretty(&report))?;
    write(out, REPORT_TEXT_FILE, &report.to_text())?;
    Ok(report)
}

pub fn read_curves(path: &Path) -> Result<Vec<StepStats>, CliError> {
    let text = read(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().ne(STEP_STATS_HEADER) {
        return Err(CliError::Validation(format!(
            "{}: header {:?} does not match the training-curve schema {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>(),
            STEP_STATS_HEADER
        )));
    }
    let rows = r
        .deserialize()
        .collect::<Result<Vec<StepStats>, _>>()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(CliError::Validation(format!("{}: no curve rows", path.display())));
    }
    Ok(rows)
}

pub fn cmd_report(curves: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let stats = read_curves(curves)?;
    write(out, CURVES_SVG_FILE, &svg::render_curves(&stats))
}
