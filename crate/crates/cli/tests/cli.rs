use std::fs;
use std::path::Path;
use std::process::Command;

use veason_cli::commands::{self, read_jsonl};
use veason_cli::RunConfig;
use veason_core::env::Sample;
use veason_core::eval::PredictionRecord;
use veason_core::geometry::{rle_encode, BinaryMask, BoundingBox};
use veason_core::grpo::StepStats;
use veason_core::response::{serialize_response, ResponseRecord, StructuredResponse};
use veason_core::rewards::ScoreRecord;

const SMALL: &str = r#"
seed = 5
[data]
n_videos = 30
negative_fraction = 0.2
[train]
steps = 12
batch_size = 4
holdout = 10
"#;

fn veason(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_veason"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn gt_response(s: &Sample) -> StructuredResponse {
    let k = s.gt.argmax_area_frame();
    StructuredResponse::new("look at the largest frame", s.gt.sampled_times()[k], s.gt.boxes_at(k))
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, SMALL);
    for cmd in ["gen", "cot", "train", "infer", "eval", "report"] {
        let o = veason(d, &[cmd, "--config", &cfg]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["manifest.json", "cot.jsonl", "checkpoint.json", "curves.csv", "predictions.jsonl", "report.json", "report.txt", "curves.svg"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let curves = commands::read_curves(&d.join("curves.csv")).unwrap();
    assert_eq!(curves.len(), 12);
    let preds: Vec<PredictionRecord> = read_jsonl(&d.join("predictions.jsonl")).unwrap();
    assert_eq!(preds.len(), 30);
    let text = fs::read_to_string(d.join("report.txt")).unwrap();
    assert!(text.contains("overall") && text.contains("not comparable"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = write_config(d, "[data]\nn_videos = 0\n");
    let o = veason(d, &["gen", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_videos"));

    let o = veason(d, &["eval", "--manifest", "missing.json"]);
    assert_eq!(o.status.code(), Some(3));

    let o = veason(d, &["gen", "--config", "nope.toml"]);
    assert_eq!(o.status.code(), Some(3));

    let o = veason(d, &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    let huge = write_config(d, "[data]\nn_videos = 20\n[grpo]\nlearning_rate = 1e308\nmax_grad_norm = 1e308\n[train]\nsteps = 3\nbatch_size = 2\n");
    assert!(veason(d, &["gen", "--config", &huge]).status.success());
    let o = veason(d, &["train", "--config", &huge]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn negative_count_is_seeded_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_str_with_format("seed = 11\n[data]\nn_videos = 100\nnegative_fraction = 0.2\n", true).unwrap();
    let a = commands::cmd_gen(&cfg, &dir.path().join("a")).unwrap();
    let b = commands::cmd_gen(&cfg, &dir.path().join("b")).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (_, samples) = commands::load_manifest(&a).unwrap();
    assert_eq!(samples.iter().filter(|s| s.is_negative()).count(), 20);
}

#[test]
fn cot_covers_exactly_the_positives() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = RunConfig::from_str_with_format(SMALL, true).unwrap();
    let m = commands::cmd_gen(&cfg, d).unwrap();
    let out = commands::cmd_cot(&cfg, &m, d).unwrap();
    let (_, samples) = commands::load_manifest(&m).unwrap();
    let lines = fs::read_to_string(out).unwrap();
    let records: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), samples.iter().filter(|s| !s.is_negative()).count());
    for r in &records {
        let keys: Vec<&String> = r.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["prompt", "sample_id", "target"]);
        assert!(veason_core::response::parse_response(r["target"].as_str().unwrap()).is_ok());
    }
}

fn score(cfg: &RunConfig, d: &Path, records: &[ResponseRecord]) -> Vec<ScoreRecord> {
    let responses = d.join("responses.jsonl");
    let text: String = records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    fs::write(&responses, text).unwrap();
    let out = commands::cmd_score(cfg, &d.join("manifest.json"), &responses, d).unwrap();
    read_jsonl(&out).unwrap()
}

#[test]
fn scoring_perfect_garbage_and_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = RunConfig::from_str_with_format("[data]\nn_videos = 25\nnegative_fraction = 0.0\n", true).unwrap();
    let m = commands::cmd_gen(&cfg, d).unwrap();
    let (_, samples) = commands::load_manifest(&m).unwrap();

    let perfect: Vec<ResponseRecord> = samples
        .iter()
        .map(|s| ResponseRecord {
            sample_id: s.sample_id.clone(),
            response: serialize_response(&gt_response(s)).unwrap(),
        })
        .collect();
    assert!(score(&cfg, d, &perfect).iter().all(|r| r.r_total == 4.0));

    let garbage: Vec<ResponseRecord> = samples
        .iter()
        .map(|s| ResponseRecord {
            sample_id: s.sample_id.clone(),
            response: "I think it is the red one.".into(),
        })
        .collect();
    assert!(score(&cfg, d, &garbage).iter().all(|r| r.r_total == 0.0 && r.diag.is_some()));

    let unknown = [ResponseRecord {
        sample_id: "zzz".into(),
        response: String::new(),
    }];
    let responses = d.join("unknown.jsonl");
    fs::write(&responses, serde_json::to_string(&unknown[0]).unwrap()).unwrap();
    let err = commands::cmd_score(&cfg, &m, &responses, d).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("zzz"));
}

#[test]
fn scoring_hand_computed_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = RunConfig::from_str_with_format("propagator = \"oracle\"\n[data]\nn_videos = 10\nnegative_fraction = 0.0\n", true).unwrap();
    let m = commands::cmd_gen(&cfg, d).unwrap();
    let (_, samples) = commands::load_manifest(&m).unwrap();
    let s = &samples[0];
    let areas = s.gt.merged_areas();
    let max = *areas.iter().max().unwrap() as f64;
    let kmin = (0..areas.len()).filter(|&t| areas[t] > 0).min_by_key(|&t| areas[t]).unwrap();
    let gt_box = s.gt.boxes_at(kmin)[0];

    // right keyframe content at a weaker frame, half-width box on the left
    let half = BoundingBox::new(gt_box.x1, gt_box.y1, (gt_box.x1 + gt_box.x2) / 2.0, gt_box.y2).unwrap();
    let r1 = StructuredResponse::new("", s.gt.sampled_times()[kmin], vec![half]);
    // a box far from everything at the same frame
    let far = BoundingBox::new(0.0, 0.0, 0.5, 0.5).unwrap();
    let r2 = StructuredResponse::new("", s.gt.sampled_times()[kmin], vec![gt_box, far]);
    let rows = score(
        &cfg,
        d,
        &[
            ResponseRecord { sample_id: s.sample_id.clone(), response: serialize_response(&r1).unwrap() },
            ResponseRecord { sample_id: s.sample_id.clone(), response: serialize_response(&r2).unwrap() },
            ResponseRecord { sample_id: s.sample_id.clone(), response: "<think>x</think>".into() },
        ],
    );
    let rk = areas[kmin] as f64 / max;
    let iou_half = half.area() / gt_box.area();
    assert!((rows[0].r_k - rk).abs() < 1e-12);
    assert!((rows[0].r_s - iou_half).abs() < 1e-12);
    // the oracle propagator copies the matched object's full track
    assert_eq!(rows[0].r_u, 1.0);
    assert!((rows[0].r_total - (1.0 + rk + iou_half + 1.0)).abs() < 1e-12);
    // the spare box leaves only the true one matched: 1 / max(2, 1)
    assert!((rows[1].r_s - 0.5).abs() < 1e-12);
    assert_eq!(rows[1].r_u, 1.0);
    assert_eq!((rows[2].r_f, rows[2].r_total), (0.0, 0.0));
}

#[test]
fn eval_hand_computed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = RunConfig::from_str_with_format("[data]\nn_videos = 3\nnegative_fraction = 0.0\n", true).unwrap();
    let m = commands::cmd_gen(&cfg, d).unwrap();
    let (_, samples) = commands::load_manifest(&m).unwrap();
    // first sample: ground truth except one frame left empty
    let s = &samples[0];
    let gt = s.gt.merged_masks();
    let t = gt.len();
    let blank = (0..t).find(|&i| gt[i].area() > 0).unwrap();
    let masks: Vec<_> = gt
        .iter()
        .enumerate()
        .map(|(i, m)| if i == blank { rle_encode(&BinaryMask::empty(m.width(), m.height())) } else { rle_encode(m) })
        .collect();
    let preds = [PredictionRecord { sample_id: s.sample_id.clone(), masks }];
    let p = d.join("preds.jsonl");
    fs::write(&p, serde_json::to_string(&preds[0]).unwrap() + "\n").unwrap();
    let report = commands::cmd_eval(&m, &p, d).unwrap();
    let row = &report.samples[0];
    let expected = (t - 1) as f64 / t as f64;
    assert!((row.j - expected).abs() < 1e-12 && (row.f - expected).abs() < 1e-12);
    assert_eq!(report.samples[1].jf, 0.0);
    let overall = report.overall();
    assert!((overall.jf - 100.0 * expected / 3.0).abs() < 1e-9);
}

fn stats_row(step: usize, reward: f64) -> StepStats {
    StepStats {
        step,
        mean_reward: reward,
        mean_r_f: 1.0,
        mean_r_k: 0.5,
        mean_r_s: 0.5,
        mean_r_u: 0.5,
        kl: 0.01 * step as f64,
        grad_norm: 1.0,
        mean_response_actions: 2.0,
    }
}

#[test]
fn report_svg_is_xml_with_monotone_reward_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stats: Vec<StepStats> = (0..20).map(|i| stats_row(i, 1.0 + 0.1 * i as f64)).collect();
    fs::write(d.join("curves.csv"), commands::curves_csv(&stats)).unwrap();
    let svg = fs::read_to_string(commands::cmd_report(&d.join("curves.csv"), d).unwrap()).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(lines.len(), 3);
    let ys: Vec<f64> = lines[0]
        .attribute("points")
        .unwrap()
        .split(' ')
        .map(|p| p.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ys.len(), 20);
    assert!(ys.windows(2).all(|w| w[1] < w[0]), "{ys:?}");
}

#[test]
fn report_rejects_empty_and_foreign_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.csv"), "").unwrap();
    assert_eq!(commands::cmd_report(&d.join("empty.csv"), d).unwrap_err().exit_code(), 2);
    fs::write(d.join("header.csv"), commands::curves_csv(&[stats_row(0, 1.0)]).lines().next().unwrap().to_string() + "\n").unwrap();
    assert_eq!(commands::cmd_report(&d.join("header.csv"), d).unwrap_err().exit_code(), 2);
    fs::write(d.join("other.csv"), "a,b\n1,2\n").unwrap();
    let e = commands::cmd_report(&d.join("other.csv"), d).unwrap_err();
    assert!(e.to_string().contains("schema"));
}

#[test]
fn zero_learning_rate_gives_flat_policy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = RunConfig::from_str_with_format(
        "[data]\nn_videos = 12\n[grpo]\nlearning_rate = 0.0\n[train]\nsteps = 6\nbatch_size = 3\n",
        true,
    )
    .unwrap();
    let m = commands::cmd_gen(&cfg, d).unwrap();
    let (ck, _) = commands::cmd_train(&cfg, &m, d).unwrap();
    let ck = commands::load_checkpoint(&ck).unwrap();
    assert!(ck.policy.params.iter().all(|p| *p == 0.0));
}
