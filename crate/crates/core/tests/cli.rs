use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mmfusion::data::{load_corpus, split_partition, write_corpus, Corpus, SubjectRecord};
use mmfusion::experiment::{ModelCheckpoint, ModelKind, CHECKPOINT_FORMAT};
use mmfusion::fusion::{FusionNet, FusionNetSpec};
use mmfusion::nn::{Activation, Dense, Matrix, Mlp, TrainConfig};
use mmfusion::postproc::LabelStats;
use mmfusion::{Dimension, FeatureDims, Modality};

fn mmfusion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmfusion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mmfusion(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn small_synth(out: &Path, extra: &[&str]) {
    let mut args = vec![
        "synth", "--out", p(out), "--subjects", "8", "--frames", "60", "--seed", "7", "--audio-dim", "12",
        "--video-dim", "16", "--text-dim", "6",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn naive_ccc(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    2.0 * sxy / n / (sxx / n + syy / n + (mx - my) * (mx - my))
}

#[test]
fn synth_is_deterministic_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    small_synth(&a, &[]);
    small_synth(&b, &[]);
    assert_eq!(snapshot(&a), snapshot(&b));
    assert_eq!(load_corpus(&a).unwrap().ids().len(), 8);

    let out = mmfusion(&["synth", "--out", p(&dir.path().join("c")), "--frames", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--frames"));

    // refuses to write over an existing corpus
    let out = mmfusion(&["synth", "--out", p(&a), "--frames", "5"]);
    assert!(!out.status.success());
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    small_synth(&corpus, &[]);
    let missing = dir.path().join("nope.json");
    for args in [
        vec!["eval", "--checkpoint", p(&missing), "--corpus", p(&corpus)],
        vec!["train", "--corpus", p(&corpus), "--dimension", "arousal", "--out", p(dir.path()), "--model", "late"],
        vec!["train", "--corpus", p(&missing), "--all", "--out", p(dir.path())],
        vec!["report", "--run", p(dir.path())],
        vec!["synth", "--out", p(&dir.path().join("d")), "--snr", "1,2"],
    ] {
        let out = mmfusion(&args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    }
}

#[test]
fn train_eval_scan_fuse_report() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let run = dir.path().join("run");
    small_synth(&corpus, &["--delay", "0.5,0,0"]);
    let common = ["--corpus", p(&corpus), "--out", p(&run), "--epochs", "4", "--seed", "3"];

    let mut args = vec!["train", "--dimension", "arousal", "--model", "proposed"];
    args.extend_from_slice(&common);
    ok(&args);
    for m in ["unimodal:audio", "unimodal:video", "unimodal:text"] {
        let mut args = vec!["train", "--dimension", "arousal", "--model", m];
        args.extend_from_slice(&common);
        ok(&args);
    }

    // epoch log and checkpoint agree with an independent re-evaluation
    let (header, rows) = csv_rows(&run.join("proposed_arousal.log.csv"));
    assert_eq!(header, "epoch,train_mse,dev_mse,dev_ccc");
    assert_eq!(rows.len(), 4);
    let ck = ModelCheckpoint::load(run.join("proposed_arousal.ckpt.json")).unwrap();
    let logged: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    let best = logged.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(ck.best_dev_ccc, best);
    assert_eq!(logged[ck.best_epoch - 1], best);
    let c = load_corpus(&corpus).unwrap();
    let pred = ck.predict(&c, &ck.partition.dev_select).unwrap();
    assert!((naive_ccc(&pred.raw, &pred.gold) - ck.best_dev_ccc).abs() < 1e-12);
    // 8 subjects, 3 dev, one of them for selection
    assert_eq!((ck.partition.train.len(), ck.partition.dev_select.len(), ck.partition.dev_test.len()), (5, 1, 2));

    let ckpt = run.join("proposed_arousal.ckpt.json");
    let printed = ok(&["eval", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--out", p(&run)]);
    assert!(printed.contains("stdratio") && printed.contains("decimal"));
    let (header, rows) = csv_rows(&run.join("eval_proposed_arousal.csv"));
    assert_eq!(header, "model,dimension,scaler,delay_s,ccc");
    let scalers: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(scalers, ["none", "minmax", "stdratio", "decimal"]);

    ok(&["delay-scan", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--out", p(&run), "--max", "1.0"]);
    let (header, rows) = csv_rows(&run.join("delay_proposed_arousal.csv"));
    assert_eq!(header, "delay_s,ccc");
    assert_eq!(rows.len(), 11);

    let uni: Vec<String> = ["audio", "video", "text"]
        .iter()
        .map(|m| p(&run.join(format!("unimodal-{m}_arousal.ckpt.json"))).to_string())
        .collect();
    let mut args = vec!["fuse-late", "--corpus", p(&corpus), "--out", p(&run), "--checkpoints"];
    args.extend(uni.iter().map(String::as_str));
    ok(&args);

    let table = ok(&["report", "--run", p(&run)]);
    assert!(table.contains("proposed") && table.contains("late"));

    let (header, rows) = csv_rows(&run.join("table.csv"));
    assert!(header.starts_with("model,arousal_none,arousal_decimal,arousal_stdratio,valence_none"));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.len() == 10 && r[4] == "NA"));

    let (header, rows) = csv_rows(&run.join("importance.csv"));
    assert_eq!(header, "dimension,modality,coefficient,importance_pct");
    assert_eq!(rows.len(), 3);
    let total: f64 = rows.iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((total - 100.0).abs() < 1e-9);

    let (header, rows) = csv_rows(&run.join("delay_curves.csv"));
    assert_eq!(header, "model,dimension,delay_s,ccc,best");
    let cccs: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    let mut argmax = 0;
    for (i, c) in cccs.iter().enumerate() {
        if *c > cccs[argmax] {
            argmax = i;
        }
    }
    let flagged: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r[4] == "1").map(|(i, _)| i).collect();
    assert_eq!(flagged, vec![argmax]);

    // the same commands again give the same bytes
    let again = dir.path().join("again");
    let mut args = vec!["train", "--dimension", "arousal", "--model", "proposed"];
    args.extend_from_slice(&["--corpus", p(&corpus), "--out", p(&again), "--epochs", "4", "--seed", "3"]);
    ok(&args);
    for f in ["proposed_arousal.ckpt.json", "proposed_arousal.log.csv"] {
        assert_eq!(fs::read(run.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn monitor_loss_selects_lowest_dev_loss() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    small_synth(&corpus, &[]);
    ok(&[
        "train", "--corpus", p(&corpus), "--dimension", "valence", "--out", p(dir.path()), "--epochs", "6",
        "--monitor", "loss", "--lr", "0.01",
    ]);
    let (_, rows) = csv_rows(&dir.path().join("proposed_valence.log.csv"));
    let losses: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let mut argmin = 0;
    for (i, l) in losses.iter().enumerate() {
        if *l < losses[argmin] {
            argmin = i;
        }
    }
    let ck = ModelCheckpoint::load(dir.path().join("proposed_valence.ckpt.json")).unwrap();
    assert_eq!(ck.best_epoch, argmin + 1);
    assert_eq!(ck.best_dev_mse, losses[argmin]);
}

#[test]
fn early_model_records_full_input_width() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    ok(&["synth", "--out", p(&corpus), "--subjects", "5", "--frames", "8", "--dev-subjects", "2"]);
    ok(&[
        "train", "--corpus", p(&corpus), "--dimension", "liking", "--model", "early", "--out", p(dir.path()),
        "--epochs", "1",
    ]);
    let ck = ModelCheckpoint::load(dir.path().join("early_liking.ckpt.json")).unwrap();
    assert_eq!(ck.model, ModelKind::Early);
    assert_eq!(ck.network.spec().trunk_input_dim(), 4521);
    assert_eq!(ck.network.trunk().input_dim(), 4521);
}

/// A text-only arousal network whose output equals its one input feature.
fn identity_network(spec: FusionNetSpec) -> FusionNet {
    // route x through two ReLU units as max(x, 0) and max(-x, 0), recombine at the end
    fn pass(layer: &mut Dense, first: bool) {
        let n_in = layer.spec.in_dim;
        if first {
            layer.weights[0] = 1.0;
            layer.weights[n_in] = -1.0;
        } else {
            layer.weights[0] = 1.0;
            layer.weights[n_in + 1] = 1.0;
        }
    }
    let zeros = FusionNet::zeros(spec.clone()).unwrap();
    let mut branch: Vec<Dense> = zeros.branches()[0].layers().to_vec();
    for (i, l) in branch.iter_mut().enumerate() {
        pass(l, i == 0);
    }
    let mut trunk: Vec<Dense> = zeros.trunk().layers().to_vec();
    let last = trunk.len() - 1;
    for l in &mut trunk[..last] {
        pass(l, false);
    }
    assert_eq!(trunk[last].spec.activation, Activation::Linear);
    trunk[last].weights[0] = 1.0;
    trunk[last].weights[1] = -1.0;
    let b = Mlp::from_layers(1, branch).unwrap();
    let t = Mlp::from_layers(zeros.trunk().input_dim(), trunk).unwrap();
    FusionNet::from_parts(spec, vec![b], t).unwrap()
}

#[test]
fn oracle_checkpoint_scores_one_in_every_column() {
    let dir = tempfile::tempdir().unwrap();
    let dims = FeatureDims::new(2, 2, 1).unwrap();
    // every subject carries the same label values, so training statistics match the test set
    let base = [0.15, 0.42, 0.9, 0.3, 0.77, 0.5];
    let subjects: Vec<SubjectRecord> = ["Devel_01", "Devel_02", "Devel_03", "Train_01", "Train_02"]
        .iter()
        .enumerate()
        .map(|(s, id)| {
            let mut y = base.to_vec();
            y.rotate_left(s);
            SubjectRecord {
                id: id.to_string(),
                features: [
                    Matrix::zeros(6, 2),
                    Matrix::zeros(6, 2),
                    Matrix::column(y.iter().map(|v| v - 0.4).collect()),
                ],
                labels: [y.iter().map(|v| v - 0.4).collect(), y.clone(), y],
            }
        })
        .collect();
    let corpus = Corpus::new(0.1, dims, subjects).unwrap();
    write_corpus(&corpus, dir.path().join("c")).unwrap();

    let (train, dev) = corpus.train_dev_ids();
    let partition = split_partition(&train, &dev, 1, 0).unwrap();
    let kind = ModelKind::Unimodal(Modality::Text);
    let train_labels: Vec<f64> = partition
        .train
        .iter()
        .flat_map(|id| corpus.subject(id).unwrap().labels(Dimension::Arousal).to_vec())
        .collect();
    let ck = ModelCheckpoint {
        format: CHECKPOINT_FORMAT.to_string(),
        model: kind,
        dimension: Dimension::Arousal,
        feature_dims: dims,
        frame_period: 0.1,
        partition,
        label_stats: LabelStats::from_labels(&train_labels).unwrap(),
        train_config: TrainConfig::default(),
        init_seed: 0,
        best_epoch: 1,
        best_dev_ccc: 1.0,
        best_dev_mse: 0.0,
        network: identity_network(kind.spec(Dimension::Arousal, dims)),
    };
    let path = dir.path().join("oracle.ckpt.json");
    ck.save(&path).unwrap();

    ok(&["eval", "--checkpoint", p(&path), "--corpus", p(&dir.path().join("c")), "--out", p(dir.path())]);
    let (_, rows) = csv_rows(&dir.path().join("eval_unimodal-text_arousal.csv"));
    assert_eq!(rows.len(), 4);
    for r in rows {
        let c: f64 = r[4].parse().unwrap();
        assert!((c - 1.0).abs() < 1e-12, "{} scored {c}", r[2]);
    }

    // the same checkpoint against a corpus of different feature sizes
    let other = dir.path().join("other");
    small_synth(&other, &[]);
    let out = mmfusion(&["eval", "--checkpoint", p(&path), "--corpus", p(&other)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("eval error"));
}
