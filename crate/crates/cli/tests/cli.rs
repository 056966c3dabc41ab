use std::path::Path;
use std::process::Command;

use clap::Parser;
use roadcrack_cli::detect::{self, Status};
use roadcrack_cli::eval::{self, EvalError};
use roadcrack_cli::{train, Cli, Command as Sub};
use roadcrack_core::{BinaryMask, CnnError, Label};

fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(std::iter::once("roadcrack").chain(args.iter().copied()))
}

fn synth(dir: &Path, count: usize, size: usize) {
    let d = dir.display().to_string();
    roadcrack_cli::run(parse(&["synth", &d, "--count", &count.to_string(), "--size", &size.to_string()]).unwrap())
        .unwrap();
}

fn detect_args(args: &[&str]) -> detect::DetectArgs {
    match parse(&[&["detect"], args].concat()).unwrap().command {
        Sub::Detect(a) => a,
        other => panic!("{other:?}"),
    }
}

#[test]
fn detect_needs_model_or_opt_out() {
    assert!(parse(&["detect", "x.png"]).is_err());
    assert!(parse(&["detect", "x.png", "--no-classifier"]).is_ok());
    assert!(parse(&["detect", "x.png", "--model", "m.json", "--no-classifier"]).is_err());
    let a = detect_args(&["x.png", "--no-classifier"]);
    assert_eq!(a.pipeline_config(), roadcrack_core::PipelineConfig::default());
}

#[test]
fn detect_without_classifier_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, 3, 80);
    let out = dir.path().join("out");
    let args = detect_args(&[
        &data.join("positive").display().to_string(),
        "--no-classifier",
        "-o",
        &out.display().to_string(),
    ]);
    let records = detect::run(&args).unwrap();
    assert_eq!(records.len(), 3);
    for r in &records {
        assert!(matches!(r.status, Status::Segmented { .. }), "{r:?}");
        let stem = r.file.trim_end_matches(".png");
        assert!(out.join("masks").join(format!("{stem}.png")).is_file());
        let curve = std::fs::read_to_string(out.join("curves").join(format!("{stem}.csv"))).unwrap();
        assert!(curve.starts_with("delta,wcss\n") && curve.lines().count() > 2);
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "file,label,p_positive,method,delta,foreground_pixels,status");
    assert!(lines[1].starts_with("crack_0000.png,,,adaptive,"));
    assert!(lines.windows(2).skip(1).all(|w| w[0] < w[1]));
}

#[test]
fn otsu_method_writes_no_curves() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, 1, 64);
    let out = dir.path().join("out");
    let args = detect_args(&[
        &data.join("positive").display().to_string(),
        "--no-classifier",
        "--method",
        "otsu",
        "-o",
        &out.display().to_string(),
    ]);
    detect::run(&args).unwrap();
    assert!(out.join("masks/crack_0000.png").is_file());
    assert!(!out.join("curves").exists());
}

#[test]
fn failing_images_do_not_stop_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, 2, 64);
    let pos = data.join("positive");
    std::fs::write(pos.join("broken.png"), b"not a png").unwrap();
    let out = dir.path().join("out");
    let args = detect_args(&[
        &pos.display().to_string(),
        "--no-classifier",
        "-o",
        &out.display().to_string(),
    ]);
    let records = detect::run(&args).unwrap();
    let broken = records.iter().find(|r| r.file == "broken.png").unwrap();
    assert!(matches!(broken.status, Status::Failed(_)));
    assert_eq!(
        records
            .iter()
            .filter(|r| matches!(r.status, Status::Segmented { .. }))
            .count(),
        2
    );

    // Only broken inputs: the binary reports failure.
    let bad = dir.path().join("bad");
    std::fs::create_dir(&bad).unwrap();
    std::fs::write(bad.join("a.png"), b"junk").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_roadcrack"))
        .args(["detect", "--no-classifier", "-o"])
        .arg(dir.path().join("out2"))
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(dir.path().join("out2/summary.csv").is_file());
}

fn train_args(args: &[&str]) -> train::TrainArgs {
    match parse(&[&["train"], args].concat()).unwrap().command {
        Sub::Train(a) => a,
        other => panic!("{other:?}"),
    }
}

#[test]
fn train_then_classify() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, 8, 32);
    let model = dir.path().join("m/model.json");
    let args = train_args(&[
        &data.display().to_string(),
        "-o",
        &model.display().to_string(),
        "--input-size",
        "32",
        "--channels",
        "8,16",
        "--epochs",
        "20",
        "--batch-size",
        "4",
        "--validation-frequency",
        "4",
    ]);
    let outcome = train::run(&args).unwrap();
    assert_eq!((outcome.train_images, outcome.validation_images), (12, 4));
    assert!(outcome.log.validation_entries().count() >= 2);
    let log = std::fs::read_to_string(dir.path().join("m/model.json.log.csv")).unwrap();
    assert!(log.starts_with("iteration,epoch,split,loss,accuracy\n"));

    let out = dir.path().join("out");
    let args = detect_args(&[
        &data.join("negative").display().to_string(),
        &data.join("positive").display().to_string(),
        "--model",
        &model.display().to_string(),
        "-o",
        &out.display().to_string(),
    ]);
    let records = detect::run(&args).unwrap();
    let correct = records
        .iter()
        .filter(|r| {
            let truth = if r.file.starts_with("crack") {
                Label::Positive
            } else {
                Label::Negative
            };
            r.classification.unwrap().label == truth
        })
        .count();
    assert!(correct >= 14, "{correct}/16 correct");
    for r in &records {
        let segmented = matches!(r.status, Status::Segmented { .. });
        assert_eq!(segmented, r.classification.unwrap().label == Label::Positive);
    }
}

#[test]
fn train_rejects_single_class_and_empty_sets() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, 2, 16);
    for f in std::fs::read_dir(data.join("negative")).unwrap() {
        std::fs::remove_file(f.unwrap().path()).unwrap();
    }
    let args = train_args(&[
        &data.display().to_string(),
        "--input-size",
        "16",
        "--channels",
        "2",
        "--train-fraction",
        "1",
    ]);
    let err = train::run(&args).err().unwrap();
    assert!(
        matches!(
            err.downcast_ref::<CnnError>(),
            Some(CnnError::SingleClassDataset(Label::Positive))
        ),
        "{err}"
    );

    for f in std::fs::read_dir(data.join("positive")).unwrap() {
        std::fs::remove_file(f.unwrap().path()).unwrap();
    }
    let err = train::run(&args).err().unwrap();
    assert!(
        matches!(err.downcast_ref::<CnnError>(), Some(CnnError::EmptyDataset)),
        "{err}"
    );
}

fn eval_args(args: &[&str]) -> eval::EvalArgs {
    match parse(&[&["eval"], args].concat()).unwrap().command {
        Sub::Eval(a) => a,
        other => panic!("{other:?}"),
    }
}

#[test]
fn image_level_eval_from_csv_and_folder() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, 2, 16);
    let pred = dir.path().join("pred.csv");
    std::fs::write(
        &pred,
        "file,label\ncrack_0000.png,positive\ncrack_0001.png,negative\nplain_0000.png,negative\nplain_0001.jpg,positive\n",
    )
    .unwrap();
    let csv_out = dir.path().join("report.csv");
    let args = eval_args(&[
        &pred.display().to_string(),
        &data.display().to_string(),
        "--csv",
        &csv_out.display().to_string(),
    ]);
    let report = eval::run(&args).unwrap();
    assert_eq!(
        (report.counts.tp, report.counts.fp, report.counts.fn_, report.counts.tn),
        (1, 1, 1, 1)
    );
    assert_eq!(report.metrics.f1, Some(0.5));
    let written = std::fs::read_to_string(&csv_out).unwrap();
    assert_eq!(
        written,
        "method,tau,precision,recall,accuracy,f1,tp,fp,fn,tn\nadaptive,1,0.5000,0.5000,0.5000,0.5000,1,1,1,1\n"
    );
    assert!(report
        .to_text()
        .starts_with("method    tau  precision  recall  accuracy  f1\n"));

    std::fs::write(&pred, "file,label\ncrack_0000.png,positive\n").unwrap();
    let err = eval::run(&args).err().unwrap();
    assert!(
        matches!(err.downcast_ref::<EvalError>(), Some(EvalError::MissingPair { .. })),
        "{err}"
    );
}

#[test]
fn pixel_level_eval() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, truth) = (dir.path().join("pred"), dir.path().join("truth"));
    std::fs::create_dir_all(&pred).unwrap();
    std::fs::create_dir_all(&truth).unwrap();
    let square = |w, h, lo: usize, hi: usize| {
        BinaryMask::from_fn(w, h, |x, y| (lo..hi).contains(&x) && (lo..hi).contains(&y)).unwrap()
    };
    // Truth: 12×12 block. Prediction: the same block plus a 3-pixel speck.
    roadcrack_core::save_mask(&square(20, 20, 4, 16), truth.join("a.png")).unwrap();
    let mut p = square(20, 20, 4, 16);
    for x in 0..3 {
        p.set(x, 19, true);
    }
    roadcrack_core::save_mask(&p, pred.join("a.png")).unwrap();

    let args = |extra: &[&str]| {
        let mut v = vec!["--level", "pixel"];
        v.extend_from_slice(extra);
        eval_args(&[v, vec![pred.to_str().unwrap(), truth.to_str().unwrap()]].concat())
    };
    let report = eval::run(&args(&[])).unwrap();
    assert_eq!(report.metrics.precision, Some(1.0));
    let report = eval::run(&args(&["--min-component", "1"])).unwrap();
    assert_eq!(report.counts.fp, 3);

    roadcrack_core::save_mask(&square(10, 10, 0, 5), truth.join("b.png")).unwrap();
    let err = eval::run(&args(&[])).err().unwrap();
    assert!(
        matches!(err.downcast_ref::<EvalError>(), Some(EvalError::MissingPair { .. })),
        "{err}"
    );
    let report = eval::run(&args(&["--allow-missing"])).unwrap();
    assert_eq!(report.counts.fn_, 25);

    roadcrack_core::save_mask(&square(12, 10, 0, 5), pred.join("b.png")).unwrap();
    let err = eval::run(&args(&[])).err().unwrap();
    assert!(
        matches!(
            err.downcast_ref::<EvalError>(),
            Some(EvalError::DimensionMismatch { .. })
        ),
        "{err}"
    );
}
