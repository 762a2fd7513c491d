//! End-to-end tests driving the compiled `canyonpl` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use canyonpl::eval::{EvalReport, Protocol};
use canyonpl::persist::load_regressor;

fn canyonpl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canyonpl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = canyonpl(args, dir);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn fails_with(args: &[&str], dir: &Path, code: i32) -> String {
    let out = canyonpl(args, dir);
    assert_eq!(
        out.status.code(),
        Some(code),
        "command {args:?} should exit {code}; stderr:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stderr).expect("utf8 stderr")
}

/// Every file under `dir`, keyed by relative path, with full contents.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .expect("under root")
                    .to_string_lossy()
                    .into_owned();
                map.insert(rel, fs::read(&path).expect("readable file"));
            }
        }
    }
    map
}

#[test]
fn synth_is_deterministic_and_validates_flags() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    let stdout = ok(&["synth", "--streets", "3", "--seed", "7", "--out", "a"], dir);
    assert!(stdout.contains("3 streets"), "got: {stdout}");

    let files = snapshot(&dir.join("a"));
    let names: Vec<&str> = files.keys().map(String::as_str).collect();
    assert_eq!(
        names,
        vec![
            "clouds/s0.xyz",
            "clouds/s1.xyz",
            "clouds/s2.xyz",
            "footprints/s0.fpl",
            "footprints/s1.fpl",
            "footprints/s2.fpl",
            "links.csv",
            "streets.csv",
        ]
    );

    ok(&["synth", "--streets", "3", "--seed", "7", "--out", "b"], dir);
    assert_eq!(files, snapshot(&dir.join("b")), "same seed, same bytes");

    let stderr = fails_with(&["synth", "--streets", "0", "--out", "c"], dir, 2);
    assert!(stderr.contains("--streets"), "got: {stderr}");
    assert!(!dir.join("c").exists(), "no output on usage error");
}

#[test]
fn featurize_writes_the_documented_schema() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    ok(&["synth", "--streets", "2", "--seed", "1", "--out", "d"], dir);
    ok(&["featurize", "--data", "d", "--out", "f.csv"], dir);

    let csv = fs::read_to_string(dir.join("f.csv")).expect("csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some(
            "log3d,log1d,street_width,clutter_per_link,clutter_per_street,\
             rx_height,both_sides,measured_pl"
        )
    );
    let links = fs::read_to_string(dir.join("d/links.csv")).expect("links");
    let n_links = links.lines().count() - 1;
    assert_eq!(lines.count(), n_links, "one row per link");

    // The four-feature subset drops to 4 + target columns.
    ok(
        &["featurize", "--data", "d", "--out", "g.csv", "--feature-set", "clutter4"],
        dir,
    );
    let csv4 = fs::read_to_string(dir.join("g.csv")).expect("csv");
    assert_eq!(
        csv4.lines().next(),
        Some("log3d,clutter_per_link,clutter_per_street,both_sides,measured_pl")
    );

    // Building sets refuse to run without a trained autoencoder.
    let stderr = fails_with(
        &["featurize", "--data", "d", "--out", "h.csv", "--feature-set", "clutter-building"],
        dir,
        2,
    );
    assert!(stderr.contains("--ae-model"), "got: {stderr}");
}

#[test]
fn trained_autoencoder_extends_the_feature_table() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    ok(&["synth", "--streets", "2", "--seed", "3", "--out", "d"], dir);
    ok(
        &[
            "train-ae", "--data", "d", "--out", "ae.bin", "--ae-epochs", "1",
            "--ae-variant", "single", "--ae-seed", "9",
        ],
        dir,
    );
    ok(
        &[
            "featurize", "--data", "d", "--out", "b.csv",
            "--feature-set", "clutter-building", "--ae-model", "ae.bin",
        ],
        dir,
    );
    let csv = fs::read_to_string(dir.join("b.csv")).expect("csv");
    let header: Vec<&str> = csv.lines().next().expect("header").split(',').collect();
    assert_eq!(header.len(), 20, "7 clutter + 12 latent + target");
    assert_eq!(header[0], "log3d");
    assert_eq!(header[7], "ae0");
    assert_eq!(header[18], "ae11");
    assert_eq!(header[19], "measured_pl");
}

#[test]
fn train_saves_a_loadable_model_bundle() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    ok(&["synth", "--streets", "2", "--seed", "2", "--out", "d"], dir);
    let stdout = ok(
        &["train", "--data", "d", "--out", "m.bin", "--model", "lasso", "--seed", "4"],
        dir,
    );
    assert!(stdout.contains("train RMSE"), "got: {stdout}");

    let bundle = load_regressor(&dir.join("m.bin")).expect("saved bundle loads");
    assert_eq!(bundle.kind.name(), "lasso");
    assert_eq!(
        bundle.feature_names,
        vec![
            "log3d",
            "log1d",
            "street_width",
            "clutter_per_link",
            "clutter_per_street",
            "rx_height",
            "both_sides",
        ]
    );
}

#[test]
fn evaluate_writes_reports_and_reruns_identically() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    ok(&["synth", "--streets", "3", "--seed", "7", "--out", "d"], dir);
    let eval_args = [
        "evaluate", "--data", "d", "--out", "r1", "--models", "lasso",
        "--protocol", "street-by-street", "--seed", "11",
    ];
    let stdout = ok(&eval_args, dir);
    assert!(stdout.contains("lasso"), "got: {stdout}");

    let text = fs::read_to_string(dir.join("r1/report.json")).expect("report");
    let report: EvalReport = serde_json::from_str(&text).expect("parses");
    assert_eq!(report.protocol, Protocol::StreetByStreet);
    assert_eq!(report.fold_test_counts.len(), 3, "one fold per street");
    let names: Vec<&str> = report.models.iter().map(|m| m.name.as_str()).collect();
    assert_eq!(
        names,
        vec!["slope-intercept", "gpp-uma-los", "gpp-umi-nlos", "lasso"],
        "baselines always lead the table"
    );

    let fold_csv = fs::read_to_string(dir.join("r1/fold_rmse.csv")).expect("csv");
    assert_eq!(fold_csv.lines().count(), 4, "header + 3 folds");
    assert_eq!(
        fold_csv.lines().next(),
        Some("fold,slope-intercept,gpp-uma-los,gpp-umi-nlos,lasso")
    );
    let bins_csv = fs::read_to_string(dir.join("r1/distance_bins.csv")).expect("csv");
    assert!(bins_csv.starts_with("model,bin_end,rmse,links\n"));

    let mut rerun = eval_args;
    rerun[4] = "r2";
    ok(&rerun, dir);
    assert_eq!(snapshot(&dir.join("r1")), snapshot(&dir.join("r2")));

    ok(
        &[
            "evaluate", "--data", "d", "--out", "r3", "--models", "lasso",
            "--protocol", "shuffle-split", "--iterations", "4", "--plan-seed", "3",
        ],
        dir,
    );
    let text = fs::read_to_string(dir.join("r3/report.json")).expect("report");
    let report: EvalReport = serde_json::from_str(&text).expect("parses");
    assert_eq!(report.protocol, Protocol::LinksShuffleSplit);
    assert_eq!(report.fold_test_counts, vec![45; 4], "225 links split 180/45");
}

#[test]
fn importance_and_lofo_write_one_row_per_feature() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    ok(&["synth", "--streets", "3", "--seed", "5", "--out", "d"], dir);
    ok(
        &["importance", "--data", "d", "--out", "i", "--lofo-model", "lasso", "--seed", "2"],
        dir,
    );

    let imp = fs::read_to_string(dir.join("i/importance.csv")).expect("csv");
    assert_eq!(imp.lines().count(), 8, "header + 7 features");
    assert!(imp.starts_with("feature,mean_weight,min_weight,max_weight\n"));
    assert!(imp.contains("\nclutter_per_street,"));

    let lofo = fs::read_to_string(dir.join("i/lofo.csv")).expect("csv");
    assert_eq!(lofo.lines().count(), 8, "header + 7 features");
    assert!(lofo.starts_with("feature,delta_rmse\n"));

    // Importance is a linear-weight analysis; building sets are refused.
    let stderr = fails_with(
        &["importance", "--data", "d", "--out", "j", "--feature-set", "clutter-building"],
        dir,
        2,
    );
    assert!(stderr.contains("clutter"), "got: {stderr}");
}

#[test]
fn report_renders_one_marker_per_test_link_and_reruns_identically() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    ok(&["synth", "--streets", "3", "--seed", "7", "--out", "d"], dir);
    ok(
        &[
            "evaluate", "--data", "d", "--out", "r", "--models", "lasso",
            "--protocol", "street-by-street",
        ],
        dir,
    );
    ok(
        &[
            "report", "--report", "r/report.json", "--data", "d", "--out", "figs",
            "--plot-model", "lasso", "--seed", "2",
        ],
        dir,
    );

    for name in ["box.svg", "scatter.svg", "weights.svg"] {
        assert!(dir.join("figs").join(name).exists(), "{name} missing");
    }
    let scatter = fs::read_to_string(dir.join("figs/scatter.svg")).expect("svg");
    let links = fs::read_to_string(dir.join("d/links.csv")).expect("links");
    let n_links = links.lines().count() - 1;
    // Street-by-street tests each link exactly once, so the pooled
    // scatter holds one marker per link.
    assert_eq!(scatter.matches("<circle").count(), n_links);

    ok(
        &[
            "report", "--report", "r/report.json", "--data", "d", "--out", "figs2",
            "--plot-model", "lasso", "--seed", "2",
        ],
        dir,
    );
    assert_eq!(snapshot(&dir.join("figs")), snapshot(&dir.join("figs2")));

    let stderr = fails_with(
        &[
            "report", "--report", "r/report.json", "--data", "d", "--out", "figs3",
            "--plot-model", "svr",
        ],
        dir,
        2,
    );
    assert!(stderr.contains("not in the report"), "got: {stderr}");
}

#[test]
fn config_file_fills_defaults_and_rejects_unknown_keys() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    fs::write(dir.join("cfg.json"), r#"{"streets": 2, "seed": 5}"#).expect("write");

    let stdout = ok(&["synth", "--config", "cfg.json", "--out", "a"], dir);
    assert!(stdout.contains("2 streets"), "config supplies streets: {stdout}");

    // A flag beats the same key in the config file.
    let stdout = ok(
        &["synth", "--config", "cfg.json", "--streets", "3", "--out", "b"],
        dir,
    );
    assert!(stdout.contains("3 streets"), "flag overrides config: {stdout}");

    // Same streets+seed via config or flags: identical datasets.
    ok(&["synth", "--streets", "2", "--seed", "5", "--out", "c"], dir);
    assert_eq!(snapshot(&dir.join("a")), snapshot(&dir.join("c")));

    fs::write(dir.join("bad.json"), r#"{"streets": 2, "bogus": 1}"#).expect("write");
    let stderr = fails_with(&["synth", "--config", "bad.json", "--out", "e"], dir, 2);
    assert!(stderr.contains("bogus"), "names the unknown key: {stderr}");
}

#[test]
fn missing_inputs_are_runtime_errors() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    fails_with(&["featurize", "--data", "nope", "--out", "f.csv"], dir, 1);
    fails_with(
        &["report", "--report", "nope.json", "--data", "nope", "--out", "figs"],
        dir,
        1,
    );
    // A missing required flag is a usage error, not a runtime one.
    let stderr = fails_with(&["featurize", "--out", "f.csv"], dir, 2);
    assert!(stderr.contains("--data"), "got: {stderr}");
}
