//! End-to-end checks of the `sanrank` binary: exit codes, file formats,
//! sidecars and byte-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn sanrank(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sanrank"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_scores(path: &Path) -> Vec<(String, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut cells = l.split(',');
            let name = cells.next().unwrap().to_string();
            let score: f64 = cells.next().unwrap().parse().unwrap();
            (name, score)
        })
        .collect()
}

fn synth_fixture(dir: &Path) {
    let out = sanrank(
        &[
            "synth",
            "--samples",
            "90",
            "--features",
            "8",
            "--informative",
            "4",
            "--seed",
            "11",
            "--out",
            "data.csv",
        ],
        dir,
    );
    assert_success(&out);
}

#[test]
fn synth_writes_data_mask_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path());
    let data = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 91); // header + 90 rows
    assert!(data.lines().next().unwrap().ends_with(",class"));
    let mask = std::fs::read_to_string(dir.path().join("data.mask.csv")).unwrap();
    let ones = mask.lines().skip(1).filter(|l| *l == "1").count();
    assert_eq!(ones, 4);
    assert!(dir.path().join("data.meta.json").exists());
}

#[test]
fn synth_rejects_informative_above_features() {
    let dir = tempfile::tempdir().unwrap();
    let out = sanrank(
        &[
            "synth",
            "--samples",
            "20",
            "--features",
            "4",
            "--informative",
            "9",
            "--out",
            "x.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn rank_attention_global_sums_to_one_and_writes_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path());
    let out = sanrank(
        &[
            "rank",
            "--input",
            "data.csv",
            "--target",
            "class",
            "--method",
            "attentionGlobal",
            "--out",
            "rank.csv",
            "--seed",
            "4",
            "--epochs",
            "4",
            "--hidden-dim",
            "8",
        ],
        dir.path(),
    );
    assert_success(&out);
    let scores = read_scores(&dir.path().join("rank.csv"));
    assert_eq!(scores.len(), 8);
    let total: f64 = scores.iter().map(|(_, s)| s).sum();
    assert!((total - 1.0).abs() < 1e-9, "sum {total}");

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rank.meta.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["method"], "attentionGlobal");
    assert_eq!(sidecar["seed"], 4);
    assert_eq!(sidecar["params"]["epochs"], 4);
}

#[test]
fn unknown_method_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path());
    let out = sanrank(
        &[
            "rank", "--input", "data.csv", "--target", "class", "--method", "shap", "--out",
            "rank.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("shap"), "stderr: {stderr}");
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sanrank(
        &[
            "rank",
            "--input",
            "nope.csv",
            "--target",
            "class",
            "--method",
            "mutual_info",
            "--out",
            "rank.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn attention_clean_alias_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path());
    let out = sanrank(
        &[
            "rank",
            "--input",
            "data.csv",
            "--target",
            "class",
            "--method",
            "attentionClean",
            "--out",
            "rank.csv",
            "--epochs",
            "2",
            "--hidden-dim",
            "4",
        ],
        dir.path(),
    );
    assert_success(&out);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rank.meta.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["method"], "attentionPositive");
}

#[test]
fn compare_same_file_twice_yields_all_ones_matrix() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path());
    assert_success(&sanrank(
        &[
            "rank",
            "--input",
            "data.csv",
            "--target",
            "class",
            "--method",
            "mutual_info",
            "--out",
            "mi.csv",
        ],
        dir.path(),
    ));
    let out = sanrank(
        &[
            "compare",
            "--rankings",
            "mi.csv",
            "mi.csv",
            "--out-dir",
            "cmp",
        ],
        dir.path(),
    );
    assert_success(&out);
    let matrix = std::fs::read_to_string(dir.path().join("cmp/similarity_matrix.csv")).unwrap();
    let mut lines = matrix.lines();
    assert_eq!(lines.next().unwrap(), "method,mutual_info,mutual_info");
    assert_eq!(lines.next().unwrap(), "mutual_info,1,1");
    assert_eq!(lines.next().unwrap(), "mutual_info,1,1");
}

#[test]
fn compare_matrix_orders_identical_pair_above_reversed() {
    // Two identical 20-feature rankings and one reversed: the identical pair's
    // area must strictly beat both entries involving the reversed ranking.
    let dir = tempfile::tempdir().unwrap();
    let write_ranking = |name: &str, method: &str, reversed: bool| {
        let mut rows: Vec<(String, f64)> = (0..20)
            .map(|i| {
                let score = if reversed {
                    (i + 1) as f64
                } else {
                    (20 - i) as f64
                };
                (format!("f{i}"), score)
            })
            .collect();
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let mut text = String::from("feature,score,rank\n");
        for (rank, (feature, score)) in rows.iter().enumerate() {
            text.push_str(&format!("{feature},{score},{}\n", rank + 1));
        }
        std::fs::write(dir.path().join(format!("{name}.csv")), text).unwrap();
        std::fs::write(
            dir.path().join(format!("{name}.meta.json")),
            format!("{{\"method\": \"{method}\"}}"),
        )
        .unwrap();
    };
    write_ranking("a", "attention", false);
    write_ranking("b", "mutual_info", false);
    write_ranking("c", "relieff", true);

    let out = sanrank(
        &[
            "compare",
            "--rankings",
            "a.csv",
            "b.csv",
            "c.csv",
            "--out-dir",
            "cmp",
        ],
        dir.path(),
    );
    assert_success(&out);
    let matrix = std::fs::read_to_string(dir.path().join("cmp/similarity_matrix.csv")).unwrap();
    let cells: Vec<Vec<f64>> = matrix
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(cells[0][1], 1.0);
    assert!(cells[0][1] > cells[0][2]);
    assert!(cells[0][1] > cells[1][2]);
    for i in 0..3 {
        for j in 0..3 {
            assert!((cells[i][j] - cells[j][i]).abs() < 1e-12);
        }
    }
}

#[test]
fn synth_defaults_match_the_reference_experiment_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = sanrank(&["synth", "--out", "big.csv"], dir.path());
    assert_success(&out);
    let data = std::fs::read_to_string(dir.path().join("big.csv")).unwrap();
    assert_eq!(data.lines().count(), 1001); // header + 1000 rows
    assert_eq!(data.lines().next().unwrap().split(',').count(), 101);
    let mask = std::fs::read_to_string(dir.path().join("big.mask.csv")).unwrap();
    assert_eq!(mask.lines().skip(1).filter(|l| *l == "1").count(), 50);
}

#[test]
fn compare_rejects_mismatched_feature_sets() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path());
    assert_success(&sanrank(
        &[
            "rank",
            "--input",
            "data.csv",
            "--target",
            "class",
            "--method",
            "mutual_info",
            "--out",
            "a.csv",
        ],
        dir.path(),
    ));
    // A second dataset with different feature names.
    assert_success(&sanrank(
        &[
            "synth",
            "--samples",
            "30",
            "--features",
            "5",
            "--informative",
            "2",
            "--out",
            "other.csv",
        ],
        dir.path(),
    ));
    assert_success(&sanrank(
        &[
            "rank",
            "--input",
            "other.csv",
            "--target",
            "class",
            "--method",
            "mutual_info",
            "--out",
            "b.csv",
        ],
        dir.path(),
    ));
    let out = sanrank(
        &[
            "compare",
            "--rankings",
            "a.csv",
            "b.csv",
            "--out-dir",
            "cmp",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("a.csv") && stderr.contains('b'),
        "stderr: {stderr}"
    );
}

#[test]
fn compare_requires_rankings_or_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = sanrank(&["compare", "--out-dir", "cmp"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_manifest_averages_matrices() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("m1.csv"),
        "method,attention,relieff\nattention,1,0.2\nrelieff,0.2,1\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("m2.csv"),
        "method,attention,relieff\nattention,1,0.6\nrelieff,0.6,1\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("manifest.txt"), "m1.csv\nm2.csv\n").unwrap();
    let out = sanrank(
        &[
            "compare",
            "--matrix-manifest",
            "manifest.txt",
            "--out-dir",
            "cmp",
        ],
        dir.path(),
    );
    assert_success(&out);
    let mean = std::fs::read_to_string(dir.path().join("cmp/mean_matrix.csv")).unwrap();
    assert!(mean.contains("attention,1,0.4"), "{mean}");
}

#[test]
fn evaluate_writes_one_curve_per_method_with_unit_tail() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path());
    let out = sanrank(
        &[
            "evaluate",
            "--input",
            "data.csv",
            "--target",
            "class",
            "--methods",
            "mutual_info,random_forest",
            "--folds",
            "3",
            "--cutoffs",
            "2,8",
            "--seed",
            "5",
            "--out-dir",
            "ev",
            "--trees",
            "20",
        ],
        dir.path(),
    );
    assert_success(&out);
    for method in ["mutual_info", "random_forest"] {
        let text =
            std::fs::read_to_string(dir.path().join(format!("ev/eval_{method}.csv"))).unwrap();
        let last = text.lines().last().unwrap();
        let relative: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
        assert!(
            (relative - 1.0).abs() < 1e-9,
            "{method} tail cutoff relative {relative}"
        );
    }
}

#[test]
fn evaluate_fails_fast_on_unknown_method() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path());
    let out = sanrank(
        &[
            "evaluate",
            "--input",
            "data.csv",
            "--target",
            "class",
            "--methods",
            "mutual_info,telepathy",
            "--folds",
            "3",
            "--out-dir",
            "ev",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("ev").exists());
}

#[test]
fn attn_diff_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = sanrank(
        &[
            "attn-diff",
            "--samples",
            "80",
            "--features",
            "8",
            "--informative",
            "4",
            "--reps",
            "1",
            "--folds",
            "2",
            "--seed",
            "6",
            "--out",
            "report.json",
            "--epochs",
            "4",
            "--hidden-dim",
            "8",
            "--batch-size",
            "8",
        ],
        dir.path(),
    );
    assert_success(&out);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let folds_used = report["folds_used"].as_u64().unwrap();
    assert!(folds_used <= 2);
    if folds_used > 0 {
        let pos = report["mean_attention_positive"].as_array().unwrap();
        let sum: f64 = pos.iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn synth_round_trips_through_rank_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    synth_fixture(dir.path());
    for run in ["one", "two"] {
        let out = sanrank(
            &[
                "rank",
                "--input",
                "data.csv",
                "--target",
                "class",
                "--method",
                "attention",
                "--out",
                &format!("{run}.csv"),
                "--seed",
                "9",
                "--epochs",
                "3",
                "--hidden-dim",
                "8",
            ],
            dir.path(),
        );
        assert_success(&out);
    }
    let a = std::fs::read(dir.path().join("one.csv")).unwrap();
    let b = std::fs::read(dir.path().join("two.csv")).unwrap();
    assert_eq!(a, b);
}
