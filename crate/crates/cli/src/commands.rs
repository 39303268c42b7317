//! Implementations behind the subcommands.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

use sanrank_core::baselines::{ForestParams, ReliefFParams};
use sanrank_core::error::{Error, Result};
use sanrank_core::eval::{
    attention_difference_experiment, topn_sweep, AttentionVariant, RankerSpec, SweepOptions,
};
use sanrank_core::importance::{ImportanceVector, Method};
use sanrank_core::ranking::{default_cutoff_grid, fuji_curve, similarity_matrix, SimilarityMatrix};
use sanrank_core::tabular::{
    load_csv, make_classification, standardize, stratified_kfold, write_csv, write_relevance_mask,
};
use sanrank_core::SanConfig;

use crate::{AttnDiffArgs, BaselineArgs, CompareArgs, EvaluateArgs, RankArgs, SanArgs, SynthArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything an output needs to be reproduced, written next to it.
#[derive(serde::Serialize)]
struct Sidecar {
    command: String,
    version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    standardize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    params: serde_json::Value,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

fn write_sidecar(out: &Path, sidecar: &Sidecar) -> Result<()> {
    let text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes") + "\n";
    std::fs::write(sidecar_path(out), text).map_err(|e| Error::io(sidecar_path(out), e))
}

fn san_config(args: &SanArgs, seed: u64) -> SanConfig {
    SanConfig {
        hidden_dim: args.hidden_dim,
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        dropout_rate: args.dropout,
        n_heads: args.heads,
        seed,
        ..SanConfig::default()
    }
}

fn ranker_spec(method: Method, san: &SanArgs, baseline: &BaselineArgs, seed: u64) -> RankerSpec {
    let variant = match method {
        Method::Attention => Some(AttentionVariant::Instance),
        Method::AttentionPositive => Some(AttentionVariant::InstanceClean),
        Method::AttentionGlobal => Some(AttentionVariant::Global),
        Method::AttentionGlobalRws => Some(AttentionVariant::GlobalRws),
        _ => None,
    };
    if let Some(variant) = variant {
        return RankerSpec::San {
            config: san_config(san, seed),
            variant,
        };
    }
    match method {
        Method::Relieff => RankerSpec::ReliefF(ReliefFParams {
            n_neighbors: baseline.neighbors,
            sample_size: baseline.sample_size.0,
            seed,
        }),
        Method::MutualInfo => RankerSpec::MutualInfo {
            n_bins: baseline.bins,
        },
        Method::RandomForest => RankerSpec::RandomForest(ForestParams {
            n_trees: baseline.trees,
            max_features_per_split: baseline.max_features,
            min_leaf_size: baseline.min_leaf,
            seed,
        }),
        _ => unreachable!("attention variants handled above"),
    }
}

fn spec_params_json(spec: &RankerSpec) -> serde_json::Value {
    match spec {
        RankerSpec::San { config, .. } => serde_json::to_value(config).expect("config serializes"),
        RankerSpec::ReliefF(p) => serde_json::to_value(p).expect("params serialize"),
        RankerSpec::MutualInfo { n_bins } => serde_json::json!({ "n_bins": n_bins }),
        RankerSpec::RandomForest(p) => serde_json::to_value(p).expect("params serialize"),
    }
}

pub fn rank(args: RankArgs) -> Result<()> {
    let data = load_csv(&args.input, &args.target)?;
    let prepared = if args.no_standardize {
        data
    } else {
        standardize(&data).0
    };
    let spec = ranker_spec(args.method, &args.san, &args.baseline, args.seed);
    let ranking = spec.fit(&prepared)?;
    ranking.write_csv(&args.out)?;
    write_sidecar(
        &args.out,
        &Sidecar {
            command: "rank".into(),
            version: VERSION.into(),
            method: Some(args.method.to_string()),
            seed: Some(args.seed),
            standardize: Some(!args.no_standardize),
            input: Some(args.input.display().to_string()),
            target: Some(args.target.to_string()),
            params: spec_params_json(&spec),
            metadata: ranking.metadata.clone(),
        },
    )
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("ranking")
        .to_string()
}

/// Resolves a ranking file's method from its sidecar, falling back to the
/// file stem when the stem itself is a method name.
fn load_ranking(path: &Path) -> Result<ImportanceVector> {
    let sidecar = sidecar_path(path);
    let method: Method = if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            Error::InvalidParameter(format!("malformed sidecar {}: {e}", sidecar.display()))
        })?;
        value
            .get("method")
            .and_then(|m| m.as_str())
            .ok_or_else(|| {
                Error::InvalidParameter(format!("sidecar {} has no method", sidecar.display()))
            })?
            .parse()?
    } else {
        file_stem(path).parse().map_err(|_| {
            Error::InvalidParameter(format!(
                "cannot determine the method of {}: no sidecar {} and the file stem is not a \
                 method name",
                path.display(),
                sidecar.display()
            ))
        })?
    };
    ImportanceVector::read_csv(path, method)
}

pub fn compare(args: CompareArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;

    if let Some(manifest) = &args.matrix_manifest {
        let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
        let mut matrices = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            matrices.push(SimilarityMatrix::read_csv(Path::new(line))?);
        }
        let mean = SimilarityMatrix::mean_of(&matrices)?;
        return mean.write_csv(&args.out_dir.join("mean_matrix.csv"));
    }

    let rankings: Vec<(String, ImportanceVector)> = args
        .rankings
        .iter()
        .map(|p| load_ranking(p).map(|iv| (file_stem(p), iv)))
        .collect::<Result<_>>()?;

    // Same feature-name set everywhere, or say which files disagree.
    let reference: HashSet<&String> = rankings[0].1.feature_names.iter().collect();
    for (stem, iv) in &rankings[1..] {
        let set: HashSet<&String> = iv.feature_names.iter().collect();
        if set != reference {
            return Err(Error::FeatureMismatch(format!(
                "{} and {} rank different feature sets",
                args.rankings[0].display(),
                stem
            )));
        }
    }

    let n_features = rankings[0].1.n_features();
    let grid = args
        .grid
        .clone()
        .unwrap_or_else(|| default_cutoff_grid(n_features));

    for i in 0..rankings.len() {
        for j in i + 1..rankings.len() {
            let curve = fuji_curve(&rankings[i].1, &rankings[j].1, &grid)?;
            let name = format!("fuji__{}__{}.csv", rankings[i].0, rankings[j].0);
            curve.write_csv(&args.out_dir.join(name))?;
        }
    }

    let vectors: Vec<ImportanceVector> = rankings.into_iter().map(|(_, iv)| iv).collect();
    let matrix = similarity_matrix(&vectors, &grid)?;
    let matrix_path = args.out_dir.join("similarity_matrix.csv");
    matrix.write_csv(&matrix_path)?;
    write_sidecar(
        &matrix_path,
        &Sidecar {
            command: "compare".into(),
            version: VERSION.into(),
            method: None,
            seed: None,
            standardize: None,
            input: None,
            target: None,
            params: serde_json::json!({
                "rankings": args.rankings.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                "grid": grid,
            }),
            metadata: BTreeMap::new(),
        },
    )
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let data = load_csv(&args.input, &args.target)?;
    let methods = args.methods.clone().unwrap_or_else(|| Method::ALL.to_vec());
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;

    let folds = stratified_kfold(&data, args.folds, args.seed)?;
    let grid = args
        .cutoffs
        .clone()
        .unwrap_or_else(|| default_cutoff_grid(data.n_features()));
    let options = SweepOptions {
        standardize: !args.no_standardize,
        ..SweepOptions::default()
    };

    for method in methods {
        let spec = ranker_spec(method, &args.san, &args.baseline, args.seed);
        let curve = topn_sweep(&data, &spec, &grid, &folds, &options)?;
        let out = args.out_dir.join(format!("eval_{method}.csv"));
        curve.write_csv(&out)?;
        write_sidecar(
            &out,
            &Sidecar {
                command: "evaluate".into(),
                version: VERSION.into(),
                method: Some(method.to_string()),
                seed: Some(args.seed),
                standardize: Some(!args.no_standardize),
                input: Some(args.input.display().to_string()),
                target: Some(args.target.to_string()),
                params: serde_json::json!({
                    "ranker": spec_params_json(&spec),
                    "folds": args.folds,
                    "cutoffs": grid,
                }),
                metadata: BTreeMap::new(),
            },
        )?;
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let data = make_classification(args.samples, args.features, args.informative, args.seed)?;
    write_csv(&data, &args.out, "class")?;
    let mask = data.relevance_mask().expect("synthetic data has a mask");
    write_relevance_mask(mask, &args.out.with_extension("mask.csv"))?;
    write_sidecar(
        &args.out,
        &Sidecar {
            command: "synth".into(),
            version: VERSION.into(),
            method: None,
            seed: Some(args.seed),
            standardize: None,
            input: None,
            target: Some("class".into()),
            params: serde_json::json!({
                "samples": args.samples,
                "features": args.features,
                "informative": args.informative,
            }),
            metadata: BTreeMap::new(),
        },
    )
}

fn attention_series_csv(report_csv: &Path, pos: &[f64], neg: &[f64]) -> Result<()> {
    let mut out = String::from("feature,mean_attention_positive,mean_attention_negative\n");
    if !pos.is_empty() && !neg.is_empty() {
        for (j, (p, n)) in pos.iter().zip(neg).enumerate() {
            out.push_str(&format!("f{j},{p},{n}\n"));
        }
    }
    std::fs::write(report_csv, out).map_err(|e| Error::io(report_csv, e))
}

pub fn attn_diff(args: AttnDiffArgs) -> Result<()> {
    let config = san_config(&args.san, args.seed);
    let report = attention_difference_experiment(
        args.samples,
        args.features,
        args.informative,
        args.reps,
        args.folds,
        &config,
        args.seed,
    )?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    std::fs::write(&args.out, json).map_err(|e| Error::io(&args.out, e))?;

    // Two plottable series over the feature axis.
    attention_series_csv(
        &args.out.with_extension("csv"),
        &report.mean_attention_positive,
        &report.mean_attention_negative,
    )?;

    write_sidecar(
        &args.out,
        &Sidecar {
            command: "attn-diff".into(),
            version: VERSION.into(),
            method: None,
            seed: Some(args.seed),
            standardize: Some(true),
            input: None,
            target: None,
            params: serde_json::json!({
                "samples": args.samples,
                "features": args.features,
                "informative": args.informative,
                "repetitions": args.reps,
                "folds": args.folds,
                "san": serde_json::to_value(&config).expect("config serializes"),
            }),
            metadata: BTreeMap::new(),
        },
    )
}
