use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use nalgebra::DMatrix;
use psc_core::baselines::{gmm_discriminant_fit_predict, knn_sweep, KnnConfig};
use psc_core::data::{apply_standardization, generate_synthetic, split, standardize, SplitIndices};
use psc_core::eval::{posterior_predict_dataset, read_eval_metrics, write_eval_metrics, write_roc, MetricsLine};
use psc_core::io::{read_chain, sha256_file, sha256_json, write_chain, write_json, write_metrics, ChainRecord, MetricsRow, RunMetadata};
use psc_core::{
    estimate_subspace, evaluate, feature_importance, posterior_means, posterior_predict, run_chain, select_k, LabeledDataset, PosteriorChain,
    Standardization, SubspaceEstimate, SyntheticSpec,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetConfig, RunConfig};
use crate::report;
use crate::run_dir::RunDir;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSummary {
    pub k: usize,
    pub seed: u64,
    pub draws: usize,
    pub frame_acceptance_burn_in: f64,
    pub frame_acceptance: f64,
    pub final_step: f64,
    pub mean_log_joint: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    pub k: usize,
    pub k_max: usize,
    /// `auc-minus-error` when every candidate has an AUC, otherwise `error`.
    pub criterion: String,
    pub candidates: Vec<usize>,
}

/// Per-chain seed; distinct across `k` so chains never share a stream.
pub fn chain_seed(base: u64, k: usize) -> u64 {
    base.wrapping_add(k as u64)
}

/// Dataset, split and transform of a fitted run, rebuilt from its artifacts.
pub struct Prepared {
    pub cfg: RunConfig,
    pub full: LabeledDataset,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub transform: Standardization,
    pub positive: usize,
}

impl Prepared {
    pub fn load(dir: &RunDir) -> Result<Self> {
        let cfg: RunConfig = dir.read(&dir.config(), "fit")?;
        let meta: RunMetadata = dir.read(&dir.metadata(), "fit")?;
        let indices: SplitIndices = dir.read(&dir.split(), "fit")?;
        let transform: Standardization = dir.read(&dir.transform(), "fit")?;
        let digest = sha256_file(cfg.dataset.path()).with_context(|| format!("reading dataset {}", cfg.dataset.path().display()))?;
        if digest != meta.dataset_sha256 {
            bail!("dataset {} changed since the run was fit (sha256 {digest}, expected {})", cfg.dataset.path().display(), meta.dataset_sha256);
        }
        let (full, _) = cfg.dataset.load()?;
        let train = apply_standardization(&full.subset(&indices.train), &transform)?;
        let test = apply_standardization(&full.subset(&indices.test), &transform)?;
        let positive = cfg.positive_index(&full)?;
        Ok(Self {
            cfg,
            full,
            train,
            test,
            transform,
            positive,
        })
    }

    pub fn k_values(&self) -> Result<Vec<usize>> {
        self.cfg.k_values(self.full.dim())
    }
}

pub fn load_chain(dir: &RunDir, k: usize) -> Result<PosteriorChain> {
    let path = dir.chain(k);
    dir.require(&path, &format!("fit --k {k}"))?;
    let records = read_chain(&path).with_context(|| format!("reading {}", path.display()))?;
    let chain = PosteriorChain::from_records(&records).with_context(|| format!("rebuilding chain from {}", path.display()))?;
    if chain.k != k {
        bail!("{} holds draws with k={}, expected {k}", path.display(), chain.k);
    }
    Ok(chain)
}

/// `--k` when given, else the selected dimension.
fn resolve_k(dir: &RunDir, k: Option<usize>) -> Result<usize> {
    match k {
        Some(k) => Ok(k),
        None => {
            let sel: Selection = dir.read(&dir.selection(), "select-k")?;
            Ok(sel.k)
        }
    }
}

pub fn fit(config: &Path, out: &Path, seed: Option<u64>, k: Option<usize>) -> Result<()> {
    let cfg = RunConfig::from_file(config)?.with_seed(seed).with_k(k);
    let (full, summary) = cfg.dataset.load()?;
    cfg.validate(&full)?;
    info!(
        "loaded {} rows ({} dropped), {} features, class counts {:?}",
        full.len(),
        summary.rows_dropped,
        full.dim(),
        summary.class_counts
    );
    let dir = RunDir::new(out);
    fs::create_dir_all(dir.chains()).with_context(|| format!("creating {}", dir.chains().display()))?;
    let mut meta = RunMetadata::start(cfg.sampler.seed, sha256_json(&cfg)?, sha256_file(cfg.dataset.path())?);
    write_json(&dir.config(), &cfg)?;

    let (train_raw, _, indices) = split(&full, &cfg.split)?;
    let (train, transform) = standardize(&train_raw, cfg.scale)?;
    write_json(&dir.split(), &indices)?;
    write_json(&dir.transform(), &transform)?;
    let data = train.training_data()?;

    let ks = cfg.k_values(full.dim())?;
    info!("fitting k in {ks:?} on {} training rows", data.len());
    ks.par_iter()
        .map(|&k| -> Result<()> {
            let mut sampler = cfg.sampler.clone();
            sampler.seed = chain_seed(cfg.sampler.seed, k);
            let chain = run_chain(&data, k, &cfg.prior, &sampler).with_context(|| format!("sampling k={k}"))?;
            write_chain(&dir.chain(k), &chain.to_records())?;
            let d = &chain.diagnostics;
            let rows: Vec<MetricsRow> = (0..d.log_joint.len())
                .map(|iter| MetricsRow {
                    k,
                    iter,
                    log_joint: d.log_joint[iter],
                    sigma0: d.sigma0[iter],
                    occupied_atoms: d.occupied_atoms[iter],
                })
                .collect();
            write_metrics(&dir.trace(k), &rows)?;
            let summary = ChainSummary {
                k,
                seed: sampler.seed,
                draws: chain.len(),
                frame_acceptance_burn_in: d.frame_acceptance_burn_in,
                frame_acceptance: d.frame_acceptance,
                final_step: d.final_step,
                mean_log_joint: chain.draw_log_joint.iter().sum::<f64>() / chain.len().max(1) as f64,
            };
            write_json(&dir.diagnostics(k), &summary)?;
            info!("k={k}: {} draws, frame acceptance {:.3}", chain.len(), d.frame_acceptance);
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;

    meta.finish();
    write_json(&dir.metadata(), &meta)?;
    Ok(())
}

pub fn select(out: &Path) -> Result<()> {
    let dir = RunDir::new(out);
    let prep = Prepared::load(&dir)?;
    let ks = prep.k_values()?;
    let mut reports = Vec::new();
    let mut lines = Vec::new();
    fs::create_dir_all(dir.root().join("roc"))?;
    for &k in &ks {
        let chain = load_chain(&dir, k)?;
        let pred = posterior_predict_dataset(&chain, &prep.test, Some(&prep.transform))?;
        let report = evaluate(&pred, &prep.test.labels, prep.positive)?;
        if !report.roc.is_empty() {
            write_roc(&dir.roc(k), &report.roc)?;
        }
        info!("k={k}: error {:.4}, auc {:?}", report.error_rate, report.auc);
        lines.push(MetricsLine::new("psc", k, &report));
        reports.push((k, report));
    }
    write_eval_metrics(&dir.metrics(), &lines)?;
    let k_max = prep.cfg.k_max.unwrap_or(usize::MAX);
    let k = select_k(&reports, k_max)?;
    let criterion = if reports.iter().all(|(_, r)| r.auc.is_some()) { "auc-minus-error" } else { "error" };
    write_json(
        &dir.selection(),
        &Selection {
            k,
            k_max: k_max.min(prep.full.dim()),
            criterion: criterion.into(),
            candidates: ks,
        },
    )?;
    info!("selected k={k}");
    Ok(())
}

/// Feature rows for prediction: a CSV with a header and one column per training feature.
fn read_features(path: &Path, names: &[String]) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != names {
        bail!("{}: header {header:?} does not match training features {names:?}", path.display());
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .with_context(|| format!("{}: row {}, column {}: not a number: {cell:?}", path.display(), i + 2, j + 1))?;
            values.push(v);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, names.len(), &values))
}

pub fn predict(out: &Path, k: Option<usize>, input: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let dir = RunDir::new(out);
    let prep = Prepared::load(&dir)?;
    let k = resolve_k(&dir, k)?;
    let chain = load_chain(&dir, k)?;
    let (pred, truth) = match input {
        Some(path) => {
            let raw = read_features(path, &prep.full.feature_names)?;
            (posterior_predict(&chain, &prep.transform.apply(&raw)?)?, None)
        }
        None => (posterior_predict_dataset(&chain, &prep.test, Some(&prep.transform))?, Some(&prep.test.labels)),
    };
    let target = output.map(Path::to_path_buf).unwrap_or_else(|| dir.predictions());
    let mut w = csv::Writer::from_path(&target).with_context(|| format!("creating {}", target.display()))?;
    let mut header = vec!["row".to_string()];
    header.extend(prep.full.class_names.iter().map(|c| format!("p_{c}")));
    header.push("predicted".into());
    if truth.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for i in 0..pred.probs.nrows() {
        let mut rec = vec![i.to_string()];
        rec.extend(pred.probs.row(i).iter().map(|p| p.to_string()));
        rec.push(prep.full.class_names[pred.predicted[i]].clone());
        if let Some(t) = truth {
            rec.push(prep.full.class_names[t[i]].clone());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    info!("wrote {} predictions at k={k} to {}", pred.probs.nrows(), target.display());
    Ok(())
}

pub fn estimate(out: &Path, k: Option<usize>) -> Result<()> {
    let dir = RunDir::new(out);
    let cfg: RunConfig = dir.read(&dir.config(), "fit")?;
    let k = resolve_k(&dir, k)?;
    let chain = load_chain(&dir, k)?;
    let (r_bar, theta_bar) = posterior_means(&chain)?;
    let est = estimate_subspace(&r_bar, &theta_bar)?;
    let (full, _) = cfg.dataset.load()?;
    let names = &full.feature_names;
    let imp = feature_importance(&est, names)?;
    fs::create_dir_all(dir.estimate_dir())?;

    let mut w = csv::Writer::from_path(dir.subspace())?;
    let mut header = vec!["feature".to_string()];
    header.extend(names.iter().cloned());
    header.push("theta".into());
    w.write_record(&header)?;
    for i in 0..names.len() {
        let mut rec = vec![names[i].clone()];
        rec.extend(est.r_hat.row(i).iter().map(|v| v.to_string()));
        rec.push(est.theta_hat[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.importance())?;
    let mut header = vec!["feature".to_string()];
    header.extend((1..=est.k_hat).map(|j| format!("dir{j}")));
    header.extend(["norm".to_string(), "score".to_string()]);
    w.write_record(&header)?;
    for i in 0..names.len() {
        let mut rec = vec![names[i].clone()];
        rec.extend(imp.loadings[i].iter().map(|v| v.to_string()));
        rec.push(imp.norms[i].to_string());
        rec.push(imp.scores[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;

    write_json(&dir.estimate_json(), &EstimateFile { chain_k: k, estimate: est })?;
    info!("estimated subspace from k={k} chain; top features {:?}", imp.top(3));
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateFile {
    pub chain_k: usize,
    pub estimate: SubspaceEstimate,
}

pub fn baseline(out: &Path) -> Result<()> {
    let dir = RunDir::new(out);
    let prep = Prepared::load(&dir)?;
    let knn = knn_sweep(
        &prep.train,
        &prep.test,
        &KnnConfig {
            grid: prep.cfg.baselines.knn_grid.clone(),
        },
    )?;
    let gmm = gmm_discriminant_fit_predict(&prep.train, &prep.test, &prep.cfg.baselines.gmm_grid, prep.cfg.split.seed)?;
    let mut lines = Vec::new();
    for (method, sweep) in [("knn", &knn), ("gmm", &gmm)] {
        for &(g, e) in &sweep.errors {
            lines.push(MetricsLine {
                method: method.into(),
                k: g,
                error_rate: e,
                auc: None,
                auc_minus_error: None,
            });
        }
    }
    write_eval_metrics(&dir.baselines(), &lines)?;
    info!("knn best {} (error {:.4}); gmm best {} (error {:.4})", knn.best, knn.error, gmm.best, gmm.error);
    Ok(())
}

pub fn report(out: &Path) -> Result<()> {
    let dir = RunDir::new(out);
    let cfg: RunConfig = dir.read(&dir.config(), "fit")?;
    let indices: SplitIndices = dir.read(&dir.split(), "fit")?;
    dir.require(&dir.metrics(), "select-k")?;
    let metrics = read_eval_metrics(&dir.metrics())?;
    let sel: Selection = dir.read(&dir.selection(), "select-k")?;
    let est: EstimateFile = dir.read(&dir.estimate_json(), "estimate")?;
    let baselines = if dir.baselines().exists() { Some(read_eval_metrics(&dir.baselines())?) } else { None };
    let (full, _) = cfg.dataset.load()?;
    let imp = feature_importance(&est.estimate, &full.feature_names)?;
    let text = report::render(&report::ReportInput {
        cfg: &cfg,
        data: &full,
        indices: &indices,
        metrics: &metrics,
        selection: &sel,
        chain_k: est.chain_k,
        estimate: &est.estimate,
        importance: &imp,
        baselines: baselines.as_deref(),
    });
    fs::write(dir.report(), &text)?;
    print!("{text}");
    Ok(())
}

pub fn run_all(config: &Path, out: &Path, seed: Option<u64>, k: Option<usize>) -> Result<()> {
    fit(config, out, seed, k)?;
    select(out)?;
    estimate(out, None)?;
    baseline(out)?;
    predict(out, None, None, None)?;
    report(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Truth {
    pub spec: SyntheticSpec,
    pub state: ChainRecord,
    pub projection: Vec<Vec<f64>>,
}

/// Simulate a dataset; writes `data.csv`, `truth.json` and a starter `run.json`.
pub fn synth(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut spec: SyntheticSpec =
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: line {}, column {}: {e}", config.display(), e.line(), e.column()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (data, truth) = generate_synthetic(&spec)?;
    fs::create_dir_all(out)?;
    let data_path = out.join("data.csv");
    let mut w = csv::Writer::from_path(&data_path)?;
    let mut header = data.feature_names.clone();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.class_names[data.labels[i]].clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    let p = truth.frame().projection();
    write_json(
        &out.join("truth.json"),
        &Truth {
            spec: spec.clone(),
            state: ChainRecord::from_state(0, &truth, 0.0),
            projection: (0..p.nrows()).map(|i| p.row(i).iter().copied().collect()).collect(),
        },
    )?;
    let run = serde_json::json!({
        "dataset": DatasetConfig::Csv { path: PathBuf::from("data.csv"), schema: Default::default() },
        "k_grid": [spec.k],
    });
    fs::write(out.join("run.json"), serde_json::to_string_pretty(&run)? + "\n")?;
    info!("simulated {} rows in {} dimensions to {}", data.len(), spec.m, data_path.display());
    Ok(())
}
