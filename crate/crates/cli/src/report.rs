use std::fmt::Write;

use psc_core::data::SplitIndices;
use psc_core::eval::MetricsLine;
use psc_core::{FeatureImportance, LabeledDataset, SubspaceEstimate};

use crate::commands::Selection;
use crate::config::RunConfig;

pub struct ReportInput<'a> {
    pub cfg: &'a RunConfig,
    pub data: &'a LabeledDataset,
    pub indices: &'a SplitIndices,
    pub metrics: &'a [MetricsLine],
    pub selection: &'a Selection,
    pub chain_k: usize,
    pub estimate: &'a SubspaceEstimate,
    pub importance: &'a FeatureImportance,
    pub baselines: Option<&'a [MetricsLine]>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn best(lines: &[MetricsLine], method: &str) -> Option<(usize, f64)> {
    lines
        .iter()
        .filter(|l| l.method == method)
        .fold(None, |acc: Option<(usize, f64)>, l| match acc {
            Some((_, e)) if e <= l.error_rate => acc,
            _ => Some((l.k, l.error_rate)),
        })
}

/// Principal directions: one row per feature, loadings then norm and score.
pub fn directions_table(imp: &FeatureImportance) -> String {
    let k = imp.loadings.first().map_or(0, Vec::len);
    let width = imp.names.iter().map(String::len).max().unwrap_or(7).max(7);
    let mut s = String::new();
    let _ = write!(s, "{:<width$}", "feature");
    for j in 1..=k {
        let _ = write!(s, " {:>8}", format!("dir {j}"));
    }
    let _ = writeln!(s, " {:>8} {:>8}", "norm", "score");
    for (i, name) in imp.names.iter().enumerate() {
        let _ = write!(s, "{name:<width$}");
        for v in &imp.loadings[i] {
            let _ = write!(s, " {v:>8.3}");
        }
        let _ = writeln!(s, " {:>8.3} {:>8.3}", imp.norms[i], imp.scores[i]);
    }
    s
}

pub fn render(r: &ReportInput) -> String {
    let mut s = String::new();
    let d = r.data;
    let counts: Vec<String> = d.class_names.iter().zip(d.class_counts()).map(|(c, n)| format!("{c}: {n}")).collect();
    let _ = writeln!(s, "dataset   {}", r.cfg.dataset.path().display());
    let _ = writeln!(s, "rows      {} ({}), features {}", d.len(), counts.join(", "), d.dim());
    let _ = writeln!(
        s,
        "split     train {}, test {} (seed {}, {})",
        r.indices.train.len(),
        r.indices.test.len(),
        r.cfg.split.seed,
        if r.cfg.split.stratified { "stratified" } else { "unstratified" }
    );
    let scale = serde_json::to_value(r.cfg.scale).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let _ = writeln!(s, "scaling   {scale}");
    let _ = writeln!(
        s,
        "sampler   {} iterations, {} burn-in, thin {}, T = {}, seed {}",
        r.cfg.sampler.iterations, r.cfg.sampler.burn_in, r.cfg.sampler.thin, r.cfg.sampler.truncation, r.cfg.sampler.seed
    );

    let _ = writeln!(s, "\nheld-out performance");
    let _ = writeln!(s, "{:<6} {:>3} {:>8} {:>8} {:>10}", "method", "k", "error", "auc", "auc-error");
    for l in r.metrics {
        let _ = writeln!(
            s,
            "{:<6} {:>3} {:>8.4} {:>8} {:>10}",
            l.method,
            l.k,
            l.error_rate,
            opt(l.auc),
            opt(l.auc_minus_error)
        );
    }
    let _ = writeln!(s, "selected k = {} (criterion {}, k <= {})", r.selection.k, r.selection.criterion, r.selection.k_max);

    if let Some(b) = r.baselines {
        let _ = writeln!(s, "\nbaselines (best on the test split)");
        if let Some((g, e)) = best(b, "knn") {
            let _ = writeln!(s, "knn    {g:>3} neighbours   error {e:.4}");
        }
        if let Some((g, e)) = best(b, "gmm") {
            let _ = writeln!(s, "gmm    {g:>3} components   error {e:.4}");
        }
    }

    let _ = writeln!(
        s,
        "\nprincipal directions (estimated dimension {}, from the k = {} chain{})",
        r.estimate.k_hat,
        r.chain_k,
        if r.estimate.unique { "" } else { "; minimizer not unique" }
    );
    s.push_str(&directions_table(r.importance));
    let top: Vec<&str> = r.importance.top(3);
    let _ = writeln!(s, "most important: {}", top.join(", "));
    s
}
