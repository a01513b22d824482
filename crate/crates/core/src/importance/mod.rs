//! Feature-based form classifier (boosted trees over one-hot discourse
//! features) and model-agnostic importance measures.

mod encode;
mod gbdt;
mod permutation;
mod shapley;

use std::fmt::Write as _;

pub use encode::{encode, ColumnGroup, EncodedTable, Feature};
pub use gbdt::{
    fit_gbdt, log_loss, stratified_folds, train_gbdt, CvReport, GbdtConfig, GbdtModel, Node, TrainedGbdt, Tree,
};
pub use permutation::{permutation_importance, PermutationEntry, PermutationReport};
pub use shapley::{shapley_sample, BackgroundMode, ShapleyConfig, ShapleyEntry, ShapleyReport};

/// `feature, mean_loss_increase, std` rows, most important first.
pub fn permutation_tsv(report: &PermutationReport) -> String {
    let mut out = String::from("feature\tmean_loss_increase\tstd\n");
    for e in report.ranked() {
        let _ = writeln!(out, "{}\t{:.6}\t{:.6}", e.feature, e.mean, e.std);
    }
    out
}

pub fn permutation_svg(title: &str, report: &PermutationReport) -> String {
    let ranked = report.ranked();
    let labels: Vec<&str> = ranked.iter().map(|e| e.feature.as_str()).collect();
    let values: Vec<f64> = ranked.iter().map(|e| e.mean).collect();
    let errors: Vec<f64> = ranked.iter().map(|e| e.std).collect();
    crate::svg::bar_chart(title, &labels, &values, Some(&errors))
}

/// One row per (feature, ordering) contribution.
pub fn shapley_tsv(report: &ShapleyReport) -> String {
    let mut out = String::from("feature\tordering\tcontribution\n");
    for e in &report.features {
        for (i, v) in e.samples.iter().enumerate() {
            let _ = writeln!(out, "{}\t{i}\t{v:.6}", e.feature);
        }
    }
    out
}

pub fn shapley_svg(title: &str, report: &ShapleyReport) -> String {
    let labels: Vec<&str> = report.features.iter().map(|e| e.feature.as_str()).collect();
    let samples: Vec<Vec<f64>> = report.features.iter().map(|e| e.samples.clone()).collect();
    crate::svg::box_plot(title, &labels, &samples)
}
