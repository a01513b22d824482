use std::fmt::Write as _;

use super::{Metrics, ProtocolReport};
use crate::svg;

/// Aligned-column per-class table followed by macro scores.
pub fn metrics_text(m: &Metrics) -> String {
    let mut s = format!(
        "{:<16} {:>9} {:>9} {:>9} {:>8}\n",
        "class", "precision", "recall", "f1", "support"
    );
    for c in &m.per_class {
        let _ = writeln!(
            s,
            "{:<16} {:>9.4} {:>9.4} {:>9.4} {:>8}",
            c.name, c.precision, c.recall, c.f1, c.support
        );
    }
    let _ = writeln!(
        s,
        "{:<16} {:>9.4} {:>9.4} {:>9.4} {:>8}",
        "macro",
        m.macro_precision,
        m.macro_recall,
        m.macro_f1,
        m.confusion.total()
    );
    let _ = writeln!(s, "accuracy {:.4}", m.accuracy);
    s
}

/// Tab-separated confusion matrix with a header row of predicted classes.
pub fn confusion_tsv(m: &Metrics) -> String {
    let names: Vec<&str> = m.per_class.iter().map(|c| c.name.as_str()).collect();
    let mut s = format!("gold\\predicted\t{}\n", names.join("\t"));
    for (name, row) in names.iter().zip(&m.confusion.counts) {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "{name}\t{}", cells.join("\t"));
    }
    s
}

pub fn confusion_svg(title: &str, m: &Metrics) -> String {
    let names: Vec<&str> = m.per_class.iter().map(|c| c.name.as_str()).collect();
    svg::heatmap(title, &names, &m.confusion.counts)
}

pub fn protocol_text(r: &ProtocolReport) -> String {
    let mut s = format!(
        "{} {} over {} seeds\n",
        r.architecture.name(),
        r.scheme.name(),
        r.runs.len()
    );
    let _ = writeln!(
        s,
        "{:<22} {:>6} {:>9} {:>9} {:>9} {:>9}",
        "seed", "epoch", "dev-F1", "test-P", "test-R", "test-F1"
    );
    for run in &r.runs {
        let _ = writeln!(
            s,
            "{:<22} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            run.seed,
            run.log.best_epoch,
            run.dev.macro_f1,
            run.test.macro_precision,
            run.test.macro_recall,
            run.test.macro_f1
        );
    }
    let m = &r.mean_test;
    let _ = writeln!(
        s,
        "{:<22} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
        "mean", "", r.mean_dev.macro_f1, m.macro_precision, m.macro_recall, m.macro_f1
    );
    let _ = writeln!(s, "mean test accuracy {:.4}", m.accuracy);
    s
}
