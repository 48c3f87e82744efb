use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::store::write_atomic;
use crate::experiment::{CellSummary, RobustnessPoint, SweepResult};
use crate::training::MeanStd;

/// Rounds half away from zero at the third decimal.
pub fn fmt3(x: f64) -> String {
    format!("{:.3}", (x * 1000.0).round() / 1000.0)
}

pub fn fmt_pm(m: &MeanStd) -> String {
    format!("{} ± {}", fmt3(m.mean), fmt3(m.std))
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    /// `MLP` or `GNN`.
    pub model: String,
    pub config: String,
    pub auroc: MeanStd,
    pub acc: MeanStd,
    pub runtime_minutes: f64,
    pub runs: usize,
    pub run_ids: Vec<String>,
}

fn row(dataset: &str, model: &str, cell: &CellSummary) -> Option<ReportRow> {
    let s = cell.summary.as_ref()?;
    Some(ReportRow {
        dataset: dataset.to_string(),
        model: model.to_string(),
        config: cell.label.clone(),
        auroc: s.auroc,
        acc: s.acc,
        runtime_minutes: s.runtime_minutes,
        runs: s.runs.len(),
        run_ids: cell.run_ids.clone(),
    })
}

/// The baseline and the best graph cell of each dataset.
pub fn report_rows(sweeps: &[SweepResult]) -> Vec<ReportRow> {
    let mut out = Vec::new();
    for s in sweeps {
        out.extend(s.baseline.as_ref().and_then(|b| row(&s.dataset, "MLP", b)));
        out.extend(s.best_cell().and_then(|b| row(&s.dataset, "GNN", b)));
    }
    out
}

fn to_csv<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

pub fn render_csv(rows: &[ReportRow]) -> Result<String> {
    to_csv(
        &["dataset", "model", "config", "auroc_mean", "auroc_std", "acc_mean", "acc_std", "runtime_minutes", "runs"],
        rows.iter().map(|r| {
            (
                &r.dataset,
                &r.model,
                &r.config,
                r.auroc.mean,
                r.auroc.std,
                r.acc.mean,
                r.acc.std,
                r.runtime_minutes,
                r.runs,
            )
        }),
    )
}

/// Plain-text table with mean ± std at three decimals.
pub fn render_table(rows: &[ReportRow]) -> String {
    let header = ["Dataset", "Model", "AUROC", "ACC", "Runtime [min]", "Configuration"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.dataset.clone(),
                r.model.clone(),
                fmt_pm(&r.auroc),
                fmt_pm(&r.acc),
                fmt3(r.runtime_minutes),
                r.config.clone(),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for cols in &body {
        for (w, c) in widths.iter_mut().zip(cols) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cols: &[&str]| {
        let cells: Vec<String> = cols
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("{}\n", cells.join(" | ").trim_end())
    };
    let mut out = line(&header);
    out.push_str(&format!(
        "{}\n",
        widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-")
    ));
    for cols in &body {
        out.push_str(&line(&cols.iter().map(String::as_str).collect::<Vec<_>>()));
    }
    out
}

#[derive(Serialize)]
struct CellRow<'a> {
    dataset: &'a str,
    conv: &'static str,
    topology: String,
    k: String,
    auroc_mean: Option<f64>,
    auroc_std: Option<f64>,
    acc_mean: Option<f64>,
    acc_std: Option<f64>,
    runtime_minutes: Option<f64>,
    runs: usize,
    failures: usize,
    best: bool,
}

fn render_cells_csv(sweeps: &[SweepResult]) -> Result<String> {
    let rows = sweeps.iter().flat_map(|s| {
        s.cells.iter().chain(&s.baseline).map(move |c| {
            let (topology, k) = match &c.cell.topology {
                Some(t) => (t.name().to_string(), t.k().map_or("n/a".into(), |k| k.to_string())),
                None => ("n/a".into(), "n/a".into()),
            };
            let m = c.summary.as_ref();
            CellRow {
                dataset: &s.dataset,
                conv: c.cell.arch.label(),
                topology,
                k,
                auroc_mean: m.map(|m| m.auroc.mean),
                auroc_std: m.map(|m| m.auroc.std),
                acc_mean: m.map(|m| m.acc.mean),
                acc_std: m.map(|m| m.acc.std),
                runtime_minutes: m.map(|m| m.runtime_minutes),
                runs: m.map_or(0, |m| m.runs.len()),
                failures: c.failures.len(),
                best: s.best == Some(c.cell),
            }
        })
    });
    to_csv(
        &[
            "dataset", "conv", "topology", "k", "auroc_mean", "auroc_std", "acc_mean", "acc_std",
            "runtime_minutes", "runs", "failures", "best",
        ],
        rows,
    )
}

pub fn render_curve(points: &[RobustnessPoint]) -> Result<String> {
    to_csv(&["level", "auroc", "accuracy"], points.iter().map(|p| (p.level, p.auroc, p.accuracy)))
}

/// Writes `report.csv`, `report.txt`, `cells.csv` and one
/// `robustness/<name>.csv` per curve; returns the written paths.
pub fn write_report(
    out_dir: &Path,
    sweeps: &[SweepResult],
    curves: &[(String, Vec<RobustnessPoint>)],
) -> Result<Vec<PathBuf>> {
    let rows = report_rows(sweeps);
    let mut files = vec![
        (out_dir.join("report.csv"), render_csv(&rows)?),
        (out_dir.join("report.txt"), render_table(&rows)),
        (out_dir.join("cells.csv"), render_cells_csv(sweeps)?),
    ];
    for (name, points) in curves {
        files.push((out_dir.join("robustness").join(format!("{name}.csv")), render_curve(points)?));
    }
    for (path, text) in &files {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_rule() {
        let m = MeanStd {
            mean: 0.9175,
            std: 0.0042,
        };
        assert_eq!(fmt_pm(&m), "0.918 ± 0.004");
        assert_eq!(fmt3(0.0005), "0.001");
        assert_eq!(fmt3(1.0), "1.000");
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let m = MeanStd { mean: 0.5, std: 0.0 };
        let row = ReportRow {
            dataset: "a,b".into(),
            model: "GNN".into(),
            config: "SAGEConv / line / n/a".into(),
            auroc: m,
            acc: m,
            runtime_minutes: 1.0,
            runs: 3,
            run_ids: vec![],
        };
        let text = render_csv(&[row]).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("\"a,b\",GNN,"));
    }
}
