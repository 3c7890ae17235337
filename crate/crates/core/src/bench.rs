//! Multi-method comparison harness and the margin sweep: trains every
//! requested configuration on identical splits and emits table- and
//! plot-ready summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::losses::Method;
use crate::ordinal::OrdinalDataset;
use crate::trainer::{self, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    pub accuracy: f64,
    pub mae: f64,
    pub inconsistency_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Marks the best and second-best entries of a column: `*best*` and
/// `_second_`, ties sharing a marker. `higher_is_better` flips the ordering
/// for accuracy versus MAE.
fn column_markers(values: &[f64], higher_is_better: bool) -> Vec<&'static str> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if higher_is_better {
        distinct.reverse();
    }
    values
        .iter()
        .map(|v| {
            if distinct.first() == Some(v) {
                "*"
            } else if distinct.len() > 1 && distinct.get(1) == Some(v) {
                "_"
            } else {
                ""
            }
        })
        .collect()
}

impl ComparisonTable {
    /// Aligned plain-text table with best/second-best marks on the accuracy
    /// and MAE columns.
    pub fn render_text(&self) -> String {
        let acc: Vec<f64> = self.rows.iter().map(|r| r.accuracy).collect();
        let mae: Vec<f64> = self.rows.iter().map(|r| r.mae).collect();
        let acc_marks = column_markers(&acc, true);
        let mae_marks = column_markers(&mae, false);

        let mut cells: Vec<[String; 4]> = vec![[
            "method".into(),
            "accuracy".into(),
            "mae".into(),
            "inconsistency_rate".into(),
        ]];
        for (row, (am, mm)) in self.rows.iter().zip(acc_marks.iter().zip(&mae_marks)) {
            let mark = |m: &str, v: f64| {
                if m.is_empty() {
                    format!("{v:.4}")
                } else {
                    format!("{m}{v:.4}{m}")
                }
            };
            cells.push([
                row.method.name().to_string(),
                mark(am, row.accuracy),
                mark(mm, row.mae),
                row.inconsistency_rate
                    .map_or_else(|| "-".to_string(), |r| format!("{r:.4}")),
            ]);
        }

        let mut widths = [0usize; 4];
        for row in &cells {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        for row in &cells {
            for (col, cell) in row.iter().enumerate() {
                if col > 0 {
                    out.push_str("  ");
                }
                let _ = write!(out, "{:<width$}", cell, width = widths[col]);
            }
            while out.ends_with(' ') {
                out.pop();
            }
            out.push('\n');
        }
        out
    }

    /// Machine-readable form, full float precision.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("method,accuracy,mae,inconsistency_rate\n");
        for row in &self.rows {
            let inconsistency = row
                .inconsistency_rate
                .map_or_else(String::new, |r| format!("{r}"));
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.method.name(),
                row.accuracy,
                row.mae,
                inconsistency
            );
        }
        out
    }
}

fn annotate(err: Error, context: &str) -> Error {
    match err {
        Error::NumericFault(msg) => Error::NumericFault(format!("{context}: {msg}")),
        other => Error::InvalidConfig(format!("{context}: {other}")),
    }
}

/// Runs `jobs` closures over an indexed task list on scoped worker threads,
/// collecting results by slot so assembly order cannot depend on scheduling.
fn run_indexed<T: Send, F: Fn(usize) -> Result<T> + Sync>(
    tasks: usize,
    jobs: usize,
    work: F,
) -> Result<Vec<T>> {
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..tasks).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(tasks.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= tasks {
                    break;
                }
                let outcome = work(index);
                slots.lock().unwrap()[index] = Some(outcome);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every task slot is filled"))
        .collect()
}

/// Trains every method on the identical splits and seed, evaluates on the
/// test split, and writes per-method artifacts under `out_dir/<method>/`.
pub fn compare(
    methods: &[Method],
    ds_train: &OrdinalDataset,
    ds_val: &OrdinalDataset,
    ds_test: &OrdinalDataset,
    base: &TrainConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<ComparisonTable> {
    if methods.is_empty() {
        return Err(Error::InvalidConfig(
            "compare requires at least one method".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let rows = run_indexed(methods.len(), jobs, |index| {
        let method = methods[index];
        let cfg = TrainConfig {
            method,
            ..base.clone()
        };
        let run_dir = out_dir.join(method.name());
        let run = (|| -> Result<ComparisonRow> {
            let outcome = trainer::train(ds_train, ds_val, &cfg, &run_dir)?;
            let report =
                trainer::evaluate(&outcome.model, ds_test, trainer::validation_head(&cfg))?;
            Ok(ComparisonRow {
                method,
                accuracy: report.accuracy,
                mae: report.mae,
                inconsistency_rate: report.inconsistency_rate,
            })
        })();
        run.map_err(|e| annotate(e, method.name()))
    })?;
    Ok(ComparisonTable { rows })
}

/// One point of the margin sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub gamma: f64,
    pub accuracy: f64,
    pub mae: f64,
}

pub fn render_sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("gamma,accuracy,mae\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.gamma, p.accuracy, p.mae);
    }
    out
}

/// One ranking-loss training run per margin value, all else fixed. Margins
/// that empty the feasible region are rejected up front unless the caller
/// explicitly allows them.
pub fn sweep_gamma(
    gammas: &[f64],
    ds_train: &OrdinalDataset,
    ds_val: &OrdinalDataset,
    ds_test: &OrdinalDataset,
    base: &TrainConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<Vec<SweepPoint>> {
    if gammas.is_empty() {
        return Err(Error::InvalidConfig(
            "sweep requires at least one margin value".into(),
        ));
    }
    for &gamma in gammas {
        let cfg = TrainConfig {
            method: Method::Thor,
            gamma,
            ..base.clone()
        };
        // Feasibility is vetted for the whole sweep before any training runs.
        cfg.resolve_boundaries(ds_train.k())?;
    }
    std::fs::create_dir_all(out_dir)?;
    let points = run_indexed(gammas.len(), jobs, |index| {
        let gamma = gammas[index];
        let cfg = TrainConfig {
            method: Method::Thor,
            gamma,
            ..base.clone()
        };
        let run_dir = out_dir.join(format!("gamma-{gamma}"));
        let run = (|| -> Result<SweepPoint> {
            let outcome = trainer::train(ds_train, ds_val, &cfg, &run_dir)?;
            let report = trainer::evaluate(&outcome.model, ds_test, None)?;
            Ok(SweepPoint {
                gamma,
                accuracy: report.accuracy,
                mae: report.mae,
            })
        })();
        run.map_err(|e| annotate(e, &format!("gamma={gamma}")))
    })?;
    Ok(points)
}

/// Writes the comparison artifacts: the table in the chosen format.
pub fn write_table(table: &ComparisonTable, out_dir: &Path, csv: bool) -> Result<PathBuf> {
    let (name, contents) = if csv {
        ("compare.csv", table.render_csv())
    } else {
        ("compare.txt", table.render_text())
    };
    let path = out_dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}
