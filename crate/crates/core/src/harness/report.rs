//! Run records, their CSV form, and the markdown tables.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::method::MethodSpec;
use super::run::Outcome;
use super::split::SplitSpec;
use crate::error::{Error, Result};

pub const SPLIT_HEADER: &str = "Data Split % (Training / Test)";
pub const ADAPTATION_FLAG: &str = "classical-analog adaptation";
const CSV_HEADER: [&str; 10] = [
    "experiment",
    "method",
    "mode",
    "split",
    "train_fraction",
    "shuffle",
    "shuffle_seed",
    "accuracy",
    "chosen_c",
    "confusion",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Baseline,
    Adapted,
    SynthOnly,
}

impl RunMode {
    pub fn tag(self) -> &'static str {
        match self {
            RunMode::Baseline => "baseline",
            RunMode::Adapted => "adapted",
            RunMode::SynthOnly => "synth-only",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [RunMode::Baseline, RunMode::Adapted, RunMode::SynthOnly]
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown run mode {s:?}")))
    }
}

/// One (method, split, shuffle, mode) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// `"benchmark"` or `"adaptation"`.
    pub experiment: String,
    pub method: String,
    pub mode: RunMode,
    /// `"80/20"` style.
    pub split: String,
    pub train_fraction: f64,
    pub shuffle: usize,
    pub shuffle_seed: u64,
    pub accuracy: f64,
    pub chosen_c: Option<f64>,
    pub confusion: Vec<Vec<usize>>,
}

impl RunRecord {
    pub fn new(
        experiment: &str,
        method: &MethodSpec,
        mode: RunMode,
        spec: &SplitSpec,
        shuffle: usize,
        shuffle_seed: u64,
        outcome: Outcome,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            method: method.name(),
            mode,
            split: spec.label(),
            train_fraction: spec.train_fraction,
            shuffle,
            shuffle_seed,
            accuracy: outcome.accuracy,
            chosen_c: outcome.chosen_c,
            confusion: outcome.confusion,
        }
    }
}

fn encode_confusion(m: &[Vec<usize>]) -> String {
    m.iter()
        .map(|row| {
            row.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn decode_confusion(s: &str) -> Result<Vec<Vec<usize>>> {
    s.split(';')
        .map(|row| {
            row.split(' ')
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::invalid(format!("bad confusion entry {v:?}")))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            _ => Err(Error::invalid(format!(
                "unknown report format {s:?} (expected csv or md)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
}

/// Averaged accuracy of one (method, split) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub method: String,
    pub split: String,
    pub mean: f64,
    pub shuffles: usize,
}

/// Adaptation summary of one (method, split).
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub split: String,
    pub baseline: f64,
    pub adapted: f64,
    pub synth_only: Option<f64>,
    pub delta: f64,
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

impl ExperimentReport {
    pub fn new(runs: Vec<RunRecord>) -> Self {
        Self { runs }
    }

    fn select<'a>(
        &'a self,
        experiment: &'a str,
        mode: RunMode,
    ) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.runs
            .iter()
            .filter(move |r| r.experiment == experiment && r.mode == mode)
    }

    fn mean_of(
        &self,
        experiment: &str,
        mode: RunMode,
        method: &str,
        split: &str,
    ) -> Option<(f64, usize)> {
        let accs: Vec<f64> = self
            .select(experiment, mode)
            .filter(|r| r.method == method && r.split == split)
            .map(|r| r.accuracy)
            .collect();
        (!accs.is_empty()).then(|| (accs.iter().sum::<f64>() / accs.len() as f64, accs.len()))
    }

    /// Methods in order of first appearance.
    pub fn methods(&self, experiment: &str) -> Vec<String> {
        first_seen(
            self.runs
                .iter()
                .filter(|r| r.experiment == experiment)
                .map(|r| r.method.as_str()),
        )
    }

    pub fn splits(&self, experiment: &str) -> Vec<String> {
        first_seen(
            self.runs
                .iter()
                .filter(|r| r.experiment == experiment)
                .map(|r| r.split.as_str()),
        )
    }

    /// Mean baseline accuracy per (method, split) of the benchmark runs.
    pub fn averaged(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for method in self.methods("benchmark") {
            for split in self.splits("benchmark") {
                if let Some((mean, shuffles)) =
                    self.mean_of("benchmark", RunMode::Baseline, &method, &split)
                {
                    cells.push(Cell {
                        method: method.clone(),
                        split,
                        mean,
                        shuffles,
                    });
                }
            }
        }
        cells
    }

    /// Adaptation rows of one method, per split.
    pub fn deltas(&self, method: &str) -> Vec<DeltaRow> {
        self.splits("adaptation")
            .into_iter()
            .filter_map(|split| {
                let (baseline, _) =
                    self.mean_of("adaptation", RunMode::Baseline, method, &split)?;
                let (adapted, _) = self.mean_of("adaptation", RunMode::Adapted, method, &split)?;
                let synth_only = self
                    .mean_of("adaptation", RunMode::SynthOnly, method, &split)
                    .map(|m| m.0);
                Some(DeltaRow {
                    split,
                    baseline,
                    adapted,
                    synth_only,
                    delta: adapted - baseline,
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.runs {
            w.write_record([
                r.experiment.clone(),
                r.method.clone(),
                r.mode.to_string(),
                r.split.clone(),
                r.train_fraction.to_string(),
                r.shuffle.to_string(),
                r.shuffle_seed.to_string(),
                r.accuracy.to_string(),
                r.chosen_c.map(|c| c.to_string()).unwrap_or_default(),
                encode_confusion(&r.confusion),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 csv")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let csv_err = |e: csv::Error| Error::invalid(format!("runs csv: {e}"));
        let header = rd.headers().map_err(csv_err)?;
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::invalid(format!(
                "runs csv header {header:?} does not match {CSV_HEADER:?}"
            )));
        }
        let mut runs = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| {
                    Error::invalid(format!(
                        "bad number {:?} in column {}",
                        &rec[i], CSV_HEADER[i]
                    ))
                })
            };
            let int = |i: usize| -> Result<u64> {
                rec[i].parse().map_err(|_| {
                    Error::invalid(format!(
                        "bad integer {:?} in column {}",
                        &rec[i], CSV_HEADER[i]
                    ))
                })
            };
            runs.push(RunRecord {
                experiment: rec[0].to_string(),
                method: rec[1].to_string(),
                mode: rec[2].parse()?,
                split: rec[3].to_string(),
                train_fraction: num(4)?,
                shuffle: int(5)? as usize,
                shuffle_seed: int(6)?,
                accuracy: num(7)?,
                chosen_c: if rec[8].is_empty() {
                    None
                } else {
                    Some(num(8)?)
                },
                confusion: decode_confusion(&rec[9])?,
            });
        }
        Ok(Self { runs })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Averaged accuracies with splits as rows and methods as columns.
    pub fn averaged_table(&self) -> String {
        let methods = self.methods("benchmark");
        let mut out =
            table_header(std::iter::once(SPLIT_HEADER).chain(methods.iter().map(String::as_str)));
        for split in self.splits("benchmark") {
            let cells = methods.iter().map(|m| {
                self.mean_of("benchmark", RunMode::Baseline, m, &split)
                    .map_or_else(|| "n/a".to_string(), |(v, _)| format_accuracy(v))
            });
            out.push_str(&table_row(std::iter::once(split.clone()).chain(cells)));
        }
        out
    }

    /// Two-column split / accuracy-increase table of one method.
    pub fn delta_table(&self, method: &str) -> String {
        let mut out = table_header([SPLIT_HEADER, "Accuracy Increase"].into_iter());
        for row in self.deltas(method) {
            out.push_str(&table_row(
                [row.split, format_percent(row.delta)].into_iter(),
            ));
        }
        out
    }

    fn adaptation_detail(&self, method: &str) -> String {
        let mut out = table_header([SPLIT_HEADER, "Baseline", "Adapted", "Synth-only"].into_iter());
        for row in self.deltas(method) {
            out.push_str(&table_row(
                [
                    row.split,
                    format_accuracy(row.baseline),
                    format_accuracy(row.adapted),
                    row.synth_only.map_or_else(|| "n/a".into(), format_accuracy),
                ]
                .into_iter(),
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("# Vessel chip classification benchmark\n");
        let averaged = self.averaged();
        if !averaged.is_empty() {
            let shuffles = averaged.iter().map(|c| c.shuffles).max().unwrap_or(0);
            out.push_str(&format!(
                "\nMean test accuracy over {shuffles} shuffles.\n\n"
            ));
            out.push_str(&self.averaged_table());
        }
        let adapted = self.methods("adaptation");
        if !adapted.is_empty() {
            out.push_str(&format!("\n## Synthetic pretraining ({ADAPTATION_FLAG})\n"));
            for m in adapted {
                out.push_str(&format!("\n### {m}\n\n"));
                out.push_str(&self.delta_table(&m));
                out.push('\n');
                out.push_str(&self.adaptation_detail(&m));
            }
        }
        out
    }
}

/// Renders the runs as CSV or as markdown tables.
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    if report.runs.is_empty() {
        return Err(Error::invalid("report has no runs"));
    }
    Ok(match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Markdown => report.to_markdown(),
    })
}

fn table_header<'a>(cols: impl Iterator<Item = &'a str>) -> String {
    let cols: Vec<&str> = cols.collect();
    let mut out = table_row(cols.iter().map(|c| c.to_string()));
    out.push_str(&table_row(cols.iter().map(|_| "---".to_string())));
    out
}

fn table_row(cells: impl Iterator<Item = String>) -> String {
    let cells: Vec<String> = cells.collect();
    format!("| {} |\n", cells.join(" | "))
}

/// Four decimals, halves rounded away from zero.
pub fn format_accuracy(x: f64) -> String {
    round_decimal(x, 0, 4)
}

/// A fraction as a percentage with two decimals, e.g. `0.0634 -> "6.34%"`.
pub fn format_percent(x: f64) -> String {
    format!("{}%", round_decimal(x, 2, 2))
}

/// Rounds `x * 10^shift` to `decimals` places, working on the shortest
/// decimal representation of `x` so that ties written as ties stay ties.
pub fn round_decimal(x: f64, shift: i32, decimals: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let repr = format!("{}", x.abs());
    let (int, frac) = repr.split_once('.').unwrap_or((&repr, ""));
    let mut digits: Vec<u8> = int.bytes().chain(frac.bytes()).map(|b| b - b'0').collect();
    let mut point = int.len() as i64 + shift as i64;
    if point < 0 {
        let pad = (-point) as usize;
        digits.splice(0..0, std::iter::repeat_n(0, pad));
        point = 0;
    }
    let point = point as usize;
    let keep = point + decimals;
    if digits.len() < keep + 1 {
        digits.resize(keep + 1, 0);
    }
    let round_up = digits[keep] >= 5;
    digits.truncate(keep);
    let mut point = point;
    if round_up {
        let mut i = keep;
        loop {
            if i == 0 {
                digits.insert(0, 1);
                point += 1;
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let text = |d: &[u8]| d.iter().map(|v| (v + b'0') as char).collect::<String>();
    let int_part = text(&digits[..point]);
    let int_part = int_part.trim_start_matches('0');
    let int_part = if int_part.is_empty() { "0" } else { int_part };
    let frac_part = text(&digits[point..]);
    let negative = x < 0.0 && digits.iter().any(|&d| d != 0);
    let sign = if negative { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}
