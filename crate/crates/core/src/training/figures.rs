//! Presets and driver for the train/test-gap experiments.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use plotters::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{train, BatchMode, Curves, Dataset, StudentArch, TaskMode, TrainConfig};
use crate::activation::ActivationSpec;
use crate::distributions::{sample, DistributionSpec};
use crate::error::{invalid, Error, Result};
use crate::family::{eval_f_rows, sample_labels, ConceptId, FamilySpec, LabelMode};
use crate::rng::derive_seed;
use crate::stats::median_iqr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1a,
    Fig1b,
    Fig2a,
    Fig2b,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig1a, Figure::Fig1b, Figure::Fig2a, Figure::Fig2b];

    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig1a => "fig1a",
            Figure::Fig1b => "fig1b",
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
        }
    }
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| invalid(format!("unknown figure '{s}' (expected fig1a, fig1b, fig2a or fig2b)")))
    }
}

/// Complete configuration of one figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigurePreset {
    pub target: FamilySpec,
    pub mode: TaskMode,
    pub student: StudentArch,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: BatchMode,
    pub init_scale: f64,
    pub train_size: usize,
    pub test_size: usize,
}

/// The captioned settings: `n = 14`, 6000 training and 1000 test points,
/// a student with five times as many units as the target.
pub fn preset(fig: Figure) -> FigurePreset {
    let (k, inner, outer, mode, lr, epochs) = match fig {
        Figure::Fig1a => (7, ActivationSpec::Tanh, ActivationSpec::Tanh, TaskMode::Classification, 0.01, 500),
        Figure::Fig1b => (7, ActivationSpec::Tanh, ActivationSpec::Identity, TaskMode::Regression, 0.01, 800),
        Figure::Fig2a => (8, ActivationSpec::Relu, ActivationSpec::Tanh, TaskMode::Classification, 0.005, 400),
        Figure::Fig2b => (8, ActivationSpec::Relu, ActivationSpec::Identity, TaskMode::Regression, 0.002, 1000),
    };
    FigurePreset {
        target: FamilySpec {
            n: 14,
            k,
            inner,
            outer,
        },
        mode,
        student: StudentArch {
            hidden_units: 5 << k,
            activation: inner,
        },
        learning_rate: lr,
        epochs,
        batch: BatchMode::Minibatch(32),
        init_scale: 1.0,
        train_size: 6000,
        test_size: 1000,
    }
}

/// Builds the data of one trial. The target is the member on the first `k`
/// coordinates; every member is equivalent up to a coordinate permutation.
pub fn trial_dataset(p: &FigurePreset, seed: u64) -> Result<Dataset> {
    let spec = &p.target;
    spec.validate()?;
    let id = ConceptId::new((0..spec.k).collect(), spec.n)?;
    let dist = DistributionSpec::standard_gaussian(spec.n)?;
    let train_x = sample(&dist, p.train_size, derive_seed(seed, "data/train-x", 0))?;
    let test_x = sample(&dist, p.test_size, derive_seed(seed, "data/test-x", 0))?;
    let label_mode = match p.mode {
        TaskMode::Regression => LabelMode::Regression,
        TaskMode::Classification => LabelMode::PConcept,
    };
    let train_y = Array1::from(sample_labels(spec, &id, &train_x, label_mode, derive_seed(seed, "data/train-y", 0))?);
    let test_y = Array1::from(sample_labels(spec, &id, &test_x, label_mode, derive_seed(seed, "data/test-y", 0))?);
    let bayes_01 = match p.mode {
        TaskMode::Regression => None,
        TaskMode::Classification => {
            let f = eval_f_rows(spec, &id, &test_x)?;
            let wrong = f
                .iter()
                .zip(&test_y)
                .filter(|(&f, &y)| (if f >= 0.0 { 1.0 } else { -1.0 }) != y)
                .count();
            Some(wrong as f64 / f.len() as f64)
        }
    };
    Ok(Dataset {
        train_x,
        train_y,
        test_x,
        test_y,
        bayes_01,
    })
}

/// Runs one trial with seed `seed` (data, initialization and shuffling are
/// derived from it).
pub fn run_trial(p: &FigurePreset, seed: u64) -> Result<Curves> {
    let data = trial_dataset(p, seed)?;
    let cfg = TrainConfig {
        learning_rate: p.learning_rate,
        epochs: p.epochs,
        batch: p.batch,
        init_scale: p.init_scale,
        seed: derive_seed(seed, "train", 0),
    };
    Ok(train(&p.student, &data, &cfg, p.mode)?.curves)
}

/// Per-epoch median and quartiles across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub epoch: usize,
    /// `(median, q1, q3)` of the training metric.
    pub train: (f64, f64, f64),
    pub test: (f64, f64, f64),
    /// Median Bayes error (classification only).
    pub bayes: Option<f64>,
}

/// Thresholds that make the "near-zero training error, high test error"
/// claim quantitative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapCriteria {
    pub train01_max: f64,
    pub test01_min: f64,
    pub gap01_min: f64,
    pub train_sq_max: f64,
    /// Final test loss must stay above this fraction of its initial value.
    pub test_sq_ratio_min: f64,
}

impl Default for GapCriteria {
    fn default() -> Self {
        Self {
            train01_max: 0.10,
            test01_min: 0.40,
            gap01_min: 0.3,
            train_sq_max: 0.05,
            test_sq_ratio_min: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureReport {
    pub figure: Figure,
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub rows: Vec<AggregateRow>,
    pub checks: Vec<Check>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl FigureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn train_metric(mode: TaskMode, r: &super::train::EpochRecord) -> (f64, f64) {
    match mode {
        TaskMode::Regression => (r.train_sq_loss, r.test_sq_loss),
        TaskMode::Classification => (r.train_01.unwrap_or(f64::NAN), r.test_01.unwrap_or(f64::NAN)),
    }
}

/// Aggregates trials into per-epoch median/IQR rows.
pub fn aggregate(mode: TaskMode, trials: &[Curves]) -> Result<Vec<AggregateRow>> {
    let len = trials.first().map(|c| c.records.len()).ok_or_else(|| invalid("no trials"))?;
    if trials.iter().any(|c| c.records.len() != len) {
        return Err(invalid("trials have different lengths"));
    }
    Ok((0..len)
        .map(|e| {
            let (tr, te): (Vec<f64>, Vec<f64>) = trials.iter().map(|c| train_metric(mode, &c.records[e])).unzip();
            let bayes: Vec<f64> = trials.iter().filter_map(|c| c.records[e].bayes_01).collect();
            AggregateRow {
                epoch: trials[0].records[e].epoch,
                train: median_iqr(&tr),
                test: median_iqr(&te),
                bayes: (!bayes.is_empty()).then(|| median_iqr(&bayes).0),
            }
        })
        .collect())
}

fn check(name: &str, value: f64, threshold: f64, passed: bool) -> Check {
    Check {
        name: name.to_string(),
        value,
        threshold,
        passed,
    }
}

/// Evaluates the gap criteria on aggregated rows and the raw trials.
pub fn gap_checks(mode: TaskMode, rows: &[AggregateRow], trials: &[Curves], crit: &GapCriteria) -> Vec<Check> {
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    match mode {
        TaskMode::Classification => {
            let gaps: Vec<f64> = trials
                .iter()
                .map(|c| {
                    let (tr, te) = train_metric(mode, c.records.last().expect("nonempty"));
                    te - tr
                })
                .collect();
            let gap = median_iqr(&gaps).0;
            let bayes = last.bayes.unwrap_or(f64::NAN);
            vec![
                check("final train 0/1 median <= max", last.train.0, crit.train01_max, last.train.0 <= crit.train01_max),
                check("final test 0/1 median >= min", last.test.0, crit.test01_min, last.test.0 >= crit.test01_min),
                check("median test-train 0/1 gap >= min", gap, crit.gap01_min, gap >= crit.gap01_min),
                check("bayes 0/1 < final test 0/1 median", bayes, last.test.0, bayes < last.test.0),
                check("bayes 0/1 < 0.5", bayes, 0.5, bayes < 0.5),
            ]
        }
        TaskMode::Regression => {
            let ratio = last.test.0 / first.test.0;
            vec![
                check("final train sq median <= max", last.train.0, crit.train_sq_max, last.train.0 <= crit.train_sq_max),
                check(
                    "final/initial test sq median >= min ratio",
                    ratio,
                    crit.test_sq_ratio_min,
                    ratio >= crit.test_sq_ratio_min,
                ),
            ]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceOptions {
    pub trials: usize,
    pub master_seed: u64,
    /// Overrides the preset's epoch budget.
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub criteria: Option<GapCriteria>,
}

/// Seed of trial `t`: `derive_seed(master, "reproduce/<figure>/trial", t)`.
pub fn trial_seed(fig: Figure, master: u64, trial: usize) -> u64 {
    derive_seed(master, &format!("reproduce/{}/trial", fig.name()), trial as u64)
}

/// Runs the trials of `fig`, writes `<fig>.csv`, `<fig>_trials.csv` and
/// `<fig>.svg` into `out_dir` when given, and evaluates the gap criteria.
pub fn reproduce_figure(fig: Figure, opts: &ReproduceOptions, out_dir: Option<&Path>) -> Result<FigureReport> {
    if opts.trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let mut p = preset(fig);
    if let Some(e) = opts.epochs {
        p.epochs = e;
    }
    let seeds: Vec<u64> = (0..opts.trials).map(|t| trial_seed(fig, opts.master_seed, t)).collect();
    let trials = seeds.par_iter().map(|&s| run_trial(&p, s)).collect::<Result<Vec<_>>>()?;
    let rows = aggregate(p.mode, &trials)?;
    let checks = gap_checks(p.mode, &rows, &trials, &opts.criteria.unwrap_or_default());
    let mut report = FigureReport {
        figure: fig,
        trials: opts.trials,
        seeds,
        rows,
        checks,
        csv: None,
        svg: None,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", fig.name()));
        write_aggregate_csv(&csv, p.mode, &report.rows)?;
        write_trials_csv(&dir.join(format!("{}_trials.csv", fig.name())), &trials)?;
        let svg = dir.join(format!("{}.svg", fig.name()));
        plot_svg(&svg, fig, p.mode, &report.rows)?;
        report.csv = Some(csv);
        report.svg = Some(svg);
    }
    Ok(report)
}

/// Column names of the aggregate CSV.
pub fn aggregate_header(mode: TaskMode) -> Vec<&'static str> {
    match mode {
        TaskMode::Classification => vec![
            "epoch", "train01_med", "train01_q1", "train01_q3", "test01_med", "test01_q1", "test01_q3", "bayes01",
        ],
        TaskMode::Regression => vec![
            "epoch", "trainsq_med", "trainsq_q1", "trainsq_q3", "testsq_med", "testsq_q1", "testsq_q3",
        ],
    }
}

pub fn write_aggregate_csv(path: &Path, mode: TaskMode, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(aggregate_header(mode))?;
    for r in rows {
        let mut rec = vec![
            r.epoch.to_string(),
            r.train.0.to_string(),
            r.train.1.to_string(),
            r.train.2.to_string(),
            r.test.0.to_string(),
            r.test.1.to_string(),
            r.test.2.to_string(),
        ];
        if mode == TaskMode::Classification {
            rec.push(r.bayes.map(|b| b.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_trials_csv(path: &Path, trials: &[Curves]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trial", "epoch", "train_sq_loss", "test_sq_loss", "train_01", "test_01", "bayes_01"])?;
    for (t, c) in trials.iter().enumerate() {
        for r in &c.records {
            w.write_record([
                t.to_string(),
                r.epoch.to_string(),
                r.train_sq_loss.to_string(),
                r.test_sq_loss.to_string(),
                opt(r.train_01),
                opt(r.test_01),
                opt(r.bayes_01),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn plot_error(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(format!("plotting failed: {e}")))
}

/// Median lines with shaded interquartile bands; epoch on the x-axis.
pub fn plot_svg(path: &Path, fig: Figure, mode: TaskMode, rows: &[AggregateRow]) -> Result<()> {
    let root = SVGBackend::new(path, (720, 450)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let x_max = rows.last().map(|r| r.epoch).unwrap_or(1).max(1) as f64;
    let y_max = rows
        .iter()
        .flat_map(|r| [r.train.2, r.test.2, r.bayes.unwrap_or(0.0)])
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        * 1.05;
    let y_max = if y_max > 0.0 { y_max } else { 1.0 };
    let (metric, title) = match mode {
        TaskMode::Classification => ("0/1 loss", "classification"),
        TaskMode::Regression => ("square loss", "regression"),
    };
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{} ({title})", fig.name()), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(0.0..x_max, 0.0..y_max)
        .map_err(plot_error)?;
    chart
        .configure_mesh()
        .x_desc("epoch")
        .y_desc(metric)
        .draw()
        .map_err(plot_error)?;
    let series: [(&str, RGBColor, fn(&AggregateRow) -> (f64, f64, f64)); 2] =
        [("train", BLUE, |r| r.train), ("test", RED, |r| r.test)];
    for (label, color, get) in series {
        let mut band: Vec<(f64, f64)> = rows.iter().map(|r| (r.epoch as f64, get(r).2)).collect();
        band.extend(rows.iter().rev().map(|r| (r.epoch as f64, get(r).1)));
        chart
            .draw_series(std::iter::once(Polygon::new(band, color.mix(0.2).filled())))
            .map_err(plot_error)?;
        chart
            .draw_series(LineSeries::new(rows.iter().map(|r| (r.epoch as f64, get(r).0)), color.stroke_width(2)))
            .map_err(plot_error)?
            .label(format!("{label} (median)"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    if rows.iter().any(|r| r.bayes.is_some()) {
        let black = BLACK;
        chart
            .draw_series(LineSeries::new(
                rows.iter().filter_map(|r| r.bayes.map(|b| (r.epoch as f64, b))),
                black.stroke_width(1),
            ))
            .map_err(plot_error)?
            .label("bayes optimal (test)")
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], black.stroke_width(1)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperRight)
        .draw()
        .map_err(plot_error)?;
    root.present().map_err(plot_error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_follow_captions() {
        let p = preset(Figure::Fig1a);
        assert_eq!(p.student.hidden_units, 640);
        assert_eq!((p.target.n, p.target.k), (14, 7));
        let params = p.student.hidden_units * (p.target.n + 2);
        assert_eq!(params, 10240);
        let q = preset(Figure::Fig2b);
        assert_eq!(q.student.hidden_units, 1280);
        assert_eq!(q.learning_rate, 0.002);
        assert_eq!(preset(Figure::Fig2a).learning_rate, 0.005);
        assert_eq!("fig1b".parse::<Figure>().unwrap(), Figure::Fig1b);
        assert!("fig3".parse::<Figure>().is_err());
    }

    #[test]
    fn short_run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let opts = ReproduceOptions {
            trials: 2,
            master_seed: 5,
            epochs: Some(1),
            criteria: None,
        };
        let rep = reproduce_figure(Figure::Fig1a, &opts, Some(dir.path())).unwrap();
        assert_eq!(rep.rows.len(), 2);
        let text = std::fs::read_to_string(dir.path().join("fig1a.csv")).unwrap();
        assert!(text.starts_with("epoch,train01_med,train01_q1,train01_q3,test01_med,test01_q1,test01_q3,bayes01\n"));
        let svg = std::fs::read_to_string(dir.path().join("fig1a.svg")).unwrap();
        assert!(svg.contains("<svg") && svg.contains("epoch"));
    }
}
