//! Repeated stratified cross-validation, grid evaluation and significance tests.

pub mod special;
mod stats;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{stratified_folds, Dataset, Label};
use crate::ensemble::{validate_threshold, BaseMode, ConformalEnsemble, EnsembleConfig, EnsembleVerdict, Outcome, Sampling};
use crate::error::{Error, Result};
use crate::naive_bayes::NbParams;
use crate::rng::{derive_seed, Stream};

pub use stats::{
    average_ranks, friedman_test, wilcoxon_signed_rank, FriedmanResult, WilcoxonResult, WILCOXON_EXACT_MAX,
    WILCOXON_MIN_PAIRS,
};

/// Confusion counts for one positive class over the predicted examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub unpredictable: usize,
}

impl Confusion {
    pub fn predicted(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn total(&self) -> usize {
        self.predicted() + self.unpredictable
    }
}

/// Metrics of one fold. Rates that are undefined on the predicted subset are absent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldMetrics {
    pub f_measure: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    /// Fraction of test examples left unpredictable.
    pub empty_rate: f64,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Score verdicts against the truth with `positive` as the positive class.
///
/// Unpredictable verdicts are left out of the confusion matrix and counted in
/// the empty rate. With no predicted positives the F-measure is 0.
pub fn compute_metrics(verdicts: &[EnsembleVerdict], truths: &[Label], positive: Label) -> Result<FoldMetrics> {
    if verdicts.is_empty() {
        return Err(Error::data("cannot compute metrics without verdicts"));
    }
    if verdicts.len() != truths.len() {
        return Err(Error::param(format!(
            "{} verdicts but {} true labels",
            verdicts.len(),
            truths.len()
        )));
    }
    let mut c = Confusion::default();
    for (v, &truth) in verdicts.iter().zip(truths) {
        match v.outcome {
            Outcome::Unpredictable => c.unpredictable += 1,
            Outcome::Predicted(p) => match (p == positive, truth == positive) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            },
        }
    }
    let empty_rate = c.unpredictable as f64 / c.total() as f64;
    if c.predicted() == 0 {
        return Ok(FoldMetrics {
            f_measure: None,
            sensitivity: None,
            specificity: None,
            precision: None,
            empty_rate,
            confusion: c,
        });
    }
    let f_measure = match ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_) {
        Some(f) if c.tp + c.fp > 0 => f,
        _ => 0.0,
    };
    Ok(FoldMetrics {
        f_measure: Some(f_measure),
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
        precision: ratio(c.tp, c.tp + c.fp),
        empty_rate,
        confusion: c,
    })
}

/// Mean and sample standard deviation of the defined values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Summary> {
        let values: Vec<f64> = values.into_iter().collect();
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, sd, count: n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub f_measure: Option<Summary>,
    pub sensitivity: Option<Summary>,
    pub specificity: Option<Summary>,
    /// Percentage of unpredictable test examples, 0 to 100.
    pub empty_rate_pct: Summary,
    pub n_iterations: usize,
}

impl MetricsReport {
    pub fn from_folds(folds: &[FoldMetrics]) -> Result<Self> {
        let empty_rate_pct = Summary::of(folds.iter().map(|m| 100.0 * m.empty_rate))
            .ok_or_else(|| Error::data("no fold results to summarize"))?;
        Ok(MetricsReport {
            f_measure: Summary::of(folds.iter().filter_map(|m| m.f_measure)),
            sensitivity: Summary::of(folds.iter().filter_map(|m| m.sensitivity)),
            specificity: Summary::of(folds.iter().filter_map(|m| m.specificity)),
            empty_rate_pct,
            n_iterations: folds.len(),
        })
    }
}

/// Repetitions, folds, seed and positive class of a cross-validation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvPlan {
    pub k: usize,
    pub repeats: usize,
    /// Drives the fold assignments of every repeat.
    pub seed: u64,
    pub positive: Label,
}

impl CvPlan {
    pub fn new(k: usize, repeats: usize, seed: u64, positive: Label) -> Self {
        CvPlan { k, repeats, seed, positive }
    }

    fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.k < 2 {
            return Err(Error::param(format!("cross-validation needs k >= 2, got {}", self.k)));
        }
        if self.repeats == 0 {
            return Err(Error::param("cross-validation needs at least one repeat"));
        }
        if self.positive.0 >= dataset.n_classes() {
            return Err(Error::param(format!("positive label {} is not a class", self.positive.0)));
        }
        Ok(())
    }
}

/// Position of one fold evaluation in the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FoldId {
    pub repeat: usize,
    pub fold: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub report: MetricsReport,
    /// Per-fold metrics in `(repeat, fold)` order.
    pub folds: Vec<FoldMetrics>,
}

/// Seed of the ensemble built on one fold.
pub fn fold_ensemble_seed(seed: u64, fold: FoldId) -> u64 {
    derive_seed(seed, Stream::FoldEnsemble, &[fold.repeat as u64, fold.fold as u64])
}

/// Seed of the fold assignment of one repeat.
pub fn repeat_fold_seed(seed: u64, repeat: usize) -> u64 {
    derive_seed(seed, Stream::Folds, &[repeat as u64])
}

pub fn run_cv(dataset: &Dataset, config: &EnsembleConfig, plan: &CvPlan) -> Result<CvResult> {
    run_cv_observed(dataset, config, plan, &|_| {})
}

/// [`run_cv`] calling `observer` once per fold evaluation.
pub fn run_cv_observed(
    dataset: &Dataset,
    config: &EnsembleConfig,
    plan: &CvPlan,
    observer: &(dyn Fn(FoldId) + Sync),
) -> Result<CvResult> {
    config.validate()?;
    let group = Group {
        config: config.clone(),
        cells: vec![(config.n_estimators, config.credibility_threshold)],
    };
    let mut per_cell = evaluate_groups(dataset, &[group], plan, observer)?;
    let folds = per_cell.remove(0).remove(0);
    Ok(CvResult {
        report: MetricsReport::from_folds(&folds)?,
        folds,
    })
}

/// Ensembles sharing everything but size and threshold, evaluated from one build per fold.
struct Group {
    config: EnsembleConfig,
    cells: Vec<(usize, Option<f64>)>,
}

/// Per group, per cell, per fold metrics.
fn evaluate_groups(
    dataset: &Dataset,
    groups: &[Group],
    plan: &CvPlan,
    observer: &(dyn Fn(FoldId) + Sync),
) -> Result<Vec<Vec<Vec<FoldMetrics>>>> {
    plan.validate(dataset)?;
    let labels = dataset.labels()?;
    let mut results: Vec<Vec<Vec<FoldMetrics>>> = groups
        .iter()
        .map(|g| vec![Vec::with_capacity(plan.k * plan.repeats); g.cells.len()])
        .collect();

    for repeat in 0..plan.repeats {
        let folds = stratified_folds(dataset, plan.k, repeat_fold_seed(plan.seed, repeat))?;
        for (f, fold) in folds.iter().enumerate() {
            let id = FoldId { repeat, fold: f };
            let train = dataset.subset(&fold.train);
            let tests = &dataset.examples();
            let truths: Vec<Label> = fold.test.iter().map(|&i| labels[i]).collect();
            for (g, group) in groups.iter().enumerate() {
                let max_n = group.cells.iter().map(|c| c.0).max().expect("groups hold cells");
                let config = EnsembleConfig {
                    n_estimators: max_n,
                    seed: fold_ensemble_seed(group.config.seed, id),
                    ..group.config.clone()
                };
                let ensemble = ConformalEnsemble::build(&train, &config)?;
                let votes = fold
                    .test
                    .par_iter()
                    .map(|&i| ensemble.votes(&tests[i]))
                    .collect::<Result<Vec<_>>>()?;
                observer(id);
                for (c, &(n, threshold)) in group.cells.iter().enumerate() {
                    let verdicts: Vec<EnsembleVerdict> = fold
                        .test
                        .iter()
                        .zip(&votes)
                        .map(|(&i, v)| ensemble.aggregate(&tests[i].id, v, n, threshold))
                        .collect();
                    results[g][c].push(compute_metrics(&verdicts, &truths, plan.positive)?);
                }
            }
        }
    }
    Ok(results)
}

/// Coordinates of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub base_mode: BaseMode,
    pub sampling: Sampling,
    pub n_estimators: usize,
    pub feature_fraction: f64,
    /// `None` lets every member vote.
    pub threshold: Option<f64>,
}

impl CellKey {
    pub fn simple_nb() -> Self {
        let c = EnsembleConfig::simple_nb();
        CellKey {
            base_mode: c.base_mode,
            sampling: c.sampling,
            n_estimators: c.n_estimators,
            feature_fraction: c.feature_fraction,
            threshold: c.credibility_threshold,
        }
    }

    fn group_key(&self) -> (BaseMode, Sampling, u64) {
        (self.base_mode, self.sampling, self.feature_fraction.to_bits())
    }

    /// Ensemble configuration of this cell under `spec`.
    pub fn config(&self, spec: &GridSpec, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            n_estimators: self.n_estimators,
            feature_fraction: self.feature_fraction,
            bootstrap_fraction: spec.bootstrap_fraction,
            sampling: self.sampling,
            credibility_threshold: self.threshold,
            base_mode: self.base_mode,
            seed,
            feature_report_fraction: spec.feature_report_fraction,
            nb: spec.nb,
        }
    }
}

impl Eq for CellKey {}

impl Ord for CellKey {
    fn cmp(&self, other: &Self) -> Ordering {
        let threshold = |t: Option<f64>| t.map_or(f64::NEG_INFINITY, |t| t);
        self.base_mode
            .cmp(&other.base_mode)
            .then(self.sampling.cmp(&other.sampling))
            .then(self.n_estimators.cmp(&other.n_estimators))
            .then(self.feature_fraction.total_cmp(&other.feature_fraction))
            .then(threshold(self.threshold).total_cmp(&threshold(other.threshold)))
    }
}

impl PartialOrd for CellKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Axes of a parameter grid.
///
/// Conformal and posterior modes are crossed with every threshold; the plain
/// mode always votes, so it contributes one unthresholded cell per size and
/// feature fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n_estimators: Vec<usize>,
    pub feature_fractions: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub base_modes: Vec<BaseMode>,
    pub bootstrap_fraction: f64,
    pub feature_report_fraction: f64,
    pub nb: NbParams,
    /// Add the single naive Bayes model on all features and examples.
    pub include_simple_nb: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_estimators: vec![25, 50, 100],
            feature_fractions: vec![0.25, 0.5, 0.75],
            thresholds: vec![0.75, 0.80, 0.85, 0.90, 0.95],
            base_modes: vec![BaseMode::ConformalCredibility],
            bootstrap_fraction: 1.0,
            feature_report_fraction: 0.8,
            nb: NbParams::default(),
            include_simple_nb: false,
        }
    }
}

impl GridSpec {
    pub fn cells(&self) -> Vec<CellKey> {
        let mut cells = Vec::new();
        for &base_mode in &self.base_modes {
            let thresholds: Vec<Option<f64>> = match base_mode {
                BaseMode::StandardPlain => vec![None],
                _ => self.thresholds.iter().map(|&t| Some(t)).collect(),
            };
            for &n_estimators in &self.n_estimators {
                for &feature_fraction in &self.feature_fractions {
                    for &threshold in &thresholds {
                        cells.push(CellKey {
                            base_mode,
                            sampling: Sampling::Bootstrap,
                            n_estimators,
                            feature_fraction,
                            threshold,
                        });
                    }
                }
            }
        }
        if self.include_simple_nb {
            cells.push(CellKey::simple_nb());
        }
        cells.sort();
        cells.dedup();
        cells
    }

    fn validate(&self) -> Result<()> {
        if self.n_estimators.is_empty() || self.feature_fractions.is_empty() || self.base_modes.is_empty() {
            return Err(Error::param("grid axes must not be empty"));
        }
        let thresholded = self.base_modes.iter().any(|&m| m != BaseMode::StandardPlain);
        if thresholded && self.thresholds.is_empty() {
            return Err(Error::param("grid needs at least one threshold"));
        }
        for &t in &self.thresholds {
            validate_threshold(t)?;
        }
        for cell in self.cells() {
            cell.config(self, 0).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub report: MetricsReport,
    /// Per-fold metrics, index-aligned across cells.
    pub folds: Vec<FoldMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Sorted by cell key.
    pub cells: Vec<CellResult>,
}

pub const GRID_CSV_HEADER: &str = "base_mode,sampling,n_estimators,feature_fraction,threshold,\
f_measure_mean,f_measure_sd,sensitivity_mean,sensitivity_sd,specificity_mean,specificity_sd,\
empty_pct_mean,empty_pct_sd,n_iterations";

impl GridResult {
    pub fn get(&self, key: &CellKey) -> Option<&CellResult> {
        self.cells.iter().find(|c| &c.key == key)
    }

    /// Cell with the highest mean F-measure; the earliest cell wins ties.
    pub fn best_by_f_measure(&self) -> Option<&CellResult> {
        let mut best: Option<(&CellResult, f64)> = None;
        for cell in &self.cells {
            if let Some(f) = cell.report.f_measure {
                if best.is_none_or(|(_, b)| f.mean > b) {
                    best = Some((cell, f.mean));
                }
            }
        }
        best.map(|(c, _)| c)
    }

    /// One row per cell at full precision; undefined metrics are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(GRID_CSV_HEADER);
        out.push('\n');
        let pair = |s: Option<Summary>| s.map_or(",".to_string(), |s| format!("{},{}", s.mean, s.sd));
        for cell in &self.cells {
            let k = &cell.key;
            let r = &cell.report;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                k.base_mode,
                k.sampling.as_str(),
                k.n_estimators,
                k.feature_fraction,
                k.threshold.map_or("none".to_string(), |t| t.to_string()),
                pair(r.f_measure),
                pair(r.sensitivity),
                pair(r.specificity),
                r.empty_rate_pct.mean,
                r.empty_rate_pct.sd,
                r.n_iterations
            );
        }
        out
    }
}

/// Evaluate every grid cell on the same folds.
///
/// Each fold builds one ensemble per (mode, sampling, feature fraction) at the
/// largest requested size; smaller sizes are its leading members, and every
/// threshold reuses the same votes.
pub fn run_grid(dataset: &Dataset, spec: &GridSpec, plan: &CvPlan) -> Result<GridResult> {
    run_grid_observed(dataset, spec, plan, &|_| {})
}

/// [`run_grid`] calling `observer` once per fold and ensemble build.
pub fn run_grid_observed(
    dataset: &Dataset,
    spec: &GridSpec,
    plan: &CvPlan,
    observer: &(dyn Fn(FoldId) + Sync),
) -> Result<GridResult> {
    spec.validate()?;
    let cells = spec.cells();
    let mut grouped: BTreeMap<(BaseMode, Sampling, u64), Vec<CellKey>> = BTreeMap::new();
    for cell in &cells {
        grouped.entry(cell.group_key()).or_default().push(*cell);
    }
    let groups: Vec<(Vec<CellKey>, Group)> = grouped
        .into_values()
        .map(|keys| {
            let group = Group {
                config: keys[0].config(spec, plan.seed),
                cells: keys.iter().map(|k| (k.n_estimators, k.threshold)).collect(),
            };
            (keys, group)
        })
        .collect();
    let plain: Vec<Group> = groups
        .iter()
        .map(|(_, g)| Group {
            config: g.config.clone(),
            cells: g.cells.clone(),
        })
        .collect();
    let results = evaluate_groups(dataset, &plain, plan, observer)?;

    let mut out = Vec::with_capacity(cells.len());
    for ((keys, _), per_cell) in groups.iter().zip(results) {
        for (key, folds) in keys.iter().zip(per_cell) {
            out.push(CellResult {
                key: *key,
                report: MetricsReport::from_folds(&folds)?,
                folds,
            });
        }
    }
    out.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(GridResult { cells: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig, POSITIVE_CLASS};
    use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

    const CMCI: Label = Label(0);
    const SMCI: Label = Label(1);

    fn verdict(outcome: Outcome) -> EnsembleVerdict {
        EnsembleVerdict {
            example_id: String::new(),
            outcome,
            mean_credibility: None,
            mean_confidence: None,
            trustworthy_fraction: 1.0,
            vote_counts: vec![0, 0],
            frequent_features: Vec::new(),
        }
    }

    fn predicted(labels: &[Label]) -> Vec<EnsembleVerdict> {
        labels.iter().map(|&l| verdict(Outcome::Predicted(l))).collect()
    }

    #[test]
    fn confusion_arithmetic() {
        let m = compute_metrics(&predicted(&[CMCI, SMCI, SMCI, SMCI]), &[CMCI, CMCI, SMCI, SMCI], CMCI).unwrap();
        assert_eq!(m.sensitivity, Some(0.5));
        assert_eq!(m.specificity, Some(1.0));
        assert_eq!(m.precision, Some(1.0));
        assert!((m.f_measure.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.empty_rate, 0.0);
    }

    #[test]
    fn perfect_predictions() {
        let truth = [CMCI, SMCI, CMCI];
        let m = compute_metrics(&predicted(&truth), &truth, CMCI).unwrap();
        assert_eq!((m.f_measure, m.sensitivity, m.specificity), (Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn unpredictable_examples_are_excluded() {
        let mut v = vec![verdict(Outcome::Unpredictable); 3];
        v.push(verdict(Outcome::Predicted(CMCI)));
        let m = compute_metrics(&v, &[SMCI, CMCI, SMCI, CMCI], CMCI).unwrap();
        assert_eq!(m.empty_rate, 0.75);
        assert_eq!(m.sensitivity, Some(1.0));
        assert_eq!(m.specificity, None);
        assert_eq!(m.confusion.predicted(), 1);
    }

    #[test]
    fn degenerate_metric_cases() {
        assert!(compute_metrics(&[], &[], CMCI).is_err());
        let all_empty = compute_metrics(&vec![verdict(Outcome::Unpredictable); 2], &[CMCI, SMCI], CMCI).unwrap();
        assert_eq!(all_empty.empty_rate, 1.0);
        assert!(all_empty.f_measure.is_none() && all_empty.sensitivity.is_none());
        // no predicted positives: F is 0
        let m = compute_metrics(&predicted(&[SMCI, SMCI]), &[CMCI, SMCI], CMCI).unwrap();
        assert_eq!(m.f_measure, Some(0.0));
        assert_eq!(m.precision, None);
    }

    #[test]
    fn summaries_use_sample_deviation() {
        let s = Summary::of([1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Summary::of([0.7]).unwrap().sd, 0.0);
        assert!(Summary::of(std::iter::empty()).is_none());
    }

    fn noisy(n: usize, seed: u64) -> Dataset {
        generate_synthetic(&SyntheticConfig {
            n_examples: n,
            n_features: 6,
            class_balance: 0.5,
            separation: 1.0,
            noise_rate: 0.1,
            seed,
        })
        .unwrap()
    }

    fn plan(k: usize, repeats: usize, data: &Dataset) -> CvPlan {
        CvPlan::new(k, repeats, 5, data.label_of(POSITIVE_CLASS).unwrap())
    }

    #[test]
    fn cv_counts_fold_evaluations() {
        let data = noisy(40, 1);
        let calls = AtomicUsize::new(0);
        let cfg = EnsembleConfig { n_estimators: 3, ..Default::default() };
        let r = run_cv_observed(&data, &cfg, &plan(2, 3, &data), &|_| {
            calls.fetch_add(1, AtomicOrdering::SeqCst);
        })
        .unwrap();
        assert_eq!(calls.load(AtomicOrdering::SeqCst), 6);
        assert_eq!(r.folds.len(), 6);
        assert_eq!(r.report.n_iterations, 6);
    }

    #[test]
    fn cv_is_deterministic() {
        let data = noisy(40, 2);
        let cfg = EnsembleConfig { n_estimators: 4, credibility_threshold: Some(0.5), ..Default::default() };
        let p = plan(4, 2, &data);
        assert_eq!(run_cv(&data, &cfg, &p).unwrap(), run_cv(&data, &cfg, &p).unwrap());
    }

    #[test]
    fn separable_data_has_zero_deviation() {
        let data = generate_synthetic(&SyntheticConfig {
            n_examples: 30,
            n_features: 3,
            class_balance: 0.5,
            separation: 40.0,
            noise_rate: 0.0,
            seed: 3,
        })
        .unwrap();
        let r = run_cv(&data, &EnsembleConfig::simple_nb(), &plan(3, 2, &data)).unwrap();
        let f = r.report.f_measure.unwrap();
        assert_eq!((f.mean, f.sd), (1.0, 0.0));
    }

    #[test]
    fn cv_rejects_bad_plans() {
        let data = noisy(20, 4);
        let cfg = EnsembleConfig::simple_nb();
        assert!(run_cv(&data, &cfg, &CvPlan::new(1, 1, 0, CMCI)).is_err());
        assert!(run_cv(&data, &cfg, &CvPlan::new(2, 0, 0, CMCI)).is_err());
        assert!(run_cv(&data, &cfg, &CvPlan::new(2, 1, 0, Label(7))).is_err());
    }

    fn small_grid() -> GridSpec {
        GridSpec {
            n_estimators: vec![2, 4],
            feature_fractions: vec![0.5, 1.0],
            thresholds: vec![0.5, 0.8],
            base_modes: vec![BaseMode::ConformalCredibility, BaseMode::StandardPosterior, BaseMode::StandardPlain],
            include_simple_nb: true,
            ..Default::default()
        }
    }

    #[test]
    fn grid_cells_are_sorted_and_complete() {
        let cells = small_grid().cells();
        // 2 thresholded modes x 2 sizes x 2 fractions x 2 thresholds, 4 plain cells, 1 simple
        assert_eq!(cells.len(), 16 + 4 + 1);
        assert!(cells.windows(2).all(|w| w[0] < w[1]));
        assert!(cells.contains(&CellKey::simple_nb()));
    }

    #[test]
    fn single_cell_grid_equals_cv() {
        let data = noisy(30, 6);
        let p = plan(3, 2, &data);
        let spec = GridSpec {
            n_estimators: vec![3],
            feature_fractions: vec![0.5],
            thresholds: vec![0.6],
            ..Default::default()
        };
        let grid = run_grid(&data, &spec, &p).unwrap();
        assert_eq!(grid.cells.len(), 1);
        let cfg = grid.cells[0].key.config(&spec, p.seed);
        let cv = run_cv(&data, &cfg, &p).unwrap();
        assert_eq!(grid.cells[0].folds, cv.folds);
        assert_eq!(grid.cells[0].report, cv.report);
    }

    #[test]
    fn grid_reuses_prefix_ensembles_consistently() {
        let data = noisy(30, 7);
        let p = plan(3, 1, &data);
        let spec = small_grid();
        let grid = run_grid(&data, &spec, &p).unwrap();
        assert_eq!(grid.cells.len(), spec.cells().len());
        for cell in &grid.cells {
            assert_eq!(cell.folds.len(), 3);
        }
        // every cell matches an independent cross-validation of its own configuration
        for cell in grid.cells.iter().step_by(5) {
            let cv = run_cv(&data, &cell.key.config(&spec, p.seed), &p).unwrap();
            assert_eq!(cell.folds, cv.folds, "{:?}", cell.key);
        }
        let csv = grid.to_csv();
        assert_eq!(csv.lines().count(), 1 + grid.cells.len());
        assert!(csv.starts_with(GRID_CSV_HEADER));
        assert!(grid.best_by_f_measure().is_some());
    }

    #[test]
    fn grid_rejects_empty_axes() {
        let data = noisy(20, 8);
        let p = plan(2, 1, &data);
        let spec = GridSpec { n_estimators: vec![], ..Default::default() };
        assert!(run_grid(&data, &spec, &p).is_err());
        let spec = GridSpec { thresholds: vec![1.2], ..Default::default() };
        assert!(run_grid(&data, &spec, &p).is_err());
    }
}
