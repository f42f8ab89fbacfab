//! Random-patches ensembles whose members vote only when they are trustworthy.
//!
//! Each member sees a bootstrap sample of the training examples and a random
//! subset of the features, both drawn from a generator derived from the
//! ensemble seed and the member index. A member's vote counts only when its
//! uncertainty score is strictly above the credibility threshold. When no
//! member qualifies the example is reported as unpredictable.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::conformal::{validate_subset, ConformalPredictor};
use crate::data::{Dataset, Example, FeatureKind, Label, Schema, Value};
use crate::error::{Error, Result};
use crate::naive_bayes::{
    argmax_first, check_version, layout, read_core, read_params, read_schema, write_params, write_schema,
    NaiveBayesModel, NbParams,
};
use crate::rng::{rng_for, Stream};
use crate::text_format::{RecordReader, RecordWriter};

const FORMAT_TAG: &str = "cpens-ensemble";
const FORMAT_VERSION: u32 = 1;
const MAX_BOOTSTRAP_REDRAWS: usize = 10;

/// What each member contributes and how its trust score is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseMode {
    /// Conformal predictor; trust score is the forced prediction's credibility.
    ConformalCredibility,
    /// Plain naive Bayes; trust score is the maximum posterior.
    StandardPosterior,
    /// Plain naive Bayes that always votes.
    StandardPlain,
}

impl BaseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BaseMode::ConformalCredibility => "conformal",
            BaseMode::StandardPosterior => "posterior",
            BaseMode::StandardPlain => "plain",
        }
    }
}

impl fmt::Display for BaseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conformal" => Ok(BaseMode::ConformalCredibility),
            "posterior" => Ok(BaseMode::StandardPosterior),
            "plain" => Ok(BaseMode::StandardPlain),
            other => Err(Error::param(format!(
                "unknown base mode `{other}` (expected conformal, posterior or plain)"
            ))),
        }
    }
}

/// How a member's training examples are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sampling {
    /// Draw with replacement.
    Bootstrap,
    /// Use the training set as is, once per example.
    Identity,
}

impl Sampling {
    pub fn as_str(self) -> &'static str {
        match self {
            Sampling::Bootstrap => "bootstrap",
            Sampling::Identity => "identity",
        }
    }
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(Sampling::Bootstrap),
            "identity" => Ok(Sampling::Identity),
            other => Err(Error::param(format!("unknown sampling `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_estimators: usize,
    /// Fraction of features each member sees; the subset size is rounded up.
    pub feature_fraction: f64,
    /// Bootstrap sample size as a fraction of the training set.
    pub bootstrap_fraction: f64,
    pub sampling: Sampling,
    /// Members vote only when their score is strictly above this. `None` lets every member vote.
    pub credibility_threshold: Option<f64>,
    pub base_mode: BaseMode,
    pub seed: u64,
    /// A feature is reported when it appears in at least this fraction of the trustworthy members.
    pub feature_report_fraction: f64,
    pub nb: NbParams,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_estimators: 50,
            feature_fraction: 0.75,
            bootstrap_fraction: 1.0,
            sampling: Sampling::Bootstrap,
            credibility_threshold: None,
            base_mode: BaseMode::ConformalCredibility,
            seed: 0,
            feature_report_fraction: 0.8,
            nb: NbParams::default(),
        }
    }
}

impl EnsembleConfig {
    /// The single-model baseline: one member on all features and all examples, always voting.
    pub fn simple_nb() -> Self {
        EnsembleConfig {
            n_estimators: 1,
            feature_fraction: 1.0,
            sampling: Sampling::Identity,
            base_mode: BaseMode::StandardPlain,
            credibility_threshold: None,
            ..EnsembleConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::param("an ensemble needs at least one estimator"));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::param(format!("feature fraction must be in (0, 1], got {}", self.feature_fraction)));
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return Err(Error::param(format!(
                "bootstrap fraction must be in (0, 1], got {}",
                self.bootstrap_fraction
            )));
        }
        if let Some(t) = self.credibility_threshold {
            validate_threshold(t)?;
        }
        if !(self.feature_report_fraction > 0.0 && self.feature_report_fraction <= 1.0) {
            return Err(Error::param(format!(
                "feature report fraction must be in (0, 1], got {}",
                self.feature_report_fraction
            )));
        }
        self.nb.validate()
    }

    /// `ceil(feature_fraction * n_features)`, at least one.
    pub fn subset_size(&self, n_features: usize) -> usize {
        // absorb representation error such as 0.1 * 30 = 3.0000000000000004
        let raw = self.feature_fraction * n_features as f64;
        ((raw - 1e-9).ceil() as usize).clamp(1, n_features.max(1))
    }

    pub fn bag_size(&self, n_examples: usize) -> usize {
        match self.sampling {
            Sampling::Identity => n_examples,
            Sampling::Bootstrap => ((self.bootstrap_fraction * n_examples as f64).round() as usize).max(1),
        }
    }
}

pub fn validate_threshold(t: f64) -> Result<()> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::param(format!("credibility threshold must be in [0, 1), got {t}")));
    }
    Ok(())
}

/// The examples and features one member is trained on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    /// Indices into the training set; repeats allowed.
    pub rows: Vec<usize>,
    /// Sorted feature indices.
    pub features: Vec<usize>,
}

fn draw_patch(labels: &[Label], n_classes: usize, n_features: usize, config: &EnsembleConfig, index: usize) -> Patch {
    let mut rng = rng_for(config.seed, Stream::Estimator, &[index as u64]);
    let n = labels.len();
    let size = config.bag_size(n);

    let rows = match config.sampling {
        Sampling::Identity => (0..n).collect(),
        Sampling::Bootstrap => {
            let covers_all = |rows: &[usize]| {
                let mut seen = vec![false; n_classes];
                rows.iter().for_each(|&r| seen[labels[r].0] = true);
                seen.iter().all(|&s| s)
            };
            let mut drawn = None;
            for _ in 0..=MAX_BOOTSTRAP_REDRAWS {
                let rows: Vec<usize> = (0..size).map(|_| rng.random_range(0..n)).collect();
                if covers_all(&rows) {
                    drawn = Some(rows);
                    break;
                }
            }
            drawn.unwrap_or_else(|| stratified_bootstrap(labels, n_classes, size, &mut rng))
        }
    };

    let mut features = sample(&mut rng, n_features, config.subset_size(n_features)).into_vec();
    features.sort_unstable();
    Patch { rows, features }
}

/// Bootstrap within each class, keeping class proportions and at least one member per class.
fn stratified_bootstrap(labels: &[Label], n_classes: usize, size: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = labels.len();
    let mut rows = Vec::with_capacity(size + n_classes);
    for c in 0..n_classes {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i].0 == c).collect();
        let take = ((size as f64 * members.len() as f64 / n as f64).round() as usize).max(1);
        rows.extend((0..take).map(|_| members[rng.random_range(0..members.len())]));
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
enum Estimator {
    Conformal(ConformalPredictor),
    Standard(NaiveBayesModel),
}

#[derive(Debug, Clone, PartialEq)]
struct Member {
    patch: Patch,
    estimator: Estimator,
}

/// One member's forced prediction for one example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorVote {
    pub label: Label,
    /// Compared against the credibility threshold.
    pub score: f64,
    pub credibility: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Predicted(Label),
    Unpredictable,
}

impl Outcome {
    pub fn label(self) -> Option<Label> {
        match self {
            Outcome::Predicted(l) => Some(l),
            Outcome::Unpredictable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleVerdict {
    pub example_id: String,
    pub outcome: Outcome,
    /// Mean over trustworthy members; absent when unpredictable.
    pub mean_credibility: Option<f64>,
    pub mean_confidence: Option<f64>,
    pub trustworthy_fraction: f64,
    /// Trustworthy votes per class.
    pub vote_counts: Vec<usize>,
    /// Features used by enough trustworthy members, most frequent first, then by name.
    pub frequent_features: Vec<String>,
}

/// A trained random-patches ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalEnsemble {
    config: EnsembleConfig,
    train: Dataset,
    members: Vec<Member>,
}

impl ConformalEnsemble {
    pub fn build(train: &Dataset, config: &EnsembleConfig) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::data("cannot build an ensemble on an empty training set"));
        }
        if train.n_features() == 0 {
            return Err(Error::data("cannot build an ensemble without features"));
        }
        let labels = train.labels()?;
        if let Some(c) = train.class_counts().iter().position(|&n| n == 0) {
            return Err(Error::ClassAbsent(train.classes()[c].clone()));
        }
        let members = (0..config.n_estimators)
            .into_par_iter()
            .map(|i| {
                let patch = draw_patch(&labels, train.n_classes(), train.n_features(), config, i);
                let estimator = make_estimator(train, &patch, config)?;
                Ok(Member { patch, estimator })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConformalEnsemble {
            config: config.clone(),
            train: train.clone(),
            members,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn schema(&self) -> &Schema {
        self.train.schema()
    }

    pub fn classes(&self) -> &[String] {
        self.train.classes()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn patches(&self) -> impl Iterator<Item = &Patch> {
        self.members.iter().map(|m| &m.patch)
    }

    /// The fitted model of a standard-mode member.
    pub fn member_model(&self, index: usize) -> Option<&NaiveBayesModel> {
        match &self.members.get(index)?.estimator {
            Estimator::Standard(m) => Some(m),
            Estimator::Conformal(_) => None,
        }
    }

    /// Every member's forced prediction for `test`, in member order.
    pub fn votes(&self, test: &Example) -> Result<Vec<EstimatorVote>> {
        self.schema().validate_values(&test.values)?;
        self.members
            .par_iter()
            .map(|m| member_vote(m, test, self.config.base_mode))
            .collect()
    }

    pub fn predict(&self, test: &Example) -> Result<EnsembleVerdict> {
        self.predict_with_threshold(test, self.config.credibility_threshold)
    }

    pub fn predict_with_threshold(&self, test: &Example, threshold: Option<f64>) -> Result<EnsembleVerdict> {
        if let Some(t) = threshold {
            validate_threshold(t)?;
        }
        let votes = self.votes(test)?;
        Ok(self.aggregate(&test.id, &votes, self.members.len(), threshold))
    }

    pub fn predict_batch(&self, tests: &[Example]) -> Result<Vec<EnsembleVerdict>> {
        self.predict_batch_with_threshold(tests, self.config.credibility_threshold)
    }

    pub fn predict_batch_with_threshold(&self, tests: &[Example], threshold: Option<f64>) -> Result<Vec<EnsembleVerdict>> {
        tests
            .par_iter()
            .map(|t| self.predict_with_threshold(t, threshold))
            .collect()
    }

    /// Combine the first `n_members` votes into a verdict.
    ///
    /// Members are built independently per index, so the first `n` members of
    /// a larger ensemble are exactly the ensemble of size `n` with the same seed.
    pub fn aggregate(
        &self,
        example_id: &str,
        votes: &[EstimatorVote],
        n_members: usize,
        threshold: Option<f64>,
    ) -> EnsembleVerdict {
        let n_members = n_members.min(votes.len()).min(self.members.len());
        let nc = self.train.n_classes();
        let mut vote_counts = vec![0usize; nc];
        let mut cred_by_class = vec![0.0; nc];
        let mut cred_sum = 0.0;
        let mut conf_sum = 0.0;
        let mut feature_hits = vec![0usize; self.train.n_features()];
        let mut trusted = 0usize;

        for (vote, member) in votes[..n_members].iter().zip(&self.members) {
            if threshold.is_some_and(|t| vote.score <= t) {
                continue;
            }
            trusted += 1;
            vote_counts[vote.label.0] += 1;
            cred_by_class[vote.label.0] += vote.credibility;
            cred_sum += vote.credibility;
            conf_sum += vote.confidence;
            for &f in &member.patch.features {
                feature_hits[f] += 1;
            }
        }

        let trustworthy_fraction = if n_members == 0 { 0.0 } else { trusted as f64 / n_members as f64 };
        if trusted == 0 {
            return EnsembleVerdict {
                example_id: example_id.to_string(),
                outcome: Outcome::Unpredictable,
                mean_credibility: None,
                mean_confidence: None,
                trustworthy_fraction,
                vote_counts,
                frequent_features: Vec::new(),
            };
        }

        let top_votes = *vote_counts.iter().max().expect("non-empty class set");
        let mut winner = None;
        for c in 0..nc {
            if vote_counts[c] != top_votes {
                continue;
            }
            match winner {
                Some(w) if cred_by_class[c] <= cred_by_class[w] => {}
                _ => winner = Some(c),
            }
        }
        let winner = winner.expect("some class holds the top vote count");

        let needed = self.config.feature_report_fraction * trusted as f64 - 1e-9;
        let mut frequent: Vec<(usize, &str)> = feature_hits
            .iter()
            .enumerate()
            .filter(|&(_, &hits)| hits > 0 && hits as f64 >= needed)
            .map(|(f, &hits)| (hits, self.train.schema().feature(f).name()))
            .collect();
        frequent.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));

        EnsembleVerdict {
            example_id: example_id.to_string(),
            outcome: Outcome::Predicted(Label(winner)),
            mean_credibility: Some(cred_sum / trusted as f64),
            mean_confidence: Some(conf_sum / trusted as f64),
            trustworthy_fraction,
            vote_counts,
            frequent_features: frequent.into_iter().map(|(_, name)| name.to_string()).collect(),
        }
    }

    /// Serialize to the versioned text format, including the training set the
    /// conformal members refit on and the fitted models of standard members.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut w = RecordWriter::new();
        w.record(FORMAT_TAG).num(FORMAT_VERSION).end();
        w.record("n_estimators").num(c.n_estimators).end();
        w.record("feature_fraction").float(c.feature_fraction).end();
        w.record("bootstrap_fraction").float(c.bootstrap_fraction).end();
        w.record("sampling").text(c.sampling.as_str()).end();
        match c.credibility_threshold {
            Some(t) => w.record("threshold").float(t).end(),
            None => w.record("threshold").text("none").end(),
        }
        w.record("base_mode").text(c.base_mode.as_str()).end();
        w.record("seed").num(c.seed).end();
        w.record("feature_report_fraction").float(c.feature_report_fraction).end();
        write_params(&mut w, &c.nb);
        write_schema(&mut w, self.train.schema(), self.train.classes());

        w.record("training").num(self.train.len()).end();
        let mut row = Vec::new();
        for ex in self.train.examples() {
            row.clear();
            row.extend(ex.values.iter().map(|&v| Value::encode(v)));
            w.record("row")
                .text(&ex.id)
                .num(ex.label.map_or(0, |l| l.0))
                .floats(&row)
                .end();
        }

        for (i, m) in self.members.iter().enumerate() {
            let mut rec = w.record("member").num(i).num(m.patch.features.len());
            for &f in &m.patch.features {
                rec = rec.num(f);
            }
            rec.end();
            let mut rec = w.record("bag").num(m.patch.rows.len());
            for &r in &m.patch.rows {
                rec = rec.num(r);
            }
            rec.end();
            if let Estimator::Standard(model) = &m.estimator {
                model.write_core(&mut w);
            }
        }
        w.record("end").end();
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = RecordReader::new(text);
        let header = r.expect(FORMAT_TAG)?;
        check_version(&header, FORMAT_VERSION)?;

        let field = |r: &mut RecordReader<'_>, tag: &str| -> Result<crate::text_format::Record> {
            let rec = r.expect(tag)?;
            rec.expect_len(1)?;
            Ok(rec)
        };
        let n_estimators: usize = field(&mut r, "n_estimators")?.parse(0)?;
        let feature_fraction: f64 = field(&mut r, "feature_fraction")?.parse(0)?;
        let bootstrap_fraction: f64 = field(&mut r, "bootstrap_fraction")?.parse(0)?;
        let rec = field(&mut r, "sampling")?;
        let sampling = rec.text(0)?.parse().map_err(|e: Error| Error::format(rec.line, e.to_string()))?;
        let rec = field(&mut r, "threshold")?;
        let credibility_threshold = match rec.text(0)?.as_str() {
            "none" => None,
            _ => Some(rec.parse(0)?),
        };
        let rec = field(&mut r, "base_mode")?;
        let base_mode = rec.text(0)?.parse().map_err(|e: Error| Error::format(rec.line, e.to_string()))?;
        let seed: u64 = field(&mut r, "seed")?.parse(0)?;
        let feature_report_fraction: f64 = field(&mut r, "feature_report_fraction")?.parse(0)?;
        let nb = read_params(&mut r)?;
        let config = EnsembleConfig {
            n_estimators,
            feature_fraction,
            bootstrap_fraction,
            sampling,
            credibility_threshold,
            base_mode,
            seed,
            feature_report_fraction,
            nb,
        };
        config.validate().map_err(|e| Error::format(r.line(), e.to_string()))?;

        let (schema, classes) = read_schema(&mut r)?;
        let rec = field(&mut r, "training")?;
        let n_train: usize = rec.parse(0)?;
        let mut examples = Vec::with_capacity(n_train);
        for _ in 0..n_train {
            let rec = r.expect("row")?;
            rec.expect_len(2 + schema.len())?;
            let label: usize = rec.parse(1)?;
            let values = schema
                .features()
                .iter()
                .enumerate()
                .map(|(f, spec)| {
                    let x: f64 = rec.parse(2 + f)?;
                    Ok(decode(x, spec.kind()))
                })
                .collect::<Result<Vec<_>>>()?;
            examples.push(Example::new(rec.text(0)?, values, Some(Label(label))));
        }
        let line = r.line();
        let train = Dataset::new(schema, classes, examples).map_err(|e| Error::format(line, e.to_string()))?;

        let mut members = Vec::with_capacity(n_estimators);
        for i in 0..n_estimators {
            let rec = r.expect("member")?;
            if rec.parse::<usize>(0)? != i {
                return Err(Error::format(rec.line, format!("expected member {i}")));
            }
            let k: usize = rec.parse(1)?;
            rec.expect_len(2 + k)?;
            let features: Vec<usize> = rec.parse_all(2)?;
            validate_subset(&features, train.n_features()).map_err(|e| Error::format(rec.line, e.to_string()))?;

            let rec = r.expect("bag")?;
            let m: usize = rec.parse(0)?;
            rec.expect_len(1 + m)?;
            let rows: Vec<usize> = rec.parse_all(1)?;
            if rows.iter().any(|&row| row >= train.len()) {
                return Err(Error::format(rec.line, "bag row out of range"));
            }
            let patch = Patch { rows, features };
            let cp = ConformalPredictor::from_rows(&train, &patch.rows, patch.features.clone(), nb)
                .map_err(|e| Error::format(rec.line, e.to_string()))?;
            let estimator = match base_mode {
                BaseMode::ConformalCredibility => Estimator::Conformal(cp),
                BaseMode::StandardPosterior | BaseMode::StandardPlain => {
                    let sub_schema = cp.schema().clone();
                    let core = read_core(&mut r, &layout(&sub_schema), train.n_classes())?;
                    Estimator::Standard(NaiveBayesModel::from_core(sub_schema, train.classes().to_vec(), nb, core))
                }
            };
            members.push(Member { patch, estimator });
        }
        r.expect("end")?;
        Ok(ConformalEnsemble { config, train, members })
    }
}

fn decode(x: f64, kind: FeatureKind) -> Option<Value> {
    if x.is_nan() {
        return None;
    }
    Some(match kind {
        FeatureKind::Numeric => Value::Numeric(x),
        FeatureKind::Categorical => Value::Category(x as u32),
    })
}

fn make_estimator(train: &Dataset, patch: &Patch, config: &EnsembleConfig) -> Result<Estimator> {
    let cp = ConformalPredictor::from_rows(train, &patch.rows, patch.features.clone(), config.nb)?;
    Ok(match config.base_mode {
        BaseMode::ConformalCredibility => Estimator::Conformal(cp),
        BaseMode::StandardPosterior | BaseMode::StandardPlain => Estimator::Standard(cp.fit_bag()),
    })
}

fn member_vote(member: &Member, test: &Example, mode: BaseMode) -> Result<EstimatorVote> {
    match &member.estimator {
        Estimator::Conformal(cp) => {
            let f = cp.forced_prediction(test)?;
            Ok(EstimatorVote {
                label: f.label,
                score: f.credibility,
                credibility: f.credibility,
                confidence: f.confidence,
            })
        }
        Estimator::Standard(model) => {
            let projected = Example::new(
                test.id.clone(),
                member.patch.features.iter().map(|&f| test.values[f]).collect(),
                None,
            );
            let post = model.posterior(&projected)?;
            let top = argmax_first(post.probs());
            let credibility = post.probs()[top];
            Ok(EstimatorVote {
                label: Label(top),
                score: if mode == BaseMode::StandardPlain { 1.0 } else { credibility },
                credibility,
                confidence: 1.0 - post.runner_up(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    fn cohort(n: usize, d: usize, seed: u64) -> Dataset {
        generate_synthetic(&SyntheticConfig {
            n_examples: n,
            n_features: d,
            class_balance: 0.5,
            separation: 1.0,
            noise_rate: 0.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn subset_sizes_round_up() {
        let cfg = EnsembleConfig { feature_fraction: 0.75, ..Default::default() };
        assert_eq!(cfg.subset_size(41), 31);
        let cfg = EnsembleConfig { feature_fraction: 0.25, ..Default::default() };
        assert_eq!(cfg.subset_size(41), 11);
        assert_eq!(cfg.subset_size(2), 1);
        let cfg = EnsembleConfig { feature_fraction: 0.1, ..Default::default() };
        assert_eq!(cfg.subset_size(30), 3);
    }

    #[test]
    fn members_respect_patch_laws() {
        let train = cohort(60, 41, 1);
        let cfg = EnsembleConfig { n_estimators: 12, seed: 3, ..Default::default() };
        let ens = ConformalEnsemble::build(&train, &cfg).unwrap();
        assert_eq!(ens.len(), 12);
        for p in ens.patches() {
            assert_eq!(p.features.len(), 31);
            assert!(p.features.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(p.rows.len(), 60);
        }
    }

    fn vote(score: f64, label: usize) -> EstimatorVote {
        EstimatorVote { label: Label(label), score, credibility: score, confidence: 0.5 }
    }

    #[test]
    fn trustworthy_majority() {
        let train = cohort(20, 4, 2);
        let cfg = EnsembleConfig { n_estimators: 4, ..Default::default() };
        let ens = ConformalEnsemble::build(&train, &cfg).unwrap();
        // class 0 = cMCI
        let votes = [vote(0.90, 0), vote(0.86, 0), vote(0.70, 1), vote(0.90, 1)];
        let v = ens.aggregate("x", &votes, 4, Some(0.85));
        assert_eq!(v.outcome, Outcome::Predicted(Label(0)));
        assert_eq!(v.trustworthy_fraction, 0.75);
        assert_eq!(v.vote_counts, vec![2, 1]);
        assert!((v.mean_credibility.unwrap() - (0.90 + 0.86 + 0.90) / 3.0).abs() < 1e-15);

        let none = ens.aggregate("y", &votes, 4, Some(0.95));
        assert_eq!(none.outcome, Outcome::Unpredictable);
        assert_eq!(none.trustworthy_fraction, 0.0);
        assert_eq!(none.vote_counts, vec![0, 0]);
        assert!(none.mean_credibility.is_none() && none.frequent_features.is_empty());

        // strict comparison: a score equal to the threshold does not vote
        let edge = ens.aggregate("z", &[vote(0.85, 0)], 1, Some(0.85));
        assert_eq!(edge.outcome, Outcome::Unpredictable);
    }

    #[test]
    fn vote_ties_break_on_credibility_then_class_order() {
        let train = cohort(20, 4, 2);
        let cfg = EnsembleConfig { n_estimators: 4, ..Default::default() };
        let ens = ConformalEnsemble::build(&train, &cfg).unwrap();
        let v = ens.aggregate("x", &[vote(0.80, 0), vote(0.95, 1)], 2, None);
        assert_eq!(v.outcome, Outcome::Predicted(Label(1)));
        let v = ens.aggregate("x", &[vote(0.9, 1), vote(0.9, 0)], 2, None);
        assert_eq!(v.outcome, Outcome::Predicted(Label(0)));
    }

    #[test]
    fn frequent_features_follow_report_fraction() {
        let train = cohort(30, 8, 4);
        let cfg = EnsembleConfig { n_estimators: 10, feature_fraction: 0.5, ..Default::default() };
        let ens = ConformalEnsemble::build(&train, &cfg).unwrap();
        let votes: Vec<_> = (0..10).map(|i| vote(if i < 5 { 0.9 } else { 0.1 }, 0)).collect();
        let v = ens.aggregate("x", &votes, 10, Some(0.5));
        let trusted: Vec<&Patch> = ens.patches().take(5).collect();
        for name in &v.frequent_features {
            let f = train.schema().index_of(name).unwrap();
            let hits = trusted.iter().filter(|p| p.features.contains(&f)).count();
            assert!(hits >= 4, "{name} used by {hits} of 5");
        }
        for f in 0..8 {
            let hits = trusted.iter().filter(|p| p.features.contains(&f)).count();
            let name = train.schema().feature(f).name().to_string();
            assert_eq!(hits >= 4, v.frequent_features.contains(&name));
        }
    }

    #[test]
    fn identity_single_member_is_plain_naive_bayes() {
        let train = cohort(40, 5, 5);
        let ens = ConformalEnsemble::build(&train, &EnsembleConfig::simple_nb()).unwrap();
        let direct = NaiveBayesModel::fit(&train, &NbParams::default()).unwrap();
        assert_eq!(ens.member_model(0).unwrap(), &direct);
        for ex in cohort(10, 5, 6).examples() {
            let v = ens.predict(ex).unwrap();
            assert_eq!(v.outcome.label(), Some(direct.posterior(ex).unwrap().argmax()));
            assert_eq!(v.trustworthy_fraction, 1.0);
        }
    }

    #[test]
    fn build_is_deterministic() {
        let train = cohort(40, 6, 8);
        let cfg = EnsembleConfig { n_estimators: 5, seed: 42, ..Default::default() };
        let a = ConformalEnsemble::build(&train, &cfg).unwrap();
        let b = ConformalEnsemble::build(&train, &cfg).unwrap();
        assert_eq!(a, b);
        let tests = cohort(6, 6, 9);
        assert_eq!(a.predict_batch(tests.examples()).unwrap(), b.predict_batch(tests.examples()).unwrap());
    }

    #[test]
    fn smaller_ensemble_is_a_prefix() {
        let train = cohort(40, 6, 8);
        let big = ConformalEnsemble::build(&train, &EnsembleConfig { n_estimators: 8, ..Default::default() }).unwrap();
        let small = ConformalEnsemble::build(&train, &EnsembleConfig { n_estimators: 3, ..Default::default() }).unwrap();
        assert!(big.patches().take(3).eq(small.patches()));
        let probe = cohort(3, 6, 1);
        let test = &probe.examples()[0];
        let votes = big.votes(test).unwrap();
        assert_eq!(big.aggregate(&test.id, &votes, 3, Some(0.5)), small.predict_with_threshold(test, Some(0.5)).unwrap());
    }

    #[test]
    fn degenerate_bootstrap_falls_back_to_stratified() {
        // one example of the minority class: a plain bootstrap of 3 rows misses it often
        let labels = vec![Label(0), Label(0), Label(1)];
        let cfg = EnsembleConfig { n_estimators: 1, feature_fraction: 1.0, ..Default::default() };
        for i in 0..200 {
            let p = draw_patch(&labels, 2, 1, &cfg, i);
            assert!(p.rows.contains(&2), "member {i}: {:?}", p.rows);
        }
        let rows = stratified_bootstrap(&[Label(0); 9].iter().copied().chain([Label(1)]).collect::<Vec<_>>(), 2, 10, &mut rng_for(0, Stream::Estimator, &[]));
        assert_eq!(rows.len(), 10);
        assert!(rows.contains(&9));
    }

    #[test]
    fn config_validation() {
        let bad = [
            EnsembleConfig { n_estimators: 0, ..Default::default() },
            EnsembleConfig { feature_fraction: 0.0, ..Default::default() },
            EnsembleConfig { feature_fraction: 1.5, ..Default::default() },
            EnsembleConfig { bootstrap_fraction: 0.0, ..Default::default() },
            EnsembleConfig { credibility_threshold: Some(1.0), ..Default::default() },
            EnsembleConfig { feature_report_fraction: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert_eq!("posterior".parse::<BaseMode>().unwrap(), BaseMode::StandardPosterior);
        assert!("bogus".parse::<BaseMode>().is_err());
    }

    #[test]
    fn text_round_trip_preserves_verdicts() {
        let train = cohort(30, 5, 10);
        let tests = cohort(8, 5, 11);
        for mode in [BaseMode::ConformalCredibility, BaseMode::StandardPosterior, BaseMode::StandardPlain] {
            let cfg = EnsembleConfig {
                n_estimators: 4,
                base_mode: mode,
                credibility_threshold: Some(0.6),
                ..Default::default()
            };
            let ens = ConformalEnsemble::build(&train, &cfg).unwrap();
            let text = ens.to_text();
            let back = ConformalEnsemble::from_text(&text).unwrap();
            assert_eq!(back.to_text(), text);
            assert_eq!(
                ens.predict_batch(tests.examples()).unwrap(),
                back.predict_batch(tests.examples()).unwrap()
            );
        }
    }

    #[test]
    fn text_rejects_version_and_corruption() {
        let ens = ConformalEnsemble::build(&cohort(20, 3, 1), &EnsembleConfig { n_estimators: 2, ..Default::default() }).unwrap();
        let text = ens.to_text();
        let v2 = text.replacen("cpens-ensemble\t1", "cpens-ensemble\t2", 1);
        assert!(matches!(ConformalEnsemble::from_text(&v2), Err(Error::VersionMismatch { .. })));
        let cut = &text[..text.len() / 2];
        assert!(matches!(ConformalEnsemble::from_text(cut), Err(Error::ModelFormat { .. })));
        let bad_row = text.replacen("bag\t20\t", "bag\t20\t999\t", 1);
        assert!(ConformalEnsemble::from_text(&bad_row).is_err());
    }
}
