//! Transductive conformal prediction over one training bag.
//!
//! For a test example and a candidate label, the naive Bayes model is refit on
//! the bag augmented with the labeled test example, and every member of the
//! augmented bag (the test example included) is scored with `-ln posterior`
//! of its own label. The p-value of the candidate is the fraction of members
//! whose score is at least the test example's.

use std::collections::HashSet;

use crate::data::{Dataset, Example, Label, Schema};
use crate::error::{Error, Result};
use crate::naive_bayes::{argmax_first, encode_row, layout, rows_of, runner_up, Column, NaiveBayesModel, NbCore, NbParams};

/// Per-label p-values, kept as exact counts over the augmented bag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PValues {
    counts: Vec<usize>,
    n: usize,
}

impl PValues {
    pub fn new(counts: Vec<usize>, n: usize) -> Self {
        debug_assert!(counts.iter().all(|&c| c >= 1 && c <= n));
        PValues { counts, n }
    }

    /// Number of augmented-bag members scoring at least as high as the test example, per label.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Size of the augmented bag (training bag plus the test example).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, label: Label) -> f64 {
        self.counts[label.0] as f64 / self.n as f64
    }

    pub fn values(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    /// Labels whose p-value exceeds `epsilon`, in class order.
    pub fn region(&self, epsilon: f64) -> Vec<Label> {
        self.values()
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p > epsilon)
            .map(|(i, _)| Label(i))
            .collect()
    }

    /// Highest-p label (earliest class on ties) with its credibility and confidence.
    pub fn forced(&self) -> ForcedPrediction {
        let values = self.values();
        let top = argmax_first(&values);
        ForcedPrediction {
            label: Label(top),
            credibility: values[top],
            confidence: 1.0 - runner_up(&values, top),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcedPrediction {
    pub label: Label,
    /// Largest p-value.
    pub credibility: f64,
    /// One minus the second-largest p-value.
    pub confidence: f64,
}

/// A conformal predictor over one bag of training examples and a feature subset.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalPredictor {
    source_schema: Schema,
    schema: Schema,
    feature_subset: Vec<usize>,
    classes: Vec<String>,
    params: NbParams,
    columns: Vec<Column>,
    bag: Vec<f64>,
    bag_labels: Vec<usize>,
}

impl ConformalPredictor {
    /// Every example of `bag` joins the training bag.
    pub fn new(bag: &Dataset, feature_subset: Vec<usize>, params: NbParams) -> Result<Self> {
        let rows: Vec<usize> = (0..bag.len()).collect();
        Self::from_rows(bag, &rows, feature_subset, params)
    }

    /// The training bag is `data` at `rows`; repeated indices appear repeatedly.
    pub fn from_rows(data: &Dataset, rows: &[usize], feature_subset: Vec<usize>, params: NbParams) -> Result<Self> {
        params.validate()?;
        validate_subset(&feature_subset, data.n_features())?;
        if rows.is_empty() {
            return Err(Error::data("conformal predictor needs a non-empty training bag"));
        }
        let schema = data.schema().project(&feature_subset);
        let columns = layout(&schema);
        let mut bag = Vec::with_capacity(rows.len() * feature_subset.len());
        let mut bag_labels = Vec::with_capacity(rows.len());
        let mut present = vec![false; data.n_classes()];
        let mut projected = Vec::with_capacity(feature_subset.len());
        for &r in rows {
            let ex = &data.examples()[r];
            let label = ex
                .label
                .ok_or_else(|| Error::data(format!("bag example `{}` has no label", ex.id)))?;
            present[label.0] = true;
            projected.clear();
            projected.extend(feature_subset.iter().map(|&f| ex.values[f]));
            encode_row(&projected, &mut bag);
            bag_labels.push(label.0);
        }
        if let Some(c) = present.iter().position(|p| !p) {
            return Err(Error::ClassAbsent(data.classes()[c].clone()));
        }
        Ok(ConformalPredictor {
            source_schema: data.schema().clone(),
            schema,
            feature_subset,
            classes: data.classes().to_vec(),
            params,
            columns,
            bag,
            bag_labels,
        })
    }

    pub fn feature_subset(&self) -> &[usize] {
        &self.feature_subset
    }

    pub fn bag_len(&self) -> usize {
        self.bag_labels.len()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// The projected schema the underlying model is fit on.
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    fn encode_test(&self, test: &Example) -> Result<Vec<f64>> {
        self.source_schema.validate_values(&test.values)?;
        let projected: Vec<_> = self.feature_subset.iter().map(|&f| test.values[f]).collect();
        let mut row = Vec::with_capacity(projected.len());
        encode_row(&projected, &mut row);
        Ok(row)
    }

    fn refit(&self, test_row: &[f64], candidate: usize) -> NbCore {
        let width = self.columns.len();
        let rows = rows_of(&self.bag, &self.bag_labels, width).chain(std::iter::once((test_row, candidate)));
        NbCore::fit(&self.columns, self.classes.len(), rows, &self.params)
            .expect("bag holds every class by construction")
    }

    /// Nonconformity scores of the augmented bag for `candidate`: the training
    /// bag in order, then the test example last.
    pub fn augmented_scores(&self, test: &Example, candidate: Label) -> Result<Vec<f64>> {
        self.check_label(candidate)?;
        let test_row = self.encode_test(test)?;
        let core = self.refit(&test_row, candidate.0);
        let width = self.columns.len();
        let mut joint = vec![0.0; self.classes.len()];
        let mut scores: Vec<f64> = rows_of(&self.bag, &self.bag_labels, width)
            .map(|(row, l)| {
                core.log_joint(&self.columns, row, &mut joint);
                NbCore::nonconformity_from_joint(&joint, l)
            })
            .collect();
        core.log_joint(&self.columns, &test_row, &mut joint);
        scores.push(NbCore::nonconformity_from_joint(&joint, candidate.0));
        Ok(scores)
    }

    pub fn p_values(&self, test: &Example) -> Result<PValues> {
        let test_row = self.encode_test(test)?;
        let width = self.columns.len();
        let nc = self.classes.len();
        let mut joint = vec![0.0; nc];
        let mut counts = Vec::with_capacity(nc);
        for candidate in 0..nc {
            let core = self.refit(&test_row, candidate);
            core.log_joint(&self.columns, &test_row, &mut joint);
            let alpha_test = NbCore::nonconformity_from_joint(&joint, candidate);
            let mut count = 1;
            for (row, l) in rows_of(&self.bag, &self.bag_labels, width) {
                core.log_joint(&self.columns, row, &mut joint);
                if NbCore::nonconformity_from_joint(&joint, l) >= alpha_test {
                    count += 1;
                }
            }
            counts.push(count);
        }
        Ok(PValues::new(counts, self.bag_len() + 1))
    }

    /// Labels with p-value strictly above `epsilon`.
    pub fn prediction_region(&self, test: &Example, epsilon: f64) -> Result<Vec<Label>> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::param(format!("significance level must be in (0, 1), got {epsilon}")));
        }
        Ok(self.p_values(test)?.region(epsilon))
    }

    pub fn forced_prediction(&self, test: &Example) -> Result<ForcedPrediction> {
        Ok(self.p_values(test)?.forced())
    }

    /// A plain naive Bayes model fit on the bag alone.
    pub(crate) fn fit_bag(&self) -> NaiveBayesModel {
        let rows = rows_of(&self.bag, &self.bag_labels, self.columns.len());
        let core = NbCore::fit(&self.columns, self.classes.len(), rows, &self.params)
            .expect("bag holds every class by construction");
        NaiveBayesModel::from_core(self.schema.clone(), self.classes.clone(), self.params, core)
    }

    fn check_label(&self, label: Label) -> Result<()> {
        if label.0 >= self.classes.len() {
            return Err(Error::param(format!("label index {} is not a class", label.0)));
        }
        Ok(())
    }
}

pub(crate) fn validate_subset(subset: &[usize], n_features: usize) -> Result<()> {
    let mut seen = HashSet::with_capacity(subset.len());
    for &f in subset {
        if f >= n_features {
            return Err(Error::param(format!("feature index {f} out of range for {n_features} features")));
        }
        if !seen.insert(f) {
            return Err(Error::param(format!("feature index {f} repeated in subset")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSpec, Value};

    fn dataset(points: &[(f64, usize)]) -> Dataset {
        let schema = Schema::new(vec![FeatureSpec::numeric("x")]).unwrap();
        let examples = points
            .iter()
            .enumerate()
            .map(|(i, &(x, l))| Example::new(i.to_string(), vec![Some(Value::Numeric(x))], Some(Label(l))))
            .collect();
        Dataset::new(schema, vec!["cMCI".into(), "sMCI".into()], examples).unwrap()
    }

    fn test_at(x: f64) -> Example {
        Example::new("t", vec![Some(Value::Numeric(x))], None)
    }

    #[test]
    fn region_thresholds() {
        let p = PValues::new(vec![6, 1], 10);
        assert_eq!(p.region(0.05), vec![Label(0), Label(1)]);
        assert_eq!(p.region(0.25), vec![Label(0)]);
        assert!(p.region(0.7).is_empty());
    }

    #[test]
    fn forced_definitions() {
        let f = PValues::new(vec![6, 1], 10).forced();
        assert_eq!(f.label, Label(0));
        assert!((f.credibility - 0.6).abs() < 1e-15);
        assert!((f.confidence - 0.9).abs() < 1e-15);

        let tie = PValues::new(vec![5, 5], 10).forced();
        assert_eq!(tie.label, Label(0));
        assert_eq!(tie.credibility, 0.5);
        assert_eq!(tie.confidence, 0.5);

        let multi = PValues::new(vec![2, 9, 4], 10).forced();
        assert_eq!(multi.label, Label(1));
        assert!((multi.confidence - 0.6).abs() < 1e-15);
    }

    #[test]
    fn confidence_reconstructs_runner_up() {
        // credibility 0.888 and confidence 0.864 imply a runner-up p-value of 0.136
        let f = ForcedPrediction { label: Label(0), credibility: 0.888, confidence: 0.864 };
        assert!((1.0 - f.confidence - 0.136).abs() < 1e-12);
        assert!(f.credibility >= 1.0 - f.confidence);
    }

    #[test]
    fn strictly_largest_test_score_gives_one_over_n() {
        // labeled cMCI but sitting in the middle of the sMCI cluster
        let bag = dataset(&[(0.0, 0), (1.0, 0), (2.0, 0), (10.0, 1), (11.0, 1), (12.0, 1)]);
        let cp = ConformalPredictor::new(&bag, vec![0], NbParams::default()).unwrap();
        let scores = cp.augmented_scores(&test_at(11.5), Label(0)).unwrap();
        assert!(scores[..6].iter().all(|&s| s < scores[6]), "{scores:?}");
        let p = cp.p_values(&test_at(11.5)).unwrap();
        assert_eq!(p.counts()[0], 1);
        assert!((p.get(Label(0)) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn identical_scores_give_p_one() {
        // All features missing and the augmented bag balanced: every member scores ln 2.
        let schema = Schema::new(vec![FeatureSpec::numeric("x")]).unwrap();
        let ex = |l| Example::new("", vec![None], Some(Label(l)));
        let ds = Dataset::new(schema, vec!["a".into(), "b".into()], vec![ex(0), ex(0), ex(1)]).unwrap();
        let cp = ConformalPredictor::new(&ds, vec![0], NbParams::default()).unwrap();
        let test = Example::new("t", vec![None], None);
        let scores = cp.augmented_scores(&test, Label(1)).unwrap();
        assert!(scores.iter().all(|&s| s == scores[0]));
        let p = cp.p_values(&test).unwrap();
        assert_eq!(p.get(Label(1)), 1.0);
    }

    #[test]
    fn minimal_bag_granularity() {
        let cp = ConformalPredictor::new(&dataset(&[(0.0, 0), (3.0, 1)]), vec![0], NbParams::default()).unwrap();
        for x in [-4.0, 0.0, 1.4, 1.5, 2.0, 9.0] {
            let p = cp.p_values(&test_at(x)).unwrap();
            assert_eq!(p.n(), 3);
            for v in p.values() {
                assert!([1.0 / 3.0, 2.0 / 3.0, 1.0].contains(&v), "{v}");
            }
        }
    }

    #[test]
    fn region_rejects_bad_epsilon() {
        let cp = ConformalPredictor::new(&dataset(&[(0.0, 0), (3.0, 1)]), vec![0], NbParams::default()).unwrap();
        assert!(cp.prediction_region(&test_at(0.0), 0.0).is_err());
        assert!(cp.prediction_region(&test_at(0.0), 1.0).is_err());
    }

    #[test]
    fn construction_errors() {
        let ds = dataset(&[(0.0, 0), (3.0, 0)]);
        assert!(matches!(
            ConformalPredictor::new(&ds, vec![0], NbParams::default()),
            Err(Error::ClassAbsent(_))
        ));
        let ds = dataset(&[(0.0, 0), (3.0, 1)]);
        assert!(ConformalPredictor::new(&ds, vec![1], NbParams::default()).is_err());
        assert!(ConformalPredictor::new(&ds, vec![0, 0], NbParams::default()).is_err());
        assert!(ConformalPredictor::from_rows(&ds, &[], vec![0], NbParams::default()).is_err());
    }

    #[test]
    fn feature_subset_applies_to_test() {
        let schema = Schema::new(vec![FeatureSpec::numeric("x"), FeatureSpec::numeric("noise")]).unwrap();
        let ex = |x: f64, z: f64, l| {
            Example::new("", vec![Some(Value::Numeric(x)), Some(Value::Numeric(z))], Some(Label(l)))
        };
        let ds = Dataset::new(
            schema,
            vec!["a".into(), "b".into()],
            vec![ex(0.0, 5.0, 0), ex(0.5, -5.0, 0), ex(4.0, 1.0, 1), ex(4.5, 0.0, 1)],
        )
        .unwrap();
        let cp = ConformalPredictor::new(&ds, vec![0], NbParams::default()).unwrap();
        let a = cp.p_values(&Example::new("t", vec![Some(Value::Numeric(0.2)), Some(Value::Numeric(100.0))], None)).unwrap();
        let b = cp.p_values(&Example::new("t", vec![Some(Value::Numeric(0.2)), Some(Value::Numeric(-7.0))], None)).unwrap();
        assert_eq!(a, b);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn bag_strategy() -> impl Strategy<Value = (Vec<(f64, usize)>, f64)> {
            (
                prop::collection::vec((-5.0f64..5.0, 0usize..2), 2..12),
                -6.0f64..6.0,
            )
                .prop_filter("both classes", |(pts, _)| pts.iter().any(|p| p.1 == 0) && pts.iter().any(|p| p.1 == 1))
        }

        proptest! {
            #[test]
            fn granularity_and_nesting((pts, x) in bag_strategy(), e1 in 0.01f64..0.99, e2 in 0.01f64..0.99) {
                let cp = ConformalPredictor::new(&dataset(&pts), vec![0], NbParams::default()).unwrap();
                let p = cp.p_values(&test_at(x)).unwrap();
                prop_assert_eq!(p.n(), pts.len() + 1);
                for &c in p.counts() {
                    prop_assert!(c >= 1 && c <= p.n());
                }
                let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
                let big = p.region(lo);
                prop_assert!(p.region(hi).iter().all(|l| big.contains(l)));

                let f = p.forced();
                prop_assert!(f.credibility >= 1.0 - f.confidence - 1e-15);
                if f.credibility > lo {
                    prop_assert!(big.contains(&f.label));
                }
            }
        }
    }
}
