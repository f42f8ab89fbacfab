//! Naive Bayes over mixed numeric/categorical features, and the
//! `-ln posterior` nonconformity score derived from it.
//!
//! Numeric features get one Gaussian per class (maximum-likelihood variance,
//! clamped from below). Categorical features get Laplace-smoothed class
//! conditional frequencies. Missing values contribute nothing to a score.
//! All arithmetic stays in the log domain until the final normalization.

use std::f64::consts::PI;

use crate::data::{Dataset, Example, FeatureKind, FeatureSpec, Label, Schema, Value};
use crate::error::{Error, Result};
use crate::text_format::{RecordReader, RecordWriter};

/// Posteriors are clamped to this value before taking the log, so every
/// nonconformity score is finite.
pub const POSTERIOR_FLOOR: f64 = 1e-300;

const FORMAT_TAG: &str = "cpens-naive-bayes";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbParams {
    /// Laplace pseudo-count for categorical features.
    pub smoothing: f64,
    /// Variance floor as a fraction of the feature's variance over the whole training set.
    pub relative_variance_floor: f64,
    /// Absolute lower bound on any stored variance.
    pub absolute_variance_floor: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams {
            smoothing: 1.0,
            relative_variance_floor: 1e-9,
            absolute_variance_floor: 1e-12,
        }
    }
}

impl NbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(Error::param(format!("smoothing must be positive, got {}", self.smoothing)));
        }
        if !(self.relative_variance_floor >= 0.0 && self.relative_variance_floor.is_finite()) {
            return Err(Error::param("relative variance floor must be a non-negative number"));
        }
        if !(self.absolute_variance_floor > 0.0 && self.absolute_variance_floor.is_finite()) {
            return Err(Error::param("absolute variance floor must be positive"));
        }
        Ok(())
    }
}

/// How the kernel reads one column of an encoded row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Column {
    Numeric,
    Categorical(usize),
}

pub(crate) fn layout(schema: &Schema) -> Vec<Column> {
    schema
        .features()
        .iter()
        .map(|f| match f.kind() {
            FeatureKind::Numeric => Column::Numeric,
            FeatureKind::Categorical => Column::Categorical(f.categories().len()),
        })
        .collect()
}

/// Dense row encoding: missing is NaN, categories are their index.
pub(crate) fn encode_row(values: &[Option<Value>], out: &mut Vec<f64>) {
    out.extend(values.iter().map(|&v| Value::encode(v)));
}

/// Fitted parameters in flat `[feature * n_classes + class]` arrays.
///
/// This is the part refit on every augmented bag, so it carries no schema
/// and keeps its allocation count small.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NbCore {
    n_classes: usize,
    priors: Vec<f64>,
    log_priors: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
    half_inv_var: Vec<f64>,
    log_norm: Vec<f64>,
    /// Start of each categorical feature's block in `cat_probs`, in categories.
    cat_offset: Vec<usize>,
    /// `[(cat_offset[f] + category) * n_classes + class]`
    cat_probs: Vec<f64>,
    cat_log_probs: Vec<f64>,
}

impl NbCore {
    /// Fit on `(encoded row, class index)` pairs. The iterator is walked twice.
    pub(crate) fn fit<'r, I>(
        columns: &[Column],
        n_classes: usize,
        rows: I,
        params: &NbParams,
    ) -> std::result::Result<NbCore, usize>
    where
        I: Iterator<Item = (&'r [f64], usize)> + Clone,
    {
        let d = columns.len();
        let nc = n_classes;
        let mut cat_offset = vec![0usize; d];
        let mut n_cat_cells = 0usize;
        for (f, col) in columns.iter().enumerate() {
            if let Column::Categorical(k) = *col {
                cat_offset[f] = n_cat_cells;
                n_cat_cells += k;
            }
        }

        let mut class_n = vec![0usize; nc];
        let mut sum = vec![0.0; d * nc];
        let mut cnt = vec![0usize; d * nc];
        let mut glob_sum = vec![0.0; d];
        let mut glob_cnt = vec![0usize; d];
        let mut cat_counts = vec![0.0; n_cat_cells * nc];

        for (row, c) in rows.clone() {
            class_n[c] += 1;
            for (f, col) in columns.iter().enumerate() {
                let x = row[f];
                if x.is_nan() {
                    continue;
                }
                cnt[f * nc + c] += 1;
                match *col {
                    Column::Numeric => {
                        sum[f * nc + c] += x;
                        glob_sum[f] += x;
                        glob_cnt[f] += 1;
                    }
                    Column::Categorical(_) => {
                        cat_counts[(cat_offset[f] + x as usize) * nc + c] += 1.0;
                    }
                }
            }
        }
        if let Some(absent) = class_n.iter().position(|&n| n == 0) {
            return Err(absent);
        }

        let mut mean = vec![0.0; d * nc];
        let mut glob_mean = vec![0.0; d];
        for (f, col) in columns.iter().enumerate() {
            if *col != Column::Numeric {
                continue;
            }
            if glob_cnt[f] > 0 {
                glob_mean[f] = glob_sum[f] / glob_cnt[f] as f64;
            }
            for c in 0..nc {
                let i = f * nc + c;
                mean[i] = if cnt[i] > 0 { sum[i] / cnt[i] as f64 } else { glob_mean[f] };
            }
        }

        let mut ss = vec![0.0; d * nc];
        let mut glob_ss = vec![0.0; d];
        for (row, c) in rows {
            for (f, col) in columns.iter().enumerate() {
                let x = row[f];
                if *col != Column::Numeric || x.is_nan() {
                    continue;
                }
                let dev = x - mean[f * nc + c];
                ss[f * nc + c] += dev * dev;
                let gdev = x - glob_mean[f];
                glob_ss[f] += gdev * gdev;
            }
        }

        let mut var = vec![1.0; d * nc];
        for (f, col) in columns.iter().enumerate() {
            if *col != Column::Numeric {
                continue;
            }
            let glob_var = if glob_cnt[f] > 0 { glob_ss[f] / glob_cnt[f] as f64 } else { 1.0 };
            let floor = (params.relative_variance_floor * glob_var).max(params.absolute_variance_floor);
            for c in 0..nc {
                let i = f * nc + c;
                let raw = if cnt[i] > 0 { ss[i] / cnt[i] as f64 } else { glob_var };
                var[i] = raw.max(floor);
            }
        }

        let mut cat_probs = vec![0.0f64; n_cat_cells * nc];
        for (f, col) in columns.iter().enumerate() {
            if let Column::Categorical(k) = *col {
                for c in 0..nc {
                    let denom = cnt[f * nc + c] as f64 + params.smoothing * k as f64;
                    for cat in 0..k {
                        let i = (cat_offset[f] + cat) * nc + c;
                        cat_probs[i] = (cat_counts[i] + params.smoothing) / denom;
                    }
                }
            }
        }

        let total: usize = class_n.iter().sum();
        let priors = class_n.iter().map(|&n| n as f64 / total as f64).collect();
        Ok(NbCore::from_parts(nc, priors, mean, var, cat_offset, cat_probs))
    }

    fn from_parts(
        n_classes: usize,
        priors: Vec<f64>,
        mean: Vec<f64>,
        var: Vec<f64>,
        cat_offset: Vec<usize>,
        cat_probs: Vec<f64>,
    ) -> NbCore {
        NbCore {
            n_classes,
            log_priors: priors.iter().map(|p| p.ln()).collect(),
            priors,
            half_inv_var: var.iter().map(|v| 0.5 / v).collect(),
            log_norm: var.iter().map(|v| -0.5 * (2.0 * PI * v).ln()).collect(),
            mean,
            var,
            cat_offset,
            cat_log_probs: cat_probs.iter().map(|p| p.ln()).collect(),
            cat_probs,
        }
    }

    /// Unnormalized per-class log scores: log prior plus log likelihoods.
    #[inline]
    pub(crate) fn log_joint(&self, columns: &[Column], row: &[f64], out: &mut [f64]) {
        let nc = self.n_classes;
        out.copy_from_slice(&self.log_priors);
        for (f, col) in columns.iter().enumerate() {
            let x = row[f];
            if x.is_nan() {
                continue;
            }
            match *col {
                Column::Numeric => {
                    let base = f * nc;
                    for (c, o) in out.iter_mut().enumerate() {
                        let dev = x - self.mean[base + c];
                        *o += self.log_norm[base + c] - dev * dev * self.half_inv_var[base + c];
                    }
                }
                Column::Categorical(_) => {
                    let base = (self.cat_offset[f] + x as usize) * nc;
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += self.cat_log_probs[base + c];
                    }
                }
            }
        }
    }

    /// `-ln max(posterior[label], POSTERIOR_FLOOR)` from a row's log joint scores.
    ///
    /// Computed as `(m - s_label) + ln(1 + Σ exp(s_c - m))` over the classes
    /// other than the top-scoring one, so a label holding nearly all the
    /// posterior mass keeps its small positive score instead of rounding to 0.
    #[inline]
    pub(crate) fn nonconformity_from_joint(joint: &[f64], label: usize) -> f64 {
        let (m, rest) = split_max(joint);
        ((m - joint[label]) + rest.ln_1p()).min(-POSTERIOR_FLOOR.ln())
    }
}

/// The largest element and `Σ exp(x - max)` over the others.
#[inline]
fn split_max(xs: &[f64]) -> (f64, f64) {
    let (imax, &m) = xs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one class");
    if m == f64::NEG_INFINITY {
        return (m, 0.0);
    }
    let rest = xs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != imax)
        .map(|(_, &x)| (x - m).exp())
        .sum();
    (m, rest)
}

/// `ln Σ exp(xᵢ)` without overflow, precise when one term dominates.
#[inline]
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let (m, rest) = split_max(xs);
    m + rest.ln_1p()
}

/// Class probabilities aligned with the class set.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    probs: Vec<f64>,
}

impl Posterior {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Most probable class; ties go to the earliest class.
    pub fn argmax(&self) -> Label {
        Label(argmax_first(&self.probs))
    }

    pub fn max(&self) -> f64 {
        self.probs[argmax_first(&self.probs)]
    }

    /// Largest probability among the classes other than [`Posterior::argmax`].
    pub fn runner_up(&self) -> f64 {
        let top = argmax_first(&self.probs);
        runner_up(&self.probs, top)
    }
}

pub(crate) fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn runner_up(xs: &[f64], top: usize) -> f64 {
    xs.iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &x)| x)
        .fold(0.0, f64::max)
}

/// A fitted naive Bayes classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel {
    schema: Schema,
    classes: Vec<String>,
    params: NbParams,
    columns: Vec<Column>,
    core: NbCore,
}

impl NaiveBayesModel {
    /// Fit on every labeled example of `train`; unlabeled examples are ignored.
    pub fn fit(train: &Dataset, params: &NbParams) -> Result<Self> {
        params.validate()?;
        let columns = layout(train.schema());
        let width = columns.len();
        let mut data = Vec::with_capacity(train.len() * width);
        let mut labels = Vec::with_capacity(train.len());
        for ex in train.examples() {
            if let Some(l) = ex.label {
                encode_row(&ex.values, &mut data);
                labels.push(l.0);
            }
        }
        let rows = rows_of(&data, &labels, width);
        let core = NbCore::fit(&columns, train.n_classes(), rows, params)
            .map_err(|c| Error::ClassAbsent(train.classes()[c].clone()))?;
        Ok(NaiveBayesModel {
            schema: train.schema().clone(),
            classes: train.classes().to_vec(),
            params: *params,
            columns,
            core,
        })
    }

    pub(crate) fn from_core(schema: Schema, classes: Vec<String>, params: NbParams, core: NbCore) -> Self {
        NaiveBayesModel {
            columns: layout(&schema),
            schema,
            classes,
            params,
            core,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn params(&self) -> &NbParams {
        &self.params
    }

    pub fn priors(&self) -> &[f64] {
        &self.core.priors
    }

    /// Per-class `(mean, variance)` of a numeric feature.
    pub fn gaussian(&self, feature: usize) -> Option<Vec<(f64, f64)>> {
        let nc = self.core.n_classes;
        (self.columns.get(feature)? == &Column::Numeric).then(|| {
            (0..nc)
                .map(|c| (self.core.mean[feature * nc + c], self.core.var[feature * nc + c]))
                .collect()
        })
    }

    /// `P(category | class)` of a categorical feature, indexed `[class][category]`.
    pub fn categorical(&self, feature: usize) -> Option<Vec<Vec<f64>>> {
        let nc = self.core.n_classes;
        match *self.columns.get(feature)? {
            Column::Categorical(k) => Some(
                (0..nc)
                    .map(|c| {
                        (0..k)
                            .map(|cat| self.core.cat_probs[(self.core.cat_offset[feature] + cat) * nc + c])
                            .collect()
                    })
                    .collect(),
            ),
            Column::Numeric => None,
        }
    }

    fn joint(&self, example: &Example) -> Result<Vec<f64>> {
        self.schema.validate_values(&example.values)?;
        let mut row = Vec::with_capacity(self.columns.len());
        encode_row(&example.values, &mut row);
        let mut joint = vec![0.0; self.core.n_classes];
        self.core.log_joint(&self.columns, &row, &mut joint);
        Ok(joint)
    }

    pub fn posterior(&self, example: &Example) -> Result<Posterior> {
        let joint = self.joint(example)?;
        let lse = log_sum_exp(&joint);
        Ok(Posterior {
            probs: joint.iter().map(|s| (s - lse).exp()).collect(),
        })
    }

    /// `-ln P(candidate | example)`, with the posterior clamped at [`POSTERIOR_FLOOR`].
    pub fn nonconformity(&self, example: &Example, candidate: Label) -> Result<f64> {
        if candidate.0 >= self.core.n_classes {
            return Err(Error::param(format!("label index {} is not a model class", candidate.0)));
        }
        let joint = self.joint(example)?;
        Ok(NbCore::nonconformity_from_joint(&joint, candidate.0))
    }

    /// Serialize to the versioned text format.
    pub fn to_text(&self) -> String {
        let mut w = RecordWriter::new();
        w.record(FORMAT_TAG).num(FORMAT_VERSION).end();
        write_params(&mut w, &self.params);
        write_schema(&mut w, &self.schema, &self.classes);
        self.write_core(&mut w);
        w.record("end").end();
        w.finish()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = RecordReader::new(text);
        let header = r.expect(FORMAT_TAG)?;
        check_version(&header, FORMAT_VERSION)?;
        let params = read_params(&mut r)?;
        let (schema, classes) = read_schema(&mut r)?;
        let columns = layout(&schema);
        let core = read_core(&mut r, &columns, classes.len())?;
        r.expect("end")?;
        Ok(NaiveBayesModel::from_core(schema, classes, params, core))
    }

    pub(crate) fn write_core(&self, w: &mut RecordWriter) {
        write_core(w, &self.columns, &self.core);
    }
}

pub(crate) fn rows_of<'a>(
    data: &'a [f64],
    labels: &'a [usize],
    width: usize,
) -> impl Iterator<Item = (&'a [f64], usize)> + Clone + 'a {
    labels.iter().enumerate().map(move |(i, &l)| (&data[i * width..(i + 1) * width], l))
}

pub(crate) fn check_version(header: &crate::text_format::Record, expected: u32) -> Result<()> {
    let found = header.text(0)?;
    if found.parse::<u32>().ok() != Some(expected) {
        return Err(Error::VersionMismatch { found, expected });
    }
    Ok(())
}

pub(crate) fn write_params(w: &mut RecordWriter, p: &NbParams) {
    w.record("nb-params")
        .float(p.smoothing)
        .float(p.relative_variance_floor)
        .float(p.absolute_variance_floor)
        .end();
}

pub(crate) fn read_params(r: &mut RecordReader<'_>) -> Result<NbParams> {
    let rec = r.expect("nb-params")?;
    rec.expect_len(3)?;
    let p = NbParams {
        smoothing: rec.parse(0)?,
        relative_variance_floor: rec.parse(1)?,
        absolute_variance_floor: rec.parse(2)?,
    };
    p.validate().map_err(|e| Error::format(rec.line, e.to_string()))?;
    Ok(p)
}

pub(crate) fn write_schema(w: &mut RecordWriter, schema: &Schema, classes: &[String]) {
    let mut rec = w.record("classes").num(classes.len());
    for c in classes {
        rec = rec.text(c);
    }
    rec.end();
    w.record("features").num(schema.len()).end();
    for f in schema.features() {
        match f.kind() {
            FeatureKind::Numeric => w.record("numeric").text(f.name()).end(),
            FeatureKind::Categorical => {
                let mut rec = w.record("categorical").text(f.name()).num(f.categories().len());
                for c in f.categories() {
                    rec = rec.text(c);
                }
                rec.end();
            }
        }
    }
}

pub(crate) fn read_schema(r: &mut RecordReader<'_>) -> Result<(Schema, Vec<String>)> {
    let rec = r.expect("classes")?;
    let n: usize = rec.parse(0)?;
    rec.expect_len(n + 1)?;
    let classes = (1..=n).map(|i| rec.text(i)).collect::<Result<Vec<_>>>()?;

    let rec = r.expect("features")?;
    let d: usize = rec.parse(0)?;
    let mut specs = Vec::with_capacity(d);
    for _ in 0..d {
        let rec = r.next()?;
        let spec = match rec.tag.as_str() {
            "numeric" => {
                rec.expect_len(1)?;
                FeatureSpec::numeric(rec.text(0)?)
            }
            "categorical" => {
                let k: usize = rec.parse(1)?;
                rec.expect_len(k + 2)?;
                let cats = (2..k + 2).map(|i| rec.text(i)).collect::<Result<Vec<_>>>()?;
                FeatureSpec::categorical(rec.text(0)?, cats).map_err(|e| Error::format(rec.line, e.to_string()))?
            }
            other => return Err(Error::format(rec.line, format!("expected a feature record, found `{other}`"))),
        };
        specs.push(spec);
    }
    let line = r.line();
    let schema = Schema::new(specs).map_err(|e| Error::format(line, e.to_string()))?;
    if classes.len() < 2 {
        return Err(Error::format(line, "a model needs at least 2 classes"));
    }
    Ok((schema, classes))
}

fn write_core(w: &mut RecordWriter, columns: &[Column], core: &NbCore) {
    let nc = core.n_classes;
    w.record("prior").floats(&core.priors).end();
    for (f, col) in columns.iter().enumerate() {
        match *col {
            Column::Numeric => {
                let mut rec = w.record("gaussian").num(f);
                for c in 0..nc {
                    rec = rec.float(core.mean[f * nc + c]).float(core.var[f * nc + c]);
                }
                rec.end();
            }
            Column::Categorical(k) => {
                for c in 0..nc {
                    let mut rec = w.record("frequencies").num(f).num(c);
                    for cat in 0..k {
                        rec = rec.float(core.cat_probs[(core.cat_offset[f] + cat) * nc + c]);
                    }
                    rec.end();
                }
            }
        }
    }
}

pub(crate) fn read_core(r: &mut RecordReader<'_>, columns: &[Column], nc: usize) -> Result<NbCore> {
    let rec = r.expect("prior")?;
    rec.expect_len(nc)?;
    let priors: Vec<f64> = rec.parse_all(0)?;
    if priors.iter().any(|&p| !(p > 0.0 && p <= 1.0)) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::format(rec.line, "priors must be positive and sum to 1"));
    }

    let d = columns.len();
    let mut mean = vec![0.0f64; d * nc];
    let mut var = vec![1.0; d * nc];
    let mut cat_offset = vec![0usize; d];
    let mut n_cat_cells = 0;
    for (f, col) in columns.iter().enumerate() {
        if let Column::Categorical(k) = *col {
            cat_offset[f] = n_cat_cells;
            n_cat_cells += k;
        }
    }
    let mut cat_probs = vec![0.0f64; n_cat_cells * nc];

    for (f, col) in columns.iter().enumerate() {
        match *col {
            Column::Numeric => {
                let rec = r.expect("gaussian")?;
                rec.expect_len(1 + 2 * nc)?;
                if rec.parse::<usize>(0)? != f {
                    return Err(Error::format(rec.line, format!("expected feature {f}")));
                }
                for c in 0..nc {
                    mean[f * nc + c] = rec.parse(1 + 2 * c)?;
                    let v: f64 = rec.parse(2 + 2 * c)?;
                    if !(v > 0.0 && v.is_finite()) || !mean[f * nc + c].is_finite() {
                        return Err(Error::format(rec.line, "gaussian parameters must be finite with positive variance"));
                    }
                    var[f * nc + c] = v;
                }
            }
            Column::Categorical(k) => {
                for c in 0..nc {
                    let rec = r.expect("frequencies")?;
                    rec.expect_len(2 + k)?;
                    if rec.parse::<usize>(0)? != f || rec.parse::<usize>(1)? != c {
                        return Err(Error::format(rec.line, format!("expected feature {f}, class {c}")));
                    }
                    let probs: Vec<f64> = rec.parse_all(2)?;
                    if probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                        return Err(Error::format(rec.line, "category probabilities must be positive and sum to 1"));
                    }
                    for (cat, p) in probs.into_iter().enumerate() {
                        cat_probs[(cat_offset[f] + cat) * nc + c] = p;
                    }
                }
            }
        }
    }
    Ok(NbCore::from_parts(nc, priors, mean, var, cat_offset, cat_probs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_dataset(points: &[(f64, usize)]) -> Dataset {
        let schema = Schema::new(vec![FeatureSpec::numeric("x")]).unwrap();
        let examples = points
            .iter()
            .enumerate()
            .map(|(i, &(x, l))| Example::new(i.to_string(), vec![Some(Value::Numeric(x))], Some(Label(l))))
            .collect();
        Dataset::new(schema, vec!["A".into(), "B".into()], examples).unwrap()
    }

    fn at(x: Option<f64>) -> Example {
        Example::new("t", vec![x.map(Value::Numeric)], None)
    }

    #[test]
    fn priors_are_class_frequencies() {
        let m = NaiveBayesModel::fit(&numeric_dataset(&[(0.0, 0), (1.0, 0), (2.0, 1), (3.0, 1)]), &NbParams::default())
            .unwrap();
        assert_eq!(m.priors(), [0.5, 0.5]);
    }

    #[test]
    fn gaussian_uses_ml_variance() {
        let m = NaiveBayesModel::fit(
            &numeric_dataset(&[(0.0, 0), (2.0, 0), (10.0, 1), (12.0, 1)]),
            &NbParams::default(),
        )
        .unwrap();
        assert_eq!(m.gaussian(0).unwrap(), vec![(1.0, 1.0), (11.0, 1.0)]);
    }

    #[test]
    fn laplace_smoothing() {
        let schema = Schema::new(vec![FeatureSpec::categorical("c", vec!["x".into(), "y".into()]).unwrap()]).unwrap();
        let ex = |v: u32, l: usize| Example::new("", vec![Some(Value::Category(v))], Some(Label(l)));
        let ds = Dataset::new(schema, vec!["A".into(), "B".into()], vec![ex(0, 0), ex(0, 0), ex(1, 1)]).unwrap();
        let m = NaiveBayesModel::fit(&ds, &NbParams::default()).unwrap();
        let probs = m.categorical(0).unwrap();
        assert_eq!(probs[0], vec![0.75, 0.25]);
        assert!((probs[1][1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn absent_class_is_an_error() {
        let err = NaiveBayesModel::fit(&numeric_dataset(&[(0.0, 0), (1.0, 0)]), &NbParams::default());
        assert!(matches!(err, Err(Error::ClassAbsent(c)) if c == "B"));
    }

    #[test]
    fn all_missing_class_falls_back_to_global_stats() {
        let schema = Schema::new(vec![FeatureSpec::numeric("x")]).unwrap();
        let ds = Dataset::new(
            schema,
            vec!["A".into(), "B".into()],
            vec![
                Example::new("0", vec![Some(Value::Numeric(1.0))], Some(Label(0))),
                Example::new("1", vec![Some(Value::Numeric(3.0))], Some(Label(0))),
                Example::new("2", vec![None], Some(Label(1))),
            ],
        )
        .unwrap();
        let m = NaiveBayesModel::fit(&ds, &NbParams::default()).unwrap();
        assert_eq!(m.gaussian(0).unwrap(), vec![(2.0, 1.0), (2.0, 1.0)]);
    }

    #[test]
    fn variance_is_floored() {
        let m = NaiveBayesModel::fit(
            &numeric_dataset(&[(5.0, 0), (5.0, 0), (7.0, 1), (7.0, 1)]),
            &NbParams::default(),
        )
        .unwrap();
        // global variance 1 -> floor max(1e-9 * 1, 1e-12)
        assert_eq!(m.gaussian(0).unwrap()[0].1, 1e-9);
        let p = m.posterior(&at(Some(5.0))).unwrap();
        assert!(p.probs()[0] > 0.999_999);
    }

    #[test]
    fn missing_everything_gives_priors() {
        let m = NaiveBayesModel::fit(&numeric_dataset(&[(0.0, 0), (1.0, 0), (2.0, 0), (3.0, 1)]), &NbParams::default())
            .unwrap();
        let p = m.posterior(&at(None)).unwrap();
        assert!((p.probs()[0] - 0.75).abs() < 1e-15);
        assert!((p.probs()[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn symmetric_model_is_uninformative_at_zero() {
        let m = NaiveBayesModel::fit(
            &numeric_dataset(&[(-2.0, 0), (-1.0, 0), (1.0, 1), (2.0, 1)]),
            &NbParams::default(),
        )
        .unwrap();
        let p = m.posterior(&at(Some(0.0))).unwrap();
        assert!((p.probs()[0] - 0.5).abs() < 1e-12);
        assert_eq!(p.argmax(), Label(0));
    }

    #[test]
    fn unit_gaussians_at_zero_and_two() {
        // means 0 and 2, ML variance 1 from the ±1 samples
        let m = NaiveBayesModel::fit(
            &numeric_dataset(&[(-1.0, 0), (1.0, 0), (1.0, 1), (3.0, 1)]),
            &NbParams::default(),
        )
        .unwrap();
        let p = m.posterior(&at(Some(0.0))).unwrap();
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((p.probs()[0] - expected).abs() < 1e-12);
        assert!((expected - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn nonconformity_closed_forms() {
        assert_eq!(NbCore::nonconformity_from_joint(&[0.0, f64::NEG_INFINITY], 0), 0.0);
        let half = NbCore::nonconformity_from_joint(&[-1.0, -1.0], 0);
        assert!((half - std::f64::consts::LN_2).abs() < 1e-15);
        let clamped = NbCore::nonconformity_from_joint(&[0.0, -2000.0], 1);
        assert_eq!(clamped, -POSTERIOR_FLOOR.ln());
        assert!(clamped.is_finite());
    }

    #[test]
    fn nonconformity_ranks_like_posterior() {
        let m = NaiveBayesModel::fit(&numeric_dataset(&[(0.0, 0), (1.0, 0), (2.0, 1), (4.0, 1)]), &NbParams::default())
            .unwrap();
        for x in [-3.0, 0.5, 1.7, 2.2, 9.0] {
            let p = m.posterior(&at(Some(x))).unwrap();
            let a0 = m.nonconformity(&at(Some(x)), Label(0)).unwrap();
            let a1 = m.nonconformity(&at(Some(x)), Label(1)).unwrap();
            assert_eq!(p.probs()[0] > p.probs()[1], a0 < a1, "x={x}");
        }
    }

    #[test]
    fn schema_errors_surface() {
        let m = NaiveBayesModel::fit(&numeric_dataset(&[(0.0, 0), (1.0, 1)]), &NbParams::default()).unwrap();
        let wrong = Example::new("t", vec![None, None], None);
        assert!(matches!(m.posterior(&wrong), Err(Error::SchemaMismatch(_))));
        assert!(m.nonconformity(&at(Some(0.0)), Label(2)).is_err());
        let cat = Example::new("t", vec![Some(Value::Category(0))], None);
        assert!(m.posterior(&cat).is_err());
    }

    #[test]
    fn text_format_round_trips_bitwise() {
        let schema = Schema::new(vec![
            FeatureSpec::numeric("age at\tvisit"),
            FeatureSpec::categorical("g", vec!["F".into(), "M".into(), "X".into()]).unwrap(),
        ])
        .unwrap();
        let ex = |x: f64, g: u32, l: usize| {
            Example::new("", vec![Some(Value::Numeric(x)), Some(Value::Category(g))], Some(Label(l)))
        };
        let ds = Dataset::new(
            schema,
            vec!["cMCI".into(), "sMCI".into()],
            vec![ex(0.1, 0, 0), ex(0.7, 1, 0), ex(3.3, 2, 1), ex(2.9, 1, 1), ex(1.0 / 3.0, 1, 1)],
        )
        .unwrap();
        let m = NaiveBayesModel::fit(&ds, &NbParams::default()).unwrap();
        let text = m.to_text();
        let back = NaiveBayesModel::from_text(&text).unwrap();
        assert_eq!(m, back);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn text_format_rejects_other_versions_and_garbage() {
        let m = NaiveBayesModel::fit(&numeric_dataset(&[(0.0, 0), (1.0, 1)]), &NbParams::default()).unwrap();
        let text = m.to_text().replacen("cpens-naive-bayes\t1", "cpens-naive-bayes\t9", 1);
        assert!(matches!(NaiveBayesModel::from_text(&text), Err(Error::VersionMismatch { .. })));
        assert!(matches!(NaiveBayesModel::from_text("hello"), Err(Error::ModelFormat { .. })));
        let truncated: String = m.to_text().lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(matches!(NaiveBayesModel::from_text(&truncated), Err(Error::ModelFormat { .. })));
    }
}
