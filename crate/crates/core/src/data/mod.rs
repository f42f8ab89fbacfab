//! Tabular datasets: schema, examples with optional values, and class sets.

mod csv_io;
mod folds;
mod synthetic;

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

pub use csv_io::{load_csv, load_csv_with_schema, read_csv, read_csv_with_schema, write_csv, CsvOptions};
pub use folds::{stratified_folds, Fold};
pub use synthetic::{generate_synthetic, SyntheticConfig, NEGATIVE_CLASS, POSITIVE_CLASS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Numeric => f.write_str("numeric"),
            FeatureKind::Categorical => f.write_str("categorical"),
        }
    }
}

/// One column of the feature schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    name: String,
    kind: FeatureKind,
    categories: Vec<String>,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Numeric,
            categories: Vec::new(),
        }
    }

    /// A categorical column needs at least two distinct category names.
    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Result<Self> {
        let name = name.into();
        if categories.len() < 2 {
            return Err(Error::data(format!(
                "categorical feature `{name}` needs at least 2 categories, got {}",
                categories.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &categories {
            if !seen.insert(c.as_str()) {
                return Err(Error::data(format!(
                    "categorical feature `{name}` lists category `{c}` twice"
                )));
            }
        }
        Ok(FeatureSpec {
            name,
            kind: FeatureKind::Categorical,
            categories,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_index(&self, name: &str) -> Option<u32> {
        self.categories
            .iter()
            .position(|c| c == name)
            .map(|i| i as u32)
    }
}

/// Ordered feature columns with unique names.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schema {
    features: Vec<FeatureSpec>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::data(format!("duplicate feature name `{}`", f.name)));
            }
        }
        Ok(Schema { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureSpec {
        &self.features[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// The sub-schema for `indices`, in the given order.
    pub fn project(&self, indices: &[usize]) -> Schema {
        Schema {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
        }
    }

    /// Check that `values` is aligned with this schema.
    pub fn validate_values(&self, values: &[Option<Value>]) -> Result<()> {
        if values.len() != self.features.len() {
            return Err(Error::SchemaMismatch(format!(
                "example has {} values, schema has {} features",
                values.len(),
                self.features.len()
            )));
        }
        for (spec, value) in self.features.iter().zip(values) {
            match (spec.kind, value) {
                (_, None) => {}
                (FeatureKind::Numeric, Some(Value::Numeric(x))) => {
                    if !x.is_finite() {
                        return Err(Error::data(format!(
                            "feature `{}` has non-finite value {x}",
                            spec.name
                        )));
                    }
                }
                (FeatureKind::Categorical, Some(Value::Category(c))) => {
                    if *c as usize >= spec.categories.len() {
                        return Err(Error::SchemaMismatch(format!(
                            "feature `{}` has category index {c}, only {} declared",
                            spec.name,
                            spec.categories.len()
                        )));
                    }
                }
                (kind, Some(v)) => {
                    return Err(Error::SchemaMismatch(format!(
                        "feature `{}` is {kind} but holds {v:?}",
                        spec.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Numeric(f64),
    Category(u32),
}

impl Value {
    /// Dense encoding used by the model kernels: category index as a float.
    pub(crate) fn encode(value: Option<Value>) -> f64 {
        match value {
            None => f64::NAN,
            Some(Value::Numeric(x)) => x,
            Some(Value::Category(c)) => c as f64,
        }
    }
}

/// Index into a dataset's class set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub usize);

impl Label {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub values: Vec<Option<Value>>,
    pub label: Option<Label>,
}

impl Example {
    pub fn new(id: impl Into<String>, values: Vec<Option<Value>>, label: Option<Label>) -> Self {
        Example {
            id: id.into(),
            values,
            label,
        }
    }
}

/// Labeled tabular examples sharing one schema and one class set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    classes: Vec<String>,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(schema: Schema, classes: Vec<String>, examples: Vec<Example>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::data(format!(
                "a classification dataset needs at least 2 classes, got {}",
                classes.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::data(format!("class `{c}` declared twice")));
            }
        }
        for ex in &examples {
            schema
                .validate_values(&ex.values)
                .map_err(|e| annotate(e, &ex.id))?;
            if let Some(label) = ex.label {
                if label.0 >= classes.len() {
                    return Err(Error::data(format!(
                        "example `{}` has label index {} outside the {} classes",
                        ex.id,
                        label.0,
                        classes.len()
                    )));
                }
            }
        }
        Ok(Dataset {
            schema,
            classes,
            examples,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn class_name(&self, label: Label) -> &str {
        &self.classes[label.0]
    }

    pub fn label_of(&self, name: &str) -> Option<Label> {
        self.classes.iter().position(|c| c == name).map(Label)
    }

    /// Per-class counts of labeled examples, in class-set order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for ex in &self.examples {
            if let Some(l) = ex.label {
                counts[l.0] += 1;
            }
        }
        counts
    }

    /// Labels of every example; fails if any example is unlabeled.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.examples
            .iter()
            .map(|ex| {
                ex.label
                    .ok_or_else(|| Error::data(format!("example `{}` has no label", ex.id)))
            })
            .collect()
    }

    /// A dataset holding the examples at `indices` (repeats allowed), same schema and classes.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            classes: self.classes.clone(),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }
}

fn annotate(e: Error, id: &str) -> Error {
    match e {
        Error::SchemaMismatch(m) => Error::SchemaMismatch(format!("example `{id}`: {m}")),
        Error::InvalidData(m) => Error::InvalidData(format!("example `{id}`: {m}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_feature_schema() -> Schema {
        Schema::new(vec![
            FeatureSpec::numeric("age"),
            FeatureSpec::categorical("gender", vec!["F".into(), "M".into()]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn schema_rejects_duplicate_names() {
        let err = Schema::new(vec![FeatureSpec::numeric("a"), FeatureSpec::numeric("a")]);
        assert!(matches!(err, Err(Error::InvalidData(_))));
    }

    #[test]
    fn categorical_needs_two_categories() {
        assert!(FeatureSpec::categorical("g", vec!["x".into()]).is_err());
        assert!(FeatureSpec::categorical("g", vec!["x".into(), "x".into()]).is_err());
    }

    #[test]
    fn dataset_validates_values_and_labels() {
        let schema = two_feature_schema();
        let classes = vec!["cMCI".to_string(), "sMCI".to_string()];
        let ok = Example::new(
            "1",
            vec![Some(Value::Numeric(70.0)), Some(Value::Category(1))],
            Some(Label(0)),
        );
        assert!(Dataset::new(schema.clone(), classes.clone(), vec![ok.clone()]).is_ok());

        let bad_cat = Example::new("2", vec![None, Some(Value::Category(2))], Some(Label(0)));
        assert!(matches!(
            Dataset::new(schema.clone(), classes.clone(), vec![bad_cat]),
            Err(Error::SchemaMismatch(_))
        ));

        let short = Example::new("3", vec![None], Some(Label(0)));
        assert!(Dataset::new(schema.clone(), classes.clone(), vec![short]).is_err());

        let bad_label = Example::new("4", vec![None, None], Some(Label(5)));
        assert!(Dataset::new(schema, classes, vec![bad_label]).is_err());
    }

    #[test]
    fn class_counts_and_subset() {
        let schema = Schema::new(vec![FeatureSpec::numeric("x")]).unwrap();
        let ex = |i: usize, l: usize| {
            Example::new(i.to_string(), vec![Some(Value::Numeric(i as f64))], Some(Label(l)))
        };
        let ds = Dataset::new(
            schema,
            vec!["a".into(), "b".into()],
            vec![ex(0, 0), ex(1, 1), ex(2, 1)],
        )
        .unwrap();
        assert_eq!(ds.class_counts(), vec![1, 2]);
        let sub = ds.subset(&[2, 2, 0]);
        assert_eq!(sub.class_counts(), vec![1, 2]);
        assert_eq!(sub.examples()[0].id, "2");
    }
}
