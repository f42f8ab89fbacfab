use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Example, FeatureKind, FeatureSpec, Label, Schema, Value};
use crate::error::{Error, Result};

/// How to interpret the columns of a CSV file.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label_column: String,
    /// Column holding example ids; row indices are used when absent.
    pub id_column: String,
    /// Forced kinds for named columns, overriding auto-typing.
    pub schema_hints: BTreeMap<String, FeatureKind>,
    /// Pre-declared class set. When `None`, the sorted distinct labels are used.
    pub classes: Option<Vec<String>>,
}

impl CsvOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        CsvOptions {
            label_column: label_column.into(),
            id_column: "id".to_string(),
            schema_hints: BTreeMap::new(),
            classes: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, options)
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::data(format!("duplicate column header `{h}`")));
        }
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }
    if rows.is_empty() {
        return Err(Error::data("CSV has a header but no data rows"));
    }
    Ok(Table { headers, rows })
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Read a CSV, inferring the schema from its contents.
pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    let table = read_table(reader)?;
    let label_col = table
        .headers
        .iter()
        .position(|h| *h == options.label_column)
        .ok_or_else(|| Error::data(format!("label column `{}` not found", options.label_column)))?;
    let id_col = table.headers.iter().position(|h| *h == options.id_column);

    for name in options.schema_hints.keys() {
        let idx = table.headers.iter().position(|h| h == name);
        if idx.is_none() || idx == Some(label_col) || idx == id_col {
            return Err(Error::param(format!(
                "schema hint names `{name}`, which is not a feature column"
            )));
        }
    }

    let feature_cols: Vec<usize> = (0..table.headers.len())
        .filter(|&c| c != label_col && Some(c) != id_col)
        .collect();

    let mut specs = Vec::with_capacity(feature_cols.len());
    for &c in &feature_cols {
        let name = &table.headers[c];
        let cells = table.rows.iter().map(|r| r[c].as_str()).filter(|s| !s.is_empty());
        let kind = match options.schema_hints.get(name) {
            Some(&k) => k,
            None if cells.clone().all(|s| parse_number(s).is_some()) => FeatureKind::Numeric,
            None => FeatureKind::Categorical,
        };
        let spec = match kind {
            FeatureKind::Numeric => {
                if let Some(bad) = cells.clone().find(|s| parse_number(s).is_none()) {
                    return Err(Error::data(format!(
                        "column `{name}` is numeric but contains `{bad}`"
                    )));
                }
                FeatureSpec::numeric(name.clone())
            }
            FeatureKind::Categorical => {
                let cats: BTreeSet<&str> = cells.collect();
                FeatureSpec::categorical(name.clone(), cats.into_iter().map(String::from).collect())?
            }
        };
        specs.push(spec);
    }
    let schema = Schema::new(specs)?;

    let classes = match &options.classes {
        Some(c) => c.clone(),
        None => table
            .rows
            .iter()
            .map(|r| r[label_col].as_str())
            .filter(|s| !s.is_empty())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(String::from)
            .collect(),
    };

    let mut examples = Vec::with_capacity(table.rows.len());
    for (row_idx, row) in table.rows.iter().enumerate() {
        let id = match id_col {
            Some(c) => row[c].clone(),
            None => row_idx.to_string(),
        };
        let values = feature_cols
            .iter()
            .zip(schema.features())
            .map(|(&c, spec)| parse_cell(&row[c], spec, false))
            .collect::<Result<Vec<_>>>()?;
        let label = parse_label(&row[label_col], &classes, row_idx)?;
        examples.push(Example { id, values, label });
    }
    Dataset::new(schema, classes, examples)
}

fn parse_cell(cell: &str, spec: &FeatureSpec, unknown_as_missing: bool) -> Result<Option<Value>> {
    if cell.is_empty() {
        return Ok(None);
    }
    match spec.kind() {
        FeatureKind::Numeric => parse_number(cell).map(|x| Some(Value::Numeric(x))).ok_or_else(|| {
            Error::SchemaMismatch(format!("column `{}` expects a number, got `{cell}`", spec.name()))
        }),
        FeatureKind::Categorical => match spec.category_index(cell) {
            Some(i) => Ok(Some(Value::Category(i))),
            None if unknown_as_missing => Ok(None),
            None => Err(Error::data(format!(
                "column `{}` has undeclared category `{cell}`",
                spec.name()
            ))),
        },
    }
}

fn parse_label(cell: &str, classes: &[String], row_idx: usize) -> Result<Option<Label>> {
    if cell.is_empty() {
        return Ok(None);
    }
    classes
        .iter()
        .position(|c| c == cell)
        .map(|i| Some(Label(i)))
        .ok_or_else(|| Error::data(format!("row {row_idx}: label `{cell}` is not a declared class")))
}

pub fn load_csv_with_schema(
    path: impl AsRef<Path>,
    schema: &Schema,
    classes: &[String],
    label_column: Option<&str>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_with_schema(file, schema, classes, label_column)
}

/// Read a CSV against a fixed schema, e.g. new patients scored by a trained model.
///
/// Columns are matched by name and extra columns are ignored. Categories the
/// schema does not know become missing values. The label column is optional.
pub fn read_csv_with_schema<R: Read>(
    reader: R,
    schema: &Schema,
    classes: &[String],
    label_column: Option<&str>,
) -> Result<Dataset> {
    let table = read_table(reader)?;
    let find = |name: &str| table.headers.iter().position(|h| h == name);
    let cols = schema
        .features()
        .iter()
        .map(|f| {
            find(f.name())
                .ok_or_else(|| Error::SchemaMismatch(format!("column `{}` missing from data", f.name())))
        })
        .collect::<Result<Vec<_>>>()?;
    let id_col = find("id");
    let label_col = label_column.and_then(find);

    let mut examples = Vec::with_capacity(table.rows.len());
    for (row_idx, row) in table.rows.iter().enumerate() {
        let values = cols
            .iter()
            .zip(schema.features())
            .map(|(&c, spec)| parse_cell(&row[c], spec, true))
            .collect::<Result<Vec<_>>>()?;
        let label = match label_col {
            Some(c) => parse_label(&row[c], classes, row_idx)?,
            None => None,
        };
        let id = id_col.map_or_else(|| row_idx.to_string(), |c| row[c].clone());
        examples.push(Example { id, values, label });
    }
    Dataset::new(schema.clone(), classes.to_vec(), examples)
}

/// Write `id`, the feature columns, then the label column. Missing values are empty fields.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W, label_column: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id"];
    header.extend(dataset.schema().features().iter().map(|f| f.name()));
    header.push(label_column);
    wtr.write_record(&header)?;

    let mut record = Vec::with_capacity(header.len());
    for ex in dataset.examples() {
        record.clear();
        record.push(ex.id.clone());
        for (v, spec) in ex.values.iter().zip(dataset.schema().features()) {
            record.push(match v {
                None => String::new(),
                Some(Value::Numeric(x)) => format!("{x}"),
                Some(Value::Category(c)) => spec.categories()[*c as usize].clone(),
            });
        }
        record.push(
            ex.label
                .map(|l| dataset.class_name(l).to_string())
                .unwrap_or_default(),
        );
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
