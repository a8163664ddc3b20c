use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabeledDataset, BIAS_FEATURE};
use crate::error::{Error, Result};
use crate::linmodel::{Example, Label};

/// Column roles of a CSV file.
///
/// `feature_columns` lists every feature in model order; the ones also named
/// in `categorical_columns` are one-hot encoded with categories in sorted
/// order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub feature_columns: Vec<String>,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    pub sensitive_column: String,
    pub label_column: String,
    pub positive_label: String,
}

impl DatasetSchema {
    fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.feature_columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::config(format!("feature column {c:?} listed twice")));
            }
        }
        for role in [&self.sensitive_column, &self.label_column] {
            if seen.contains(role.as_str()) {
                return Err(Error::config(format!("column {role:?} has two roles")));
            }
        }
        if self.sensitive_column == self.label_column {
            return Err(Error::config("sensitive and label columns must differ"));
        }
        if let Some(c) = self.categorical_columns.iter().find(|c| !seen.contains(c.as_str())) {
            return Err(Error::config(format!("categorical column {c:?} is not a feature column")));
        }
        Ok(())
    }
}

enum Column {
    Numeric(usize),
    Categorical(usize, Vec<String>),
}

/// Reads an RFC 4180 CSV with a header row. A constant-1 bias is appended
/// to every feature vector.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<LabeledDataset> {
    schema.validate()?;
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let find = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::ingestion("header", format!("missing column {name:?}")))
    };
    let sensitive_at = find(&schema.sensitive_column)?;
    let label_at = find(&schema.label_column)?;
    let feature_at = schema
        .feature_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let records = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
    if records.is_empty() {
        return Err(Error::ingestion(path.display().to_string(), "no data rows"));
    }

    let mut columns = Vec::new();
    let mut names = Vec::new();
    for (name, &at) in schema.feature_columns.iter().zip(&feature_at) {
        if schema.categorical_columns.contains(name) {
            let cats: BTreeSet<String> = records.iter().map(|r| r[at].trim().to_string()).collect();
            let cats: Vec<String> = cats.into_iter().collect();
            names.extend(cats.iter().map(|c| format!("{name}={c}")));
            columns.push(Column::Categorical(at, cats));
        } else {
            names.push(name.clone());
            columns.push(Column::Numeric(at));
        }
    }
    names.push(BIAS_FEATURE.to_string());

    let positive = schema.positive_label.trim();
    let mut negative_token: Option<String> = None;
    let mut examples = Vec::with_capacity(records.len());
    for (r, record) in records.iter().enumerate() {
        let row = r + 1;
        let loc = |col: &str| format!("row {row} (line {}), column {col:?}", row + 1);

        let sensitive = record[sensitive_at].trim();
        if sensitive.is_empty() {
            return Err(Error::ingestion(loc(&schema.sensitive_column), "missing sensitive value"));
        }

        let token = record[label_at].trim();
        let label = if token == positive {
            Label::Positive
        } else if token.is_empty() {
            return Err(Error::ingestion(loc(&schema.label_column), "missing label"));
        } else {
            match &negative_token {
                Some(t) if t != token => {
                    return Err(Error::ingestion(
                        loc(&schema.label_column),
                        format!("third label token {token:?} (positive {positive:?}, negative {t:?})"),
                    ))
                }
                Some(_) => {}
                None => negative_token = Some(token.to_string()),
            }
            Label::Negative
        };

        let mut x = Vec::with_capacity(names.len());
        for (col, name) in columns.iter().zip(&schema.feature_columns) {
            match col {
                Column::Numeric(at) => {
                    let cell = record[*at].trim();
                    let v: f64 = cell.parse().map_err(|_| {
                        Error::ingestion(loc(name), format!("cannot parse {cell:?} as a number"))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::ingestion(loc(name), format!("non-finite value {cell:?}")));
                    }
                    x.push(v);
                }
                Column::Categorical(at, cats) => {
                    let cell = record[*at].trim();
                    x.extend(cats.iter().map(|c| if c == cell { 1.0 } else { 0.0 }));
                }
            }
        }
        x.push(1.0);
        examples.push(Example::new(x, sensitive, label)?);
    }
    LabeledDataset::new(names, examples)
}

/// Writes a dataset as CSV: the non-bias features, then `group` and `label`
/// (tokens `1` / `-1`).
pub fn write_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let p = dataset.dim() - 1;
    let mut header: Vec<&str> = dataset.feature_names()[..p].iter().map(String::as_str).collect();
    header.extend(["group", "label"]);
    writer.write_record(&header)?;
    for ex in dataset.examples() {
        let mut row: Vec<String> = ex.features()[..p].iter().map(|v| format!("{v}")).collect();
        row.push(ex.sensitive().to_string());
        row.push(i8::from(ex.label()).to_string());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
