//! Binary classification on tabular data: binarization of typed columns,
//! a seeded train/test split and F1 scoring of a predicted formula.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::formula::{Assignment, Formula};
use crate::metrics::ConfusionCounts;
use crate::predictor::{predict, Predictor};
use crate::rng::seeded;

pub const MAX_FEATURES: usize = 120;
pub const TEST_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Binary,
    Categorical,
    Continuous,
}

/// Sidecar describing the columns of a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub label: String,
    /// Label value counted as the positive class.
    pub positive: String,
    pub columns: BTreeMap<String, ColumnType>,
    /// Cell values treated as missing, in addition to the empty string.
    #[serde(default = "default_missing")]
    pub missing: Vec<String>,
}

fn default_missing() -> Vec<String> {
    vec!["?".into(), "NA".into()]
}

impl Schema {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("schema: {e}")))
    }
}

/// Raw table: a header and string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read_csv(path: &Path) -> Result<Table> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(|c| c.trim().to_string()).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Table { header, rows })
    }
}

/// `column` alone for a two-valued column, `column=value` for one indicator
/// of an expanded categorical.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FeatureName {
    pub column: String,
    /// The value encoded as 1.
    pub value: String,
    pub one_hot: bool,
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.one_hot {
            write!(f, "{}={}", self.column, self.value)
        } else {
            f.write_str(&self.column)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    pub features: Vec<FeatureName>,
    pub rows: Vec<Vec<bool>>,
    pub labels: Vec<bool>,
    /// Rows dropped because of missing values.
    pub dropped: usize,
}

impl BinaryDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn observations(&self) -> Result<ObservationSet> {
        ObservationSet::new(
            self.features.len(),
            self.rows.iter().cloned().map(Assignment::new).collect(),
            self.labels.clone(),
        )
    }

    fn subset(&self, idx: &[usize]) -> BinaryDataset {
        BinaryDataset {
            features: self.features.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            dropped: 0,
        }
    }
}

/// Value mapped to 1 in a two-valued column: `1`/`true`/`yes` when present,
/// otherwise the lexicographically larger value.
fn positive_of(values: &BTreeSet<&str>) -> String {
    for p in ["1", "true", "True", "TRUE", "yes", "y", "t"] {
        if values.contains(p) {
            return p.to_string();
        }
    }
    values.iter().next_back().map(|s| s.to_string()).unwrap_or_default()
}

/// Two-valued and binary columns become one feature each, categoricals with
/// more than two values become one indicator per value, and continuous
/// columns are dropped. Columns are processed in header order.
pub fn binarize(table: &Table, schema: &Schema) -> Result<BinaryDataset> {
    let label_idx = table
        .header
        .iter()
        .position(|h| *h == schema.label)
        .ok_or_else(|| Error::Config(format!("label column `{}` not found", schema.label)))?;
    let mut kinds = Vec::with_capacity(table.header.len());
    for (i, h) in table.header.iter().enumerate() {
        if i == label_idx {
            kinds.push(None);
            continue;
        }
        let kind = schema
            .columns
            .get(h)
            .copied()
            .ok_or_else(|| Error::Config(format!("column `{h}` has no type in the schema")))?;
        kinds.push(Some(kind));
    }
    let missing = |c: &str| c.is_empty() || schema.missing.iter().any(|m| m == c);

    let (kept, malformed): (Vec<&Vec<String>>, Vec<&Vec<String>>) =
        table.rows.iter().partition(|r| r.len() == table.header.len());
    if let Some(r) = malformed.first() {
        return Err(Error::Invalid(format!(
            "row with {} cells under a {}-column header",
            r.len(),
            table.header.len()
        )));
    }
    let complete: Vec<&Vec<String>> = kept
        .into_iter()
        .filter(|r| {
            r.iter()
                .enumerate()
                .all(|(i, c)| kinds[i] == Some(ColumnType::Continuous) || !missing(c))
        })
        .collect();
    let dropped = table.rows.len() - complete.len();

    let label_values: BTreeSet<&str> = complete.iter().map(|r| r[label_idx].as_str()).collect();
    if label_values.len() > 2 {
        return Err(Error::Invalid(format!(
            "label `{}` has {} classes; only binary labels are supported",
            schema.label,
            label_values.len()
        )));
    }

    let mut features = Vec::new();
    // (column index, value mapped to 1)
    let mut encoders: Vec<(usize, String)> = Vec::new();
    for (i, kind) in kinds.iter().enumerate() {
        let Some(kind) = kind else { continue };
        let values: BTreeSet<&str> = complete.iter().map(|r| r[i].as_str()).collect();
        let column = table.header[i].clone();
        match kind {
            ColumnType::Continuous => {}
            ColumnType::Binary if values.len() > 2 => {
                return Err(Error::Invalid(format!(
                    "binary column `{column}` has {} distinct values",
                    values.len()
                )));
            }
            ColumnType::Binary | ColumnType::Categorical if values.len() <= 2 => {
                let value = positive_of(&values);
                features.push(FeatureName {
                    column,
                    value: value.clone(),
                    one_hot: false,
                });
                encoders.push((i, value));
            }
            _ => {
                for v in values {
                    features.push(FeatureName {
                        column: column.clone(),
                        value: v.to_string(),
                        one_hot: true,
                    });
                    encoders.push((i, v.to_string()));
                }
            }
        }
    }
    if features.len() > MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            count: features.len(),
            limit: MAX_FEATURES,
        });
    }
    let rows = complete
        .iter()
        .map(|r| encoders.iter().map(|(i, v)| r[*i] == *v).collect())
        .collect();
    let labels = complete.iter().map(|r| r[label_idx] == schema.positive).collect();
    Ok(BinaryDataset {
        features,
        rows,
        labels,
        dropped,
    })
}

/// Seeded shuffle, then `round(fraction · n)` rows for testing.
pub fn split(data: &BinaryDataset, test_fraction: f64, seed: u64) -> Result<(BinaryDataset, BinaryDataset)> {
    if data.is_empty() {
        return Err(Error::Invalid("cannot split an empty table".into()));
    }
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::Config(format!("test fraction {test_fraction} outside [0, 1]")));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut seeded(seed));
    let n_test = (test_fraction * data.len() as f64).round() as usize;
    let (test, train) = idx.split_at(n_test);
    Ok((data.subset(train), data.subset(test)))
}

pub fn f1_score(f: &Formula, data: &BinaryDataset) -> f64 {
    ConfusionCounts::from_pairs(data.rows.iter().zip(&data.labels).map(|(r, &y)| (f.eval(r), y))).f1()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub formula: Formula,
    pub train_accuracy: f64,
    pub f1: f64,
}

/// Fits on the training rows and reports F1 on the test rows, positives
/// being label 1.
pub fn classify_and_score<P: Predictor + ?Sized>(
    predictor: &mut P,
    train: &BinaryDataset,
    test: &BinaryDataset,
) -> Result<Classification> {
    let c = predict(predictor, &train.observations()?)?;
    Ok(Classification {
        f1: f1_score(&c.formula, test),
        train_accuracy: c.fitting_accuracy,
        formula: c.formula,
    })
}
