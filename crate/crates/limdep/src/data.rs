//! Dataset loading, validation, component decomposition and splitting for
//! targets that are exactly zero with positive probability.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-major feature matrix with named columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Self {
        assert_eq!(names.len(), columns.len(), "one name per column");
        if let Some(first) = columns.first() {
            assert!(
                columns.iter().all(|c| c.len() == first.len()),
                "ragged feature columns"
            );
        }
        FeatureMatrix { names, columns }
    }

    /// Unnamed columns get positional names `x0`, `x1`, ...
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let names = (0..columns.len()).map(|j| format!("x{j}")).collect();
        Self::new(names, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    /// Copy out the given rows, keeping column order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect();
        FeatureMatrix {
            names: self.names.clone(),
            columns,
        }
    }
}

/// A feature matrix plus a nonnegative target with both zero and positive
/// observations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TabularDataset {
    pub name: String,
    pub features: FeatureMatrix,
    target: Vec<f64>,
}

impl TabularDataset {
    /// Validates the target: finite, nonnegative, and genuinely
    /// zero-inflated (at least one zero and one positive value).
    pub fn new(name: impl Into<String>, features: FeatureMatrix, target: Vec<f64>) -> Result<Self> {
        if features.n_cols() > 0 && features.n_rows() != target.len() {
            return Err(Error::LengthMismatch(features.n_rows(), target.len()));
        }
        let mut any_zero = false;
        let mut any_positive = false;
        let mut target = target;
        for (row, t) in target.iter_mut().enumerate() {
            if !t.is_finite() {
                return Err(Error::DegenerateTarget(format!(
                    "non-finite target at row {row}"
                )));
            }
            if *t < 0.0 {
                return Err(Error::NegativeTarget { row, value: *t });
            }
            if *t == 0.0 {
                *t = 0.0; // normalize -0.0 so reconstruction is bit-exact
                any_zero = true;
            } else {
                any_positive = true;
            }
        }
        if !any_zero {
            return Err(Error::DegenerateTarget(
                "no zero observations; target is not limited".into(),
            ));
        }
        if !any_positive {
            return Err(Error::DegenerateTarget(
                "no positive observations".into(),
            ));
        }
        Ok(TabularDataset {
            name: name.into(),
            features,
            target,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }
}

/// The component view of a limited target: the binary occurrence vector,
/// the positive amounts, and the mapping back to parent rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentView {
    /// 1.0 where the target is positive, 0.0 elsewhere.
    pub c: Vec<f64>,
    /// Target values on the rows where it is positive.
    pub a: Vec<f64>,
    /// `positive_index[k]` is the parent row of `a[k]`.
    pub positive_index: Vec<usize>,
    /// `1 - mean(c)`.
    pub zero_share: f64,
}

impl ComponentView {
    /// Rebuild the original target; `y[i] = c[i] * a(i)` for every row.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.c.len()];
        for (k, &row) in self.positive_index.iter().enumerate() {
            y[row] = self.a[k];
        }
        y
    }
}

/// Split a dataset's target into occurrence and amount components.
pub fn decompose(dataset: &TabularDataset) -> ComponentView {
    let y = dataset.target();
    let n = y.len();
    let mut c = vec![0.0; n];
    let mut a = Vec::new();
    let mut positive_index = Vec::new();
    for (i, &v) in y.iter().enumerate() {
        if v > 0.0 {
            c[i] = 1.0;
            a.push(v);
            positive_index.push(i);
        }
    }
    let zero_share = 1.0 - a.len() as f64 / n as f64;
    ComponentView {
        c,
        a,
        positive_index,
        zero_share,
    }
}

/// Disjoint train/test row sets from a seeded random permutation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
}

const SPLIT_ATTEMPTS: usize = 100;

/// Random permutation split. Both parts are required to contain at least
/// one zero and one positive target row; the permutation is redrawn up to
/// 100 times before giving up.
pub fn split(dataset: &TabularDataset, train_fraction: f64, seed: u64) -> Result<SplitIndices> {
    split_with_options(dataset, train_fraction, seed, false)
}

/// Like [`split`], optionally stratifying by the occurrence component so
/// both parts keep the parent zero share.
pub fn split_with_options(
    dataset: &TabularDataset,
    train_fraction: f64,
    seed: u64,
    stratify: bool,
) -> Result<SplitIndices> {
    let n = dataset.n_rows();
    if n < 10 {
        return Err(Error::TooFewRows { min: 10, got: n });
    }
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train fraction must lie in (0, 1)"
    );
    let y = dataset.target();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if stratify {
        let zeros: Vec<usize> = (0..n).filter(|&i| y[i] == 0.0).collect();
        let positives: Vec<usize> = (0..n).filter(|&i| y[i] > 0.0).collect();
        let take = |rows: &[usize], rng: &mut ChaCha8Rng| {
            let mut perm = rows.to_vec();
            perm.shuffle(rng);
            let k = (train_fraction * perm.len() as f64).round() as usize;
            let test = perm.split_off(k.min(perm.len()));
            (perm, test)
        };
        let (mut train, mut test) = take(&zeros, &mut rng);
        let (train_pos, test_pos) = take(&positives, &mut rng);
        train.extend(train_pos);
        test.extend(test_pos);
        if train.is_empty() || test.is_empty() || test_pos_empty(&train, y) || test_pos_empty(&test, y) {
            return Err(Error::CannotStratify { attempts: 1 });
        }
        train.sort_unstable();
        test.sort_unstable();
        return Ok(SplitIndices {
            train_rows: train,
            test_rows: test,
            seed,
        });
    }

    let k = (train_fraction * n as f64).round() as usize;
    if k == 0 || k == n {
        return Err(Error::TooFewRows { min: 10, got: n });
    }
    for _ in 0..SPLIT_ATTEMPTS {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let test: Vec<usize> = perm.split_off(k);
        let train = perm;
        let ok = |rows: &[usize]| {
            rows.iter().any(|&i| y[i] == 0.0) && rows.iter().any(|&i| y[i] > 0.0)
        };
        if ok(&train) && ok(&test) {
            let mut train = train;
            let mut test = test;
            train.sort_unstable();
            test.sort_unstable();
            return Ok(SplitIndices {
                train_rows: train,
                test_rows: test,
                seed,
            });
        }
    }
    Err(Error::CannotStratify {
        attempts: SPLIT_ATTEMPTS,
    })
}

fn test_pos_empty(rows: &[usize], y: &[f64]) -> bool {
    !rows.iter().any(|&i| y[i] == 0.0) || !rows.iter().any(|&i| y[i] > 0.0)
}

/// CSV loading options.
#[derive(Clone, Debug, Default)]
pub struct CsvOptions {
    /// Dataset label; the file stem is used when empty.
    pub name: Option<String>,
}

/// Load an RFC-4180 CSV with a mandatory header row. The target column
/// must be numeric and nonnegative; remaining numeric columns pass
/// through, non-numeric columns are one-hot encoded with lexicographic
/// category order. Empty cells and "NA" are rejected.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    options: &CsvOptions,
) -> Result<TabularDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if headers.is_empty() {
        return Err(Error::EmptyFile);
    }
    let target_pos = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingColumn(target_column.to_owned()))?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, field) in record.iter().enumerate() {
            if field.is_empty() || field == "NA" {
                return Err(Error::MissingValue {
                    column: headers[col].clone(),
                    row,
                });
            }
            raw[col].push(field.to_owned());
        }
    }
    let n = raw[target_pos].len();
    if n == 0 {
        return Err(Error::EmptyFile);
    }

    let mut target = Vec::with_capacity(n);
    for (row, field) in raw[target_pos].iter().enumerate() {
        let value: f64 = field.parse().map_err(|_| Error::NonNumericTarget {
            column: target_column.to_owned(),
            row,
            value: field.clone(),
        })?;
        if !value.is_finite() {
            return Err(Error::NonNumericTarget {
                column: target_column.to_owned(),
                row,
                value: field.clone(),
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeTarget { row, value });
        }
        target.push(value);
    }

    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (col, header) in headers.iter().enumerate() {
        if col == target_pos {
            continue;
        }
        let parsed: Option<Vec<f64>> = raw[col]
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match parsed {
            Some(values) => {
                names.push(header.clone());
                columns.push(values);
            }
            None => {
                // categorical: one-hot in lexicographic category order
                let categories: BTreeSet<&String> = raw[col].iter().collect();
                for category in categories {
                    names.push(format!("{header}={category}"));
                    columns.push(
                        raw[col]
                            .iter()
                            .map(|f| if f == category { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
        }
    }
    if columns.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }

    let name = options.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_owned())
    });
    TabularDataset::new(name, FeatureMatrix::new(names, columns), target)
}
