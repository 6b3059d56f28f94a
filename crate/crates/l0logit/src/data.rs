//! Dataset container, reproducible synthetic instance generation, and the
//! on-disk formats (dense CSV, sparse `label index:value` text).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::loss::sigmoid;
use crate::rng::Xoshiro256PlusPlus;

/// Errors raised by dataset construction, generation, and file I/O.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset must have at least one row and one column, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("label count {labels} does not match row count {rows}")]
    LabelCount { labels: usize, rows: usize },
    #[error("non-finite matrix entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("label at row {row} is {value}, expected -1 or +1")]
    InvalidLabel { row: usize, value: f64 },
    #[error("true support index {index} out of range for {cols} features")]
    SupportOutOfRange { index: usize, cols: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("covariance matrix rejected: {0}")]
    InvalidCovariance(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, row {row}, column {col}: {message}")]
    Cell {
        path: String,
        row: usize,
        col: usize,
        message: String,
    },
    #[error("{path}, line {line}: {message}")]
    Line {
        path: String,
        line: usize,
        message: String,
    },
}

/// A binary classification dataset: observations are rows of `matrix`,
/// labels live in `{-1, +1}`.
///
/// Values are validated once at construction and immutable afterwards, so a
/// `Dataset` can be shared freely across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    matrix: Array2<f64>,
    labels: Array1<f64>,
    feature_names: Option<Vec<String>>,
    true_support: Option<BTreeSet<usize>>,
}

impl Dataset {
    /// Validates shapes, finiteness, and the label alphabet.
    pub fn new(matrix: Array2<f64>, labels: Array1<f64>) -> Result<Self, DataError> {
        let (rows, cols) = matrix.dim();
        if rows == 0 || cols == 0 {
            return Err(DataError::EmptyShape { rows, cols });
        }
        if labels.len() != rows {
            return Err(DataError::LabelCount {
                labels: labels.len(),
                rows,
            });
        }
        for ((r, c), &v) in matrix.indexed_iter() {
            if !v.is_finite() {
                return Err(DataError::NonFinite { row: r, col: c });
            }
        }
        for (r, &y) in labels.iter().enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(DataError::InvalidLabel { row: r, value: y });
            }
        }
        Ok(Self {
            matrix,
            labels,
            feature_names: None,
            true_support: None,
        })
    }

    /// Attaches the generating support (synthetic datasets only).
    pub fn with_true_support(
        mut self,
        support: impl IntoIterator<Item = usize>,
    ) -> Result<Self, DataError> {
        let cols = self.num_features();
        let set: BTreeSet<usize> = support.into_iter().collect();
        if let Some(&index) = set.iter().next_back() {
            if index >= cols {
                return Err(DataError::SupportOutOfRange { index, cols });
            }
        }
        self.true_support = Some(set);
        Ok(self)
    }

    /// Attaches one name per feature column.
    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self, DataError> {
        if names.len() != self.num_features() {
            return Err(DataError::Config(format!(
                "{} feature names for {} columns",
                names.len(),
                self.num_features()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.labels
    }

    pub fn num_observations(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn true_support(&self) -> Option<&BTreeSet<usize>> {
        self.true_support.as_ref()
    }

    /// Returns a copy with each column divided by its standard deviation
    /// (columns are not centered, so sparsity patterns survive). Columns with
    /// standard deviation below `1e-12` are left untouched.
    pub fn standardized(&self) -> Dataset {
        let m = self.num_observations() as f64;
        let mut matrix = self.matrix.clone();
        for mut col in matrix.columns_mut() {
            let mean = col.sum() / m;
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m;
            let sd = var.sqrt();
            if sd > 1e-12 {
                col.mapv_inplace(|v| v / sd);
            }
        }
        Dataset {
            matrix,
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
            true_support: self.true_support.clone(),
        }
    }
}

/// Covariance model for the synthetic feature rows.
#[derive(Clone, Debug)]
pub enum Covariance {
    Identity,
    /// Symmetric positive semidefinite matrix, one row/column per feature.
    Explicit(Array2<f64>),
}

/// Parameters of the synthetic generator.
#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub num_features: usize,
    pub num_observations: usize,
    /// Size of the generating support; its coefficients are all one.
    pub support_size: usize,
    /// Signal strength multiplying the margins before label sampling.
    pub signal: f64,
    pub covariance: Covariance,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Identity-covariance configuration.
    pub fn new(
        num_features: usize,
        num_observations: usize,
        support_size: usize,
        signal: f64,
        seed: u64,
    ) -> Self {
        Self {
            num_features,
            num_observations,
            support_size,
            signal,
            covariance: Covariance::Identity,
            seed,
        }
    }
}

/// Generates a synthetic dataset.
///
/// Rows of the matrix are i.i.d. normal with the configured covariance; the
/// generating coefficients have ones at the equi-spaced support indices
/// `floor(j*n/k)` and zeros elsewhere; each label is `+1` with probability
/// `sigmoid(signal * margin)`. The draw order is fixed: the whole matrix in
/// row-major order first, then one uniform per label, so identical
/// configurations produce bit-identical datasets.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<Dataset, DataError> {
    let n = cfg.num_features;
    let m = cfg.num_observations;
    let k = cfg.support_size;
    if n == 0 || m == 0 {
        return Err(DataError::Config(format!(
            "need at least one feature and one observation, got n={n}, m={m}"
        )));
    }
    if k == 0 || k > n {
        return Err(DataError::Config(format!(
            "support size must satisfy 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if !cfg.signal.is_finite() || cfg.signal < 0.0 {
        return Err(DataError::Config(format!(
            "signal must be finite and nonnegative, got {}",
            cfg.signal
        )));
    }
    let factor = match &cfg.covariance {
        Covariance::Identity => None,
        Covariance::Explicit(sigma) => Some(psd_factor(sigma, n)?),
    };

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let mut matrix = Array2::<f64>::zeros((m, n));
    let mut row_buf = vec![0.0; n];
    for i in 0..m {
        for slot in row_buf.iter_mut() {
            *slot = rng.next_normal();
        }
        match &factor {
            None => {
                for (j, &z) in row_buf.iter().enumerate() {
                    matrix[(i, j)] = z;
                }
            }
            Some(l) => {
                // Row a_i = L z_i, giving covariance L Lᵀ = Σ.
                for j in 0..n {
                    let mut acc = 0.0;
                    for t in 0..=j {
                        acc += l[(j, t)] * row_buf[t];
                    }
                    matrix[(i, j)] = acc;
                }
            }
        }
    }

    let support: BTreeSet<usize> = (0..k).map(|j| j * n / k).collect();
    let mut labels = Array1::<f64>::zeros(m);
    for i in 0..m {
        let margin: f64 = support.iter().map(|&j| matrix[(i, j)]).sum();
        let p_plus = sigmoid(cfg.signal * margin);
        labels[i] = if rng.next_f64() < p_plus { 1.0 } else { -1.0 };
    }

    Dataset::new(matrix, labels)?.with_true_support(support)
}

/// Cholesky-type factorization that tolerates semidefinite input: returns a
/// lower-triangular `L` with `sigma = L Lᵀ`. Rejects asymmetric matrices and
/// negative pivots.
fn psd_factor(sigma: &Array2<f64>, n: usize) -> Result<Array2<f64>, DataError> {
    if sigma.dim() != (n, n) {
        return Err(DataError::InvalidCovariance(format!(
            "expected {n}x{n}, got {:?}",
            sigma.dim()
        )));
    }
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                return Err(DataError::InvalidCovariance(format!(
                    "asymmetric at ({i}, {j})"
                )));
            }
        }
        scale = scale.max(sigma[(i, i)].abs());
    }
    let pivot_tol = 1e-10 * scale.max(1.0);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = sigma[(j, j)];
        for t in 0..j {
            d -= l[(j, t)] * l[(j, t)];
        }
        if d < -pivot_tol {
            return Err(DataError::InvalidCovariance(format!(
                "negative pivot {d:.3e} at column {j}"
            )));
        }
        if d <= pivot_tol {
            // Semidefinite direction: the whole column must vanish too,
            // otherwise the matrix has a negative eigenvalue.
            for i in (j + 1)..n {
                let mut v = sigma[(i, j)];
                for t in 0..j {
                    v -= l[(i, t)] * l[(j, t)];
                }
                if v.abs() > 1e-8 * scale.max(1.0) {
                    return Err(DataError::InvalidCovariance(format!(
                        "zero pivot at column {j} with nonzero off-diagonal"
                    )));
                }
            }
            continue;
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..n {
            let mut v = sigma[(i, j)];
            for t in 0..j {
                v -= l[(i, t)] * l[(j, t)];
            }
            l[(i, j)] = v / root;
        }
    }
    Ok(l)
}

/// Options for reading dense CSV datasets. The default auto-detects a
/// header and takes the label from the first column.
#[derive(Clone, Debug, Default)]
pub struct CsvOptions {
    /// `None` auto-detects a header by probing whether the first row parses
    /// as numbers.
    pub has_header: Option<bool>,
    /// Zero-based index of the label column.
    pub label_column: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_label(token: &str) -> Result<f64, String> {
    let value: f64 = token
        .trim()
        .parse()
        .map_err(|_| format!("label '{token}' is not a number"))?;
    if value == 1.0 {
        Ok(1.0)
    } else if value == 0.0 || value == -1.0 {
        Ok(-1.0)
    } else {
        Err(format!("label {value} outside {{-1, 0, +1}}"))
    }
}

/// Loads a dense CSV dataset. Row and column numbers in errors are 1-based
/// file positions; labels may use `{-1, +1}` or `{0, 1}` (0 maps to -1).
pub fn load_dense_csv(path: &Path, options: &CsvOptions) -> Result<Dataset, DataError> {
    let content = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();
    let line_err = |line: usize, message: String| DataError::Line {
        path: display.clone(),
        line,
        message,
    };

    // (1-based line number, comma-separated fields)
    let rows: Vec<(usize, Vec<&str>)> = content
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim_end_matches('\r')))
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(no, line)| (no, line.split(',').collect()))
        .collect();
    if rows.is_empty() {
        return Err(DataError::EmptyShape { rows: 0, cols: 0 });
    }

    let has_header = options.has_header.unwrap_or_else(|| {
        rows[0]
            .1
            .iter()
            .any(|field| field.trim().parse::<f64>().is_err())
    });
    let mut data_rows = rows.as_slice();
    let mut header: Option<&(usize, Vec<&str>)> = None;
    if has_header {
        header = Some(&rows[0]);
        data_rows = &rows[1..];
        if data_rows.is_empty() {
            return Err(DataError::EmptyShape { rows: 0, cols: 0 });
        }
    }

    let ncols = data_rows[0].1.len();
    if ncols < 2 {
        return Err(line_err(
            data_rows[0].0,
            "need a label column and at least one feature column".into(),
        ));
    }
    if options.label_column >= ncols {
        return Err(DataError::Config(format!(
            "label column {} out of range for {} columns",
            options.label_column, ncols
        )));
    }

    let m = data_rows.len();
    let n = ncols - 1;
    let mut matrix = Array2::<f64>::zeros((m, n));
    let mut labels = Array1::<f64>::zeros(m);
    for (r, (line_no, fields)) in data_rows.iter().enumerate() {
        if fields.len() != ncols {
            return Err(line_err(
                *line_no,
                format!("expected {ncols} fields, found {}", fields.len()),
            ));
        }
        let mut feature = 0;
        for (c, field) in fields.iter().enumerate() {
            let cell_err = |message: String| DataError::Cell {
                path: display.clone(),
                row: *line_no,
                col: c + 1,
                message,
            };
            if c == options.label_column {
                labels[r] = parse_label(field).map_err(cell_err)?;
            } else {
                let value: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| cell_err(format!("'{}' is not a number", field.trim())))?;
                if !value.is_finite() {
                    return Err(cell_err(format!("non-finite value {value}")));
                }
                matrix[(r, feature)] = value;
                feature += 1;
            }
        }
    }

    let dataset = Dataset::new(matrix, labels)?;
    if let Some((_, fields)) = header {
        let names: Vec<String> = fields
            .iter()
            .enumerate()
            .filter(|(c, _)| *c != options.label_column)
            .map(|(_, f)| f.trim().to_string())
            .collect();
        return dataset.with_feature_names(names);
    }
    Ok(dataset)
}

/// Writes a dataset as dense CSV (label first, then features). Floats use
/// the shortest decimal rendering that parses back to the identical value,
/// so a write/load round trip is exact.
pub fn write_dense_csv(d: &Dataset, path: &Path, header: bool) -> Result<(), DataError> {
    let mut out = String::new();
    if header {
        out.push_str("label");
        for j in 0..d.num_features() {
            match d.feature_names() {
                Some(names) => {
                    let _ = write!(out, ",{}", names[j]);
                }
                None => {
                    let _ = write!(out, ",f{j}");
                }
            }
        }
        out.push('\n');
    }
    for i in 0..d.num_observations() {
        let _ = write!(out, "{}", d.labels()[i]);
        for j in 0..d.num_features() {
            let _ = write!(out, ",{}", d.matrix()[(i, j)]);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Loads the sparse text format: one observation per line,
/// `<label> <index>:<value> ...` with 1-based strictly increasing indices.
/// The feature count is the largest index seen unless `num_features` forces
/// a wider matrix.
pub fn load_sparse_text(path: &Path, num_features: Option<usize>) -> Result<Dataset, DataError> {
    let content = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();
    let line_err = |line: usize, message: String| DataError::Line {
        path: display.clone(),
        line,
        message,
    };

    // (line number, label, [(1-based index, value)]) per observation.
    type SparseRow = (usize, f64, Vec<(usize, f64)>);
    let mut rows: Vec<SparseRow> = Vec::new();
    let mut max_index = 0usize;
    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = parse_label(tokens.next().expect("split of non-empty line"))
            .map_err(|m| line_err(line_no, m))?;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut prev_index = 0usize;
        for token in tokens {
            let (idx_str, val_str) = token
                .split_once(':')
                .ok_or_else(|| line_err(line_no, format!("token '{token}' is not index:value")))?;
            let index: usize = idx_str
                .parse()
                .map_err(|_| line_err(line_no, format!("index '{idx_str}' is not an integer")))?;
            if index == 0 {
                return Err(line_err(line_no, "indices are 1-based".into()));
            }
            if index <= prev_index {
                return Err(line_err(
                    line_no,
                    format!(
                        "duplicate or non-increasing index {index} after {prev_index}; \
                         indices must be strictly increasing"
                    ),
                ));
            }
            let value: f64 = val_str
                .parse()
                .map_err(|_| line_err(line_no, format!("value '{val_str}' is not a number")))?;
            if !value.is_finite() {
                return Err(line_err(line_no, format!("non-finite value {value}")));
            }
            prev_index = index;
            entries.push((index, value));
        }
        max_index = max_index.max(prev_index);
        rows.push((line_no, label, entries));
    }

    if rows.is_empty() {
        return Err(DataError::EmptyShape { rows: 0, cols: 0 });
    }
    let n = match num_features {
        Some(n) => {
            if n < max_index {
                let offender = rows
                    .iter()
                    .find(|(_, _, entries)| entries.iter().any(|&(idx, _)| idx > n))
                    .expect("some row holds the max index");
                return Err(line_err(
                    offender.0,
                    format!("feature index exceeds forced width {n}"),
                ));
            }
            n
        }
        None => max_index,
    };
    if n == 0 {
        return Err(DataError::EmptyShape {
            rows: rows.len(),
            cols: 0,
        });
    }

    let m = rows.len();
    let mut matrix = Array2::<f64>::zeros((m, n));
    let mut labels = Array1::<f64>::zeros(m);
    for (r, (_, label, entries)) in rows.iter().enumerate() {
        labels[r] = *label;
        for &(index, value) in entries {
            matrix[(r, index - 1)] = value;
        }
    }
    Dataset::new(matrix, labels)
}
