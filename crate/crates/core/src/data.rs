//! Regression datasets: CSV ingestion, synthetic teacher data, feature
//! standardization, error metrics and seeded batching.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::network::{readout, InitScheme, Network, Topology};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetStats {
    pub mean: f64,
    /// Population variance (divides by `n`).
    pub variance: f64,
}

/// Feature matrix (row-major, `len() x n_features`) with a scalar target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    n_features: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    feature_stats: Vec<FeatureStats>,
    target_stats: TargetStats,
}

impl Dataset {
    pub fn new(name: impl Into<String>, n_features: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != n_features * targets.len() {
            return Err(Error::Dimension {
                expected: n_features * targets.len(),
                actual: inputs.len(),
            });
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset value"));
        }
        let n = targets.len();
        let feature_stats = (0..n_features)
            .map(|f| {
                let (mean, var) = mean_var((0..n).map(|i| inputs[i * n_features + f]));
                FeatureStats { mean, std: var.sqrt() }
            })
            .collect();
        let (mean, variance) = mean_var(targets.iter().copied());
        Ok(Self {
            name: name.into(),
            n_features,
            inputs,
            targets,
            feature_stats,
            target_stats: TargetStats { mean, variance },
        })
    }

    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(Error::Dimension {
                expected: n_features,
                actual: bad.len(),
            });
        }
        Self::new(name, n_features, rows.concat(), targets)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_stats(&self) -> &[FeatureStats] {
        &self.feature_stats
    }

    pub fn target_stats(&self) -> TargetStats {
        self.target_stats
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Result<Self> {
        let mut inputs = Vec::with_capacity(indices.len() * self.n_features);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            targets.push(self.targets[i]);
        }
        Self::new(name, self.n_features, inputs, targets)
    }

    /// Copy with `offset` subtracted from every target.
    pub fn shift_targets(&self, offset: f64) -> Result<Self> {
        let targets = self.targets.iter().map(|y| y - offset).collect();
        Self::new(self.name.clone(), self.n_features, self.inputs.clone(), targets)
    }

    /// Writes features followed by the target as the last column.
    pub fn save_csv(&self, path: &Path, header: bool) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        if header {
            let mut names: Vec<String> = (0..self.n_features).map(|f| format!("x{f}")).collect();
            names.push("y".into());
            w.write_record(&names).map_err(|e| csv_error(path, e))?;
        }
        for i in 0..self.len() {
            let record: Vec<String> = self
                .input(i)
                .iter()
                .chain(std::iter::once(&self.targets[i]))
                .map(|v| format!("{v:e}"))
                .collect();
            w.write_record(&record).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn mean_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Csv {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Reads comma-separated numeric rows. Column `target_column` becomes the
/// target; every other column becomes a feature, in file order.
pub fn load_csv(path: &Path, target_column: usize, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Csv {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(bad(format!("expected {w} fields, found {}", record.len())));
        }
        if target_column >= w {
            return Err(bad(format!("target column {target_column} missing ({w} columns)")));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| bad(format!("column {c}: `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("column {c}: non-finite value")));
            }
            if c == target_column {
                targets.push(v);
            } else {
                inputs.push(v);
            }
        }
    }
    let Some(width) = width else {
        return Err(Error::Empty("csv file"));
    };
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, width - 1, inputs, targets)
}

/// Train/test pair drawn from a fixed random rectifier network.
#[derive(Debug, Clone)]
pub struct TeacherData {
    pub train: Dataset,
    pub test: Dataset,
    pub teacher: Network,
    /// Seed that produced a non-degenerate teacher (`seed` or a later one).
    pub teacher_seed: u64,
}

/// Inputs are standard Gaussian; `y` is the teacher's signed readout plus
/// Gaussian noise. A teacher whose outputs are all zero on the sample is
/// discarded and the next seed tried.
pub fn synthetic_teacher(
    seed: u64,
    n_features: usize,
    hidden_sizes: &[usize],
    n_train: usize,
    n_test: usize,
    noise_std: f64,
) -> Result<TeacherData> {
    if n_features == 0 || n_train == 0 || n_test == 0 || hidden_sizes.contains(&0) {
        return Err(Error::Config("synthetic teacher sizes must be >= 1".into()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Config(format!("noise_std must be >= 0, got {noise_std}")));
    }
    let mut sizes = vec![n_features];
    sizes.extend_from_slice(hidden_sizes);
    sizes.push(2);
    let topology = Topology::alternating(&sizes, true);
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?;

    const MAX_ATTEMPTS: u64 = 64;
    for attempt in 0..MAX_ATTEMPTS {
        let teacher_seed = seed.wrapping_add(attempt);
        let teacher = Network::init(&topology, InitScheme::Signed, teacher_seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(teacher_seed);
        rng.set_stream(1);
        let mut draw = |n: usize, name: &str| -> Result<(Dataset, bool)> {
            let mut inputs = Vec::with_capacity(n * n_features);
            let mut targets = Vec::with_capacity(n);
            let mut any_signal = false;
            for _ in 0..n {
                let x: Vec<f64> = (0..n_features).map(|_| StandardNormal.sample(&mut rng)).collect();
                let clean = readout(&teacher.forward(&x)?);
                any_signal |= clean != 0.0;
                let eps = if noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                targets.push(clean + eps);
                inputs.extend(x);
            }
            Ok((Dataset::new(name, n_features, inputs, targets)?, any_signal))
        };
        let (train, train_signal) = draw(n_train, "teacher-train")?;
        let (test, _) = draw(n_test, "teacher-test")?;
        if train_signal {
            return Ok(TeacherData {
                train,
                test,
                teacher,
                teacher_seed,
            });
        }
    }
    Err(Error::Config(format!(
        "no non-degenerate teacher found in {MAX_ATTEMPTS} seeds from {seed}"
    )))
}

/// Per-feature standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub stats: Vec<FeatureStats>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        Ok(Self {
            stats: train.feature_stats().to_vec(),
        })
    }

    /// Zero-variance features map to zero.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.stats.len() {
            return Err(Error::Dimension {
                expected: self.stats.len(),
                actual: data.n_features(),
            });
        }
        let mut inputs = Vec::with_capacity(data.len() * data.n_features());
        for i in 0..data.len() {
            inputs.extend(data.input(i).iter().zip(&self.stats).map(|(&v, s)| {
                if s.std > 0.0 {
                    (v - s.mean) / s.std
                } else {
                    0.0
                }
            }));
        }
        Dataset::new(data.name.clone(), data.n_features(), inputs, data.targets().to_vec())
    }
}

/// Standardizes both splits with statistics from `train` only.
pub fn normalize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Standardizer)> {
    let s = Standardizer::fit(train)?;
    Ok((s.apply(train)?, s.apply(test)?, s))
}

/// Mean squared error divided by `target_variance`.
pub fn nmse(predictions: &[f64], targets: &[f64], target_variance: f64) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Dimension {
            expected: targets.len(),
            actual: predictions.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::Empty("prediction set"));
    }
    if !(target_variance > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mse = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / targets.len() as f64;
    Ok(mse / target_variance)
}

/// Seeded permutation of `0..n` for one epoch, cut into consecutive chunks.
/// The last chunk may be short.
pub fn batches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// `k` disjoint validation folds covering `0..n`, from one seeded permutation.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::Config(format!("cannot split {n} examples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}
