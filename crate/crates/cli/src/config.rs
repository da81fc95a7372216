use std::fs;
use std::path::{Path, PathBuf};

use kickback::data::{load_csv, normalize, synthetic_teacher, Dataset};
use kickback::experiments::GridSearchConfig;
use kickback::network::alternating_signs;
use kickback::{Algorithm, InitScheme, RectifierSign, Topology, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// How positive and negative nodes are laid out inside each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignArrangement {
    /// `+ - + - ...`
    Alternating,
    /// First half positive, second half negative (the extra node of an odd
    /// layer is positive).
    Halves,
}

impl SignArrangement {
    pub fn signs(self, n: usize) -> Vec<RectifierSign> {
        match self {
            SignArrangement::Alternating => alternating_signs(n),
            SignArrangement::Halves => (0..n)
                .map(|i| {
                    if i < n.div_ceil(2) {
                        RectifierSign::Positive
                    } else {
                        RectifierSign::Negative
                    }
                })
                .collect(),
        }
    }
}

/// Flat run configuration shared by the data-driven subcommands.
///
/// Every key has a default, so an empty file is a valid config. Optional keys
/// that are unset are omitted from the resolved echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    /// One factor per hidden layer. Unset means 1.0 everywhere.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rescale: Option<Vec<f64>>,
    pub init_scheme: InitScheme,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection_radius: Option<f64>,
    pub bias: bool,
    pub enforce_coherence: bool,
    pub parallel: bool,
    pub probe_count: usize,

    pub hidden_sizes: Vec<usize>,
    pub sign_arrangement: SignArrangement,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_csv: Option<PathBuf>,
    /// Zero-based. Unset means the last column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_column: Option<usize>,
    pub header: bool,
    pub normalize: bool,
    pub center_targets: bool,

    pub synthetic_seed: u64,
    pub synthetic_features: usize,
    pub synthetic_hidden: Vec<usize>,
    pub synthetic_train: usize,
    pub synthetic_test: usize,
    pub synthetic_noise: f64,

    pub output_dir: PathBuf,

    pub grid_learning_rates: Vec<f64>,
    pub grid_kappas: Vec<f64>,
    pub folds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            algorithm: train.algorithm,
            learning_rate: train.learning_rate,
            rescale: None,
            init_scheme: train.init_scheme,
            batch_size: train.batch_size,
            epochs: train.epochs,
            seed: train.seed,
            projection_radius: None,
            bias: train.bias_enabled,
            enforce_coherence: train.enforce_coherence,
            parallel: train.parallel,
            probe_count: train.probe_count,
            hidden_sizes: vec![10, 100, 200],
            sign_arrangement: SignArrangement::Alternating,
            train_csv: None,
            test_csv: None,
            target_column: None,
            header: false,
            normalize: true,
            center_targets: false,
            synthetic_seed: 0,
            synthetic_features: 10,
            synthetic_hidden: vec![10, 100, 200],
            synthetic_train: 4000,
            synthetic_test: 1000,
            synthetic_noise: 0.1,
            output_dir: PathBuf::from("run"),
            grid_learning_rates: vec![1e-4, 3e-4, 1e-3, 3e-3],
            grid_kappas: vec![0.25, 0.5, 1.0, 2.0],
            folds: 5,
        }
    }
}

/// Training and test split ready for use.
pub struct RunData {
    pub train: Dataset,
    pub test: Dataset,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.to_toml()).map_err(|e| CliError::io(path, e))
    }

    /// Expands every default that depends on other keys or on the data.
    pub fn resolve(mut self) -> CliResult<Self> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(CliError::Config("hidden_sizes must be a non-empty list of positive sizes".into()));
        }
        if self.rescale.is_none() {
            self.rescale = Some(vec![1.0; self.hidden_sizes.len()]);
        }
        match (&self.train_csv, &self.test_csv) {
            (Some(train), Some(_)) => {
                if self.target_column.is_none() {
                    self.target_column = Some(last_column(train)?);
                }
            }
            (None, None) => {}
            _ => return Err(CliError::Config("train_csv and test_csv must be given together".into())),
        }
        self.train_config().validate()?;
        Ok(self)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            algorithm: self.algorithm,
            learning_rate: self.learning_rate,
            rescale: self.rescale.clone().unwrap_or_else(|| vec![1.0; self.hidden_sizes.len()]),
            init_scheme: self.init_scheme,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            projection_radius: self.projection_radius,
            bias_enabled: self.bias,
            enforce_coherence: self.enforce_coherence,
            parallel: self.parallel,
            probe_count: self.probe_count,
        }
    }

    pub fn layer_sizes(&self, n_features: usize) -> Vec<usize> {
        let mut sizes = vec![n_features];
        sizes.extend(&self.hidden_sizes);
        sizes.push(2);
        sizes
    }

    pub fn topology(&self, n_features: usize) -> Topology {
        let layer_sizes = self.layer_sizes(n_features);
        let mut signs: Vec<Vec<RectifierSign>> = layer_sizes[1..layer_sizes.len() - 1]
            .iter()
            .map(|&n| self.sign_arrangement.signs(n))
            .collect();
        // the regression readout is always one positive and one negative node
        signs.push(alternating_signs(2));
        Topology {
            layer_sizes,
            signs,
            bias: self.bias,
        }
    }

    pub fn grid_config(&self, n_features: usize) -> GridSearchConfig {
        GridSearchConfig {
            base: self.train_config(),
            topology: self.topology(n_features),
            learning_rates: self.grid_learning_rates.clone(),
            kappas: self.grid_kappas.clone(),
            folds: self.folds,
        }
    }

    /// Loads the CSV pair, or draws the synthetic teacher data when no files
    /// are configured, then applies feature standardization and target
    /// centering as configured.
    pub fn load_data(&self) -> CliResult<RunData> {
        let (train, test) = match (&self.train_csv, &self.test_csv) {
            (Some(train), Some(test)) => {
                let col = match self.target_column {
                    Some(c) => c,
                    None => last_column(train)?,
                };
                (load_csv(train, col, self.header)?, load_csv(test, col, self.header)?)
            }
            (None, None) => {
                let data = synthetic_teacher(
                    self.synthetic_seed,
                    self.synthetic_features,
                    &self.synthetic_hidden,
                    self.synthetic_train,
                    self.synthetic_test,
                    self.synthetic_noise,
                )?;
                (data.train, data.test)
            }
            _ => return Err(CliError::Config("train_csv and test_csv must be given together".into())),
        };
        let (mut train, mut test) = if self.normalize {
            let (a, b, _) = normalize(&train, &test)?;
            (a, b)
        } else {
            (train, test)
        };
        if self.center_targets {
            let mean = train.target_stats().mean;
            train = train.shift_targets(-mean)?;
            test = test.shift_targets(-mean)?;
        }
        Ok(RunData { train, test })
    }
}

/// Index of the last column of the first line of `path`.
fn last_column(path: &Path) -> CliResult<usize> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| CliError::Config(format!("{}: file is empty", path.display())))?;
    let cols = first.split(',').count();
    if cols < 2 {
        return Err(CliError::Config(format!(
            "{}: need at least one feature and one target column",
            path.display()
        )));
    }
    Ok(cols - 1)
}
