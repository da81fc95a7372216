//! Reproducible experiment drivers shared by the CLI and the test suites:
//! finite-difference gradient checks, feedback oracles, cross-validated grid
//! search, rescale calibration and per-node dumps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold, Dataset};
use crate::error::{Error, Result};
use crate::feedback::{
    backprop_deltas, factorization_residual, global_error, influence, kickback_feedback, total_influence, Algorithm,
    OutputScope,
};
use crate::network::{InitScheme, Network, NodeId, RectifierSign, Topology};
use crate::training::{batch_error, evaluate, example_gradient, train, train_batch, TrainConfig};
use crate::coherence::is_coherent;

pub const DEFAULT_SIZES: [usize; 5] = [8, 10, 10, 10, 2];

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Draws a network and an `(input, target)` pair for trial `trial`.
pub fn random_case(
    seed: u64,
    trial: u64,
    layer_sizes: &[usize],
    scheme: InitScheme,
    bias: bool,
) -> Result<(Network, Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let net_seed = rng.random::<u64>();
    let net = Network::init(&Topology::alternating(layer_sizes, bias), scheme, net_seed)?;
    let x = gaussian_vec(&mut rng, layer_sizes[0]);
    let y: f64 = StandardNormal.sample(&mut rng);
    Ok((net, x, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub layer_sizes: Vec<usize>,
    /// Number of random (network, input) cases.
    pub n_inputs: usize,
    pub fd_step: f64,
    pub tolerance: f64,
    /// Denominator floor for relative errors.
    pub floor: f64,
    pub init_scheme: InitScheme,
    pub bias: bool,
    /// Test hook: flip the sign of one nonzero analytic gradient.
    pub corrupt: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            layer_sizes: DEFAULT_SIZES.to_vec(),
            n_inputs: 20,
            fd_step: 1e-6,
            tolerance: 1e-5,
            floor: 1e-4,
            init_scheme: InitScheme::Uniform,
            bias: true,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    /// Where `max_rel_err` was attained: (case, weight layer, source row, target).
    pub worst: Option<(usize, usize, usize, usize)>,
    pub checked: usize,
    /// Checked weights with a nonzero analytic or numeric gradient.
    pub nonzero: usize,
    /// Weights skipped because a perturbation crosses a rectifier kink.
    pub excluded: usize,
    pub passed: bool,
}

/// Routed output activation and the firing pattern.
fn routed_output_of(net: &Network, x: &[f64], y: f64) -> Result<(f64, Vec<Vec<i8>>)> {
    let trace = net.forward(x)?;
    let err = global_error(net, &trace, y)?;
    Ok((trace.activations[net.output_layer()][err.node], trace.firing))
}

impl GradcheckReport {
    fn empty() -> Self {
        Self {
            max_rel_err: 0.0,
            worst: None,
            checked: 0,
            nonzero: 0,
            excluded: 0,
            passed: true,
        }
    }
}

/// Compares Backprop gradients against central differences of
/// `½ (x_o - y)²` for every weight of `n_inputs` random networks.
pub fn gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    if config.layer_sizes.len() < 3 {
        return Err(Error::TooFewLayers(config.layer_sizes.len()));
    }
    let mut report = GradcheckReport::empty();
    let mut corrupt = config.corrupt;
    for case in 0..config.n_inputs {
        let (mut net, x, y) = random_case(config.seed, case as u64, &config.layer_sizes, config.init_scheme, config.bias)?;
        gradcheck_case(&mut net, &x, y, config, case, &mut corrupt, &mut report)?;
    }
    report.passed = report.max_rel_err < config.tolerance;
    Ok(report)
}

/// Checks one example against `net`, folding the result into `report`.
/// `corrupt` is cleared once a gradient has been flipped.
pub fn gradcheck_case(
    net: &mut Network,
    x: &[f64],
    y: f64,
    config: &GradcheckConfig,
    case: usize,
    corrupt: &mut bool,
    report: &mut GradcheckReport,
) -> Result<()> {
    if !(config.fd_step > 0.0) || !(config.floor > 0.0) {
        return Err(Error::Config("fd_step and floor must be > 0".into()));
    }
    let train_cfg = TrainConfig {
        algorithm: Algorithm::Backprop,
        ..TrainConfig::default()
    };
    let h = config.fd_step;
    let mut grads = example_gradient(net, x, y, &train_cfg)?;
    if *corrupt {
        if let Some(g) = grads.iter_mut().flat_map(|m| m.as_mut_slice()).find(|g| **g != 0.0) {
            *g = -*g;
            *corrupt = false;
        }
    }
    let base = net.forward(x)?;
    for alpha in 0..net.num_layers() - 1 {
        let (rows, cols) = (net.weights(alpha).rows(), net.weights(alpha).cols());
        // nodes downstream of a weight in layer alpha start at layer alpha + 1
        let near_kink = base.preactivations[alpha..]
            .iter()
            .flatten()
            .any(|a| *a != 0.0 && a.abs() < 10.0 * h);
        for r in 0..rows {
            for c in 0..cols {
                let w0 = net.weights(alpha).get(r, c);
                net.weights_mut(alpha).set(r, c, w0 + h);
                let (o_plus, f_plus) = routed_output_of(net, x, y)?;
                net.weights_mut(alpha).set(r, c, w0 - h);
                let (o_minus, f_minus) = routed_output_of(net, x, y)?;
                net.weights_mut(alpha).set(r, c, w0);
                if near_kink || f_plus != base.firing || f_minus != base.firing {
                    report.excluded += 1;
                    continue;
                }
                // (E+ - E-) / 2h with E = ½ b², written as ½ (b+ - b-)(b+ + b-)
                // so the subtraction cancels at the scale of x_o rather than E
                let fd = (o_plus - o_minus) * ((o_plus - y) + (o_minus - y)) / (4.0 * h);
                let g = grads[alpha].get(r, c);
                let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(config.floor);
                report.checked += 1;
                report.nonzero += usize::from(g != 0.0 || fd != 0.0);
                if rel > report.max_rel_err || rel.is_nan() {
                    report.max_rel_err = rel;
                    report.worst = Some((case, alpha, r, c));
                }
            }
        }
    }
    report.passed = report.max_rel_err < config.tolerance;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub seed: u64,
    pub trials: usize,
    pub layer_sizes: Vec<usize>,
    pub bias: bool,
    pub learning_rate: f64,
    pub residual_tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            layer_sizes: DEFAULT_SIZES.to_vec(),
            bias: true,
            learning_rate: 1e-4,
            residual_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub trials: usize,
    pub max_residual: f64,
    pub residual_failures: usize,
    /// Hidden nodes of signed networks with `δ_j ≠ 0` whose kickback signal
    /// has the same sign.
    pub signed_agreement: (usize, usize),
    /// Same count on uniformly initialized networks; reported only.
    pub uniform_agreement: (usize, usize),
    pub descent_decreased: usize,
    pub descent_increased: usize,
    pub descent_noop: usize,
    pub passed: bool,
}

/// Sign agreement between `δ` and `ε` at hidden nodes where `δ_j ≠ 0`.
pub fn sign_agreement(net: &Network, x: &[f64], y: f64) -> Result<(usize, usize)> {
    let trace = net.forward(x)?;
    let err = global_error(net, &trace, y)?;
    let deltas = backprop_deltas(net, &trace, err)?;
    let kappa = vec![1.0; net.num_hidden()];
    let eps = kickback_feedback(net, &trace, err, &kappa)?;
    let mut agree = 0;
    let mut total = 0;
    for (d, e) in deltas.values.iter().flatten().zip(eps.values.iter().flatten()) {
        if *d != 0.0 {
            total += 1;
            agree += usize::from(d.signum() == e.signum() && *e != 0.0);
        }
    }
    Ok((agree, total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DescentOutcome {
    /// Nothing fired along the routed path, so the step changed nothing.
    NoOp,
    Held { before: f64, after: f64 },
    Increased { before: f64, after: f64 },
}

/// One single-example kickback step; compares the example's error before
/// and after.
pub fn descent_step(net: &mut Network, x: &[f64], y: f64, learning_rate: f64) -> Result<DescentOutcome> {
    let config = TrainConfig {
        algorithm: Algorithm::Kickback,
        learning_rate,
        rescale: vec![1.0; net.num_hidden()],
        parallel: false,
        ..TrainConfig::default()
    };
    let batch = [(x, y)];
    let before = batch_error(net, &batch)?;
    let snapshot = net.clone();
    train_batch(net, &batch, &config)?;
    if *net == snapshot {
        return Ok(DescentOutcome::NoOp);
    }
    let after = batch_error(net, &batch)?;
    Ok(if after <= before {
        DescentOutcome::Held { before, after }
    } else {
        DescentOutcome::Increased { before, after }
    })
}

/// Draws signed networks until one is coherent for its own probe example
/// under the routed output, or gives up after `max_draws`.
pub fn coherent_signed_case(
    seed: u64,
    trial: u64,
    layer_sizes: &[usize],
    bias: bool,
    max_draws: u64,
) -> Result<Option<(Network, Vec<f64>, f64)>> {
    for draw in 0..max_draws {
        let (net, x, y) = random_case(seed, trial * max_draws + draw, layer_sizes, InitScheme::Signed, bias)?;
        let trace = net.forward(&x)?;
        let err = global_error(&net, &trace, y)?;
        if is_coherent(&net, &trace, err.into())?.coherent {
            return Ok(Some((net, x, y)));
        }
    }
    Ok(None)
}

/// Factorization residuals, sign agreement and small-step descent over
/// random configurations.
pub fn run_oracles(config: &OracleConfig) -> Result<OracleReport> {
    if config.trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let mut report = OracleReport {
        trials: config.trials,
        max_residual: 0.0,
        residual_failures: 0,
        signed_agreement: (0, 0),
        uniform_agreement: (0, 0),
        descent_decreased: 0,
        descent_increased: 0,
        descent_noop: 0,
        passed: true,
    };
    for trial in 0..config.trials as u64 {
        for scheme in [InitScheme::Uniform, InitScheme::Signed] {
            let (net, x, y) = random_case(config.seed, trial, &config.layer_sizes, scheme, config.bias)?;
            let trace = net.forward(&x)?;
            let err = global_error(&net, &trace, y)?;
            let residual = factorization_residual(&net, &trace, err)?;
            report.max_residual = report.max_residual.max(residual);
            report.residual_failures += usize::from(!(residual < config.residual_tolerance));
            let (a, t) = sign_agreement(&net, &x, y)?;
            let slot = match scheme {
                InitScheme::Signed => &mut report.signed_agreement,
                InitScheme::Uniform => &mut report.uniform_agreement,
            };
            slot.0 += a;
            slot.1 += t;
        }
        if let Some((mut net, x, y)) = coherent_signed_case(config.seed ^ 0x5eed, trial, &config.layer_sizes, config.bias, 64)? {
            match descent_step(&mut net, &x, y, config.learning_rate)? {
                DescentOutcome::NoOp => report.descent_noop += 1,
                DescentOutcome::Held { .. } => report.descent_decreased += 1,
                DescentOutcome::Increased { .. } => report.descent_increased += 1,
            }
        } else {
            report.descent_noop += 1;
        }
    }
    report.passed = report.residual_failures == 0
        && report.signed_agreement.0 == report.signed_agreement.1
        && report.descent_increased == 0;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSearchConfig {
    pub base: TrainConfig,
    pub topology: Topology,
    pub learning_rates: Vec<f64>,
    /// Candidate rescale factors for every hidden layer but the last, which
    /// stays at 1. Ignored for Backprop.
    pub kappas: Vec<f64>,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub learning_rate: f64,
    pub rescale: Vec<f64>,
    pub fold_nmse: Vec<f64>,
    /// Mean validation nMSE; infinite when any fold failed numerically.
    pub mean_nmse: f64,
}

/// k-fold cross-validation over the η (and κ) grid. Cells are returned best
/// first: lowest mean validation nMSE, ties going to the smaller η.
pub fn grid_search(data: &Dataset, config: &GridSearchConfig) -> Result<Vec<GridCell>> {
    if config.learning_rates.is_empty() {
        return Err(Error::Config("learning rate grid is empty".into()));
    }
    config.topology.validate()?;
    let sizes = &config.topology.layer_sizes;
    let hidden = sizes.len().checked_sub(2).ok_or(Error::TooFewLayers(sizes.len()))?;
    let rescales: Vec<Vec<f64>> = match config.base.algorithm {
        Algorithm::Backprop => vec![config.base.rescale.clone()],
        Algorithm::Kickback => {
            if config.kappas.is_empty() {
                return Err(Error::Config("kappa grid is empty".into()));
            }
            // the layer next to the output keeps a factor of 1
            config
                .kappas
                .iter()
                .map(|&k| {
                    let mut r = vec![k; hidden];
                    if let Some(last) = r.last_mut() {
                        *last = 1.0;
                    }
                    r
                })
                .collect()
        }
    };
    let folds = kfold(data.len(), config.folds, config.base.seed)?;
    let mut cells: Vec<(f64, Vec<f64>)> = Vec::new();
    for &lr in &config.learning_rates {
        for r in &rescales {
            cells.push((lr, r.clone()));
        }
    }
    let topology = &config.topology;
    let evaluated: Vec<Result<GridCell>> = cells
        .into_par_iter()
        .map(|(lr, rescale)| {
            let cfg = TrainConfig {
                learning_rate: lr,
                rescale: rescale.clone(),
                parallel: false,
                ..config.base.clone()
            };
            cfg.validate()?;
            let mut fold_nmse = Vec::with_capacity(folds.len());
            for (f, val_idx) in folds.iter().enumerate() {
                let train_idx: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|&(g, _)| g != f)
                    .flat_map(|(_, idx)| idx.iter().copied())
                    .collect();
                let train_set = data.subset(format!("{}-train{f}", data.name), &train_idx)?;
                let val_set = data.subset(format!("{}-val{f}", data.name), val_idx)?;
                let mut net = Network::init(topology, cfg.init_scheme, cfg.seed)?;
                let score = match train(&mut net, &train_set, &val_set, &cfg) {
                    Ok(records) => match records.last() {
                        Some(r) => r.nmse_test,
                        None => evaluate(&net, &train_set, &val_set, 0, 0)?.nmse_test,
                    },
                    Err(e) if e.is_numeric() => f64::INFINITY,
                    Err(e) => return Err(e),
                };
                fold_nmse.push(if score.is_finite() { score } else { f64::INFINITY });
            }
            let mean_nmse = fold_nmse.iter().sum::<f64>() / fold_nmse.len() as f64;
            Ok(GridCell {
                learning_rate: lr,
                rescale,
                fold_nmse,
                mean_nmse,
            })
        })
        .collect();
    let mut cells = evaluated.into_iter().collect::<Result<Vec<_>>>()?;
    cells.sort_by(|a, b| {
        a.mean_nmse
            .total_cmp(&b.mean_nmse)
            .then(a.learning_rate.total_cmp(&b.learning_rate))
    });
    Ok(cells)
}

/// Per hidden layer, `mean |δ| / mean |ε|` over the probe examples with
/// unit rescaling. Layers without any kickback signal get 1.
pub fn calibrate_rescale(net: &Network, probes: &[(&[f64], f64)]) -> Result<Vec<f64>> {
    if probes.is_empty() {
        return Err(Error::Empty("probe set"));
    }
    let hidden = net.num_hidden();
    let ones = vec![1.0; hidden];
    let mut sum_d = vec![0.0; hidden];
    let mut sum_e = vec![0.0; hidden];
    for &(x, y) in probes {
        let trace = net.forward(x)?;
        let err = global_error(net, &trace, y)?;
        let d = backprop_deltas(net, &trace, err)?;
        let e = kickback_feedback(net, &trace, err, &ones)?;
        for h in 0..hidden {
            sum_d[h] += d.values[h].iter().map(|v| v.abs()).sum::<f64>();
            sum_e[h] += e.values[h].iter().map(|v| v.abs()).sum::<f64>();
        }
    }
    Ok(sum_d
        .iter()
        .zip(&sum_e)
        .map(|(&d, &e)| if e > 0.0 && d > 0.0 { d / e } else { 1.0 })
        .collect())
}

/// Everything known about one node for one example.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRecord {
    pub layer: usize,
    pub index: usize,
    pub sign: RectifierSign,
    pub preactivation: f64,
    pub activation: f64,
    pub firing: i8,
    /// Hidden nodes only.
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub pi: Option<f64>,
}

/// Dumps `δ`, `ε`, `τ` and `π` for every node on one example.
pub fn inspect(net: &Network, x: &[f64], y: f64, rescale: &[f64]) -> Result<Vec<NodeRecord>> {
    let trace = net.forward(x)?;
    let err = global_error(net, &trace, y)?;
    let scope = OutputScope::from(err);
    let deltas = backprop_deltas(net, &trace, err)?;
    let eps = kickback_feedback(net, &trace, err, rescale)?;
    let tau = influence(net, &trace, scope)?;
    let pi = total_influence(net, &trace, scope)?;
    let mut out = Vec::new();
    for layer in 1..net.num_layers() {
        for index in 0..net.layer_sizes()[layer] {
            let hidden = layer < net.output_layer();
            let pick = |field: &Vec<Vec<f64>>| hidden.then(|| field[layer - 1][index]);
            out.push(NodeRecord {
                layer,
                index,
                sign: net.sign(NodeId { layer, index }),
                preactivation: trace.preactivations[layer - 1][index],
                activation: trace.activations[layer][index],
                firing: trace.firing_of(layer)[index],
                delta: pick(&deltas.values),
                epsilon: pick(&eps.values),
                tau: pick(&tau),
                pi: pick(&pi),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradcheck_default_passes() {
        let report = gradcheck(&GradcheckConfig::default()).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.nonzero > 0);
    }

    #[test]
    fn gradcheck_detects_corruption() {
        let report = gradcheck(&GradcheckConfig {
            corrupt: true,
            ..GradcheckConfig::default()
        })
        .unwrap();
        assert!(!report.passed);
        assert!(report.max_rel_err >= 1.0);
    }

    #[test]
    fn gradcheck_silent_network_is_zero() {
        // zero input and no bias: nothing fires anywhere
        let mut net = Network::init(&Topology::alternating(&[3, 4, 2], false), InitScheme::Uniform, 3).unwrap();
        let config = GradcheckConfig::default();
        let mut report = GradcheckReport::empty();
        gradcheck_case(&mut net, &[0.0; 3], 0.7, &config, 0, &mut false, &mut report).unwrap();
        assert!(report.passed);
        assert_eq!(report.checked, net.num_weights());
        assert_eq!(report.nonzero, 0);
        assert_eq!(report.max_rel_err, 0.0);
    }

    #[test]
    fn oracles_pass() {
        let report = run_oracles(&OracleConfig {
            trials: 20,
            ..OracleConfig::default()
        })
        .unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.signed_agreement.1 > 0);
    }

    #[test]
    fn inspect_lists_every_node() {
        let (net, x, y) = random_case(1, 0, &[3, 4, 5, 2], InitScheme::Signed, true).unwrap();
        let recs = inspect(&net, &x, y, &[1.0, 1.0]).unwrap();
        assert_eq!(recs.len(), 11);
        assert!(recs[..9].iter().all(|r| r.tau.is_some()));
        assert!(recs[9..].iter().all(|r| r.delta.is_none()));
    }

    #[test]
    fn calibration_single_hidden_layer_is_one() {
        let (net, x, y) = random_case(2, 0, &[3, 6, 2], InitScheme::Signed, true).unwrap();
        let k = calibrate_rescale(&net, &[(&x, y)]).unwrap();
        assert_eq!(k, vec![1.0]);
    }
}
