//! Local learning rules and the mini-batch training loop.
//!
//! Hidden nodes descend the rectilinear loss `φ · S_w(x)` with `φ` set to the
//! Backprop signal `δ_j` or the Kickback signal `ε_j`. The output node routed
//! to an example's target performs rectilinear regression: when it fires it
//! moves its signed output towards the target, i.e. linear regression on the
//! inputs that make it fire. The other output node is left alone.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherence::{coherence_probe, enforce_signs};
use crate::data::{batches, Dataset};
use crate::error::{Error, Result};
use crate::feedback::{feedback, global_error, validate_rescale, Algorithm, GlobalError};
use crate::network::{dot, ActivationTrace, InitScheme, Network, NodeId, RectifierSign, WeightMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    /// One factor per hidden layer; only used by Kickback.
    pub rescale: Vec<f64>,
    pub init_scheme: InitScheme,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub projection_radius: Option<f64>,
    pub bias_enabled: bool,
    /// Re-impose sign conformity after every batch (ablation only).
    pub enforce_coherence: bool,
    /// Run per-example forward and feedback passes on the rayon pool.
    pub parallel: bool,
    /// Number of leading test examples used for coherence logging.
    pub probe_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Backprop,
            learning_rate: 1e-3,
            rescale: vec![1.0; 3],
            init_scheme: InitScheme::Signed,
            batch_size: 20,
            epochs: 100,
            seed: 0,
            projection_radius: None,
            bias_enabled: true,
            enforce_coherence: false,
            parallel: false,
            probe_count: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if let Some((layer, &value)) = self.rescale.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Rescale { layer, value });
        }
        if let Some(r) = self.projection_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("projection_radius must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

/// One epoch's evaluation. `coherence` has one entry per hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_error: f64,
    pub test_error: f64,
    pub nmse_train: f64,
    pub nmse_test: f64,
    pub coherence: Vec<f64>,
    pub wall_ms: u64,
}

impl MetricsRecord {
    /// Equality on everything except wall-clock time.
    pub fn same_values(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.train_error.to_bits() == other.train_error.to_bits()
            && self.test_error.to_bits() == other.test_error.to_bits()
            && self.nmse_train.to_bits() == other.nmse_train.to_bits()
            && self.nmse_test.to_bits() == other.nmse_test.to_bits()
            && self.coherence.len() == other.coherence.len()
            && self
                .coherence
                .iter()
                .zip(&other.coherence)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub examples: usize,
    /// Mean `½ (x_o - y)²` before the update.
    pub loss: f64,
    /// Fraction of hidden nodes that fired, averaged over the batch.
    pub hidden_firing: f64,
}

/// `φ · S_w(x)`.
pub fn rectilinear_loss(w: &[f64], x: &[f64], phi: f64, sign: RectifierSign) -> Result<f64> {
    check_dims(w, x)?;
    Ok(phi * sign.output(dot(w, x)))
}

/// Gradient of the rectilinear loss in `w`: `φ · x · 1`.
pub fn rectilinear_gradient(w: &[f64], x: &[f64], phi: f64, sign: RectifierSign) -> Result<Vec<f64>> {
    check_dims(w, x)?;
    let ind = f64::from(sign.subgradient(dot(w, x)));
    Ok(x.iter().map(|xi| phi * xi * ind).collect())
}

/// Descent direction of rectilinear regression onto `phi`:
/// `(φ - S_w(x)) · 1 · x` when the node fires, zero otherwise. For a positive
/// node this is `(φ - <w, x>) x`.
pub fn output_regression_direction(w: &[f64], x: &[f64], phi: f64, sign: RectifierSign) -> Result<Vec<f64>> {
    check_dims(w, x)?;
    let a = dot(w, x);
    let ind = f64::from(sign.subgradient(a));
    let residual = phi - sign.output(a);
    Ok(x.iter().map(|xi| residual * ind * xi).collect())
}

/// Euclidean projection onto the ball of radius `radius`.
pub fn project_l2(w: &[f64], radius: f64) -> Vec<f64> {
    let mut out = w.to_vec();
    project_l2_in_place(&mut out, radius);
    out
}

pub fn project_l2_in_place(w: &mut [f64], radius: f64) {
    let norm = dot(w, w).sqrt();
    if norm > radius {
        let scale = radius / norm;
        w.iter_mut().for_each(|v| *v *= scale);
        // rounding can leave the result a hair outside
        let mut n2 = dot(w, w).sqrt();
        while n2 > radius {
            w.iter_mut().for_each(|v| *v *= 1.0 - f64::EPSILON);
            n2 = dot(w, w).sqrt();
        }
    }
}

fn check_dims(w: &[f64], x: &[f64]) -> Result<()> {
    if w.len() != x.len() {
        return Err(Error::Dimension {
            expected: w.len(),
            actual: x.len(),
        });
    }
    Ok(())
}

/// Forward pass and feedback for one example.
struct ExampleSignals {
    trace: ActivationTrace,
    err: GlobalError,
    hidden: Vec<Vec<f64>>,
}

fn example_signals(net: &Network, input: &[f64], target: f64, config: &TrainConfig) -> Result<ExampleSignals> {
    let trace = net.forward(input)?;
    let err = global_error(net, &trace, target)?;
    let field = feedback(config.algorithm, net, &trace, err, &config.rescale)?;
    Ok(ExampleSignals {
        trace,
        err,
        hidden: field.values,
    })
}

/// Adds one example's loss gradient to `grads`.
fn accumulate(net: &Network, s: &ExampleSignals, target: f64, grads: &mut [WeightMatrix]) {
    let out = net.output_layer();
    let bias = net.bias_enabled();
    for (alpha, g) in grads.iter_mut().enumerate() {
        let target_layer = alpha + 1;
        let x = &s.trace.activations[alpha];
        let firing = s.trace.firing_of(target_layer);
        let mut coeffs = vec![0.0; firing.len()];
        if target_layer == out {
            let o = s.err.node;
            if firing[o] != 0 {
                // gradient of ½ (S(a) - y)² is (S(a) - y) · 1 · x
                let residual = s.trace.activations[out][o] - target;
                coeffs[o] = residual * f64::from(firing[o]);
            }
        } else {
            for (k, (&f, &phi)) in firing.iter().zip(&s.hidden[target_layer - 1]).enumerate() {
                if f != 0 {
                    coeffs[k] = phi * f64::from(f);
                }
            }
        }
        if coeffs.iter().all(|&c| c == 0.0) {
            continue;
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (gk, &c) in g.row_mut(i).iter_mut().zip(&coeffs) {
                    if c != 0.0 {
                        *gk += c * xi;
                    }
                }
            }
        }
        if bias {
            for (gk, &c) in g.row_mut(x.len()).iter_mut().zip(&coeffs) {
                if c != 0.0 {
                    *gk += c;
                }
            }
        }
    }
}

/// Loss gradient for a single example, one matrix per weight layer. With
/// Backprop this is the gradient of `½ (x_o - y)²`.
pub fn example_gradient(net: &Network, input: &[f64], target: f64, config: &TrainConfig) -> Result<Vec<WeightMatrix>> {
    if config.algorithm == Algorithm::Kickback {
        validate_rescale(net, &config.rescale)?;
    }
    let signals = example_signals(net, input, target, config)?;
    let mut grads: Vec<WeightMatrix> = net
        .all_weights()
        .iter()
        .map(|m| WeightMatrix::zeros(m.rows(), m.cols()))
        .collect();
    accumulate(net, &signals, target, &mut grads);
    Ok(grads)
}

/// One mean-gradient step over `batch`, accumulated in example order.
pub fn train_batch(net: &mut Network, batch: &[(&[f64], f64)], config: &TrainConfig) -> Result<BatchStats> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if config.algorithm == Algorithm::Kickback {
        validate_rescale(net, &config.rescale)?;
    }
    let signals: Vec<ExampleSignals> = if config.parallel {
        batch
            .par_iter()
            .map(|&(x, y)| example_signals(net, x, y, config))
            .collect::<Result<_>>()?
    } else {
        batch
            .iter()
            .map(|&(x, y)| example_signals(net, x, y, config))
            .collect::<Result<_>>()?
    };

    let mut grads: Vec<WeightMatrix> = net
        .all_weights()
        .iter()
        .map(|m| WeightMatrix::zeros(m.rows(), m.cols()))
        .collect();
    let mut loss = 0.0;
    let mut firing = 0usize;
    let hidden_nodes: usize = net.layer_sizes()[1..net.output_layer()].iter().sum();
    for (s, &(_, y)) in signals.iter().zip(batch) {
        accumulate(net, s, y, &mut grads);
        loss += 0.5 * s.err.beta * s.err.beta;
        firing += s.trace.firing[..net.num_hidden()]
            .iter()
            .flatten()
            .filter(|&&f| f != 0)
            .count();
    }

    let inv_n = 1.0 / batch.len() as f64;
    for (alpha, g) in grads.iter().enumerate() {
        if let Some(pos) = g.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(NodeId {
                layer: alpha + 1,
                index: pos % g.cols(),
            }));
        }
    }
    for (alpha, g) in grads.iter().enumerate() {
        let lr = config.learning_rate;
        let w = net.weights_mut(alpha);
        for (wv, &gv) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
            if gv != 0.0 {
                *wv -= lr * (gv * inv_n);
            }
        }
        if let Some(radius) = config.projection_radius {
            for k in 0..w.cols() {
                let mut col = w.column(k);
                project_l2_in_place(&mut col, radius);
                w.set_column(k, &col);
            }
        }
    }
    if config.enforce_coherence {
        enforce_signs(net);
    }
    Ok(BatchStats {
        examples: batch.len(),
        loss: loss * inv_n,
        hidden_firing: if hidden_nodes > 0 {
            firing as f64 * inv_n / hidden_nodes as f64
        } else {
            0.0
        },
    })
}

/// Mean squared error of the routed output node: `mean (x_o - y)²`.
pub fn train_error(net: &Network, data: &Dataset) -> Result<f64> {
    let mut sum = 0.0;
    for i in 0..data.len() {
        let trace = net.forward(data.input(i))?;
        let err = global_error(net, &trace, data.target(i))?;
        sum += err.beta * err.beta;
    }
    Ok(sum / data.len().max(1) as f64)
}

/// Sum of both output nodes' squared errors against their sign-masked
/// targets: `mean [(x_o+ - max(0, y))² + (x_o- - min(0, y))²]`.
pub fn test_error(net: &Network, data: &Dataset) -> Result<f64> {
    let (pos, neg) = net.check_regression_output()?;
    let out = net.output_layer();
    let mut sum = 0.0;
    for i in 0..data.len() {
        let trace = net.forward(data.input(i))?;
        let y = data.target(i);
        let xp = trace.activations[out][pos];
        let xn = trace.activations[out][neg];
        sum += (xp - y.max(0.0)).powi(2) + (xn - y.min(0.0)).powi(2);
    }
    Ok(sum / data.len().max(1) as f64)
}

/// Full-network error `mean ½ (x_o - y)²` over a list of examples.
pub fn batch_error(net: &Network, batch: &[(&[f64], f64)]) -> Result<f64> {
    let mut sum = 0.0;
    for &(x, y) in batch {
        let trace = net.forward(x)?;
        let err = global_error(net, &trace, y)?;
        sum += 0.5 * err.beta * err.beta;
    }
    Ok(sum / batch.len().max(1) as f64)
}

pub fn evaluate(net: &Network, train: &Dataset, test: &Dataset, probe_count: usize, epoch: usize) -> Result<MetricsRecord> {
    let train_error = train_error(net, train)?;
    let test_error = test_error(net, test)?;
    let nmse_train = train_error / train.target_stats().variance;
    let nmse_test = test_error / test.target_stats().variance;
    let n_probe = probe_count.min(test.len());
    let coherence = if n_probe > 0 && net.num_hidden() > 0 {
        coherence_probe(net, (0..n_probe).map(|i| test.input(i)))?.per_layer
    } else {
        vec![0.0; net.num_hidden()]
    };
    Ok(MetricsRecord {
        epoch,
        train_error,
        test_error,
        nmse_train,
        nmse_test,
        coherence,
        wall_ms: 0,
    })
}

/// Trains for `config.epochs` epochs and returns one record per epoch.
///
/// Each epoch visits the training set in a seeded permutation, in batches of
/// `config.batch_size`. Metrics are computed after the epoch's last batch.
pub fn train(net: &mut Network, train_set: &Dataset, test_set: &Dataset, config: &TrainConfig) -> Result<Vec<MetricsRecord>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if test_set.is_empty() {
        return Err(Error::Empty("test set"));
    }
    for d in [train_set, test_set] {
        if d.n_features() != net.layer_sizes()[0] {
            return Err(Error::Dimension {
                expected: net.layer_sizes()[0],
                actual: d.n_features(),
            });
        }
    }
    if train_set.target_stats().variance <= 0.0 || test_set.target_stats().variance <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    net.check_regression_output()?;
    if config.algorithm == Algorithm::Kickback {
        validate_rescale(net, &config.rescale)?;
    }
    let start = Instant::now();
    let mut records = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        for idx in batches(train_set.len(), config.batch_size, config.seed, epoch as u64) {
            let batch: Vec<(&[f64], f64)> = idx.iter().map(|&i| (train_set.input(i), train_set.target(i))).collect();
            train_batch(net, &batch, config)?;
        }
        let mut record = evaluate(net, train_set, test_set, config.probe_count, epoch)?;
        record.wall_ms = start.elapsed().as_millis() as u64;
        let finite = [record.train_error, record.test_error, record.nmse_train, record.nmse_test]
            .iter()
            .chain(&record.coherence)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("training metric"));
        }
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Topology, WeightMatrix};
    use RectifierSign::{Negative, Positive};

    #[test]
    fn rectilinear_loss_cases() {
        // <w, x> = 1.2
        let w = [1.0, 0.2];
        let x = [1.0, 1.0];
        assert!((rectilinear_loss(&w, &x, 2.0, Positive).unwrap() - 2.4).abs() < 1e-15);
        assert!((rectilinear_loss(&w, &x, 2.0, Negative).unwrap() + 2.4).abs() < 1e-15);
        let w = [-0.4, 0.0];
        assert_eq!(rectilinear_loss(&w, &x, 5.0, Positive).unwrap(), 0.0);
        assert!(matches!(
            rectilinear_loss(&[1.0], &x, 1.0, Positive),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn rectilinear_gradient_cases() {
        let g = rectilinear_gradient(&[1.0, 0.5], &[2.0, -1.0], 0.4, Positive).unwrap();
        assert!((g[0] - 0.8).abs() < 1e-15 && (g[1] + 0.4).abs() < 1e-15);
        let g = rectilinear_gradient(&[-1.0, 0.5], &[2.0, -1.0], 0.4, Positive).unwrap();
        assert_eq!(g, vec![0.0, -0.0]);
    }

    #[test]
    fn output_regression_cases() {
        // <w, x> = 1.0 for x = [1, 0]
        let d = output_regression_direction(&[1.0, 3.0], &[1.0, 0.0], 1.5, Positive).unwrap();
        assert_eq!(d, vec![0.5, 0.0]);
        let d = output_regression_direction(&[-1.0, 3.0], &[1.0, 0.0], 1.5, Positive).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        let d = output_regression_direction(&[1.0, 3.0], &[1.0, 0.0], 1.0, Positive).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        // negative node reading -1.0 regressed onto -1.5 moves its firing rate up
        let d = output_regression_direction(&[1.0, 3.0], &[1.0, 0.0], -1.5, Negative).unwrap();
        assert_eq!(d, vec![0.5, 0.0]);
    }

    #[test]
    fn projection_cases() {
        assert_eq!(project_l2(&[3.0, 4.0], 10.0), vec![3.0, 4.0]);
        assert_eq!(project_l2(&[3.0, 4.0], 5.0), vec![3.0, 4.0]);
        let p = project_l2(&[3.0, 4.0], 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn selectron_reward_identity() {
        // Reward(w, x, ν) = ν · P_w(x); with ν = -φ it equals -ℓ_RL(w, x, φ).
        let reward = |w: &[f64], x: &[f64], nu: f64| nu * dot(w, x).max(0.0);
        for (w, x, phi) in [
            ([0.3, -0.2], [1.0, 2.0], 0.7),
            ([0.3, 0.2], [1.0, 2.0], -1.3),
            ([1.0, 1.0], [-1.0, -2.0], 4.0),
        ] {
            let loss = rectilinear_loss(&w, &x, phi, Positive).unwrap();
            assert_eq!(reward(&w, &x, -phi), -loss);
        }
    }

    fn small_net(seed: u64) -> Network {
        Network::init(&Topology::alternating(&[3, 4, 4, 2], true), InitScheme::Signed, seed).unwrap()
    }

    #[test]
    fn empty_batch_rejected() {
        let mut net = small_net(0);
        assert!(matches!(
            train_batch(&mut net, &[], &TrainConfig::default()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn silent_hidden_layer_only_moves_outputs() {
        // no bias and negative inputs into all-positive weights: nothing hidden fires
        let topo = Topology::alternating(&[2, 3, 2], false);
        let mut net = Network::init(&topo, InitScheme::Signed, 1).unwrap();
        for alpha in 0..2 {
            for v in net.weights_mut(alpha).as_mut_slice() {
                *v = v.abs();
            }
        }
        let before = net.clone();
        let x = [-1.0, -2.0];
        let config = TrainConfig {
            rescale: vec![1.0],
            ..TrainConfig::default()
        };
        train_batch(&mut net, &[(&x, 1.0)], &config).unwrap();
        assert_eq!(net.weights(0), before.weights(0));
        // output layer sees zero activations without bias: nothing fires either
        assert_eq!(net.weights(1), before.weights(1));

        let topo = Topology::alternating(&[2, 3, 2], true);
        let mut net = Network::init(&topo, InitScheme::Signed, 1).unwrap();
        for v in net.weights_mut(0).as_mut_slice() {
            *v = v.abs();
        }
        // kill the hidden bias so the hidden layer stays silent
        net.weights_mut(0).row_mut(2).iter_mut().for_each(|v| *v = -1.0);
        let before = net.clone();
        train_batch(&mut net, &[(&x, 1.0)], &config).unwrap();
        assert_eq!(net.weights(0), before.weights(0));
        assert_ne!(net.weights(1), before.weights(1));
    }

    #[test]
    fn exact_predictions_leave_net_unchanged() {
        // a positive output reading exactly the target and a silent hidden chain
        let topo = Topology {
            layer_sizes: vec![1, 1, 2],
            signs: vec![vec![Positive], vec![Positive, Negative]],
            bias: false,
        };
        let weights = vec![
            WeightMatrix::from_vec(1, 1, vec![1.0]).unwrap(),
            WeightMatrix::from_vec(1, 2, vec![2.0, -1.0]).unwrap(),
        ];
        let mut net = Network::from_parts(topo, weights).unwrap();
        let before = net.clone();
        let x = [0.5];
        for algorithm in [Algorithm::Backprop, Algorithm::Kickback] {
            let config = TrainConfig {
                algorithm,
                rescale: vec![1.0],
                ..TrainConfig::default()
            };
            train_batch(&mut net, &[(&x, 1.0), (&x, 1.0)], &config).unwrap();
            assert_eq!(net, before);
        }
    }

    #[test]
    fn single_example_batch_is_one_local_step() {
        let mut net = small_net(3);
        let x = [0.9, -0.4, 1.3];
        let y = 0.7;
        let config = TrainConfig {
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let trace = net.forward(&x).unwrap();
        let err = global_error(&net, &trace, y).unwrap();
        let deltas = feedback(Algorithm::Backprop, &net, &trace, err, &config.rescale).unwrap();

        let mut expected = net.clone();
        for alpha in 0..net.num_layers() - 1 {
            let input = trace.layer_input(alpha, true);
            let m = net.weights(alpha);
            for k in 0..m.cols() {
                let w = m.column(k);
                let sign = net.signs(alpha + 1)[k];
                let step: Vec<f64> = if alpha + 1 == net.output_layer() {
                    if k != err.node {
                        continue;
                    }
                    output_regression_direction(&w, &input, y, sign).unwrap()
                } else {
                    let phi = deltas.values[alpha][k];
                    rectilinear_gradient(&w, &input, phi, sign)
                        .unwrap()
                        .into_iter()
                        .map(|g| -g)
                        .collect()
                };
                let updated: Vec<f64> = w.iter().zip(&step).map(|(w, s)| w + config.learning_rate * s).collect();
                expected.weights_mut(alpha).set_column(k, &updated);
            }
        }
        train_batch(&mut net, &[(&x, y)], &config).unwrap();
        for (a, b) in net.all_weights().iter().zip(expected.all_weights()) {
            for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((u - v).abs() < 1e-15, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let data = crate::data::synthetic_teacher(1, 3, &[4], 60, 10, 0.0).unwrap();
        let batch: Vec<(&[f64], f64)> = (0..20).map(|i| (data.train.input(i), data.train.target(i))).collect();
        let mut a = small_net(5);
        let mut b = a.clone();
        let seq = TrainConfig {
            algorithm: Algorithm::Kickback,
            rescale: vec![2.0, 1.0],
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let par = TrainConfig { parallel: true, ..seq.clone() };
        train_batch(&mut a, &batch, &seq).unwrap();
        train_batch(&mut b, &batch, &par).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn projection_keeps_weight_vectors_in_ball() {
        let data = crate::data::synthetic_teacher(2, 3, &[4], 40, 10, 0.1).unwrap();
        let batch: Vec<(&[f64], f64)> = (0..20).map(|i| (data.train.input(i), data.train.target(i))).collect();
        let mut net = small_net(6);
        let config = TrainConfig {
            learning_rate: 5.0,
            projection_radius: Some(0.5),
            ..TrainConfig::default()
        };
        train_batch(&mut net, &batch, &config).unwrap();
        for m in net.all_weights() {
            for k in 0..m.cols() {
                let c = m.column(k);
                assert!(dot(&c, &c).sqrt() <= 0.5);
            }
        }
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let data = crate::data::synthetic_teacher(4, 3, &[4], 40, 10, 0.1).unwrap();
        let mut net = small_net(7);
        let before = net.clone();
        let config = TrainConfig {
            epochs: 0,
            rescale: vec![1.0, 1.0],
            ..TrainConfig::default()
        };
        let records = train(&mut net, &data.train, &data.test, &config).unwrap();
        assert!(records.is_empty());
        assert_eq!(net, before);
    }

    #[test]
    fn training_is_deterministic() {
        let data = crate::data::synthetic_teacher(5, 3, &[4], 100, 30, 0.1).unwrap();
        let config = TrainConfig {
            algorithm: Algorithm::Kickback,
            epochs: 3,
            learning_rate: 0.01,
            rescale: vec![1.0, 1.0],
            ..TrainConfig::default()
        };
        let run = || {
            let mut net = small_net(8);
            train(&mut net, &data.train, &data.test, &config).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.len(), 3);
        assert!(a.iter().zip(&b).all(|(x, y)| x.same_values(y)));
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { rescale: vec![1.0, -1.0], ..TrainConfig::default() },
            TrainConfig { projection_radius: Some(0.0), ..TrainConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
