//! Feedback signals for hidden nodes.
//!
//! The network's scalar output is the output node whose sign matches the
//! target (the positive node for `y >= 0`). Its error `β = x_o - y` seeds the
//! backward pass; the other output node is not part of the credit assignment
//! graph for that example.
//!
//! - Backprop: `δ_j = Σ_k w_jk 1_k δ_k`, recursively from the output.
//! - Influence: `τ_j = Σ_k w_jk 1_k` over the next layer.
//! - Total influence: `π_j`, the sum over all paths from `j` to the output of
//!   the products of `w 1` along the path, so that `δ_j = β π_j`.
//! - Kickback: `ε_j = κ_layer β τ_j`, Backprop truncated after one layer.
//!
//! All hidden-node quantities are indexed `[h][j]` with `h = 0` the first
//! hidden layer (network layer 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ActivationTrace, Network, RectifierSign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Backprop,
    Kickback,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Backprop => "backprop",
            Algorithm::Kickback => "kickback",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backprop" => Ok(Algorithm::Backprop),
            "kickback" => Ok(Algorithm::Kickback),
            _ => Err(Error::Config(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Global error `β = ∂E/∂x_o` together with the output node it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalError {
    pub beta: f64,
    pub node: usize,
}

/// Which output nodes terminate influence paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputScope {
    /// Both output nodes; used for coherence diagnostics without a target.
    All,
    /// A single output node, the scalar output used for credit assignment.
    Node(usize),
}

impl OutputScope {
    #[inline]
    fn contains(self, k: usize) -> bool {
        match self {
            OutputScope::All => true,
            OutputScope::Node(o) => o == k,
        }
    }
}

impl From<GlobalError> for OutputScope {
    fn from(err: GlobalError) -> Self {
        OutputScope::Node(err.node)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackField {
    pub beta: f64,
    /// Output node that carried `beta`.
    pub node: usize,
    /// `δ_j` or `ε_j`, indexed `[hidden layer][node]`.
    pub values: Vec<Vec<f64>>,
    pub algorithm: Algorithm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceField {
    pub tau: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
}

/// Index of the output node that regresses onto `target`.
pub fn routed_output(net: &Network, target: f64) -> Result<usize> {
    let (pos, neg) = net.check_regression_output()?;
    Ok(if target < 0.0 { neg } else { pos })
}

pub fn global_error(net: &Network, trace: &ActivationTrace, target: f64) -> Result<GlobalError> {
    if !target.is_finite() {
        return Err(Error::NonFinite("target"));
    }
    net.check_trace(trace)?;
    let node = routed_output(net, target)?;
    let x_o = trace.activations[net.output_layer()][node];
    Ok(GlobalError {
        beta: x_o - target,
        node,
    })
}

/// Exact Backprop error signals for every hidden node.
pub fn backprop_deltas(net: &Network, trace: &ActivationTrace, err: GlobalError) -> Result<FeedbackField> {
    net.check_trace(trace)?;
    let out = net.output_layer();
    if err.node >= net.layer_sizes()[out] {
        return Err(Error::TraceShape);
    }
    let mut downstream = vec![0.0; net.layer_sizes()[out]];
    downstream[err.node] = err.beta;
    let mut values = vec![Vec::new(); net.num_hidden()];
    for layer in (1..out).rev() {
        let m = net.weights(layer);
        let firing = trace.firing_of(layer + 1);
        let deltas: Vec<f64> = (0..net.layer_sizes()[layer])
            .map(|j| {
                let mut d = 0.0;
                for ((&w, &f), &dk) in m.row(j).iter().zip(firing).zip(&downstream) {
                    if f != 0 && dk != 0.0 {
                        d += w * f64::from(f) * dk;
                    }
                }
                d
            })
            .collect();
        values[layer - 1] = deltas.clone();
        downstream = deltas;
    }
    Ok(FeedbackField {
        beta: err.beta,
        node: err.node,
        values,
        algorithm: Algorithm::Backprop,
    })
}

/// `τ_j` for every hidden node. Bias rows are not nodes and never appear.
pub fn influence(net: &Network, trace: &ActivationTrace, scope: OutputScope) -> Result<Vec<Vec<f64>>> {
    net.check_trace(trace)?;
    let out = net.output_layer();
    let mut tau = Vec::with_capacity(net.num_hidden());
    for layer in 1..out {
        let m = net.weights(layer);
        let firing = trace.firing_of(layer + 1);
        let to_output = layer + 1 == out;
        let row: Vec<f64> = (0..net.layer_sizes()[layer])
            .map(|j| {
                let mut t = 0.0;
                for (k, (&w, &f)) in m.row(j).iter().zip(firing).enumerate() {
                    if f != 0 && (!to_output || scope.contains(k)) {
                        t += w * f64::from(f);
                    }
                }
                t
            })
            .collect();
        tau.push(row);
    }
    Ok(tau)
}

/// `π_j` by backward dynamic programming over layers.
pub fn total_influence(net: &Network, trace: &ActivationTrace, scope: OutputScope) -> Result<Vec<Vec<f64>>> {
    net.check_trace(trace)?;
    let out = net.output_layer();
    let mut downstream: Vec<f64> = (0..net.layer_sizes()[out])
        .map(|k| if scope.contains(k) { 1.0 } else { 0.0 })
        .collect();
    let mut pi = vec![Vec::new(); net.num_hidden()];
    for layer in (1..out).rev() {
        let m = net.weights(layer);
        let firing = trace.firing_of(layer + 1);
        let row: Vec<f64> = (0..net.layer_sizes()[layer])
            .map(|j| {
                let mut p = 0.0;
                for ((&w, &f), &pk) in m.row(j).iter().zip(firing).zip(&downstream) {
                    if f != 0 {
                        p += w * f64::from(f) * pk;
                    }
                }
                p
            })
            .collect();
        pi[layer - 1] = row.clone();
        downstream = row;
    }
    Ok(pi)
}

pub fn influence_field(net: &Network, trace: &ActivationTrace, scope: OutputScope) -> Result<InfluenceField> {
    Ok(InfluenceField {
        tau: influence(net, trace, scope)?,
        pi: total_influence(net, trace, scope)?,
    })
}

/// Checks one positive factor per hidden layer.
pub fn validate_rescale(net: &Network, rescale: &[f64]) -> Result<()> {
    if rescale.len() != net.num_hidden() {
        return Err(Error::RescaleLength {
            expected: net.num_hidden(),
            actual: rescale.len(),
        });
    }
    for (layer, &value) in rescale.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Rescale { layer, value });
        }
    }
    Ok(())
}

/// Truncated feedback `ε_j = κ_h · (β · τ_j)`.
pub fn kickback_feedback(
    net: &Network,
    trace: &ActivationTrace,
    err: GlobalError,
    rescale: &[f64],
) -> Result<FeedbackField> {
    validate_rescale(net, rescale)?;
    let tau = influence(net, trace, err.into())?;
    let values = tau
        .into_iter()
        .zip(rescale)
        .map(|(layer, &kappa)| layer.into_iter().map(|t| kappa * (err.beta * t)).collect())
        .collect();
    Ok(FeedbackField {
        beta: err.beta,
        node: err.node,
        values,
        algorithm: Algorithm::Kickback,
    })
}

pub fn feedback(
    algorithm: Algorithm,
    net: &Network,
    trace: &ActivationTrace,
    err: GlobalError,
    rescale: &[f64],
) -> Result<FeedbackField> {
    match algorithm {
        Algorithm::Backprop => backprop_deltas(net, trace, err),
        Algorithm::Kickback => kickback_feedback(net, trace, err, rescale),
    }
}

/// `max_j |δ_j - β π_j|` over all hidden nodes.
pub fn factorization_residual(net: &Network, trace: &ActivationTrace, err: GlobalError) -> Result<f64> {
    let deltas = backprop_deltas(net, trace, err)?;
    let pi = total_influence(net, trace, err.into())?;
    Ok(deltas
        .values
        .iter()
        .flatten()
        .zip(pi.iter().flatten())
        .map(|(d, p)| (d - err.beta * p).abs())
        .fold(0.0, f64::max))
}

/// Sign of the output node a target is routed to.
pub fn routed_sign(target: f64) -> RectifierSign {
    if target < 0.0 {
        RectifierSign::Negative
    } else {
        RectifierSign::Positive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{InitScheme, Topology, WeightMatrix};
    use RectifierSign::{Negative, Positive};

    /// input -> j (positive) -> k (positive) -> outputs (+, -); no bias.
    fn chain(w_jk: f64, w_ko: f64) -> Network {
        let topo = Topology {
            layer_sizes: vec![1, 1, 1, 2],
            signs: vec![vec![Positive], vec![Positive], vec![Positive, Negative]],
            bias: false,
        };
        let weights = vec![
            WeightMatrix::from_vec(1, 1, vec![1.0]).unwrap(),
            WeightMatrix::from_vec(1, 1, vec![w_jk]).unwrap(),
            WeightMatrix::from_vec(1, 2, vec![w_ko, -1.0]).unwrap(),
        ];
        Network::from_parts(topo, weights).unwrap()
    }

    /// input -> j (positive) -> outputs (+, -).
    fn one_hidden(w_jo: f64) -> Network {
        let topo = Topology {
            layer_sizes: vec![1, 1, 2],
            signs: vec![vec![Positive], vec![Positive, Negative]],
            bias: false,
        };
        let weights = vec![
            WeightMatrix::from_vec(1, 1, vec![1.0]).unwrap(),
            WeightMatrix::from_vec(1, 2, vec![w_jo, -1.0]).unwrap(),
        ];
        Network::from_parts(topo, weights).unwrap()
    }

    #[test]
    fn global_error_routes_by_target_sign() {
        let net = one_hidden(0.6);
        let trace = net.forward(&[1.0]).unwrap();
        // positive output reads 0.6
        let e = global_error(&net, &trace, 1.0).unwrap();
        assert_eq!(e.node, 0);
        assert!((e.beta - (-0.4)).abs() < 1e-15);
        // negative output: preactivation -1.0 * 1.0 = -1 < 0, so it reads 0
        let e = global_error(&net, &trace, -2.0).unwrap();
        assert_eq!(e.node, 1);
        assert_eq!(e.beta, 2.0);
        // zero target goes to the positive node
        assert_eq!(global_error(&net, &trace, 0.0).unwrap().node, 0);
        assert!(matches!(
            global_error(&net, &trace, f64::INFINITY),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn global_error_exact_prediction_on_negative_node() {
        let topo = Topology {
            layer_sizes: vec![1, 2],
            signs: vec![vec![Positive, Negative]],
            bias: false,
        };
        let net = Network::from_parts(topo, vec![WeightMatrix::from_vec(1, 2, vec![-1.0, 2.0]).unwrap()]).unwrap();
        let trace = net.forward(&[1.0]).unwrap();
        assert_eq!(trace.activations[1][1], -2.0);
        assert_eq!(global_error(&net, &trace, -2.0).unwrap().beta, 0.0);
        // positive node not firing, target 0.5
        assert_eq!(global_error(&net, &trace, 0.5).unwrap().beta, -0.5);
    }

    #[test]
    fn one_step_delta() {
        let net = one_hidden(2.0);
        let trace = net.forward(&[1.0]).unwrap();
        let err = GlobalError { beta: 0.5, node: 0 };
        let d = backprop_deltas(&net, &trace, err).unwrap();
        assert_eq!(d.values, vec![vec![1.0]]);
        let zero = backprop_deltas(&net, &trace, GlobalError { beta: 0.0, node: 0 }).unwrap();
        assert_eq!(zero.values, vec![vec![0.0]]);
    }

    #[test]
    fn silent_targets_give_zero_delta() {
        // negative weight into positive output: output never fires
        let net = one_hidden(-2.0);
        let trace = net.forward(&[1.0]).unwrap();
        let d = backprop_deltas(&net, &trace, GlobalError { beta: 0.7, node: 0 }).unwrap();
        assert_eq!(d.values[0][0], 0.0);
        let tau = influence(&net, &trace, OutputScope::All).unwrap();
        assert_eq!(tau[0][0], 0.0);
    }

    #[test]
    fn influence_hand_example() {
        // j and a helper node feed k1 (positive) and k2 (negative); both fire.
        let topo = Topology {
            layer_sizes: vec![2, 2, 2, 2],
            signs: vec![vec![Positive, Positive], vec![Positive, Negative], vec![Positive, Negative]],
            bias: false,
        };
        let weights = vec![
            WeightMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            WeightMatrix::from_vec(2, 2, vec![0.5, -0.3, 0.0, 1.0]).unwrap(),
            WeightMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
        ];
        let net = Network::from_parts(topo, weights).unwrap();
        let trace = net.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(trace.firing[1], vec![1, -1]);
        let tau = influence(&net, &trace, OutputScope::All).unwrap();
        assert!((tau[0][0] - 0.8).abs() < 1e-15);

        // nothing downstream fires
        let trace = net.forward(&[-1.0, -1.0]).unwrap();
        assert_eq!(influence(&net, &trace, OutputScope::All).unwrap()[0][0], 0.0);
    }

    #[test]
    fn total_influence_two_edge_path() {
        let net = chain(0.7, 2.0);
        let trace = net.forward(&[1.0]).unwrap();
        let pi = total_influence(&net, &trace, OutputScope::Node(0)).unwrap();
        assert!((pi[0][0] - 1.4).abs() < 1e-15);
        // base case: last hidden layer total influence equals its influence
        let tau = influence(&net, &trace, OutputScope::Node(0)).unwrap();
        assert_eq!(pi[1], tau[1]);
    }

    #[test]
    fn kickback_products() {
        let net = one_hidden(0.8);
        let trace = net.forward(&[1.0]).unwrap();
        let err = GlobalError { beta: 0.5, node: 0 };
        let e = kickback_feedback(&net, &trace, err, &[1.0]).unwrap();
        assert!((e.values[0][0] - 0.4).abs() < 1e-15);
        let e = kickback_feedback(&net, &trace, err, &[2.0]).unwrap();
        assert!((e.values[0][0] - 0.8).abs() < 1e-15);
        let e = kickback_feedback(&net, &trace, GlobalError { beta: 0.0, node: 0 }, &[1.0]).unwrap();
        assert_eq!(e.values[0][0], 0.0);
    }

    #[test]
    fn kickback_rejects_bad_rescale() {
        let net = chain(0.7, 2.0);
        let trace = net.forward(&[1.0]).unwrap();
        let err = GlobalError { beta: 0.5, node: 0 };
        assert!(matches!(
            kickback_feedback(&net, &trace, err, &[1.0]),
            Err(Error::RescaleLength { expected: 2, actual: 1 })
        ));
        assert!(matches!(
            kickback_feedback(&net, &trace, err, &[1.0, 0.0]),
            Err(Error::Rescale { layer: 1, .. })
        ));
    }

    #[test]
    fn factorization_chain_and_zero_beta() {
        let net = chain(0.5, 2.0);
        let trace = net.forward(&[1.0]).unwrap();
        let err = GlobalError { beta: 0.5, node: 0 };
        assert_eq!(factorization_residual(&net, &trace, err).unwrap(), 0.0);

        let topo = Topology::alternating(&[4, 6, 6, 2], true);
        let net = Network::init(&topo, InitScheme::Uniform, 5).unwrap();
        let trace = net.forward(&[0.3, -1.0, 0.8, 0.1]).unwrap();
        let err = GlobalError { beta: 0.0, node: 1 };
        assert_eq!(factorization_residual(&net, &trace, err).unwrap(), 0.0);
    }

    #[test]
    fn trace_shape_checked() {
        let net = chain(0.5, 2.0);
        let other = one_hidden(1.0);
        let trace = other.forward(&[1.0]).unwrap();
        assert!(matches!(
            backprop_deltas(&net, &trace, GlobalError { beta: 1.0, node: 0 }),
            Err(Error::TraceShape)
        ));
    }

    #[test]
    fn one_hidden_layer_truncation_is_exact() {
        let topo = Topology::alternating(&[3, 9, 2], true);
        for seed in 0..20 {
            let net = Network::init(&topo, InitScheme::Uniform, seed).unwrap();
            let trace = net.forward(&[0.5, -0.2, 1.1]).unwrap();
            let err = global_error(&net, &trace, 0.3 - seed as f64 * 0.05).unwrap();
            let d = backprop_deltas(&net, &trace, err).unwrap();
            let e = kickback_feedback(&net, &trace, err, &[1.0]).unwrap();
            for (a, b) in d.values[0].iter().zip(&e.values[0]) {
                assert_eq!(a, b);
            }
        }
    }
}
