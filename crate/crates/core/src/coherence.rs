//! Coherence diagnostics.
//!
//! A hidden node is coherent on an input when its influence on the next layer
//! is strictly positive. Layer coherence `Σ τ_j / Σ |τ_j|` lies in `[-1, 1]`;
//! a layer with no downstream firing at all reports 0.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::{influence, OutputScope};
use crate::network::{conform_signs, ActivationTrace, Network, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    /// Mean layer coherence per hidden layer.
    pub per_layer: Vec<f64>,
    /// Mean `τ_j` per hidden node.
    pub per_node_tau: Vec<Vec<f64>>,
    /// Mean fraction of hidden nodes with `τ_j > 0`.
    pub fraction_coherent: f64,
    pub n_probe: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherenceCheck {
    pub coherent: bool,
    pub violations: Vec<NodeId>,
}

pub fn coherence_of(tau: &[f64]) -> f64 {
    let num: f64 = tau.iter().sum();
    let den: f64 = tau.iter().map(|t| t.abs()).sum();
    if den > 0.0 {
        (num / den).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Coherence of network layer `layer`, which must be hidden.
pub fn layer_coherence(net: &Network, trace: &ActivationTrace, layer: usize, scope: OutputScope) -> Result<f64> {
    if layer == 0 || layer >= net.output_layer() {
        return Err(Error::NotHidden(layer));
    }
    let tau = influence(net, trace, scope)?;
    Ok(coherence_of(&tau[layer - 1]))
}

pub fn is_coherent(net: &Network, trace: &ActivationTrace, scope: OutputScope) -> Result<CoherenceCheck> {
    let tau = influence(net, trace, scope)?;
    let violations: Vec<NodeId> = tau
        .iter()
        .enumerate()
        .flat_map(|(h, layer)| {
            layer
                .iter()
                .enumerate()
                .filter(|(_, &t)| t <= 0.0)
                .map(move |(index, _)| NodeId { layer: h + 1, index })
        })
        .collect();
    Ok(CoherenceCheck {
        coherent: violations.is_empty(),
        violations,
    })
}

/// Forces every weight into a positive node to be `>= 0` and every weight into
/// a negative node to be `<= 0`. Idempotent.
pub fn enforce_signs(net: &mut Network) {
    for alpha in 0..net.num_layers() - 1 {
        let signs = net.signs(alpha + 1).to_vec();
        conform_signs(net.weights_mut(alpha), &signs);
    }
}

/// Averages coherence over probe inputs, with paths ending at either output.
pub fn coherence_probe<'a, I>(net: &Network, probes: I) -> Result<CoherenceReport>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let hidden = net.num_hidden();
    let mut per_layer = vec![0.0; hidden];
    let mut per_node_tau: Vec<Vec<f64>> = (1..=hidden).map(|l| vec![0.0; net.layer_sizes()[l]]).collect();
    let mut coherent_fraction = 0.0;
    let mut n_probe = 0usize;
    let n_hidden_nodes: usize = net.layer_sizes()[1..=hidden].iter().sum();
    for input in probes {
        let trace = net.forward(input)?;
        let tau = influence(net, &trace, OutputScope::All)?;
        let mut positive = 0usize;
        for (h, layer) in tau.iter().enumerate() {
            per_layer[h] += coherence_of(layer);
            for (acc, &t) in per_node_tau[h].iter_mut().zip(layer) {
                *acc += t;
                positive += usize::from(t > 0.0);
            }
        }
        if n_hidden_nodes > 0 {
            coherent_fraction += positive as f64 / n_hidden_nodes as f64;
        }
        n_probe += 1;
    }
    if n_probe == 0 {
        return Err(Error::Empty("probe set"));
    }
    let scale = 1.0 / n_probe as f64;
    per_layer.iter_mut().for_each(|v| *v *= scale);
    per_node_tau.iter_mut().flatten().for_each(|v| *v *= scale);
    Ok(CoherenceReport {
        per_layer,
        per_node_tau,
        fraction_coherent: coherent_fraction * scale,
        n_probe,
    })
}
