//! Feedforward rectifier networks.
//!
//! Every non-input node is either a positive rectifier `P(a) = max(0, a)` or a
//! negative rectifier `N(a) = -max(0, a)`. A node fires when its preactivation
//! is strictly positive. The signed indicator of a node is the subgradient of
//! its rectifier: `+1` for a firing positive node, `-1` for a firing negative
//! node and `0` otherwise.
//!
//! Weights between layer `α` and `α + 1` are stored as a dense row-major matrix
//! with one row per source node and one column per target node. When biases are
//! enabled every layer's activation vector is extended with a constant `1`,
//! which adds one trailing row to each matrix.

use std::fmt::{self, Write as _};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT_TAG: &str = "kickback-network/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RectifierSign {
    Positive,
    Negative,
}

impl RectifierSign {
    /// `+1.0` for positive nodes, `-1.0` for negative nodes.
    #[inline]
    pub fn factor(self) -> f64 {
        match self {
            RectifierSign::Positive => 1.0,
            RectifierSign::Negative => -1.0,
        }
    }

    #[inline]
    pub fn output(self, a: f64) -> f64 {
        rectifier_output(self, a)
    }

    #[inline]
    pub fn subgradient(self, a: f64) -> i8 {
        rectifier_subgradient(self, a)
    }

    fn symbol(self) -> char {
        match self {
            RectifierSign::Positive => '+',
            RectifierSign::Negative => '-',
        }
    }
}

/// `P(a)` for positive nodes and `N(a)` for negative nodes.
#[inline]
pub fn rectifier_output(sign: RectifierSign, a: f64) -> f64 {
    if a > 0.0 {
        sign.factor() * a
    } else {
        0.0
    }
}

/// Signed firing indicator. The kink at `a = 0` counts as not firing.
#[inline]
pub fn rectifier_subgradient(sign: RectifierSign, a: f64) -> i8 {
    if a > 0.0 {
        match sign {
            RectifierSign::Positive => 1,
            RectifierSign::Negative => -1,
        }
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    /// Every weight drawn from `Uniform(-s, s)` with `s = 1/sqrt(fan_in)`.
    Uniform,
    /// Uniform draw followed by a sign flip so that every weight into a
    /// positive node is `>= 0` and every weight into a negative node is `<= 0`.
    Signed,
}

/// Location of a node: `layer` indexes the full network (0 is the input layer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub layer: usize,
    pub index: usize,
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "layer {} node {}", self.layer, self.index)
    }
}

/// Dense row-major matrix: `rows` source nodes by `cols` target nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, source: usize, target: usize) -> f64 {
        self.data[source * self.cols + target]
    }

    #[inline]
    pub fn set(&mut self, source: usize, target: usize, value: f64) {
        self.data[source * self.cols + target] = value;
    }

    #[inline]
    pub fn get_mut(&mut self, source: usize, target: usize) -> &mut f64 {
        &mut self.data[source * self.cols + target]
    }

    /// Outgoing weights of one source node.
    #[inline]
    pub fn row(&self, source: usize) -> &[f64] {
        &self.data[source * self.cols..(source + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, source: usize) -> &mut [f64] {
        &mut self.data[source * self.cols..(source + 1) * self.cols]
    }

    /// Incoming weight vector of one target node.
    pub fn column(&self, target: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, target)).collect()
    }

    pub fn set_column(&mut self, target: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (r, &v) in values.iter().enumerate() {
            self.set(r, target, v);
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Layer sizes, node signs and bias flag: everything but the weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub layer_sizes: Vec<usize>,
    /// One entry per non-input layer.
    pub signs: Vec<Vec<RectifierSign>>,
    pub bias: bool,
}

impl Topology {
    /// Signs alternate `+ - + - ...` within every non-input layer.
    pub fn alternating(layer_sizes: &[usize], bias: bool) -> Self {
        let signs = layer_sizes
            .iter()
            .skip(1)
            .map(|&n| alternating_signs(n))
            .collect();
        Self {
            layer_sizes: layer_sizes.to_vec(),
            signs,
            bias,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::TooFewLayers(self.layer_sizes.len()));
        }
        if let Some(layer) = self.layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::ZeroSizeLayer { layer });
        }
        if self.signs.len() != self.layer_sizes.len() - 1 {
            return Err(Error::SignPattern {
                layer: self.signs.len().min(self.layer_sizes.len() - 1) + 1,
                expected: self.layer_sizes.len() - 1,
                actual: self.signs.len(),
            });
        }
        for (i, layer_signs) in self.signs.iter().enumerate() {
            let expected = self.layer_sizes[i + 1];
            if layer_signs.len() != expected {
                return Err(Error::SignPattern {
                    layer: i + 1,
                    expected,
                    actual: layer_signs.len(),
                });
            }
        }
        Ok(())
    }
}

pub fn alternating_signs(n: usize) -> Vec<RectifierSign> {
    (0..n)
        .map(|i| {
            if i % 2 == 0 {
                RectifierSign::Positive
            } else {
                RectifierSign::Negative
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    signs: Vec<Vec<RectifierSign>>,
    weights: Vec<WeightMatrix>,
    bias: bool,
}

/// Per-layer quantities recorded by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    /// `a_j = <w_j, x>`, one vector per non-input layer.
    pub preactivations: Vec<Vec<f64>>,
    /// `x_j = S(a_j)`, one vector per layer; entry 0 is the raw input.
    pub activations: Vec<Vec<f64>>,
    /// Signed indicators in `{-1, 0, 1}`, one vector per non-input layer.
    pub firing: Vec<Vec<i8>>,
}

impl ActivationTrace {
    /// Activation vector of `layer` as seen by the next layer, including the
    /// constant bias unit when `bias` is set.
    pub fn layer_input(&self, layer: usize, bias: bool) -> Vec<f64> {
        let mut x = self.activations[layer].clone();
        if bias {
            x.push(1.0);
        }
        x
    }

    /// Firing indicators of network layer `layer` (which must be `>= 1`).
    #[inline]
    pub fn firing_of(&self, layer: usize) -> &[i8] {
        &self.firing[layer - 1]
    }
}

impl Network {
    pub fn init(topology: &Topology, scheme: InitScheme, seed: u64) -> Result<Self> {
        topology.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let extra = usize::from(topology.bias);
        let mut weights = Vec::with_capacity(topology.layer_sizes.len() - 1);
        for (alpha, pair) in topology.layer_sizes.windows(2).enumerate() {
            let rows = pair[0] + extra;
            let cols = pair[1];
            let scale = 1.0 / (rows as f64).sqrt();
            let dist = Uniform::new_inclusive(-scale, scale).expect("finite positive scale");
            let mut m = WeightMatrix::zeros(rows, cols);
            for w in m.as_mut_slice() {
                *w = dist.sample(&mut rng);
            }
            if scheme == InitScheme::Signed {
                conform_signs(&mut m, &topology.signs[alpha]);
            }
            weights.push(m);
        }
        Ok(Self {
            layer_sizes: topology.layer_sizes.clone(),
            signs: topology.signs.clone(),
            weights,
            bias: topology.bias,
        })
    }

    /// Builds a network from explicit weights, checking every shape invariant.
    pub fn from_parts(topology: Topology, weights: Vec<WeightMatrix>) -> Result<Self> {
        topology.validate()?;
        let extra = usize::from(topology.bias);
        if weights.len() != topology.layer_sizes.len() - 1 {
            return Err(Error::Dimension {
                expected: topology.layer_sizes.len() - 1,
                actual: weights.len(),
            });
        }
        for (alpha, m) in weights.iter().enumerate() {
            let rows = topology.layer_sizes[alpha] + extra;
            let cols = topology.layer_sizes[alpha + 1];
            if m.rows() != rows {
                return Err(Error::Dimension {
                    expected: rows,
                    actual: m.rows(),
                });
            }
            if m.cols() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    actual: m.cols(),
                });
            }
            if m.as_slice().iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFinite("weight"));
            }
        }
        Ok(Self {
            layer_sizes: topology.layer_sizes,
            signs: topology.signs,
            weights,
            bias: topology.bias,
        })
    }

    pub fn topology(&self) -> Topology {
        Topology {
            layer_sizes: self.layer_sizes.clone(),
            signs: self.signs.clone(),
            bias: self.bias,
        }
    }

    #[inline]
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    #[inline]
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    /// Number of hidden layers (all layers strictly between input and output).
    #[inline]
    pub fn num_hidden(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    #[inline]
    pub fn output_layer(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    #[inline]
    pub fn bias_enabled(&self) -> bool {
        self.bias
    }

    /// Signs of network layer `layer` (`>= 1`).
    #[inline]
    pub fn signs(&self, layer: usize) -> &[RectifierSign] {
        &self.signs[layer - 1]
    }

    #[inline]
    pub fn sign(&self, node: NodeId) -> RectifierSign {
        self.signs[node.layer - 1][node.index]
    }

    /// Matrix from layer `alpha` to layer `alpha + 1`.
    #[inline]
    pub fn weights(&self, alpha: usize) -> &WeightMatrix {
        &self.weights[alpha]
    }

    #[inline]
    pub fn weights_mut(&mut self, alpha: usize) -> &mut WeightMatrix {
        &mut self.weights[alpha]
    }

    pub fn all_weights(&self) -> &[WeightMatrix] {
        &self.weights
    }

    pub fn num_weights(&self) -> usize {
        self.weights.iter().map(|m| m.as_slice().len()).sum()
    }

    /// Index of the output node with the given sign, if the output layer has one.
    pub fn output_node(&self, sign: RectifierSign) -> Option<usize> {
        self.signs.last()?.iter().position(|&s| s == sign)
    }

    /// Checks for the two-node output layer with one node of each sign.
    pub fn check_regression_output(&self) -> Result<(usize, usize)> {
        let out = self.signs.last().ok_or(Error::OutputLayer)?;
        if out.len() != 2 {
            return Err(Error::OutputLayer);
        }
        match (
            self.output_node(RectifierSign::Positive),
            self.output_node(RectifierSign::Negative),
        ) {
            (Some(p), Some(n)) => Ok((p, n)),
            _ => Err(Error::OutputLayer),
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<ActivationTrace> {
        if input.len() != self.layer_sizes[0] {
            return Err(Error::Dimension {
                expected: self.layer_sizes[0],
                actual: input.len(),
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input"));
        }
        let n_layers = self.layer_sizes.len();
        let mut preactivations = Vec::with_capacity(n_layers - 1);
        let mut activations = Vec::with_capacity(n_layers);
        let mut firing = Vec::with_capacity(n_layers - 1);
        activations.push(input.to_vec());
        for (alpha, m) in self.weights.iter().enumerate() {
            let x = &activations[alpha];
            let mut a = vec![0.0; m.cols()];
            for (j, &xj) in x.iter().enumerate() {
                if xj != 0.0 {
                    axpy(xj, m.row(j), &mut a);
                }
            }
            if self.bias {
                axpy(1.0, m.row(x.len()), &mut a);
            }
            let signs = &self.signs[alpha];
            let out: Vec<f64> = a
                .iter()
                .zip(signs)
                .map(|(&ak, &s)| rectifier_output(s, ak))
                .collect();
            let ind: Vec<i8> = a
                .iter()
                .zip(signs)
                .map(|(&ak, &s)| rectifier_subgradient(s, ak))
                .collect();
            preactivations.push(a);
            activations.push(out);
            firing.push(ind);
        }
        Ok(ActivationTrace {
            preactivations,
            activations,
            firing,
        })
    }

    /// Signed scalar readout `x_o+ + x_o-` of the two-node output layer.
    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        self.check_regression_output()?;
        let trace = self.forward(input)?;
        Ok(readout(&trace))
    }

    /// Checks that `trace` has the per-layer shapes this network produces.
    pub fn check_trace(&self, trace: &ActivationTrace) -> Result<()> {
        let n = self.layer_sizes.len();
        if trace.activations.len() != n
            || trace.preactivations.len() != n - 1
            || trace.firing.len() != n - 1
        {
            return Err(Error::TraceShape);
        }
        for (l, &size) in self.layer_sizes.iter().enumerate() {
            if trace.activations[l].len() != size {
                return Err(Error::TraceShape);
            }
            if l > 0 && (trace.preactivations[l - 1].len() != size || trace.firing[l - 1].len() != size) {
                return Err(Error::TraceShape);
            }
        }
        Ok(())
    }

    /// Writes the versioned text format: one header line, then one line per
    /// matrix row (all matrices in layer order).
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let sizes = join(self.layer_sizes.iter());
        let signs: Vec<String> = self
            .signs
            .iter()
            .map(|layer| layer.iter().map(|s| s.symbol()).collect())
            .collect();
        writeln!(
            out,
            "{FORMAT_TAG} bias={} sizes={} signs={}",
            u8::from(self.bias),
            sizes,
            signs.join(",")
        )?;
        for m in &self.weights {
            for r in 0..m.rows() {
                let mut line = String::new();
                for (k, w) in m.row(r).iter().enumerate() {
                    if k > 0 {
                        line.push(' ');
                    }
                    // `{:e}` prints the shortest representation that round-trips.
                    write!(line, "{w:e}").expect("writing to a String");
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let format_err = |line: usize, message: String| Error::NetworkFormat { line, message };
        let (_, header) = lines
            .next()
            .ok_or_else(|| format_err(1, "missing header".into()))?;
        let header = header.map_err(|e| format_err(1, e.to_string()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(FORMAT_TAG) {
            return Err(format_err(1, format!("expected `{FORMAT_TAG}` tag")));
        }
        let mut bias = None;
        let mut sizes = None;
        let mut signs = None;
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format_err(1, format!("bad header field `{part}`")))?;
            match key {
                "bias" => {
                    bias = Some(match value {
                        "0" => false,
                        "1" => true,
                        _ => return Err(format_err(1, format!("bad bias flag `{value}`"))),
                    })
                }
                "sizes" => {
                    let parsed: std::result::Result<Vec<usize>, _> =
                        value.split(',').map(str::parse).collect();
                    sizes = Some(parsed.map_err(|e| format_err(1, format!("bad sizes: {e}")))?);
                }
                "signs" => {
                    let mut layers = Vec::new();
                    for chunk in value.split(',') {
                        let layer: Option<Vec<RectifierSign>> = chunk
                            .chars()
                            .map(|c| match c {
                                '+' => Some(RectifierSign::Positive),
                                '-' => Some(RectifierSign::Negative),
                                _ => None,
                            })
                            .collect();
                        layers.push(layer.ok_or_else(|| format_err(1, format!("bad signs `{chunk}`")))?);
                    }
                    signs = Some(layers);
                }
                _ => return Err(format_err(1, format!("unknown header field `{key}`"))),
            }
        }
        let topology = Topology {
            layer_sizes: sizes.ok_or_else(|| format_err(1, "missing sizes".into()))?,
            signs: signs.ok_or_else(|| format_err(1, "missing signs".into()))?,
            bias: bias.ok_or_else(|| format_err(1, "missing bias".into()))?,
        };
        topology.validate()?;
        let extra = usize::from(topology.bias);
        let mut weights = Vec::with_capacity(topology.layer_sizes.len() - 1);
        for pair in topology.layer_sizes.windows(2) {
            let (rows, cols) = (pair[0] + extra, pair[1]);
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (idx, line) = lines
                    .next()
                    .ok_or_else(|| format_err(0, "unexpected end of file".into()))?;
                let line = line.map_err(|e| format_err(idx + 1, e.to_string()))?;
                let before = data.len();
                for tok in line.split_whitespace() {
                    let w: f64 = tok
                        .parse()
                        .map_err(|_| format_err(idx + 1, format!("bad weight `{tok}`")))?;
                    data.push(w);
                }
                if data.len() - before != cols {
                    return Err(format_err(
                        idx + 1,
                        format!("expected {cols} weights, found {}", data.len() - before),
                    ));
                }
            }
            weights.push(WeightMatrix::from_vec(rows, cols, data)?);
        }
        if let Some((idx, line)) = lines.next() {
            let line = line.map_err(|e| format_err(idx + 1, e.to_string()))?;
            if !line.trim().is_empty() {
                return Err(format_err(idx + 1, "trailing data".into()));
            }
        }
        Network::from_parts(topology, weights)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_text(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(std::io::BufReader::new(file))
    }
}

/// Sum of the output layer's activations.
pub fn readout(trace: &ActivationTrace) -> f64 {
    trace.activations.last().map_or(0.0, |out| out.iter().sum())
}

/// Replaces every weight by its magnitude carrying the target node's sign.
pub(crate) fn conform_signs(m: &mut WeightMatrix, target_signs: &[RectifierSign]) {
    for r in 0..m.rows() {
        for (w, s) in m.row_mut(r).iter_mut().zip(target_signs) {
            *w = s.factor() * w.abs();
        }
    }
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn join<T: fmt::Display>(items: impl Iterator<Item = T>) -> String {
    items.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
