//! Brute-force references used by several test targets.

#![allow(dead_code)]

use kickback::{ActivationTrace, Network};

/// Total influence of every hidden node by listing each forward path to
/// `output` explicitly and summing the products of `w · 1` along it.
pub fn enumerate_pi(net: &Network, trace: &ActivationTrace, output: usize) -> Vec<Vec<f64>> {
    let out = net.output_layer();
    let mut pi = Vec::new();
    for layer in 1..out {
        let mut row = Vec::new();
        for j in 0..net.layer_sizes()[layer] {
            let mut total = 0.0;
            for path in paths_from(net, layer, j, output) {
                let mut product = 1.0;
                for step in path.windows(2) {
                    let (l, a) = step[0];
                    let (_, b) = step[1];
                    product *= net.weights(l).get(a, b) * f64::from(trace.firing_of(l + 1)[b]);
                }
                total += product;
            }
            row.push(total);
        }
        pi.push(row);
    }
    pi
}

/// Every node sequence `(layer, index)` from `(layer, j)` to `(out, output)`.
pub fn paths_from(net: &Network, layer: usize, j: usize, output: usize) -> Vec<Vec<(usize, usize)>> {
    let out = net.output_layer();
    let mut paths = vec![vec![(layer, j)]];
    for l in layer + 1..=out {
        let targets: Vec<usize> = if l == out { vec![output] } else { (0..net.layer_sizes()[l]).collect() };
        paths = paths
            .into_iter()
            .flat_map(|p| {
                targets.iter().map(move |&k| {
                    let mut q = p.clone();
                    q.push((l, k));
                    q
                })
            })
            .collect();
    }
    paths
}

/// Number of hidden-to-output paths ending at a single output node.
pub fn total_paths(sizes: &[usize]) -> usize {
    let hidden = &sizes[1..sizes.len() - 1];
    (0..hidden.len())
        .map(|h| hidden[h] * hidden[h + 1..].iter().product::<usize>())
        .sum()
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    p[i] += h;
    let up = f(&p);
    p[i] -= 2.0 * h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}
