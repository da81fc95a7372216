//! Shared fixtures for the engine benchmarks.

use kickback::data::synthetic_teacher;
use kickback::{InitScheme, Network, Topology};

/// A freshly initialized student and a batch drawn from a matching teacher.
pub struct Workload {
    pub net: Network,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Workload {
    pub fn new(n_features: usize, hidden: &[usize], batch: usize, seed: u64) -> Self {
        let data = synthetic_teacher(seed, n_features, hidden, batch, 1, 0.1).expect("valid teacher sizes");
        let mut sizes = vec![n_features];
        sizes.extend_from_slice(hidden);
        sizes.push(2);
        let net = Network::init(&Topology::alternating(&sizes, true), InitScheme::Signed, seed + 1)
            .expect("valid topology");
        Self {
            net,
            inputs: (0..batch).map(|i| data.train.input(i).to_vec()).collect(),
            targets: data.train.targets().to_vec(),
        }
    }

    pub fn batch(&self) -> Vec<(&[f64], f64)> {
        self.inputs.iter().map(Vec::as_slice).zip(self.targets.iter().copied()).collect()
    }
}
