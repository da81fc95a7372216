//! Online learning for a single rectifier node.
//!
//! The node sees `(x_t, φ_t)` pairs. When it fires it pays the rectilinear
//! loss `φ_t S_w(x_t)` and takes a projected gradient step onto the ℓ2 ball;
//! otherwise nothing happens. Step sizes are indexed by the number of firing
//! steps so far, which makes the trajectory independent of silent steps.
//!
//! Regret per firing step against a fixed comparator in the ball is checked
//! against `sqrt(8 D E / |F|)` where `D = max_F ||φ x||²` and
//! `E = R² - ||w_1||²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{dot, RectifierSign};
use crate::training::project_l2_in_place;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSchedule {
    Constant(f64),
    /// `η_t = c / sqrt(t)`, `t` counting firing steps from 1.
    InverseSqrt(f64),
}

impl StepSchedule {
    #[inline]
    pub fn eta(self, firing_step: usize) -> f64 {
        match self {
            StepSchedule::Constant(eta) => eta,
            StepSchedule::InverseSqrt(c) => c / (firing_step as f64).sqrt(),
        }
    }

    /// Scale `sqrt(E / D)` for the inverse-square-root schedule.
    pub fn inverse_sqrt_for(d: f64, e_cap: f64) -> Self {
        if d > 0.0 && e_cap > 0.0 {
            StepSchedule::InverseSqrt((e_cap / d).sqrt())
        } else {
            StepSchedule::InverseSqrt(1.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretExperiment {
    pub sequence: Vec<(Vec<f64>, f64)>,
    pub radius: f64,
    pub w_init: Vec<f64>,
    pub step_schedule: StepSchedule,
    pub sign: RectifierSign,
}

/// Outcome of one online run. Bound-related fields are `None` when the node
/// never fired.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretTrace {
    /// Time indices (0-based) at which the node fired.
    pub firing_steps: Vec<usize>,
    /// `(x_t, φ_t)` for the firing steps, in order.
    #[serde(skip)]
    pub firing_set: Vec<(Vec<f64>, f64)>,
    pub cumulative_loss: f64,
    /// Linear best-in-hindsight loss over the firing steps.
    pub comparator_loss: f64,
    pub regret_per_firing: Option<f64>,
    pub bound: Option<f64>,
    pub d: f64,
    pub e_cap: f64,
    pub final_weights: Vec<f64>,
    /// Largest `||w_t||` seen, including the final iterate.
    pub max_norm: f64,
}

/// Projected online gradient descent on the rectilinear loss.
#[derive(Debug, Clone)]
pub struct OnlineNode {
    w: Vec<f64>,
    radius: f64,
    sign: RectifierSign,
    schedule: StepSchedule,
    fired: usize,
    cumulative_loss: f64,
    max_norm: f64,
}

impl OnlineNode {
    pub fn new(w_init: Vec<f64>, radius: f64, sign: RectifierSign, schedule: StepSchedule) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("radius must be > 0, got {radius}")));
        }
        if w_init.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial weight"));
        }
        let norm = dot(&w_init, &w_init).sqrt();
        if norm > radius {
            return Err(Error::Config(format!("initial weights have norm {norm} > radius {radius}")));
        }
        Ok(Self {
            w: w_init,
            radius,
            sign,
            schedule,
            fired: 0,
            cumulative_loss: 0.0,
            max_norm: norm,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Processes one pair; returns the loss paid if the node fired.
    pub fn step(&mut self, x: &[f64], phi: f64) -> Result<Option<f64>> {
        if x.len() != self.w.len() {
            return Err(Error::Dimension {
                expected: self.w.len(),
                actual: x.len(),
            });
        }
        if !phi.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("online input"));
        }
        let a = dot(&self.w, x);
        if a <= 0.0 {
            return Ok(None);
        }
        let s = self.sign.factor();
        let loss = phi * s * a;
        self.fired += 1;
        self.cumulative_loss += loss;
        let eta = self.schedule.eta(self.fired);
        for (wi, xi) in self.w.iter_mut().zip(x) {
            *wi -= eta * phi * s * xi;
        }
        project_l2_in_place(&mut self.w, self.radius);
        self.max_norm = self.max_norm.max(dot(&self.w, &self.w).sqrt());
        Ok(Some(loss))
    }
}

/// Runs a fixed sequence.
pub fn run_online_node(exp: &RegretExperiment) -> Result<RegretTrace> {
    if exp.sequence.is_empty() {
        return Err(Error::Empty("sequence"));
    }
    let mut iter = exp.sequence.iter();
    run_adaptive(
        &exp.w_init,
        exp.radius,
        exp.sign,
        exp.step_schedule,
        exp.sequence.len(),
        |_, _| {
            let (x, phi) = iter.next().expect("length checked");
            (x.clone(), *phi)
        },
    )
}

/// Runs `steps` rounds where `next(t, w_t)` picks `(x_t, φ_t)`, possibly
/// looking at the current weights.
pub fn run_adaptive<F>(
    w_init: &[f64],
    radius: f64,
    sign: RectifierSign,
    schedule: StepSchedule,
    steps: usize,
    mut next: F,
) -> Result<RegretTrace>
where
    F: FnMut(usize, &[f64]) -> (Vec<f64>, f64),
{
    let mut node = OnlineNode::new(w_init.to_vec(), radius, sign, schedule)?;
    let mut firing_steps = Vec::new();
    let mut firing_set = Vec::new();
    for t in 0..steps {
        let (x, phi) = next(t, node.weights());
        if node.step(&x, phi)?.is_some() {
            firing_steps.push(t);
            firing_set.push((x, phi));
        }
    }
    let d = firing_set
        .iter()
        .map(|(x, phi)| phi * phi * dot(x, x))
        .fold(0.0, f64::max);
    let e_cap = radius * radius - dot(w_init, w_init);
    let (comparator_loss, regret_per_firing, bound) = if firing_set.is_empty() {
        (0.0, None, None)
    } else {
        let (_, comp) = best_in_hindsight_linear(&firing_set, sign, radius)?;
        let f = firing_set.len() as f64;
        (
            comp,
            Some((node.cumulative_loss - comp) / f),
            Some(regret_bound(d, e_cap, firing_set.len())?),
        )
    };
    Ok(RegretTrace {
        firing_steps,
        firing_set,
        cumulative_loss: node.cumulative_loss,
        comparator_loss,
        regret_per_firing,
        bound,
        d,
        e_cap,
        final_weights: node.w.clone(),
        max_norm: node.max_norm,
    })
}

/// Minimizer of `Σ_F <w, s φ_t x_t>` over the ball: `w* = -R g / ||g||`.
pub fn best_in_hindsight_linear(
    firing_set: &[(Vec<f64>, f64)],
    sign: RectifierSign,
    radius: f64,
) -> Result<(Vec<f64>, f64)> {
    let first = firing_set.first().ok_or(Error::EmptyFiringSet)?;
    let mut g = vec![0.0; first.0.len()];
    let s = sign.factor();
    for (x, phi) in firing_set {
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += s * phi * xi;
        }
    }
    let norm = dot(&g, &g).sqrt();
    if norm == 0.0 {
        return Ok((vec![0.0; g.len()], 0.0));
    }
    let w = g.iter().map(|gi| -radius * gi / norm).collect();
    Ok((w, -radius * norm))
}

/// Total rectilinear loss of a fixed weight vector over a firing set.
pub fn rectilinear_total(w: &[f64], firing_set: &[(Vec<f64>, f64)], sign: RectifierSign) -> f64 {
    firing_set
        .iter()
        .map(|(x, phi)| phi * sign.output(dot(w, x)))
        .sum()
}

pub const MAX_GRID_DIM: usize = 4;

/// Brute-force comparator for the (non-convex) rectilinear loss: the best
/// point of a regular grid with `resolution` points per axis on `[-R, R]^d`,
/// restricted to the ball. The origin is always a candidate.
pub fn best_in_hindsight_rectilinear(
    firing_set: &[(Vec<f64>, f64)],
    sign: RectifierSign,
    radius: f64,
    resolution: usize,
) -> Result<(Vec<f64>, f64)> {
    let first = firing_set.first().ok_or(Error::EmptyFiringSet)?;
    let dim = first.0.len();
    if dim > MAX_GRID_DIM {
        return Err(Error::GridDimension {
            max: MAX_GRID_DIM,
            actual: dim,
        });
    }
    if resolution < 10 {
        return Err(Error::Config(format!("grid resolution must be >= 10, got {resolution}")));
    }
    let step = 2.0 * radius / (resolution - 1) as f64;
    let mut best_w = vec![0.0; dim];
    let mut best = 0.0;
    let mut idx = vec![0usize; dim];
    let mut w = vec![0.0; dim];
    let r2 = radius * radius;
    loop {
        for (wi, &i) in w.iter_mut().zip(&idx) {
            *wi = -radius + step * i as f64;
        }
        if dot(&w, &w) <= r2 {
            let loss = rectilinear_total(&w, firing_set, sign);
            if loss < best {
                best = loss;
                best_w.copy_from_slice(&w);
            }
        }
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == dim {
                return Ok((best_w, best));
            }
            idx[axis] += 1;
            if idx[axis] < resolution {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// `sqrt(8 D E / |F|)`.
pub fn regret_bound(d: f64, e_cap: f64, f_count: usize) -> Result<f64> {
    if f_count == 0 {
        return Err(Error::EmptyFiringSet);
    }
    if d < 0.0 || e_cap < 0.0 {
        return Err(Error::Config("D and E must be non-negative".into()));
    }
    Ok((8.0 * d * e_cap / f_count as f64).sqrt())
}

/// How `φ_t` is chosen in generated runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adversary {
    /// `φ ~ N(0, 1)`, independent of everything.
    Gaussian,
    /// `φ = ±1` with equal probability.
    RandomSign,
    /// `φ = sign(x_0)`: a fixed linear target the node can learn.
    Linear,
    /// `φ = sign(<w_t, x_t>)`: charges every firing step.
    SignOfActivation,
    /// `φ = -sign(<w_t, x_t>)`: rewards every firing step.
    AntiSign,
    /// Inputs chosen so the node never fires.
    NeverFire,
}

impl Adversary {
    pub const ALL: [Adversary; 6] = [
        Adversary::Gaussian,
        Adversary::RandomSign,
        Adversary::Linear,
        Adversary::SignOfActivation,
        Adversary::AntiSign,
        Adversary::NeverFire,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Adversary::Gaussian => "gaussian",
            Adversary::RandomSign => "random-sign",
            Adversary::Linear => "linear",
            Adversary::SignOfActivation => "sign",
            Adversary::AntiSign => "anti-sign",
            Adversary::NeverFire => "never-fire",
        }
    }
}

impl std::str::FromStr for Adversary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Adversary::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown adversary `{s}`")))
    }
}

/// Parameters of one generated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretScenario {
    pub dim: usize,
    pub steps: usize,
    pub radius: f64,
    /// `||w_1|| / R`, in `(0, 1]`.
    pub init_fraction: f64,
    pub sign: RectifierSign,
    pub adversary: Adversary,
    /// `None` uses the inverse-square-root schedule scaled by `sqrt(E / D)`.
    pub constant_eta: Option<f64>,
    pub seed: u64,
}

impl RegretScenario {
    pub fn new(dim: usize, steps: usize, adversary: Adversary, seed: u64) -> Self {
        Self {
            dim,
            steps,
            radius: 1.0,
            init_fraction: 0.25,
            sign: RectifierSign::Positive,
            adversary,
            constant_eta: None,
            seed,
        }
    }

    /// Generates the inputs, picks the schedule and runs the node.
    pub fn run(&self) -> Result<RegretTrace> {
        if self.dim == 0 || self.steps == 0 {
            return Err(Error::Config("dim and steps must be >= 1".into()));
        }
        if !(self.init_fraction > 0.0 && self.init_fraction <= 1.0) {
            return Err(Error::Config("init_fraction must lie in (0, 1]".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut w_init: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = dot(&w_init, &w_init).sqrt().max(f64::MIN_POSITIVE);
        let scale = self.init_fraction * self.radius / n;
        w_init.iter_mut().for_each(|v| *v *= scale);
        project_l2_in_place(&mut w_init, self.radius);

        let inputs: Vec<Vec<f64>> = (0..self.steps)
            .map(|_| {
                let x: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                if self.adversary == Adversary::NeverFire {
                    // reflect onto the half-space where <w_1, x> <= 0; the node
                    // never moves, so it never fires
                    let a = dot(&w_init, &x);
                    if a > 0.0 {
                        return x.iter().map(|v| -v).collect();
                    }
                }
                x
            })
            .collect();
        let phis: Vec<f64> = (0..self.steps)
            .map(|_| match self.adversary {
                Adversary::Gaussian => StandardNormal.sample(&mut rng),
                Adversary::RandomSign => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
                _ => 1.0,
            })
            .collect();
        // adaptive adversaries use φ = ±1, so only the inputs matter
        let d_prior = inputs
            .iter()
            .zip(&phis)
            .map(|(x, phi)| match self.adversary {
                Adversary::Gaussian => phi * phi * dot(x, x),
                _ => dot(x, x),
            })
            .fold(0.0, f64::max);
        let e_cap = self.radius * self.radius - dot(&w_init, &w_init);
        let schedule = match self.constant_eta {
            Some(eta) => StepSchedule::Constant(eta),
            None => StepSchedule::inverse_sqrt_for(d_prior, e_cap),
        };
        let adversary = self.adversary;
        run_adaptive(&w_init, self.radius, self.sign, schedule, self.steps, |t, w| {
            let x = inputs[t].clone();
            let a = dot(w, &x);
            let phi = match adversary {
                Adversary::Gaussian | Adversary::RandomSign => phis[t],
                Adversary::Linear => {
                    if x[0] >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Adversary::SignOfActivation => {
                    if a > 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                Adversary::AntiSign => {
                    if a > 0.0 {
                        -1.0
                    } else {
                        1.0
                    }
                }
                Adversary::NeverFire => 1.0,
            };
            (x, phi)
        })
    }
}
