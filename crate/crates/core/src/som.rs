//! A one-dimensional Kohonen layer with cosine-similarity matching.
//!
//! Neurons sit on a line. For each presented input the best matching unit
//! (largest cosine similarity, lowest index on ties) and every neuron within
//! the current radius on the line move towards the input:
//! `W <- W + alpha * (X - W)`. Both the learning rate and the radius decay
//! linearly over the epochs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::XorShiftRng;

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_ALPHA0: f64 = 0.5;

const INIT_LOW: f64 = 0.01;
const INIT_HIGH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    pub neuron_count: usize,
    pub epochs: usize,
    pub alpha0: f64,
    pub radius0: f64,
    pub seed: u64,
}

impl SomConfig {
    /// Defaults: 50 epochs, alpha0 = 0.5, radius0 = floor(neuron_count / 4).
    pub fn new(neuron_count: usize, seed: u64) -> Self {
        SomConfig {
            neuron_count,
            epochs: DEFAULT_EPOCHS,
            alpha0: DEFAULT_ALPHA0,
            radius0: (neuron_count / 4) as f64,
            seed,
        }
    }

    pub fn with_neurons(mut self, neuron_count: usize) -> Self {
        self.neuron_count = neuron_count;
        self.radius0 = (neuron_count / 4) as f64;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.neuron_count == 0 {
            return Err(Error::InvalidConfig("neuron_count must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha0 {} not in (0, 1]", self.alpha0)));
        }
        if !(self.radius0 >= 0.0 && self.radius0.is_finite()) {
            return Err(Error::InvalidConfig(format!("radius0 {} must be >= 0", self.radius0)));
        }
        Ok(())
    }

    /// Learning rate during epoch `e` (0-based).
    pub fn alpha_at(&self, epoch: usize) -> f64 {
        self.alpha0 * (1.0 - epoch as f64 / self.epochs as f64)
    }

    /// Neighbourhood radius on the neuron line during epoch `e`.
    pub fn radius_at(&self, epoch: usize) -> usize {
        (self.radius0 * (1.0 - epoch as f64 / self.epochs as f64)).round() as usize
    }
}

/// Cosine similarity of two equal-length vectors; 0 when either is all-zero.
pub fn cosine_similarity(x: &[f64], w: &[f64]) -> Result<f64> {
    if x.len() != w.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: w.len(),
        });
    }
    Ok(cosine_unchecked(x, w))
}

pub(crate) fn cosine_unchecked(x: &[f64], w: &[f64]) -> f64 {
    let (mut dot, mut xx, mut ww) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(w) {
        dot += a * b;
        xx += a * a;
        ww += b * b;
    }
    if xx == 0.0 || ww == 0.0 {
        return 0.0;
    }
    (dot / (xx.sqrt() * ww.sqrt())).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomNetwork {
    pub config: SomConfig,
    #[serde(serialize_with = "crate::json::serialize_matrix")]
    pub weights: Vec<Vec<f64>>,
}

impl SomNetwork {
    /// Seeded uniform(0.01, 1.0) weights; returns the generator so training
    /// continues the same stream.
    fn initialize(dim: usize, config: &SomConfig) -> (Self, XorShiftRng) {
        let mut rng = XorShiftRng::new(config.seed);
        let weights = (0..config.neuron_count)
            .map(|_| (0..dim).map(|_| rng.uniform(INIT_LOW, INIT_HIGH)).collect())
            .collect();
        (
            SomNetwork {
                config: config.clone(),
                weights,
            },
            rng,
        )
    }

    /// The untrained network `train` starts from.
    pub fn initial(dim: usize, config: &SomConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::initialize(dim, config).0)
    }

    pub fn train<V: AsRef<[f64]>>(inputs: &[V], config: &SomConfig) -> Result<Self> {
        config.validate()?;
        let first = inputs.first().ok_or(Error::EmptyInput)?;
        let dim = first.as_ref().len();
        if let Some(bad) = inputs.iter().find(|v| v.as_ref().len() != dim) {
            return Err(Error::LengthMismatch {
                left: bad.as_ref().len(),
                right: dim,
            });
        }
        let (mut net, mut rng) = Self::initialize(dim, config);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        for epoch in 0..config.epochs {
            let alpha = config.alpha_at(epoch);
            let radius = config.radius_at(epoch);
            rng.shuffle(&mut order);
            for &i in &order {
                let x = inputs[i].as_ref();
                let bmu = net.find_bmu(x);
                net.update(x, bmu, alpha, radius);
            }
        }
        Ok(net)
    }

    /// Moves the BMU and its line neighbours within `radius` towards `x`.
    pub fn update(&mut self, x: &[f64], bmu: usize, alpha: f64, radius: usize) {
        let lo = bmu.saturating_sub(radius);
        let hi = (bmu + radius).min(self.weights.len() - 1);
        for row in &mut self.weights[lo..=hi] {
            for (w, &xi) in row.iter_mut().zip(x) {
                *w += alpha * (xi - *w);
            }
        }
    }

    pub fn neuron_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Index of the most similar neuron; ties go to the lowest index.
    pub fn find_bmu(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (j, w) in self.weights.iter().enumerate() {
            let sim = cosine_unchecked(x, w);
            if sim > best_sim {
                best = j;
                best_sim = sim;
            }
        }
        best
    }

    pub fn assign<V: AsRef<[f64]>>(&self, inputs: &[V]) -> Vec<usize> {
        inputs.iter().map(|x| self.find_bmu(x.as_ref())).collect()
    }

    /// Mean cosine similarity between each input and its BMU.
    pub fn mean_similarity<V: AsRef<[f64]>>(&self, inputs: &[V]) -> f64 {
        if inputs.is_empty() {
            return 0.0;
        }
        let total: f64 = inputs
            .iter()
            .map(|x| {
                let x = x.as_ref();
                cosine_unchecked(x, &self.weights[self.find_bmu(x)])
            })
            .sum();
        total / inputs.len() as f64
    }
}

impl AsRef<[f64]> for crate::cube::PatternVector {
    fn as_ref(&self) -> &[f64] {
        &self.components
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn net(weights: Vec<Vec<f64>>) -> SomNetwork {
        SomNetwork {
            config: SomConfig::new(weights.len(), 0),
            weights,
        }
    }

    fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn cosine_examples() {
        let x = [0.3, 1.7, 2.0];
        assert!((cosine_similarity(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 2.0, 0.0], &[2.0, 1.0, 0.0]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn bmu_examples() {
        let n = net(vec![vec![0.0, 1.0], vec![0.6, 0.8]]);
        assert_eq!(n.find_bmu(&[1.0, 0.0]), 1);
        // neurons 1 and 3 are identical and both best
        let n = net(vec![
            vec![0.0, 1.0],
            vec![1.0, 0.2],
            vec![0.1, 1.0],
            vec![1.0, 0.2],
        ]);
        assert_eq!(n.find_bmu(&[1.0, 0.2]), 1);
        // all-zero input ties everywhere at 0
        assert_eq!(n.find_bmu(&[0.0, 0.0]), 0);
    }

    #[test]
    fn one_step_reaches_midpoint() {
        let mut cfg = SomConfig::new(1, 9);
        cfg.epochs = 1;
        cfg.alpha0 = 0.5;
        cfg.radius0 = 0.0;
        let x = vec![vec![2.0, 0.0, 1.0]];
        let w0 = SomNetwork::initial(3, &cfg).unwrap().weights[0].clone();
        let trained = SomNetwork::train(&x, &cfg).unwrap();
        for k in 0..3 {
            let mid = w0[k] + 0.5 * (x[0][k] - w0[k]);
            assert_eq!(trained.weights[0][k], mid);
        }
    }

    #[test]
    fn tiny_alpha_leaves_initialisation() {
        let mut cfg = SomConfig::new(3, 1);
        cfg.alpha0 = 1e-300;
        let inputs = vec![vec![5.0, 0.0], vec![0.0, 5.0]];
        let init = SomNetwork::initial(2, &cfg).unwrap();
        let trained = SomNetwork::train(&inputs, &cfg).unwrap();
        assert_eq!(init.weights, trained.weights);
    }

    #[test]
    fn initial_weights_in_range() {
        let init = SomNetwork::initial(40, &SomConfig::new(7, 5)).unwrap();
        assert!(init.weights.iter().flatten().all(|&w| (INIT_LOW..INIT_HIGH).contains(&w)));
    }

    #[test]
    fn training_is_deterministic() {
        let inputs: Vec<Vec<f64>> = (0..20)
            .map(|i| (0..6).map(|k| ((i * 7 + k * 3) % 6) as f64).collect())
            .collect();
        let cfg = SomConfig::new(5, 1234);
        let a = SomNetwork::train(&inputs, &cfg).unwrap();
        let b = SomNetwork::train(&inputs, &cfg).unwrap();
        let bits = |n: &SomNetwork| n.weights.iter().flatten().map(|w| w.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = SomNetwork::train(&inputs, &cfg.clone().with_seed(1235)).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = SomConfig::new(2, 0);
        assert!(matches!(SomNetwork::train::<Vec<f64>>(&[], &cfg), Err(Error::EmptyInput)));
        assert!(matches!(
            SomNetwork::train(&[vec![1.0], vec![1.0, 2.0]], &cfg),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(SomConfig::new(0, 0).validate().is_err());
        let mut bad = SomConfig::new(2, 0);
        bad.alpha0 = 1.5;
        assert!(bad.validate().is_err());
        bad.alpha0 = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn schedules_decay_linearly() {
        let mut cfg = SomConfig::new(12, 0);
        cfg.epochs = 10;
        assert_eq!(cfg.radius0, 3.0);
        assert_eq!(cfg.alpha_at(0), 0.5);
        assert!((cfg.alpha_at(5) - 0.25).abs() < 1e-15);
        assert_eq!(cfg.radius_at(0), 3);
        assert_eq!(cfg.radius_at(5), 2); // round(1.5)
        assert_eq!(cfg.radius_at(9), 0);
    }

    #[test]
    fn neighbourhood_update_touches_radius_only() {
        let mut n = net(vec![vec![0.0]; 5]);
        n.update(&[1.0], 3, 0.5, 1);
        let got: Vec<f64> = n.weights.iter().map(|w| w[0]).collect();
        assert_eq!(got, vec![0.0, 0.0, 0.5, 0.5, 0.5]);
        n.update(&[1.0], 0, 1.0, 0);
        assert_eq!(n.weights[0][0], 1.0);
    }

    #[test]
    fn assign_and_mean_similarity() {
        let n = net(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let inputs = vec![vec![2.0, 0.0], vec![0.0, 3.0], vec![2.0, 0.0]];
        let labels = n.assign(&inputs);
        assert_eq!(labels, vec![0, 1, 0]);
        assert!((n.mean_similarity(&inputs) - 1.0).abs() < 1e-15);
        let single = net(vec![vec![0.4, 0.2]]);
        assert_eq!(single.assign(&inputs), vec![0, 0, 0]);
        assert!((single.mean_similarity(&[vec![0.4, 0.2]]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn separated_groups_get_distinct_labels() {
        let mut inputs = Vec::new();
        for k in 0..5 {
            let j = k as f64 * 0.1;
            inputs.push(vec![5.0, 4.0 + j, 0.0, 0.0]);
            inputs.push(vec![0.0, 0.0, 4.0 + j, 5.0]);
        }
        let mut cfg = SomConfig::new(2, 77);
        cfg.epochs = 30;
        let n = SomNetwork::train(&inputs, &cfg).unwrap();
        let labels = n.assign(&inputs);
        for pair in labels.chunks(2) {
            assert_ne!(pair[0], pair[1]);
        }
        assert!(labels.iter().step_by(2).all(|&l| l == labels[0]));
    }

    #[test]
    fn mean_similarity_best_of_sweep_never_decreases() {
        // Best-of over seeds: with more neurons the best achievable quality
        // never drops on a small instance with 4 distinct inputs.
        let inputs = vec![
            vec![5.0, 1.0, 0.0, 0.0],
            vec![0.0, 4.0, 2.0, 0.0],
            vec![0.0, 0.0, 3.0, 5.0],
            vec![1.0, 0.0, 0.0, 4.0],
        ];
        let mut prev = 0.0;
        for neurons in 1..=inputs.len() {
            let best = (0..20u64)
                .map(|seed| {
                    let mut cfg = SomConfig::new(neurons, seed);
                    cfg.radius0 = 0.0;
                    SomNetwork::train(&inputs, &cfg).unwrap().mean_similarity(&inputs)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(best + 1e-12 >= prev, "{neurons} neurons: {best} < {prev}");
            prev = best;
        }
        assert!(prev > 0.99);
    }

    #[test]
    fn model_json_roundtrip() {
        let n = SomNetwork::train(&[vec![1.0, 0.3], vec![0.2, 0.9]], &SomConfig::new(3, 4)).unwrap();
        let text = serde_json::to_string(&n).unwrap();
        assert!(text.contains("\"weights\":[["));
        assert!(text.contains("e-1") || text.contains("e0"));
        let back: SomNetwork = serde_json::from_str(&text).unwrap();
        assert_eq!(back, n);
    }

    proptest! {
        #[test]
        fn cosine_is_scale_invariant(
            x in proptest::collection::vec(0.0f64..5.0, 1..12),
            seed in any::<u64>(),
            scale in 0.01f64..100.0,
        ) {
            let mut rng = XorShiftRng::new(seed);
            let weights: Vec<Vec<f64>> = (0..4).map(|_| x.iter().map(|_| rng.uniform(0.0, 5.0)).collect()).collect();
            let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
            for w in &weights {
                let a = cosine_similarity(&x, w).unwrap();
                let b = cosine_similarity(&scaled, w).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&a));
            }
            let n = net(weights);
            prop_assert_eq!(n.find_bmu(&x), n.find_bmu(&scaled));
        }

        #[test]
        fn single_neuron_contracts(x in proptest::collection::vec(0.0f64..5.0, 1..10), alpha in 0.05f64..0.95, seed in any::<u64>()) {
            let mut n = SomNetwork::initial(x.len(), &SomConfig::new(1, seed)).unwrap();
            let mut dist = norm_diff(&n.weights[0], &x);
            for _ in 0..20 {
                n.update(&x, 0, alpha, 0);
                let next = norm_diff(&n.weights[0], &x);
                prop_assert!((next - (1.0 - alpha) * dist).abs() < 1e-12);
                dist = next;
            }
        }

        #[test]
        fn trained_weights_stay_nonnegative(
            inputs in proptest::collection::vec(proptest::collection::vec(0.0f64..5.0, 6), 1..15),
            neurons in 1usize..6,
            seed in any::<u64>(),
        ) {
            let mut cfg = SomConfig::new(neurons, seed);
            cfg.epochs = 10;
            let n = SomNetwork::train(&inputs, &cfg).unwrap();
            prop_assert!(n.weights.iter().flatten().all(|w| w.is_finite() && *w >= 0.0));
            let labels = n.assign(&inputs);
            for (i, a) in inputs.iter().enumerate() {
                for (j, b) in inputs.iter().enumerate() {
                    if a == b {
                        prop_assert_eq!(labels[i], labels[j]);
                    }
                }
            }
        }
    }
}
