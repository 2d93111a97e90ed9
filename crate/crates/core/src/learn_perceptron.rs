//! Hashed multi-table perceptron with saturating integer weights, plus the
//! classic single-layer perceptron over explicit inputs.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::hash::{mix64, multiply_shift, GOLDEN};

/// Per-feature hash salt: `mix64(feature_id)`.
pub fn feature_salt(feature_id: u32) -> u64 {
    mix64(feature_id as u64)
}

/// Per-feature odd multiplier: `mix64(feature_id ^ GOLDEN) | 1`.
pub fn feature_multiplier(feature_id: u32) -> u64 {
    mix64(feature_id as u64 ^ GOLDEN) | 1
}

/// Index of `raw` in a table of `table_size` entries (a power of two):
/// `((raw ^ salt) * multiplier) >> (64 - log2(table_size))`.
pub fn hash_feature(feature_id: u32, raw: u64, table_size: usize) -> usize {
    debug_assert!(table_size.is_power_of_two());
    let bits = table_size.trailing_zeros();
    multiply_shift(
        raw,
        feature_salt(feature_id),
        feature_multiplier(feature_id),
        bits,
    ) as usize
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightTable {
    feature_id: u32,
    weight_bits: u8,
    entries: Vec<i8>,
}

impl WeightTable {
    pub fn new(feature_id: u32, table_size: usize, weight_bits: u8) -> Result<Self> {
        if !table_size.is_power_of_two() {
            return Err(config_err(format!(
                "table size {table_size} is not a power of two"
            )));
        }
        if !(2..=8).contains(&weight_bits) {
            return Err(config_err(format!(
                "weight width {weight_bits} bits outside 2..=8"
            )));
        }
        Ok(WeightTable {
            feature_id,
            weight_bits,
            entries: vec![0; table_size],
        })
    }

    pub fn feature_id(&self) -> u32 {
        self.feature_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_weight(&self) -> i32 {
        -(1 << (self.weight_bits - 1))
    }

    pub fn max_weight(&self) -> i32 {
        (1 << (self.weight_bits - 1)) - 1
    }

    pub fn get(&self, index: usize) -> i32 {
        self.entries[index] as i32
    }

    /// Writes are clamped into the representable range.
    pub fn set(&mut self, index: usize, value: i32) {
        self.entries[index] = value.clamp(self.min_weight(), self.max_weight()) as i8;
    }

    pub fn nudge(&mut self, index: usize, delta: i32) {
        let v = self.get(index) + delta;
        self.set(index, v);
    }

    pub fn weights(&self) -> impl Iterator<Item = i32> + '_ {
        self.entries.iter().map(|w| *w as i32)
    }

    pub fn storage_bits(&self) -> usize {
        self.entries.len() * self.weight_bits as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub feature_id: u32,
    pub table_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptronConfig {
    pub tau_act: i32,
    pub t_pos: i32,
    pub t_neg: i32,
    pub weight_bits: u8,
    pub features: Vec<FeatureTable>,
}

impl PerceptronConfig {
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(config_err("perceptron needs at least one feature"));
        }
        if self.t_neg >= self.t_pos {
            return Err(config_err(format!(
                "training thresholds must satisfy t_neg < t_pos ({} >= {})",
                self.t_neg, self.t_pos
            )));
        }
        if !(2..=8).contains(&self.weight_bits) {
            return Err(config_err("weight_bits must lie in 2..=8"));
        }
        let n = self.features.len() as i32;
        let lo = -(1 << (self.weight_bits - 1)) * n;
        let hi = ((1 << (self.weight_bits - 1)) - 1) * n;
        if self.tau_act < lo || self.tau_act > hi + 1 {
            return Err(config_err(format!(
                "tau_act {} outside reachable sum range [{lo}, {}]",
                self.tau_act,
                hi + 1
            )));
        }
        for f in &self.features {
            if !f.table_size.is_power_of_two() {
                return Err(config_err(format!(
                    "feature {} table size {} is not a power of two",
                    f.feature_id, f.table_size
                )));
            }
        }
        Ok(())
    }

    pub fn storage_bits(&self) -> usize {
        self.features.iter().map(|f| f.table_size).sum::<usize>() * self.weight_bits as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub prediction: bool,
    pub w_sigma: i32,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Perceptron {
    config: PerceptronConfig,
    tables: Vec<WeightTable>,
}

impl Perceptron {
    pub fn new(config: PerceptronConfig) -> Result<Self> {
        config.validate()?;
        let tables = config
            .features
            .iter()
            .map(|f| WeightTable::new(f.feature_id, f.table_size, config.weight_bits))
            .collect::<Result<Vec<_>>>()?;
        Ok(Perceptron { config, tables })
    }

    pub fn config(&self) -> &PerceptronConfig {
        &self.config
    }

    pub fn tables(&self) -> &[WeightTable] {
        &self.tables
    }

    pub fn tables_mut(&mut self) -> &mut [WeightTable] {
        &mut self.tables
    }

    /// Sum the hashed weights of every feature and compare against the
    /// activation threshold (`w_sigma >= tau_act`).
    ///
    /// Panics if `values` does not supply exactly one raw value per table.
    pub fn predict(&self, values: &[u64]) -> Prediction {
        assert_eq!(
            values.len(),
            self.tables.len(),
            "one raw value per configured feature"
        );
        let mut w_sigma = 0;
        let mut indices = Vec::with_capacity(values.len());
        for (table, raw) in self.tables.iter().zip(values) {
            let idx = hash_feature(table.feature_id, *raw, table.len());
            w_sigma += table.get(idx);
            indices.push(idx);
        }
        Prediction {
            prediction: w_sigma >= self.config.tau_act,
            w_sigma,
            indices,
        }
    }

    /// Move every indexed weight one step toward `outcome`, but only when
    /// `w_sigma` lies inside `[t_neg, t_pos]`. Returns whether training ran.
    pub fn train(&mut self, indices: &[usize], w_sigma: i32, outcome: bool) -> bool {
        if w_sigma < self.config.t_neg || w_sigma > self.config.t_pos {
            return false;
        }
        let delta = if outcome { 1 } else { -1 };
        for (table, idx) in self.tables.iter_mut().zip(indices) {
            table.nudge(*idx, delta);
        }
        true
    }

    pub fn storage_bits(&self) -> usize {
        self.tables.iter().map(WeightTable::storage_bits).sum()
    }
}

/// Result of [`fit_simple_perceptron`]: `weights[0]` is the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplePerceptron {
    pub weights: Vec<f64>,
    pub epochs: usize,
    pub updates: usize,
    pub training_errors: usize,
}

impl SimplePerceptron {
    /// `1` iff `w0 + sum(w_i * x_i) > 0`.
    pub fn classify(&self, x: &[f64]) -> bool {
        let s: f64 = self.weights[0]
            + self.weights[1..]
                .iter()
                .zip(x)
                .map(|(w, xi)| w * xi)
                .sum::<f64>();
        s > 0.0
    }

    pub fn errors_on(&self, data: &[(Vec<f64>, bool)]) -> usize {
        data.iter().filter(|(x, y)| self.classify(x) != *y).count()
    }
}

/// Classic perceptron learning rule with unit learning rate, starting from
/// zero weights: on each misclassified sample, `w += (y - f(x)) * [1, x]`.
/// Stops after an epoch with no errors or after `max_epochs`.
pub fn fit_simple_perceptron(data: &[(Vec<f64>, bool)], max_epochs: usize) -> SimplePerceptron {
    let dim = data.first().map_or(0, |(x, _)| x.len());
    let mut model = SimplePerceptron {
        weights: vec![0.0; dim + 1],
        epochs: 0,
        updates: 0,
        training_errors: data.len(),
    };
    for epoch in 1..=max_epochs {
        let mut errors = 0;
        for (x, y) in data {
            let out = model.classify(x);
            if out != *y {
                errors += 1;
                model.updates += 1;
                let sign = if *y { 1.0 } else { -1.0 };
                model.weights[0] += sign;
                for (w, xi) in model.weights[1..].iter_mut().zip(x) {
                    *w += sign * xi;
                }
            }
        }
        model.epochs = epoch;
        if errors == 0 {
            break;
        }
    }
    model.training_errors = model.errors_on(data);
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config(features: &[(u32, usize)], tau: i32) -> PerceptronConfig {
        PerceptronConfig {
            tau_act: tau,
            t_pos: 12,
            t_neg: -35,
            weight_bits: 5,
            features: features
                .iter()
                .map(|&(feature_id, table_size)| FeatureTable {
                    feature_id,
                    table_size,
                })
                .collect(),
        }
    }

    #[test]
    fn five_bit_bounds() {
        let t = WeightTable::new(0, 8, 5).unwrap();
        assert_eq!((t.min_weight(), t.max_weight()), (-16, 15));
        assert!(WeightTable::new(0, 6, 5).is_err());
    }

    #[test]
    fn single_entry_table_hashes_to_zero() {
        for v in [0u64, 1, 0xDEAD_BEEF, u64::MAX] {
            assert_eq!(hash_feature(3, v, 1), 0);
        }
    }

    #[test]
    fn golden_hash_index() {
        assert_eq!(hash_feature(2, 0xDEAD_BEEF, 1024), GOLDEN_INDEX);
        assert_eq!(
            hash_feature(2, 0xDEAD_BEEF, 1024),
            hash_feature(2, 0xDEAD_BEEF, 1024)
        );
    }

    // Frozen from the first run of the multiply-shift hash.
    const GOLDEN_INDEX: usize = 577;

    #[test]
    fn cold_tables_and_threshold() {
        let p = Perceptron::new(config(&[(0, 16), (1, 16)], -18)).unwrap();
        let pred = p.predict(&[5, 9]);
        assert_eq!(pred.w_sigma, 0);
        assert!(pred.prediction);
        let p = Perceptron::new(config(&[(0, 16), (1, 16)], 1)).unwrap();
        assert!(!p.predict(&[5, 9]).prediction);
    }

    #[test]
    fn sum_of_extreme_weights() {
        let mut p = Perceptron::new(config(&[(0, 16), (1, 16)], 0)).unwrap();
        let idx = p.predict(&[5, 9]).indices;
        p.tables_mut()[0].set(idx[0], 15);
        p.tables_mut()[1].set(idx[1], -16);
        assert_eq!(p.predict(&[5, 9]).w_sigma, -1);
    }

    #[test]
    fn saturation_at_top() {
        let mut p = Perceptron::new(config(&[(0, 4)], -8)).unwrap();
        p.tables_mut()[0].set(1, 15);
        assert!(p.train(&[1], 0, true));
        assert_eq!(p.tables()[0].get(1), 15);
    }

    #[test]
    fn negative_step() {
        let mut p = Perceptron::new(config(&[(0, 4)], -8)).unwrap();
        p.train(&[2], 0, false);
        assert_eq!(p.tables()[0].get(2), -1);
    }

    #[test]
    fn outside_window_no_change() {
        let mut p = Perceptron::new(config(&[(0, 4), (1, 4)], -18)).unwrap();
        let before = p.tables().to_vec();
        assert!(!p.train(&[1, 1], 13, true));
        assert!(!p.train(&[1, 1], 13, false));
        assert!(!p.train(&[1, 1], -36, true));
        assert_eq!(p.tables(), &before[..]);
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let mut c = config(&[(0, 4)], 0);
        c.t_neg = 12;
        assert!(Perceptron::new(c).is_err());
        assert!(Perceptron::new(config(&[(0, 4)], 100)).is_err());
        assert!(Perceptron::new(config(&[], 0)).is_err());
    }

    fn and_data() -> Vec<(Vec<f64>, bool)> {
        vec![
            (vec![0.0, 0.0], false),
            (vec![0.0, 1.0], false),
            (vec![1.0, 0.0], false),
            (vec![1.0, 1.0], true),
        ]
    }

    #[test]
    fn learns_and() {
        let m = fit_simple_perceptron(&and_data(), 100);
        assert_eq!(m.training_errors, 0);
    }

    #[test]
    fn xor_does_not_converge() {
        let data = vec![
            (vec![0.0, 0.0], false),
            (vec![0.0, 1.0], true),
            (vec![1.0, 0.0], true),
            (vec![1.0, 1.0], false),
        ];
        let m = fit_simple_perceptron(&data, 50);
        assert_eq!(m.epochs, 50);
        assert!(m.training_errors > 0);
    }

    #[test]
    fn single_point_needs_at_most_one_update() {
        let m = fit_simple_perceptron(&[(vec![2.0, -1.0], true)], 10);
        assert_eq!(m.updates, 1);
        assert_eq!(m.training_errors, 0);
    }

    proptest! {
        #[test]
        fn weights_stay_bounded(ops in proptest::collection::vec((0u64..64, any::<bool>(), -40i32..20), 0..400)) {
            let mut p = Perceptron::new(config(&[(0, 8), (1, 8), (2, 8)], -18)).unwrap();
            for (v, outcome, _) in &ops {
                let pred = p.predict(&[*v, v ^ 3, v / 2]);
                p.train(&pred.indices, pred.w_sigma, *outcome);
            }
            // arbitrary w_sigma values too
            for (v, outcome, ws) in &ops {
                let pred = p.predict(&[*v, *v, *v]);
                p.train(&pred.indices, *ws, *outcome);
            }
            for t in p.tables() {
                prop_assert!(t.weights().all(|w| (-16..=15).contains(&w)));
            }
        }

        #[test]
        fn window_gates_training(v in any::<u64>(), ws in prop_oneof![-100i32..-35, 13i32..100], outcome in any::<bool>()) {
            let mut p = Perceptron::new(config(&[(0, 8), (1, 8)], -18)).unwrap();
            let pred = p.predict(&[v, v]);
            p.train(&pred.indices, 0, !outcome);
            let before = p.tables().to_vec();
            p.train(&pred.indices, ws, outcome);
            prop_assert_eq!(p.tables(), &before[..]);
        }

        #[test]
        fn positive_step_is_monotone(vals in proptest::collection::vec(any::<u64>(), 3), warm in 0usize..30) {
            let mut p = Perceptron::new(config(&[(0, 8), (1, 8), (2, 8)], -18)).unwrap();
            for i in 0..warm {
                let pred = p.predict(&[i as u64, 2 * i as u64, 3]);
                p.train(&pred.indices, 0, i % 3 == 0);
            }
            let pred = p.predict(&vals);
            p.train(&pred.indices, pred.w_sigma, true);
            prop_assert!(p.predict(&vals).w_sigma >= pred.w_sigma);
        }

        #[test]
        fn prediction_is_pure(vals in proptest::collection::vec(any::<u64>(), 2)) {
            let p = Perceptron::new(config(&[(0, 64), (5, 32)], -18)).unwrap();
            prop_assert_eq!(p.predict(&vals), p.predict(&vals));
        }
    }
}
