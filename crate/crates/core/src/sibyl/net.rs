//! Two-layer value network `6 -> H (ReLU) -> 2` with hand-written
//! backpropagation and an Adam optimizer.
//!
//! Parameters are stored flat: `w1` (`H x 6`, row-major), `b1` (`H`),
//! `w2` (`2 x H`), `b2` (`2`).

use crate::rng::SimRng;

pub const INPUTS: usize = 6;
pub const OUTPUTS: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct ValueNet {
    hidden: usize,
    params: Vec<f64>,
}

/// One regression sample: push output `action` toward `target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub input: [f64; INPUTS],
    pub action: usize,
    pub target: f64,
}

impl ValueNet {
    pub fn param_count(hidden: usize) -> usize {
        hidden * INPUTS + hidden + OUTPUTS * hidden + OUTPUTS
    }

    /// He-uniform weights, zero biases.
    pub fn new(hidden: usize, rng: &mut SimRng) -> Self {
        assert!(hidden > 0, "hidden layer must be non-empty");
        let mut params = vec![0.0; Self::param_count(hidden)];
        let l1 = (6.0 / INPUTS as f64).sqrt();
        let l2 = (6.0 / hidden as f64).sqrt();
        for w in &mut params[..hidden * INPUTS] {
            *w = rng.uniform(-l1, l1);
        }
        let w2 = hidden * INPUTS + hidden;
        for w in &mut params[w2..w2 + OUTPUTS * hidden] {
            *w = rng.uniform(-l2, l2) * 0.1;
        }
        ValueNet { hidden, params }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let h = self.hidden;
        let b1 = h * INPUTS;
        let w2 = b1 + h;
        let b2 = w2 + OUTPUTS * h;
        (b1, w2, b2)
    }

    fn hidden_activations(&self, x: &[f64; INPUTS], out: &mut Vec<f64>) {
        let (b1, _, _) = self.offsets();
        out.clear();
        for j in 0..self.hidden {
            let row = &self.params[j * INPUTS..(j + 1) * INPUTS];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.params[b1 + j];
            out.push(z.max(0.0));
        }
    }

    pub fn forward(&self, x: &[f64; INPUTS]) -> [f64; OUTPUTS] {
        let mut h = Vec::with_capacity(self.hidden);
        self.hidden_activations(x, &mut h);
        self.output(&h)
    }

    fn output(&self, h: &[f64]) -> [f64; OUTPUTS] {
        let (_, w2, b2) = self.offsets();
        std::array::from_fn(|k| {
            let row = &self.params[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
            row.iter().zip(h).map(|(w, a)| w * a).sum::<f64>() + self.params[b2 + k]
        })
    }

    /// Mean of `0.5 * (Q(x, a) - target)^2` over the batch.
    pub fn loss(&self, batch: &[Sample]) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        batch
            .iter()
            .map(|s| {
                let d = self.forward(&s.input)[s.action] - s.target;
                0.5 * d * d
            })
            .sum::<f64>()
            / batch.len() as f64
    }

    /// Gradient of [`ValueNet::loss`] with respect to every parameter.
    pub fn gradient(&self, batch: &[Sample]) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        if batch.is_empty() {
            return grad;
        }
        let (b1, w2, b2) = self.offsets();
        let scale = 1.0 / batch.len() as f64;
        let mut h = Vec::with_capacity(self.hidden);
        for s in batch {
            self.hidden_activations(&s.input, &mut h);
            let q = self.output(&h)[s.action];
            let d = (q - s.target) * scale;
            let a = s.action;
            grad[b2 + a] += d;
            for j in 0..self.hidden {
                grad[w2 + a * self.hidden + j] += d * h[j];
                if h[j] > 0.0 {
                    let dz = d * self.params[w2 + a * self.hidden + j];
                    grad[b1 + j] += dz;
                    for i in 0..INPUTS {
                        grad[j * INPUTS + i] += dz * s.input[i];
                    }
                }
            }
        }
        grad
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64, params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        if self.lr == 0.0 {
            return;
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rng: &mut SimRng, n: usize) -> Vec<Sample> {
        (0..n)
            .map(|_| Sample {
                input: std::array::from_fn(|_| rng.unit()),
                action: rng.below(2) as usize,
                target: rng.uniform(-1.0, 1.0),
            })
            .collect()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = SimRng::new(9);
        let mut net = ValueNet::new(12, &mut rng);
        for _ in 0..100 {
            for w in net.params_mut() {
                *w += rng.uniform(-0.1, 0.1);
            }
            let b = batch(&mut rng, 8);
            let g = net.gradient(&b);
            let h = 1e-6;
            let mut num = vec![0.0; g.len()];
            for i in 0..g.len() {
                let mut p = net.clone();
                p.params_mut()[i] += h;
                let up = p.loss(&b);
                p.params_mut()[i] -= 2.0 * h;
                num[i] = (up - p.loss(&b)) / (2.0 * h);
            }
            let diff: f64 = g
                .iter()
                .zip(&num)
                .map(|(a, n)| (a - n).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let rel = diff / norm(&g).max(norm(&num)).max(1e-12);
            assert!(rel <= 1e-4, "relative error {rel}");
        }
    }

    #[test]
    fn empty_batch_has_zero_gradient() {
        let mut rng = SimRng::new(1);
        let net = ValueNet::new(8, &mut rng);
        assert!(net.gradient(&[]).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn forward_is_deterministic() {
        let mut a = SimRng::new(2);
        let mut b = SimRng::new(2);
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        assert_eq!(
            ValueNet::new(8, &mut a).forward(&x),
            ValueNet::new(8, &mut b).forward(&x)
        );
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let mut rng = SimRng::new(3);
        let mut net = ValueNet::new(8, &mut rng);
        let before = net.clone();
        let b = batch(&mut rng, 4);
        let g = net.gradient(&b);
        Adam::new(0.0, g.len()).step(net.params_mut(), &g);
        assert_eq!(net, before);
    }

    #[test]
    fn fits_a_constant_target() {
        let mut rng = SimRng::new(4);
        let mut net = ValueNet::new(16, &mut rng);
        let s = Sample {
            input: [0.5; INPUTS],
            action: 1,
            target: 0.75,
        };
        let mut adam = Adam::new(1e-2, net.params().len());
        for _ in 0..2000 {
            let g = net.gradient(&[s]);
            adam.step(net.params_mut(), &g);
        }
        assert!((net.forward(&s.input)[1] - 0.75).abs() < 1e-2);
    }
}
