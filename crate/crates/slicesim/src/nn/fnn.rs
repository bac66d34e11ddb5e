//! Feedforward classifier: sigmoid hidden layers, softmax output, trained by
//! backpropagation on cross-entropy against target distributions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{clip_global_norm, sigmoid};

#[derive(Debug, Clone, PartialEq)]
pub struct FnnNet {
    /// Layer widths, input first, output last.
    pub dims: Vec<usize>,
    /// Per connection, weights [out x in] row-major.
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl FnnNet {
    pub fn new(dims: &[usize], init_range: f64, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2);
        let mut w = Vec::new();
        let mut b = Vec::new();
        for pair in dims.windows(2) {
            let (i, o) = (pair[0], pair[1]);
            w.push((0..o * i).map(|_| rng.gen_range(-init_range..init_range)).collect());
            b.push((0..o).map(|_| rng.gen_range(-init_range..init_range)).collect());
        }
        Self { dims: dims.to_vec(), w, b }
    }

    /// Softmax output probabilities.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let (acts, _) = self.forward_cached(input);
        acts.last().unwrap().clone()
    }

    /// Activations per layer (input excluded); last entry is the softmax.
    fn forward_cached(&self, input: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        assert_eq!(input.len(), self.dims[0], "input dimension mismatch");
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.w.len());
        let mut x = input.to_vec();
        let last = self.w.len() - 1;
        for (l, (w, b)) in self.w.iter().zip(self.b.iter()).enumerate() {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let mut z = b.clone();
            for row in 0..o {
                for (k, &xk) in x.iter().take(i).enumerate() {
                    z[row] += w[row * i + k] * xk;
                }
            }
            let a: Vec<f64> = if l == last {
                softmax(&z)
            } else {
                z.iter().map(|&v| sigmoid(v)).collect()
            };
            acts.push(a.clone());
            x = a;
        }
        (acts, input.to_vec())
    }

    /// Cross-entropy of the softmax against a target distribution.
    pub fn cross_entropy(&self, input: &[f64], target: &[f64]) -> f64 {
        let probs = self.forward(input);
        -target
            .iter()
            .zip(probs.iter())
            .map(|(&t, &p)| if t > 0.0 { t * (p.max(1e-300)).ln() } else { 0.0 })
            .sum::<f64>()
    }

    /// Mean cross-entropy over a batch and its parameter gradient.
    pub fn loss_and_grad(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len().max(1) as f64;
        for (input, target) in batch {
            let (acts, x0) = self.forward_cached(input);
            let probs = acts.last().unwrap();
            loss -= scale
                * target
                    .iter()
                    .zip(probs.iter())
                    .map(|(&t, &p)| if t > 0.0 { t * (p.max(1e-300)).ln() } else { 0.0 })
                    .sum::<f64>();
            // Softmax + cross-entropy: dz_out = probs - target.
            let mut dz: Vec<f64> =
                probs.iter().zip(target.iter()).map(|(&p, &t)| scale * (p - t)).collect();
            let mut off_end = self.param_count();
            for l in (0..self.w.len()).rev() {
                let (i, o) = (self.dims[l], self.dims[l + 1]);
                let below: &[f64] = if l == 0 { &x0 } else { &acts[l - 1] };
                let w_off = off_end - o * i - o;
                let b_off = off_end - o;
                let mut dx = vec![0.0; i];
                for row in 0..o {
                    grad[b_off + row] += dz[row];
                    for k in 0..i {
                        grad[w_off + row * i + k] += dz[row] * below[k];
                        dx[k] += self.w[l][row * i + k] * dz[row];
                    }
                }
                if l > 0 {
                    // Through the sigmoid of the layer below.
                    dz = dx
                        .iter()
                        .zip(below.iter())
                        .map(|(&d, &a)| d * a * (1.0 - a))
                        .collect();
                }
                off_end = w_off;
            }
        }
        (loss, grad)
    }

    pub fn train_step(&mut self, batch: &[(Vec<f64>, Vec<f64>)], lr: f64, clip: f64) -> f64 {
        let (loss, mut grad) = self.loss_and_grad(batch);
        clip_global_norm(&mut grad, clip);
        for (p, g) in self.params_mut().zip(grad.iter()) {
            *p -= lr * g;
        }
        loss
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.w.iter().zip(self.b.iter()) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        for (p, v) in self.params_mut().zip(flat.iter()) {
            *p = *v;
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w
            .iter_mut()
            .zip(self.b.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn tensor_shapes(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        for (l, pair) in self.dims.windows(2).enumerate() {
            out.push((format!("fc{l}.w"), pair[1], pair[0]));
            out.push((format!("fc{l}.b"), pair[1], 1));
        }
        out
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let net = FnnNet::new(&[6, 10, 10, 13], 1.0, &mut rng);
            let input: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = net.forward(&input);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn overfits_a_constant_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = FnnNet::new(&[5, 20, 20, 4], 0.5, &mut rng);
        let mut target = vec![0.0; 4];
        target[3] = 1.0;
        let input = vec![0.5, -0.2, 0.8, 0.1, -0.9];
        for _ in 0..500 {
            net.train_step(&[(input.clone(), target.clone())], 0.5, 10.0);
        }
        let p = net.forward(&input);
        assert!(p[3] > 0.9, "prob {:?}", p);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let net = FnnNet::new(&[4, 6, 6, 5], 0.8, &mut rng);
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..3)
            .map(|_| {
                let input: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let raw: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = raw.iter().sum();
                (input, raw.iter().map(|v| v / s).collect())
            })
            .collect();
        let (_, grad) = net.loss_and_grad(&batch);
        let flat = net.to_flat();
        for _ in 0..10 {
            let c = rng.gen_range(0..flat.len());
            let h = 1e-5 * flat[c].abs().max(1.0);
            let mut fp = flat.clone();
            let mut plus = net.clone();
            let mut minus = net.clone();
            fp[c] += h;
            plus.from_flat(&fp);
            fp[c] -= 2.0 * h;
            minus.from_flat(&fp);
            let (lp, _) = plus.loss_and_grad(&batch);
            let (lm, _) = minus.loss_and_grad(&batch);
            let numeric = (lp - lm) / (2.0 * h);
            let denom = numeric.abs().max(grad[c].abs()).max(1e-8);
            assert!(
                (numeric - grad[c]).abs() / denom < 1e-4,
                "coord {c}: analytic {} vs numeric {numeric}",
                grad[c]
            );
        }
    }

    #[test]
    fn init_range_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = FnnNet::new(&[10, 60, 60, 13], 4.0, &mut rng);
        assert!(net.to_flat().iter().all(|v| v.abs() <= 4.0));
    }
}
