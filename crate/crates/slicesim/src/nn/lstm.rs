//! Stacked LSTM with a linear output head, trained by BPTT on squared TD
//! error. Gate order within the packed weight rows is input, forget, cell,
//! output.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{clip_global_norm, sigmoid};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNet {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub output_dim: usize,
    /// Per layer, input weights [4H x in_l] row-major.
    wx: Vec<Vec<f64>>,
    /// Per layer, recurrent weights [4H x H] row-major.
    wh: Vec<Vec<f64>>,
    /// Per layer, gate biases [4H].
    b: Vec<Vec<f64>>,
    /// Output head [O x H] row-major plus bias [O].
    wy: Vec<f64>,
    by: Vec<f64>,
}

struct StepCache {
    // Per layer: input vector, previous h/c, gate activations, new cell.
    x: Vec<Vec<f64>>,
    h_prev: Vec<Vec<f64>>,
    c_prev: Vec<Vec<f64>>,
    gi: Vec<Vec<f64>>,
    gf: Vec<Vec<f64>>,
    gg: Vec<Vec<f64>>,
    go: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl LstmNet {
    pub fn new(
        input_dim: usize,
        hidden: usize,
        layers: usize,
        output_dim: usize,
        init_range: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(layers >= 1 && hidden >= 1 && output_dim >= 1);
        let mut wx = Vec::new();
        let mut wh = Vec::new();
        let mut b = Vec::new();
        for l in 0..layers {
            let in_l = if l == 0 { input_dim } else { hidden };
            wx.push(rand_vec(4 * hidden * in_l, init_range, rng));
            wh.push(rand_vec(4 * hidden * hidden, init_range, rng));
            b.push(rand_vec(4 * hidden, init_range, rng));
        }
        let wy = rand_vec(output_dim * hidden, init_range, rng);
        let by = rand_vec(output_dim, init_range, rng);
        Self { input_dim, hidden, layers, output_dim, wx, wh, b, wy, by }
    }

    /// All-zero network of the given shape.
    pub fn zeros(input_dim: usize, hidden: usize, layers: usize, output_dim: usize) -> Self {
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Self::new(input_dim, hidden, layers, output_dim, 0.0, &mut rng)
    }

    /// Q-values for a state sequence; recurrence starts from zero state.
    pub fn forward(&self, sequence: &[Vec<f64>]) -> Vec<f64> {
        assert!(!sequence.is_empty(), "empty input sequence");
        let (out, _) = self.forward_cached(sequence);
        out
    }

    fn forward_cached(&self, sequence: &[Vec<f64>]) -> (Vec<f64>, Vec<StepCache>) {
        let h = self.hidden;
        let mut hs = vec![vec![0.0; h]; self.layers];
        let mut cs = vec![vec![0.0; h]; self.layers];
        let mut caches = Vec::with_capacity(sequence.len());
        for input in sequence {
            assert_eq!(input.len(), self.input_dim, "input dimension mismatch");
            let mut cache = StepCache {
                x: Vec::with_capacity(self.layers),
                h_prev: Vec::with_capacity(self.layers),
                c_prev: Vec::with_capacity(self.layers),
                gi: Vec::with_capacity(self.layers),
                gf: Vec::with_capacity(self.layers),
                gg: Vec::with_capacity(self.layers),
                go: Vec::with_capacity(self.layers),
                c: Vec::with_capacity(self.layers),
            };
            let mut x = input.clone();
            for l in 0..self.layers {
                let in_l = x.len();
                let mut z = self.b[l].clone();
                for row in 0..4 * h {
                    let mut acc = 0.0;
                    for (k, &xk) in x.iter().enumerate() {
                        acc += self.wx[l][row * in_l + k] * xk;
                    }
                    for (k, &hk) in hs[l].iter().enumerate() {
                        acc += self.wh[l][row * h + k] * hk;
                    }
                    z[row] += acc;
                }
                let gi: Vec<f64> = (0..h).map(|k| sigmoid(z[k])).collect();
                let gf: Vec<f64> = (0..h).map(|k| sigmoid(z[h + k])).collect();
                let gg: Vec<f64> = (0..h).map(|k| z[2 * h + k].tanh()).collect();
                let go: Vec<f64> = (0..h).map(|k| sigmoid(z[3 * h + k])).collect();
                let c_new: Vec<f64> =
                    (0..h).map(|k| gf[k] * cs[l][k] + gi[k] * gg[k]).collect();
                let h_new: Vec<f64> = (0..h).map(|k| go[k] * c_new[k].tanh()).collect();
                cache.x.push(x.clone());
                cache.h_prev.push(hs[l].clone());
                cache.c_prev.push(cs[l].clone());
                cache.gi.push(gi);
                cache.gf.push(gf);
                cache.gg.push(gg);
                cache.go.push(go);
                cache.c.push(c_new.clone());
                hs[l] = h_new.clone();
                cs[l] = c_new;
                x = h_new;
            }
            caches.push(cache);
        }
        let top = &hs[self.layers - 1];
        let out: Vec<f64> = (0..self.output_dim)
            .map(|o| {
                self.by[o]
                    + (0..h).map(|k| self.wy[o * h + k] * top[k]).sum::<f64>()
            })
            .collect();
        (out, caches)
    }

    /// Mean squared TD loss over a batch and its full parameter gradient.
    ///
    /// Each batch item is (sequence, action index, scalar target); the loss is
    /// mean over items of (Q(sequence)[action] - target)^2.
    pub fn loss_and_grad(&self, batch: &[(Vec<Vec<f64>>, usize, f64)]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len().max(1) as f64;
        for (seq, action, target) in batch {
            let (out, caches) = self.forward_cached(seq);
            let err = out[*action] - target;
            loss += scale * err * err;
            let mut dout = vec![0.0; self.output_dim];
            dout[*action] = 2.0 * scale * err;
            self.backward(seq.len(), &caches, &dout, &mut grad);
        }
        (loss, grad)
    }

    fn backward(&self, steps: usize, caches: &[StepCache], dout: &[f64], grad: &mut [f64]) {
        let h = self.hidden;
        let layout = self.layout();
        // Output head gradients and dL/dh for the top layer at the last step.
        let top_h: Vec<f64> = {
            let cache = &caches[steps - 1];
            let l = self.layers - 1;
            (0..h).map(|k| cache.go[l][k] * cache.c[l][k].tanh()).collect()
        };
        let (wy_off, by_off) = (layout.wy, layout.by);
        let mut dh_top = vec![0.0; h];
        for o in 0..self.output_dim {
            grad[by_off + o] += dout[o];
            for k in 0..h {
                grad[wy_off + o * h + k] += dout[o] * top_h[k];
                dh_top[k] += self.wy[o * h + k] * dout[o];
            }
        }
        // dh/dc carried backward through time per layer.
        let mut dh = vec![vec![0.0; h]; self.layers];
        let mut dc = vec![vec![0.0; h]; self.layers];
        dh[self.layers - 1] = dh_top;
        for t in (0..steps).rev() {
            let cache = &caches[t];
            // dx of the layer above feeds dh of the layer below at this step.
            let mut dx_above: Option<Vec<f64>> = None;
            for l in (0..self.layers).rev() {
                if let Some(dx) = dx_above.take() {
                    for k in 0..h {
                        dh[l][k] += dx[k];
                    }
                }
                let in_l = cache.x[l].len();
                let tanh_c: Vec<f64> = (0..h).map(|k| cache.c[l][k].tanh()).collect();
                let mut dz = vec![0.0; 4 * h];
                for k in 0..h {
                    let dck = dc[l][k] + dh[l][k] * cache.go[l][k] * (1.0 - tanh_c[k] * tanh_c[k]);
                    let da_o = dh[l][k] * tanh_c[k];
                    let da_f = dck * cache.c_prev[l][k];
                    let da_i = dck * cache.gg[l][k];
                    let da_g = dck * cache.gi[l][k];
                    dz[k] = da_i * cache.gi[l][k] * (1.0 - cache.gi[l][k]);
                    dz[h + k] = da_f * cache.gf[l][k] * (1.0 - cache.gf[l][k]);
                    dz[2 * h + k] = da_g * (1.0 - cache.gg[l][k] * cache.gg[l][k]);
                    dz[3 * h + k] = da_o * cache.go[l][k] * (1.0 - cache.go[l][k]);
                    dc[l][k] = dck * cache.gf[l][k];
                }
                let (wx_off, wh_off, b_off) = (layout.wx[l], layout.wh[l], layout.b[l]);
                let mut dx = vec![0.0; in_l];
                let mut dh_prev = vec![0.0; h];
                for row in 0..4 * h {
                    let dzr = dz[row];
                    grad[b_off + row] += dzr;
                    for k in 0..in_l {
                        grad[wx_off + row * in_l + k] += dzr * cache.x[l][k];
                        dx[k] += self.wx[l][row * in_l + k] * dzr;
                    }
                    for k in 0..h {
                        grad[wh_off + row * h + k] += dzr * cache.h_prev[l][k];
                        dh_prev[k] += self.wh[l][row * h + k] * dzr;
                    }
                }
                dh[l] = dh_prev;
                if l > 0 {
                    dx_above = Some(dx);
                }
            }
        }
    }

    /// One SGD step on the given batch; returns the pre-step loss.
    pub fn train_step(&mut self, batch: &[(Vec<Vec<f64>>, usize, f64)], lr: f64, clip: f64) -> f64 {
        let (loss, mut grad) = self.loss_and_grad(batch);
        clip_global_norm(&mut grad, clip);
        for (p, g) in self.params_mut().zip(grad.iter()) {
            *p -= lr * g;
        }
        loss
    }

    pub fn param_count(&self) -> usize {
        let h = self.hidden;
        let mut n = 0;
        for l in 0..self.layers {
            let in_l = if l == 0 { self.input_dim } else { h };
            n += 4 * h * in_l + 4 * h * h + 4 * h;
        }
        n + self.output_dim * h + self.output_dim
    }

    fn layout(&self) -> Layout {
        let h = self.hidden;
        let mut wx = Vec::new();
        let mut wh = Vec::new();
        let mut b = Vec::new();
        let mut off = 0;
        for l in 0..self.layers {
            let in_l = if l == 0 { self.input_dim } else { h };
            wx.push(off);
            off += 4 * h * in_l;
            wh.push(off);
            off += 4 * h * h;
            b.push(off);
            off += 4 * h;
        }
        let wy = off;
        let by = wy + self.output_dim * h;
        Layout { wx, wh, b, wy, by }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.layers {
            out.extend_from_slice(&self.wx[l]);
            out.extend_from_slice(&self.wh[l]);
            out.extend_from_slice(&self.b[l]);
        }
        out.extend_from_slice(&self.wy);
        out.extend_from_slice(&self.by);
        out
    }

    pub fn from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length mismatch");
        for (p, v) in self.params_mut().zip(flat.iter()) {
            *p = *v;
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.wx
            .iter_mut()
            .zip(self.wh.iter_mut())
            .zip(self.b.iter_mut())
            .flat_map(|((wx, wh), b)| wx.iter_mut().chain(wh.iter_mut()).chain(b.iter_mut()))
            .chain(self.wy.iter_mut())
            .chain(self.by.iter_mut())
    }

    /// Named tensors with shapes, in flat order (for checkpoints).
    pub fn tensor_shapes(&self) -> Vec<(String, usize, usize)> {
        let h = self.hidden;
        let mut out = Vec::new();
        for l in 0..self.layers {
            let in_l = if l == 0 { self.input_dim } else { h };
            out.push((format!("lstm{l}.wx"), 4 * h, in_l));
            out.push((format!("lstm{l}.wh"), 4 * h, h));
            out.push((format!("lstm{l}.b"), 4 * h, 1));
        }
        out.push(("head.wy".into(), self.output_dim, h));
        out.push(("head.by".into(), self.output_dim, 1));
        out
    }
}

struct Layout {
    wx: Vec<usize>,
    wh: Vec<usize>,
    b: Vec<usize>,
    wy: usize,
    by: usize,
}

fn rand_vec(n: usize, range: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| if range > 0.0 { rng.gen_range(-range..range) } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn zero_weights_zero_outputs() {
        let net = LstmNet::zeros(1, 3, 1, 13);
        let out = net.forward(&[vec![0.7]]);
        assert_eq!(out.len(), 13);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = LstmNet::new(2, 4, 2, 5, 0.1, &mut rng);
        let seq = vec![vec![0.3, -0.2], vec![0.1, 0.9]];
        assert_eq!(net.forward(&seq), net.forward(&seq));
    }

    /// Hand evaluation of the single-cell recurrence on a length-1 sequence
    /// with all gate weights 1 and no bias.
    #[test]
    fn single_cell_matches_hand_recurrence() {
        let mut net = LstmNet::zeros(1, 1, 1, 1);
        let mut flat = net.to_flat();
        // Layout: wx (4), wh (4), b (4), wy (1), by (1).
        for v in flat.iter_mut().take(4) {
            *v = 1.0;
        }
        flat[12] = 1.0; // wy
        net.from_flat(&flat);
        let x = 1.0f64;
        let i = sigmoid(x);
        let f = sigmoid(x);
        let g = x.tanh();
        let o = sigmoid(x);
        let c = f * 0.0 + i * g;
        let h = o * c.tanh();
        let out = net.forward(&[vec![x]]);
        assert!((out[0] - h).abs() < 1e-12, "got {} want {}", out[0], h);
    }

    #[test]
    fn perfect_targets_give_zero_loss_and_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = LstmNet::new(1, 3, 1, 4, 0.1, &mut rng);
        let seq = vec![vec![0.4], vec![0.6]];
        let out = net.forward(&seq);
        let batch = vec![(seq, 2, out[2])];
        let before = net.to_flat();
        let loss = net.train_step(&batch, 0.05, 1.0);
        assert!(loss.abs() < 1e-24);
        assert_eq!(net.to_flat(), before);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let net = LstmNet::new(2, 3, 2, 4, 0.4, &mut rng);
        let batch: Vec<(Vec<Vec<f64>>, usize, f64)> = (0..3)
            .map(|k| {
                let seq: Vec<Vec<f64>> =
                    (0..3).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                (seq, k % 4, rng.gen_range(-1.0..1.0))
            })
            .collect();
        let (_, grad) = net.loss_and_grad(&batch);
        let flat = net.to_flat();
        let n = flat.len();
        // 10 random coordinates.
        let coords: Vec<usize> = (0..10).map(|_| rng.gen_range(0..n)).collect();
        for &c in &coords {
            let h = 1e-5 * flat[c].abs().max(1.0);
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut fp = flat.clone();
            fp[c] += h;
            plus.from_flat(&fp);
            fp[c] -= 2.0 * h;
            minus.from_flat(&fp);
            let (lp, _) = plus.loss_and_grad(&batch);
            let (lm, _) = minus.loss_and_grad(&batch);
            let numeric = (lp - lm) / (2.0 * h);
            let denom = numeric.abs().max(grad[c].abs()).max(1e-8);
            let rel = (numeric - grad[c]).abs() / denom;
            assert!(rel < 1e-4, "coord {c}: analytic {} vs numeric {numeric}", grad[c]);
        }
    }

    #[test]
    fn flat_roundtrip_preserves_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = LstmNet::new(3, 5, 2, 7, 0.2, &mut rng);
        let mut copy = LstmNet::zeros(3, 5, 2, 7);
        copy.from_flat(&net.to_flat());
        assert_eq!(net, copy);
        let total: usize = net.tensor_shapes().iter().map(|(_, r, c)| r * c).sum();
        assert_eq!(total, net.param_count());
    }
}
