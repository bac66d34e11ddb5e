//! Small dense networks written against plain `f64` slices: a stacked LSTM
//! Q-value predictor and a feedforward softmax classifier. Both expose flat
//! parameter views for checkpointing and finite-difference verification.

pub mod fnn;
pub mod lstm;

pub use fnn::FnnNet;
pub use lstm::LstmNet;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scale gradients in place so their global L2 norm is at most `clip`.
pub fn clip_global_norm(grads: &mut [f64], clip: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > clip && norm > 0.0 {
        let scale = clip / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
}
