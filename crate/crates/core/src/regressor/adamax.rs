use serde::{Deserialize, Serialize};

/// Adamax: Adam with an infinity-norm second moment.
///
/// ```text
/// m <- b1 m + (1 - b1) g
/// u <- max(b2 u, |g|)
/// theta <- theta - lr / (1 - b1^t) * m / (u + eps)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adamax {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    u: Vec<f64>,
    t: u64,
}

impl Adamax {
    pub fn new(len: usize) -> Self {
        Self::with_betas(len, 0.9, 0.999)
    }

    pub fn with_betas(len: usize, beta1: f64, beta2: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps: 1e-8,
            m: vec![0.0; len],
            u: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn norm_estimate(&self) -> &[f64] {
        &self.u
    }

    /// Applies one update in place.
    ///
    /// # Panics
    /// If `params`, `grads` and the state differ in length.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert!(params.len() == self.m.len() && grads.len() == self.m.len(), "Adamax state length mismatch");
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let step = lr / (1.0 - b1.powi(self.t.min(i32::MAX as u64) as i32));
        for (((p, g), m), u) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.u) {
            *m = b1 * *m + (1.0 - b1) * g;
            *u = (b2 * *u).max(g.abs());
            *p -= step * *m / (*u + self.eps);
        }
    }
}
