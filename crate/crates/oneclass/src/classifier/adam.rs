//! Adaptive-moment gradient descent with bias correction.

use super::layers::Param;
use ndarray::ArrayD;

#[derive(Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update from the accumulated gradients. The caller must pass
    /// the same parameters in the same order on every step; moment
    /// buffers are keyed by position.
    pub fn step(&mut self, params: &mut [&mut Param]) {
        if self.m.is_empty() {
            self.m = params
                .iter()
                .map(|p| ArrayD::zeros(p.value.raw_dim()))
                .collect();
            self.v = params
                .iter()
                .map(|p| ArrayD::zeros(p.value.raw_dim()))
                .collect();
        }
        debug_assert_eq!(self.m.len(), params.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (i, p) in params.iter_mut().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            m.zip_mut_with(&p.grad, |mi, &g| {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g
            });
            v.zip_mut_with(&p.grad, |vi, &g| {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g
            });
            ndarray::Zip::from(&mut p.value)
                .and(&*m)
                .and(&*v)
                .for_each(|w, &mi, &vi| {
                    *w -= self.lr * (mi / bc1) / ((vi / bc2).sqrt() + self.eps);
                });
        }
    }
}
