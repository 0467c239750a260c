//! Adam with L2 weight decay folded into the gradient.

#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// One update of every parameter group. Groups must keep the same
    /// shapes across calls.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len(), "parameter and gradient groups differ");
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (gi, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[gi], &mut self.v[gi]);
            for i in 0..p.len() {
                let grad = g[i] + self.weight_decay * p[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad * grad;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }

    /// Convenience for a single flat parameter vector.
    pub fn step_flat(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step(&mut [params], &[grads]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut adam = Adam::new(0.1, 0.0);
        let mut x = vec![1.0, -2.0, 0.5];
        adam.step_flat(&mut x, &[3.0, -0.01, 0.0]);
        assert!((x[0] - 0.9).abs() < 1e-6);
        assert!((x[1] + 1.9).abs() < 1e-4);
        assert_eq!(x[2], 0.5);
    }

    #[test]
    fn minimises_quadratic() {
        let mut adam = Adam::new(0.05, 0.0);
        let mut x = vec![3.0, -4.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (x[0] - 1.0), 2.0 * (x[1] + 0.5)];
            adam.step_flat(&mut x, &g);
        }
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 0.5).abs() < 1e-3);
    }

    #[test]
    fn weight_decay_shrinks_towards_zero() {
        let mut adam = Adam::new(0.01, 0.1);
        let mut x = vec![1.0];
        for _ in 0..100 {
            adam.step_flat(&mut x, &[0.0]);
        }
        assert!(x[0] < 1.0 && x[0] > 0.0);
    }
}
