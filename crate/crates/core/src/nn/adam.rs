//! Adam with bias-corrected moments.

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self { lr, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len(), "parameter and gradient lengths differ");
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![1.0, -2.0];
        let mut opt = Adam::new(2, 0.002);
        for _ in 0..10 {
            opt.step(&mut p, &[0.0, 0.0]);
        }
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn constant_gradient_moves_by_lr() {
        // with g constant, m̂ = g and v̂ = g² exactly, so each step is lr·g/(|g| + ε)
        let lr = 0.002;
        let mut p = vec![0.0; 3];
        let g = [0.5, -3.0, 1e-3];
        let mut opt = Adam::new(3, lr);
        for _ in 0..200 {
            let before = p.clone();
            opt.step(&mut p, &g);
            for k in 0..3 {
                let expected = lr * g[k].abs() / (g[k].abs() + EPSILON);
                assert!(((before[k] - p[k]).abs() - expected).abs() <= 1e-12);
            }
        }
        assert_eq!(opt.steps(), 200);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.3; 4];
            let mut opt = Adam::new(4, 0.01);
            for i in 0..50 {
                let g: Vec<f64> = (0..4).map(|k| ((i * 3 + k) as f64).sin()).collect();
                opt.step(&mut p, &g);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
