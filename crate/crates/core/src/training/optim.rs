use crate::nn::{Grads, Parameterized};
use crate::scalar::Scalar;

/// One classical-momentum step: `v <- momentum * v + g; p <- p - lr * v`.
pub fn sgd_step<T: Scalar>(params: &mut [T], grads: &[T], velocity: &mut [T], lr: T, momentum: T) {
    debug_assert!(params.len() == grads.len() && grads.len() == velocity.len());
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
}

/// SGD with classical momentum, holding one velocity buffer per tensor.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    pub lr: T,
    pub momentum: T,
    velocity: Grads<T>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new<P: Parameterized<T>>(model: &P, lr: T, momentum: T) -> Self {
        Sgd { lr, momentum, velocity: model.zero_grads() }
    }

    pub fn step<P: Parameterized<T>>(&mut self, model: &mut P, grads: &Grads<T>) {
        for ((p, g), v) in model.params_mut().into_iter().zip(grads).zip(&mut self.velocity) {
            sgd_step(p, g, v, self.lr, self.momentum);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_step_to_zero() {
        let mut p = vec![1.5f64, -2.0];
        let g = p.clone();
        let mut v = vec![0.0; 2];
        sgd_step(&mut p, &g, &mut v, 1.0, 0.0);
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn momentum_closed_form() {
        let g = [0.4f64, -3.0];
        let mut p = vec![1.0, 1.0];
        let mut v = vec![0.0; 2];
        for _ in 0..2 {
            sgd_step(&mut p, &g, &mut v, 0.01, 0.9);
        }
        for (pi, gi) in p.iter().zip(g) {
            assert!((pi - (1.0 - 0.01 * gi * 2.9)).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_converges() {
        // f(p) = 0.5 (a p0^2 + b p1^2)
        let (a, b) = (1.0f64, 10.0f64);
        let mut p: Vec<f64> = vec![3.0, -2.0];
        let mut v = vec![0.0; 2];
        let mut steps = 0;
        while (p[0] * p[0] + p[1] * p[1]).sqrt() >= 1e-6 {
            let g = [a * p[0], b * p[1]];
            sgd_step(&mut p, &g, &mut v, 0.05, 0.9);
            steps += 1;
            assert!(steps <= 500, "no convergence, p = {p:?}");
        }
    }
}
