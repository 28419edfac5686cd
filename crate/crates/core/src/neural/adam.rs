use ndarray::{Array, Dimension, Zip};

/// Adam hyperparameters with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone)]
pub struct Moments<D: Dimension> {
    m: Array<f64, D>,
    v: Array<f64, D>,
}

impl<D: Dimension> Moments<D> {
    pub fn zeros_like(param: &Array<f64, D>) -> Self {
        Self { m: Array::zeros(param.raw_dim()), v: Array::zeros(param.raw_dim()) }
    }

    /// One update at step `t` (1-based). `decay` switches weight decay on for this tensor.
    pub fn step(&mut self, hp: &AdamParams, t: u64, param: &mut Array<f64, D>, grad: &Array<f64, D>, decay: bool) {
        let c1 = 1.0 - hp.beta1.powi(t as i32);
        let c2 = 1.0 - hp.beta2.powi(t as i32);
        let wd = if decay { hp.weight_decay } else { 0.0 };
        Zip::from(param).and(grad).and(&mut self.m).and(&mut self.v).for_each(|p, &g, m, v| {
            *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
            *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
            let update = (*m / c1) / ((*v / c2).sqrt() + hp.epsilon);
            *p -= hp.learning_rate * (update + wd * *p);
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn hp(wd: f64) -> AdamParams {
        AdamParams { learning_rate: 0.1, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: wd }
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut p = array![[1.5, -2.0], [0.0, 3.25]];
        let before = p.clone();
        let mut mom = Moments::zeros_like(&p);
        let g = Array::zeros(p.raw_dim());
        for t in 1..=5 {
            mom.step(&hp(0.0), t, &mut p, &g, true);
        }
        assert_eq!(p, before);
    }

    #[test]
    fn decay_shrinks_only_when_enabled() {
        let mut a = Array1::from(vec![2.0]);
        let mut b = a.clone();
        let g = Array1::zeros(1);
        Moments::zeros_like(&a).step(&hp(0.5), 1, &mut a, &g, true);
        Moments::zeros_like(&b).step(&hp(0.5), 1, &mut b, &g, false);
        assert!((a[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
        assert_eq!(b[0], 2.0);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Array1::from(vec![0.0, 0.0]);
        let g = Array1::from(vec![3.0, -0.01]);
        Moments::zeros_like(&p).step(&hp(0.0), 1, &mut p, &g, false);
        assert!((p[0] + 0.1).abs() < 1e-6);
        assert!((p[1] - 0.1).abs() < 1e-4);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = Array1::from(vec![5.0, -3.0]);
        let mut mom = Moments::zeros_like(&p);
        for t in 1..=2000 {
            let g = p.mapv(|x| 2.0 * x);
            mom.step(&hp(0.0), t, &mut p, &g, false);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2), "{p:?}");
    }
}
