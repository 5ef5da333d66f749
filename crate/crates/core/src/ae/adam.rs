use super::model::{Gradients, Sequential};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter block.
#[derive(Clone, Debug, Default)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam step on `param`.
pub fn adam_update<T: Scalar>(param: &mut [T], grad: &[T], state: &mut AdamState<T>, cfg: &Adam) {
    assert_eq!(param.len(), grad.len());
    assert_eq!(param.len(), state.m.len());
    state.t += 1;
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let c1 = T::one() - T::from_f64_lossy(cfg.beta1.powi(state.t as i32));
    let c2 = T::one() - T::from_f64_lossy(cfg.beta2.powi(state.t as i32));
    let lr = T::from_f64_lossy(cfg.lr);
    let eps = T::from_f64_lossy(cfg.epsilon);
    for i in 0..param.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Adam over every parameter block of a network.
pub struct Optimizer<T> {
    cfg: Adam,
    states: Vec<Vec<AdamState<T>>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(net: &Sequential<T>, cfg: Adam) -> Self {
        let states = net
            .layers()
            .iter()
            .map(|l| l.params().iter().map(|p| AdamState::new(p.len())).collect())
            .collect();
        Optimizer { cfg, states }
    }

    pub fn step(&mut self, net: &mut Sequential<T>, grads: &Gradients<T>) {
        for ((layer, states), g) in net.layers_mut().iter_mut().zip(&mut self.states).zip(&grads.layers) {
            for ((p, s), g) in layer.params_mut().into_iter().zip(states).zip(g) {
                adam_update(p.data_mut(), g.data(), s, &self.cfg);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_param() {
        let mut p = vec![0.3f64, -1.0];
        let mut s = AdamState::new(2);
        adam_update(&mut p, &[0.0, 0.0], &mut s, &Adam::default());
        assert_eq!(p, vec![0.3, -1.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![0.0f64];
        let mut s = AdamState::new(1);
        adam_update(&mut p, &[1.0], &mut s, &Adam::default());
        let expect = -1e-3 / (1.0 + 1e-8);
        assert!((p[0] - expect).abs() < 1e-8);
    }

    #[test]
    fn momentum_keeps_moving_after_gradient_vanishes() {
        let cfg = Adam::default();
        let mut p = vec![0.0f64];
        let mut s = AdamState::new(1);
        adam_update(&mut p, &[1.0], &mut s, &cfg);
        let m1 = s.m[0];
        let after_first = p[0];
        adam_update(&mut p, &[0.0], &mut s, &cfg);
        assert!((s.m[0] - 0.9 * m1).abs() < 1e-15);
        let after_second = p[0];
        adam_update(&mut p, &[0.0], &mut s, &cfg);
        assert!((s.m[0] - 0.81 * m1).abs() < 1e-15);
        assert!(after_second < after_first && p[0] < after_second);
    }
}
