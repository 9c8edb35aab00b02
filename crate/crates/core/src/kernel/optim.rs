use ndarray::Zip;

use super::params::{Mat, ParamStore};
use crate::error::{Error, Result};

fn ensure_finite(store: &ParamStore) -> Result<()> {
    match store.first_non_finite_grad() {
        Some(name) => Err(Error::NonFiniteGradient(name.to_string())),
        None => Ok(()),
    }
}

/// Plain gradient descent; zeroes the gradients afterwards.
pub fn sgd_step(store: &mut ParamStore, lr: f64) -> Result<()> {
    ensure_finite(store)?;
    for id in store.ids().collect::<Vec<_>>() {
        let g = store.grad(id).clone();
        store.value_mut(id).scaled_add(-lr, &g);
    }
    store.zero_grads();
    Ok(())
}

/// Rescales gradients so their global norm is at most `max_norm`.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = store.grad_norm();
    if norm > max_norm && norm > 0.0 {
        store.scale_grads(max_norm / norm);
    }
    norm
}

/// Adam-style first/second moment optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct AdamLike {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl AdamLike {
    pub fn new(store: &ParamStore, lr: f64, beta1: f64, beta2: f64) -> Self {
        let zeros = || store.ids().map(|id| Mat::zeros(store.value(id).raw_dim())).collect();
        Self {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        ensure_finite(store)?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for id in store.ids().collect::<Vec<_>>() {
            let i = id.index();
            let g = store.grad(id).clone();
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            Zip::from(&mut *m).and(&g).for_each(|m, &g| *m = b1 * *m + (1.0 - b1) * g);
            Zip::from(&mut *v).and(&g).for_each(|v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
            Zip::from(store.value_mut(id))
                .and(&*m)
                .and(&*v)
                .for_each(|p, &m, &v| *p -= lr * (m / c1) / ((v / c2).sqrt() + eps));
        }
        store.zero_grads();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn quad_store() -> (ParamStore, crate::kernel::ParamId) {
        let mut s = ParamStore::new(0);
        let id = s.add("x", array![[3.0]]).unwrap();
        (s, id)
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut s, id) = quad_store();
        sgd_step(&mut s, 0.1).unwrap();
        assert_eq!(s.value(id)[[0, 0]], 3.0);
        let mut adam = AdamLike::new(&s, 0.1, 0.9, 0.999);
        adam.step(&mut s).unwrap();
        assert_eq!(s.value(id)[[0, 0]], 3.0);
    }

    #[test]
    fn quadratic_decreases_monotonically() {
        for use_adam in [false, true] {
            let (mut s, id) = quad_store();
            let mut adam = AdamLike::new(&s, 0.01, 0.9, 0.999);
            let mut prev = f64::INFINITY;
            for _ in 0..100 {
                let x = s.value(id)[[0, 0]];
                let loss = x * x;
                assert!(loss < prev);
                prev = loss;
                s.grad_mut(id)[[0, 0]] = 2.0 * x;
                if use_adam {
                    adam.step(&mut s).unwrap();
                } else {
                    sgd_step(&mut s, 0.01).unwrap();
                }
                assert_eq!(s.grad(id)[[0, 0]], 0.0);
            }
        }
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let (mut s, id) = quad_store();
        s.grad_mut(id)[[0, 0]] = f64::NAN;
        match sgd_step(&mut s, 0.1) {
            Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "x"),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.value(id)[[0, 0]], 3.0);
    }

    #[test]
    fn clipping_bounds_norm() {
        let (mut s, id) = quad_store();
        s.grad_mut(id)[[0, 0]] = -10.0;
        assert_eq!(clip_grad_norm(&mut s, 2.0), 10.0);
        assert!((s.grad(id)[[0, 0]] + 2.0).abs() < 1e-15);
    }
}
