//! Forward/backward pairs for the handful of primitives the models use.
//!
//! Matrices hold one item per row. Backward functions take the upstream
//! gradient, accumulate parameter gradients into the store and return the
//! gradient with respect to the input.

use ndarray::{Axis, Zip};

use super::params::{Mat, ParamId, ParamStore};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

/// `y = x W + b` with `W: d_in × d_out` and `b: 1 × d_out`.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub w: ParamId,
    pub b: ParamId,
    d_in: usize,
    d_out: usize,
}

impl Affine {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        let w = store.add_xavier(format!("{name}.w"), d_in, d_out)?;
        let b = store.add_zeros(format!("{name}.b"), 1, d_out)?;
        Ok(Self { w, b, d_in, d_out })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn forward(&self, store: &ParamStore, x: &Mat) -> Result<Mat> {
        if x.ncols() != self.d_in {
            return Err(Error::ShapeMismatch {
                op: "affine",
                expected: format!("{} input columns", self.d_in),
                got: format!("{}", x.ncols()),
            });
        }
        Ok(x.dot(store.value(self.w)) + store.value(self.b))
    }

    pub fn backward(&self, store: &mut ParamStore, x: &Mat, dy: &Mat) -> Mat {
        *store.grad_mut(self.w) += &x.t().dot(dy);
        *store.grad_mut(self.b) += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&store.value(self.w).t())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_mat(x: &Mat) -> Mat {
    x.mapv(sigmoid)
}

/// Takes the forward output `y`.
pub fn sigmoid_backward(y: &Mat, dy: &Mat) -> Mat {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(y).for_each(|d, &s| *d *= s * (1.0 - s));
    dx
}

pub fn tanh_mat(x: &Mat) -> Mat {
    x.mapv(f64::tanh)
}

pub fn tanh_backward(y: &Mat, dy: &Mat) -> Mat {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(y).for_each(|d, &t| *d *= 1.0 - t * t);
    dx
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Mat) -> Mat {
    let mut y = x.clone();
    for mut row in y.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    y
}

pub fn softmax_rows_backward(y: &Mat, dy: &Mat) -> Mat {
    let mut dx = Mat::zeros(y.raw_dim());
    for ((yr, dyr), mut dxr) in y.rows().into_iter().zip(dy.rows()).zip(dx.rows_mut()) {
        let dot = yr.dot(&dyr);
        Zip::from(&mut dxr)
            .and(&yr)
            .and(&dyr)
            .for_each(|d, &p, &g| *d = p * (g - dot));
    }
    dx
}

/// Summed categorical cross-entropy of row logits against target indices.
/// Returns the loss and its gradient wrt the logits.
pub fn cross_entropy_rows(logits: &Mat, targets: &[usize]) -> Result<(f64, Mat)> {
    if logits.nrows() != targets.len() {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            expected: format!("{} targets", logits.nrows()),
            got: format!("{}", targets.len()),
        });
    }
    let p = softmax_rows(logits);
    let mut loss = 0.0;
    let mut grad = p.clone();
    for (i, &t) in targets.iter().enumerate() {
        let row = logits.row(i);
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[t];
        grad[[i, t]] -= 1.0;
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

/// Row-wise normalization to zero mean and unit variance, no gain or bias.
pub fn layer_norm(x: &Mat) -> (Mat, LayerNormCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Vec::with_capacity(x.nrows());
    for mut row in xhat.rows_mut() {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        let is = 1.0 / (var + LN_EPS).sqrt();
        row *= is;
        inv_std.push(is);
    }
    (xhat.clone(), LayerNormCache { xhat, inv_std })
}

pub fn layer_norm_backward(cache: &LayerNormCache, dy: &Mat) -> Mat {
    let d = dy.ncols() as f64;
    let mut dx = Mat::zeros(dy.raw_dim());
    for (i, mut dxr) in dx.rows_mut().into_iter().enumerate() {
        let g = dy.row(i);
        let xh = cache.xhat.row(i);
        let mean_g = g.sum() / d;
        let mean_gx = g.dot(&xh) / d;
        Zip::from(&mut dxr)
            .and(&g)
            .and(&xh)
            .for_each(|o, &gi, &xi| *o = cache.inv_std[i] * (gi - mean_g - xi * mean_gx));
    }
    dx
}

/// Two affine maps with a tanh between them.
#[derive(Debug, Clone, Copy)]
pub struct Ffn {
    pub inner: Affine,
    pub outer: Affine,
}

#[derive(Debug, Clone)]
pub struct FfnCache {
    x: Mat,
    h: Mat,
}

impl Ffn {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_hidden: usize, d_out: usize) -> Result<Self> {
        Ok(Self {
            inner: Affine::new(store, &format!("{name}.inner"), d_in, d_hidden)?,
            outer: Affine::new(store, &format!("{name}.outer"), d_hidden, d_out)?,
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Mat) -> Result<(Mat, FfnCache)> {
        let h = tanh_mat(&self.inner.forward(store, x)?);
        let y = self.outer.forward(store, &h)?;
        Ok((y, FfnCache { x: x.clone(), h }))
    }

    pub fn backward(&self, store: &mut ParamStore, cache: &FfnCache, dy: &Mat) -> Mat {
        let dh = self.outer.backward(store, &cache.h, dy);
        let dpre = tanh_backward(&cache.h, &dh);
        self.inner.backward(store, &cache.x, &dpre)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::gradcheck::{grad_check, GradCheckOptions};
    use ndarray::{array, Array2};

    #[test]
    fn identity_affine() {
        let mut s = ParamStore::new(0);
        let a = Affine::new(&mut s, "a", 3, 3).unwrap();
        *s.value_mut(a.w) = Array2::eye(3);
        let x = array![[1.0, -2.0, 3.5]];
        assert_eq!(a.forward(&s, &x).unwrap(), x);
        assert!(a.forward(&s, &array![[1.0, 2.0]]).is_err());
    }

    #[test]
    fn mean_output_bias_gradient() {
        let mut s = ParamStore::new(0);
        let a = Affine::new(&mut s, "a", 2, 4).unwrap();
        let x = array![[0.3, -0.1]];
        let y = a.forward(&s, &x).unwrap();
        let dy = Mat::from_elem(y.raw_dim(), 1.0 / 4.0);
        a.backward(&mut s, &x, &dy);
        for &g in s.grad(a.b) {
            assert_eq!(g, 0.25);
        }
    }

    #[test]
    fn affine_gradients_match_finite_differences() {
        let mut s = ParamStore::new(42);
        let a = Affine::new(&mut s, "a", 3, 4).unwrap();
        s.value_mut(a.b).mapv_inplace(|_| 0.1);
        let x = array![[0.5, -1.2, 0.7], [1.1, 0.2, -0.4]];
        let target = array![[0.1, 0.2, 0.3, 0.4], [-0.3, 0.0, 0.5, 1.0]];
        let report = grad_check(&mut s, &GradCheckOptions::default(), |s| {
            let y = a.forward(s, &x)?;
            let diff = &y - &target;
            let loss = 0.5 * diff.iter().map(|v| v * v).sum::<f64>();
            a.backward(s, &x, &diff);
            Ok(loss)
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let x = array![[1000.0, 1000.0], [-3.0, 2.0]];
        let y = softmax_rows(&x);
        for r in y.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
        assert_eq!(y[[0, 0]], 0.5);
    }

    #[test]
    fn activation_and_norm_gradients() {
        let mut s = ParamStore::new(3);
        let f = Ffn::new(&mut s, "f", 4, 6, 4).unwrap();
        let x = array![[0.2, -0.5, 1.0, 0.3], [0.9, 0.1, -0.7, 0.0]];
        let w = array![[0.3, -1.0, 0.5, 2.0], [1.0, 0.2, -0.1, 0.4]];
        let report = grad_check(&mut s, &GradCheckOptions::default(), |s| {
            let (h, fc) = f.forward(s, &x)?;
            let (y, lc) = layer_norm(&(&h + &x));
            let p = softmax_rows(&y);
            let sg = sigmoid_mat(&p);
            let loss = (&sg * &w).sum();
            let dsg = w.clone();
            let dp = sigmoid_backward(&sg, &dsg);
            let dy = softmax_rows_backward(&p, &dp);
            let dh = layer_norm_backward(&lc, &dy);
            f.backward(s, &fc, &dh);
            Ok(loss)
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }

    #[test]
    fn cross_entropy_matches_softmax_log() {
        let logits = array![[0.1, 2.0, -1.0], [0.0, 0.0, 0.0]];
        let (loss, grad) = cross_entropy_rows(&logits, &[1, 2]).unwrap();
        let p = softmax_rows(&logits);
        let expected = -p[[0, 1]].ln() - p[[1, 2]].ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((grad[[1, 2]] - (1.0 / 3.0 - 1.0)).abs() < 1e-12);
        assert!(cross_entropy_rows(&logits, &[0]).is_err());
    }
}
