use super::ops::{softmax_rows, softmax_rows_backward, Affine};
use super::params::{Mat, ParamStore};
use crate::error::{Error, Result};

/// Single-head scaled dot-product attention from one sequence onto another.
#[derive(Debug, Clone, Copy)]
pub struct CrossAttention {
    pub q: Affine,
    pub k: Affine,
    pub v: Affine,
    d_m: usize,
}

/// Attended features and the row-stochastic coefficient matrix
/// (`queries × keys`).
#[derive(Debug, Clone)]
pub struct AttentionOut {
    pub output: Mat,
    pub coefficients: Mat,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    queries: Mat,
    kv: Mat,
    qp: Mat,
    kp: Mat,
    vp: Mat,
    coeff: Mat,
}

impl CrossAttention {
    pub fn new(store: &mut ParamStore, name: &str, d_query: usize, d_kv: usize, d_m: usize) -> Result<Self> {
        Ok(Self {
            q: Affine::new(store, &format!("{name}.q"), d_query, d_m)?,
            k: Affine::new(store, &format!("{name}.k"), d_kv, d_m)?,
            v: Affine::new(store, &format!("{name}.v"), d_kv, d_m)?,
            d_m,
        })
    }

    pub fn d_m(&self) -> usize {
        self.d_m
    }

    pub fn forward(&self, store: &ParamStore, queries: &Mat, kv: &Mat) -> Result<(AttentionOut, AttentionCache)> {
        if kv.nrows() == 0 {
            return Err(Error::EmptyKeys);
        }
        let qp = self.q.forward(store, queries)?;
        let kp = self.k.forward(store, kv)?;
        let vp = self.v.forward(store, kv)?;
        let scale = 1.0 / (self.d_m as f64).sqrt();
        let scores = qp.dot(&kp.t()) * scale;
        let coeff = softmax_rows(&scores);
        let output = coeff.dot(&vp);
        let out = AttentionOut {
            output,
            coefficients: coeff.clone(),
        };
        let cache = AttentionCache {
            queries: queries.clone(),
            kv: kv.clone(),
            qp,
            kp,
            vp,
            coeff,
        };
        Ok((out, cache))
    }

    /// `d_coeff` carries any loss that reads the coefficients directly.
    /// Returns gradients for `(queries, kv)`.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &AttentionCache,
        d_output: &Mat,
        d_coeff: Option<&Mat>,
    ) -> (Mat, Mat) {
        let scale = 1.0 / (self.d_m as f64).sqrt();
        let mut da = d_output.dot(&cache.vp.t());
        if let Some(dc) = d_coeff {
            da += dc;
        }
        let dvp = cache.coeff.t().dot(d_output);
        let ds = softmax_rows_backward(&cache.coeff, &da) * scale;
        let dqp = ds.dot(&cache.kp);
        let dkp = ds.t().dot(&cache.qp);

        let dq = self.q.backward(store, &cache.queries, &dqp);
        let mut dkv = self.k.backward(store, &cache.kv, &dkp);
        dkv += &self.v.backward(store, &cache.kv, &dvp);
        (dq, dkv)
    }
}
