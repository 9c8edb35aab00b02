use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::encoder::positional_encoding;
use crate::error::{Error, Result};
use crate::kernel::{
    layer_norm, layer_norm_backward, sigmoid_backward, sigmoid_mat, Affine, AttentionCache, CrossAttention, Ffn,
    FfnCache, LayerNormCache, Mat, ParamId, ParamStore,
};
use crate::temporal::{CenterWidth, Interval};

/// Narrowest interval the decoder will emit.
pub const MIN_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    pub d_m: usize,
    pub n_outputs: usize,
}

/// One decoded moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub se: Interval,
    pub cw: CenterWidth,
    pub attention: Vec<f64>,
}

/// Decoder outputs in rank order; output 0 is the single-positive head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet(pub Vec<Prediction>);

impl PredictionSet {
    pub fn intervals(&self) -> Vec<Interval> {
        self.0.iter().map(|p| p.se).collect()
    }
}

/// Differentiable decoder outputs.
#[derive(Debug, Clone)]
pub struct DecoderOutput {
    /// Ordered `(start, end)` per output, before the minimum-width fix.
    pub se: Mat,
    /// `(center, width)` per output.
    pub cw: Mat,
    /// Attention of each output over the clips (`N × T_v`).
    pub attention: Mat,
}

fn fix_interval(s: f64, e: f64) -> Interval {
    let (mut s, mut e) = (s.clamp(0.0, 1.0), e.clamp(0.0, 1.0));
    if e - s < MIN_WIDTH {
        let mid = (s + e) / 2.0;
        s = (mid - MIN_WIDTH / 2.0).clamp(0.0, 1.0 - MIN_WIDTH);
        e = s + MIN_WIDTH;
    }
    Interval::new(s, e).expect("ordered and clamped")
}

impl DecoderOutput {
    pub fn len(&self) -> usize {
        self.se.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.se.nrows() == 0
    }

    pub fn predictions(&self) -> PredictionSet {
        PredictionSet(
            (0..self.len())
                .map(|i| Prediction {
                    se: fix_interval(self.se[[i, 0]], self.se[[i, 1]]),
                    cw: CenterWidth::new(self.cw[[i, 0]], self.cw[[i, 1]].max(f64::MIN_POSITIVE))
                        .expect("sigmoid outputs are finite"),
                    attention: self.attention.row(i).to_vec(),
                })
                .collect(),
        )
    }
}

/// `N` learnable queries, shifted by the pooled query features, attend over
/// the clips and are read out by two sigmoid heads.
#[derive(Debug, Clone, Copy)]
pub struct Decoder {
    cfg: DecoderConfig,
    pub queries: ParamId,
    pub attend: CrossAttention,
    pub ffn: Ffn,
    pub se_head: Affine,
    pub cw_head: Affine,
}

#[derive(Debug, Clone)]
pub struct DecoderCache {
    t_l: usize,
    att: AttentionCache,
    ln1: LayerNormCache,
    ffn: FfnCache,
    ln2: LayerNormCache,
    e2: Mat,
    se_raw: Mat,
    cw_raw: Mat,
}

impl Decoder {
    pub fn new(store: &mut ParamStore, name: &str, cfg: DecoderConfig) -> Result<Self> {
        if cfg.n_outputs == 0 || cfg.d_m == 0 {
            return Err(Error::Config("decoder needs n_outputs and d_m >= 1".into()));
        }
        let d = cfg.d_m;
        Ok(Self {
            cfg,
            queries: store.add_uniform(format!("{name}.queries"), cfg.n_outputs, d, 1.0)?,
            attend: CrossAttention::new(store, &format!("{name}.attend"), d, d, d)?,
            ffn: Ffn::new(store, &format!("{name}.ffn"), d, 2 * d, d)?,
            se_head: Affine::new(store, &format!("{name}.se"), d, 2)?,
            cw_head: Affine::new(store, &format!("{name}.cw"), d, 2)?,
        })
    }

    pub fn config(&self) -> DecoderConfig {
        self.cfg
    }

    pub fn forward(&self, store: &ParamStore, video: &Mat, query: &Mat) -> Result<(DecoderOutput, DecoderCache)> {
        if query.nrows() == 0 {
            return Err(Error::EmptyQuery);
        }
        let pooled = query.mean_axis(Axis(0)).expect("nonempty");
        let e0 = store.value(self.queries) + &pooled;
        // position is re-injected into the memory so the attended value says where it looked
        let memory = video + &positional_encoding(video.nrows(), self.cfg.d_m);
        let (att, att_cache) = self.attend.forward(store, &e0, &memory)?;
        let (e1, ln1) = layer_norm(&(&e0 + &att.output));
        let (h, ffn) = self.ffn.forward(store, &e1)?;
        let (e2, ln2) = layer_norm(&(&e1 + &h));
        let se_raw = sigmoid_mat(&self.se_head.forward(store, &e2)?);
        let cw_raw = sigmoid_mat(&self.cw_head.forward(store, &e2)?);

        let mut se = se_raw.clone();
        for mut r in se.rows_mut() {
            if r[0] > r[1] {
                r.swap(0, 1);
            }
        }
        Ok((
            DecoderOutput {
                se,
                cw: cw_raw.clone(),
                attention: att.coefficients,
            },
            DecoderCache {
                t_l: query.nrows(),
                att: att_cache,
                ln1,
                ffn,
                ln2,
                e2,
                se_raw,
                cw_raw,
            },
        ))
    }

    /// Takes gradients wrt the ordered `se`, `cw` and attention, returns
    /// gradients wrt `(video, query)`.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &DecoderCache,
        d_se: &Mat,
        d_cw: &Mat,
        d_attention: &Mat,
    ) -> (Mat, Mat) {
        let mut d_se_raw = d_se.clone();
        for (i, mut r) in d_se_raw.rows_mut().into_iter().enumerate() {
            if cache.se_raw[[i, 0]] > cache.se_raw[[i, 1]] {
                r.swap(0, 1);
            }
        }
        let dz_se = sigmoid_backward(&cache.se_raw, &d_se_raw);
        let dz_cw = sigmoid_backward(&cache.cw_raw, d_cw);
        let de2 = self.se_head.backward(store, &cache.e2, &dz_se) + self.cw_head.backward(store, &cache.e2, &dz_cw);
        let dsum2 = layer_norm_backward(&cache.ln2, &de2);
        let de1 = &dsum2 + &self.ffn.backward(store, &cache.ffn, &dsum2);
        let dsum1 = layer_norm_backward(&cache.ln1, &de1);
        let (dq_att, dv) = self.attend.backward(store, &cache.att, &dsum1, Some(d_attention));
        let de0 = &dsum1 + &dq_att;
        *store.grad_mut(self.queries) += &de0;
        let d_pool = de0.sum_axis(Axis(0)) / cache.t_l as f64;
        let dq = Mat::from_shape_fn((cache.t_l, self.cfg.d_m), |(_, j)| d_pool[j]);
        (dv, dq)
    }
}
