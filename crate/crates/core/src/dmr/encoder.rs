use ndarray::Axis;

use crate::error::{Error, Result};
use crate::kernel::{
    layer_norm, layer_norm_backward, AttentionCache, CrossAttention, Affine, Ffn, FfnCache, LayerNormCache, Mat,
    ParamId, ParamStore,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub d_v: usize,
    pub vocab: usize,
    pub d_l: usize,
    pub d_m: usize,
    pub layers: usize,
}

/// Fixed sinusoidal position table.
pub fn positional_encoding(len: usize, d: usize) -> Mat {
    Mat::from_shape_fn((len, d), |(t, i)| {
        let rate = 10_000f64.powf((2 * (i / 2)) as f64 / d as f64);
        let a = t as f64 / rate;
        if i % 2 == 0 {
            a.sin()
        } else {
            a.cos()
        }
    })
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    v2q: CrossAttention,
    q2v: CrossAttention,
    ffn_v: Ffn,
    ffn_q: Ffn,
}

/// Video and query encoders joined by rounds of bidirectional
/// cross-attention, each followed by a feed-forward block. Every sub-block
/// is residual and layer-normalised.
#[derive(Debug, Clone)]
pub struct Encoder {
    cfg: EncoderConfig,
    video_proj: Affine,
    embed: ParamId,
    token_proj: Affine,
    layers: Vec<Layer>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    av: AttentionCache,
    aq: AttentionCache,
    ln_v1: LayerNormCache,
    ln_q1: LayerNormCache,
    fv: FfnCache,
    fq: FfnCache,
    ln_v2: LayerNormCache,
    ln_q2: LayerNormCache,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    clips: Mat,
    tokens: Vec<usize>,
    embedded: Mat,
    layers: Vec<LayerCache>,
}

/// Rows are clips (`T_v × d_m`) and tokens (`T_l × d_m`).
#[derive(Debug, Clone)]
pub struct Encoded {
    pub video: Mat,
    pub query: Mat,
}

impl Encoder {
    pub fn new(store: &mut ParamStore, name: &str, cfg: EncoderConfig) -> Result<Self> {
        if cfg.d_m == 0 || cfg.vocab == 0 {
            return Err(Error::Config("encoder dims must be positive".into()));
        }
        let d = cfg.d_m;
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            layers.push(Layer {
                v2q: CrossAttention::new(store, &format!("{name}.l{l}.v2q"), d, d, d)?,
                q2v: CrossAttention::new(store, &format!("{name}.l{l}.q2v"), d, d, d)?,
                ffn_v: Ffn::new(store, &format!("{name}.l{l}.ffn_v"), d, 2 * d, d)?,
                ffn_q: Ffn::new(store, &format!("{name}.l{l}.ffn_q"), d, 2 * d, d)?,
            });
        }
        Ok(Self {
            cfg,
            video_proj: Affine::new(store, &format!("{name}.video_proj"), cfg.d_v, d)?,
            embed: store.add_uniform(format!("{name}.embed"), cfg.vocab, cfg.d_l, 0.5)?,
            token_proj: Affine::new(store, &format!("{name}.token_proj"), cfg.d_l, d)?,
            layers,
        })
    }

    pub fn config(&self) -> EncoderConfig {
        self.cfg
    }

    pub fn forward(&self, store: &ParamStore, clips: &Mat, tokens: &[usize]) -> Result<(Encoded, EncoderCache)> {
        if tokens.is_empty() {
            return Err(Error::EmptyQuery);
        }
        if clips.nrows() == 0 {
            return Err(Error::EmptyKeys);
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.cfg.vocab) {
            return Err(Error::UnknownToken(format!("token id {bad}")));
        }
        let d = self.cfg.d_m;
        let embedded = store.value(self.embed).select(Axis(0), tokens);
        let mut v = self.video_proj.forward(store, clips)? + positional_encoding(clips.nrows(), d);
        let mut q = self.token_proj.forward(store, &embedded)? + positional_encoding(tokens.len(), d);

        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (ov, av) = layer.v2q.forward(store, &v, &q)?;
            let (oq, aq) = layer.q2v.forward(store, &q, &v)?;
            let (v1, ln_v1) = layer_norm(&(&v + &ov.output));
            let (q1, ln_q1) = layer_norm(&(&q + &oq.output));
            let (hv, fv) = layer.ffn_v.forward(store, &v1)?;
            let (hq, fq) = layer.ffn_q.forward(store, &q1)?;
            let (v2, ln_v2) = layer_norm(&(&v1 + &hv));
            let (q2, ln_q2) = layer_norm(&(&q1 + &hq));
            caches.push(LayerCache {
                av,
                aq,
                ln_v1,
                ln_q1,
                fv,
                fq,
                ln_v2,
                ln_q2,
            });
            v = v2;
            q = q2;
        }
        Ok((
            Encoded { video: v, query: q },
            EncoderCache {
                clips: clips.clone(),
                tokens: tokens.to_vec(),
                embedded,
                layers: caches,
            },
        ))
    }

    pub fn backward(&self, store: &mut ParamStore, cache: &EncoderCache, d_video: &Mat, d_query: &Mat) {
        let mut dv = d_video.clone();
        let mut dq = d_query.clone();
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            let dv_sum2 = layer_norm_backward(&c.ln_v2, &dv);
            let dq_sum2 = layer_norm_backward(&c.ln_q2, &dq);
            let dv1 = &dv_sum2 + &layer.ffn_v.backward(store, &c.fv, &dv_sum2);
            let dq1 = &dq_sum2 + &layer.ffn_q.backward(store, &c.fq, &dq_sum2);
            let dv_sum1 = layer_norm_backward(&c.ln_v1, &dv1);
            let dq_sum1 = layer_norm_backward(&c.ln_q1, &dq1);
            // v + attend(v -> q) and q + attend(q -> v)
            let (dv_from_v2q, dq_from_v2q) = layer.v2q.backward(store, &c.av, &dv_sum1, None);
            let (dq_from_q2v, dv_from_q2v) = layer.q2v.backward(store, &c.aq, &dq_sum1, None);
            dv = &dv_sum1 + &dv_from_v2q + &dv_from_q2v;
            dq = &dq_sum1 + &dq_from_v2q + &dq_from_q2v;
        }
        self.video_proj.backward(store, &cache.clips, &dv);
        let d_emb = self.token_proj.backward(store, &cache.embedded, &dq);
        let g = store.grad_mut(self.embed);
        for (r, &t) in cache.tokens.iter().enumerate() {
            let mut row = g.row_mut(t);
            row += &d_emb.row(r);
        }
    }
}
