use ndarray::{Array1, Axis};

use crate::error::{Error, Result};
use crate::kernel::{cross_entropy_rows, tanh_backward, tanh_mat, Affine, Mat, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub vocab: usize,
    /// Emission steps at decode time.
    pub t_s: usize,
    /// Augmented features per labelled moment.
    pub n_s: usize,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab == 0 || self.t_s == 0 || self.n_s == 0 {
            return Err(Error::Config("generator needs vocab, t_s and n_s >= 1".into()));
        }
        Ok(())
    }
}

/// Step-wise word emitter conditioned on a moment feature:
/// `h0 = A f`, `h_t = tanh(R h_{t-1} + E[x_{t-1}] W)`, `p_t = softmax(O h_t)`.
/// Token `vocab` is the begin-of-sequence marker fed at step one.
#[derive(Debug, Clone, Copy)]
pub struct Generator {
    pub init: Affine,
    pub rec: Affine,
    pub embed: ParamId,
    pub input: ParamId,
    pub out: Affine,
    cfg: GeneratorConfig,
}

#[derive(Debug, Clone)]
pub struct GeneratorCache {
    f: Mat,
    /// `hs[0]` is h0; `hs[t + 1]` is the state emitting token `t`.
    hs: Vec<Mat>,
    prev: Vec<usize>,
    dlogits: Vec<Mat>,
}

impl Generator {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, d_h: usize, cfg: GeneratorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            init: Affine::new(store, &format!("{name}.init"), d_in, d_h)?,
            rec: Affine::new(store, &format!("{name}.rec"), d_h, d_h)?,
            embed: store.add_uniform(format!("{name}.embed"), cfg.vocab + 1, d_h, 0.5)?,
            input: store.add_xavier(format!("{name}.input"), d_h, d_h)?,
            out: Affine::new(store, &format!("{name}.out"), d_h, cfg.vocab)?,
            cfg,
        })
    }

    pub fn config(&self) -> GeneratorConfig {
        self.cfg
    }

    fn bos(&self) -> usize {
        self.cfg.vocab
    }

    fn step(&self, store: &ParamStore, h: &Mat, prev: usize) -> Result<Mat> {
        let e = store.value(self.embed).row(prev).dot(store.value(self.input));
        Ok(tanh_mat(&(self.rec.forward(store, h)? + &e)))
    }

    /// Mean negative log-likelihood of `targets` per feature row and step,
    /// under teacher forcing.
    pub fn reconstruct_loss(&self, store: &ParamStore, features: &Mat, targets: &[usize]) -> Result<(f64, GeneratorCache)> {
        if targets.is_empty() {
            return Err(Error::InvalidArgument("reconstruction needs at least one target".into()));
        }
        if features.nrows() == 0 {
            return Err(Error::InvalidArgument("reconstruction needs at least one feature".into()));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= self.cfg.vocab) {
            return Err(Error::UnknownToken(format!("token id {bad}")));
        }
        let b = features.nrows();
        let norm = 1.0 / (b * targets.len()) as f64;
        let mut hs = vec![self.init.forward(store, features)?];
        let mut prev = Vec::with_capacity(targets.len());
        let mut dlogits = Vec::with_capacity(targets.len());
        let mut loss = 0.0;
        for (t, &tgt) in targets.iter().enumerate() {
            let p = if t == 0 { self.bos() } else { targets[t - 1] };
            let h = self.step(store, &hs[t], p)?;
            let logits = self.out.forward(store, &h)?;
            let (l, g) = cross_entropy_rows(&logits, &vec![tgt; b])?;
            loss += l * norm;
            dlogits.push(g * norm);
            prev.push(p);
            hs.push(h);
        }
        Ok((
            loss,
            GeneratorCache {
                f: features.clone(),
                hs,
                prev,
                dlogits,
            },
        ))
    }

    /// Backpropagates the reconstruction loss (scaled by `weight`).
    pub fn backward(&self, store: &mut ParamStore, cache: &GeneratorCache, weight: f64) -> Mat {
        let steps = cache.dlogits.len();
        let mut dh_next = Mat::zeros(cache.hs[0].raw_dim());
        for t in (0..steps).rev() {
            let h = &cache.hs[t + 1];
            let mut dh = self.out.backward(store, h, &(&cache.dlogits[t] * weight));
            dh += &dh_next;
            let dpre = tanh_backward(h, &dh);
            let dsum = dpre.sum_axis(Axis(0));
            let e = store.value(self.embed).row(cache.prev[t]).to_owned();
            let d_input = outer(&e, &dsum);
            *store.grad_mut(self.input) += &d_input;
            let d_e = store.value(self.input).dot(&dsum);
            let mut row = store.grad_mut(self.embed).row_mut(cache.prev[t]).to_owned();
            row += &d_e;
            store.grad_mut(self.embed).row_mut(cache.prev[t]).assign(&row);
            dh_next = self.rec.backward(store, &cache.hs[t], &dpre);
        }
        self.init.backward(store, &cache.f, &dh_next)
    }

    /// Greedy decode of `t_s` token ids for each feature row. Ties go to
    /// the lowest token id.
    pub fn decode(&self, store: &ParamStore, features: &Mat) -> Result<Vec<Vec<usize>>> {
        let mut out = vec![Vec::with_capacity(self.cfg.t_s); features.nrows()];
        let mut h = self.init.forward(store, features)?;
        let mut prev = vec![self.bos(); features.nrows()];
        for _ in 0..self.cfg.t_s {
            let e = store.value(self.embed).select(Axis(0), &prev).dot(store.value(self.input));
            h = tanh_mat(&(self.rec.forward(store, &h)? + &e));
            let logits = self.out.forward(store, &h)?;
            for (r, row) in logits.rows().into_iter().enumerate() {
                let best = argmax(row.iter().copied());
                out[r].push(best);
                prev[r] = best;
            }
        }
        Ok(out)
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Mat {
    a.view().insert_axis(Axis(1)).dot(&b.view().insert_axis(Axis(0)))
}

fn argmax(xs: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in xs.enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}
