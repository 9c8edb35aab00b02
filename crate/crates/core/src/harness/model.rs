use serde_json::json;

use super::config::RunConfig;
use crate::dmr::{
    dmr_loss, hungarian_match, Decoder, DecoderConfig, Encoder, EncoderConfig, MatchAssignment, PredictionSet,
};
use crate::error::{Error, Result};
use crate::kernel::{Checkpoint, Mat, ParamStore};
use crate::lattice::{assign_single_positive, build_lattice, ProposalSet};
use crate::pme::{
    assume_negative_bce, augment_interval_features, epr_loss, estimate_positives, mean_interval_feature,
    semantic_scores, EstimateParams, Generator, GeneratorConfig, MatchHead, MatchScores, ProposalPooling,
    PseudoLabelSet, SemanticScores,
};
use crate::rng::Rng;
use crate::synth::{TrainSample, Vocabulary};

/// Loss components of one sample (unweighted by batch size).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepLosses {
    pub matching: f64,
    pub semantic: f64,
    pub pme: f64,
    pub dmr: f64,
    pub total: f64,
    pub score_sum: f64,
    pub pseudo_used: usize,
}

/// The full model: shared encoder, PME heads and the DMR decoder, all in
/// one parameter store.
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: RunConfig,
    pub store: ParamStore,
    pub vocab: Vocabulary,
    pub encoder: Encoder,
    pub head: MatchHead,
    pub generator: Generator,
    pub decoder: Decoder,
    pub set: ProposalSet,
    pub pooling: ProposalPooling,
}

impl Model {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let vocab = Vocabulary::standard();
        let m = &cfg.model;
        let mut store = ParamStore::new(cfg.seed);
        let encoder = Encoder::new(
            &mut store,
            "encoder",
            EncoderConfig {
                d_v: cfg.data.d_v,
                vocab: vocab.len(),
                d_l: m.d_l,
                d_m: m.d_m,
                layers: m.layers,
            },
        )?;
        let head = MatchHead::new(&mut store, "match", 3 * m.d_m, m.match_hidden)?;
        let generator = Generator::new(
            &mut store,
            "generator",
            cfg.data.d_v,
            m.gen_hidden,
            GeneratorConfig {
                vocab: vocab.len(),
                t_s: m.t_s,
                n_s: m.n_s,
            },
        )?;
        let decoder = Decoder::new(
            &mut store,
            "decoder",
            DecoderConfig {
                d_m: m.d_m,
                n_outputs: m.n_outputs,
            },
        )?;
        let set = build_lattice(m.lattice, m.lattice_base)?;
        let pooling = ProposalPooling::new(&set, cfg.data.t_v)?;
        Ok(Self {
            cfg: cfg.clone(),
            store,
            vocab,
            encoder,
            head,
            generator,
            decoder,
            set,
            pooling,
        })
    }

    pub fn tokens(&self, s: &TrainSample) -> Result<Vec<usize>> {
        s.query.iter().map(|t| self.vocab.index_of(&t.tok)).collect()
    }

    /// Reconstruction targets: the query's verbs and nouns in order.
    pub fn targets(&self, s: &TrainSample) -> Result<Vec<usize>> {
        s.content_words().into_iter().map(|t| self.vocab.index_of(t)).collect()
    }

    fn check_sample(&self, s: &TrainSample) -> Result<()> {
        let want = (self.cfg.data.t_v, self.cfg.data.d_v);
        if s.clips.dim() != want {
            return Err(Error::ShapeMismatch {
                op: "sample",
                expected: format!("{want:?} clips"),
                got: format!("{:?} in `{}`", s.clips.dim(), s.id),
            });
        }
        Ok(())
    }

    fn estimate_params(&self) -> EstimateParams {
        EstimateParams {
            t_thresh: self.cfg.estimate.t_thresh,
            nms_thresh: self.cfg.estimate.nms_thresh,
            n_outputs: self.cfg.model.n_outputs,
        }
    }

    /// Forward and backward for one sample; gradients are scaled by
    /// `weight` and added to the store.
    ///
    /// `pseudo` is the sample's pseudo-label set from the previous epoch;
    /// `None` trains the decoder on the observed moment alone.
    pub fn accumulate(
        &mut self,
        s: &TrainSample,
        pseudo: Option<&PseudoLabelSet>,
        aug_rng: &mut Rng,
        weight: f64,
    ) -> Result<StepLosses> {
        self.check_sample(s)?;
        let ab = self.cfg.ablation.clone();
        let lc = self.cfg.loss.clone();
        let tokens = self.tokens(s)?;
        let (enc, enc_cache) = self.encoder.forward(&self.store, &s.clips, &tokens)?;
        let mut d_video = Mat::zeros(enc.video.raw_dim());
        let mut out = StepLosses::default();

        if !ab.no_matching {
            let feats = self.pooling.forward(&enc.video)?;
            let (scores, cache) = self.head.forward(&self.store, &feats)?;
            let labels = assign_single_positive(&self.set, &s.observed)?;
            let (loss, grad) = if ab.no_epr {
                assume_negative_bce(&scores.0, &labels)?
            } else {
                epr_loss(&scores.0, &labels, self.cfg.k(), lc.gamma1)?
            };
            let grad: Vec<f64> = grad.into_iter().map(|g| g * weight).collect();
            let d_feats = self.head.backward(&mut self.store, &cache, &grad);
            d_video += &self.pooling.backward(&d_feats);
            out.matching = loss;
            out.score_sum = scores.sum();
        }

        if !ab.no_reconstruction {
            let feats = if ab.no_augmenting {
                mean_interval_feature(&s.clips, &s.observed)?
            } else {
                augment_interval_features(&s.clips, &s.observed, self.cfg.model.n_s, aug_rng)?
            };
            let targets = self.targets(s)?;
            let (loss, cache) = self.generator.reconstruct_loss(&self.store, &feats, &targets)?;
            self.generator.backward(&mut self.store, &cache, weight * lc.gamma2);
            out.semantic = loss;
        }

        let (dec, dec_cache) = self.decoder.forward(&self.store, &enc.video, &enc.query)?;
        let empty = Vec::new();
        let pseudo_iv = pseudo.map_or(&empty, |p| &p.intervals);
        let assignment = if pseudo_iv.is_empty() || lc.lambda == 0.0 {
            MatchAssignment::empty()
        } else {
            hungarian_match(pseudo_iv, &dec.se, &dec.cw)?
        };
        let dl = dmr_loss(&dec, &s.observed, pseudo_iv, &assignment, lc.lambda)?;
        let (dv, dq) = self.decoder.backward(
            &mut self.store,
            &dec_cache,
            &(&dl.grads.se * weight),
            &(&dl.grads.cw * weight),
            &(&dl.grads.attention * weight),
        );
        d_video += &dv;
        self.encoder.backward(&mut self.store, &enc_cache, &d_video, &dq);

        out.dmr = dl.total;
        out.pseudo_used = assignment.pairs.len();
        out.pme = out.matching + lc.gamma2 * out.semantic;
        out.total = out.pme + out.dmr;
        Ok(out)
    }

    pub fn match_scores(&self, s: &TrainSample) -> Result<MatchScores> {
        self.check_sample(s)?;
        let (enc, _) = self.encoder.forward(&self.store, &s.clips, &self.tokens(s)?)?;
        let feats = self.pooling.forward(&enc.video)?;
        Ok(self.head.forward(&self.store, &feats)?.0)
    }

    pub fn semantic_scores(&self, s: &TrainSample) -> Result<SemanticScores> {
        self.check_sample(s)?;
        let pooled = self.pooling.inside().dot(&s.clips);
        semantic_scores(
            &self.generator,
            &self.store,
            &pooled,
            &s.clips,
            &s.observed,
            self.cfg.estimate.semantic_reference,
            &self.targets(s)?,
        )
    }

    /// Pseudo-positive moments for one sample under the current weights.
    pub fn estimate(&self, s: &TrainSample, epoch: usize) -> Result<PseudoLabelSet> {
        let ab = &self.cfg.ablation;
        let m = if ab.no_matching { None } else { Some(self.match_scores(s)?) };
        let sem = if ab.no_reconstruction {
            None
        } else {
            Some(self.semantic_scores(s)?)
        };
        estimate_positives(
            m.as_ref().map(|x| x.0.as_slice()),
            sem.as_ref().map(|x| x.0.as_slice()),
            &self.set,
            &self.estimate_params(),
            epoch,
        )
    }

    pub fn predict(&self, s: &TrainSample) -> Result<PredictionSet> {
        self.check_sample(s)?;
        let (enc, _) = self.encoder.forward(&self.store, &s.clips, &self.tokens(s)?)?;
        Ok(self.decoder.forward(&self.store, &enc.video, &enc.query)?.0.predictions())
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        Ok(self.store.to_checkpoint(json!({
            "config": self.cfg.to_toml_string()?,
            "vocab": self.vocab.tokens(),
        })))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let text = ckpt
            .meta
            .get("config")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Checkpoint("missing embedded config".into()))?;
        let cfg = RunConfig::from_toml_str(text)?;
        let mut model = Model::new(&cfg)?;
        if let Some(v) = ckpt.meta.get("vocab") {
            let toks: Vec<String> = serde_json::from_value(v.clone())?;
            if toks != model.vocab.tokens() {
                return Err(Error::Checkpoint("vocabulary differs from this build".into()));
            }
        }
        model.store.load_checkpoint(ckpt)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{grad_check, GradCheckOptions};
    use crate::rng::rng_for;
    use crate::synth::{gen_dataset, GenConfig};

    pub(crate) fn tiny_cfg() -> RunConfig {
        let mut c = RunConfig::default();
        c.data = GenConfig {
            samples: 6,
            t_v: 8,
            d_v: 4,
            min_len: 1,
            max_len: 2,
            gap: 1,
            max_positives: 2,
            ..GenConfig::default()
        };
        c.model.d_m = 4;
        c.model.d_l = 3;
        c.model.lattice = 4;
        c.model.match_hidden = 3;
        c.model.gen_hidden = 3;
        c.model.n_outputs = 3;
        c.model.n_s = 2;
        c
    }

    #[test]
    fn whole_model_gradients() {
        let cfg = tiny_cfg();
        let data = gen_dataset(&cfg.data, 2).unwrap().training_views();
        let mut model = Model::new(&cfg).unwrap();
        let s = &data[0];
        let pseudo = PseudoLabelSet {
            intervals: vec![
                crate::temporal::Interval::new(0.5, 0.75).unwrap(),
                crate::temporal::Interval::new(0.0, 0.25).unwrap(),
            ],
            scores: vec![(None, None); 2],
            epoch: 1,
        };
        let opts = GradCheckOptions {
            max_coords_per_param: Some(6),
            ..Default::default()
        };
        let mut store = model.store.clone();
        let r = grad_check(&mut store, &opts, |st| {
            std::mem::swap(&mut model.store, st);
            let res = model.accumulate(s, Some(&pseudo), &mut rng_for(0, 3, 0), 1.0);
            std::mem::swap(&mut model.store, st);
            Ok(res?.total)
        })
        .unwrap();
        assert!(r.max_rel_err < 1e-4, "{r:?}");
    }

    #[test]
    fn checkpoint_restores_predictions() {
        let cfg = tiny_cfg();
        let data = gen_dataset(&cfg.data, 2).unwrap().training_views();
        let model = Model::new(&cfg).unwrap();
        let back = Model::from_checkpoint(&model.checkpoint().unwrap()).unwrap();
        assert_eq!(model.predict(&data[1]).unwrap(), back.predict(&data[1]).unwrap());
    }

    #[test]
    fn joint_loss_is_additive() {
        let cfg = tiny_cfg();
        let data = gen_dataset(&cfg.data, 2).unwrap().training_views();
        let mut model = Model::new(&cfg).unwrap();
        let l = model.accumulate(&data[2], None, &mut rng_for(0, 3, 0), 1.0).unwrap();
        assert_eq!(l.total, l.matching + cfg.loss.gamma2 * l.semantic + l.dmr);
        assert_eq!(l.pseudo_used, 0);
    }
}
