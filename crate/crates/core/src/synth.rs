//! Synthetic multi-positive grounding benchmark.
//!
//! Each video plants one event template at several disjoint places (the
//! hidden full label set) plus optional distractor events from other
//! templates. The learner only ever sees one of the planted instances.
//! Clip features are prototype-plus-Gaussian-noise; annotated boundaries are
//! jittered around the planted clips.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ProposalSet;
use crate::rng::{self, rng_for, Rng};
use crate::temporal::Interval;

const NOUNS: &[&str] = &[
    "door", "cup", "book", "phone", "bag", "towel", "shoe", "box", "laptop", "sandwich",
];
const VERBS: &[&str] = &[
    "open", "close", "hold", "take", "put", "wash", "throw", "eat", "watch",
];
const OTHERS: &[&str] = &[
    "the", "a", "person", "then", "slowly", "quickly", "again", "someone", "in", "room",
];
/// (verb, noun) pairs; neighbours share a verb or a noun on purpose.
const TEMPLATES: &[(&str, &str)] = &[
    ("open", "door"),
    ("close", "door"),
    ("open", "bag"),
    ("hold", "cup"),
    ("wash", "cup"),
    ("take", "book"),
    ("put", "book"),
    ("hold", "phone"),
    ("throw", "towel"),
    ("wash", "towel"),
    ("take", "shoe"),
    ("put", "box"),
    ("close", "box"),
    ("eat", "sandwich"),
    ("watch", "laptop"),
    ("close", "laptop"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryToken {
    pub tok: String,
    pub pos: PosTag,
}

/// Token inventory shared by every generated dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    nouns: Vec<String>,
    verbs: Vec<String>,
    templates: Vec<(String, String)>,
}

impl Vocabulary {
    pub fn standard() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let mut tokens = owned(NOUNS);
        tokens.extend(owned(VERBS));
        tokens.extend(owned(OTHERS));
        Self {
            tokens,
            nouns: owned(NOUNS),
            verbs: owned(VERBS),
            templates: TEMPLATES
                .iter()
                .map(|(v, n)| (v.to_string(), n.to_string()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn nouns(&self) -> &[String] {
        &self.nouns
    }

    pub fn verbs(&self) -> &[String] {
        &self.verbs
    }

    pub fn templates(&self) -> &[(String, String)] {
        &self.templates
    }

    pub fn index_of(&self, tok: &str) -> Result<usize> {
        self.tokens
            .iter()
            .position(|t| t == tok)
            .ok_or_else(|| Error::UnknownToken(tok.to_string()))
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }
}

fn default_samples() -> usize {
    500
}
fn default_t_v() -> usize {
    32
}
fn default_d_v() -> usize {
    16
}
fn default_min_positives() -> usize {
    1
}
fn default_max_positives() -> usize {
    5
}
fn default_min_len() -> usize {
    2
}
fn default_max_len() -> usize {
    6
}
fn default_gap() -> usize {
    2
}
fn default_noise() -> f64 {
    0.8
}
fn default_jitter() -> f64 {
    1.0
}
fn default_distractors() -> usize {
    1
}
fn default_filler_tokens() -> usize {
    2
}
fn default_templates() -> usize {
    12
}

/// Generator settings. Lengths and jitter are in clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_t_v")]
    pub t_v: usize,
    #[serde(default = "default_d_v")]
    pub d_v: usize,
    #[serde(default = "default_min_positives")]
    pub min_positives: usize,
    /// `G_max`.
    #[serde(default = "default_max_positives")]
    pub max_positives: usize,
    #[serde(default = "default_min_len")]
    pub min_len: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    /// Minimum number of background clips between two planted events.
    #[serde(default = "default_gap")]
    pub gap: usize,
    /// Standard deviation of per-component feature noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Maximum annotation boundary shift.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Maximum number of events from other templates per video.
    #[serde(default = "default_distractors")]
    pub distractors: usize,
    #[serde(default = "default_filler_tokens")]
    pub filler_tokens: usize,
    #[serde(default = "default_templates")]
    pub templates: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            t_v: default_t_v(),
            d_v: default_d_v(),
            min_positives: default_min_positives(),
            max_positives: default_max_positives(),
            min_len: default_min_len(),
            max_len: default_max_len(),
            gap: default_gap(),
            noise: default_noise(),
            jitter: default_jitter(),
            distractors: default_distractors(),
            filler_tokens: default_filler_tokens(),
            templates: default_templates(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.t_v == 0 || self.d_v == 0 {
            return bad("t_v and d_v must be >= 1");
        }
        if self.min_positives == 0 || self.min_positives > self.max_positives {
            return bad("need 1 <= min_positives <= max_positives");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad("need 1 <= min_len <= max_len");
        }
        if self.templates == 0 || self.templates > TEMPLATES.len() {
            return bad(&format!("templates must be in 1..={}", TEMPLATES.len()));
        }
        if self.distractors > 0 && self.templates < 2 {
            return bad("distractors need at least two templates");
        }
        if !(self.noise >= 0.0) || !(self.jitter >= 0.0) {
            return bad("noise and jitter must be non-negative");
        }
        Ok(())
    }

    pub fn mean_positives(&self) -> f64 {
        0.5 * (self.min_positives + self.max_positives) as f64
    }
}

/// One video-query pair together with its hidden full label set.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `T_v × d_v`.
    pub clips: Array2<f64>,
    pub query: Vec<QueryToken>,
    pub full_positives: Vec<Interval>,
    pub observed: Interval,
    pub template: Option<usize>,
}

/// What training code is allowed to see: no full label set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub id: String,
    pub clips: Array2<f64>,
    pub query: Vec<QueryToken>,
    pub observed: Interval,
}

impl Sample {
    pub fn training_view(&self) -> TrainSample {
        TrainSample {
            id: self.id.clone(),
            clips: self.clips.clone(),
            query: self.query.clone(),
            observed: self.observed,
        }
    }
}

impl TrainSample {
    /// Query nouns and verbs in order; the reconstruction targets.
    pub fn content_words(&self) -> Vec<&str> {
        self.query
            .iter()
            .filter(|t| t.pos != PosTag::Other)
            .map(|t| t.tok.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub config: GenConfig,
    pub seed: u64,
}

impl Dataset {
    pub fn training_views(&self) -> Vec<TrainSample> {
        self.samples.iter().map(Sample::training_view).collect()
    }
}

struct Prototypes {
    background: Vec<f64>,
    events: Vec<Vec<f64>>,
}

fn gaussian_vec(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn prototypes(cfg: &GenConfig, seed: u64) -> Prototypes {
    let mut rng = rng_for(seed, rng::stream::VOCAB, 0);
    let background = gaussian_vec(&mut rng, cfg.d_v);
    let verbs: Vec<Vec<f64>> = VERBS.iter().map(|_| gaussian_vec(&mut rng, cfg.d_v)).collect();
    let nouns: Vec<Vec<f64>> = NOUNS.iter().map(|_| gaussian_vec(&mut rng, cfg.d_v)).collect();
    let events = TEMPLATES
        .iter()
        .map(|(v, n)| {
            let vi = VERBS.iter().position(|x| x == v).unwrap();
            let ni = NOUNS.iter().position(|x| x == n).unwrap();
            verbs[vi]
                .iter()
                .zip(&nouns[ni])
                .map(|(a, b)| (a + b) * std::f64::consts::FRAC_1_SQRT_2)
                .collect()
        })
        .collect();
    Prototypes { background, events }
}

/// Planted event in clip units, `[start, end)`.
#[derive(Debug, Clone, Copy)]
struct Placement {
    start: usize,
    len: usize,
    template: usize,
    target: bool,
}

fn pack(cfg: &GenConfig, rng: &mut Rng, template: usize) -> Result<Vec<Placement>> {
    let n_pos = rng.random_range(cfg.min_positives..=cfg.max_positives);
    let n_dis = rng.random_range(0..=cfg.distractors);
    let mut events: Vec<(usize, bool)> = vec![(template, true); n_pos];
    for _ in 0..n_dis {
        let mut t = rng.random_range(0..cfg.templates - 1);
        if t >= template {
            t += 1;
        }
        events.push((t, false));
    }
    events.shuffle(rng);

    let m = events.len();
    let mut lens: Vec<usize> = (0..m)
        .map(|_| rng.random_range(cfg.min_len..=cfg.max_len))
        .collect();
    let gaps = (m - 1) * cfg.gap;
    if m * cfg.min_len + gaps > cfg.t_v {
        return Err(Error::InfeasiblePacking {
            events: m,
            min_len: cfg.min_len,
            t_v: cfg.t_v,
        });
    }
    while lens.iter().sum::<usize>() + gaps > cfg.t_v {
        let (i, _) = lens
            .iter()
            .enumerate()
            .max_by_key(|(i, &l)| (l, std::cmp::Reverse(*i)))
            .unwrap();
        lens[i] -= 1;
    }
    let free = cfg.t_v - lens.iter().sum::<usize>() - gaps;
    let mut cuts: Vec<usize> = (0..m).map(|_| rng.random_range(0..=free)).collect();
    cuts.sort_unstable();

    let mut out = Vec::with_capacity(m);
    let mut cursor = 0;
    let mut prev_cut = 0;
    for (i, (&(t, target), &len)) in events.iter().zip(&lens).enumerate() {
        cursor += cuts[i] - prev_cut;
        prev_cut = cuts[i];
        out.push(Placement {
            start: cursor,
            len,
            template: t,
            target,
        });
        cursor += len + cfg.gap;
    }
    Ok(out)
}

fn jittered(cfg: &GenConfig, rng: &mut Rng, p: &Placement) -> Result<Interval> {
    let half_gap = 0.5 * cfg.gap as f64;
    let reach = cfg.jitter.min(half_gap * 0.999);
    let (s, e) = (p.start as f64, (p.start + p.len) as f64);
    let mut shift = || {
        if reach > 0.0 {
            rng.random_range(-reach..=reach)
        } else {
            0.0
        }
    };
    let tv = cfg.t_v as f64;
    let mut a = (s + shift()).clamp(0.0, tv);
    let mut b = (e + shift()).clamp(0.0, tv);
    if b - a < 1.0 {
        let mid = 0.5 * (s + e);
        a = (mid - 0.5).max(0.0);
        b = (a + 1.0).min(tv);
        a = b - 1.0;
    }
    Interval::new(a / tv, b / tv)
}

fn make_query(cfg: &GenConfig, rng: &mut Rng, template: usize) -> Vec<QueryToken> {
    let (verb, noun) = TEMPLATES[template];
    let len = cfg.filler_tokens + 2;
    let mut slots: Vec<usize> = (0..len).collect();
    slots.shuffle(rng);
    let (mut vp, mut np) = (slots[0], slots[1]);
    if vp > np {
        std::mem::swap(&mut vp, &mut np);
    }
    (0..len)
        .map(|i| {
            if i == vp {
                QueryToken {
                    tok: verb.into(),
                    pos: PosTag::Verb,
                }
            } else if i == np {
                QueryToken {
                    tok: noun.into(),
                    pos: PosTag::Noun,
                }
            } else {
                QueryToken {
                    tok: OTHERS[rng.random_range(0..OTHERS.len())].into(),
                    pos: PosTag::Other,
                }
            }
        })
        .collect()
}

/// Uniformly picks the single observed positive.
pub fn expose_single_positive_with(positives: &[Interval], rng: &mut Rng) -> Result<Interval> {
    if positives.is_empty() {
        return Err(Error::NoPositives);
    }
    Ok(positives[rng.random_range(0..positives.len())])
}

pub fn expose_single_positive(sample: &Sample, seed: u64) -> Result<Interval> {
    let mut rng = rng_for(seed, rng::stream::OBSERVE, 0);
    expose_single_positive_with(&sample.full_positives, &mut rng)
}

/// Which half of a benchmark to draw. Both halves share the feature
/// prototypes of their seed; samples come from independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn data_stream(self) -> u64 {
        match self {
            Split::Train => rng::stream::DATA,
            Split::Test => rng::stream::TEST_DATA,
        }
    }

    fn observe_index(self, index: usize) -> u64 {
        match self {
            Split::Train => index as u64,
            Split::Test => (1 << 32) | index as u64,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Split::Train => "",
            Split::Test => "t",
        }
    }
}

fn gen_sample(cfg: &GenConfig, protos: &Prototypes, seed: u64, split: Split, index: usize) -> Result<Sample> {
    let mut rng = rng_for(seed, split.data_stream(), index as u64);
    let template = rng.random_range(0..cfg.templates);
    let placements = pack(cfg, &mut rng, template)?;

    let mut clips = Array2::zeros((cfg.t_v, cfg.d_v));
    let mut owner: Vec<Option<usize>> = vec![None; cfg.t_v];
    for p in &placements {
        for slot in owner.iter_mut().skip(p.start).take(p.len) {
            *slot = Some(p.template);
        }
    }
    for (j, mut row) in clips.rows_mut().into_iter().enumerate() {
        let proto = match owner[j] {
            Some(t) => &protos.events[t],
            None => &protos.background,
        };
        for (x, &mu) in row.iter_mut().zip(proto) {
            *x = mu + cfg.noise * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let full_positives = placements
        .iter()
        .filter(|p| p.target)
        .map(|p| jittered(cfg, &mut rng, p))
        .collect::<Result<Vec<_>>>()?;
    let query = make_query(cfg, &mut rng, template);

    let mut obs_rng = rng_for(seed, rng::stream::OBSERVE, split.observe_index(index));
    let observed = expose_single_positive_with(&full_positives, &mut obs_rng)?;

    Ok(Sample {
        id: format!("{seed:x}-{}{index:05}", split.tag()),
        clips,
        query,
        full_positives,
        observed,
        template: Some(template),
    })
}

/// Generates a dataset; a pure function of `(cfg, seed)`.
pub fn gen_dataset(cfg: &GenConfig, seed: u64) -> Result<Dataset> {
    gen_split(cfg, seed, Split::Train, cfg.samples)
}

/// Generates `samples` items of one split; a pure function of its inputs.
pub fn gen_split(cfg: &GenConfig, seed: u64, split: Split, samples: usize) -> Result<Dataset> {
    cfg.validate()?;
    let protos = prototypes(cfg, seed);
    let samples = (0..samples)
        .map(|i| gen_sample(cfg, &protos, seed, split, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        config: cfg.clone(),
        seed,
    })
}

/// Full label vector: proposal `i` is positive when it reaches `iou_pos`
/// against any hidden positive.
pub fn oracle_labels(sample: &Sample, set: &ProposalSet, iou_pos: f64) -> Vec<bool> {
    set.proposals()
        .iter()
        .map(|p| {
            sample
                .full_positives
                .iter()
                .map(|g| p.iou(g))
                .fold(0.0, f64::max)
                >= iou_pos
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    id: String,
    clips: Vec<Vec<f64>>,
    query: Vec<QueryToken>,
    observed: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    full_positives: Option<Vec<Interval>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    template: Option<usize>,
}

fn clips_to_rows(clips: &Array2<f64>) -> Vec<Vec<f64>> {
    clips.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_to_clips(id: &str, rows: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    let t = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if t == 0 || d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidArgument(format!(
            "sample `{id}`: clips must be a non-empty rectangular matrix"
        )));
    }
    Ok(Array2::from_shape_vec((t, d), rows.into_iter().flatten().collect())
        .expect("rectangular"))
}

/// Writes one sample per line. `with_oracle = false` strips the hidden
/// label set and template id.
pub fn write_jsonl(path: &Path, samples: &[Sample], with_oracle: bool) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        let rec = SampleRecord {
            id: s.id.clone(),
            clips: clips_to_rows(&s.clips),
            query: s.query.clone(),
            observed: s.observed,
            full_positives: with_oracle.then(|| s.full_positives.clone()),
            template: if with_oracle { s.template } else { None },
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Reads a training file. Hidden labels, if present, are dropped on read.
pub fn read_training(path: &Path) -> Result<Vec<TrainSample>> {
    read_records(path)?
        .into_iter()
        .map(|r| {
            Ok(TrainSample {
                clips: rows_to_clips(&r.id, r.clips)?,
                id: r.id,
                query: r.query,
                observed: r.observed,
            })
        })
        .collect()
}

/// Reads an oracle file; every line must carry `full_positives`.
pub fn read_oracle(path: &Path) -> Result<Vec<Sample>> {
    read_records(path)?
        .into_iter()
        .map(|r| {
            let full_positives = r.full_positives.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "sample `{}` has no full_positives; not an oracle file",
                    r.id
                ))
            })?;
            if full_positives.is_empty() {
                return Err(Error::NoPositives);
            }
            Ok(Sample {
                clips: rows_to_clips(&r.id, r.clips)?,
                id: r.id,
                query: r.query,
                full_positives,
                observed: r.observed,
                template: r.template,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    fn small_cfg() -> GenConfig {
        GenConfig {
            samples: 20,
            ..GenConfig::default()
        }
    }

    #[test]
    fn single_positive_config() {
        let cfg = GenConfig {
            min_positives: 1,
            max_positives: 1,
            ..small_cfg()
        };
        let ds = gen_dataset(&cfg, 3).unwrap();
        for s in &ds.samples {
            assert_eq!(s.full_positives.len(), 1);
            assert_eq!(s.observed, s.full_positives[0]);
        }
    }

    #[test]
    fn deterministic() {
        let a = gen_dataset(&small_cfg(), 11).unwrap();
        let b = gen_dataset(&small_cfg(), 11).unwrap();
        assert_eq!(a, b);
        let c = gen_dataset(&small_cfg(), 12).unwrap();
        assert_ne!(a.samples[0].clips, c.samples[0].clips);
    }

    #[test]
    fn test_split_is_distinct() {
        let train = gen_dataset(&small_cfg(), 11).unwrap();
        let test = gen_split(&small_cfg(), 11, Split::Test, 5).unwrap();
        assert_eq!(test.samples.len(), 5);
        assert!(test.samples[0].id.contains("-t"));
        assert_ne!(train.samples[0].clips, test.samples[0].clips);
        assert_eq!(test, gen_split(&small_cfg(), 11, Split::Test, 5).unwrap());
    }

    #[test]
    fn three_positives_are_disjoint() {
        let cfg = GenConfig {
            samples: 200,
            min_positives: 3,
            max_positives: 3,
            ..GenConfig::default()
        };
        let ds = gen_dataset(&cfg, 7).unwrap();
        let total: usize = ds.samples.iter().map(|s| s.full_positives.len()).sum();
        assert_eq!(total as f64 / 200.0, 3.0);
        let clip = 1.0 / cfg.t_v as f64;
        for s in &ds.samples {
            assert!(s.full_positives.contains(&s.observed));
            for (i, a) in s.full_positives.iter().enumerate() {
                assert!(a.width() >= clip - 1e-12);
                for b in &s.full_positives[i + 1..] {
                    assert_eq!(a.intersection(b), 0.0, "{a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn infeasible_packing_is_an_error() {
        let cfg = GenConfig {
            t_v: 8,
            min_positives: 5,
            max_positives: 5,
            min_len: 2,
            ..small_cfg()
        };
        assert!(matches!(
            gen_dataset(&cfg, 1),
            Err(Error::InfeasiblePacking { .. })
        ));
    }

    #[test]
    fn query_carries_template_words() {
        let ds = gen_dataset(&small_cfg(), 5).unwrap();
        let vocab = Vocabulary::standard();
        for s in &ds.samples {
            let (v, n) = &vocab.templates()[s.template.unwrap()];
            let view = s.training_view();
            assert_eq!(view.content_words(), vec![v.as_str(), n.as_str()]);
            for t in &s.query {
                vocab.index_of(&t.tok).unwrap();
            }
        }
    }

    #[test]
    fn exposure_is_uniform() {
        let ps = vec![
            Interval::new(0.0, 0.1).unwrap(),
            Interval::new(0.3, 0.4).unwrap(),
            Interval::new(0.6, 0.7).unwrap(),
        ];
        let mut counts = [0usize; 3];
        for seed in 0..10_000u64 {
            let mut rng = rng_for(seed, rng::stream::OBSERVE, 0);
            let z = expose_single_positive_with(&ps, &mut rng).unwrap();
            counts[ps.iter().position(|p| *p == z).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.05, "{counts:?}");
        }
        assert!(matches!(
            expose_single_positive_with(&[], &mut rng_for(0, 0, 0)),
            Err(Error::NoPositives)
        ));
        let one = [ps[1]];
        assert_eq!(expose_single_positive_with(&one, &mut rng_for(9, 0, 0)).unwrap(), ps[1]);
    }

    fn fixture(positives: Vec<Interval>) -> Sample {
        Sample {
            id: "fx".into(),
            clips: Array2::zeros((32, 2)),
            query: vec![],
            observed: positives[0],
            full_positives: positives,
            template: None,
        }
    }

    #[test]
    fn oracle_labels_exact_and_strict() {
        let set = build_lattice(16, 16).unwrap();
        let pos = vec![
            Interval::new(0.0, 0.25).unwrap(),
            Interval::new(0.5, 0.75).unwrap(),
        ];
        let sample = fixture(pos.clone());
        let labels = oracle_labels(&sample, &set, 0.7);
        // independent loop over every proposal
        let mut expected = vec![false; set.len()];
        for (i, p) in set.proposals().iter().enumerate() {
            for g in &pos {
                let inter = (p.end().min(g.end()) - p.start().max(g.start())).max(0.0);
                let union = p.width() + g.width() - inter;
                if inter / union >= 0.7 {
                    expected[i] = true;
                }
            }
        }
        assert_eq!(labels, expected);
        // [0,4], [0,3] cells → IoU 1 and 0.75 ... both counted
        assert!(labels.iter().filter(|&&b| b).count() >= 2);
        assert!(labels[set.cells().iter().position(|&c| c == (0, 3)).unwrap()]);
        assert!(labels[set.cells().iter().position(|&c| c == (8, 11)).unwrap()]);

        let jittered = fixture(vec![Interval::new(0.01, 0.26).unwrap()]);
        assert!(oracle_labels(&jittered, &set, 1.0).iter().all(|&b| !b));
    }

    #[test]
    fn jsonl_roundtrip_and_strip() {
        let ds = gen_dataset(&small_cfg(), 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let oracle = dir.path().join("o.jsonl");
        let train = dir.path().join("t.jsonl");
        write_jsonl(&oracle, &ds.samples, true).unwrap();
        write_jsonl(&train, &ds.samples, false).unwrap();

        let back = read_oracle(&oracle).unwrap();
        assert_eq!(back, ds.samples);
        assert!(read_oracle(&train).is_err());
        let text = std::fs::read_to_string(&train).unwrap();
        assert!(!text.contains("full_positives"));
        assert_eq!(read_training(&train).unwrap(), ds.training_views());
    }
}
