use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, rng_for, Rng};

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Mat,
    grad: Mat,
}

/// Named trainable tensors, each with a same-shape gradient buffer.
///
/// Initialization draws from a generator seeded once at construction, so
/// the values depend only on the seed and on the order of `add_*` calls.
#[derive(Debug, Clone)]
pub struct ParamStore {
    seed: u64,
    rng: Rng,
    params: Vec<Param>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: rng_for(seed, rng::stream::INIT, 0),
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}`")));
        }
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Param {
            name,
            grad: Mat::zeros(value.raw_dim()),
            value,
        });
        Ok(ParamId(id))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, Mat::zeros((rows, cols)))
    }

    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        scale: f64,
    ) -> Result<ParamId> {
        let rng = &mut self.rng;
        let value = Mat::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..=scale));
        self.add(name, value)
    }

    /// Glorot-uniform initialization.
    pub fn add_xavier(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<ParamId> {
        let scale = (6.0 / (rows + cols) as f64).sqrt();
        self.add_uniform(name, rows, cols, scale)
    }

    pub fn value(&self, id: ParamId) -> &Mat {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Mat {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.params[id.0].grad
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            p.grad *= factor;
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.grad.iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Name of the first parameter holding a non-finite gradient.
    pub fn first_non_finite_grad(&self) -> Option<&str> {
        self.params
            .iter()
            .find(|p| p.grad.iter().any(|g| !g.is_finite()))
            .map(|p| p.name.as_str())
    }

    pub fn to_checkpoint(&self, meta: serde_json::Value) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed: self.seed,
            meta,
            tensors: self
                .params
                .iter()
                .map(|p| TensorRecord {
                    name: p.name.clone(),
                    shape: [p.value.nrows(), p.value.ncols()],
                    data: p.value.iter().copied().collect(),
                })
                .collect(),
        }
    }

    /// Overwrites values from `ckpt`. Every parameter must be present with
    /// the same shape; extra tensors are an error too.
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        ckpt.check_header()?;
        if ckpt.tensors.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                self.params.len(),
                ckpt.tensors.len()
            )));
        }
        for t in &ckpt.tensors {
            let id = self
                .find(&t.name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor `{}`", t.name)))?;
            let p = &mut self.params[id.0];
            if [p.value.nrows(), p.value.ncols()] != t.shape || t.data.len() != p.value.len() {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch for `{}`: have {:?}, file has {:?}",
                    t.name,
                    p.value.shape(),
                    t.shape
                )));
            }
            p.value = Mat::from_shape_vec((t.shape[0], t.shape[1]), t.data.clone())
                .expect("checked length");
        }
        Ok(())
    }
}

pub const CHECKPOINT_FORMAT: &str = "dtgspl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk parameter snapshot.
///
/// JSON object with `format` (always `"dtgspl-checkpoint"`), `version`,
/// `seed`, free-form `meta`, and `tensors`: a list of
/// `{"name", "shape": [rows, cols], "data": [row-major f64...]}`.
/// Floats are written in shortest round-trip form, so save/load is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl Checkpoint {
    fn check_header(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        ckpt.check_header()?;
        Ok(ckpt)
    }
}
