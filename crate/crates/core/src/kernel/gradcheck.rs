use rand::seq::index::sample;

use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::rng::{self, rng_for};

/// Relative errors are measured against `max(|a|, |n|, REL_FLOOR)` so that
/// coordinates whose true gradient is ~0 do not blow up the ratio.
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Check at most this many coordinates per tensor (sampled without
    /// replacement, seeded from the store). `None` checks everything.
    pub max_coords_per_param: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_coords_per_param: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub loss: f64,
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares analytic gradients with central differences.
///
/// `f` must compute the loss from the current parameter values and
/// accumulate its gradients into the store. Gradients are zeroed before
/// every call and left zeroed on return.
pub fn grad_check<F>(store: &mut ParamStore, opts: &GradCheckOptions, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore) -> Result<f64>,
{
    let mut eval = |store: &mut ParamStore| -> Result<f64> {
        store.zero_grads();
        let loss = f(store)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss = {loss}")));
        }
        Ok(loss)
    };

    let loss = eval(store)?;
    let analytic: Vec<_> = store.ids().map(|id| store.grad(id).clone()).collect();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        worst: None,
        checked: 0,
        loss,
    };

    for id in store.ids().collect::<Vec<_>>() {
        let n = store.value(id).len();
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(m) if m < n => {
                let mut r = rng_for(store.seed(), rng::stream::GRADCHECK, id.index() as u64);
                let mut c = sample(&mut r, n, m).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        for flat in coords {
            let orig = flat_get(store, id, flat);
            flat_set(store, id, flat, orig + opts.eps);
            let lp = eval(store)?;
            flat_set(store, id, flat, orig - opts.eps);
            let lm = eval(store)?;
            flat_set(store, id, flat, orig);

            let numeric = (lp - lm) / (2.0 * opts.eps);
            let a = analytic[id.index()].as_slice().expect("standard layout")[flat];
            let re = rel_err(a, numeric);
            report.max_abs_err = report.max_abs_err.max((a - numeric).abs());
            if re > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = re;
                report.worst = Some((store.name(id).to_string(), flat));
            }
            report.checked += 1;
        }
    }
    store.zero_grads();
    Ok(report)
}

fn flat_get(store: &ParamStore, id: super::ParamId, flat: usize) -> f64 {
    store.value(id).as_slice().expect("standard layout")[flat]
}

fn flat_set(store: &mut ParamStore, id: super::ParamId, flat: usize, v: f64) {
    store.value_mut(id).as_slice_mut().expect("standard layout")[flat] = v;
}
