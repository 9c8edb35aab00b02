use crate::error::{Error, Result};
use crate::kernel::Mat;
use crate::pme::LOG_EPS;
use crate::temporal::{interval_mask, se_to_cw, ClipMask, Interval};

use super::decoder::DecoderOutput;
use super::hungarian::MatchAssignment;

/// `-(Σ_j m_j log a_j) / Σ_j m_j` and its gradient wrt `a`.
pub fn attention_loss(a: &[f64], mask: &ClipMask) -> Result<(f64, Vec<f64>)> {
    if a.len() != mask.len() {
        return Err(Error::ShapeMismatch {
            op: "attention_loss",
            expected: format!("{} coefficients", mask.len()),
            got: format!("{}", a.len()),
        });
    }
    let m = mask.count();
    if m == 0 {
        return Err(Error::EmptyMask);
    }
    let norm = 1.0 / m as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; a.len()];
    for j in mask.indices() {
        if a[j] > LOG_EPS {
            loss -= a[j].ln() * norm;
            grad[j] = -norm / a[j];
        } else {
            loss -= LOG_EPS.ln() * norm;
        }
    }
    Ok((loss, grad))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTerms {
    pub se: f64,
    pub cw: f64,
    pub attention: f64,
}

impl MomentTerms {
    pub fn total(&self) -> f64 {
        self.se + self.cw + self.attention
    }
}

/// Regression and attention terms for output `i` against `target`;
/// gradients are added into the given buffers scaled by `weight`.
fn supervise(
    out: &DecoderOutput,
    i: usize,
    target: &Interval,
    weight: f64,
    grads: &mut DmrGrads,
) -> Result<MomentTerms> {
    let t_cw = se_to_cw(target);
    let ds = out.se[[i, 0]] - target.start();
    let de = out.se[[i, 1]] - target.end();
    let dc = out.cw[[i, 0]] - t_cw.center();
    let dw = out.cw[[i, 1]] - t_cw.width();
    let mask = interval_mask(target, out.attention.ncols())?;
    let (att, g_att) = attention_loss(out.attention.row(i).as_slice().expect("row-major"), &mask)?;

    grads.se[[i, 0]] += weight * sign(ds);
    grads.se[[i, 1]] += weight * sign(de);
    grads.cw[[i, 0]] += weight * sign(dc);
    grads.cw[[i, 1]] += weight * sign(dw);
    for (j, g) in g_att.into_iter().enumerate() {
        grads.attention[[i, j]] += weight * g;
    }
    Ok(MomentTerms {
        se: ds.abs() + de.abs(),
        cw: dc.abs() + dw.abs(),
        attention: att,
    })
}

#[derive(Debug, Clone)]
pub struct DmrGrads {
    pub se: Mat,
    pub cw: Mat,
    pub attention: Mat,
}

#[derive(Debug, Clone)]
pub struct DmrLoss {
    pub total: f64,
    /// Terms for output 0 against the observed label.
    pub single: MomentTerms,
    /// `λ / (N - 1) Σ` over matched outputs.
    pub multi: f64,
    pub grads: DmrGrads,
}

/// Output 0 is supervised by the observed moment; matched outputs by their
/// pseudo-labels, averaged over `N - 1` and weighted by `λ`. Unmatched
/// outputs contribute nothing.
pub fn dmr_loss(
    out: &DecoderOutput,
    z: &Interval,
    pseudo: &[Interval],
    assignment: &MatchAssignment,
    lambda: f64,
) -> Result<DmrLoss> {
    let n = out.len();
    let mut grads = DmrGrads {
        se: Mat::zeros(out.se.raw_dim()),
        cw: Mat::zeros(out.cw.raw_dim()),
        attention: Mat::zeros(out.attention.raw_dim()),
    };
    let single = supervise(out, 0, z, 1.0, &mut grads)?;
    let mut multi = 0.0;
    if n > 1 && lambda != 0.0 {
        let w = lambda / (n - 1) as f64;
        for &(i, j) in &assignment.pairs {
            if i == 0 || i >= n || j >= pseudo.len() {
                return Err(Error::InvalidArgument(format!("assignment pair ({i}, {j}) out of range")));
            }
            multi += w * supervise(out, i, &pseudo[j], w, &mut grads)?.total();
        }
    }
    Ok(DmrLoss {
        total: single.total() + multi,
        single,
        multi,
        grads,
    })
}
