//! The matching head on frozen features: without the regularizer the
//! positive-only loss collapses to "everything positive"; with it the
//! expected positive count settles near k.

use dtgspl_core::kernel::{AdamLike, Mat, ParamStore};
use dtgspl_core::lattice::ProposalLabels;
use dtgspl_core::pme::{epr_loss, MatchHead};
use dtgspl_core::rng::{rng_for, stream};
use rand::Rng as _;

const C: usize = 136;
const SAMPLES: usize = 8;

fn run(gamma1: f64, steps: usize, lr: f64) -> (f64, f64) {
    let mut s = ParamStore::new(11);
    let head = MatchHead::new(&mut s, "m", 8, 16).unwrap();
    let mut rng = rng_for(11, stream::TEST_DATA, 2);
    // proposals of one video share a common component plus their own noise
    let feats: Vec<Mat> = (0..SAMPLES)
        .map(|_| {
            let base: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            Mat::from_shape_fn((C, 8), |(_, j)| base[j] + 0.5 * rng.random_range(-1.0..1.0))
        })
        .collect();
    let labels: Vec<ProposalLabels> = (0..SAMPLES)
        .map(|_| ProposalLabels::new(C, rng.random_range(0..C)).unwrap())
        .collect();
    let mut opt = AdamLike::new(&s, lr, 0.9, 0.999);
    for _ in 0..steps {
        for (f, l) in feats.iter().zip(&labels) {
            let (sc, cache) = head.forward(&s, f).unwrap();
            let g: Vec<f64> = epr_loss(&sc.0, l, 5.0, gamma1)
                .unwrap()
                .1
                .into_iter()
                .map(|x| x / SAMPLES as f64)
                .collect();
            head.backward(&mut s, &cache, &g);
        }
        opt.step(&mut s).unwrap();
    }
    let sums: Vec<f64> = feats.iter().map(|f| head.forward(&s, f).unwrap().0.sum()).collect();
    let total: f64 = sums.iter().sum();
    (total / (SAMPLES * C) as f64, total / SAMPLES as f64)
}

#[test]
fn positive_only_collapses() {
    let (mean, _) = run(0.0, 500, 0.05);
    eprintln!("positive-only mean {mean}");
    assert!(mean > 0.95, "{mean}");
}

#[test]
fn regularized_sum_near_k() {
    let (_, sum) = run(0.1, 3000, 0.05);
    eprintln!("sum {sum}");
    assert!((sum - 5.0).abs() < 0.5, "{sum}");
}
