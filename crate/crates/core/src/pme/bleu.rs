use std::collections::HashMap;
use std::hash::Hash;

/// BLEU-1: clipped unigram precision times the brevity penalty
/// `exp(min(0, 1 - |ref| / |cand|))`. An empty candidate scores 0.
pub fn bleu1<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut ref_counts: HashMap<&T, usize> = HashMap::new();
    for t in reference {
        *ref_counts.entry(t).or_default() += 1;
    }
    let mut cand_counts: HashMap<&T, usize> = HashMap::new();
    for t in candidate {
        *cand_counts.entry(t).or_default() += 1;
    }
    let clipped: usize = cand_counts
        .iter()
        .map(|(t, &c)| c.min(ref_counts.get(t).copied().unwrap_or(0)))
        .sum();
    let precision = clipped as f64 / candidate.len() as f64;
    let bp = (1.0 - reference.len() as f64 / candidate.len() as f64).min(0.0).exp();
    precision * bp
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixtures() {
        assert_eq!(bleu1(&["a", "b"], &["a", "b"]), 1.0);
        let s = bleu1(&["person", "opens", "door"], &["person", "closes", "door"]);
        assert!((s - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(bleu1::<&str>(&[], &["x"]), 0.0);
    }

    #[test]
    fn clipping_and_brevity() {
        // "the" appears once in the reference so only one of three counts
        assert!((bleu1(&["the", "the", "the"], &["the", "cat", "sat"]) - 1.0 / 3.0).abs() < 1e-12);
        // short candidate pays the brevity penalty
        assert!((bleu1(&["cat"], &["the", "cat"]) - (-1f64).exp()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bounded_and_reflexive(a in prop::collection::vec(0u8..6, 0..8), b in prop::collection::vec(0u8..6, 1..8)) {
            let s = bleu1(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(bleu1(&b, &b), 1.0);
        }
    }
}
