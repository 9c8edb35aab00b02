use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Mat;
use crate::temporal::{se_to_cw, Interval};

/// Shortest-augmenting-path assignment on a square matrix, O(n³).
/// Returns the column for every row.
fn solve_square(a: &[Vec<f64>]) -> Vec<usize> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0; n];
    for j in 1..=n {
        ans[p[j] - 1] = j - 1;
    }
    ans
}

fn sub_optimum(a: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    let sub: Vec<Vec<f64>> = rows.iter().map(|&r| cols.iter().map(|&c| a[r][c]).collect()).collect();
    solve_square(&sub)
        .iter()
        .enumerate()
        .map(|(i, &j)| sub[i][j])
        .sum()
}

/// Minimum-cost injective assignment of rows to columns of a rectangular
/// matrix. Rows left without a column (when rows outnumber columns) map to
/// `None`.
///
/// Among optimal assignments the lexicographically smallest one is
/// returned, reading rows in order and ranking "unassigned" after every
/// real column.
pub fn linear_assignment(cost: &Mat) -> Result<Vec<Option<usize>>> {
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost".into()));
    }
    let (r, c) = cost.dim();
    let n = r.max(c);
    // pad with zero-cost dummies
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i < r && j < c { cost[[i, j]] } else { 0.0 }).collect())
        .collect();
    let all: Vec<usize> = (0..n).collect();
    let opt = sub_optimum(&a, &all, &all);
    let tol = 1e-12 * opt.abs().max(1.0);

    let mut fixed_cost = 0.0;
    let mut free_cols: Vec<usize> = all.clone();
    let mut out = Vec::with_capacity(r);
    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        let mut chosen = None;
        for &col in &free_cols {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&x| x != col).collect();
            let total = fixed_cost + a[row][col] + sub_optimum(&a, &rest_rows, &rest_cols);
            if total <= opt + tol {
                chosen = Some(col);
                break;
            }
        }
        let col = chosen.expect("some column attains the optimum");
        fixed_cost += a[row][col];
        free_cols.retain(|&x| x != col);
        if row < r {
            out.push((col < c).then_some(col));
        }
    }
    Ok(out)
}

/// Pairs `(output, pseudo_label)` with outputs indexed over all `N`
/// decoder outputs; output 0 never appears.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchAssignment {
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

impl MatchAssignment {
    pub fn empty() -> Self {
        Self {
            pairs: Vec::new(),
            cost: 0.0,
        }
    }
}

/// ℓ1 distance in both parameterisations.
pub fn match_cost(se: (f64, f64), cw: (f64, f64), target: &Interval) -> f64 {
    let t = se_to_cw(target);
    (se.0 - target.start()).abs() + (se.1 - target.end()).abs() + (cw.0 - t.center()).abs() + (cw.1 - t.width()).abs()
}

/// Assigns outputs `1..N` to pseudo-labels.
///
/// `se` and `cw` are `N × 2` decoder outputs.
pub fn hungarian_match(pseudo: &[Interval], se: &Mat, cw: &Mat) -> Result<MatchAssignment> {
    let n = se.nrows();
    if pseudo.is_empty() || n < 2 {
        return Ok(MatchAssignment::empty());
    }
    if pseudo.len() > n - 1 {
        return Err(Error::InvalidArgument(format!(
            "{} pseudo-labels for {} regression outputs",
            pseudo.len(),
            n - 1
        )));
    }
    let cost = Mat::from_shape_fn((n - 1, pseudo.len()), |(i, j)| {
        match_cost(
            (se[[i + 1, 0]], se[[i + 1, 1]]),
            (cw[[i + 1, 0]], cw[[i + 1, 1]]),
            &pseudo[j],
        )
    });
    let assign = linear_assignment(&cost)?;
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (i, a) in assign.into_iter().enumerate() {
        if let Some(j) = a {
            pairs.push((i + 1, j));
            total += cost[[i, j]];
        }
    }
    Ok(MatchAssignment { pairs, cost: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng as _;

    #[test]
    fn two_by_two_fixture() {
        let a = linear_assignment(&array![[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(a, vec![Some(1), Some(0)]);
    }

    #[test]
    fn empty_pseudo_set() {
        let se = array![[0.1, 0.2], [0.3, 0.4]];
        let m = hungarian_match(&[], &se, &se).unwrap();
        assert!(m.pairs.is_empty());
    }

    #[test]
    fn rectangular_and_ties() {
        // all-equal costs: identity is the lexicographic minimum
        let a = linear_assignment(&Mat::from_elem((3, 3), 1.0)).unwrap();
        assert_eq!(a, vec![Some(0), Some(1), Some(2)]);
        // more rows than columns: the cheapest rows take the columns
        let a = linear_assignment(&array![[5.0], [1.0], [1.0]]).unwrap();
        assert_eq!(a, vec![None, Some(0), None]);
        let a = linear_assignment(&array![[3.0, 1.0, 2.0]]).unwrap();
        assert_eq!(a, vec![Some(1)]);
    }

    fn brute(cost: &Mat) -> f64 {
        fn go(cost: &Mat, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.nrows() {
                *best = best.min(acc);
                return;
            }
            for c in 0..cost.ncols() {
                if !used[c] {
                    used[c] = true;
                    go(cost, row + 1, used, acc + cost[[row, c]], best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        go(cost, 0, &mut vec![false; cost.ncols()], 0.0, &mut best);
        best
    }

    #[test]
    fn random_four_by_four_matches_brute_force() {
        let mut rng = crate::rng::rng_for(1, 99, 0);
        for _ in 0..200 {
            let cost = Mat::from_shape_simple_fn((4, 4), || rng.random_range(0.0..1.0));
            let a = linear_assignment(&cost).unwrap();
            let total: f64 = a.iter().enumerate().map(|(i, j)| cost[[i, j.unwrap()]]).sum();
            assert!((total - brute(&cost)).abs() < 1e-12);
        }
    }

    #[test]
    fn match_uses_outputs_after_the_first() {
        let se = array![[0.0, 0.1], [0.5, 0.9], [0.0, 0.2]];
        let cw = array![[0.05, 0.1], [0.7, 0.4], [0.1, 0.2]];
        let pseudo = [Interval::new(0.0, 0.2).unwrap(), Interval::new(0.5, 0.9).unwrap()];
        let m = hungarian_match(&pseudo, &se, &cw).unwrap();
        assert_eq!(m.pairs, vec![(1, 1), (2, 0)]);
        assert!(m.cost.abs() < 1e-12);
        assert!(hungarian_match(&[pseudo[0]; 3], &se, &cw).is_err());
    }
}
