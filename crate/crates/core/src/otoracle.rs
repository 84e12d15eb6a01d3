//! Exact 1-Wasserstein distance between equal-size uniform empirical
//! measures, via optimal assignment on the Euclidean cost matrix.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Largest sample size accepted by [`w1_exact`].
pub const MAX_EXACT: usize = 10_000;
/// Largest sample size accepted by [`w1_brute`].
pub const MAX_BRUTE: usize = 8;

fn check_pair(a: &Array2<f64>, b: &Array2<f64>, max: usize) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            op: "w1",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let m = a.nrows();
    if m == 0 {
        return Err(Error::InvalidArgument("empirical samples must be non-empty".into()));
    }
    if m > max {
        return Err(Error::InvalidArgument(format!("sample size {m} exceeds limit {max}")));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("empirical sample".into()));
    }
    Ok(m)
}

/// `C[i][j] = ‖a_i − b_j‖₂`.
pub fn cost_matrix(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        a.row(i)
            .iter()
            .zip(b.row(j))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    })
}

/// Minimum-cost perfect matching of a square cost matrix.
///
/// Shortest augmenting paths with row/column potentials (the
/// Jonker–Volgenant form of the Hungarian method), `O(m³)`. Returns the
/// column assigned to each row.
pub fn assignment(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square matrix");
    // One-based arrays with a virtual column 0, following the classical
    // formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[owner[j] - 1] = j - 1;
    }
    out
}

fn matching_cost(cost: &Array2<f64>, cols: &[usize]) -> f64 {
    cols.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum::<f64>() / cols.len() as f64
}

/// `W₁` between the uniform measures on the rows of `a` and `b`.
pub fn w1_exact(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    check_pair(a, b, MAX_EXACT)?;
    let cost = cost_matrix(a, b);
    Ok(matching_cost(&cost, &assignment(&cost)))
}

/// Exhaustive minimum over all `m!` assignments (Heap's algorithm).
pub fn w1_brute(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    let m = check_pair(a, b, MAX_BRUTE)?;
    let cost = cost_matrix(a, b);
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = matching_cost(&cost, &perm);
    let mut c = vec![0usize; m];
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(matching_cost(&cost, &perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    use super::*;
    use crate::latent::standard_normal;
    use crate::rng;

    #[test]
    fn identical_samples_are_at_distance_zero() {
        let a = standard_normal(&mut rng::stream(1, 0), 20, 3);
        assert_eq!(w1_exact(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_examples() {
        assert_eq!(w1_exact(&array![[0.0]], &array![[3.0]]).unwrap(), 3.0);
        assert_eq!(w1_exact(&array![[0.0], [1.0]], &array![[2.0], [3.0]]).unwrap(), 2.0);
        assert_eq!(w1_brute(&array![[0.0], [1.0]], &array![[2.0], [3.0]]).unwrap(), 2.0);
        assert_eq!(w1_brute(&array![[0.0, 0.0]], &array![[3.0, 4.0]]).unwrap(), 5.0);
    }

    #[test]
    fn shuffled_copy_is_at_distance_zero() {
        let a = standard_normal(&mut rng::stream(2, 0), 7, 2);
        let mut idx: Vec<usize> = (0..7).collect();
        idx.shuffle(&mut rng::stream(2, 1));
        let b = a.select(ndarray::Axis(0), &idx);
        assert_eq!(w1_brute(&a, &b).unwrap(), 0.0);
        assert_eq!(w1_exact(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_matches_sorted_pairing() {
        let a = standard_normal(&mut rng::stream(3, 0), 200, 1);
        let b = standard_normal(&mut rng::stream(3, 1), 200, 1);
        let mut x: Vec<f64> = a.iter().copied().collect();
        let mut y: Vec<f64> = b.iter().copied().collect();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        let sorted = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>() / 200.0;
        assert!((w1_exact(&a, &b).unwrap() - sorted).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(w1_exact(&Array2::zeros((2, 1)), &Array2::zeros((3, 1))).is_err());
        assert!(w1_exact(&Array2::zeros((2, 1)), &Array2::zeros((2, 2))).is_err());
        assert!(w1_exact(&Array2::zeros((0, 1)), &Array2::zeros((0, 1))).is_err());
        assert!(w1_brute(&Array2::zeros((9, 1)), &Array2::zeros((9, 1))).is_err());
        let mut bad = Array2::zeros((2, 1));
        bad[[0, 0]] = f64::NAN;
        assert!(w1_exact(&bad, &Array2::zeros((2, 1))).is_err());
    }

    #[test]
    fn assignment_is_a_permutation() {
        let cost = cost_matrix(
            &standard_normal(&mut rng::stream(4, 0), 30, 2),
            &standard_normal(&mut rng::stream(4, 1), 30, 2),
        );
        let mut cols = assignment(&cost);
        cols.sort();
        assert_eq!(cols, (0..30).collect::<Vec<_>>());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn exact_matches_brute_force(seed in 0u64..100_000, m in 1usize..=6, p in 1usize..=3) {
            let a = standard_normal(&mut rng::stream(seed, 0), m, p);
            let b = standard_normal(&mut rng::stream(seed, 1), m, p);
            let exact = w1_exact(&a, &b).unwrap();
            let brute = w1_brute(&a, &b).unwrap();
            prop_assert!((exact - brute).abs() <= 1e-12, "{} vs {}", exact, brute);
        }

        #[test]
        fn metric_axioms(seed in 0u64..100_000, m in 1usize..=12) {
            let a = standard_normal(&mut rng::stream(seed, 0), m, 2);
            let b = standard_normal(&mut rng::stream(seed, 1), m, 2);
            let c = standard_normal(&mut rng::stream(seed, 2), m, 2);
            let ab = w1_exact(&a, &b).unwrap();
            prop_assert!((ab - w1_exact(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert_eq!(w1_exact(&a, &a).unwrap(), 0.0);
            let ac = w1_exact(&a, &c).unwrap();
            let bc = w1_exact(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
