use std::cmp::Ordering;

use serde::Serialize;

use super::special::chi_square_sf;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("need at least 3 pooled observations, got {0}")]
    TooFewObservations(usize),
    #[error("sample contains NaN")]
    NotANumber,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    /// Largest gap between the empirical CDFs.
    pub d: f64,
    /// Asymptotic p-value.
    pub p: f64,
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>, StatsError> {
    if sample.iter().any(|v| v.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov–Smirnov test. D is found exactly from integer
/// counts at every pooled point; p uses the asymptotic Kolmogorov
/// distribution with the usual small-sample correction to λ.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (n, m) = (a.len() as u128, b.len() as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: u128 = 0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => {
                if x.total_cmp(y) == Ordering::Greater {
                    *y
                } else {
                    *x
                }
            }
            (Some(x), None) => *x,
            (None, Some(y)) => *y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i].total_cmp(&x) != Ordering::Greater {
            i += 1;
        }
        while j < b.len() && b[j].total_cmp(&x) != Ordering::Greater {
            j += 1;
        }
        best = best.max((i as u128 * m).abs_diff(j as u128 * n));
    }
    let d = best as f64 / (n * m) as f64;
    let ne = (n * m) as f64 / (n + m) as f64;
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    Ok(KsResult {
        d,
        p: kolmogorov_sf(lambda),
    })
}

/// P(K > λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²).
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100_000u32 {
        let k = f64::from(k);
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            return (2.0 * sum).clamp(0.0, 1.0);
        }
        sign = -sign;
    }
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub p: f64,
    pub df: usize,
    /// Every pooled value was tied; H is taken as 0 and p as 1.
    pub degenerate: bool,
}

/// Kruskal–Wallis H test with mid-ranks and the tie correction.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(StatsError::EmptySample);
    }
    let mut pooled: Vec<(f64, usize)> = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        for v in g {
            if v.is_nan() {
                return Err(StatsError::NotANumber);
            }
            pooled.push((*v, gi));
        }
    }
    let total = pooled.len();
    if total < 3 {
        return Err(StatsError::TooFewObservations(total));
    }
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut rank_sums = vec![0.0; groups.len()];
    let mut tie_sum = 0.0;
    let mut start = 0;
    while start < total {
        let mut end = start;
        while end < total && pooled[end].0.total_cmp(&pooled[start].0) == Ordering::Equal {
            end += 1;
        }
        // ranks start..end are 1-based start+1..=end
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        for item in &pooled[start..end] {
            rank_sums[item.1] += mid_rank;
        }
        let t = (end - start) as f64;
        tie_sum += t * t * t - t;
        start = end;
    }

    let df = groups.len() - 1;
    let n = total as f64;
    let correction = 1.0 - tie_sum / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(KruskalWallis {
            h: 0.0,
            p: 1.0,
            df,
            degenerate: true,
        });
    }
    let sum_term: f64 = rank_sums
        .iter()
        .zip(groups)
        .map(|(r, g)| r * r / g.len() as f64)
        .sum();
    let h = ((12.0 / (n * (n + 1.0)) * sum_term - 3.0 * (n + 1.0)) / correction).max(0.0);
    Ok(KruskalWallis {
        h,
        p: chi_square_sf(h, df as f64),
        df,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ks_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap().d, 0.0);
        assert_eq!(ks_two_sample(&a, &a).unwrap().p, 1.0);
        assert_eq!(ks_two_sample(&a, &[4.0, 5.0]).unwrap().d, 1.0);
        let r = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert_eq!(r.d, 0.25);
        assert!(r.p > 0.99);
        assert_eq!(ks_two_sample(&[], &a), Err(StatsError::EmptySample));
    }

    #[test]
    fn ks_handles_ties_across_samples() {
        // F_a(1) = 2/3, F_b(1) = 1/3
        let r = ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((r.d - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kw_examples() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(r.h.abs() < 1e-12);
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!((r.h - 3.857142857142857).abs() < 1e-9);
        assert!((r.p - 0.049534613435626706).abs() < 1e-9);
        let r = kruskal_wallis(&[vec![7.0, 7.0], vec![7.0]]).unwrap();
        assert_eq!((r.h, r.p, r.degenerate), (0.0, 1.0, true));
        assert!(kruskal_wallis(&[vec![1.0]]).is_err());
        assert!(kruskal_wallis(&[vec![1.0], vec![]]).is_err());
        assert!(kruskal_wallis(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn kw_tie_correction() {
        // hand computation: ranks 1.5 1.5 3 | 4 5.5 5.5, tie sum 12, N = 6
        let r = kruskal_wallis(&[vec![1.0, 1.0, 2.0], vec![3.0, 4.0, 4.0]]).unwrap();
        let raw = 12.0 / 42.0 * (6.0f64.powi(2) / 3.0 + 15.0f64.powi(2) / 3.0) - 21.0;
        assert!((r.h - raw / (1.0 - 12.0 / 210.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ks_symmetric_and_permutation_invariant(
            a in prop::collection::vec(-50i32..50, 1..40),
            b in prop::collection::vec(-50i32..50, 1..40),
        ) {
            let fa: Vec<f64> = a.iter().map(|v| *v as f64).collect();
            let fb: Vec<f64> = b.iter().map(|v| *v as f64).collect();
            let mut ra = fa.clone();
            ra.reverse();
            let x = ks_two_sample(&fa, &fb).unwrap();
            prop_assert_eq!(x, ks_two_sample(&fb, &fa).unwrap());
            prop_assert_eq!(x, ks_two_sample(&ra, &fb).unwrap());
            prop_assert!((0.0..=1.0).contains(&x.d));
        }

        #[test]
        fn kw_monotone_invariant(
            groups in prop::collection::vec(prop::collection::vec(-20i32..20, 1..10), 2..5),
        ) {
            let g: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| *v as f64).collect()).collect();
            prop_assume!(g.iter().map(Vec::len).sum::<usize>() >= 3);
            let t: Vec<Vec<f64>> = g.iter().map(|g| g.iter().map(|v| (v / 7.0).exp() * 3.0 - 1.0).collect()).collect();
            let (x, y) = (kruskal_wallis(&g).unwrap(), kruskal_wallis(&t).unwrap());
            prop_assert!((x.h - y.h).abs() <= 1e-9 * x.h.max(1.0));
            prop_assert_eq!(x.degenerate, y.degenerate);
        }
    }
}
