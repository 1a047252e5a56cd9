use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use serde::Serialize;

use crate::types::Gas;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("true value is zero")]
    ZeroTrueValue,
    #[error("sample is empty")]
    EmptySample,
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFewSamples(usize),
    #[error("all true values are equal")]
    DegenerateSample,
}

/// An exact percentage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(pub Ratio<u128>);

impl Percent {
    pub fn zero() -> Self {
        Percent(Ratio::from_integer(0))
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    /// Fixed-point rendering with `decimals` places, rounding half up.
    pub fn render(self, decimals: u32) -> String {
        let scale = 10u128.pow(decimals);
        let (n, d) = (*self.0.numer(), *self.0.denom());
        let scaled = (2 * n * scale + d) / (2 * d);
        if decimals == 0 {
            return scaled.to_string();
        }
        format!(
            "{}.{:0width$}",
            scaled / scale,
            scaled % scale,
            width = decimals as usize
        )
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(2))
    }
}

impl Serialize for Percent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

/// Absolute percentage error of `y_hat` against the true value `y`.
pub fn ape(y: Gas, y_hat: Gas) -> Result<Percent, MetricError> {
    if y == 0 {
        return Err(MetricError::ZeroTrueValue);
    }
    let diff = u128::from(y.abs_diff(y_hat));
    Ok(Percent(Ratio::new(diff * 100, u128::from(y))))
}

/// Coefficient of determination of `y_hats` against `ys`; negative when
/// the fit is worse than the mean.
pub fn r_squared(ys: &[f64], y_hats: &[f64]) -> Result<f64, MetricError> {
    if ys.len() != y_hats.len() {
        return Err(MetricError::LengthMismatch(ys.len(), y_hats.len()));
    }
    if ys.len() < 2 {
        return Err(MetricError::TooFewSamples(ys.len()));
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    if ys.iter().all(|y| *y == ys[0]) {
        return Err(MetricError::DegenerateSample);
    }
    let ss_res: f64 = ys.iter().zip(y_hats).map(|(y, h)| (y - h).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn summary(values: &[f64]) -> Result<Summary, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptySample);
    }
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(Summary {
        median,
        mean,
        std: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn ape_examples() {
        assert_eq!(ape(100, 90).unwrap().to_f64(), 10.0);
        assert_eq!(ape(100, 90).unwrap().to_string(), "10.00");
        assert_eq!(ape(21000, 21000).unwrap(), Percent::zero());
        assert!(close(ape(21000, 25800).unwrap().to_f64(), 22.857142857142858));
        assert_eq!(ape(21000, 25800).unwrap().render(4), "22.8571");
        assert_eq!(ape(0, 5), Err(MetricError::ZeroTrueValue));
        assert_eq!(ape(8, 9).unwrap().to_string(), "12.50");
    }

    #[test]
    fn r_squared_examples() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!(close(r_squared(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -3.0));
        assert_eq!(r_squared(&[4.0, 4.0], &[1.0, 2.0]), Err(MetricError::DegenerateSample));
        assert_eq!(r_squared(&[4.0], &[1.0]), Err(MetricError::TooFewSamples(1)));
    }

    #[test]
    fn summary_examples() {
        let s = summary(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.median, s.mean), (2.0, 2.0));
        assert!(close(s.std, (2.0f64 / 3.0).sqrt()));
        assert_eq!(summary(&[5.0]).unwrap(), Summary { median: 5.0, mean: 5.0, std: 0.0 });
        assert_eq!(summary(&[0.0; 4]).unwrap(), Summary { median: 0.0, mean: 0.0, std: 0.0 });
        assert_eq!(summary(&[1.0, 2.0, 3.0, 10.0]).unwrap().median, 2.5);
        assert_eq!(summary(&[]), Err(MetricError::EmptySample));
    }

    proptest! {
        #[test]
        fn ape_scale_invariant(y in 1u64..1_000_000, y_hat in 0u64..1_000_000, c in 1u64..1000) {
            prop_assert_eq!(ape(y, y_hat).unwrap(), ape(y * c, y_hat * c).unwrap());
        }

        #[test]
        fn r_squared_translation_invariant(
            pairs in prop::collection::vec((-1000i32..1000, -1000i32..1000), 2..30),
            shift in -1000i32..1000,
        ) {
            let ys: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let hs: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            prop_assume!(ys.iter().any(|y| *y != ys[0]));
            let s = shift as f64;
            let shifted_y: Vec<f64> = ys.iter().map(|y| y + s).collect();
            let shifted_h: Vec<f64> = hs.iter().map(|h| h + s).collect();
            let a = r_squared(&ys, &hs).unwrap();
            let b = r_squared(&shifted_y, &shifted_h).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
