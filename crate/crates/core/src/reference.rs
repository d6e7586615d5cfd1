//! Double-precision oracles and error metrics.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};
use thiserror::Error;

use crate::kernels::AlifParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("reference series is constant, so its range is zero")]
    DegenerateRange,
    #[error("empty series")]
    Empty,
}

/// Entry `t` holds `V[t+1]`, `A[t+1]` and `S[t]`, matching the kernels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub spikes: Vec<bool>,
}

/// Exact ALIF dynamics from `V = A = 0`; `input[t]` is the current added
/// during step `t`.
///
/// A spike is emitted when `V >= V_th + beta*A` (equality fires).
pub fn alif_reference(params: &AlifParams, input: &[f64]) -> Trajectory {
    let (alpha, rho) = (params.alpha(), params.rho());
    let (mut v, mut a) = (0.0f64, 0.0f64);
    let mut out = Trajectory {
        v: Vec::with_capacity(input.len()),
        a: Vec::with_capacity(input.len()),
        spikes: Vec::with_capacity(input.len()),
    };
    for &i in input {
        let s = v >= params.v_th + params.beta * a;
        let sf = if s { 1.0 } else { 0.0 };
        v = alpha * v + i - sf * params.v_th;
        a = rho * a + sf;
        out.v.push(v);
        out.a.push(a);
        out.spikes.push(s);
    }
    out
}

/// Root-mean-square error divided by the range of `reference`.
pub fn nrmse(fixed: &[f64], reference: &[f64]) -> Result<f64, ReferenceError> {
    if fixed.len() != reference.len() {
        return Err(ReferenceError::LengthMismatch(fixed.len(), reference.len()));
    }
    if reference.is_empty() {
        return Err(ReferenceError::Empty);
    }
    let (lo, hi) = reference.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let range = hi - lo;
    if range <= 0.0 {
        return Err(ReferenceError::DegenerateRange);
    }
    let mse = fixed.iter().zip(reference).map(|(f, r)| (f - r).powi(2)).sum::<f64>() / fixed.len() as f64;
    Ok(mse.sqrt() / range)
}

pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    Poisson::new(lambda).map_or(f64::NAN, |d| d.pmf(k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    /// Critical value at significance 0.001.
    pub critical: f64,
    /// `(first k, last k or None for the open tail, observed, expected)` per bin.
    pub bins: Vec<(u64, Option<u64>, u64, f64)>,
}

impl GofResult {
    pub fn passed(&self) -> bool {
        self.statistic < self.critical
    }
}

pub const GOF_SIGNIFICANCE: f64 = 0.001;

/// Pearson chi-square goodness of fit of integer samples against `pmf`.
///
/// Consecutive outcomes are pooled from the low end until each bin expects
/// at least five samples; whatever remains, including the unbounded upper
/// tail, joins the last bin.
pub fn chi_square_gof(samples: &[u64], pmf: impl Fn(u64) -> f64) -> GofResult {
    let n = samples.len() as f64;
    let max_sample = samples.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0u64; max_sample as usize + 1];
    for &s in samples {
        counts[s as usize] += 1;
    }

    let mut bins: Vec<(u64, Option<u64>, u64, f64)> = Vec::new();
    let mut start = 0u64;
    let (mut observed, mut expected, mut mass) = (0u64, 0.0f64, 0.0f64);
    let mut k = 0u64;
    while mass < 1.0 - 1e-12 && k <= max_sample.max(10_000) {
        let p = pmf(k);
        mass += p;
        expected += n * p;
        observed += counts.get(k as usize).copied().unwrap_or(0);
        if expected >= 5.0 && n * (1.0 - mass) >= 5.0 {
            bins.push((start, Some(k), observed, expected));
            start = k + 1;
            observed = 0;
            expected = 0.0;
        }
        k += 1;
    }
    observed += counts.iter().skip(k as usize).sum::<u64>();
    expected += n * (1.0 - mass).max(0.0);
    match bins.last_mut() {
        Some(last) if expected < 5.0 => {
            last.1 = None;
            last.2 += observed;
            last.3 += expected;
        }
        _ => bins.push((start, None, observed, expected)),
    }

    let statistic = bins.iter().map(|&(_, _, o, e)| (o as f64 - e).powi(2) / e).sum();
    let degrees_of_freedom = bins.len().saturating_sub(1).max(1);
    let critical = ChiSquared::new(degrees_of_freedom as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - GOF_SIGNIFICANCE);
    GofResult { statistic, degrees_of_freedom, critical, bins }
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and sample standard deviation.
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let (mean, se) = mean_and_se(values);
    (mean, se * (values.len() as f64).sqrt())
}
