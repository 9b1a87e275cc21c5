//! Monte Carlo checks on type I configurations: weight deviations and
//! outlier counts.

use serde::Serialize;

use super::{sample_type1, AliasSampler};
use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExceedanceReport {
    pub s: u64,
    pub n: usize,
    pub trials: u64,
    /// `s·Σ pᵢ aᵢ`.
    pub expected_weight: f64,
    /// `2·(ln s)^{3/2}·‖A‖₂`.
    pub threshold: f64,
    pub exceedances: u64,
    pub frequency: f64,
    pub max_deviation: f64,
}

/// Frequency of `|W − E[W]| ≥ 2(ln s)^{3/2}‖A‖₂` where `W = Σ cᵢ aᵢ` over
/// `s` i.i.d. draws. Trial `i` runs on the stream derived from `(seed, i)`.
pub fn weight_exceedance(
    sampler: &AliasSampler,
    a: &[f64],
    s: u64,
    trials: u64,
    seed: u64,
) -> Result<ExceedanceReport> {
    if a.len() != sampler.n() {
        return Err(Error::DimensionMismatch {
            left: sampler.n(),
            right: a.len(),
        });
    }
    if s < 2 || trials == 0 {
        return Err(Error::Precondition(format!(
            "weight concentration needs s >= 2 and trials >= 1, got s = {s}, trials = {trials}"
        )));
    }
    let p = sampler.distribution().probs();
    let expected: f64 = s as f64 * p.iter().zip(a).map(|(p, a)| p * a).sum::<f64>();
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = 2.0 * (s as f64).ln().powf(1.5) * norm;
    let mut exceedances = 0;
    let mut max_deviation = 0.0f64;
    for i in 0..trials {
        let mut rng = stream(seed, i);
        let w = sample_type1(&mut sampler.source(), s, &mut rng).weight(a);
        let dev = (w - expected).abs();
        max_deviation = max_deviation.max(dev);
        if (threshold > 0.0 && dev >= threshold) || (threshold == 0.0 && dev > 0.0) {
            exceedances += 1;
        }
    }
    Ok(ExceedanceReport {
        s,
        n: sampler.n(),
        trials,
        expected_weight: expected,
        threshold,
        exceedances,
        frequency: exceedances as f64 / trials as f64,
        max_deviation,
    })
}

/// Fraction of `s`-draw configurations whose largest count exceeds `ln s`.
pub fn outlier_frequency(sampler: &AliasSampler, s: u64, trials: u64, seed: u64) -> f64 {
    let limit = (s as f64).ln();
    let hits = (0..trials)
        .filter(|&i| {
            let mut rng = stream(seed, i);
            sample_type1(&mut sampler.source(), s, &mut rng).max_count() as f64 > limit
        })
        .count();
    hits as f64 / trials as f64
}
