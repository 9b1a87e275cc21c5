//! Collision-based estimation of `‖P‖₂²` and the Bernoulli comparison bound.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::{pattern_sample, sample_type1, AliasSampler, SampleSource};

/// Fresh attempts after a failed one.
pub const DEFAULT_RETRIES: u32 = 3;
pub const MIN_L: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L2Estimate {
    /// `raw_hits / l²`; `None` when every attempt failed.
    pub value: Option<f64>,
    pub l: u64,
    pub raw_hits: u64,
    pub failed: bool,
    pub attempts: u32,
    pub draws_used: u64,
}

/// Hard cap on raw draws for one estimate, `2·l·ln l + l`.
pub fn draw_cap(l: u64) -> f64 {
    let lf = l as f64;
    2.0 * lf * lf.ln() + lf
}

/// Largest pattern length a non-failing training configuration can have.
fn max_pattern(l: u64) -> u64 {
    ((l as f64).ln().ceil() as u64).saturating_sub(1)
}

/// Estimates `‖P‖₂²` from `l` training draws and `l` pattern samples, with
/// up to [`DEFAULT_RETRIES`] fresh attempts after a failure.
pub fn estimate_l2_squared<S: SampleSource, R: Rng + ?Sized>(
    src: &mut S,
    l: u64,
    rng: &mut R,
) -> Result<L2Estimate> {
    estimate_l2_squared_with(src, l, DEFAULT_RETRIES, rng)
}

/// As [`estimate_l2_squared`] with an explicit retry count. A retry is only
/// started when a worst-case attempt still fits under [`draw_cap`].
pub fn estimate_l2_squared_with<S: SampleSource, R: Rng + ?Sized>(
    src: &mut S,
    l: u64,
    retries: u32,
    rng: &mut R,
) -> Result<L2Estimate> {
    if l < MIN_L {
        return Err(Error::Precondition(format!("estimator needs l >= {MIN_L}, got {l}")));
    }
    let start = src.drawn();
    let threshold = (l as f64).ln();
    let worst_attempt = l * (1 + max_pattern(l));
    let cap = draw_cap(l);
    let mut attempts = 0;
    let mut outcome = None;
    loop {
        attempts += 1;
        let train = sample_type1(src, l, rng);
        if (train.max_count() as f64) < threshold {
            let hits: u64 = (0..l).map(|_| pattern_sample(&train, src, rng)).sum();
            outcome = Some(hits);
            break;
        }
        let used = src.drawn() - start;
        if attempts > retries || (used + worst_attempt) as f64 > cap {
            break;
        }
    }
    let draws_used = src.drawn() - start;
    assert!(
        draws_used as f64 <= cap,
        "estimator used {draws_used} draws, cap is {cap}"
    );
    let l2 = (l * l) as f64;
    Ok(L2Estimate {
        value: outcome.map(|h| h as f64 / l2),
        l,
        raw_hits: outcome.unwrap_or(0),
        failed: outcome.is_none(),
        attempts,
        draws_used,
    })
}

/// `2·exp(−(α−β)² / (8(α+β)))` clamped to `[0, 1]`; 1 when both are zero.
pub fn bernoulli_tail_bound(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha >= 0.0 && beta >= 0.0) || !(alpha + beta).is_finite() {
        return Err(Error::Precondition(format!(
            "tail bound needs finite alpha, beta >= 0, got ({alpha}, {beta})"
        )));
    }
    if alpha + beta == 0.0 {
        return Ok(1.0);
    }
    let d = alpha - beta;
    Ok((2.0 * (-d * d / (8.0 * (alpha + beta))).exp()).clamp(0.0, 1.0))
}

/// Independent Bernoulli coins grouped by bias; sums are drawn per group
/// with a binomial, which has the same law as flipping each coin.
#[derive(Debug, Clone)]
pub struct CoinBag {
    groups: Vec<Binomial>,
    mean: f64,
}

impl CoinBag {
    pub fn new(biases: &[f64]) -> Result<Self> {
        let mut sorted: Vec<f64> = biases.to_vec();
        if let Some(b) = sorted.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::Precondition(format!("coin bias {b} outside [0, 1]")));
        }
        sorted.sort_by(f64::total_cmp);
        let mut groups = Vec::new();
        for chunk in sorted.chunk_by(|a, b| a == b) {
            groups.push(Binomial::new(chunk.len() as u64, chunk[0]).expect("bias validated"));
        }
        Ok(Self {
            groups,
            mean: biases.iter().sum(),
        })
    }

    pub fn uniform(count: usize, bias: f64) -> Result<Self> {
        Self::new(&vec![bias; count])
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.groups.iter().map(|g| g.sample(rng)).sum()
    }
}

/// Empirical `Pr[Σx ≥ Σy]`.
pub fn bernoulli_dominance<R: Rng + ?Sized>(
    x: &CoinBag,
    y: &CoinBag,
    trials: u64,
    rng: &mut R,
) -> f64 {
    let hits = (0..trials).filter(|_| x.sample(rng) >= y.sample(rng)).count();
    hits as f64 / trials as f64
}

/// Paired estimates of `‖P‖₂²` and `‖T‖₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub l: u64,
    pub trials: u64,
    /// Trials in which both estimates succeeded.
    pub compared: u64,
    pub p_greater: u64,
    pub p_less: u64,
    pub ties: u64,
    pub failures: u64,
    pub max_draws: u64,
}

impl ComparisonReport {
    fn frac(&self, k: u64) -> f64 {
        if self.compared == 0 {
            f64::NAN
        } else {
            k as f64 / self.compared as f64
        }
    }

    pub fn greater_rate(&self) -> f64 {
        self.frac(self.p_greater)
    }

    pub fn less_rate(&self) -> f64 {
        self.frac(self.p_less)
    }

    pub fn tie_rate(&self) -> f64 {
        self.frac(self.ties)
    }

    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }
}

/// Runs `trials` paired estimates; trial `i` uses the stream derived from
/// `(seed, i)`.
pub fn two_norm_comparison_experiment(
    p: &AliasSampler,
    t: &AliasSampler,
    l: u64,
    trials: u64,
    seed: u64,
) -> Result<ComparisonReport> {
    if trials == 0 {
        return Err(Error::Precondition("comparison needs at least one trial".into()));
    }
    let mut r = ComparisonReport {
        l,
        trials,
        compared: 0,
        p_greater: 0,
        p_less: 0,
        ties: 0,
        failures: 0,
        max_draws: 0,
    };
    for i in 0..trials {
        let mut rng = rng_from_seed(derive_seed(seed, i));
        let ep = estimate_l2_squared(&mut p.source(), l, &mut rng)?;
        let et = estimate_l2_squared(&mut t.source(), l, &mut rng)?;
        r.max_draws = r.max_draws.max(ep.draws_used).max(et.draws_used);
        match (ep.failed || et.failed, ep.raw_hits.cmp(&et.raw_hits)) {
            (true, _) => r.failures += 1,
            (false, std::cmp::Ordering::Greater) => r.p_greater += 1,
            (false, std::cmp::Ordering::Less) => r.p_less += 1,
            (false, std::cmp::Ordering::Equal) => r.ties += 1,
        }
        if !(ep.failed || et.failed) {
            r.compared += 1;
        }
    }
    Ok(r)
}

/// `l(‖T‖₂² − ‖P‖₂²) ≥ 4·ln^{3/2}(l)·(‖P‖₂ + ‖T‖₂)`.
pub fn comparison_gap_holds(p_l2_squared: f64, t_l2_squared: f64, l: u64) -> bool {
    let lf = l as f64;
    lf * (t_l2_squared - p_l2_squared)
        >= 4.0 * lf.ln().powf(1.5) * (p_l2_squared.sqrt() + t_l2_squared.sqrt())
}
