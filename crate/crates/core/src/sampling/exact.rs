//! Exact configuration probabilities and the type I / type II bridge check.

use serde::Serialize;
use statrs::function::factorial::{ln_binomial, ln_factorial};

use super::Configuration;
use crate::dist::DiscreteDistribution;
use crate::error::{Error, Result};

/// Largest instance the exact machinery agrees to work on.
pub const ENUMERATION_LIMIT: f64 = 1e6;

fn guard(size: f64) -> Result<()> {
    if size > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

fn check_dims(d: &DiscreteDistribution, cfg: &Configuration) -> Result<()> {
    if d.n() != cfg.n() {
        return Err(Error::DimensionMismatch {
            left: d.n(),
            right: cfg.n(),
        });
    }
    Ok(())
}

/// `c·ln p` with `0·ln 0 = 0`.
fn xlogy(c: f64, p: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * p.ln()
    }
}

/// Probability of `cfg` under type I sampling with `cfg.total()` draws
/// (multinomial), evaluated in log space.
pub fn config_prob_type1(d: &DiscreteDistribution, cfg: &Configuration) -> Result<f64> {
    check_dims(d, cfg)?;
    guard(d.n() as f64 * cfg.total() as f64)?;
    let mut log = ln_factorial(cfg.total());
    for (&c, &p) in cfg.counts().iter().zip(d.probs()) {
        log += xlogy(c as f64, p) - ln_factorial(c as u64);
    }
    Ok(log.exp())
}

/// Probability of `cfg` under type II sampling with `s` coin flips per bin.
pub fn config_prob_type2(d: &DiscreteDistribution, cfg: &Configuration, s: u64) -> Result<f64> {
    check_dims(d, cfg)?;
    guard(d.n() as f64 * s as f64)?;
    let mut log = 0.0;
    for (x, (&c, &p)) in cfg.counts().iter().zip(d.probs()).enumerate() {
        let c = c as u64;
        if c > s {
            return Err(Error::CountExceedsTrials {
                element: x,
                count: c,
                limit: s,
            });
        }
        log += ln_binomial(s, c) + xlogy(c as f64, p) + xlogy((s - c) as f64, 1.0 - p);
    }
    Ok(log.exp())
}

/// Number of configurations of `total` balls in `n` bins, `C(total+n−1, n−1)`.
pub fn count_compositions(n: usize, total: u64) -> f64 {
    if n == 0 {
        return if total == 0 { 1.0 } else { 0.0 };
    }
    ln_binomial(total + n as u64 - 1, n as u64 - 1).exp().round()
}

/// Every configuration of `total` balls in `n` bins.
pub fn enumerate_compositions(n: usize, total: u64) -> Result<Vec<Configuration>> {
    if n == 0 {
        return Err(Error::InvalidDistribution("empty domain".into()));
    }
    guard(count_compositions(n, total))?;
    let mut out = Vec::new();
    let mut counts = vec![0u32; n];
    fill_compositions(&mut counts, 0, total as u32, &mut out);
    Ok(out)
}

fn fill_compositions(counts: &mut [u32], at: usize, left: u32, out: &mut Vec<Configuration>) {
    if at + 1 == counts.len() {
        counts[at] = left;
        out.push(Configuration::new(counts.to_vec()));
        return;
    }
    for c in 0..=left {
        counts[at] = c;
        fill_compositions(counts, at + 1, left - c, out);
    }
}

/// Every count vector in `{0..=max}ⁿ`.
pub fn enumerate_bounded(n: usize, max: u32) -> Result<Vec<Configuration>> {
    guard((max as f64 + 1.0).powi(n as i32))?;
    let mut out = Vec::new();
    let mut counts = vec![0u32; n];
    loop {
        out.push(Configuration::new(counts.clone()));
        let mut i = 0;
        loop {
            if i == n {
                return Ok(out);
            }
            if counts[i] < max {
                counts[i] += 1;
                break;
            }
            counts[i] = 0;
            i += 1;
        }
    }
}

/// Extremes of `P^I[C] / P^II[C]` over in-regime configurations of one total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeRow {
    pub s_prime: u64,
    pub configurations: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Result of checking `(2/3)√s ≤ P^I[C]/P^II[C] ≤ 30·s^{3/2}` over every
/// configuration with all counts `≤ ln s` and total in `[s − √s, s + √s]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeReport {
    pub s: u64,
    pub n: usize,
    pub max_count: u32,
    pub window: (u64, u64),
    pub lower: f64,
    pub upper: f64,
    /// Whether every `pᵢ ≤ 1/(2s)`.
    pub small_probability: bool,
    pub rows: Vec<BridgeRow>,
}

impl BridgeReport {
    pub fn configurations(&self) -> f64 {
        self.rows.iter().map(|r| r.configurations).fold(0.0, |a, b| a + b)
    }

    pub fn min_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max)
    }

    pub fn all_within(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.min_ratio >= self.lower && r.max_ratio <= self.upper)
    }
}

struct Regime {
    max_count: u32,
    lo: u64,
    hi: u64,
}

fn regime(s: u64) -> Result<Regime> {
    if s < 2 {
        return Err(Error::Precondition(format!("bridge check needs s >= 2, got {s}")));
    }
    let sf = s as f64;
    let root = sf.sqrt();
    Ok(Regime {
        max_count: sf.ln().floor() as u32,
        lo: (sf - root).ceil().max(0.0) as u64,
        hi: (sf + root).floor() as u64,
    })
}

fn empty_report(d: &DiscreteDistribution, s: u64, r: &Regime) -> BridgeReport {
    let sf = s as f64;
    BridgeReport {
        s,
        n: d.n(),
        max_count: r.max_count,
        window: (r.lo, r.hi),
        lower: 2.0 / 3.0 * sf.sqrt(),
        upper: 30.0 * sf.powf(1.5),
        small_probability: d.max_prob() <= 1.0 / (2.0 * sf),
        rows: Vec::new(),
    }
}

/// Exact extremes of the type I / type II probability ratio over all
/// in-regime configurations.
///
/// The log ratio splits as `ln s'! − Σⱼ gⱼ(cⱼ)` with
/// `gⱼ(c) = ln(s!/(s−c)!) + (s−c)·ln(1−pⱼ)`, so the extremes for each total
/// `s'` come out of a knapsack-style dynamic program over elements without
/// listing configurations one by one.
pub fn bridge_check(d: &DiscreteDistribution, s: u64) -> Result<BridgeReport> {
    let r = regime(s)?;
    let width = r.hi as usize + 1;
    // (min Σg, max Σg, number of configurations) per running total.
    let mut state: Vec<Option<(f64, f64, f64)>> = vec![None; width];
    state[0] = Some((0.0, 0.0, 1.0));
    for &p in d.probs() {
        let mut next: Vec<Option<(f64, f64, f64)>> = vec![None; width];
        for (t, cell) in state.iter().enumerate() {
            let Some((lo, hi, cnt)) = *cell else { continue };
            for c in 0..=r.max_count as usize {
                if t + c >= width {
                    break;
                }
                if c > 0 && p == 0.0 {
                    break;
                }
                let cu = c as u64;
                let g = ln_factorial(s) - ln_factorial(s - cu) + xlogy((s - cu) as f64, 1.0 - p);
                let slot = &mut next[t + c];
                *slot = Some(match *slot {
                    None => (lo + g, hi + g, cnt),
                    Some((a, b, k)) => (a.min(lo + g), b.max(hi + g), k + cnt),
                });
            }
        }
        state = next;
    }
    let mut report = empty_report(d, s, &r);
    for s_prime in r.lo..=r.hi {
        if let Some((lo, hi, cnt)) = state[s_prime as usize] {
            let base = ln_factorial(s_prime);
            report.rows.push(BridgeRow {
                s_prime,
                configurations: cnt,
                min_ratio: (base - hi).exp(),
                max_ratio: (base - lo).exp(),
            });
        }
    }
    Ok(report)
}

/// Same report as [`bridge_check`], computed by listing every configuration
/// and evaluating both probabilities directly. Limited to small domains.
pub fn bridge_check_enumerated(d: &DiscreteDistribution, s: u64) -> Result<BridgeReport> {
    let r = regime(s)?;
    let mut report = empty_report(d, s, &r);
    let mut rows: Vec<Option<BridgeRow>> = vec![None; (r.hi - r.lo + 1) as usize];
    for cfg in enumerate_bounded(d.n(), r.max_count)? {
        let total = cfg.total();
        if total < r.lo || total > r.hi {
            continue;
        }
        let p1 = config_prob_type1(d, &cfg)?;
        let p2 = config_prob_type2(d, &cfg, s)?;
        if p1 == 0.0 && p2 == 0.0 {
            continue;
        }
        let ratio = p1 / p2;
        let row = rows[(total - r.lo) as usize].get_or_insert(BridgeRow {
            s_prime: total,
            configurations: 0.0,
            min_ratio: f64::INFINITY,
            max_ratio: 0.0,
        });
        row.configurations += 1.0;
        row.min_ratio = row.min_ratio.min(ratio);
        row.max_ratio = row.max_ratio.max(ratio);
    }
    report.rows = rows.into_iter().flatten().collect();
    Ok(report)
}
