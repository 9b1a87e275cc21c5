//! Type I / type II sampling, pattern sampling and sample accounting.
//!
//! Black-box access to a distribution goes through [`SampleSource`]. The
//! production source is a [`Metered`] view of an [`AliasSampler`], which
//! counts every raw draw so that algorithms can be audited against their
//! sample budgets.

mod concentration;
mod exact;
mod signatures;

pub use concentration::{outlier_frequency, weight_exceedance, ExceedanceReport};
pub use exact::{
    bridge_check, bridge_check_enumerated, config_prob_type1, config_prob_type2,
    count_compositions, enumerate_bounded, enumerate_compositions, BridgeReport, BridgeRow,
    ENUMERATION_LIMIT,
};
pub use signatures::{
    extract_signatures, reconstruct_sigs, training_marginals, IdentityCheck, Reconstruction,
    SignatureHistogram,
};

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDistribution;
use crate::error::{Error, Result};

/// Per-element occurrence counts of a sample (balls per bin).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ConfigurationFile", into = "ConfigurationFile")]
pub struct Configuration {
    counts: Vec<u32>,
    total: u64,
    max: u32,
}

#[derive(Serialize, Deserialize)]
struct ConfigurationFile {
    counts: Vec<u32>,
}

impl TryFrom<ConfigurationFile> for Configuration {
    type Error = Error;

    fn try_from(f: ConfigurationFile) -> Result<Self> {
        Ok(Configuration::new(f.counts))
    }
}

impl From<Configuration> for ConfigurationFile {
    fn from(c: Configuration) -> Self {
        ConfigurationFile { counts: c.counts }
    }
}

impl Configuration {
    pub fn new(counts: Vec<u32>) -> Self {
        let total = counts.iter().map(|&c| c as u64).sum();
        let max = counts.iter().copied().max().unwrap_or(0);
        Self { counts, total, max }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0; n])
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count(&self, x: usize) -> u32 {
        self.counts[x]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn max_count(&self) -> u32 {
        self.max
    }

    /// `W = Σ aᵢ cᵢ`.
    pub fn weight(&self, a: &[f64]) -> f64 {
        self.counts.iter().zip(a).map(|(&c, &w)| c as f64 * w).sum()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("configuration serialises")
    }
}

/// A black box producing i.i.d. element ids.
pub trait SampleSource {
    fn domain_size(&self) -> usize;
    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize;
    /// Raw draws consumed so far.
    fn drawn(&self) -> u64;
}

/// O(1)-per-draw sampler backed by an alias table.
#[derive(Debug, Clone)]
pub struct AliasSampler {
    table: WeightedAliasIndex<f64>,
    dist: DiscreteDistribution,
}

impl AliasSampler {
    pub fn new(dist: &DiscreteDistribution) -> Self {
        let table = WeightedAliasIndex::new(dist.probs().to_vec())
            .expect("a validated distribution has a positive finite total weight");
        Self {
            table,
            dist: dist.clone(),
        }
    }

    pub fn distribution(&self) -> &DiscreteDistribution {
        &self.dist
    }

    pub fn n(&self) -> usize {
        self.dist.n()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.table.sample(rng)
    }

    /// A fresh metered view with a zeroed draw counter.
    pub fn source(&self) -> Metered<'_> {
        Metered {
            sampler: self,
            drawn: 0,
        }
    }
}

/// Counting view of an [`AliasSampler`].
#[derive(Debug)]
pub struct Metered<'a> {
    sampler: &'a AliasSampler,
    drawn: u64,
}

impl Metered<'_> {
    pub fn sampler(&self) -> &AliasSampler {
        self.sampler
    }
}

impl SampleSource for Metered<'_> {
    fn domain_size(&self) -> usize {
        self.sampler.n()
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        self.drawn += 1;
        self.sampler.sample(rng)
    }

    fn drawn(&self) -> u64 {
        self.drawn
    }
}

/// Raw draws consumed from each of the three black boxes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub p: u64,
    pub q: u64,
    pub t: u64,
}

impl SampleBudget {
    pub fn total(&self) -> u64 {
        self.p + self.q + self.t
    }
}

impl std::ops::Add for SampleBudget {
    type Output = SampleBudget;

    fn add(self, o: SampleBudget) -> SampleBudget {
        SampleBudget {
            p: self.p + o.p,
            q: self.q + o.q,
            t: self.t + o.t,
        }
    }
}

impl std::ops::AddAssign for SampleBudget {
    fn add_assign(&mut self, o: SampleBudget) {
        *self = *self + o;
    }
}

/// Type I sampling: `s` i.i.d. draws, tallied into a configuration.
pub fn sample_type1<S: SampleSource, R: Rng + ?Sized>(
    src: &mut S,
    s: u64,
    rng: &mut R,
) -> Configuration {
    let mut counts = vec![0u32; src.domain_size()];
    for _ in 0..s {
        counts[src.draw(rng)] += 1;
    }
    Configuration::new(counts)
}

/// Type II sampling: element `i` is selected once per head in `s` independent
/// `pᵢ`-biased coin flips. The total is random.
pub fn sample_type2<R: Rng + ?Sized>(
    d: &DiscreteDistribution,
    s: u64,
    rng: &mut R,
) -> Configuration {
    let counts = d
        .probs()
        .iter()
        .map(|&p| {
            let bin = Binomial::new(s, p.clamp(0.0, 1.0)).expect("p within [0, 1]");
            bin.sample(rng) as u32
        })
        .collect();
    Configuration::new(counts)
}

/// Sampling according to a pattern: draws `m = max cᵢ` fresh samples and
/// keeps the `i`-th one iff its element has count at least `i`. Returns the
/// size of the kept multiset, whose expectation is `Σ cᵢ pᵢ`.
#[inline]
pub fn pattern_sample<S: SampleSource, R: Rng + ?Sized>(
    cfg: &Configuration,
    src: &mut S,
    rng: &mut R,
) -> u64 {
    let counts = cfg.counts();
    let mut kept = 0;
    for round in 1..=cfg.max_count() {
        if counts[src.draw(rng)] >= round {
            kept += 1;
        }
    }
    kept
}

/// Like [`pattern_sample`] but also returns the kept elements.
pub fn pattern_sample_multiset<S: SampleSource, R: Rng + ?Sized>(
    cfg: &Configuration,
    src: &mut S,
    rng: &mut R,
) -> Vec<usize> {
    (1..=cfg.max_count())
        .filter_map(|round| {
            let x = src.draw(rng);
            (cfg.count(x) >= round).then_some(x)
        })
        .collect()
}
