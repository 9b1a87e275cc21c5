//! Finite distributions, separation parameters and the weakly disjoint model.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Tolerance on `Σp = 1` for an in-memory distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// A distribution file whose mass is off by at most this much is renormalised.
pub const FILE_NORMALIZE_TOLERANCE: f64 = 1e-6;
/// Default relative tolerance for the weak-disjointness equality test.
pub const DEFAULT_DISJOINT_TOL: f64 = 1e-12;
/// Universal constant used to gate lower-bound experiments (`s ≤ numsamples / c`).
pub const DEFAULT_LOWER_BOUND_C: f64 = 10.0;

/// A probability vector over the domain `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {p}, expected a finite non-negative value"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalises arbitrary non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {sum}, expected a positive finite value"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::InvalidDistribution(format!(
                "point mass at {at} outside domain of size {n}"
            )));
        }
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Ok(Self { probs })
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    pub fn l2_squared(&self) -> f64 {
        self.probs.iter().map(|p| p * p).sum()
    }

    /// Mass of the given element set.
    pub fn mass<'a>(&self, ids: impl IntoIterator<Item = &'a usize>) -> f64 {
        ids.into_iter().map(|&i| self.probs[i]).sum()
    }

    /// Parses the dense (`{"n", "probs"}`) or sparse (`{"n", "entries"}`) JSON
    /// form. Mass within [`FILE_NORMALIZE_TOLERANCE`] of one is renormalised;
    /// anything further off is rejected.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: DistributionFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let probs = match file {
            DistributionFile::Dense { n, probs } => {
                if probs.len() != n {
                    return Err(Error::Format(format!(
                        "n = {n} but {} probabilities given",
                        probs.len()
                    )));
                }
                probs
            }
            DistributionFile::Sparse { n, entries } => {
                let mut probs = vec![0.0; n];
                let mut seen = BTreeSet::new();
                for (id, p) in entries {
                    if id >= n {
                        return Err(Error::Format(format!("entry id {id} outside domain {n}")));
                    }
                    if !seen.insert(id) {
                        return Err(Error::Format(format!("duplicate entry id {id}")));
                    }
                    probs[id] = p;
                }
                probs
            }
        };
        if probs.is_empty() {
            return Err(Error::Format("empty domain".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Format("negative or non-finite probability".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > FILE_NORMALIZE_TOLERANCE {
            return Err(Error::Format(format!(
                "probabilities sum to {sum}, more than {FILE_NORMALIZE_TOLERANCE} away from 1"
            )));
        }
        Self::from_weights(probs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Dense JSON form, `{"n": .., "probs": [..]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "n": self.n(), "probs": self.probs })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistributionFile {
    Dense { n: usize, probs: Vec<f64> },
    Sparse { n: usize, entries: Vec<(usize, f64)> },
}

fn check_same_domain(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.n() != q.n() {
        return Err(Error::DimensionMismatch {
            left: p.n(),
            right: q.n(),
        });
    }
    Ok(())
}

/// Norm-derived quantities controlling how many samples separate a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationParams {
    pub l1: f64,
    pub l2_diff: f64,
    pub l2_sum: f64,
    pub l3_diff: f64,
    pub linf_p: f64,
    pub linf_q: f64,
    /// `‖P−Q‖₂² / ‖P+Q‖₂`.
    pub alpha: f64,
    /// `‖P+Q‖₂ / ‖P−Q‖₂²`; `+∞` for identical inputs.
    pub numsamples: f64,
    /// `⌈60·|ln α|^{7/2} / α⌉`, absent when the inputs are identical.
    pub theorem_s: Option<u64>,
    pub identical: bool,
}

impl SeparationParams {
    /// Largest `s` satisfying the lower-bound preconditions
    /// `s ≤ min{0.25/‖P−Q‖₃, 1/‖P‖∞, 1/‖Q‖∞, numsamples/c}`.
    pub fn lower_bound_s_max(&self, c: f64) -> f64 {
        let caps = [
            0.25 / self.l3_diff,
            1.0 / self.linf_p,
            1.0 / self.linf_q,
            self.numsamples / c,
        ];
        caps.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Whether every `p_i, q_i ≤ 1/(2s)`, the small-probability condition of
    /// the upper bound.
    pub fn small_probability_condition(&self, s: f64) -> bool {
        self.linf_p.max(self.linf_q) <= 1.0 / (2.0 * s)
    }
}

pub fn norms(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<SeparationParams> {
    check_same_domain(p, q)?;
    let (mut l1, mut l2d, mut l2s, mut l3) = (0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        let d = (a - b).abs();
        l1 += d;
        l2d += d * d;
        l3 += d * d * d;
        l2s += (a + b) * (a + b);
    }
    let l2_diff = l2d.sqrt();
    let l2_sum = l2s.sqrt();
    let identical = l2d == 0.0;
    let alpha = l2d / l2_sum;
    let numsamples = if identical { f64::INFINITY } else { l2_sum / l2d };
    let theorem_s = if identical {
        None
    } else {
        let s = (60.0 * alpha.ln().abs().powf(3.5) / alpha).ceil().max(1.0);
        (s.is_finite() && s < u64::MAX as f64).then_some(s as u64)
    };
    Ok(SeparationParams {
        l1,
        l2_diff,
        l2_sum,
        l3_diff: l3.cbrt(),
        linf_p: p.max_prob(),
        linf_q: q.max_prob(),
        alpha,
        numsamples,
        theorem_s,
        identical,
    })
}

/// Three-way partition of the domain of a weakly disjoint pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeaklyDisjointDecomposition {
    pub common: BTreeSet<usize>,
    pub disjoint_p: BTreeSet<usize>,
    pub disjoint_q: BTreeSet<usize>,
    pub common_mass: f64,
    pub disjoint_mass_p: f64,
    pub disjoint_mass_q: f64,
}

impl WeaklyDisjointDecomposition {
    pub fn is_common(&self, x: usize) -> bool {
        self.common.contains(&x)
    }

    pub fn is_disjoint(&self, x: usize) -> bool {
        self.disjoint_p.contains(&x) || self.disjoint_q.contains(&x)
    }
}

/// Splits the domain into common elements (`p = q`) and the elements owned by
/// exactly one side. `tol` is relative to the larger of the two values.
pub fn weakly_disjoint_decompose(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    tol: f64,
) -> Result<WeaklyDisjointDecomposition> {
    check_same_domain(p, q)?;
    let mut out = WeaklyDisjointDecomposition {
        common: BTreeSet::new(),
        disjoint_p: BTreeSet::new(),
        disjoint_q: BTreeSet::new(),
        common_mass: 0.0,
        disjoint_mass_p: 0.0,
        disjoint_mass_q: 0.0,
    };
    for (x, (&a, &b)) in p.probs().iter().zip(q.probs()).enumerate() {
        let scale = a.max(b);
        if (a - b).abs() <= tol * scale {
            out.common.insert(x);
            out.common_mass += a;
        } else if b <= tol * a {
            out.disjoint_p.insert(x);
            out.disjoint_mass_p += a;
        } else if a <= tol * b {
            out.disjoint_q.insert(x);
            out.disjoint_mass_q += b;
        } else {
            return Err(Error::NotWeaklyDisjoint { element: x });
        }
    }
    Ok(out)
}

/// Hard benchmark pair on `n` elements: a common heavy block of `h ≈ n^{2/3}`
/// elements (rounded up to even) carrying mass 1/2 under both sides, and the
/// remaining `n − h` elements split into two halves, each half carrying the
/// other 1/2 of one side uniformly.
pub fn make_hard_pair(n: usize) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    if n < 8 || n % 4 != 0 {
        return Err(Error::Precondition(format!(
            "hard pair needs n >= 8 and divisible by 4, got {n}"
        )));
    }
    let heavy = heavy_block_size(n);
    let light = (n - heavy) / 2;
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let heavy_prob = 0.5 / heavy as f64;
    let light_prob = 0.5 / light as f64;
    for x in 0..heavy {
        p[x] = heavy_prob;
        q[x] = heavy_prob;
    }
    for x in heavy..heavy + light {
        p[x] = light_prob;
    }
    for x in heavy + light..n {
        q[x] = light_prob;
    }
    let p = DiscreteDistribution::from_weights(p)?;
    let q = DiscreteDistribution::from_weights(q)?;

    let params = norms(&p, &q)?;
    let s = params.numsamples / DEFAULT_LOWER_BOUND_C;
    if s * params.l3_diff > 0.25 || s * params.linf_p > 1.0 || s * params.linf_q > 1.0 {
        return Err(Error::Precondition(format!(
            "hard pair on n = {n} misses the lower-bound preconditions at s = {s}"
        )));
    }
    Ok((p, q))
}

/// `⌈n^{2/3}⌉`, bumped to the next even number. Integer arithmetic keeps
/// perfect cubes exact.
fn heavy_block_size(n: usize) -> usize {
    let target = (n as u128) * (n as u128);
    let mut h = (n as f64).powf(2.0 / 3.0).floor() as u128;
    while h > 0 && h * h * h >= target {
        h -= 1;
    }
    while h * h * h < target {
        h += 1;
    }
    let h = h as usize;
    h + h % 2
}

/// A base pair together with a domain permutation applied to both sides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutedPair {
    pub base_p: DiscreteDistribution,
    pub base_q: DiscreteDistribution,
    /// `perm[j]` is the image of base element `j`.
    pub perm: Vec<usize>,
    pub seed: u64,
    p: DiscreteDistribution,
    q: DiscreteDistribution,
}

impl PermutedPair {
    /// `πP`: `p[perm[j]] = base_p[j]`.
    pub fn p(&self) -> &DiscreteDistribution {
        &self.p
    }

    pub fn q(&self) -> &DiscreteDistribution {
        &self.q
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (j, &i) in self.perm.iter().enumerate() {
            inv[i] = j;
        }
        inv
    }
}

/// Applies a uniformly random permutation, drawn from `seed`, to both sides.
pub fn apply_permutation(
    pair: (&DiscreteDistribution, &DiscreteDistribution),
    seed: u64,
) -> Result<PermutedPair> {
    let (base_p, base_q) = pair;
    check_same_domain(base_p, base_q)?;
    let n = base_p.n();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let permute = |d: &DiscreteDistribution| {
        let mut out = vec![0.0; n];
        for (j, &i) in perm.iter().enumerate() {
            out[i] = d.prob(j);
        }
        DiscreteDistribution { probs: out }
    };
    Ok(PermutedPair {
        p: permute(base_p),
        q: permute(base_q),
        base_p: base_p.clone(),
        base_q: base_q.clone(),
        perm,
        seed,
    })
}
