//! Signatures `m_{ijk}`: how many elements were drawn `i` times while training
//! on P, `j` times while training on Q and `k` times during testing.

use std::collections::BTreeMap;

use serde::Serialize;

use super::Configuration;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignatureHistogram {
    m: BTreeMap<(u32, u32, u32), u64>,
    n: usize,
    s: u64,
}

impl SignatureHistogram {
    /// Builds a histogram from raw counts, checking that it covers `n`
    /// elements and `s` testing draws.
    pub fn from_counts(m: BTreeMap<(u32, u32, u32), u64>, n: usize, s: u64) -> Result<Self> {
        let elements: u64 = m.values().sum();
        let draws: u64 = m.iter().map(|(&(_, _, k), &c)| k as u64 * c).sum();
        if elements != n as u64 || draws != s {
            return Err(Error::Precondition(format!(
                "histogram covers {elements} elements and {draws} testing draws, expected {n} and {s}"
            )));
        }
        Ok(Self { m, n, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Testing-phase size.
    pub fn s(&self) -> u64 {
        self.s
    }

    pub fn get(&self, i: u32, j: u32, k: u32) -> u64 {
        self.m.get(&(i, j, k)).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32, u32), u64)> + '_ {
        self.m.iter().map(|(&key, &v)| (key, v))
    }

    /// `m_{ij*}`.
    pub fn m_ij_star(&self, i: u32, j: u32) -> u64 {
        self.m.range((i, j, 0)..=(i, j, u32::MAX)).map(|(_, &c)| c).sum()
    }

    /// `m_{ij+}`: elements of training signature `(i, j)` seen at least once
    /// in testing.
    pub fn m_ij_plus(&self, i: u32, j: u32) -> u64 {
        self.m.range((i, j, 1)..=(i, j, u32::MAX)).map(|(_, &c)| c).sum()
    }

    /// `h(i, j) = Σₖ k·m_{ijk}`: testing draws that landed on elements of
    /// training signature `(i, j)`.
    pub fn hits(&self, i: u32, j: u32) -> u64 {
        self.m
            .range((i, j, 0)..=(i, j, u32::MAX))
            .map(|(&(_, _, k), &c)| k as u64 * c)
            .sum()
    }

    /// Histogram of the training phase alone, `(i, j) ↦ m_{ij*}`.
    pub fn training_marginals(&self) -> BTreeMap<(u32, u32), u64> {
        let mut out = BTreeMap::new();
        for (&(i, j, _), &c) in &self.m {
            *out.entry((i, j)).or_insert(0) += c;
        }
        out
    }
}

pub fn extract_signatures(
    train_p: &Configuration,
    train_q: &Configuration,
    test: &Configuration,
) -> Result<SignatureHistogram> {
    for other in [train_q, test] {
        if other.n() != train_p.n() {
            return Err(Error::DimensionMismatch {
                left: train_p.n(),
                right: other.n(),
            });
        }
    }
    let mut m = BTreeMap::new();
    for x in 0..train_p.n() {
        *m.entry((train_p.count(x), train_q.count(x), test.count(x)))
            .or_insert(0) += 1;
    }
    Ok(SignatureHistogram {
        m,
        n: train_p.n(),
        s: test.total(),
    })
}

/// `(i, j) ↦ m_{ij*}` straight from the training configurations.
pub fn training_marginals(
    train_p: &Configuration,
    train_q: &Configuration,
) -> Result<BTreeMap<(u32, u32), u64>> {
    if train_p.n() != train_q.n() {
        return Err(Error::DimensionMismatch {
            left: train_p.n(),
            right: train_q.n(),
        });
    }
    let mut out = BTreeMap::new();
    for (&i, &j) in train_p.counts().iter().zip(train_q.counts()) {
        *out.entry((i, j)).or_insert(0) += 1;
    }
    Ok(out)
}

/// One reconstructed signature count against its direct count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    /// `None` when the identity does not produce an integer.
    pub reconstructed: Option<i64>,
    pub direct: i64,
}

impl IdentityCheck {
    pub fn matches(&self) -> bool {
        self.reconstructed == Some(self.direct)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Reconstruction {
    Checked(Vec<IdentityCheck>),
    NotApplicable(String),
}

impl Reconstruction {
    pub fn all_match(&self) -> bool {
        matches!(self, Reconstruction::Checked(v) if v.iter().all(IdentityCheck::matches))
    }
}

/// Recomputes the remaining low-order signature counts from
/// `{m₁₀₁, m₀₁₁, m₀₀₁}` and the training marginals, and compares each with
/// the directly counted value.
///
/// Applies only when every testing hit lands on a training signature in
/// `{(0,0), (1,0), (0,1)}`, no element is tested more than twice, and double
/// testing hits occur only on `(0,0)` elements.
pub fn reconstruct_sigs(h: &SignatureHistogram, s: u64) -> Reconstruction {
    if s != h.s() {
        return Reconstruction::NotApplicable(format!(
            "histogram holds {} testing draws, asked about {s}",
            h.s()
        ));
    }
    for ((i, j, k), c) in h.iter() {
        if c == 0 || k == 0 {
            continue;
        }
        if k > 2 {
            return Reconstruction::NotApplicable(format!("testing count {k} at ({i},{j},{k})"));
        }
        if !matches!((i, j), (0, 0) | (1, 0) | (0, 1)) {
            return Reconstruction::NotApplicable(format!(
                "testing hit on training signature ({i},{j})"
            ));
        }
        if k == 2 && (i, j) != (0, 0) {
            return Reconstruction::NotApplicable(format!("double testing hit at ({i},{j},2)"));
        }
    }
    let g = |i, j, k| h.get(i, j, k) as i64;
    let star = |i, j| h.m_ij_star(i, j) as i64;
    let (m101, m011, m001) = (g(1, 0, 1), g(0, 1, 1), g(0, 0, 1));

    let twice = s as i64 - m101 - m011 - m001;
    let m002 = (twice >= 0 && twice % 2 == 0).then_some(twice / 2);
    let checks = vec![
        IdentityCheck {
            name: "m002 = (s - m101 - m011 - m001) / 2",
            reconstructed: m002,
            direct: g(0, 0, 2),
        },
        IdentityCheck {
            name: "m100 = m10* - m101",
            reconstructed: Some(star(1, 0) - m101),
            direct: g(1, 0, 0),
        },
        IdentityCheck {
            name: "m010 = m01* - m011",
            reconstructed: Some(star(0, 1) - m011),
            direct: g(0, 1, 0),
        },
        IdentityCheck {
            name: "m000 = m00* - m002 - m001",
            reconstructed: m002.map(|m002| star(0, 0) - m002 - m001),
            direct: g(0, 0, 0),
        },
        IdentityCheck {
            name: "m020 = m02*",
            reconstructed: Some(star(0, 2)),
            direct: g(0, 2, 0),
        },
        IdentityCheck {
            name: "m200 = m20*",
            reconstructed: Some(star(2, 0)),
            direct: g(2, 0, 0),
        },
    ];
    Reconstruction::Checked(checks)
}
