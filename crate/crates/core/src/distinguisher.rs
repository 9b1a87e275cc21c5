//! The two-stage distinguisher and the reductions between distinguishing
//! and closeness testing.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{draw_cap, estimate_l2_squared, L2Estimate};
use crate::rng::TrialRng;
use crate::sampling::{pattern_sample, sample_type1, AliasSampler, Configuration, SampleBudget, SampleSource};

pub const MIN_S: u64 = 10;
pub const MIN_REPETITIONS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Answer {
    P,
    Q,
}

impl Answer {
    pub fn as_str(self) -> &'static str {
        match self {
            Answer::P => "P",
            Answer::Q => "Q",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Same,
    Different,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Same => "same",
            Verdict::Different => "different",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    NormStage,
    CollisionStage,
}

/// What to do when a norm estimate still fails after its retries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormFailurePolicy {
    /// Treat the norm stage as inconclusive and go on to the collision stage.
    #[default]
    SkipToCollision,
    /// Return [`Error::EstimatorFailure`].
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistinguishConfig {
    pub s: u64,
    /// Replaces `l = 30·s·ln^{3/2} s`; outputs flag its use.
    pub l_override: Option<u64>,
    pub on_norm_failure: NormFailurePolicy,
}

impl DistinguishConfig {
    pub fn new(s: u64) -> Self {
        Self {
            s,
            l_override: None,
            on_norm_failure: NormFailurePolicy::default(),
        }
    }

    pub fn with_l(mut self, l: u64) -> Self {
        self.l_override = Some(l);
        self
    }

    pub fn with_policy(mut self, policy: NormFailurePolicy) -> Self {
        self.on_norm_failure = policy;
        self
    }

    /// `⌈30·s·ln^{3/2} s⌉`.
    pub fn theorem_l(s: u64) -> u64 {
        let sf = s as f64;
        (30.0 * sf * sf.ln().powf(1.5)).ceil() as u64
    }

    pub fn l(&self) -> u64 {
        self.l_override.unwrap_or_else(|| Self::theorem_l(self.s))
    }

    pub fn l_scaled(&self) -> bool {
        self.l_override.is_some()
    }

    /// `max(3, ⌈ln s⌉)`.
    pub fn repetitions(&self) -> u32 {
        ((self.s as f64).ln().ceil() as u32).max(MIN_REPETITIONS)
    }

    fn validate(&self) -> Result<()> {
        if self.s < MIN_S {
            return Err(Error::Precondition(format!(
                "distinguisher needs s >= {MIN_S}, got {}",
                self.s
            )));
        }
        if self.l() < crate::estimators::MIN_L {
            return Err(Error::Precondition(format!(
                "accuracy parameter l = {} is below {}",
                self.l(),
                crate::estimators::MIN_L
            )));
        }
        Ok(())
    }

    /// Worst-case raw draws of one call once the training maxima are known.
    pub fn budget_bound(&self, m_p: u32, m_q: u32) -> u64 {
        let l = self.l();
        let per_estimate = draw_cap(l).floor() as u64;
        3 * self.repetitions() as u64 * per_estimate + 2 * l + self.s * (m_p as u64 + m_q as u64)
    }

    /// [`Self::budget_bound`] with both training maxima at their ceiling `l`.
    pub fn worst_budget_bound(&self) -> u64 {
        let l = self.l().min(u32::MAX as u64) as u32;
        self.budget_bound(l, l)
    }
}

/// One repetition of the norm stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormRound {
    pub p: L2Estimate,
    pub q: L2Estimate,
    pub t: L2Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CollisionStats {
    pub c_p: u64,
    pub c_q: u64,
    /// Largest count in each training configuration.
    pub m_p: u32,
    pub m_q: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionStats {
    pub rounds: Vec<NormRound>,
    /// A norm estimate failed after its retries and the stage was skipped.
    pub norm_failed: bool,
    /// T̃ sat on one side of P̃ in every round.
    pub t_consistent_with_p_side: bool,
    /// T̃ sat on one side of Q̃ in every round.
    pub t_consistent_with_q_side: bool,
    pub collision: Option<CollisionStats>,
}

impl DecisionStats {
    /// Both consistency conditions held at once.
    pub fn both_consistent(&self) -> bool {
        self.t_consistent_with_p_side && self.t_consistent_with_q_side
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub answer: Answer,
    pub stage: Stage,
    pub s: u64,
    pub l: u64,
    pub l_scaled: bool,
    pub repetitions: u32,
    pub stats: DecisionStats,
    pub budget: SampleBudget,
    pub budget_bound: u64,
}

impl Decision {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("decision serialises")
    }
}

/// `x̃ᵢ ≥ ỹᵢ` for all `i` or `x̃ᵢ ≤ ỹᵢ` for all `i`.
fn one_sided(mut pairs: impl Iterator<Item = (u64, u64)> + Clone) -> bool {
    pairs.clone().all(|(x, y)| x >= y) || pairs.all(|(x, y)| x <= y)
}

/// Collision stage from given training configurations: `s` pattern samples
/// against each, every one on fresh draws from `t`.
pub fn collision_counts<T: SampleSource, R: Rng + ?Sized>(
    train_p: &Configuration,
    train_q: &Configuration,
    t: &mut T,
    s: u64,
    rng: &mut R,
) -> (u64, u64) {
    let c_p = (0..s).map(|_| pattern_sample(train_p, t, rng)).sum();
    let c_q = (0..s).map(|_| pattern_sample(train_q, t, rng)).sum();
    (c_p, c_q)
}

/// Decides whether `t` draws from `p` or from `q`.
pub fn distinguish<P, Q, T, R>(
    p: &mut P,
    q: &mut Q,
    t: &mut T,
    cfg: &DistinguishConfig,
    rng: &mut R,
) -> Result<Decision>
where
    P: SampleSource,
    Q: SampleSource,
    T: SampleSource,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let n = p.domain_size();
    for other in [q.domain_size(), t.domain_size()] {
        if other != n {
            return Err(Error::DimensionMismatch { left: n, right: other });
        }
    }
    let start = SampleBudget {
        p: p.drawn(),
        q: q.drawn(),
        t: t.drawn(),
    };
    let (l, s, reps) = (cfg.l(), cfg.s, cfg.repetitions());

    let mut stats = DecisionStats {
        rounds: Vec::with_capacity(reps as usize),
        norm_failed: false,
        t_consistent_with_p_side: false,
        t_consistent_with_q_side: false,
        collision: None,
    };
    let mut answer = None;
    'norm: {
        for _ in 0..reps {
            let ep = estimate_l2_squared(p, l, rng)?;
            let eq = estimate_l2_squared(q, l, rng)?;
            let et = estimate_l2_squared(t, l, rng)?;
            let failed = [ep, eq, et].iter().find(|e| e.failed).copied();
            stats.rounds.push(NormRound { p: ep, q: eq, t: et });
            if let Some(e) = failed {
                if cfg.on_norm_failure == NormFailurePolicy::Abort {
                    return Err(Error::EstimatorFailure { attempts: e.attempts });
                }
                stats.norm_failed = true;
                break 'norm;
            }
        }
        let r = &stats.rounds;
        stats.t_consistent_with_p_side = one_sided(r.iter().map(|x| (x.t.raw_hits, x.p.raw_hits)));
        stats.t_consistent_with_q_side = one_sided(r.iter().map(|x| (x.t.raw_hits, x.q.raw_hits)));
        if stats.t_consistent_with_p_side {
            answer = Some(Answer::Q);
        } else if stats.t_consistent_with_q_side {
            answer = Some(Answer::P);
        }
    }

    let stage = if answer.is_some() {
        Stage::NormStage
    } else {
        let train_p = sample_type1(p, l, rng);
        let train_q = sample_type1(q, l, rng);
        let (c_p, c_q) = collision_counts(&train_p, &train_q, t, s, rng);
        stats.collision = Some(CollisionStats {
            c_p,
            c_q,
            m_p: train_p.max_count(),
            m_q: train_q.max_count(),
        });
        answer = Some(if c_p > c_q { Answer::P } else { Answer::Q });
        Stage::CollisionStage
    };

    let budget = SampleBudget {
        p: p.drawn() - start.p,
        q: q.drawn() - start.q,
        t: t.drawn() - start.t,
    };
    let (m_p, m_q) = stats.collision.map_or((0, 0), |c| (c.m_p, c.m_q));
    let budget_bound = cfg.budget_bound(m_p, m_q);
    assert!(
        budget.total() <= budget_bound,
        "distinguisher drew {} samples, bound is {budget_bound}",
        budget.total()
    );
    Ok(Decision {
        answer: answer.expect("both stages set an answer"),
        stage,
        s,
        l,
        l_scaled: cfg.l_scaled(),
        repetitions: reps,
        stats,
        budget,
        budget_bound,
    })
}

/// Outcome of [`closeness_from_distinguisher`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosenessDecision {
    pub verdict: Verdict,
    pub answers: Vec<Answer>,
    /// `p` and `t` both count draws from the first input, `q` from the second.
    pub budget: SampleBudget,
    /// Largest budget bound among the individual runs.
    pub max_run_bound: u64,
}

/// `3⌈ln s⌉`.
pub fn closeness_runs(s: u64) -> u32 {
    3 * (s as f64).ln().ceil() as u32
}

/// Runs the distinguisher `3⌈ln s⌉` times with the testing phase drawn from
/// `x`; says "different" iff every run gives the same answer.
pub fn closeness_from_distinguisher<R: Rng + ?Sized>(
    x: &AliasSampler,
    y: &AliasSampler,
    cfg: &DistinguishConfig,
    rng: &mut R,
) -> Result<ClosenessDecision> {
    cfg.validate()?;
    let runs = closeness_runs(cfg.s);
    let mut answers = Vec::with_capacity(runs as usize);
    let mut budget = SampleBudget::default();
    let mut max_run_bound = 0;
    for _ in 0..runs {
        let d = distinguish(&mut x.source(), &mut y.source(), &mut x.source(), cfg, rng)?;
        answers.push(d.answer);
        budget += d.budget;
        max_run_bound = max_run_bound.max(d.budget_bound);
    }
    assert!(
        budget.total() <= runs as u64 * max_run_bound,
        "closeness drew {} samples over {runs} runs with per-run bound {max_run_bound}",
        budget.total()
    );
    let unanimous = answers.windows(2).all(|w| w[0] == w[1]);
    Ok(ClosenessDecision {
        verdict: if unanimous { Verdict::Different } else { Verdict::Same },
        answers,
        budget,
        max_run_bound,
    })
}

/// A closeness tester usable as a black box.
pub trait ClosenessOracle {
    fn test(&mut self, x: &AliasSampler, y: &AliasSampler, rng: &mut TrialRng) -> Result<Verdict>;
}

/// Compares the underlying distributions exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthOracle;

impl ClosenessOracle for GroundTruthOracle {
    fn test(&mut self, x: &AliasSampler, y: &AliasSampler, _rng: &mut TrialRng) -> Result<Verdict> {
        Ok(if x.distribution() == y.distribution() {
            Verdict::Same
        } else {
            Verdict::Different
        })
    }
}

/// [`closeness_from_distinguisher`] behind the oracle interface.
#[derive(Debug, Clone, Copy)]
pub struct DistinguisherOracle {
    pub cfg: DistinguishConfig,
}

impl ClosenessOracle for DistinguisherOracle {
    fn test(&mut self, x: &AliasSampler, y: &AliasSampler, rng: &mut TrialRng) -> Result<Verdict> {
        Ok(closeness_from_distinguisher(x, y, &self.cfg, rng)?.verdict)
    }
}

/// Tests `t` against both candidates; a fair coin settles agreement.
pub fn distinguisher_from_closeness<O: ClosenessOracle + ?Sized>(
    oracle: &mut O,
    x: &AliasSampler,
    y: &AliasSampler,
    t: &AliasSampler,
    rng: &mut TrialRng,
) -> Result<Answer> {
    let vs_x = oracle.test(t, x, rng)?;
    let vs_y = oracle.test(t, y, rng)?;
    Ok(match (vs_x, vs_y) {
        (Verdict::Same, Verdict::Different) => Answer::P,
        (Verdict::Different, Verdict::Same) => Answer::Q,
        _ => {
            if rng.random_bool(0.5) {
                Answer::P
            } else {
                Answer::Q
            }
        }
    })
}

/// Result of the doubling wrapper.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutoS {
    pub s: u64,
    pub agreed: bool,
    pub decisions: Vec<Decision>,
}

/// Runs `max(3, ⌈ln s⌉)` independent calls at `s`, doubling `s` until they
/// agree or `max_doublings` is spent. `l_override` is scaled with `s`.
pub fn auto_s<R: Rng + ?Sized>(
    p: &AliasSampler,
    q: &AliasSampler,
    t: &AliasSampler,
    cfg: &DistinguishConfig,
    max_doublings: u32,
    rng: &mut R,
) -> Result<AutoS> {
    let mut cfg = *cfg;
    let mut all = Vec::new();
    for round in 0..=max_doublings {
        if round > 0 {
            cfg.s *= 2;
            cfg.l_override = cfg.l_override.map(|l| l * 2);
        }
        let reps = cfg.repetitions();
        let mut batch = Vec::with_capacity(reps as usize);
        for _ in 0..reps {
            batch.push(distinguish(&mut p.source(), &mut q.source(), &mut t.source(), &cfg, rng)?);
        }
        let agreed = batch.windows(2).all(|w| w[0].answer == w[1].answer);
        all.extend(batch);
        if agreed {
            return Ok(AutoS {
                s: cfg.s,
                agreed: true,
                decisions: all,
            });
        }
    }
    Ok(AutoS {
        s: cfg.s,
        agreed: false,
        decisions: all,
    })
}
