//! The random-permutation game behind the lower bound, with the hint oracle
//! and the likelihood-ratio machinery.
//!
//! The lab knows the permutation and the true masses; testers only see what
//! [`TesterView`] exposes.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::Serialize;

use crate::dist::{
    apply_permutation, norms, weakly_disjoint_decompose, DiscreteDistribution, SeparationParams,
    WeaklyDisjointDecomposition, DEFAULT_DISJOINT_TOL, DEFAULT_LOWER_BOUND_C,
};
use crate::distinguisher::{distinguish, Answer, DistinguishConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::{extract_signatures, AliasSampler, Configuration, SampleSource, SignatureHistogram};

/// Ratio bound checked by [`lower_h_bound_experiment`].
pub const RATIO_BOUND: f64 = 8.0;
/// Default `l` for the distinguisher tester.
pub const DEFAULT_TESTER_L: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Hypothesis {
    /// Testing draws come from `πP`.
    H1,
    /// Testing draws come from `πQ`.
    H2,
}

impl Hypothesis {
    pub fn answer(self) -> Answer {
        match self {
            Hypothesis::H1 => Answer::P,
            Hypothesis::H2 => Answer::Q,
        }
    }
}

/// Masses of the training-sampled parts of the common and disjoint sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HintMasses {
    pub c_p: f64,
    pub c_q: f64,
    pub d_p: f64,
    pub d_q: f64,
}

impl HintMasses {
    /// `(c_p, d_p) ↔ (c_q, d_q)`.
    pub fn swapped(&self) -> Self {
        Self {
            c_p: self.c_q,
            c_q: self.c_p,
            d_p: self.d_q,
            d_q: self.d_p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HintReport {
    pub helpful: BTreeSet<usize>,
    pub unhelpful: BTreeSet<usize>,
    pub testing_signatures: SignatureHistogram,
    /// Hypothesis revealed by a helpful element, if any.
    pub revealed: Option<Hypothesis>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameOutcome {
    pub hypothesis: Hypothesis,
    pub seed: u64,
    pub s: u64,
    pub hint: HintReport,
    pub masses: HintMasses,
    pub train_p: Configuration,
    pub train_q: Configuration,
    pub test: Configuration,
}

impl GameOutcome {
    pub fn signatures(&self) -> &SignatureHistogram {
        &self.hint.testing_signatures
    }

    /// `(h(1,0), h(0,1), h(0,0))`.
    pub fn hit_triple(&self) -> (u64, u64, u64) {
        let h = self.signatures();
        (h.hits(1, 0), h.hits(0, 1), h.hits(0, 0))
    }
}

/// Draws from a base sampler and relabels through a permutation.
struct Relabelled<'a> {
    base: &'a AliasSampler,
    perm: &'a [usize],
    drawn: u64,
}

impl SampleSource for Relabelled<'_> {
    fn domain_size(&self) -> usize {
        self.perm.len()
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        self.drawn += 1;
        self.perm[self.base.sample(rng)]
    }

    fn drawn(&self) -> u64 {
        self.drawn
    }
}

/// A weakly disjoint base pair ready for repeated games.
#[derive(Debug, Clone)]
pub struct GameLab {
    p: AliasSampler,
    q: AliasSampler,
    decomposition: WeaklyDisjointDecomposition,
    params: SeparationParams,
}

impl GameLab {
    pub fn new(base_p: &DiscreteDistribution, base_q: &DiscreteDistribution) -> Result<Self> {
        let decomposition = weakly_disjoint_decompose(base_p, base_q, DEFAULT_DISJOINT_TOL)?;
        Ok(Self {
            p: AliasSampler::new(base_p),
            q: AliasSampler::new(base_q),
            params: norms(base_p, base_q)?,
            decomposition,
        })
    }

    pub fn base_p(&self) -> &DiscreteDistribution {
        self.p.distribution()
    }

    pub fn base_q(&self) -> &DiscreteDistribution {
        self.q.distribution()
    }

    pub fn params(&self) -> &SeparationParams {
        &self.params
    }

    pub fn decomposition(&self) -> &WeaklyDisjointDecomposition {
        &self.decomposition
    }

    fn permutation(&self, seed: u64) -> Result<Vec<usize>> {
        Ok(apply_permutation((self.base_p(), self.base_q()), derive_seed(seed, 0))?.perm)
    }

    /// One game. The permutation, the training phase and the testing phase
    /// use separate streams derived from `seed`, so H1 and H2 games with the
    /// same seed share permutation and training.
    pub fn play(&self, s: u64, hypothesis: Hypothesis, seed: u64) -> Result<GameOutcome> {
        if s == 0 {
            return Err(Error::Precondition("game needs s >= 1".into()));
        }
        let perm = self.permutation(seed)?;
        let n = perm.len();
        let mut src_p = Relabelled { base: &self.p, perm: &perm, drawn: 0 };
        let mut src_q = Relabelled { base: &self.q, perm: &perm, drawn: 0 };

        let mut rng = rng_from_seed(derive_seed(seed, 1));
        let train_p = crate::sampling::sample_type1(&mut src_p, s, &mut rng);
        let train_q = crate::sampling::sample_type1(&mut src_q, s, &mut rng);
        let mut rng = rng_from_seed(derive_seed(seed, 2));
        let test = match hypothesis {
            Hypothesis::H1 => crate::sampling::sample_type1(&mut src_p, s, &mut rng),
            Hypothesis::H2 => crate::sampling::sample_type1(&mut src_q, s, &mut rng),
        };

        let signatures = extract_signatures(&train_p, &train_q, &test)?;
        let mut masses = HintMasses { c_p: 0.0, c_q: 0.0, d_p: 0.0, d_q: 0.0 };
        let mut helpful = BTreeSet::new();
        let mut unhelpful = BTreeSet::new();
        let mut revealed = None;
        for j in 0..n {
            let x = perm[j];
            let (i, jj, k) = (train_p.count(x), train_q.count(x), test.count(x));
            let (pj, qj) = (self.base_p().prob(j), self.base_q().prob(j));
            let common = self.decomposition.is_common(j);
            if i > 0 {
                if common {
                    masses.c_p += pj;
                } else {
                    masses.d_p += pj;
                }
            }
            if jj > 0 {
                if common {
                    masses.c_q += qj;
                } else {
                    masses.d_q += qj;
                }
            }
            if i + jj >= 2 {
                if common {
                    unhelpful.insert(x);
                } else if k >= 1 {
                    helpful.insert(x);
                    revealed = Some(if self.decomposition.disjoint_p.contains(&j) {
                        Hypothesis::H1
                    } else {
                        Hypothesis::H2
                    });
                }
            }
        }
        Ok(GameOutcome {
            hypothesis,
            seed,
            s,
            hint: HintReport {
                helpful,
                unhelpful,
                testing_signatures: signatures,
                revealed,
            },
            masses,
            train_p,
            train_q,
            test,
        })
    }
}

pub fn play_permutation_game(
    base_p: &DiscreteDistribution,
    base_q: &DiscreteDistribution,
    s: u64,
    hypothesis: Hypothesis,
    seed: u64,
) -> Result<GameOutcome> {
    GameLab::new(base_p, base_q)?.play(s, hypothesis, seed)
}

/// `c·ln m`, with `0·ln 0 = 0`; negative masses are clamped to zero.
fn term(c: u64, mass: f64) -> f64 {
    if c == 0 {
        0.0
    } else {
        c as f64 * mass.max(0.0).ln()
    }
}

/// `[(C_P+D_P)^a C_Q^b (1−C_P−C_Q−D_P)^c] / [C_P^a (C_Q+D_Q)^b (1−C_P−C_Q−D_Q)^c]`
/// in log space. A vanishing denominator gives `+∞`, and `NaN` when the
/// numerator vanishes too.
pub fn likelihood_ratio(h: &HintMasses, a: u64, b: u64, c: u64) -> f64 {
    let num = term(a, h.c_p + h.d_p) + term(b, h.c_q) + term(c, 1.0 - h.c_p - h.c_q - h.d_p);
    let den = term(a, h.c_p) + term(b, h.c_q + h.d_q) + term(c, 1.0 - h.c_p - h.c_q - h.d_q);
    match (num == f64::NEG_INFINITY, den == f64::NEG_INFINITY) {
        (true, true) => f64::NAN,
        (false, true) => f64::INFINITY,
        (true, false) => 0.0,
        (false, false) => (num - den).exp(),
    }
}

/// The lower-bound preconditions on `s` and whether a given `s` meets them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preconditions {
    pub c: f64,
    pub l3_cap: f64,
    pub linf_p_cap: f64,
    pub linf_q_cap: f64,
    pub numsamples_cap: f64,
    pub s_max: f64,
    pub s: u64,
    pub satisfied: bool,
    pub weakly_disjoint: bool,
}

impl Preconditions {
    pub fn evaluate(params: &SeparationParams, s: u64, c: f64) -> Self {
        let s_max = params.lower_bound_s_max(c);
        Self {
            c,
            l3_cap: 0.25 / params.l3_diff,
            linf_p_cap: 1.0 / params.linf_p,
            linf_q_cap: 1.0 / params.linf_q,
            numsamples_cap: params.numsamples / c,
            s_max,
            s,
            satisfied: s as f64 <= s_max,
            weakly_disjoint: true,
        }
    }

    /// Largest integer `s` meeting the preconditions, at least 1.
    pub fn max_s(params: &SeparationParams, c: f64) -> u64 {
        let m = params.lower_bound_s_max(c);
        if m.is_finite() {
            (m.floor() as u64).max(1)
        } else {
            u64::MAX
        }
    }
}

/// Knobs shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabOptions {
    pub c: f64,
    /// Run even when `s` breaks the preconditions.
    pub allow_out_of_regime: bool,
    /// `l` for the distinguisher tester.
    pub tester_l: u64,
}

impl Default for LabOptions {
    fn default() -> Self {
        Self {
            c: DEFAULT_LOWER_BOUND_C,
            allow_out_of_regime: false,
            tester_l: DEFAULT_TESTER_L,
        }
    }
}

fn gate(lab: &GameLab, s: u64, opts: &LabOptions) -> Result<Preconditions> {
    let pre = Preconditions::evaluate(lab.params(), s, opts.c);
    if !pre.satisfied && !opts.allow_out_of_regime {
        return Err(Error::Precondition(format!(
            "s = {s} exceeds the lower-bound limit {:.3} (0.25/|P-Q|_3 = {:.3}, 1/|P|_inf = {:.3}, 1/|Q|_inf = {:.3}, numsamples/{} = {:.3})",
            pre.s_max, pre.l3_cap, pre.linf_p_cap, pre.linf_q_cap, pre.c, pre.numsamples_cap
        )));
    }
    Ok(pre)
}

/// One H1 game scored against the ratio bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundGame {
    pub seed: u64,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub ratio: f64,
    pub helpful: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub games: u64,
    pub s: u64,
    pub ratio_le_8_frac: f64,
    pub helpful_frac: f64,
    /// Games whose ratio was `+∞` or undefined.
    pub non_finite_ratios: u64,
    pub median_ratio: f64,
    pub preconditions: Preconditions,
}

impl BoundReport {
    pub fn from_games(games: &[BoundGame], s: u64, preconditions: Preconditions) -> Self {
        let n = games.len().max(1) as f64;
        let le = games.iter().filter(|g| g.ratio <= RATIO_BOUND).count();
        let helpful = games.iter().filter(|g| g.helpful).count();
        let mut finite: Vec<f64> = games.iter().map(|g| g.ratio).filter(|r| r.is_finite()).collect();
        finite.sort_by(f64::total_cmp);
        Self {
            games: games.len() as u64,
            s,
            ratio_le_8_frac: le as f64 / n,
            helpful_frac: helpful as f64 / n,
            non_finite_ratios: (games.len() - finite.len()) as u64,
            median_ratio: finite.get(finite.len() / 2).copied().unwrap_or(f64::NAN),
            preconditions,
        }
    }
}

/// Game `index` of a bound experiment under `seed`.
pub fn bound_game(lab: &GameLab, s: u64, seed: u64, index: u64) -> Result<BoundGame> {
    let game_seed = derive_seed(seed, index);
    let g = lab.play(s, Hypothesis::H1, game_seed)?;
    let (a, b, c) = g.hit_triple();
    Ok(BoundGame {
        seed: game_seed,
        a,
        b,
        c,
        ratio: likelihood_ratio(&g.masses, a, b, c),
        helpful: !g.hint.helpful.is_empty(),
    })
}

/// Plays H1 games and scores `(h(1,0), h(0,1), h(0,0))` with the
/// ground-truth likelihood ratio.
pub fn lower_h_bound_experiment(
    base_p: &DiscreteDistribution,
    base_q: &DiscreteDistribution,
    s: u64,
    games: u64,
    seed: u64,
    opts: &LabOptions,
) -> Result<BoundReport> {
    let lab = GameLab::new(base_p, base_q)?;
    let pre = gate(&lab, s, opts)?;
    let played = (0..games)
        .map(|i| bound_game(&lab, s, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_games(&played, s, pre))
}

/// What a tester may look at: the signatures, the hypothesis revealed by a
/// helpful element, and the known base shapes.
pub struct TesterView<'a> {
    pub signatures: &'a SignatureHistogram,
    pub revealed: Option<Hypothesis>,
    pub lab: &'a GameLab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tester {
    /// Likelihood ratio on `(m₁₀₁, m₀₁₁, m₀₀₁)` using expected training masses.
    SignatureLikelihood,
    /// Sign of `h(1,0) − h(0,1)`.
    HitsDifference,
    /// The two-stage distinguisher run on fresh black-box samples.
    Distinguisher,
}

impl Tester {
    pub const ALL: [Tester; 3] = [
        Tester::SignatureLikelihood,
        Tester::HitsDifference,
        Tester::Distinguisher,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tester::SignatureLikelihood => "signature-likelihood",
            Tester::HitsDifference => "hits-difference",
            Tester::Distinguisher => "distinguisher",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

/// `Σ p(1 − (1 − p)^s)` over the common and disjoint parts of each side.
pub fn expected_masses(lab: &GameLab, s: u64) -> HintMasses {
    let hit = |p: f64| p * (1.0 - (1.0 - p).powf(s as f64));
    let d = lab.decomposition();
    let (bp, bq) = (lab.base_p(), lab.base_q());
    HintMasses {
        c_p: d.common.iter().map(|&x| hit(bp.prob(x))).sum(),
        c_q: d.common.iter().map(|&x| hit(bq.prob(x))).sum(),
        d_p: d.disjoint_p.iter().map(|&x| hit(bp.prob(x))).sum(),
        d_q: d.disjoint_q.iter().map(|&x| hit(bq.prob(x))).sum(),
    }
}

fn answer_by_sign(p_side: f64, q_side: f64) -> Answer {
    if p_side > q_side {
        Answer::P
    } else {
        Answer::Q
    }
}

/// One tester game; returns `(truth, answer)`.
pub fn tester_game(
    lab: &GameLab,
    s: u64,
    tester: Tester,
    opts: &LabOptions,
    seed: u64,
    index: u64,
) -> Result<(Hypothesis, Answer)> {
    let game_seed = derive_seed(seed, index);
    let truth = if index % 2 == 0 { Hypothesis::H1 } else { Hypothesis::H2 };
    let answer = match tester {
        Tester::SignatureLikelihood | Tester::HitsDifference => {
            let g = lab.play(s, truth, game_seed)?;
            let view = TesterView {
                signatures: g.signatures(),
                revealed: g.hint.revealed,
                lab,
            };
            match tester {
                Tester::SignatureLikelihood => signature_likelihood(&view, s),
                _ => {
                    let h = view.signatures;
                    answer_by_sign(h.hits(1, 0) as f64, h.hits(0, 1) as f64)
                }
            }
        }
        Tester::Distinguisher => {
            let perm = lab.permutation(game_seed)?;
            let mut p = Relabelled { base: &lab.p, perm: &perm, drawn: 0 };
            let mut q = Relabelled { base: &lab.q, perm: &perm, drawn: 0 };
            let mut t = Relabelled {
                base: if truth == Hypothesis::H1 { &lab.p } else { &lab.q },
                perm: &perm,
                drawn: 0,
            };
            let cfg = DistinguishConfig::new(s.max(crate::distinguisher::MIN_S)).with_l(opts.tester_l);
            let mut rng = rng_from_seed(derive_seed(game_seed, 3));
            distinguish(&mut p, &mut q, &mut t, &cfg, &mut rng)?.answer
        }
    };
    Ok((truth, answer))
}

fn signature_likelihood(view: &TesterView<'_>, s: u64) -> Answer {
    if let Some(h) = view.revealed {
        return h.answer();
    }
    let m = expected_masses(view.lab, s);
    let sig = view.signatures;
    let r = likelihood_ratio(&m, sig.get(1, 0, 1), sig.get(0, 1, 1), sig.get(0, 0, 1));
    if r > 1.0 {
        Answer::P
    } else {
        Answer::Q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub tester: Tester,
    pub games: u64,
    pub s: u64,
    pub error_rate: f64,
    pub preconditions: Preconditions,
}

/// Plays games alternating H1 and H2 against one tester.
pub fn indistinguishability_experiment(
    base_p: &DiscreteDistribution,
    base_q: &DiscreteDistribution,
    s: u64,
    tester: Tester,
    games: u64,
    seed: u64,
    opts: &LabOptions,
) -> Result<ErrorReport> {
    let lab = GameLab::new(base_p, base_q)?;
    let pre = gate(&lab, s, opts)?;
    let mut wrong = 0u64;
    for i in 0..games {
        let (truth, answer) = tester_game(&lab, s, tester, opts, seed, i)?;
        wrong += u64::from(truth.answer() != answer);
    }
    Ok(ErrorReport {
        tester,
        games,
        s,
        error_rate: wrong as f64 / games.max(1) as f64,
        preconditions: pre,
    })
}

/// Combined output of the lower-bound suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub games: u64,
    pub s: u64,
    pub ratio_le_8_frac: f64,
    pub error_rate: BTreeMap<String, f64>,
    pub helpful_frac: f64,
    pub preconditions: Preconditions,
}

impl LowerBoundReport {
    pub fn new(bound: &BoundReport, errors: &[ErrorReport]) -> Self {
        Self {
            games: bound.games,
            s: bound.s,
            ratio_le_8_frac: bound.ratio_le_8_frac,
            error_rate: errors
                .iter()
                .map(|e| (e.tester.name().to_string(), e.error_rate))
                .collect(),
            helpful_frac: bound.helpful_frac,
            preconditions: bound.preconditions,
        }
    }
}
