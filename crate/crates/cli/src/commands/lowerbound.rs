use disttest_core::lowerbound::{bound_game, tester_game, BoundReport, Preconditions};
use disttest_core::{derive_seed, Error, GameLab, LabOptions, Tester};

use super::par_map;
use crate::instance::Loaded;
use crate::spec::{ExperimentSpec, SChoice};
use crate::table::Record;
use crate::Result;

fn error_column(t: Tester) -> &'static str {
    match t {
        Tester::SignatureLikelihood => "error_signature_likelihood",
        Tester::HitsDifference => "error_hits_difference",
        Tester::Distinguisher => "error_distinguisher",
    }
}

/// Stream index of each tester under a row seed; the bound games use the
/// row seed itself.
fn tester_stream(t: Tester) -> u64 {
    Tester::ALL.iter().position(|&x| x == t).expect("listed") as u64 + 1
}

/// One row per `s`: `trials` bound games plus `trials` games per tester.
/// `s` defaults to the largest value meeting the preconditions.
pub fn lowerbound(spec: &ExperimentSpec, inst: &Loaded) -> Result<Vec<Record>> {
    let lab = GameLab::new(&inst.p, &inst.q)?;
    let o = &spec.overrides;
    let opts = LabOptions {
        c: o.c,
        allow_out_of_regime: o.allow_out_of_regime,
        tester_l: o.tester_l,
    };
    let s_values = match (&o.s_list, spec.s) {
        (Some(list), _) => list.clone(),
        (None, SChoice::Fixed(s)) => vec![s],
        (None, _) => vec![Preconditions::max_s(lab.params(), o.c)],
    };
    let mut out = Vec::with_capacity(s_values.len());
    for s in s_values {
        let pre = Preconditions::evaluate(lab.params(), s, o.c);
        if !pre.satisfied && !o.allow_out_of_regime {
            return Err(Error::Precondition(format!(
                "s = {s} exceeds the lower-bound limit {:.3}; set allow_out_of_regime=true to run anyway",
                pre.s_max
            ))
            .into());
        }
        let seed = derive_seed(spec.master_seed, s);
        let games = par_map((0..spec.trials).collect(), |i| Ok(bound_game(&lab, s, seed, i)?))?;
        let bound = BoundReport::from_games(&games, s, pre);
        let mut rec: Record = vec![
            ("s", s.into()),
            ("seed", seed.into()),
            ("games", bound.games.into()),
            ("ratio_le_8_frac", bound.ratio_le_8_frac.into()),
            ("helpful_frac", bound.helpful_frac.into()),
            ("median_ratio", bound.median_ratio.into()),
            ("non_finite_ratios", bound.non_finite_ratios.into()),
            ("s_max", pre.s_max.into()),
            ("preconditions_satisfied", pre.satisfied.into()),
        ];
        for &tester in &o.testers {
            let tseed = derive_seed(seed, tester_stream(tester));
            let outcomes = par_map((0..spec.trials).collect(), |i| {
                Ok(tester_game(&lab, s, tester, &opts, tseed, i)?)
            })?;
            let wrong = outcomes.iter().filter(|(truth, answer)| truth.answer() != *answer).count();
            rec.push((error_column(tester), (wrong as f64 / outcomes.len().max(1) as f64).into()));
        }
        out.push(rec);
    }
    Ok(out)
}
