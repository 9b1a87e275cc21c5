use disttest_core::distinguisher::{auto_s, closeness_runs, MIN_S};
use disttest_core::{
    closeness_from_distinguisher, derive_seed, distinguish as run_distinguish, rng_from_seed, AliasSampler, Answer,
    Decision, SeparationParams, Stage, Verdict,
};

use super::{distinguish_config, par_map, timed, trial_indices, upper_bound_s};
use crate::instance::Loaded;
use crate::spec::{ExperimentSpec, SChoice};
use crate::table::{Cell, Record};
use crate::Result;

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::NormStage => "norm-stage",
        Stage::CollisionStage => "collision-stage",
    }
}

/// Trial `i` tests with samples from P when `i` is even, from Q when odd.
fn truth_of(i: u64) -> Answer {
    if i % 2 == 0 {
        Answer::P
    } else {
        Answer::Q
    }
}

fn decision_record(d: &Decision, truth: Answer, params: &SeparationParams) -> Record {
    let c = d.stats.collision;
    vec![
        ("answer", d.answer.as_str().into()),
        ("correct", (d.answer == truth).into()),
        ("stage", stage_name(d.stage).into()),
        ("s", d.s.into()),
        ("l", d.l.into()),
        ("l_scaled", d.l_scaled.into()),
        ("repetitions", d.repetitions.into()),
        ("norm_failed", d.stats.norm_failed.into()),
        ("t_consistent_p_side", d.stats.t_consistent_with_p_side.into()),
        ("t_consistent_q_side", d.stats.t_consistent_with_q_side.into()),
        ("c_p", c.map(|c| c.c_p).into()),
        ("c_q", c.map(|c| c.c_q).into()),
        ("m_p", c.map(|c| c.m_p).into()),
        ("m_q", c.map(|c| c.m_q).into()),
        ("budget_p", d.budget.p.into()),
        ("budget_q", d.budget.q.into()),
        ("budget_t", d.budget.t.into()),
        ("budget_total", d.budget.total().into()),
        ("budget_bound", d.budget_bound.into()),
        ("small_probability", params.small_probability_condition(d.s as f64).into()),
    ]
}

pub fn distinguish(spec: &ExperimentSpec, inst: &Loaded) -> Result<Vec<Record>> {
    let (ap, aq) = (AliasSampler::new(&inst.p), AliasSampler::new(&inst.q));
    let auto = spec.s == SChoice::Auto;
    let s = if auto { MIN_S } else { upper_bound_s(spec, inst)? };
    let cfg = distinguish_config(spec, s);
    par_map(trial_indices(spec, spec.trials)?, |i| {
        timed(spec, || {
            let seed = derive_seed(spec.master_seed, i);
            let mut rng = rng_from_seed(seed);
            let truth = truth_of(i);
            let t = if truth == Answer::P { &ap } else { &aq };
            let mut rec: Record = vec![
                ("trial", i.into()),
                ("seed", seed.into()),
                ("truth", truth.as_str().into()),
            ];
            let d = if auto {
                let a = auto_s(&ap, &aq, t, &cfg, spec.overrides.max_doublings, &mut rng)?;
                rec.push(("auto_agreed", a.agreed.into()));
                a.decisions.last().cloned().expect("auto_s runs at least once")
            } else {
                run_distinguish(&mut ap.source(), &mut aq.source(), &mut t.source(), &cfg, &mut rng)?
            };
            rec.extend(decision_record(&d, truth, &inst.params));
            Ok(rec)
        })
    })
}

/// Even trials compare P with itself, odd trials P with Q.
pub fn closeness(spec: &ExperimentSpec, inst: &Loaded) -> Result<Vec<Record>> {
    let (ap, aq) = (AliasSampler::new(&inst.p), AliasSampler::new(&inst.q));
    let cfg = distinguish_config(spec, upper_bound_s(spec, inst)?);
    par_map(trial_indices(spec, spec.trials)?, |i| {
        timed(spec, || {
            let seed = derive_seed(spec.master_seed, i);
            let mut rng = rng_from_seed(seed);
            let (case, y) = if i % 2 == 0 { ("same-input", &ap) } else { ("pair", &aq) };
            let truth = if ap.distribution() == y.distribution() {
                Verdict::Same
            } else {
                Verdict::Different
            };
            let c = closeness_from_distinguisher(&ap, y, &cfg, &mut rng)?;
            let runs = closeness_runs(cfg.s);
            Ok(vec![
                ("trial", i.into()),
                ("seed", seed.into()),
                ("case", case.into()),
                ("truth", truth.as_str().into()),
                ("verdict", c.verdict.as_str().into()),
                ("correct", (c.verdict == truth).into()),
                ("s", cfg.s.into()),
                ("l", cfg.l().into()),
                ("l_scaled", cfg.l_scaled().into()),
                ("runs", runs.into()),
                ("p_answers", c.answers.iter().filter(|a| **a == Answer::P).count().into()),
                ("budget_total", c.budget.total().into()),
                ("max_run_bound", c.max_run_bound.into()),
                ("budget_limit", (runs as u64 * c.max_run_bound).into()),
            ])
        })
    })
}

/// `⌈s*·2^k⌉` for `k = −4..2`, dropping values below the distinguisher's
/// minimum and duplicates.
pub fn sweep_grid(s_star: u64) -> Vec<(i32, u64)> {
    let mut grid: Vec<(i32, u64)> = (-4..=2)
        .map(|k| (k, (s_star as f64 * 2f64.powi(k)).ceil() as u64))
        .filter(|&(_, s)| s >= MIN_S)
        .collect();
    grid.dedup_by_key(|(_, s)| *s);
    grid
}

struct SweepTrial {
    row: usize,
    truth: Answer,
    correct: bool,
    norm_stage: bool,
    budget: u64,
}

/// One row per `s`: `trials` runs under each hypothesis. Row seeds are keyed
/// by `s`, so `s_list=<s>` replays a single row.
pub fn sweep(spec: &ExperimentSpec, inst: &Loaded) -> Result<Vec<Record>> {
    let (ap, aq) = (AliasSampler::new(&inst.p), AliasSampler::new(&inst.q));
    let grid: Vec<(Option<i32>, u64)> = match &spec.overrides.s_list {
        Some(list) => list.iter().map(|&s| (None, s)).collect(),
        None => {
            let s_star = match spec.overrides.s_star {
                Some(s) => s,
                None => upper_bound_s(spec, inst)?,
            };
            sweep_grid(s_star).into_iter().map(|(k, s)| (Some(k), s)).collect()
        }
    };
    let rows: Vec<_> = grid
        .iter()
        .map(|&(k, s)| (k, s, derive_seed(spec.master_seed, s), distinguish_config(spec, s)))
        .collect();
    let jobs: Vec<(usize, u64)> = (0..rows.len())
        .flat_map(|r| (0..2 * spec.trials).map(move |j| (r, j)))
        .collect();
    let done = par_map(jobs, |(row, j)| {
        let (_, _, row_seed, cfg) = &rows[row];
        let mut rng = rng_from_seed(derive_seed(*row_seed, j));
        let truth = truth_of(j);
        let t = if truth == Answer::P { &ap } else { &aq };
        let d = run_distinguish(&mut ap.source(), &mut aq.source(), &mut t.source(), cfg, &mut rng)?;
        Ok(SweepTrial {
            row,
            truth,
            correct: d.answer == truth,
            norm_stage: d.stage == Stage::NormStage,
            budget: d.budget.total(),
        })
    })?;
    Ok(rows
        .iter()
        .enumerate()
        .map(|(r, (k, s, seed, cfg))| {
            let mine: Vec<&SweepTrial> = done.iter().filter(|t| t.row == r).collect();
            let frac = |f: &dyn Fn(&SweepTrial) -> bool, of: &dyn Fn(&SweepTrial) -> bool| {
                let pool: Vec<_> = mine.iter().filter(|t| of(t)).collect();
                pool.iter().filter(|t| f(t)).count() as f64 / pool.len().max(1) as f64
            };
            let mean_budget = mine.iter().map(|t| t.budget as f64).sum::<f64>() / mine.len().max(1) as f64;
            vec![
                ("s", (*s).into()),
                ("k", k.map(|k| k.to_string()).map_or(Cell::Null, Cell::Text)),
                ("seed", (*seed).into()),
                ("trials", spec.trials.into()),
                ("l", cfg.l().into()),
                ("l_scaled", cfg.l_scaled().into()),
                ("accuracy", frac(&|t| t.correct, &|_| true).into()),
                ("accuracy_h1", frac(&|t| t.correct, &|t| t.truth == Answer::P).into()),
                ("accuracy_h2", frac(&|t| t.correct, &|t| t.truth == Answer::Q).into()),
                ("norm_stage_frac", frac(&|t| t.norm_stage, &|_| true).into()),
                ("mean_budget", mean_budget.into()),
            ]
        })
        .collect())
}
