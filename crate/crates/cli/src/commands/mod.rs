//! One function per subcommand, each returning a [`Table`].

mod concentration;
mod distinguish;
mod lowerbound;

use std::time::Instant;

use disttest_core::{apply_permutation, weakly_disjoint_decompose, DistinguishConfig};
use rayon::prelude::*;

use crate::instance::Loaded;
use crate::spec::{CommandKind, ExperimentSpec, SChoice};
use crate::table::{Cell, Record, Table};
use crate::{CliError, Result};

pub use concentration::concentration;
pub use distinguish::{closeness, distinguish, sweep, sweep_grid};
pub use lowerbound::lowerbound;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "DISTTEST_THREADS";

pub fn execute(spec: &ExperimentSpec) -> Result<Table> {
    if spec.overrides.trial.is_some() && !matches!(spec.command, CommandKind::Distinguish | CommandKind::Closeness) {
        return Err(CliError::Usage("trial= applies to distinguish and closeness only".into()));
    }
    let inst = spec.instance.load()?;
    let records = match spec.command {
        CommandKind::Norms => norms(spec, &inst)?,
        CommandKind::Generate => generate(spec, &inst)?,
        CommandKind::Distinguish => distinguish(spec, &inst)?,
        CommandKind::Closeness => closeness(spec, &inst)?,
        CommandKind::Sweep => sweep(spec, &inst)?,
        CommandKind::Concentration => concentration(spec, &inst)?,
        CommandKind::Lowerbound => lowerbound(spec, &inst)?,
    };
    Ok(Table::from_records(records))
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v} is not a worker count")))?;
        builder = builder.num_threads(n.max(1));
    }
    Ok(builder.build()?)
}

/// Maps `f` over `items` on the worker pool, keeping input order.
pub(crate) fn par_map<I, T, F>(items: Vec<I>, f: F) -> Result<Vec<T>>
where
    I: Send,
    T: Send,
    F: Fn(I) -> Result<T> + Sync + Send,
{
    pool()?.install(|| items.into_par_iter().map(f).collect())
}

/// Trial indices to run: all of them, or the one picked by `trial=i`.
pub(crate) fn trial_indices(spec: &ExperimentSpec, total: u64) -> Result<Vec<u64>> {
    match spec.overrides.trial {
        Some(i) if i >= total => Err(CliError::Usage(format!("trial={i} but only {total} trials"))),
        Some(i) => Ok(vec![i]),
        None => Ok((0..total).collect()),
    }
}

/// Runs `f`, appending `wall_time_ms` when timing is on.
pub(crate) fn timed(spec: &ExperimentSpec, f: impl FnOnce() -> Result<Record>) -> Result<Record> {
    let start = Instant::now();
    let mut r = f()?;
    if spec.overrides.timing {
        r.push(("wall_time_ms", (start.elapsed().as_secs_f64() * 1e3).into()));
    }
    Ok(r)
}

/// `--s` if given, otherwise the reference `theorem_s`.
pub(crate) fn upper_bound_s(spec: &ExperimentSpec, inst: &Loaded) -> Result<u64> {
    match spec.s {
        SChoice::Fixed(s) => Ok(s),
        SChoice::Default | SChoice::Auto => inst.reference.theorem_s.ok_or_else(|| {
            CliError::Usage("identical pair has no theorem_s; pass --s".into())
        }),
    }
}

/// Distinguisher configuration at `s`: an explicit `l` wins, otherwise the
/// theorem's `l` clipped to `l_cap`. Either way outputs carry `l_scaled`.
pub(crate) fn distinguish_config(spec: &ExperimentSpec, s: u64) -> DistinguishConfig {
    let o = &spec.overrides;
    let cfg = DistinguishConfig::new(s).with_policy(o.policy);
    let theorem = DistinguishConfig::theorem_l(s);
    match (o.l, o.l_cap) {
        (Some(l), _) => cfg.with_l(l),
        (None, Some(cap)) if theorem > cap => cfg.with_l(cap),
        _ => cfg,
    }
}

fn norms(spec: &ExperimentSpec, inst: &Loaded) -> Result<Vec<Record>> {
    let p = &inst.params;
    let wd = weakly_disjoint_decompose(&inst.p, &inst.q, spec.overrides.tol);
    let c = spec.overrides.c;
    let s_max = p.lower_bound_s_max(c);
    Ok(vec![vec![
        ("instance", spec.instance.to_string().into()),
        ("seed", spec.master_seed.into()),
        ("n", inst.p.n().into()),
        ("l1", p.l1.into()),
        ("l2_diff", p.l2_diff.into()),
        ("l2_sum", p.l2_sum.into()),
        ("l3_diff", p.l3_diff.into()),
        ("linf_p", p.linf_p.into()),
        ("linf_q", p.linf_q.into()),
        ("alpha", p.alpha.into()),
        ("numsamples", p.numsamples.into()),
        ("theorem_s", p.theorem_s.into()),
        ("theorem_l", p.theorem_s.map(DistinguishConfig::theorem_l).into()),
        (
            "small_probability_at_theorem_s",
            p.theorem_s.map(|s| p.small_probability_condition(s as f64)).into(),
        ),
        ("identical", p.identical.into()),
        ("weakly_disjoint", wd.is_ok().into()),
        ("disjoint_mass_p", wd.as_ref().ok().map(|d| d.disjoint_mass_p).into()),
        ("disjoint_mass_q", wd.as_ref().ok().map(|d| d.disjoint_mass_q).into()),
        ("c", c.into()),
        ("lower_bound_s_max", s_max.into()),
    ]])
}

fn generate(spec: &ExperimentSpec, inst: &Loaded) -> Result<Vec<Record>> {
    let dir = spec
        .output
        .as_ref()
        .ok_or_else(|| CliError::Usage("generate needs --out <directory>".into()))?;
    std::fs::create_dir_all(dir)?;
    let (p, q) = if spec.overrides.permute {
        let pp = apply_permutation((&inst.p, &inst.q), spec.master_seed)?;
        (pp.p().clone(), pp.q().clone())
    } else {
        (inst.p.clone(), inst.q.clone())
    };
    let mut rec: Record = vec![
        ("instance", spec.instance.to_string().into()),
        ("seed", spec.master_seed.into()),
        ("permuted", spec.overrides.permute.into()),
        ("n", p.n().into()),
    ];
    for (name, d) in [("p", &p), ("q", &q)] {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, format!("{}\n", d.to_json()))?;
        let column = if name == "p" { "p_file" } else { "q_file" };
        rec.push((column, Cell::Text(path.display().to_string())));
    }
    Ok(vec![rec])
}
