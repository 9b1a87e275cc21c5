use disttest_core::sampling::{bridge_check, weight_exceedance};
use disttest_core::{derive_seed, AliasSampler, DiscreteDistribution, Error};

use crate::instance::Loaded;
use crate::spec::{BridgeChoice, ExperimentSpec, SChoice, WeightChoice};
use crate::table::Record;
use crate::Result;

pub const DEFAULT_CONCENTRATION_S: u64 = 100;

fn weights(spec: &ExperimentSpec, p: &DiscreteDistribution) -> Result<Vec<f64>> {
    Ok(match &spec.overrides.weights {
        WeightChoice::P => p.probs().to_vec(),
        WeightChoice::Zero => vec![0.0; p.n()],
        WeightChoice::File(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let a: Vec<f64> = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::Format("weights must be finite".into()).into());
            }
            a
        }
    })
}

/// A `weight` row for the Monte Carlo deviation check, then one `bridge` row
/// per total `s'` of each exact check.
pub fn concentration(spec: &ExperimentSpec, inst: &Loaded) -> Result<Vec<Record>> {
    let s = match spec.s {
        SChoice::Fixed(s) => s,
        SChoice::Default | SChoice::Auto => DEFAULT_CONCENTRATION_S,
    };
    let sampler = AliasSampler::new(&inst.p);
    let a = weights(spec, &inst.p)?;
    let seed = derive_seed(spec.master_seed, s);
    let r = weight_exceedance(&sampler, &a, s, spec.trials, seed)?;
    let mut out = vec![vec![
        ("kind", "weight".into()),
        ("s", s.into()),
        ("n", r.n.into()),
        ("seed", seed.into()),
        ("small_probability", (inst.p.max_prob() <= 1.0 / (2.0 * s as f64)).into()),
        ("trials", r.trials.into()),
        ("expected_weight", r.expected_weight.into()),
        ("threshold", r.threshold.into()),
        ("exceedances", r.exceedances.into()),
        ("frequency", r.frequency.into()),
        ("max_deviation", r.max_deviation.into()),
    ]];
    for &bs in &spec.overrides.bridge_s {
        let d = match spec.overrides.bridge {
            BridgeChoice::Off => break,
            BridgeChoice::Uniform => DiscreteDistribution::uniform(2 * bs as usize)?,
            BridgeChoice::Instance => inst.p.clone(),
        };
        let rep = bridge_check(&d, bs)?;
        let bseed = derive_seed(spec.master_seed, bs);
        for row in &rep.rows {
            out.push(vec![
                ("kind", "bridge".into()),
                ("s", bs.into()),
                ("n", rep.n.into()),
                ("seed", bseed.into()),
                ("small_probability", rep.small_probability.into()),
                ("s_prime", row.s_prime.into()),
                ("max_count", rep.max_count.into()),
                ("configurations", row.configurations.into()),
                ("min_ratio", row.min_ratio.into()),
                ("max_ratio", row.max_ratio.into()),
                ("lower", rep.lower.into()),
                ("upper", rep.upper.into()),
                ("within", (row.min_ratio >= rep.lower && row.max_ratio <= rep.upper).into()),
            ]);
        }
    }
    Ok(out)
}
