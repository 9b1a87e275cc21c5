use std::path::Path;
use std::process::Command;

use disttest_cli::spec::{BridgeChoice, WeightChoice};
use disttest_cli::{execute, run, Cell, CommandKind, ExperimentSpec, Format, Instance, SChoice, Table};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_disttest"))
}

fn status(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

fn spec(command: CommandKind, instance: &str) -> ExperimentSpec {
    ExperimentSpec::new(command, instance.parse().unwrap())
}

fn column_f64(t: &Table, name: &str) -> Vec<f64> {
    t.values(name).into_iter().map(|c| c.as_f64().unwrap()).collect()
}

/// Small, fast specs covering every table-producing command.
fn quick_specs() -> Vec<ExperimentSpec> {
    let mut d = spec(CommandKind::Distinguish, "gen:hard:256");
    d.s = SChoice::Fixed(200);
    d.trials = 6;
    d.overrides.l = Some(60);
    let mut c = spec(CommandKind::Closeness, "gen:hard:256");
    c.s = SChoice::Fixed(50);
    c.trials = 4;
    c.overrides.l = Some(60);
    let mut w = spec(CommandKind::Sweep, "gen:hard:256");
    w.trials = 3;
    w.overrides.s_star = Some(160);
    w.overrides.l = Some(40);
    let mut k = spec(CommandKind::Concentration, "gen:uniform:400");
    k.trials = 2000;
    let mut b = spec(CommandKind::Lowerbound, "gen:hard:1024");
    b.trials = 60;
    b.overrides.tester_l = 40;
    vec![spec(CommandKind::Norms, "gen:hard:64"), d, c, w, k, b]
}

#[test]
fn exit_codes() {
    assert_eq!(status(&["norms", "--instance", "gen:hard:64"]), 0);
    assert_eq!(status(&["norms", "--instance", "/no/such/p.json,/no/such/q.json"]), 3);
    assert_eq!(status(&["norms", "--override", "zzz=1"]), 2);
    assert_eq!(status(&["lowerbound", "--s", "100"]), 2);
    assert_eq!(status(&["distinguish", "--s", "5", "--trials", "1"]), 2);
    assert_eq!(status(&["distinguish", "--instance", "gen:uniform:10"]), 2);
    assert_eq!(status(&["lowerbound", "--instance", "gen:uniform:10", "--trials", "20"]), 0);
    assert_eq!(status(&["frobnicate"]), 2);
    assert_eq!(status(&["--help"]), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 2, \"probs\": [0.5]}").unwrap();
    let arg = format!("{0},{0}", bad.display());
    assert_eq!(status(&["norms", "--instance", &arg]), 3);
    let not_json = dir.path().join("x.json");
    std::fs::write(&not_json, "not json").unwrap();
    assert_eq!(status(&["norms", "--instance", not_json.to_str().unwrap()]), 3);
}

#[test]
fn csv_and_json_agree_field_for_field() {
    let dir = tempfile::tempdir().unwrap();
    for base in quick_specs() {
        let mut csv_spec = base.clone();
        csv_spec.output = Some(dir.path().join("t.csv"));
        run(&csv_spec).unwrap();
        let mut json_spec = base.clone();
        json_spec.format = Format::Json;
        json_spec.output = Some(dir.path().join("t.json"));
        run(&json_spec).unwrap();

        let mut reader = csv::Reader::from_path(dir.path().join("t.csv")).unwrap();
        let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
        let csv_rows: Vec<Vec<String>> = reader
            .records()
            .map(|r| r.unwrap().iter().map(String::from).collect())
            .collect();
        let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
        let json_rows = json.as_array().unwrap();
        assert_eq!(csv_rows.len(), json_rows.len(), "{:?}", base.command);
        for (c, j) in csv_rows.iter().zip(json_rows) {
            let obj = j.as_object().unwrap();
            assert_eq!(obj.keys().collect::<Vec<_>>(), header.iter().collect::<Vec<_>>());
            for (field, (key, value)) in c.iter().zip(obj) {
                let from_json = match value {
                    Value::Null => String::new(),
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                assert_eq!(field, &from_json, "{:?} column {key}", base.command);
            }
        }
    }
}

#[test]
fn equal_specs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for (i, base) in quick_specs().into_iter().enumerate() {
        let mut outputs = Vec::new();
        for run_no in 0..2 {
            let mut s = base.clone();
            s.output = Some(dir.path().join(format!("{i}-{run_no}.csv")));
            run(&s).unwrap();
            outputs.push(std::fs::read(s.output.unwrap()).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{:?}", base.command);
        assert!(!outputs[0].is_empty());
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let args = [
        "lowerbound",
        "--instance",
        "gen:hard:1024",
        "--trials",
        "50",
        "--override",
        "tester_l=40",
        "--seed",
        "5",
    ];
    let out = |threads: &str| bin().args(args).env("DISTTEST_THREADS", threads).output().unwrap().stdout;
    let one = out("1");
    assert_eq!(one, out("3"));
    let d = ["distinguish", "--instance", "gen:hard:256", "--s", "100", "--trials", "8", "--override", "l=50"];
    let run_d = |threads: &str| bin().args(d).env("DISTTEST_THREADS", threads).output().unwrap().stdout;
    assert_eq!(run_d("1"), run_d("4"));
    assert_eq!(
        bin().args(d).env("DISTTEST_THREADS", "many").output().unwrap().status.code(),
        Some(2)
    );
}

#[test]
fn single_rows_replay_in_isolation() {
    for command in [CommandKind::Distinguish, CommandKind::Closeness] {
        let mut s = spec(command, "gen:hard:256");
        s.s = SChoice::Fixed(100);
        s.trials = 5;
        s.overrides.l = Some(50);
        s.master_seed = 77;
        let all = execute(&s).unwrap();
        s.overrides.trial = Some(3);
        let one = execute(&s).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert_eq!(one.rows[0], all.rows[3]);
        assert_eq!(all.columns, one.columns);
    }

    let mut sw = spec(CommandKind::Sweep, "gen:hard:256");
    sw.trials = 3;
    sw.overrides.s_star = Some(160);
    sw.overrides.l = Some(40);
    let grid = execute(&sw).unwrap();
    sw.overrides.s_list = Some(vec![80]);
    let row = execute(&sw).unwrap();
    let s_col = grid.column("s").unwrap();
    let from_grid = grid.rows.iter().find(|r| r[s_col] == Cell::UInt(80)).unwrap();
    for name in ["seed", "accuracy", "mean_budget", "norm_stage_frac"] {
        let (a, b) = (grid.column(name).unwrap(), row.column(name).unwrap());
        assert_eq!(from_grid[a], row.rows[0][b], "{name}");
    }

    let mut lb = spec(CommandKind::Lowerbound, "gen:hard:1024");
    lb.trials = 40;
    lb.overrides.tester_l = 40;
    lb.overrides.s_list = Some(vec![5, 9]);
    let both = execute(&lb).unwrap();
    lb.overrides.s_list = Some(vec![9]);
    assert_eq!(execute(&lb).unwrap().rows[0], both.rows[1]);
}

#[test]
fn every_row_carries_its_seed() {
    for s in quick_specs() {
        let t = execute(&s).unwrap();
        assert!(t.values("seed").iter().all(|c| matches!(c, Cell::UInt(_))), "{:?}", s.command);
    }
}

#[test]
fn timing_column_only_on_request() {
    let mut s = quick_specs().remove(1);
    assert!(execute(&s).unwrap().column("wall_time_ms").is_none());
    s.overrides.timing = true;
    let t = execute(&s).unwrap();
    assert!(column_f64(&t, "wall_time_ms").iter().all(|&x| x >= 0.0));
}

#[test]
fn distinguish_rows_respect_their_budget() {
    let t = execute(&quick_specs()[1]).unwrap();
    let used = column_f64(&t, "budget_total");
    let bound = column_f64(&t, "budget_bound");
    assert!(used.iter().zip(&bound).all(|(u, b)| u <= b));
    assert!(t.values("l_scaled").iter().all(|c| **c == Cell::Bool(true)));
    let truth: Vec<String> = t.values("truth").iter().map(|c| c.render()).collect();
    assert_eq!(truth, ["P", "Q", "P", "Q", "P", "Q"]);
}

#[test]
fn default_l_is_capped_and_flagged() {
    let mut s = spec(CommandKind::Distinguish, "gen:hard:256");
    s.s = SChoice::Fixed(50);
    s.trials = 1;
    let t = execute(&s).unwrap();
    assert_eq!(t.values("l")[0], &Cell::UInt(1000));
    assert_eq!(t.values("l_scaled")[0], &Cell::Bool(true));
    // ⌈30·10·ln^{3/2} 10⌉ = 1049 is above the cap too; lifting the cap restores it.
    s.s = SChoice::Fixed(10);
    s.overrides.l_cap = None;
    let t = execute(&s).unwrap();
    assert_eq!(t.values("l")[0], &Cell::UInt(1049));
    assert_eq!(t.values("l_scaled")[0], &Cell::Bool(false));
}

#[test]
fn auto_s_reports_agreement() {
    let mut s = spec(CommandKind::Distinguish, "gen:hard:256");
    s.s = SChoice::Auto;
    s.trials = 2;
    s.overrides.l = Some(20);
    let t = execute(&s).unwrap();
    assert!(t.values("auto_agreed").iter().all(|c| matches!(c, Cell::Bool(_))));
    assert!(column_f64(&t, "s").iter().all(|&x| x >= 10.0));
}

#[test]
fn sweep_accuracy_rises_with_s() {
    let mut s = spec(CommandKind::Sweep, "gen:hard:1024");
    s.trials = 100;
    s.overrides.s_star = Some(2000);
    s.overrides.l = Some(300);
    let t = execute(&s).unwrap();
    assert_eq!(t.rows.len(), 7);
    let acc = column_f64(&t, "accuracy");
    assert!(acc.windows(2).all(|w| w[1] >= w[0] - 0.1), "{acc:?}");
    assert!(acc.last().unwrap() >= &0.9);
    assert!(column_f64(&t, "mean_budget").iter().all(|&b| b > 0.0));
}

#[test]
fn sweep_with_one_trial_has_one_row_per_s() {
    let mut s = spec(CommandKind::Sweep, "gen:hard:256");
    s.trials = 1;
    s.overrides.s_star = Some(400);
    s.overrides.l = Some(40);
    let t = execute(&s).unwrap();
    let grid: Vec<f64> = column_f64(&t, "s");
    assert_eq!(grid, [25.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1600.0]);
    assert!(column_f64(&t, "accuracy").iter().all(|a| [0.0, 0.5, 1.0].contains(a)));
}

#[test]
fn sweep_on_identical_pair_is_a_coin_flip() {
    let mut s = spec(CommandKind::Sweep, "gen:hard-identical:1024");
    s.trials = 100;
    s.overrides.s_star = Some(2000);
    s.overrides.l = Some(300);
    s.overrides.s_list = Some(vec![500, 2000]);
    let t = execute(&s).unwrap();
    for a in column_f64(&t, "accuracy") {
        assert!((a - 0.5).abs() <= 0.1, "{a}");
    }
}

#[test]
fn closeness_rows_alternate_cases() {
    let t = execute(&quick_specs()[2]).unwrap();
    let cases: Vec<String> = t.values("case").iter().map(|c| c.render()).collect();
    assert_eq!(cases, ["same-input", "pair", "same-input", "pair"]);
    let used = column_f64(&t, "budget_total");
    let limit = column_f64(&t, "budget_limit");
    assert!(used.iter().zip(&limit).all(|(u, l)| u <= l));
    assert!(column_f64(&t, "runs").iter().all(|&r| r == 12.0));
}

#[test]
fn concentration_weight_and_bridge_rows() {
    let mut s = spec(CommandKind::Concentration, "gen:uniform:400");
    s.trials = 100_000;
    let t = execute(&s).unwrap();
    let kind = t.column("kind").unwrap();
    let weight: Vec<_> = t.rows.iter().filter(|r| r[kind] == Cell::from("weight")).collect();
    assert_eq!(weight.len(), 1);
    let f = weight[0][t.column("frequency").unwrap()].as_f64().unwrap();
    assert!(f <= 1e-3);
    let within = t.column("within").unwrap();
    let bridge: Vec<_> = t.rows.iter().filter(|r| r[kind] == Cell::from("bridge")).collect();
    assert!(!bridge.is_empty());
    assert!(bridge.iter().all(|r| r[within] == Cell::Bool(true)));
    // Bridge rows leave the Monte Carlo columns empty.
    assert_eq!(bridge[0][t.column("trials").unwrap()], Cell::Null);

    s.trials = 1000;
    s.overrides.weights = WeightChoice::Zero;
    s.overrides.bridge = BridgeChoice::Off;
    let t = execute(&s).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.values("exceedances")[0], &Cell::UInt(0));
    assert_eq!(t.values("threshold")[0], &Cell::Float(0.0));
}

#[test]
fn concentration_weights_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    let a: Vec<f64> = (0..400).map(|i| if i < 200 { 1.0 } else { 0.0 }).collect();
    std::fs::write(&path, serde_json::to_string(&a).unwrap()).unwrap();
    let mut s = spec(CommandKind::Concentration, "gen:uniform:400");
    s.trials = 20_000;
    s.overrides.weights = WeightChoice::File(path.clone());
    s.overrides.bridge = BridgeChoice::Off;
    let t = execute(&s).unwrap();
    assert!((t.values("expected_weight")[0].as_f64().unwrap() - 50.0).abs() < 1e-9);
    assert!(t.values("frequency")[0].as_f64().unwrap() <= 1e-3);

    std::fs::write(&path, "[1, 2").unwrap();
    let args = [
        "concentration",
        "--instance",
        "gen:uniform:400",
        "--override",
        &format!("a={}", path.display()),
    ];
    assert_eq!(status(&args), 3);
    std::fs::write(&path, "[1, 2]").unwrap();
    assert_eq!(status(&args), 2);
}

#[test]
fn lowerbound_defaults_on_the_large_hard_pair() {
    let mut s = spec(CommandKind::Lowerbound, "gen:hard:4096");
    s.trials = 300;
    s.format = Format::Json;
    let t = execute(&s).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.values("s")[0], &Cell::UInt(24));
    for name in [
        "ratio_le_8_frac",
        "helpful_frac",
        "error_signature_likelihood",
        "error_hits_difference",
        "error_distinguisher",
    ] {
        let v = column_f64(&t, name)[0];
        assert!((0.0..=1.0).contains(&v), "{name}");
    }
    assert!(column_f64(&t, "ratio_le_8_frac")[0] >= 0.45);
    let json = t.to_json();
    assert!(json[0]["preconditions_satisfied"].as_bool().unwrap());
}

#[test]
fn lowerbound_helpful_fraction_at_the_l3_limit() {
    let mut s = spec(CommandKind::Lowerbound, "gen:hard:1024");
    s.trials = 2000;
    s.s = SChoice::Fixed(23);
    s.overrides.allow_out_of_regime = true;
    s.overrides.testers = vec![];
    let t = execute(&s).unwrap();
    assert!(column_f64(&t, "helpful_frac")[0] <= 0.08);
    assert_eq!(t.values("preconditions_satisfied")[0], &Cell::Bool(false));
    assert!(t.column("error_hits_difference").is_none());
}

#[test]
fn generated_files_reload_to_the_same_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pair");
    let mut g = spec(CommandKind::Generate, "gen:hard:256");
    g.output = Some(out.clone());
    let t = execute(&g).unwrap();
    assert_eq!(t.values("p_file")[0].render(), out.join("p.json").display().to_string());
    let files = format!("{},{}", out.join("p.json").display(), out.join("q.json").display());
    let from_files = execute(&spec(CommandKind::Norms, &files)).unwrap();
    let generated = execute(&spec(CommandKind::Norms, "gen:hard:256")).unwrap();
    for name in ["l1", "alpha", "numsamples", "theorem_s"] {
        let (a, b) = (column_f64(&from_files, name)[0], column_f64(&generated, name)[0]);
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{name}");
    }

    let permuted = dir.path().join("perm");
    g.output = Some(permuted.clone());
    g.overrides.permute = true;
    g.master_seed = 3;
    execute(&g).unwrap();
    assert_ne!(read(&out.join("p.json")), read(&permuted.join("p.json")));
    let files = format!("{},{}", permuted.join("p.json").display(), permuted.join("q.json").display());
    let t = execute(&spec(CommandKind::Norms, &files)).unwrap();
    let (a, b) = (column_f64(&t, "alpha")[0], column_f64(&generated, "alpha")[0]);
    assert!((a - b).abs() <= 1e-12);

    assert_eq!(status(&["generate"]), 2);
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn pair_file_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.json");
    std::fs::write(
        &path,
        r#"{"p": {"n": 4, "probs": [0.5, 0.5, 0, 0]}, "q": {"n": 4, "entries": [[2, 0.5], [3, 0.5]]}}"#,
    )
    .unwrap();
    let inst: Instance = path.to_str().unwrap().parse().unwrap();
    let t = execute(&ExperimentSpec::new(CommandKind::Norms, inst)).unwrap();
    assert_eq!(column_f64(&t, "l1")[0], 2.0);
    assert_eq!(t.values("weakly_disjoint")[0], &Cell::Bool(true));
    std::fs::write(&path, r#"{"p": {"n": 1, "probs": [1]}}"#).unwrap();
    assert_eq!(status(&["norms", "--instance", path.to_str().unwrap()]), 3);
}

#[test]
fn stdout_is_the_default_destination() {
    let out = bin().args(["norms", "--instance", "gen:hard:64", "--format", "json"]).output().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["n"], 64);
    assert_eq!(v[0]["weakly_disjoint"], true);
}
