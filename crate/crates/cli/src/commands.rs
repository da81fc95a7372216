use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use kickback::data::{kfold, load_csv, synthetic_teacher, Dataset};
use kickback::experiments::{
    calibrate_rescale, grid_search, gradcheck, inspect, run_oracles, GradcheckConfig, OracleConfig,
};
use kickback::regret::{best_in_hindsight_rectilinear, Adversary, RegretScenario, MAX_GRID_DIM};
use kickback::{
    coherence_probe, run_online_node, train, Algorithm, MetricsRecord, Network, RectifierSign, RegretExperiment,
    RegretTrace, StepSchedule,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, RunData};
use crate::error::{CliError, CliResult};

fn emit<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("records serialize"));
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn prepare_output(cfg: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    cfg.save(&cfg.output_dir.join("config.resolved.toml"))
}

/// Loads, applies the output override and resolves defaults.
pub fn load_config(path: Option<&Path>, output_dir: Option<PathBuf>) -> CliResult<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    cfg.resolve()
}

fn network_for(cfg: &RunConfig, data: &RunData, snapshot: Option<&Path>) -> CliResult<Network> {
    let n_features = data.train.n_features();
    let net = match snapshot {
        Some(p) => Network::load(p)?,
        None => Network::init(&cfg.topology(n_features), cfg.init_scheme, cfg.seed)?,
    };
    if net.layer_sizes()[0] != n_features {
        return Err(CliError::Config(format!(
            "network expects {} inputs but the data has {n_features} features",
            net.layer_sizes()[0]
        )));
    }
    Ok(net)
}

pub fn metrics_csv(records: &[MetricsRecord], hidden: usize) -> String {
    let mut out = String::from("epoch,train_mse,test_mse,nmse_train,nmse_test");
    for h in 1..=hidden {
        write!(out, ",coh_h{h}").unwrap();
    }
    out.push_str(",wall_ms\n");
    for r in records {
        write!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.train_error, r.test_error, r.nmse_train, r.nmse_test
        )
        .unwrap();
        for c in &r.coherence {
            write!(out, ",{c}").unwrap();
        }
        writeln!(out, ",{}", r.wall_ms).unwrap();
    }
    out
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<()> {
    let data = cfg.load_data()?;
    let mut net = network_for(cfg, &data, None)?;
    prepare_output(cfg)?;
    let records = train(&mut net, &data.train, &data.test, &cfg.train_config())?;
    let dir = &cfg.output_dir;
    write_file(&dir.join("metrics.csv"), &metrics_csv(&records, net.num_hidden()))?;
    net.save(&dir.join("network.txt"))?;
    let summary = json!({
        "final": records.last(),
        "n_train": data.train.len(),
        "n_test": data.test.len(),
        "n_weights": net.num_weights(),
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&dir.join("summary.json"), &(text + "\n"))?;
    if let Some(last) = records.last() {
        emit(last);
    }
    Ok(())
}

pub fn cmd_gradcheck(config: &GradcheckConfig) -> CliResult<()> {
    let report = gradcheck(config)?;
    emit(&report);
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "max relative error {:e} is not below {:e}",
            report.max_rel_err, config.tolerance
        )))
    }
}

pub fn cmd_oracles(config: &OracleConfig) -> CliResult<()> {
    if config.trials == 0 {
        return Err(CliError::Config("trials must be >= 1".into()));
    }
    let report = run_oracles(config)?;
    emit(&report);
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "{} residual failure(s), {}/{} sign agreements, {} descent increase(s)",
            report.residual_failures,
            report.signed_agreement.0,
            report.signed_agreement.1,
            report.descent_increased
        )))
    }
}

/// Options of the `regret` subcommand.
#[derive(Debug, Clone)]
pub struct RegretArgs {
    pub scenario: RegretScenario,
    pub runs: usize,
    /// Fixed `(x, φ)` sequence; overrides the generated one.
    pub sequence: Option<PathBuf>,
    pub header: bool,
    /// Grid comparator resolution for `dim <= 4`.
    pub grid_resolution: Option<usize>,
}

#[derive(Serialize)]
struct RegretLine<'a> {
    run: usize,
    seed: u64,
    dim: usize,
    steps: usize,
    adversary: &'a str,
    sign: RectifierSign,
    radius: f64,
    init_fraction: f64,
    firing_count: usize,
    cumulative_loss: f64,
    comparator_loss: f64,
    regret_per_firing: Option<f64>,
    bound: Option<f64>,
    within_bound: Option<bool>,
    grid_comparator_loss: Option<f64>,
    grid_regret_per_firing: Option<f64>,
    d: f64,
    e_cap: f64,
    max_norm: f64,
}

fn regret_line<'a>(
    run: usize,
    s: &RegretScenario,
    adversary: &'a str,
    trace: &RegretTrace,
    grid_resolution: Option<usize>,
) -> CliResult<RegretLine<'a>> {
    let f = trace.firing_set.len();
    let grid = match grid_resolution {
        Some(res) if f > 0 && s.dim <= MAX_GRID_DIM => {
            Some(best_in_hindsight_rectilinear(&trace.firing_set, s.sign, s.radius, res)?.1)
        }
        _ => None,
    };
    Ok(RegretLine {
        run,
        seed: s.seed,
        dim: s.dim,
        steps: s.steps,
        adversary,
        sign: s.sign,
        radius: s.radius,
        init_fraction: s.init_fraction,
        firing_count: f,
        cumulative_loss: trace.cumulative_loss,
        comparator_loss: trace.comparator_loss,
        regret_per_firing: trace.regret_per_firing,
        bound: trace.bound,
        within_bound: trace.regret_per_firing.zip(trace.bound).map(|(r, b)| r <= b),
        grid_comparator_loss: grid,
        grid_regret_per_firing: grid.map(|g| (trace.cumulative_loss - g) / f as f64),
        d: trace.d,
        e_cap: trace.e_cap,
        max_norm: trace.max_norm,
    })
}

pub fn cmd_regret(args: &RegretArgs) -> CliResult<()> {
    if args.runs == 0 {
        return Err(CliError::Config("runs must be >= 1".into()));
    }
    if let Some(path) = &args.sequence {
        let mut s = args.scenario;
        let data = load_sequence(path, args.header)?;
        s.dim = data.n_features();
        s.steps = data.len();
        let sequence: Vec<(Vec<f64>, f64)> = (0..data.len()).map(|i| (data.input(i).to_vec(), data.target(i))).collect();
        // w_1 points along the all-ones direction with norm init_fraction·R
        let scale = s.init_fraction * s.radius / (s.dim as f64).sqrt();
        let w_init = vec![scale; s.dim];
        let e_cap = s.radius * s.radius - w_init.iter().map(|v| v * v).sum::<f64>();
        let d = sequence
            .iter()
            .map(|(x, phi)| phi * phi * x.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        let step_schedule = match s.constant_eta {
            Some(eta) => StepSchedule::Constant(eta),
            None => StepSchedule::inverse_sqrt_for(d, e_cap),
        };
        let trace = run_online_node(&RegretExperiment {
            sequence,
            radius: s.radius,
            w_init,
            step_schedule,
            sign: s.sign,
        })?;
        emit(&regret_line(0, &s, "sequence", &trace, args.grid_resolution)?);
        return Ok(());
    }
    for run in 0..args.runs {
        let s = RegretScenario {
            seed: args.scenario.seed.wrapping_add(run as u64),
            ..args.scenario
        };
        let trace = s.run()?;
        emit(&regret_line(run, &s, s.adversary.name(), &trace, args.grid_resolution)?);
    }
    Ok(())
}

fn load_sequence(path: &Path, header: bool) -> CliResult<Dataset> {
    let first = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cols = first.lines().next().map_or(0, |l| l.split(',').count());
    if cols < 2 {
        return Err(CliError::Config(format!(
            "{}: each row needs at least one input and a target",
            path.display()
        )));
    }
    Ok(load_csv(path, cols - 1, header)?)
}

pub fn cmd_datagen(cfg: &RunConfig) -> CliResult<()> {
    let data = synthetic_teacher(
        cfg.synthetic_seed,
        cfg.synthetic_features,
        &cfg.synthetic_hidden,
        cfg.synthetic_train,
        cfg.synthetic_test,
        cfg.synthetic_noise,
    )?;
    prepare_output(cfg)?;
    let dir = &cfg.output_dir;
    let train_path = dir.join("train.csv");
    let test_path = dir.join("test.csv");
    data.train.save_csv(&train_path, cfg.header)?;
    data.test.save_csv(&test_path, cfg.header)?;
    data.teacher.save(&dir.join("teacher.txt"))?;
    emit(&json!({
        "train_csv": train_path,
        "test_csv": test_path,
        "teacher": dir.join("teacher.txt"),
        "teacher_seed": data.teacher_seed,
        "n_train": data.train.len(),
        "n_test": data.test.len(),
        "target_variance": data.train.target_stats().variance,
    }));
    Ok(())
}

/// Writes `gridsearch.csv`, `folds.csv` and the winning `best.toml`, and
/// prints the ranked table.
pub fn cmd_gridsearch(cfg: &RunConfig) -> CliResult<()> {
    let data = cfg.load_data()?;
    let grid = cfg.grid_config(data.train.n_features());
    let folds = kfold(data.train.len(), cfg.folds, cfg.seed)?;
    let cells = grid_search(&data.train, &grid)?;
    prepare_output(cfg)?;
    let dir = &cfg.output_dir;

    let mut fold_csv = String::from("index,fold\n");
    let mut owner = vec![0; data.train.len()];
    for (f, idx) in folds.iter().enumerate() {
        for &i in idx {
            owner[i] = f;
        }
    }
    for (i, f) in owner.iter().enumerate() {
        writeln!(fold_csv, "{i},{f}").unwrap();
    }
    write_file(&dir.join("folds.csv"), &fold_csv)?;

    let mut table = String::from("rank,learning_rate,rescale,mean_nmse");
    for f in 0..cfg.folds {
        write!(table, ",fold{f}").unwrap();
    }
    table.push('\n');
    for (rank, c) in cells.iter().enumerate() {
        let rescale: Vec<String> = c.rescale.iter().map(f64::to_string).collect();
        write!(table, "{},{},{},{}", rank + 1, c.learning_rate, rescale.join(" "), c.mean_nmse).unwrap();
        for v in &c.fold_nmse {
            write!(table, ",{v}").unwrap();
        }
        table.push('\n');
    }
    write_file(&dir.join("gridsearch.csv"), &table)?;
    print!("{table}");

    let best = &cells[0];
    let mut winner = cfg.clone();
    winner.learning_rate = best.learning_rate;
    if cfg.algorithm == Algorithm::Kickback {
        winner.rescale = Some(best.rescale.clone());
    }
    winner.save(&dir.join("best.toml"))?;
    std::io::stdout().flush().ok();
    Ok(())
}

pub fn cmd_coherence_report(cfg: &RunConfig, network: &Path) -> CliResult<()> {
    let data = cfg.load_data()?;
    let net = network_for(cfg, &data, Some(network))?;
    let n_probe = cfg.probe_count.min(data.test.len());
    if n_probe == 0 {
        return Err(CliError::Config("probe_count must be >= 1".into()));
    }
    let report = coherence_probe(&net, (0..n_probe).map(|i| data.test.input(i)))?;
    for (h, (c, tau)) in report.per_layer.iter().zip(&report.per_node_tau).enumerate() {
        emit(&json!({ "layer": h + 1, "coherence": c, "mean_tau": tau }));
    }
    emit(&json!({
        "n_probe": report.n_probe,
        "fraction_coherent": report.fraction_coherent,
        "min_layer_coherence": report.per_layer.iter().copied().fold(f64::INFINITY, f64::min),
    }));
    Ok(())
}

fn probes(data: &Dataset, count: usize) -> Vec<(&[f64], f64)> {
    (0..count.min(data.len())).map(|i| (data.input(i), data.target(i))).collect()
}

pub fn cmd_calibrate(cfg: &RunConfig, network: Option<&Path>) -> CliResult<()> {
    let data = cfg.load_data()?;
    let net = network_for(cfg, &data, network)?;
    let measured = calibrate_rescale(&net, &probes(&data.train, cfg.probe_count))?;
    let mut proposed = measured.clone();
    if let Some(last) = proposed.last_mut() {
        *last = 1.0;
    }
    let line: Vec<String> = proposed.iter().map(f64::to_string).collect();
    emit(&json!({
        "measured": measured,
        "proposed": proposed,
        "config_line": format!("rescale = [{}]", line.join(", ")),
    }));
    Ok(())
}

pub fn cmd_inspect(cfg: &RunConfig, network: Option<&Path>, index: usize, test_split: bool) -> CliResult<()> {
    let data = cfg.load_data()?;
    let net = network_for(cfg, &data, network)?;
    let set = if test_split { &data.test } else { &data.train };
    if index >= set.len() {
        return Err(CliError::Config(format!("example {index} out of range (split has {})", set.len())));
    }
    let rescale = cfg.train_config().rescale;
    for record in inspect(&net, set.input(index), set.target(index), &rescale)? {
        emit(&record);
    }
    Ok(())
}

pub fn parse_adversary(s: &str) -> Result<Adversary, String> {
    s.parse().map_err(|e: kickback::Error| e.to_string())
}
