use std::path::{Path, PathBuf};

use rayon::prelude::*;
use soliton_qubit::chain::{evolve, ChainParams, ChainState, ChainTrace};
use soliton_qubit::closedform::onresonance_pminus;
use soliton_qubit::output::{fmt_num, CsvFile};
use soliton_qubit::qubit::{
    coupling, integrate_tdse, make_drive, Drive, EnvelopeSource, ProbabilityTrace, QubitState,
};
use soliton_qubit::solitons::SolitonSpec;

use crate::config::{
    ChainBlock, ChainIntegrationBlock, DriveBlock, Initial, Kind, OutputBlock, QubitBlock,
    Reduction, Scenario, ScenarioConfig, SolitonBlock, Source, SweepConfig, TimeBlock,
    TuningBlock,
};
use crate::failure::CliError;

/// Snapshot files kept by default from a chain-sampled qubit run.
const MAX_SNAPSHOTS: usize = 200;

pub struct Options {
    pub out: Option<PathBuf>,
    pub dt: Option<f64>,
}

impl Options {
    fn out_dir(&self, configured: &OutputBlock, fallback: &str) -> Result<PathBuf, CliError> {
        let dir = self
            .out
            .clone()
            .or_else(|| configured.dir.clone())
            .unwrap_or_else(|| PathBuf::from(fallback));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn checked_dt(&self) -> Result<Option<f64>, CliError> {
        match self.dt {
            Some(dt) if !(dt.is_finite() && dt > 0.0) => {
                Err(CliError::validation(format!("--dt must be positive, got {dt}")))
            }
            dt => Ok(dt),
        }
    }
}

fn write_scenario(dir: &Path, cfg: &ScenarioConfig) -> Result<(), CliError> {
    let path = dir.join("scenario.json");
    let text = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn initial_state(
    spec: &SolitonSpec,
    params: &ChainParams,
    initial: Initial,
    t: f64,
) -> Result<ChainState, CliError> {
    Ok(match initial {
        Initial::Soliton => ChainState::from_soliton(spec, params, t),
        Initial::KinkAntikink => ChainState::kink_antikink(spec, params, t)?,
    })
}

pub fn chain_run(cfg: &ScenarioConfig, opts: &Options) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    if let Some(dt) = opts.checked_dt()? {
        cfg.chain_integration.dt = Some(dt);
    }
    let params = cfg.chain_params()?;
    let spec = cfg.soliton(&params)?;
    let ci = &cfg.chain_integration;
    let t_final = ci
        .t_final
        .ok_or_else(|| CliError::validation("chain_integration.t_final is required for chain run"))?;
    let dt = ci.dt.unwrap_or_else(|| params.default_dt());
    let steps = (t_final / dt).ceil().max(1.0) as usize;
    let every = ci.sample_every.unwrap_or((steps / 300).max(1));
    let out = opts.out_dir(&cfg.output, "out")?;

    log::info!("chain run: N = {}, dt = {dt}, {steps} steps", params.n);
    let init = initial_state(&spec, &params, ci.initial, 0.0)?;
    let trace = evolve(&init, &params, t_final, dt, every)?;
    trace.write_csv_strided(&out, ci.snapshot_every.unwrap_or(1))?;
    write_profile(&spec, &params, &out)?;
    write_scenario(&out, &cfg)?;
    println!("samples={} norm_drift={}", trace.len(), fmt_num(trace.norm_drift()));
    Ok(())
}

fn write_profile(spec: &SolitonSpec, params: &ChainParams, out: &Path) -> Result<(), CliError> {
    let xs: Vec<f64> = (0..params.n).map(|n| n as f64 * params.dx).collect();
    Ok(spec.write_profile_csv(&out.join("profile_t0.csv"), &xs, 0.0)?)
}

pub struct Simulation {
    pub drive: Drive,
    pub trace: ProbabilityTrace,
    pub chain: Option<ChainTrace>,
}

pub fn simulate(sc: &Scenario) -> Result<Simulation, CliError> {
    let (drive, chain) = match sc.source {
        Source::Analytic => (
            make_drive(&sc.spec, &sc.qubit, &sc.params, EnvelopeSource::Analytic, sc.mode)?,
            None,
        ),
        Source::Chain => {
            let dt = sc.chain_dt();
            let every = sc
                .chain
                .sample_every
                .unwrap_or_else(|| ((sc.dt / dt).round() as usize).max(1));
            let init = initial_state(&sc.spec, &sc.params, sc.chain.initial, sc.t_i)?;
            log::info!("chain-sampled drive: dt = {dt}, sampling every {every} steps");
            let trace = evolve(&init, &sc.params, sc.t_f, dt, every)?;
            let drive = make_drive(&sc.spec, &sc.qubit, &sc.params, EnvelopeSource::Chain(&trace), sc.mode)?;
            (drive, Some(trace))
        }
    };
    let trace = integrate_tdse(&drive, QubitState::up(sc.t_i), sc.t_i, sc.t_f, sc.dt)?;
    Ok(Simulation { drive, trace, chain })
}

fn with_dt(cfg: &ScenarioConfig, opts: &Options) -> Result<ScenarioConfig, CliError> {
    let mut cfg = cfg.clone();
    if let Some(dt) = opts.checked_dt()? {
        cfg.time.dt = dt;
    }
    Ok(cfg)
}

pub fn qubit_run(cfg: &ScenarioConfig, opts: &Options) -> Result<(), CliError> {
    let cfg = with_dt(cfg, opts)?;
    let sc = cfg.resolve()?;
    let out = opts.out_dir(&cfg.output, "out")?;
    let sim = simulate(&sc)?;
    write_qubit_outputs(&sim, &out, "")?;
    if let Some(chain) = &sim.chain {
        let stride = sc
            .chain
            .snapshot_every
            .unwrap_or_else(|| chain.len().div_ceil(MAX_SNAPSHOTS));
        chain.write_csv_strided(&out, stride)?;
    }
    write_scenario(&out, &cfg)?;
    println!(
        "final_P_minus={} max_P_minus={} samples={}",
        fmt_num(sim.trace.final_p_minus()),
        fmt_num(sim.trace.max_p_minus()),
        sim.trace.len()
    );
    Ok(())
}

fn write_qubit_outputs(sim: &Simulation, out: &Path, suffix: &str) -> Result<(), CliError> {
    sim.trace.write_csv(&out.join(format!("trace{suffix}.csv")))?;
    sim.drive.write_csv(&out.join(format!("drive{suffix}.csv")), &sim.trace.times)?;
    Ok(())
}

pub fn tune(cfg: &ScenarioConfig) -> Result<(), CliError> {
    if cfg.tuning.is_none() {
        return Err(CliError::validation("tune needs a tuning block"));
    }
    let sc = cfg.resolve()?;
    let tune = sc.tune.expect("tuning block present");
    let tt = sc.transit_time.expect("tuning needs a moving soliton");
    let omega_t = coupling(sc.spec.amplitude(), &sc.qubit, sc.params.s) * tt;
    let lines = [
        ("T", tt),
        ("d_z0_T", tune.dz0 * tt),
        ("d_z1_T", tune.dz1 * tt),
        ("d_z_T", sc.qubit.dz * tt),
        ("d_xy_T", sc.qubit.dxy * tt),
        ("omega_b0_T", omega_t),
        ("eta", tune.eta),
        ("predicted_P_minus", onresonance_pminus(omega_t)),
    ];
    for (key, value) in lines {
        println!("{key}={}", fmt_num(value));
    }
    Ok(())
}

/// Built-in parameter sets of the three figures.
pub fn figure_config(id: u8) -> ScenarioConfig {
    let (chain, soliton, tuning, t_final) = match id {
        1 => (
            ChainBlock { j: 1.0, a: 3.0, s: 1.0, n: 1000, dx: 1.0 },
            SolitonBlock { kind: Kind::Bright, k: 0.015708, width: 10.0, x0: 500.0 },
            None,
            Some(300.0),
        ),
        2 => (
            // k N = 14 pi, so a chain-sampled variant of this scenario has a smooth seam
            ChainBlock { j: 1.0, a: 10.0, s: 10.0, n: 420, dx: 1.0 },
            SolitonBlock { kind: Kind::Bright, k: std::f64::consts::PI / 30.0, width: 10.0, x0: 0.0 },
            Some(TuningBlock { eta: 1.372, xi: 1.0, p: 0, sign: -1, correction: true }),
            None,
        ),
        3 => (
            ChainBlock { j: 1.0, a: 1.0, s: 1.0, n: 1000, dx: 1.0 },
            SolitonBlock { kind: Kind::Dark, k: std::f64::consts::PI - 0.015708, width: 10.0, x0: 500.0 },
            None,
            Some(300.0),
        ),
        _ => unreachable!("figure ids are 1, 2 and 3"),
    };
    ScenarioConfig {
        chain,
        soliton,
        qubit: QubitBlock::default(),
        drive: DriveBlock::default(),
        time: TimeBlock::default(),
        chain_integration: ChainIntegrationBlock { t_final, ..Default::default() },
        tuning,
        output: OutputBlock::default(),
    }
}

pub fn figure(id: u8, opts: &Options) -> Result<(), CliError> {
    let mut cfg = figure_config(id);
    let fallback = format!("fig{id}");
    if id == 2 {
        return figure_2(&cfg, opts, &fallback);
    }
    // one snapshot per unit time
    let dt = opts.checked_dt()?.unwrap_or_else(|| cfg.chain_params().expect("built-in").default_dt());
    cfg.chain_integration.dt = Some(dt);
    cfg.chain_integration.sample_every = Some(((1.0 / dt).round() as usize).max(1));
    cfg.output.dir = Some(opts.out.clone().unwrap_or_else(|| PathBuf::from(fallback)));
    chain_run(&cfg, &Options { out: None, dt: None })
}

fn figure_2(cfg: &ScenarioConfig, opts: &Options, fallback: &str) -> Result<(), CliError> {
    let cfg = with_dt(cfg, opts)?;
    let out = opts.out_dir(&cfg.output, fallback)?;
    let mut taylor = cfg.clone();
    taylor.drive.mode = crate::config::Mode::Taylor;
    let mut bare = cfg.clone();
    bare.tuning.as_mut().expect("built-in tuning").correction = false;
    let mut finals = Vec::new();
    for (name, c) in [("exact", &cfg), ("taylor", &taylor), ("uncorrected", &bare)] {
        let sim = simulate(&c.resolve()?)?;
        write_qubit_outputs(&sim, &out, &format!("_{name}"))?;
        finals.push((name, sim.trace.final_p_minus()));
    }
    write_scenario(&out, &cfg)?;
    let sc = cfg.resolve()?;
    let tt = sc.transit_time.expect("moving soliton");
    let tune = sc.tune.expect("tuning");
    print!(
        "JT={} AT={} d_xy_T={} d_z1_T={}",
        fmt_num(sc.params.j * tt),
        fmt_num(sc.params.a * tt),
        fmt_num(sc.qubit.dxy * tt),
        fmt_num(tune.dz1 * tt)
    );
    for (name, p) in finals {
        print!(" final_P_minus_{name}={}", fmt_num(p));
    }
    println!();
    Ok(())
}

pub fn sweep(cfg: &SweepConfig, opts: &Options) -> Result<(), CliError> {
    cfg.validate()?;
    let base = with_dt(&cfg.base, opts)?;
    let sweep = SweepConfig { base, ..cfg.clone() };
    let out = opts.out_dir(&sweep.base.output, "out")?;
    let values = sweep.range.values();
    let results: Vec<Result<f64, CliError>> = values
        .par_iter()
        .map(|&v| {
            let sc = sweep.scenario_at(v).resolve()?;
            let trace = simulate(&sc)?.trace;
            Ok(match sweep.reduction {
                Reduction::Final => trace.final_p_minus(),
                Reduction::Max => trace.max_p_minus(),
            })
        })
        .collect();
    let path = out.join("sweep.csv");
    let mut file = CsvFile::create(&path, &format!("{},reduction_value", sweep.parameter))?;
    for (v, r) in values.iter().zip(results) {
        file.row(&[*v, r?])?;
    }
    file.finish()?;
    println!("rows={} parameter={}", values.len(), sweep.parameter);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_parameter_sets() {
        let f1 = figure_config(1);
        assert_eq!((f1.soliton.k, f1.soliton.width, f1.chain.s, f1.chain.j, f1.chain.a), (0.015708, 10.0, 1.0, 1.0, 3.0));
        let f3 = figure_config(3);
        assert_eq!(f3.soliton.kind, Kind::Dark);
        assert_eq!((f3.chain.j, f3.chain.s, f3.chain.a), (1.0, 1.0, 1.0));

        let sc = figure_config(2).resolve().unwrap();
        let tt = sc.transit_time.unwrap();
        assert!((sc.params.j * tt - 4.783).abs() < 1e-3);
        assert!((sc.params.a * tt - 47.834).abs() < 1e-3);
        assert!((sc.qubit.dxy * tt - 2.243).abs() < 2e-3);
        assert!((sc.tune.unwrap().dz1 * tt - 0.051).abs() < 1e-3);
        assert!((sc.spec.k() * sc.params.n as f64 / (2.0 * std::f64::consts::PI)).fract().abs() < 1e-9);
    }
}
