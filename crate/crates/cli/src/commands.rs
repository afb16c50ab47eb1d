use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use manicon_core::analysis::{damping_sweep_teleop, manipulability_sweep, pi_integral_sweep, SweepRow};
use manicon_core::presets;
use manicon_core::scenario::{ModeSpec, StimulusSpec};
use manicon_core::{consensus_report, run_scenario, ScenarioConfig};

use crate::output;
use crate::{Overrides, RunArgs, SweepArgs, SweepKind};

const DAMPING_SCALES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// Preset name first, then a file path.
pub fn load(scenario: &str) -> Result<ScenarioConfig> {
    if let Some(cfg) = presets::by_name(scenario) {
        return Ok(cfg);
    }
    let path = Path::new(scenario);
    if !path.exists() {
        bail!(
            "`{scenario}` is neither a preset ({}) nor an existing file",
            presets::NAMES.join(", ")
        );
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {scenario}"))?;
    ScenarioConfig::from_json(&text).map_err(|e| anyhow!("{scenario}: {e}"))
}

fn apply(cfg: &mut ScenarioConfig, o: &Overrides) -> Result<()> {
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = o.dt {
        cfg.dt = dt;
    }
    if let Some(t_end) = o.t_end {
        cfg.t_end = t_end;
    }
    if let Some(name) = &o.integrator {
        cfg.integrator = name.parse().map_err(|e: String| anyhow!(e))?;
    }
    Ok(())
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => bail!("--jobs must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            Ok(pool.install(f))
        }
    }
}

fn operator_torque(cfg: &ScenarioConfig) -> [f64; 2] {
    match cfg.stimulus {
        Some(StimulusSpec::JointTorque { torque, .. }) => torque,
        _ => presets::TELEOP_TORQUE,
    }
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

pub fn run(args: &RunArgs) -> Result<()> {
    let mut cfg = load(&args.scenario)?;
    apply(&mut cfg, &args.overrides)?;
    let sc = cfg.resolve()?;
    let trace = run_scenario(&sc)?;
    let report = consensus_report(&trace, &sc.graph, args.tol);

    create_dir(&args.out)?;
    output::write_trace(&args.out.join("trace.csv"), &trace, args.every)?;
    output::write_report(&args.out.join("report.csv"), &cfg.name, sc.steps(), &report)?;
    std::fs::write(args.out.join("scenario.json"), cfg.to_json())?;

    // presets that belong to a sweep also leave their row behind
    let sweep_path = args.out.join("sweep.csv");
    match (&cfg.mode, &cfg.stimulus) {
        (ModeSpec::TeleopPd { .. }, _) => {
            let torque = operator_torque(&cfg);
            let rows = in_pool(args.jobs, || damping_sweep_teleop(&cfg, &DAMPING_SCALES, torque, cfg.t_end))?;
            let rows: Vec<_> = DAMPING_SCALES.into_iter().zip(rows).collect();
            output::write_damping(&sweep_path, &rows)?;
        }
        (mode, Some(StimulusSpec::TaskPd { .. })) => {
            let (name, param) = match mode {
                ModeSpec::KinematicPi { ki, .. } => ("ki", ki[0][0]),
                _ => ("alpha", cfg.gains.alpha),
            };
            let row = SweepRow::from_run(param, &cfg, &trace, &report);
            output::write_sweep(&sweep_path, name, &[(param, Ok(row))])?;
        }
        _ => {}
    }

    println!("scenario {} ({} agents, {} steps)", cfg.name, sc.n(), sc.steps());
    println!("settled = {}", report.settled());
    let w = report.final_weighted;
    println!("final weighted mean = [{:.6}, {:.6}]", w[0], w[1]);
    if let Some(p) = report.predicted {
        println!("predicted consensus = [{:.6}, {:.6}]", p[0], p[1]);
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn validate(scenario: &str, emit: bool) -> Result<()> {
    let cfg = load(scenario)?;
    let violations = cfg.validate();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        bail!("{scenario}: {} violation(s)", violations.len());
    }
    if emit {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    let sc = cfg.resolve()?;
    println!("ok");
    match sc.predicted_consensus() {
        Ok(p) => println!("predicted consensus = [{}, {}]", p[0], p[1]),
        Err(e) => println!("predicted consensus unavailable: {e}"),
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let (preset, default_values): (&str, &[f64]) = match args.kind {
        SweepKind::Alpha => ("sec5b-alpha10", &[10.0, 0.05, 0.0]),
        SweepKind::Ki => ("sec5c-pi", &[10.0, 0.0]),
        SweepKind::Damping => ("teleop-damping", &DAMPING_SCALES),
    };
    let mut base = load(args.base.as_deref().unwrap_or(preset))?;
    apply(&mut base, &args.overrides)?;
    let values = if args.values.is_empty() { default_values.to_vec() } else { args.values.clone() };

    create_dir(&args.out)?;
    std::fs::write(args.out.join("scenario.json"), base.to_json())?;
    let path = args.out.join("sweep.csv");
    let failures = match args.kind {
        SweepKind::Damping => {
            if !matches!(base.mode, ModeSpec::TeleopPd { .. }) {
                bail!("damping sweep needs a teleop_pd scenario");
            }
            let torque = operator_torque(&base);
            let rows = in_pool(args.jobs, || damping_sweep_teleop(&base, &values, torque, base.t_end))?;
            let rows: Vec<_> = values.iter().copied().zip(rows).collect();
            output::write_damping(&path, &rows)?;
            for (p, r) in &rows {
                match r {
                    Ok(r) => println!("kd x{p}: displacement {:.6}", r.displacement),
                    Err(e) => eprintln!("kd x{p}: {e}"),
                }
            }
            rows.iter().filter(|(_, r)| r.is_err()).count()
        }
        kind => {
            let (name, rows) = match kind {
                SweepKind::Alpha => (
                    "alpha",
                    in_pool(args.jobs, || manipulability_sweep(&base, &values, base.stimulus.clone(), args.tol))?,
                ),
                _ => ("ki", in_pool(args.jobs, || pi_integral_sweep(&base, &values, args.tol))?),
            };
            let rows: Vec<_> = values.iter().copied().zip(rows).collect();
            output::write_sweep(&path, name, &rows)?;
            for (p, r) in &rows {
                match r {
                    Ok(r) => println!("{name} {p}: final mean X {:.4}", r.final_mean[0]),
                    Err(e) => eprintln!("{name} {p}: {e}"),
                }
            }
            rows.iter().filter(|(_, r)| r.is_err()).count()
        }
    };
    if failures > 0 {
        bail!("{failures} sweep row(s) failed; see {}", path.display());
    }
    Ok(())
}
