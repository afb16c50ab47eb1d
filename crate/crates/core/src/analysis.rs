//! Metrics extracted from finished runs and parameter sweeps.

use nalgebra::{DVector, Vector2};
use rayon::prelude::*;

use crate::error::Result;
use crate::graph::{self, DirectedGraph};
use crate::presets;
use crate::scenario::{diag2, ModeSpec, ScenarioConfig, StimulusSpec};
use crate::sim::{run_config, Trace};

/// Fraction of trailing samples averaged into the final equilibrium.
pub const FINAL_WINDOW: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusReport {
    pub tol: f64,
    /// Largest `|x_i - x_j|` over agent pairs, per sample.
    pub max_pairwise_error: Vec<f64>,
    /// `sum_k gamma_k x_k`, per sample.
    pub weighted_mean: Vec<Vector2<f64>>,
    /// Largest `|x_o,i - x_i|` over agents, per sample.
    pub max_observation_error: Vec<f64>,
    /// Plain agent mean averaged over the final window.
    pub final_mean: Vector2<f64>,
    /// Gamma-weighted mean averaged over the final window.
    pub final_weighted: Vector2<f64>,
    pub predicted: Option<Vector2<f64>>,
    pub final_max_pairwise_error: f64,
    pub final_max_speed: f64,
    pub final_max_observation_error: f64,
    /// `None` when the pairwise error never stays below `tol`.
    pub settling_time: Option<f64>,
}

impl ConsensusReport {
    pub fn settled(&self) -> bool {
        self.settling_time.is_some()
    }

    /// Scalar summary in a stable order.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        let p = self.predicted.unwrap_or(Vector2::repeat(f64::NAN));
        vec![
            ("tol", self.tol),
            ("settled", if self.settled() { 1.0 } else { 0.0 }),
            ("settling_time", self.settling_time.unwrap_or(f64::NAN)),
            ("final_mean_x", self.final_mean[0]),
            ("final_mean_y", self.final_mean[1]),
            ("final_weighted_x", self.final_weighted[0]),
            ("final_weighted_y", self.final_weighted[1]),
            ("predicted_x", p[0]),
            ("predicted_y", p[1]),
            ("final_max_pairwise_error", self.final_max_pairwise_error),
            ("final_max_speed", self.final_max_speed),
            ("final_max_observation_error", self.final_max_observation_error),
        ]
    }
}

fn window_start(len: usize) -> usize {
    let count = ((len as f64 * FINAL_WINDOW).ceil() as usize).clamp(1, len.max(1));
    len - count
}

fn max_pairwise(xs: impl Iterator<Item = Vector2<f64>> + Clone) -> f64 {
    let mut worst = 0.0_f64;
    for (a, xa) in xs.clone().enumerate() {
        for xb in xs.clone().skip(a + 1) {
            worst = worst.max((xa - xb).norm());
        }
    }
    worst
}

/// First time after which `series` stays below `tol`; `None` if it ends at
/// or above `tol`.
pub fn settling_time(series: &[f64], dt: f64, tol: f64) -> Option<f64> {
    match series.iter().rposition(|&e| !(e < tol)) {
        None => Some(0.0),
        Some(k) if k + 1 < series.len() => Some((k + 1) as f64 * dt),
        Some(_) => None,
    }
}

fn gamma_or_uniform(g: &DirectedGraph) -> (DVector<f64>, bool) {
    match graph::left_eigenvector_gamma(g) {
        Ok(gamma) => (gamma, true),
        Err(_) => (DVector::from_element(g.n(), 1.0 / g.n().max(1) as f64), false),
    }
}

pub fn consensus_report(trace: &Trace, g: &DirectedGraph, tol: f64) -> ConsensusReport {
    let (gamma, has_tree) = gamma_or_uniform(g);
    let n = trace.n_agents();
    let mut max_pairwise_error = Vec::with_capacity(trace.len());
    let mut weighted_mean = Vec::with_capacity(trace.len());
    let mut max_observation_error = Vec::with_capacity(trace.len());
    for row in &trace.samples {
        max_pairwise_error.push(max_pairwise(row.iter().map(|a| a.x)));
        weighted_mean.push(
            row.iter()
                .zip(gamma.iter())
                .fold(Vector2::zeros(), |acc, (a, w)| acc + a.x * *w),
        );
        max_observation_error.push(
            row.iter()
                .map(|a| a.observation_error().norm())
                .fold(0.0, f64::max),
        );
    }
    let start = window_start(trace.len());
    let window = &trace.samples[start..];
    let count = window.len().max(1) as f64;
    let final_mean = window
        .iter()
        .flat_map(|row| row.iter().map(|a| a.x))
        .fold(Vector2::zeros(), |acc, x| acc + x)
        / (count * n.max(1) as f64);
    let final_weighted = weighted_mean[start..]
        .iter()
        .fold(Vector2::zeros(), |acc, x| acc + x)
        / count;
    let predicted = if has_tree && n > 0 {
        let x_o0: Vec<_> = trace.samples[0].iter().map(|a| a.state.x_o).collect();
        graph::predicted_consensus_value(g, &x_o0).ok()
    } else {
        None
    };
    let last = trace.last();
    ConsensusReport {
        tol,
        settling_time: settling_time(&max_pairwise_error, trace.dt, tol),
        final_max_pairwise_error: *max_pairwise_error.last().unwrap_or(&0.0),
        final_max_speed: last.iter().map(|a| a.xdot.norm()).fold(0.0, f64::max),
        final_max_observation_error: *max_observation_error.last().unwrap_or(&0.0),
        max_pairwise_error,
        weighted_mean,
        max_observation_error,
        final_mean,
        final_weighted,
        predicted,
    }
}

/// One run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub final_mean: Vector2<f64>,
    pub final_weighted: Vector2<f64>,
    /// `|final mean X - x_h,X|` when the stimulus has a target.
    pub offset: Option<f64>,
    /// Time after which the mean position stays within `tol` of its final
    /// value and the agents stay within `tol` of each other.
    pub settling_time: Option<f64>,
}

/// Settling of the whole response (not only of the disagreement).
pub fn response_settling_time(trace: &Trace, report: &ConsensusReport) -> Option<f64> {
    let n = trace.n_agents().max(1) as f64;
    let series: Vec<f64> = trace
        .samples
        .iter()
        .zip(&report.max_pairwise_error)
        .map(|(row, pair)| {
            let mean = row.iter().fold(Vector2::zeros(), |acc, a| acc + a.x) / n;
            pair.max((mean - report.final_mean).norm())
        })
        .collect();
    settling_time(&series, trace.dt, report.tol)
}

fn target_x(stim: &Option<StimulusSpec>) -> Option<f64> {
    match stim {
        Some(StimulusSpec::TaskPd { x_h, .. }) => Some(x_h[0]),
        _ => None,
    }
}

impl SweepRow {
    /// Row for a run that has already been made.
    pub fn from_run(param: f64, cfg: &ScenarioConfig, trace: &Trace, report: &ConsensusReport) -> Self {
        SweepRow {
            param,
            final_mean: report.final_mean,
            final_weighted: report.final_weighted,
            offset: target_x(&cfg.stimulus).map(|x| (report.final_mean[0] - x).abs()),
            settling_time: response_settling_time(trace, report),
        }
    }
}

fn sweep_row(cfg: &ScenarioConfig, param: f64, tol: f64) -> Result<SweepRow> {
    let sc = cfg.resolve()?;
    let trace = crate::sim::run_scenario(&sc)?;
    let report = consensus_report(&trace, &sc.graph, tol);
    Ok(SweepRow::from_run(param, cfg, &trace, &report))
}

/// One run per `alpha`. Rows run in parallel on the current rayon pool.
pub fn manipulability_sweep(
    base: &ScenarioConfig,
    alphas: &[f64],
    stimulus: Option<StimulusSpec>,
    tol: f64,
) -> Vec<Result<SweepRow>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let mut cfg = base.clone();
            cfg.gains.alpha = alpha;
            cfg.stimulus = stimulus.clone();
            sweep_row(&cfg, alpha, tol)
        })
        .collect()
}

/// Servo-driven runs with `alpha = 0`, one per integral gain `k` (`K_I = k I`).
/// The proportional gain and stimulus come from `base` when present.
pub fn pi_integral_sweep(base: &ScenarioConfig, kis: &[f64], tol: f64) -> Vec<Result<SweepRow>> {
    let kp = match &base.mode {
        ModeSpec::KinematicPi { kp, .. } => *kp,
        _ => diag2(60.0),
    };
    let stimulus = base.stimulus.clone().or_else(|| Some(presets::operator_stimulus()));
    kis.par_iter()
        .map(|&ki| {
            let mut cfg = base.clone();
            cfg.gains.alpha = 0.0;
            cfg.mode = ModeSpec::KinematicPi { kp, ki: diag2(ki) };
            cfg.stimulus = stimulus.clone();
            sweep_row(&cfg, ki, tol)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingRow {
    pub scale: f64,
    /// `|q_c(t_probe) - q_c(0)|` with `q_c` the joint midpoint of the pair.
    pub displacement: f64,
}

/// Teleoperation runs with `K_D` scaled by each factor and a constant
/// operator torque on the first arm from `t = 0`.
pub fn damping_sweep_teleop(
    base: &ScenarioConfig,
    scales: &[f64],
    torque: [f64; 2],
    t_probe: f64,
) -> Vec<Result<DampingRow>> {
    scales
        .par_iter()
        .map(|&scale| {
            let mut cfg = base.clone();
            if let ModeSpec::TeleopPd { kd, .. } = &mut cfg.mode {
                for row in kd.iter_mut() {
                    for v in row.iter_mut() {
                        *v *= scale;
                    }
                }
            }
            cfg.stimulus = Some(StimulusSpec::JointTorque { agent: 0, t_on: 0.0, torque });
            cfg.t_end = t_probe;
            let trace = run_config(&cfg)?;
            let k = ((t_probe / trace.dt).round() as usize).min(trace.len() - 1);
            let mid = |row: &[crate::sim::AgentSample]| (row[0].state.q + row[1].state.q) * 0.5;
            Ok(DampingRow {
                scale,
                displacement: (mid(&trace.samples[k]) - mid(&trace.samples[0])).norm(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::AgentSample;

    fn constant_trace(points: &[[f64; 2]], len: usize) -> Trace {
        let row: Vec<AgentSample> = points
            .iter()
            .map(|p| AgentSample {
                x: Vector2::from(*p),
                ..Default::default()
            })
            .collect();
        Trace { dt: 0.01, samples: vec![row; len] }
    }

    #[test]
    fn identical_constant_trajectories() {
        let trace = constant_trace(&[[1.0, 2.0]; 3], 50);
        let g = DirectedGraph::ring(3, 0.5, 0.0).unwrap();
        let r = consensus_report(&trace, &g, 1e-3);
        assert!(r.max_pairwise_error.iter().all(|&e| e == 0.0));
        assert_eq!(r.settling_time, Some(0.0));
        assert!((r.final_mean - Vector2::new(1.0, 2.0)).amax() < 1e-15);
    }

    #[test]
    fn settling_rules() {
        assert_eq!(settling_time(&[1.0, 0.5, 0.1, 0.01], 1.0, 0.2), Some(2.0));
        assert_eq!(settling_time(&[0.1, 0.5, 0.1, 0.3], 1.0, 0.2), None);
        assert_eq!(settling_time(&[0.1, f64::NAN, 0.1], 1.0, 0.2), Some(2.0));
    }

    #[test]
    fn final_window_is_trailing_five_percent() {
        let mut trace = constant_trace(&[[0.0, 0.0]], 100);
        for k in 95..100 {
            trace.samples[k][0].x = Vector2::new(1.0, 0.0);
        }
        let g = DirectedGraph::undelayed(nalgebra::DMatrix::zeros(1, 1)).unwrap();
        let r = consensus_report(&trace, &g, 1e-3);
        assert_eq!(r.final_mean, Vector2::new(1.0, 0.0));
    }

    #[test]
    fn time_shift_leaves_final_estimate_unchanged() {
        let mut cfg = presets::sec5a_consensus();
        cfg.t_end = 60.0;
        let sc = cfg.resolve().unwrap();
        let trace = crate::sim::run_scenario(&sc).unwrap();
        let a = consensus_report(&trace, &sc.graph, 1e-3);
        let b = consensus_report(&trace.shifted(100), &sc.graph, 1e-3);
        let d = (a.final_mean - b.final_mean).amax();
        assert!(a.final_max_pairwise_error < 1e-3);
        assert!(d < 1e-6, "{d:e}");
    }

    #[test]
    fn zero_torque_gives_zero_displacement() {
        let rows = damping_sweep_teleop(&presets::teleop_damping(), &[1.0, 2.0], [0.0, 0.0], 2.0);
        for r in rows {
            assert!(r.unwrap().displacement <= 1e-12);
        }
    }
}
