//! Fixed-step closed-loop simulation of the networked arms.

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::controller::{
    adaptation_dynamics, coupling_rate, external_stimulus_pd, kinematic_loop,
    lyapunov_diagnostics, observer_rhs, reference_acceleration_from, teleop_pd_torques,
    torque_dynamic, torque_pi_servo, AgentState, Measurement, NeighborSample,
};
use crate::error::{Error, Result};
use crate::network::DelayChannel;
use crate::robot::{self, KinematicParams, RobotState};
use crate::scenario::{Integrator, Mode, NoiseSpec, Scenario, ScenarioConfig, Stimulus};

/// Largest admissible magnitude of any state entry.
pub const BLOWUP_LIMIT: f64 = 1e6;

/// Timing tolerance for stimulus onsets that fall on the step grid.
const ONSET_SNAP: f64 = 1e-12;

/// Additive measurement error of one agent, held over an integration step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeasurementNoise {
    pub q: Vector2<f64>,
    pub qdot: Vector2<f64>,
    pub x: Vector2<f64>,
}

impl MeasurementNoise {
    /// Independent zero-mean Gaussian draws in the order q, qdot, x.
    /// Components with zero deviation consume no randomness.
    pub fn draw(spec: &NoiseSpec, rng: &mut ChaCha8Rng) -> Self {
        let mut pair = |sigma: f64| {
            if sigma == 0.0 {
                return Vector2::zeros();
            }
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Vector2::new(a * sigma, b * sigma)
        };
        let q = pair(spec.q);
        let qdot = pair(spec.qdot);
        let x = pair(spec.x);
        Self { q, qdot, x }
    }

    /// Controller view of the true state.
    pub fn observe(&self, state: &AgentState, theta: &KinematicParams) -> Measurement {
        let exact = Measurement::exact(state, theta);
        if *self == Self::default() {
            return exact;
        }
        Measurement {
            q: exact.q + self.q,
            qdot: exact.qdot + self.qdot,
            x: exact.x + self.x,
        }
    }
}

/// Noisy views of every agent's state.
pub fn apply_measurement_noise(
    states: &[AgentState],
    thetas: &[KinematicParams],
    spec: &NoiseSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<Measurement> {
    states
        .iter()
        .zip(thetas)
        .map(|(s, th)| MeasurementNoise::draw(spec, rng).observe(s, th))
        .collect()
}

/// Per-agent signals recorded alongside the state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentSample {
    pub state: AgentState,
    /// True end-effector position and velocity.
    pub x: Vector2<f64>,
    pub xdot: Vector2<f64>,
    pub qdot_r: Vector2<f64>,
    /// Joint sliding vector `qdot - qdot_r`.
    pub s: Vector2<f64>,
    pub s_star: Vector2<f64>,
    pub tau: Vector2<f64>,
    pub tau_h: Vector2<f64>,
    pub v: f64,
    pub v_star: f64,
}

impl AgentSample {
    /// `x_o - x` with the true position.
    pub fn observation_error(&self) -> Vector2<f64> {
        self.state.x_o - self.x
    }
}

/// Uniformly sampled run history. `samples[k][i]` is agent `i` at `k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dt: f64,
    pub samples: Vec<Vec<AgentSample>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn last(&self) -> &[AgentSample] {
        self.samples.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Drops the first `k` samples and re-bases time at zero.
    pub fn shifted(&self, k: usize) -> Trace {
        Trace {
            dt: self.dt,
            samples: self.samples[k.min(self.len())..].to_vec(),
        }
    }
}

/// Receiver-side view of one incoming edge.
#[derive(Debug, Clone)]
struct Edge {
    from: usize,
    weight: f64,
    /// `None` for undelayed edges, which read the sender's current value.
    channel: Option<DelayChannel>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Eval {
    rate: AgentState,
    sample: AgentSample,
}

/// Closed-loop integrator for one scenario.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    sc: &'a Scenario,
    thetas: Vec<KinematicParams>,
    edges: Vec<Vec<Edge>>,
    rng: ChaCha8Rng,
    noise: Vec<MeasurementNoise>,
    step_index: usize,
    states: Vec<AgentState>,
    /// Right-hand side at the current grid point.
    current: Vec<Eval>,
}

impl<'a> Simulator<'a> {
    pub fn new(sc: &'a Scenario) -> Result<Self> {
        let slack = 2.0 * sc.dt;
        let edges = (0..sc.n())
            .map(|i| {
                sc.graph
                    .neighbors(i)
                    .map(|(j, w, t)| Edge {
                        from: j,
                        weight: w,
                        channel: (t > 0.0).then(|| DelayChannel::new(t, slack)),
                    })
                    .collect()
            })
            .collect();
        let mut sim = Self {
            sc,
            thetas: sc.robots.iter().map(|r| r.kinematics).collect(),
            edges,
            rng: ChaCha8Rng::seed_from_u64(sc.seed),
            noise: Vec::new(),
            step_index: 0,
            states: sc.initial.clone(),
            current: Vec::new(),
        };
        sim.settle()?;
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.sc.dt
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    /// Recorded signals at the current grid point (V* without its offset).
    pub fn sample(&self) -> Vec<AgentSample> {
        self.current.iter().map(|e| e.sample).collect()
    }

    /// State derivative at the current grid point.
    pub fn rates(&self) -> Vec<AgentState> {
        self.current.iter().map(|e| e.rate).collect()
    }

    /// Draws the noise for the coming step, evaluates the right-hand side at
    /// the new grid point and publishes observations to the channels.
    fn settle(&mut self) -> Result<()> {
        let t = self.time();
        for (i, s) in self.states.iter().enumerate() {
            let (signal, value) = s.largest_entry();
            if !value.is_finite() || value > BLOWUP_LIMIT {
                return Err(failed(t, i, Error::NumericalBlowup { signal, value }));
            }
        }
        self.noise = (0..self.sc.n())
            .map(|_| MeasurementNoise::draw(&self.sc.noise, &mut self.rng))
            .collect();
        self.current = self.rhs(t, false, &self.states)?;
        // Observer rates jump where delayed data first arrives; receivers
        // then need the rate from both sides.
        let left = if self.arrival_at(t) {
            Some(self.rhs(t, true, &self.states)?)
        } else {
            None
        };
        for i in 0..self.edges.len() {
            for k in 0..self.edges[i].len() {
                let from = self.edges[i][k].from;
                let x_o = self.states[from].x_o;
                let xdot_o = self.current[from].rate.x_o;
                let xdot_left = left.as_ref().map_or(xdot_o, |l| l[from].rate.x_o);
                if let Some(ch) = self.edges[i][k].channel.as_mut() {
                    ch.push_with_left_rate(t, x_o, xdot_left, xdot_o)
                        .map_err(|e| failed(t, i, e))?;
                }
            }
        }
        Ok(())
    }

    fn arrival_at(&self, t: f64) -> bool {
        t > 0.0
            && self.edges.iter().flatten().any(|e| {
                e.channel
                    .as_ref()
                    .is_some_and(|ch| (ch.delay() - t).abs() <= ONSET_SNAP)
            })
    }

    /// Advances one step of length `dt`.
    pub fn step(&mut self) -> Result<()> {
        let t = self.time();
        let h = self.sc.dt;
        let y = self.states.clone();
        let k1: Vec<AgentState> = self.rates();
        let mut next = match self.sc.integrator {
            Integrator::Euler => combine(&y, &[(&k1, h)]),
            Integrator::Rk4 => {
                let k2 = rates(&self.rhs(t + 0.5 * h, true, &combine(&y, &[(&k1, 0.5 * h)]))?);
                let k3 = rates(&self.rhs(t + 0.5 * h, true, &combine(&y, &[(&k2, 0.5 * h)]))?);
                let k4 = rates(&self.rhs(t + h, true, &combine(&y, &[(&k3, h)]))?);
                combine(
                    &y,
                    &[(&k1, h / 6.0), (&k2, h / 3.0), (&k3, h / 3.0), (&k4, h / 6.0)],
                )
            }
        };
        for s in &mut next {
            s.project_theta(&self.sc.gains);
        }
        self.states = next;
        self.step_index += 1;
        self.settle()
    }

    fn stimulus_torque(&self, t: f64, left: bool, i: usize, s: &AgentState) -> Vector2<f64> {
        let Some(stim) = self.sc.stimulus.filter(|st| st.agent() == i) else {
            return Vector2::zeros();
        };
        let t_on = match stim {
            Stimulus::TaskPd { pd, .. } => pd.t_on,
            Stimulus::JointTorque { t_on, .. } => t_on,
        };
        let d = t - t_on;
        let active = d > ONSET_SNAP || (d.abs() <= ONSET_SNAP && !left);
        if !active {
            return Vector2::zeros();
        }
        match stim {
            Stimulus::TaskPd { pd, .. } => {
                external_stimulus_pd(t.max(pd.t_on), &s.q, &s.qdot, &self.thetas[i], &pd)
            }
            Stimulus::JointTorque { torque, .. } => torque,
        }
    }

    /// Time derivative of every agent. `left` selects left limits at
    /// discontinuities (delayed arrivals, stimulus onset) and is set for
    /// evaluations that belong to the step ending at `t`.
    fn rhs(&self, t: f64, left: bool, states: &[AgentState]) -> Result<Vec<Eval>> {
        if let Mode::TeleopPd { kd, kp } = self.sc.mode {
            return Ok(self.rhs_teleop(t, left, states, &kd, &kp));
        }
        let sc = self.sc;
        let n = states.len();
        let meas: Vec<Measurement> = states
            .iter()
            .zip(&self.noise)
            .zip(&self.thetas)
            .map(|((s, nz), th)| nz.observe(s, th))
            .collect();

        // First pass: neighbor positions and observer rates, which never
        // depend on neighbor rates.
        let mut neighbors: Vec<Vec<(f64, NeighborSample)>> = Vec::with_capacity(n);
        let mut xdot_o = Vec::with_capacity(n);
        for i in 0..n {
            let nb: Vec<(f64, NeighborSample)> = self.edges[i]
                .iter()
                .map(|e| {
                    let sample = match &e.channel {
                        Some(ch) if left => ch.sample_left(t),
                        Some(ch) => ch.sample(t),
                        None => NeighborSample::new(states[e.from].x_o, Vector2::zeros()),
                    };
                    (e.weight, sample)
                })
                .collect();
            xdot_o.push(observer_rhs(&states[i], &meas[i], &nb, &sc.gains));
            neighbors.push(nb);
        }
        // Second pass: undelayed neighbors get their current rates.
        for i in 0..n {
            for (k, e) in self.edges[i].iter().enumerate() {
                if e.channel.is_none() {
                    neighbors[i][k].1.xdot_o_delayed = xdot_o[e.from];
                }
            }
        }

        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let (s, m, nb) = (&states[i], &meas[i], neighbors[i].as_slice());
            let robot = &sc.robots[i];
            let lp = kinematic_loop(s, m, nb, &sc.gains).map_err(|e| failed(t, i, e))?;
            let mut rate = AgentState {
                q: s.qdot,
                x_o: lp.xdot_o,
                i_s: lp.s_star,
                i_x: s.x_o - m.x,
                theta_hat: lp.theta_hat_rate,
                coupling: coupling_rate(s, robot, &lp.qdot_r),
                ..Default::default()
            };
            let tau = match &sc.mode {
                Mode::KinematicPi(servo) => {
                    rate.i_v = lp.qdot_r - m.qdot;
                    torque_pi_servo(s, m, &lp.qdot_r, servo)
                }
                _ => {
                    let qddot_r = reference_acceleration_from(&lp, s, m, nb, &sc.gains);
                    rate.vartheta_hat = adaptation_dynamics(m, &lp.qdot_r, &qddot_r, &sc.gains);
                    torque_dynamic(s, m, &lp.qdot_r, &qddot_r, &sc.gains)
                }
            };
            let tau_h = self.stimulus_torque(t, left, i, s);
            rate.qdot = robot.forward_dynamics(&RobotState { q: s.q, qdot: s.qdot }, &(tau + tau_h));

            let j = robot::jacobian(&robot.kinematics, &s.q);
            let lyap = lyapunov_diagnostics(s, robot, &sc.gains, &lp.qdot_r, 0.0);
            out.push(Eval {
                rate,
                sample: AgentSample {
                    state: *s,
                    x: robot::forward_kinematics(&robot.kinematics, &s.q),
                    xdot: j * s.qdot,
                    qdot_r: lp.qdot_r,
                    s: s.qdot - lp.qdot_r,
                    s_star: lp.s_star,
                    tau,
                    tau_h,
                    v: lyap.v,
                    v_star: lyap.v_star,
                },
            });
        }
        Ok(out)
    }

    fn rhs_teleop(
        &self,
        t: f64,
        left: bool,
        states: &[AgentState],
        kd: &nalgebra::Matrix2<f64>,
        kp: &nalgebra::Matrix2<f64>,
    ) -> Vec<Eval> {
        let sc = self.sc;
        let meas: Vec<Measurement> = states
            .iter()
            .zip(&self.noise)
            .zip(&self.thetas)
            .map(|((s, nz), th)| nz.observe(s, th))
            .collect();
        let tau_h = [
            self.stimulus_torque(t, left, 0, &states[0]),
            self.stimulus_torque(t, left, 1, &states[1]),
        ];
        let (t1, t2) = teleop_pd_torques(
            &meas[0].q,
            &meas[0].qdot,
            &meas[1].q,
            &meas[1].qdot,
            kd,
            kp,
            &tau_h[0],
        );
        // Operator input on the second arm, if any, enters directly.
        let tau = [t1 - tau_h[0], t2];
        let dq = states[0].q - states[1].q;
        let spring = 0.25 * dq.dot(&(kp * dq));
        (0..2)
            .map(|i| {
                let s = &states[i];
                let robot = &sc.robots[i];
                let m = robot::inertia(&robot.dynamics, &s.q);
                let rate = AgentState {
                    q: s.qdot,
                    qdot: robot.forward_dynamics(
                        &RobotState { q: s.q, qdot: s.qdot },
                        &(tau[i] + tau_h[i]),
                    ),
                    ..Default::default()
                };
                Eval {
                    rate,
                    sample: AgentSample {
                        state: *s,
                        x: robot::forward_kinematics(&robot.kinematics, &s.q),
                        xdot: robot::jacobian(&robot.kinematics, &s.q) * s.qdot,
                        qdot_r: Vector2::zeros(),
                        s: s.qdot,
                        s_star: Vector2::zeros(),
                        tau: tau[i],
                        tau_h: tau_h[i],
                        v: 0.5 * s.qdot.dot(&(m * s.qdot)) + spring,
                        v_star: 0.0,
                    },
                }
            })
            .collect()
    }
}

fn rates(evals: &[Eval]) -> Vec<AgentState> {
    evals.iter().map(|e| e.rate).collect()
}

fn combine(y: &[AgentState], terms: &[(&Vec<AgentState>, f64)]) -> Vec<AgentState> {
    y.iter()
        .enumerate()
        .map(|(i, s)| terms.iter().fold(*s, |acc, (k, h)| acc.add_scaled(&k[i], *h)))
        .collect()
}

fn failed(t: f64, agent: usize, source: Error) -> Error {
    match source {
        e @ Error::RunFailed { .. } => e,
        e => Error::RunFailed {
            t,
            agent,
            source: Box::new(e),
        },
    }
}

/// Runs a validated scenario to its end time.
pub fn run_scenario(sc: &Scenario) -> Result<Trace> {
    let steps = sc.steps();
    let mut sim = Simulator::new(sc)?;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(sim.sample());
    for _ in 0..steps {
        sim.step()?;
        samples.push(sim.sample());
    }
    // Report V* relative to the accumulated coupling at the end of the run.
    if !matches!(sc.mode, Mode::TeleopPd { .. }) {
        let finals: Vec<f64> = sim.states().iter().map(|s| s.coupling).collect();
        let offset: Vec<f64> = finals.iter().map(|c| c / (2.0 * sc.gains.beta)).collect();
        for row in &mut samples {
            for (a, off) in row.iter_mut().zip(&offset) {
                a.v_star += off;
            }
        }
    }
    Ok(Trace { dt: sc.dt, samples })
}

/// Validates and runs a configuration.
pub fn run_config(cfg: &ScenarioConfig) -> Result<Trace> {
    run_scenario(&cfg.resolve()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn short(mut cfg: ScenarioConfig, t_end: f64) -> ScenarioConfig {
        cfg.t_end = t_end;
        cfg
    }

    #[test]
    fn zero_noise_views_are_exact() {
        let sc = presets::sec5a_consensus().resolve().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let thetas: Vec<_> = sc.robots.iter().map(|r| r.kinematics).collect();
        let views = apply_measurement_noise(&sc.initial, &thetas, &NoiseSpec::default(), &mut rng);
        for (v, (s, th)) in views.iter().zip(sc.initial.iter().zip(&thetas)) {
            assert_eq!(*v, Measurement::exact(s, th));
        }
    }

    #[test]
    fn noise_sample_mean_is_centered() {
        let spec = NoiseSpec { q: 0.002, qdot: 0.005, x: 0.01 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum = MeasurementNoise::default();
        for _ in 0..n {
            let d = MeasurementNoise::draw(&spec, &mut rng);
            sum.q += d.q;
            sum.qdot += d.qdot;
            sum.x += d.x;
        }
        let bound = |sigma: f64| 3.0 * sigma / (n as f64).sqrt();
        assert!((sum.q / n as f64).amax() < bound(spec.q));
        assert!((sum.qdot / n as f64).amax() < bound(spec.qdot));
        assert!((sum.x / n as f64).amax() < bound(spec.x));
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let mut cfg = presets::sec5a_consensus();
        cfg.graph.delays = vec![vec![0.0; 6]; 6];
        let target = [2.1, 0.6];
        let theta = KinematicParams::new(2.0, 3.0).unwrap();
        for r in &mut cfg.robots {
            r.q0 = robot::inverse_kinematics(&theta, &Vector2::from(target)).unwrap().into();
        }
        cfg.observer_init = crate::scenario::ObserverInit::Offset(0.0);
        cfg.t_end = 0.05;
        let sc = cfg.resolve().unwrap();
        let trace = run_scenario(&sc).unwrap();
        for (a, b) in trace.last().iter().zip(&trace.samples[0]) {
            assert!((a.state.q - b.state.q).amax() <= 1e-15);
            assert!(a.state.qdot.amax() <= 1e-15);
            assert!((a.state.x_o - b.state.x_o).amax() <= 1e-15);
        }
        let sim = Simulator::new(&sc).unwrap();
        for r in sim.rates() {
            assert!(r.q.amax() < 1e-15 && r.qdot.amax() < 1e-12 && r.x_o.amax() < 1e-15);
        }
    }

    #[test]
    fn feedforward_is_exact_on_the_manifold() {
        let mut cfg = presets::sec5a_consensus();
        for r in &mut cfg.robots {
            r.vartheta_hat0 = r.vartheta;
        }
        let sc = cfg.resolve().unwrap();
        let mut sim = Simulator::new(&sc).unwrap();
        // Put every arm on s = 0 and compare qddot with the reference acceleration.
        let q_r: Vec<_> = sim.sample().iter().map(|a| a.qdot_r).collect();
        for (s, qr) in sim.states.iter_mut().zip(&q_r) {
            s.qdot = *qr;
        }
        let states = sim.states.clone();
        let evals = sim.rhs(0.0, false, &states).unwrap();
        for (i, e) in evals.iter().enumerate() {
            let m = Measurement::exact(&states[i], &sc.robots[i].kinematics);
            let nb: Vec<_> = sim.edges[i].iter().map(|ed| (ed.weight, ed.channel.as_ref().unwrap().sample(0.0))).collect();
            let lp = kinematic_loop(&states[i], &m, &nb, &sc.gains).unwrap();
            let qddot_r = reference_acceleration_from(&lp, &states[i], &m, &nb, &sc.gains);
            assert!((e.rate.qdot - qddot_r).amax() < 1e-10);
        }
    }

    #[test]
    fn teleop_matches_the_two_robot_equations() {
        let cfg = presets::teleop_damping();
        let sc = cfg.resolve().unwrap();
        let sim = Simulator::new(&sc).unwrap();
        let mut states = sim.states.clone();
        states[0].q += Vector2::new(0.1, -0.05);
        states[1].qdot = Vector2::new(0.2, 0.3);
        let evals = sim.rhs(1.0, false, &states).unwrap();
        let Mode::TeleopPd { kd, kp } = sc.mode else { panic!() };
        let Some(Stimulus::JointTorque { torque, .. }) = sc.stimulus else { panic!() };
        let (a, b) = (&states[0], &states[1]);
        let r = &sc.robots;
        let lhs1 = robot::inertia(&r[0].dynamics, &a.q) * evals[0].rate.qdot
            + robot::coriolis(&r[0].dynamics, &a.q, &a.qdot) * a.qdot;
        let lhs2 = robot::inertia(&r[1].dynamics, &b.q) * evals[1].rate.qdot
            + robot::coriolis(&r[1].dynamics, &b.q, &b.qdot) * b.qdot;
        assert!((lhs1 - (-kd * a.qdot - kp * (a.q - b.q) + torque)).amax() < 1e-10);
        assert!((lhs2 - (-kd * b.qdot - kp * (b.q - a.q))).amax() < 1e-10);
    }

    #[test]
    fn trace_grid_and_determinism() {
        let cfg = short(presets::sec5c_noise(), 0.5);
        let a = run_config(&cfg).unwrap();
        let b = run_config(&cfg).unwrap();
        assert_eq!(a.len(), 101);
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(run_config(&other).unwrap(), a);
    }

    #[test]
    fn single_agent_self_regulates() {
        let mut cfg = presets::sec5a_consensus();
        cfg.graph.weights = vec![vec![0.0]];
        cfg.graph.delays = vec![vec![0.0]];
        cfg.robots.truncate(1);
        cfg.t_end = 30.0;
        let trace = run_config(&cfg).unwrap();
        let last = trace.last()[0];
        assert!(last.observation_error().norm() < 1e-4, "{}", last.observation_error().norm());
        assert!(last.xdot.norm() < 1e-4);
    }

    #[test]
    fn failures_carry_time_and_signal() {
        let mut cfg = short(presets::sec5a_consensus(), 1.0);
        cfg.gains.det_floor = 2.0;
        // The initial configuration itself is rejected by validation.
        assert!(cfg.resolve().is_err());
        let mut sc = short(presets::sec5a_consensus(), 1.0).resolve().unwrap();
        sc.gains.det_floor = 1e9;
        match run_scenario(&sc) {
            Err(Error::RunFailed { t, agent, source }) => {
                assert_eq!(t, 0.0);
                assert_eq!(agent, 0);
                assert!(matches!(*source, Error::SingularEstimatedJacobian { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut sc = short(presets::sec5a_consensus(), 1.0).resolve().unwrap();
        sc.initial[3].i_x[0] = 2e6;
        match run_scenario(&sc) {
            Err(Error::RunFailed { agent: 3, source, .. }) => {
                assert!(matches!(*source, Error::NumericalBlowup { signal: "i_x", .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
