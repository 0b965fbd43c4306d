//! Plants, noise realizations and the internal-model closed loop.
//!
//! The closed loop feeds the operator with the reconstructed disturbance
//! `x_t - f(x_{t-1}, u_{t-1})`. With the internal model equal to the plant
//! this is the sampled noise itself, so `u = M(w)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::stable_ops::{ContractiveOperator, TapeOperator};

/// Time series of fixed-dimension vectors, stored row-major by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::mismatch("trajectory data", dim, data.len()));
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize, steps: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * steps],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            if r.len() != dim {
                return Err(Error::mismatch("trajectory row", dim, r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Trajectory) -> bool {
        self.dim == other.dim && self.data.len() == other.data.len()
    }
}

/// Noise-free Markovian transition `x_{t+1} = f(x_t, u_t)`.
pub trait PlantModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn transition(&self, x: &[f64], u: &[f64]) -> Vec<f64>;
    /// Same map recorded on a tape. Must agree with [`transition`] to the bit.
    ///
    /// [`transition`]: PlantModel::transition
    fn transition_on_tape(&self, tape: &mut Tape, x: Var, u: Var) -> Var;
}

/// Sign of the friction terms `beta1 q + beta2 tanh(q)` in the velocity
/// update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Friction {
    /// `q+ = q + Ts/M (-(beta1 q + beta2 tanh q) + F)`; open loop is stable.
    Dissipative,
    /// `q+ = q + Ts/M ((beta1 q + beta2 tanh q) + F)`, a literal reading of
    /// the printed dynamics. Not pre-stabilized: trajectories grow roughly
    /// 1000x over 250 steps.
    AsPrinted,
}

impl Friction {
    fn sign(self) -> f64 {
        match self {
            Friction::Dissipative => -1.0,
            Friction::AsPrinted => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointMassParams {
    /// kg
    pub mass: f64,
    /// kg/s
    pub beta1: f64,
    /// N
    pub beta2: f64,
    /// sampling time, s
    pub ts: f64,
    /// target position of the proportional pre-stabilizer, m
    pub target: [f64; 2],
    pub friction: Friction,
}

impl Default for PointMassParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            beta1: 1.0,
            beta2: 0.1,
            ts: 0.05,
            target: [0.0, 0.0],
            friction: Friction::Dissipative,
        }
    }
}

impl PointMassParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !(self.ts > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "point mass needs M > 0 and Ts > 0 (got M = {}, Ts = {})",
                self.mass, self.ts
            )));
        }
        Ok(())
    }
}

/// Point-mass robot with proportional pre-stabilizer `F = target - a + u`.
/// State `[a_x, a_y, q_x, q_y]`, input `[u_x, u_y]`.
pub fn pointmass_step(p: &PointMassParams, x: &[f64], u: &[f64], w: &[f64]) -> [f64; 4] {
    let f = pointmass_transition(p, x, u);
    [f[0] + w[0], f[1] + w[1], f[2] + w[2], f[3] + w[3]]
}

fn pointmass_transition(p: &PointMassParams, x: &[f64], u: &[f64]) -> [f64; 4] {
    let sign = p.friction.sign();
    let inv_m = 1.0 / p.mass;
    let mut out = [0.0; 4];
    for i in 0..2 {
        let (a, q) = (x[i], x[2 + i]);
        out[i] = a + p.ts * q;
        let friction = sign * (p.beta1 * q + p.beta2 * q.tanh());
        let force = friction + ((p.target[i] - a) + u[i]);
        out[2 + i] = q + p.ts * (inv_m * force);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub params: PointMassParams,
}

impl PointMass {
    pub fn new(params: PointMassParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl PlantModel for PointMass {
    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn transition(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        pointmass_transition(&self.params, x, u).to_vec()
    }

    fn transition_on_tape(&self, tape: &mut Tape, x: Var, u: Var) -> Var {
        let p = &self.params;
        let a = tape.slice(x, 0, 2);
        let q = tape.slice(x, 2, 2);

        let step = tape.scale(q, p.ts);
        let a_next = tape.add(a, step);

        let lin = tape.scale(q, p.beta1);
        let th = tape.tanh(q);
        let sat = tape.scale(th, p.beta2);
        let fr = tape.add(lin, sat);
        let fr = tape.scale(fr, p.friction.sign());
        let target = tape.vector(&p.target);
        let pull = tape.sub(target, a);
        let f = tape.add(pull, u);
        let force = tape.add(fr, f);
        let acc = tape.scale(force, 1.0 / p.mass);
        let dq = tape.scale(acc, p.ts);
        let q_next = tape.add(q, dq);

        tape.concat(a_next, q_next)
    }
}

/// `x+ = A x + B u`, mainly for sanity instances.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    n: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl LinearPlant {
    pub fn new(n: usize, m: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::mismatch("linear plant A", n * n, a.len()));
        }
        if b.len() != n * m {
            return Err(Error::mismatch("linear plant B", n * m, b.len()));
        }
        Ok(Self { n, m, a, b })
    }
}

impl PlantModel for LinearPlant {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn input_dim(&self) -> usize {
        self.m
    }

    fn transition(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let ax: f64 = (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum();
                let bu: f64 = (0..self.m).map(|j| self.b[i * self.m + j] * u[j]).sum();
                ax + bu
            })
            .collect()
    }

    fn transition_on_tape(&self, tape: &mut Tape, x: Var, u: Var) -> Var {
        let a = tape.constant(&self.a, self.n, self.n);
        let b = tape.constant(&self.b, self.n, self.m);
        let ax = tape.matvec(a, x);
        let bu = tape.matvec(b, u);
        tape.add(ax, bu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseDistribution {
    pub x0_mean: Vec<f64>,
    pub x0_std: Vec<f64>,
    /// std of every component of `w_t`, `t >= 1`
    pub process_std: f64,
}

impl Default for NoiseDistribution {
    fn default() -> Self {
        Self {
            x0_mean: vec![2.0, 2.0, 0.0, 0.0],
            x0_std: vec![0.2, 0.2, 0.0, 0.0],
            process_std: 0.005,
        }
    }
}

impl NoiseDistribution {
    pub fn dim(&self) -> usize {
        self.x0_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x0_std.len() != self.x0_mean.len() {
            return Err(Error::mismatch(
                "initial-state std",
                self.x0_mean.len(),
                self.x0_std.len(),
            ));
        }
        if self.x0_std.iter().any(|s| !(*s >= 0.0)) || !(self.process_std >= 0.0) {
            return Err(Error::InvalidConfig(
                "noise standard deviations must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Zero-mean, zero-variance distribution: the equilibrium scenario.
    pub fn equilibrium(dim: usize) -> Self {
        Self {
            x0_mean: vec![0.0; dim],
            x0_std: vec![0.0; dim],
            process_std: 0.0,
        }
    }
}

/// `w_{[0,T]}` with the convention `w_0 = x_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub w: Trajectory,
}

impl NoiseRealization {
    pub fn new(w: Trajectory) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::InvalidConfig("noise needs horizon T >= 1".into()));
        }
        Ok(Self { w })
    }

    pub fn horizon(&self) -> usize {
        self.w.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }
}

pub fn sample_noise<R: Rng>(dist: &NoiseDistribution, horizon: usize, rng: &mut R) -> Result<NoiseRealization> {
    dist.validate()?;
    if horizon < 1 {
        return Err(Error::InvalidConfig("noise needs horizon T >= 1".into()));
    }
    let n = dist.dim();
    let mut w = Trajectory::zeros(n, horizon + 1);
    for (i, slot) in w.row_mut(0).iter_mut().enumerate() {
        let d = Normal::new(dist.x0_mean[i], dist.x0_std[i]).expect("validated std");
        *slot = d.sample(rng);
    }
    let process = Normal::new(0.0, dist.process_std).expect("validated std");
    for t in 1..=horizon {
        for slot in w.row_mut(t) {
            *slot = process.sample(rng);
        }
    }
    NoiseRealization::new(w)
}

/// `count` independent realizations from stream `stream` of `seed`.
/// Different streams never overlap, which keeps training and test banks
/// disjoint.
pub fn sample_bank(
    dist: &NoiseDistribution,
    count: usize,
    horizon: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<NoiseRealization>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count).map(|_| sample_noise(dist, horizon, &mut rng)).collect()
}

/// Closed-loop trajectories of one scenario; `x` and `u` both have `T + 1`
/// rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub scenario: usize,
    pub x: Trajectory,
    pub u: Trajectory,
}

impl Rollout {
    pub fn horizon(&self) -> usize {
        self.x.len() - 1
    }
}

/// Handles to a rollout recorded on a tape.
#[derive(Debug, Clone)]
pub struct TapeRollout {
    pub xs: Vec<Var>,
    pub us: Vec<Var>,
    /// Disturbance reconstructed by the internal model.
    pub w_hat: Vec<Var>,
}

impl TapeRollout {
    pub fn values(&self, tape: &Tape, scenario: usize) -> Rollout {
        let collect = |vars: &[Var]| {
            let dim = vars[0].len();
            let mut data = Vec::with_capacity(dim * vars.len());
            for v in vars {
                data.extend_from_slice(tape.values(*v));
            }
            Trajectory { dim, data }
        };
        Rollout {
            scenario,
            x: collect(&self.xs),
            u: collect(&self.us),
        }
    }
}

fn check_compat(plant: &dyn PlantModel, op_in: usize, op_out: usize, noise_dim: usize) -> Result<()> {
    if op_in != plant.state_dim() {
        return Err(Error::mismatch(
            "operator input vs plant state",
            plant.state_dim(),
            op_in,
        ));
    }
    if op_out != plant.input_dim() {
        return Err(Error::mismatch(
            "operator output vs plant input",
            plant.input_dim(),
            op_out,
        ));
    }
    if noise_dim != plant.state_dim() {
        return Err(Error::mismatch("noise vs plant state", plant.state_dim(), noise_dim));
    }
    Ok(())
}

/// Records the closed loop `x_{t+1} = f(x_t, u_t) + w_{t+1}`,
/// `u_t = M(w_hat_{[0,t]})` on `tape`.
pub fn rollout_on_tape(
    tape: &mut Tape,
    plant: &dyn PlantModel,
    op: &TapeOperator,
    noise: &NoiseRealization,
    scenario: usize,
) -> Result<TapeRollout> {
    check_compat(plant, op.dims.n_in, op.dims.n_out, noise.dim())?;
    let horizon = noise.horizon();
    let mut xs = Vec::with_capacity(horizon + 1);
    let mut us = Vec::with_capacity(horizon + 1);
    let mut w_hat = Vec::with_capacity(horizon + 1);

    let diverged = |tape: &Tape, t: usize| {
        tape.non_finite().map(|e| Error::Diverged {
            t,
            scenario,
            source: Box::new(e),
        })
    };

    let mut x = tape.vector(noise.w.row(0));
    let mut model_out: Option<Var> = None;
    let mut state = op.zero_state(tape);
    for t in 0..=horizon {
        let disturbance = match model_out {
            None => x,
            Some(f) => tape.sub(x, f),
        };
        let (next_state, u) = op.step(tape, state, disturbance);
        xs.push(x);
        us.push(u);
        w_hat.push(disturbance);
        state = next_state;
        if t < horizon {
            let f = plant.transition_on_tape(tape, x, u);
            let w = tape.vector(noise.w.row(t + 1));
            x = tape.add(f, w);
            model_out = Some(f);
        }
        if let Some(err) = diverged(tape, t) {
            return Err(err);
        }
    }
    Ok(TapeRollout { xs, us, w_hat })
}

pub fn rollout_closed_loop(
    plant: &dyn PlantModel,
    op: &ContractiveOperator,
    noise: &NoiseRealization,
) -> Result<Rollout> {
    rollout_scenario(plant, op, noise, 0)
}

pub fn rollout_scenario(
    plant: &dyn PlantModel,
    op: &ContractiveOperator,
    noise: &NoiseRealization,
    scenario: usize,
) -> Result<Rollout> {
    let mut tape = Tape::new();
    let top = op.on_tape(&mut tape);
    let rec = rollout_on_tape(&mut tape, plant, &top, noise, scenario)?;
    Ok(rec.values(&tape, scenario))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_ops::{init_params, OperatorDims, ThetaVector};

    fn printed() -> PointMassParams {
        PointMassParams {
            friction: Friction::AsPrinted,
            ..PointMassParams::default()
        }
    }

    fn operator(seed: u64, std: f64) -> ContractiveOperator {
        let theta = init_params(OperatorDims::new(4, 4, 2), std, seed).unwrap();
        ContractiveOperator::new(theta, 0.95, 1.0).unwrap()
    }

    #[test]
    fn pointmass_equilibrium() {
        for p in [printed(), PointMassParams::default()] {
            assert_eq!(pointmass_step(&p, &[0.0; 4], &[0.0; 2], &[0.0; 4]), [0.0; 4]);
        }
    }

    #[test]
    fn pointmass_printed_examples() {
        let p = printed();
        let x = pointmass_step(&p, &[2.0, 2.0, 0.0, 0.0], &[0.0; 2], &[0.0; 4]);
        assert_eq!(x, [2.0, 2.0, -0.1, -0.1]);

        let x = pointmass_step(&p, &[0.0, 0.0, 0.5, 0.0], &[0.0; 2], &[0.0; 4]);
        // independent scalar evaluation of the printed update
        let qx = 0.5 + 0.05 * (0.5 + 0.1 * 0.5f64.tanh());
        assert_eq!(x[0], 0.025);
        assert_eq!(x[1], 0.0);
        assert!((x[2] - qx).abs() < 1e-15);
        assert!((x[2] - 0.527_310_5).abs() < 1e-6);
        assert_eq!(x[3], 0.0);
    }

    #[test]
    fn pointmass_dissipative_example() {
        let x = pointmass_step(&PointMassParams::default(), &[0.0, 0.0, 0.5, 0.0], &[0.0; 2], &[0.0; 4]);
        let qx = 0.5 + 0.05 * (-(0.5 + 0.1 * 0.5f64.tanh()));
        assert!((x[2] - qx).abs() < 1e-15);
    }

    #[test]
    fn printed_friction_is_not_pre_stabilizing() {
        // open loop from (2, 2) at rest, 250 steps
        let run = |p: PointMassParams| {
            let mut x = [2.0, 2.0, 0.0, 0.0];
            for _ in 0..250 {
                x = pointmass_step(&p, &x, &[0.0; 2], &[0.0; 4]);
            }
            x.iter().map(|v| v.abs()).fold(0.0, f64::max)
        };
        assert!(run(printed()) > 100.0);
        assert!(run(PointMassParams::default()) < 0.01);
    }

    #[test]
    fn tape_transition_matches_plain() {
        for p in [printed(), PointMassParams::default()] {
            let plant = PointMass::new(p).unwrap();
            let x = [0.3, -1.2, 0.7, -0.4];
            let u = [0.2, -0.9];
            let mut tape = Tape::new();
            let xv = tape.vector(&x);
            let uv = tape.vector(&u);
            let f = plant.transition_on_tape(&mut tape, xv, uv);
            assert_eq!(tape.values(f), plant.transition(&x, &u).as_slice());
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let p = PointMassParams {
            mass: 0.0,
            ..PointMassParams::default()
        };
        assert!(PointMass::new(p).is_err());
    }

    #[test]
    fn noise_is_reproducible_and_shaped() {
        let dist = NoiseDistribution::default();
        let a = sample_bank(&dist, 2, 10, 5, 1).unwrap();
        let b = sample_bank(&dist, 2, 10, 5, 1).unwrap();
        let c = sample_bank(&dist, 2, 10, 5, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a[0].w.len(), 11);
        assert_eq!(a[0].horizon(), 10);
        assert_eq!(&a[0].w.row(0)[2..], &[0.0, 0.0]);
    }

    #[test]
    fn noise_with_zero_std() {
        let dist = NoiseDistribution {
            x0_std: vec![0.0; 4],
            process_std: 0.0,
            ..NoiseDistribution::default()
        };
        let n = sample_bank(&dist, 1, 5, 0, 0).unwrap().remove(0);
        assert_eq!(n.w.row(0), &[2.0, 2.0, 0.0, 0.0]);
        assert!(n.w.rows().skip(1).all(|r| r.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn initial_state_mean_monte_carlo() {
        let dist = NoiseDistribution::default();
        let bank = sample_bank(&dist, 10_000, 1, 42, 0).unwrap();
        for i in 0..2 {
            let mean = bank.iter().map(|n| n.w.row(0)[i]).sum::<f64>() / 10_000.0;
            assert!((1.99..=2.01).contains(&mean), "component {i}: {mean}");
        }
    }

    #[test]
    fn horizon_zero_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_noise(&NoiseDistribution::default(), 0, &mut rng).is_err());
    }

    #[test]
    fn zero_noise_gives_zero_rollout() {
        let plant = PointMass::new(PointMassParams::default()).unwrap();
        let noise = NoiseRealization::new(Trajectory::zeros(4, 21)).unwrap();
        let r = rollout_closed_loop(&plant, &operator(3, 1.0), &noise).unwrap();
        assert!(r.x.as_slice().iter().all(|x| *x == 0.0));
        assert!(r.u.as_slice().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn zero_theta_gives_open_loop() {
        let p = PointMassParams::default();
        let plant = PointMass::new(p).unwrap();
        let noise = sample_bank(&NoiseDistribution::default(), 1, 30, 1, 0)
            .unwrap()
            .remove(0);
        let op = ContractiveOperator::new(ThetaVector::zeros(OperatorDims::new(4, 4, 2)), 0.95, 1.0).unwrap();
        let r = rollout_closed_loop(&plant, &op, &noise).unwrap();
        assert!(r.u.as_slice().iter().all(|x| *x == 0.0));
        let mut x: Vec<f64> = noise.w.row(0).to_vec();
        for t in 0..30 {
            assert_eq!(r.x.row(t), x.as_slice());
            x = pointmass_step(&p, &x, &[0.0, 0.0], noise.w.row(t + 1)).to_vec();
        }
    }

    #[test]
    fn resimulation_reproduces_states() {
        let p = PointMassParams::default();
        let plant = PointMass::new(p).unwrap();
        let noise = sample_bank(&NoiseDistribution::default(), 1, 10, 8, 0)
            .unwrap()
            .remove(0);
        let r = rollout_closed_loop(&plant, &operator(4, 0.5), &noise).unwrap();
        let mut x = noise.w.row(0).to_vec();
        for t in 0..10 {
            x = pointmass_step(&p, &x, r.u.row(t), noise.w.row(t + 1)).to_vec();
            for (a, b) in x.iter().zip(r.x.row(t + 1)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reconstructed_disturbance_equals_noise() {
        let plant = PointMass::new(PointMassParams::default()).unwrap();
        let noise = sample_bank(&NoiseDistribution::default(), 1, 40, 2, 0)
            .unwrap()
            .remove(0);
        let op = operator(6, 0.5);
        let mut tape = Tape::new();
        let top = op.on_tape(&mut tape);
        let rec = rollout_on_tape(&mut tape, &plant, &top, &noise, 0).unwrap();
        for (t, v) in rec.w_hat.iter().enumerate() {
            for (a, b) in tape.values(*v).iter().zip(noise.w.row(t)) {
                assert!((a - b).abs() <= 1e-15 * (1.0 + b.abs() * 1e2), "t={t}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let plant = PointMass::new(PointMassParams::default()).unwrap();
        let theta = ThetaVector::zeros(OperatorDims::new(3, 4, 2));
        let op = ContractiveOperator::new(theta, 0.95, 1.0).unwrap();
        let noise = NoiseRealization::new(Trajectory::zeros(4, 3)).unwrap();
        assert!(matches!(
            rollout_closed_loop(&plant, &op, &noise),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn divergence_reports_time_index() {
        // unstable linear plant blows up to infinity
        let plant = LinearPlant::new(1, 1, vec![1e200], vec![0.0]).unwrap();
        let theta = ThetaVector::zeros(OperatorDims::new(1, 1, 1));
        let op = ContractiveOperator::new(theta, 0.5, 1.0).unwrap();
        let mut w = Trajectory::zeros(1, 6);
        w.row_mut(0)[0] = 1.0;
        let noise = NoiseRealization::new(w).unwrap();
        match rollout_closed_loop(&plant, &op, &noise) {
            Err(Error::Diverged { t, .. }) => assert_eq!(t, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn bounded_for_random_parameters() {
        let plant = PointMass::new(PointMassParams::default()).unwrap();
        let noise = sample_bank(&NoiseDistribution::default(), 1, 249, 10, 0)
            .unwrap()
            .remove(0);
        for seed in 0..100 {
            let r = rollout_closed_loop(&plant, &operator(seed, 1.0), &noise).unwrap();
            assert!(r.x.as_slice().iter().all(|x| x.is_finite() && x.abs() < 1e3));
        }
    }
}
