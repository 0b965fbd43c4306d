//! Scaled ADMM over copy variables of the closed-loop trajectories.
//!
//! One outer iteration:
//! 1. a few full-batch Adam steps on `mean L + (rho/2) L^a` (parameters are
//!    warm-started from the previous iteration),
//! 2. projection of `trajectory + lambda` onto the constraint sets,
//! 3. scaled dual ascent `lambda += trajectory - copy`,
//! 4. residuals and the termination test,
//! 5. residual balancing of `rho` with multiplier rescaling.
//!
//! The learning rate decays geometrically every `decay_every` iterations and
//! is floored at `eta_floor`.

use serde::{Deserialize, Serialize};

use crate::constraints::TrajectoryConstraint;
use crate::error::{Error, Result};
use crate::losses::{Copies, MultiplierSet};
use crate::objective::{evaluate, Objective, Problem, Targets};
use crate::optim::Adam;
use crate::plant::{Rollout, Trajectory};
use crate::stable_ops::ThetaVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmConfig {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub tau_inc: f64,
    pub tau_dec: f64,
    pub mu: f64,
    pub rho0: f64,
    pub eta0: f64,
    pub gamma: f64,
    /// iterations between learning-rate decays (`J`)
    pub decay_every: usize,
    pub eta_floor: f64,
    /// full-batch gradient steps per outer iteration
    pub epochs_per_step: usize,
    pub max_iters: usize,
    /// zero the Adam moments at the start of every outer iteration
    pub reset_moments: bool,
    /// unconstrained pre-training epochs before the first projection
    pub warm_start_epochs: usize,
    /// write a checkpoint every this many iterations (0 disables)
    pub checkpoint_every: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            eps_abs: 1e-4,
            eps_rel: 1e-4,
            tau_inc: 2.0,
            tau_dec: 0.5,
            mu: 10.0,
            rho0: 0.5,
            eta0: 1e-3,
            gamma: 0.5,
            decay_every: 50,
            eta_floor: 1e-6,
            epochs_per_step: 6,
            max_iters: 2000,
            reset_moments: false,
            warm_start_epochs: 0,
            checkpoint_every: 0,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("admm: {what}")));
        if !(self.eps_abs >= 0.0 && self.eps_rel >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if !(self.tau_inc > 1.0) {
            return bad("tau_inc must exceed 1");
        }
        if !(self.tau_dec > 0.0 && self.tau_dec < 1.0) {
            return bad("tau_dec must lie in (0, 1)");
        }
        if !(self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if !(self.rho0 > 0.0) {
            return bad("rho0 must be positive");
        }
        if !(self.eta0 > 0.0 && self.eta_floor > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.decay_every == 0 {
            return bad("decay_every must be at least 1");
        }
        Ok(())
    }
}

/// `max(eta_floor, eta0 * gamma^floor(j / J))`.
pub fn update_learning_rate(j: usize, cfg: &AdmmConfig) -> f64 {
    let k = (j / cfg.decay_every) as i32;
    let eta = cfg.eta0 * cfg.gamma.powi(k);
    if eta >= cfg.eta_floor {
        eta
    } else {
        cfg.eta_floor
    }
}

#[derive(Debug, Clone)]
pub struct AdmmState {
    pub theta: ThetaVector,
    pub copies: Copies,
    pub lambda: MultiplierSet,
    pub rho: f64,
    pub eta: f64,
    pub iteration: usize,
    pub adam: Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `[x - x^p ; u - u^p]` stacked over scenarios
    pub primal: Vec<f64>,
    /// `-rho [x^p_new - x^p_old ; u^p_new - u^p_old]`
    pub dual: Vec<f64>,
    pub norm_r: f64,
    pub norm_delta: f64,
    pub eps_r: f64,
    pub eps_delta: f64,
    /// number of constraints `S (T+1) (n+m)`
    pub constraints: usize,
    /// number of optimization variables `c + d`
    pub variables: usize,
}

impl Residuals {
    pub fn converged(&self) -> bool {
        self.norm_r <= self.eps_r && self.norm_delta <= self.eps_delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub j: usize,
    pub norm_r: f64,
    pub norm_delta: f64,
    pub eps_r: f64,
    pub eps_delta: f64,
    /// penalty used during this iteration (before adaptation)
    pub rho: f64,
    pub eta: f64,
    /// mean boosting loss over the training scenarios at the new parameters
    pub train_loss: f64,
}

impl IterateRecord {
    pub fn converged(&self) -> bool {
        self.norm_r <= self.eps_r && self.norm_delta <= self.eps_delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyChange {
    Increased,
    Decreased,
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyUpdate {
    pub change: PenaltyChange,
    /// largest `|rho' lambda' - rho lambda|` over all multiplier entries
    pub scaled_dual_drift: f64,
}

fn stack<'a>(parts: impl Iterator<Item = &'a Trajectory> + 'a) -> impl Iterator<Item = f64> + 'a {
    parts.flat_map(|t| t.as_slice().iter().copied())
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Copy-variable update: projections of `trajectory + lambda`.
pub fn projection_step(
    rollouts: &[Rollout],
    lambda: &MultiplierSet,
    constraints: &TrajectoryConstraint,
) -> Result<Copies> {
    if lambda.scenarios() != rollouts.len() {
        return Err(Error::mismatch(
            "multiplier scenarios",
            rollouts.len(),
            lambda.scenarios(),
        ));
    }
    let shift = |z: &Trajectory, l: &Trajectory| -> Result<Trajectory> {
        if !z.same_shape(l) {
            return Err(Error::mismatch(
                "multiplier shape",
                z.as_slice().len(),
                l.as_slice().len(),
            ));
        }
        let data = z.as_slice().iter().zip(l.as_slice()).map(|(a, b)| a + b).collect();
        Trajectory::new(z.dim(), data)
    };
    let mut x = Vec::with_capacity(rollouts.len());
    let mut u = Vec::with_capacity(rollouts.len());
    for (s, r) in rollouts.iter().enumerate() {
        let xs = shift(&r.x, &lambda.x[s])?;
        let us = shift(&r.u, &lambda.u[s])?;
        let (xp, up) = constraints.project_trajectory(&xs, &us)?;
        x.push(xp);
        u.push(up);
    }
    Ok(Copies { x, u })
}

/// `lambda += trajectory - copy` for every scenario and block.
pub fn multiplier_update(lambda: &mut MultiplierSet, rollouts: &[Rollout], copies: &Copies) -> Result<()> {
    if lambda.scenarios() != rollouts.len() || copies.scenarios() != rollouts.len() {
        return Err(Error::mismatch("scenarios", rollouts.len(), lambda.scenarios()));
    }
    for (s, r) in rollouts.iter().enumerate() {
        for (l, z, zp) in [
            (&mut lambda.x[s], &r.x, &copies.x[s]),
            (&mut lambda.u[s], &r.u, &copies.u[s]),
        ] {
            if !l.same_shape(z) || !z.same_shape(zp) {
                return Err(Error::mismatch(
                    "trajectory shape",
                    z.as_slice().len(),
                    l.as_slice().len(),
                ));
            }
            for ((li, a), b) in l.as_mut_slice().iter_mut().zip(z.as_slice()).zip(zp.as_slice()) {
                *li += a - b;
            }
        }
    }
    Ok(())
}

/// Primal and dual residuals with their adaptive tolerances. `lambda` is the
/// multiplier after this iteration's update; `param_count` is `d`.
pub fn compute_residuals(
    rollouts: &[Rollout],
    copies: &Copies,
    prev_copies: &Copies,
    lambda: &MultiplierSet,
    rho: f64,
    param_count: usize,
    cfg: &AdmmConfig,
) -> Result<Residuals> {
    if copies.scenarios() != rollouts.len() || prev_copies.scenarios() != rollouts.len() {
        return Err(Error::mismatch("copy scenarios", rollouts.len(), copies.scenarios()));
    }
    let z = || stack(rollouts.iter().map(|r| &r.x)).chain(stack(rollouts.iter().map(|r| &r.u)));
    let zp = || stack(copies.x.iter()).chain(stack(copies.u.iter()));
    let zp_prev = stack(prev_copies.x.iter()).chain(stack(prev_copies.u.iter()));

    let primal: Vec<f64> = z().zip(zp()).map(|(a, b)| a - b).collect();
    let dual: Vec<f64> = zp().zip(zp_prev).map(|(a, b)| -rho * (a - b)).collect();
    let c = primal.len();
    if dual.len() != c {
        return Err(Error::mismatch("copy trajectory size", c, dual.len()));
    }
    let o = c + param_count;
    let norm_r = norm(primal.iter().copied());
    let norm_delta = norm(dual.iter().copied());
    let eps_r = (c as f64).sqrt() * cfg.eps_abs + cfg.eps_rel * norm(z()).max(norm(zp()));
    let eps_delta = (o as f64).sqrt() * cfg.eps_abs + cfg.eps_rel * lambda.norm();
    Ok(Residuals {
        primal,
        dual,
        norm_r,
        norm_delta,
        eps_r,
        eps_delta,
        constraints: c,
        variables: o,
    })
}

/// Residual balancing. Rescales the scaled multipliers by the inverse factor
/// so that the unscaled dual `rho * lambda` is unchanged.
pub fn update_penalty(
    rho: &mut f64,
    lambda: &mut MultiplierSet,
    norm_r: f64,
    norm_delta: f64,
    cfg: &AdmmConfig,
) -> PenaltyUpdate {
    let (change, tau) = if norm_r > cfg.mu * norm_delta {
        (PenaltyChange::Increased, cfg.tau_inc)
    } else if norm_delta > cfg.mu * norm_r {
        (PenaltyChange::Decreased, cfg.tau_dec)
    } else {
        return PenaltyUpdate {
            change: PenaltyChange::Unchanged,
            scaled_dual_drift: 0.0,
        };
    };
    let old_rho = *rho;
    let before: Vec<f64> = stack(lambda.x.iter().chain(&lambda.u)).map(|l| old_rho * l).collect();
    *rho = tau * old_rho;
    lambda.scale(1.0 / tau);
    let new_rho = *rho;
    let drift = stack(lambda.x.iter().chain(&lambda.u))
        .zip(&before)
        .map(|(l, b)| (new_rho * l - b).abs())
        .fold(0.0, f64::max);
    PenaltyUpdate {
        change,
        scaled_dual_drift: drift,
    }
}

/// Runs `epochs` Adam steps on `objective`, which returns
/// `(value, tracked, gradient)`; `tracked` values at the pre-step point are
/// collected into the returned trace.
pub fn descend<F>(adam: &mut Adam, params: &mut [f64], lr: f64, epochs: usize, mut objective: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], usize) -> Result<(f64, f64, Vec<f64>)>,
{
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (_, tracked, grad) = objective(params, epoch)?;
        trace.push(tracked);
        adam.step(params, &grad, lr);
    }
    Ok(trace)
}

/// Gradient block of one outer iteration. Returns the per-epoch mean
/// boosting loss (without the augmented term).
pub fn inner_gd_step(state: &mut AdmmState, problem: &Problem<'_>, cfg: &AdmmConfig) -> Result<Vec<f64>> {
    if cfg.reset_moments {
        state.adam.reset();
    }
    let targets = Targets::new(&state.copies, &state.lambda);
    let dims = state.theta.dims();
    let rho = state.rho;
    let iteration = state.iteration;
    let mut params = state.theta.as_slice().to_vec();
    let trace = descend(
        &mut state.adam,
        &mut params,
        state.eta,
        cfg.epochs_per_step,
        |p, epoch| {
            let theta = ThetaVector::new(dims, p.to_vec())?;
            let e = evaluate(problem, &theta, Objective::Augmented { rho, targets: &targets }, true)?;
            let g = e.gradient.expect("gradient requested");
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient { iteration, epoch });
            }
            Ok((e.value, e.boost, g))
        },
    )?;
    state.theta = ThetaVector::new(dims, params)?;
    Ok(trace)
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub theta: ThetaVector,
    pub log: Vec<IterateRecord>,
    /// mean boosting loss at every gradient epoch, across all iterations
    pub loss_trace: Vec<f64>,
    pub converged: bool,
    pub penalty_changes: usize,
    pub max_scaled_dual_drift: f64,
    pub state: AdmmState,
}

fn with_iteration(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Iteration {
        iteration,
        source: Box::new(e),
    }
}

/// Initial state: optional unconstrained warm start, then copies set to the
/// projected rollouts and zero multipliers.
pub fn initialize(
    problem: &Problem<'_>,
    constraints: &TrajectoryConstraint,
    theta0: ThetaVector,
    cfg: &AdmmConfig,
) -> Result<(AdmmState, Vec<f64>)> {
    let mut adam = Adam::new(theta0.len());
    let dims = theta0.dims();
    let mut params = theta0.into_vec();
    let trace = descend(&mut adam, &mut params, cfg.eta0, cfg.warm_start_epochs, |p, epoch| {
        let theta = ThetaVector::new(dims, p.to_vec())?;
        let e = evaluate(problem, &theta, Objective::Boost, true)?;
        let g = e.gradient.expect("gradient requested");
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration: 0, epoch });
        }
        Ok((e.value, e.boost, g))
    })?;
    if cfg.reset_moments {
        adam.reset();
    }
    let theta = ThetaVector::new(dims, params)?;
    let rollouts = evaluate(problem, &theta, Objective::Boost, false)?.rollouts;
    let lambda = MultiplierSet::zeros_like(&rollouts);
    let copies = projection_step(&rollouts, &lambda, constraints)?;
    Ok((
        AdmmState {
            theta,
            copies,
            lambda,
            rho: cfg.rho0,
            eta: update_learning_rate(0, cfg),
            iteration: 0,
            adam,
        },
        trace,
    ))
}

pub type IterationHook<'a> = dyn FnMut(&AdmmState, &IterateRecord) -> Result<()> + 'a;

pub fn run_admm_pb(
    cfg: &AdmmConfig,
    problem: &Problem<'_>,
    constraints: &TrajectoryConstraint,
    theta0: ThetaVector,
    hook: Option<&mut IterationHook<'_>>,
) -> Result<AdmmOutcome> {
    cfg.validate()?;
    let mut hook = hook;
    let (mut state, mut loss_trace) = initialize(problem, constraints, theta0, cfg)?;
    let mut log = Vec::new();
    let mut converged = false;
    let mut penalty_changes = 0;
    let mut max_drift: f64 = 0.0;

    for j in 0..cfg.max_iters {
        let ctx = with_iteration(j);
        state.iteration = j;
        state.eta = update_learning_rate(j, cfg);

        let trace = inner_gd_step(&mut state, problem, cfg).map_err(&ctx)?;
        loss_trace.extend(trace);

        let eval = evaluate(problem, &state.theta, Objective::Boost, false).map_err(&ctx)?;
        let copies = projection_step(&eval.rollouts, &state.lambda, constraints).map_err(&ctx)?;
        multiplier_update(&mut state.lambda, &eval.rollouts, &copies).map_err(&ctx)?;
        let res = compute_residuals(
            &eval.rollouts,
            &copies,
            &state.copies,
            &state.lambda,
            state.rho,
            state.theta.len(),
            cfg,
        )
        .map_err(&ctx)?;
        state.copies = copies;

        let record = IterateRecord {
            j,
            norm_r: res.norm_r,
            norm_delta: res.norm_delta,
            eps_r: res.eps_r,
            eps_delta: res.eps_delta,
            rho: state.rho,
            eta: state.eta,
            train_loss: eval.boost,
        };
        log.push(record);
        if let Some(h) = hook.as_mut() {
            h(&state, &record).map_err(&ctx)?;
        }
        if res.converged() {
            converged = true;
            break;
        }
        let upd = update_penalty(&mut state.rho, &mut state.lambda, res.norm_r, res.norm_delta, cfg);
        if upd.change != PenaltyChange::Unchanged {
            penalty_changes += 1;
            max_drift = max_drift.max(upd.scaled_dual_drift);
        }
    }

    Ok(AdmmOutcome {
        theta: state.theta.clone(),
        log,
        loss_trace,
        converged,
        penalty_changes,
        max_scaled_dual_drift: max_drift,
        state,
    })
}
