//! Scenario-batched evaluation of a training objective and its gradient
//! with respect to the operator parameters.
//!
//! Each scenario gets its own tape. Scenarios run on the ambient rayon pool
//! and are reduced in index order, so results do not depend on the thread
//! count.

use rayon::prelude::*;

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::losses::{augmented_on_tape, boost_on_tape, cbf_on_tape, BoostLossConfig, CbfConfig, Copies, MultiplierSet};
use crate::plant::{rollout_on_tape, NoiseRealization, PlantModel, Rollout, Trajectory};
use crate::stable_ops::{ContractiveOperator, ThetaVector};

/// Everything that stays fixed while the parameters move.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub plant: &'a dyn PlantModel,
    pub kappa: f64,
    pub prescale: f64,
    pub loss: &'a BoostLossConfig,
    pub bank: &'a [NoiseRealization],
}

impl Problem<'_> {
    pub fn scenarios(&self) -> usize {
        self.bank.len()
    }

    pub fn operator(&self, theta: &ThetaVector) -> Result<ContractiveOperator> {
        ContractiveOperator::new(theta.clone(), self.kappa, self.prescale)
    }
}

/// `x^p - lambda^x` and `u^p - lambda^u` per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub x: Vec<Trajectory>,
    pub u: Vec<Trajectory>,
}

impl Targets {
    pub fn new(copies: &Copies, lambda: &MultiplierSet) -> Self {
        let diff = |a: &Trajectory, b: &Trajectory| {
            let d = a.as_slice().iter().zip(b.as_slice()).map(|(p, l)| p - l).collect();
            Trajectory::new(a.dim(), d).expect("same shape")
        };
        Self {
            x: copies.x.iter().zip(&lambda.x).map(|(c, l)| diff(c, l)).collect(),
            u: copies.u.iter().zip(&lambda.u).map(|(c, l)| diff(c, l)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// `mean L`
    Boost,
    /// `mean L + (rho / 2) mean |z - z^p + lambda|^2`
    Augmented { rho: f64, targets: &'a Targets },
    /// `mean (L + CBF penalties)`
    Cbf(&'a CbfConfig),
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// scenario mean of the full objective
    pub value: f64,
    /// scenario mean of the boosting loss alone
    pub boost: f64,
    /// scenario mean of the extra term, before any `rho / 2` weighting
    pub extra: f64,
    pub gradient: Option<Vec<f64>>,
    pub rollouts: Vec<Rollout>,
}

struct ScenarioEval {
    boost: f64,
    extra: f64,
    total: f64,
    grad: Option<Vec<f64>>,
    rollout: Rollout,
}

fn eval_scenario(
    problem: &Problem<'_>,
    op: &ContractiveOperator,
    objective: Objective<'_>,
    s: usize,
    with_grad: bool,
) -> Result<ScenarioEval> {
    let noise = &problem.bank[s];
    let mut tape = Tape::with_capacity(64 * (noise.horizon() + 1), 256 * (noise.horizon() + 1));
    let top = op.on_tape(&mut tape);
    let rec = rollout_on_tape(&mut tape, problem.plant, &top, noise, s)?;
    let boost = boost_on_tape(&mut tape, problem.loss, &rec);
    let (total, extra) = match objective {
        Objective::Boost => (boost, None),
        Objective::Augmented { rho, targets } => {
            if targets.x.len() != problem.scenarios() || targets.u.len() != problem.scenarios() {
                return Err(Error::mismatch("copy scenarios", problem.scenarios(), targets.x.len()));
            }
            let aug = augmented_on_tape(&mut tape, &rec, &targets.x[s], &targets.u[s])?;
            let weighted = tape.scale(aug, 0.5 * rho);
            (tape.add(boost, weighted), Some(aug))
        }
        Objective::Cbf(cfg) => {
            let pen = cbf_on_tape(&mut tape, cfg, &rec);
            (tape.add(boost, pen), Some(pen))
        }
    };
    let grad = if with_grad {
        Some(tape.backward(total, top.params())?)
    } else {
        None
    };
    Ok(ScenarioEval {
        boost: tape.value_of(boost)?,
        extra: match extra {
            Some(v) => tape.value_of(v)?,
            None => 0.0,
        },
        total: tape.value_of(total)?,
        grad,
        rollout: rec.values(&tape, s),
    })
}

pub fn evaluate(
    problem: &Problem<'_>,
    theta: &ThetaVector,
    objective: Objective<'_>,
    with_grad: bool,
) -> Result<Evaluation> {
    let s = problem.scenarios();
    if s == 0 {
        return Err(Error::InvalidConfig("need at least one scenario".into()));
    }
    let op = problem.operator(theta)?;
    let per: Vec<ScenarioEval> = (0..s)
        .into_par_iter()
        .map(|i| eval_scenario(problem, &op, objective, i, with_grad))
        .collect::<Result<_>>()?;

    let inv = 1.0 / s as f64;
    let mut value = 0.0;
    let mut boost = 0.0;
    let mut extra = 0.0;
    let mut gradient = with_grad.then(|| vec![0.0; theta.len()]);
    let mut rollouts = Vec::with_capacity(s);
    for e in per {
        value += e.total;
        boost += e.boost;
        extra += e.extra;
        if let (Some(acc), Some(g)) = (gradient.as_mut(), e.grad.as_ref()) {
            acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        rollouts.push(e.rollout);
    }
    if let Some(g) = gradient.as_mut() {
        g.iter_mut().for_each(|x| *x *= inv);
    }
    Ok(Evaluation {
        value: value * inv,
        boost: boost * inv,
        extra: extra * inv,
        gradient,
        rollouts,
    })
}

pub fn rollouts(problem: &Problem<'_>, theta: &ThetaVector) -> Result<Vec<Rollout>> {
    Ok(evaluate(problem, theta, Objective::Boost, false)?.rollouts)
}
