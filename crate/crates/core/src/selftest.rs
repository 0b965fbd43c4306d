//! Numerical self-checks: reverse-mode gradients against central finite
//! differences, and trajectory projections against a grid-search oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{ConvexSet, TrajectoryConstraint};
use crate::error::{Error, Result};
use crate::losses::{BoostLossConfig, Copies, MultiplierSet};
use crate::objective::{evaluate, Objective, Problem, Targets};
use crate::plant::{sample_bank, NoiseDistribution, PointMass, PointMassParams, Trajectory};
use crate::stable_ops::{init_params, OperatorDims, ThetaVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckConfig {
    pub instances: usize,
    pub scenarios: usize,
    pub horizon: usize,
    /// central-difference step
    pub step: f64,
    /// coordinates with `|g|` at or below this are not compared
    pub magnitude_floor: f64,
    pub seed: u64,
}

impl Default for GradientCheckConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            scenarios: 2,
            horizon: 10,
            step: 1e-5,
            magnitude_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckReport {
    pub instances: usize,
    pub coordinates_checked: usize,
    pub max_relative_error: f64,
    /// `(instance, coordinate)` of the largest relative error
    pub worst: Option<(usize, usize)>,
}

/// Compares the gradient of the augmented objective with central finite
/// differences on random parameters, noise, copies, multipliers and
/// penalties.
pub fn gradient_check(cfg: &GradientCheckConfig) -> Result<GradientCheckReport> {
    if cfg.scenarios == 0 || cfg.horizon == 0 || !(cfg.step > 0.0) {
        return Err(Error::InvalidConfig(
            "gradient check needs positive sizes and step".into(),
        ));
    }
    let plant = PointMass::new(PointMassParams::default())?;
    let loss = BoostLossConfig::default();
    let dims = OperatorDims::new(4, 4, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradientCheckReport {
        instances: cfg.instances,
        coordinates_checked: 0,
        max_relative_error: 0.0,
        worst: None,
    };
    for k in 0..cfg.instances {
        let bank = sample_bank(&NoiseDistribution::default(), cfg.scenarios, cfg.horizon, rng.gen(), 1)?;
        let problem = Problem {
            plant: &plant,
            kappa: rng.gen_range(0.5..0.99),
            prescale: 1.0,
            loss: &loss,
            bank: &bank,
        };
        let theta = init_params(dims, rng.gen_range(0.05..0.5), rng.gen())?;
        let base = evaluate(&problem, &theta, Objective::Boost, false)?.rollouts;
        let mut perturb = |t: &Trajectory, scale: f64| {
            let data = t
                .as_slice()
                .iter()
                .map(|v| v + scale * rng.gen_range(-1.0..1.0))
                .collect();
            Trajectory::new(t.dim(), data)
        };
        let copies = Copies {
            x: base.iter().map(|r| perturb(&r.x, 0.3)).collect::<Result<_>>()?,
            u: base.iter().map(|r| perturb(&r.u, 0.3)).collect::<Result<_>>()?,
        };
        let zeros = MultiplierSet::zeros_like(&base);
        let lambda = MultiplierSet {
            x: zeros.x.iter().map(|t| perturb(t, 0.1)).collect::<Result<_>>()?,
            u: zeros.u.iter().map(|t| perturb(t, 0.1)).collect::<Result<_>>()?,
        };
        let targets = Targets::new(&copies, &lambda);
        let rho = rng.gen_range(0.1..5.0);
        let objective = Objective::Augmented { rho, targets: &targets };

        let grad = evaluate(&problem, &theta, objective, true)?
            .gradient
            .expect("gradient requested");
        let value_at = |p: &[f64]| -> Result<f64> {
            let th = ThetaVector::new(dims, p.to_vec())?;
            Ok(evaluate(&problem, &th, objective, false)?.value)
        };
        let mut p = theta.as_slice().to_vec();
        for (i, &g) in grad.iter().enumerate() {
            let orig = p[i];
            p[i] = orig + cfg.step;
            let plus = value_at(&p)?;
            p[i] = orig - cfg.step;
            let minus = value_at(&p)?;
            p[i] = orig;
            if g.abs() <= cfg.magnitude_floor {
                continue;
            }
            let fd = (plus - minus) / (2.0 * cfg.step);
            let rel = (g - fd).abs() / g.abs();
            report.coordinates_checked += 1;
            if !(rel <= report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst = Some((k, i));
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCheckConfig {
    pub instances: usize,
    pub horizon: usize,
    /// grid spacing of the oracle
    pub grid_step: f64,
    pub seed: u64,
}

impl Default for ProjectionCheckConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            horizon: 20,
            grid_step: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCheckReport {
    pub instances: usize,
    /// largest componentwise gap between the projection and the oracle
    pub max_oracle_gap: f64,
    /// whether projecting twice always reproduced the first projection bit for bit
    pub idempotent: bool,
    /// largest `|P(a) - P(b)| - |a - b|` observed (non-positive when non-expansive)
    pub max_expansion: f64,
}

/// Minimizes `(b - v)^2` over the grid points of spacing `step` inside
/// `[lower, upper]`, searching a window around `v`.
pub fn grid_minimizer(v: f64, lower: f64, upper: f64, step: f64) -> f64 {
    let lo = lower.max(v - 1.0).min(upper);
    let hi = upper.min(v + 1.0).max(lower);
    let n = ((hi - lo) / step).floor() as usize;
    let mut best = lo;
    let mut best_cost = (lo - v).powi(2);
    for k in 0..=n + 1 {
        let b = (lo + k as f64 * step).min(hi);
        let cost = (b - v).powi(2);
        if cost < best_cost {
            best = b;
            best_cost = cost;
        }
    }
    best
}

fn random_bound<R: Rng>(rng: &mut R) -> (f64, f64) {
    let a = rng.gen_range(-2.0..2.0);
    let w = rng.gen_range(0.0..2.0);
    let lower = if rng.gen_bool(0.15) { f64::NEG_INFINITY } else { a };
    let upper = if rng.gen_bool(0.15) { f64::INFINITY } else { a + w };
    (lower, upper)
}

fn random_trajectory<R: Rng>(rng: &mut R, dim: usize, steps: usize) -> Result<Trajectory> {
    Trajectory::new(dim, (0..dim * steps).map(|_| rng.gen_range(-4.0..4.0)).collect())
}

fn norm_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Checks box projections of state and input trajectories against the
/// per-coordinate grid oracle, plus idempotence and non-expansiveness.
/// Ball projections take part in the last two checks.
pub fn projection_check(cfg: &ProjectionCheckConfig) -> Result<ProjectionCheckReport> {
    if cfg.horizon == 0 || !(cfg.grid_step > 0.0) {
        return Err(Error::InvalidConfig(
            "projection check needs a positive horizon and grid step".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps = cfg.horizon + 1;
    let mut report = ProjectionCheckReport {
        instances: cfg.instances,
        max_oracle_gap: 0.0,
        idempotent: true,
        max_expansion: f64::NEG_INFINITY,
    };
    for _ in 0..cfg.instances {
        let (sl, su): (Vec<f64>, Vec<f64>) = (0..4).map(|_| random_bound(&mut rng)).unzip();
        let (il, iu): (Vec<f64>, Vec<f64>) = (0..2).map(|_| random_bound(&mut rng)).unzip();
        let boxes = TrajectoryConstraint {
            state: ConvexSet::new_box(sl.clone(), su.clone())?,
            input: ConvexSet::new_box(il.clone(), iu.clone())?,
        };
        let balls = TrajectoryConstraint {
            state: ConvexSet::new_ball(
                (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                rng.gen_range(0.1..3.0),
            )?,
            input: ConvexSet::new_ball(
                (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                rng.gen_range(0.1..3.0),
            )?,
        };
        let xa = random_trajectory(&mut rng, 4, steps)?;
        let ua = random_trajectory(&mut rng, 2, steps)?;
        let xb = random_trajectory(&mut rng, 4, steps)?;
        let ub = random_trajectory(&mut rng, 2, steps)?;

        let (xp, up) = boxes.project_trajectory(&xa, &ua)?;
        for (traj, proj, lower, upper) in [(&xa, &xp, &sl, &su), (&ua, &up, &il, &iu)] {
            for t in 0..steps {
                for (i, (&v, &p)) in traj.row(t).iter().zip(proj.row(t)).enumerate() {
                    let oracle = grid_minimizer(v, lower[i], upper[i], cfg.grid_step);
                    report.max_oracle_gap = report.max_oracle_gap.max((p - oracle).abs());
                }
            }
        }

        for set in [&boxes, &balls] {
            let (xp, up) = set.project_trajectory(&xa, &ua)?;
            let (xpp, upp) = set.project_trajectory(&xp, &up)?;
            let bits = |t: &Trajectory| t.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            report.idempotent &= bits(&xp) == bits(&xpp) && bits(&up) == bits(&upp);
            let (xq, uq) = set.project_trajectory(&xb, &ub)?;
            let before = (norm_diff(&xa, &xb).powi(2) + norm_diff(&ua, &ub).powi(2)).sqrt();
            let after = (norm_diff(&xp, &xq).powi(2) + norm_diff(&up, &uq).powi(2)).sqrt();
            report.max_expansion = report.max_expansion.max(after - before);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_minimizer_examples() {
        assert!((grid_minimizer(0.3, 0.0, 1.0, 1e-3) - 0.3).abs() <= 5e-4);
        assert_eq!(grid_minimizer(5.0, 0.0, 1.0, 1e-3), 1.0);
        assert_eq!(grid_minimizer(-5.0, 0.0, 1.0, 1e-3), 0.0);
        assert!((grid_minimizer(0.1234, f64::NEG_INFINITY, f64::INFINITY, 1e-3) - 0.1234).abs() <= 1e-3);
    }

    #[test]
    fn small_gradient_check_passes() {
        let r = gradient_check(&GradientCheckConfig {
            instances: 2,
            ..GradientCheckConfig::default()
        })
        .unwrap();
        assert!(r.coordinates_checked > 0);
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }

    #[test]
    fn small_projection_check_passes() {
        let r = projection_check(&ProjectionCheckConfig {
            instances: 5,
            ..ProjectionCheckConfig::default()
        })
        .unwrap();
        assert!(r.max_oracle_gap <= 2e-3);
        assert!(r.idempotent);
        assert!(r.max_expansion <= 1e-12);
    }
}
