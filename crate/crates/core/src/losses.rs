//! Scalar objectives: boosting loss (LQ + collision avoidance), the ADMM
//! augmented term and the CBF-induced baseline penalties.
//!
//! Every loss is written once against the tape; the plain `f64` entry points
//! replay a finished [`Rollout`] as constants and evaluate the same graph.
//! State layout follows the point-mass robot: positions in `x[0..2]`,
//! velocities in `x[2..4]`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::plant::{Rollout, TapeRollout, Trajectory};

pub const POSITION: usize = 0;
pub const VELOCITY: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostLossConfig {
    /// state weight, rows of an `n x n` matrix
    pub q: Vec<Vec<f64>>,
    /// input weight, rows of an `m x m` matrix
    pub r: Vec<Vec<f64>>,
    /// collision-avoidance weight
    pub alpha: f64,
    pub obstacle: [f64; 2],
    /// obstacle radius plus robot radius, m
    pub radius: f64,
    pub nu: f64,
    /// the penalty is active while `|a - a_obs|^2 <= safety_factor * radius`
    pub safety_factor: f64,
}

fn scaled_identity(n: usize, s: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { s } else { 0.0 }).collect())
        .collect()
}

impl Default for BoostLossConfig {
    fn default() -> Self {
        Self {
            q: scaled_identity(4, 1.0),
            r: scaled_identity(2, 0.1),
            alpha: 10.0,
            obstacle: [1.0, 0.5],
            radius: 0.75,
            nu: 0.001,
            safety_factor: 1.1,
        }
    }
}

fn check_psd(name: &str, m: &[Vec<f64>]) -> Result<()> {
    let n = m.len();
    if m.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidConfig(format!("{name} must be square")));
    }
    for i in 0..n {
        for j in 0..i {
            if (m[i][j] - m[j][i]).abs() > 1e-12 * (1.0 + m[i][j].abs()) {
                return Err(Error::InvalidConfig(format!("{name} must be symmetric")));
            }
        }
    }
    let flat: Vec<f64> = m.iter().flatten().copied().collect();
    let eig = nalgebra::DMatrix::from_row_slice(n, n, &flat).symmetric_eigenvalues();
    if eig.iter().any(|l| *l < -1e-10) {
        return Err(Error::InvalidConfig(format!("{name} must be positive semidefinite")));
    }
    Ok(())
}

impl BoostLossConfig {
    pub fn validate(&self) -> Result<()> {
        check_psd("Q", &self.q)?;
        check_psd("R", &self.r)?;
        if !(self.alpha >= 0.0 && self.nu >= 0.0 && self.radius >= 0.0 && self.safety_factor >= 0.0) {
            return Err(Error::InvalidConfig(
                "alpha, nu, radius and safety factor must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Squared-distance threshold that activates the collision penalty.
    pub fn activation_threshold(&self) -> f64 {
        self.safety_factor * self.radius
    }

    fn flat(m: &[Vec<f64>]) -> Vec<f64> {
        m.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CbfConfig {
    pub omega: f64,
    pub zeta: f64,
    /// symmetric velocity limit
    pub bound: f64,
}

impl Default for CbfConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            zeta: 0.2,
            bound: 0.5,
        }
    }
}

impl CbfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) || !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "CBF penalty needs omega >= 0 and zeta in (0, 1), got omega = {}, zeta = {}",
                self.omega, self.zeta
            )));
        }
        Ok(())
    }
}

/// Scaled multipliers `lambda^{x,s}`, `lambda^{u,s}`, one trajectory per
/// scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub x: Vec<Trajectory>,
    pub u: Vec<Trajectory>,
}

impl MultiplierSet {
    pub fn zeros_like(rollouts: &[Rollout]) -> Self {
        Self {
            x: rollouts
                .iter()
                .map(|r| Trajectory::zeros(r.x.dim(), r.x.len()))
                .collect(),
            u: rollouts
                .iter()
                .map(|r| Trajectory::zeros(r.u.dim(), r.u.len()))
                .collect(),
        }
    }

    pub fn scenarios(&self) -> usize {
        self.x.len()
    }

    pub fn norm(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.u)
            .flat_map(|t| t.as_slice())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.x.iter_mut().chain(self.u.iter_mut()) {
            t.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        }
    }
}

// ---- tape versions -------------------------------------------------------

pub fn lq_on_tape(tape: &mut Tape, cfg: &BoostLossConfig, rec: &TapeRollout) -> Var {
    let n = cfg.q.len();
    let m = cfg.r.len();
    let q = tape.constant(&BoostLossConfig::flat(&cfg.q), n, n);
    let r = tape.constant(&BoostLossConfig::flat(&cfg.r), m, m);
    let mut total = tape.scalar(0.0);
    for (x, u) in rec.xs.iter().zip(&rec.us) {
        let qx = tape.matvec(q, *x);
        let xqx = tape.dot(*x, qx);
        let ru = tape.matvec(r, *u);
        let uru = tape.dot(*u, ru);
        let step = tape.add(xqx, uru);
        total = tape.add(total, step);
    }
    total
}

/// Sum over time of `|a_t - a_obs|^2 + nu` for every step whose squared
/// distance is within the activation threshold (boundary included).
pub fn collision_on_tape(tape: &mut Tape, cfg: &BoostLossConfig, rec: &TapeRollout) -> Var {
    let obstacle = tape.vector(&cfg.obstacle);
    let threshold = cfg.activation_threshold();
    let mut total = tape.scalar(0.0);
    for x in &rec.xs {
        let a = tape.slice(*x, POSITION, 2);
        let diff = tape.sub(a, obstacle);
        let d2 = tape.norm_sq(diff);
        if tape.values(d2)[0] <= threshold {
            let term = tape.offset(d2, cfg.nu);
            total = tape.add(total, term);
        }
    }
    total
}

/// `L_LQ + alpha * L_ca` for one scenario.
pub fn boost_on_tape(tape: &mut Tape, cfg: &BoostLossConfig, rec: &TapeRollout) -> Var {
    let lq = lq_on_tape(tape, cfg, rec);
    if cfg.alpha == 0.0 {
        return lq;
    }
    let ca = collision_on_tape(tape, cfg, rec);
    let weighted = tape.scale(ca, cfg.alpha);
    tape.add(lq, weighted)
}

/// Both hinge streams (lower and upper margin) for both velocity
/// coordinates, weighted by `omega`.
pub fn cbf_on_tape(tape: &mut Tape, cfg: &CbfConfig, rec: &TapeRollout) -> Var {
    let mut total = tape.scalar(0.0);
    if rec.xs.len() < 2 {
        return total;
    }
    let decay = 1.0 - cfg.zeta;
    let margins = |tape: &mut Tape, x: Var| {
        let q = tape.slice(x, VELOCITY, 2);
        let lower = tape.offset(q, cfg.bound);
        let neg = tape.scale(q, -1.0);
        let upper = tape.offset(neg, cfg.bound);
        (lower, upper)
    };
    let mut prev = margins(tape, rec.xs[0]);
    for x in &rec.xs[1..] {
        let next = margins(tape, *x);
        for (now, then) in [(prev.0, next.0), (prev.1, next.1)] {
            let shrunk = tape.scale(now, decay);
            let gap = tape.sub(shrunk, then);
            let hinge = tape.max0(gap);
            let s = tape.sum(hinge);
            total = tape.add(total, s);
        }
        prev = next;
    }
    tape.scale(total, cfg.omega)
}

/// `|x - x^p + lambda^x|^2 + |u - u^p + lambda^u|^2` for one scenario, with
/// `x_target = x^p - lambda^x` and `u_target = u^p - lambda^u`.
pub fn augmented_on_tape(
    tape: &mut Tape,
    rec: &TapeRollout,
    x_target: &Trajectory,
    u_target: &Trajectory,
) -> Result<Var> {
    if x_target.len() != rec.xs.len() {
        return Err(Error::mismatch("copy trajectory length", rec.xs.len(), x_target.len()));
    }
    if u_target.len() != rec.us.len() {
        return Err(Error::mismatch("copy trajectory length", rec.us.len(), u_target.len()));
    }
    let mut total = tape.scalar(0.0);
    for (t, (x, u)) in rec.xs.iter().zip(&rec.us).enumerate() {
        let cx = tape.vector(x_target.row(t));
        let dx = tape.sub(*x, cx);
        let nx = tape.norm_sq(dx);
        let cu = tape.vector(u_target.row(t));
        let du = tape.sub(*u, cu);
        let nu = tape.norm_sq(du);
        let step = tape.add(nx, nu);
        total = tape.add(total, step);
    }
    Ok(total)
}

// ---- plain evaluations on finished rollouts -------------------------------

fn replay(tape: &mut Tape, rollout: &Rollout) -> TapeRollout {
    let xs = rollout.x.rows().map(|r| tape.vector(r)).collect();
    let us = rollout.u.rows().map(|r| tape.vector(r)).collect();
    TapeRollout {
        xs,
        us,
        w_hat: Vec::new(),
    }
}

fn eval(rollout: &Rollout, f: impl FnOnce(&mut Tape, &TapeRollout) -> Var) -> f64 {
    let mut tape = Tape::new();
    let rec = replay(&mut tape, rollout);
    let v = f(&mut tape, &rec);
    tape.values(v)[0]
}

pub fn lq_loss(cfg: &BoostLossConfig, rollout: &Rollout) -> f64 {
    eval(rollout, |t, r| lq_on_tape(t, cfg, r))
}

pub fn collision_loss(cfg: &BoostLossConfig, rollout: &Rollout) -> f64 {
    eval(rollout, |t, r| collision_on_tape(t, cfg, r))
}

pub fn boost_loss(cfg: &BoostLossConfig, rollout: &Rollout) -> f64 {
    eval(rollout, |t, r| boost_on_tape(t, cfg, r))
}

pub fn cbf_penalty(cfg: &CbfConfig, rollout: &Rollout) -> f64 {
    eval(rollout, |t, r| cbf_on_tape(t, cfg, r))
}

/// Copy variables `X^p`, `U^p`, one trajectory per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Copies {
    pub x: Vec<Trajectory>,
    pub u: Vec<Trajectory>,
}

impl Copies {
    pub fn scenarios(&self) -> usize {
        self.x.len()
    }
}

fn check_scenarios(rollouts: &[Rollout], copies: &Copies, lambda: &MultiplierSet) -> Result<()> {
    let s = rollouts.len();
    if copies.x.len() != s || copies.u.len() != s {
        return Err(Error::mismatch("copy scenarios", s, copies.x.len().min(copies.u.len())));
    }
    if lambda.x.len() != s || lambda.u.len() != s {
        return Err(Error::mismatch(
            "multiplier scenarios",
            s,
            lambda.x.len().min(lambda.u.len()),
        ));
    }
    for (i, r) in rollouts.iter().enumerate() {
        for (a, b) in [
            (&r.x, &copies.x[i]),
            (&r.x, &lambda.x[i]),
            (&r.u, &copies.u[i]),
            (&r.u, &lambda.u[i]),
        ] {
            if !a.same_shape(b) {
                return Err(Error::mismatch(
                    "trajectory shape",
                    a.as_slice().len(),
                    b.as_slice().len(),
                ));
            }
        }
    }
    Ok(())
}

/// `(1/S) sum_s |x - x^p + lambda^x|^2 + |u - u^p + lambda^u|^2`.
pub fn augmented_term(rollouts: &[Rollout], copies: &Copies, lambda: &MultiplierSet) -> Result<f64> {
    check_scenarios(rollouts, copies, lambda)?;
    if rollouts.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (i, r) in rollouts.iter().enumerate() {
        for (z, zp, l) in [(&r.x, &copies.x[i], &lambda.x[i]), (&r.u, &copies.u[i], &lambda.u[i])] {
            total += z
                .as_slice()
                .iter()
                .zip(zp.as_slice())
                .zip(l.as_slice())
                .map(|((a, b), c)| (a - b + c).powi(2))
                .sum::<f64>();
        }
    }
    Ok(total / rollouts.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    AdmmPb,
    CbfBaseline,
}

/// ADMM-specific inputs of the training objective.
#[derive(Debug, Clone, Copy)]
pub struct AugmentedInputs<'a> {
    pub rho: f64,
    pub copies: &'a Copies,
    pub lambda: &'a MultiplierSet,
}

/// Scenario-averaged training objective:
/// `mean L + (rho/2) L^a` for ADMM-PB, `mean (L + CBF)` for the baseline.
pub fn total_training_loss(
    mode: LossMode,
    cfg: &BoostLossConfig,
    rollouts: &[Rollout],
    admm: Option<AugmentedInputs<'_>>,
    cbf: Option<&CbfConfig>,
) -> Result<f64> {
    if rollouts.is_empty() {
        return Err(Error::InvalidConfig("need at least one scenario".into()));
    }
    let s = rollouts.len() as f64;
    let mean_boost = rollouts.iter().map(|r| boost_loss(cfg, r)).sum::<f64>() / s;
    match mode {
        LossMode::AdmmPb => {
            let a = admm.ok_or(Error::MissingAdmmState)?;
            Ok(mean_boost + 0.5 * a.rho * augmented_term(rollouts, a.copies, a.lambda)?)
        }
        LossMode::CbfBaseline => {
            let c = cbf.ok_or_else(|| Error::InvalidConfig("baseline mode needs CBF config".into()))?;
            let mean_cbf = rollouts.iter().map(|r| cbf_penalty(c, r)).sum::<f64>() / s;
            Ok(mean_boost + mean_cbf)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rollout(xs: &[[f64; 4]], us: &[[f64; 2]]) -> Rollout {
        Rollout {
            scenario: 0,
            x: Trajectory::from_rows(&xs.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap(),
            u: Trajectory::from_rows(&us.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap(),
        }
    }

    fn far(n: usize) -> Rollout {
        rollout(&vec![[10.0, 10.0, 0.0, 0.0]; n], &vec![[0.0, 0.0]; n])
    }

    #[test]
    fn default_config_is_valid() {
        BoostLossConfig::default().validate().unwrap();
        CbfConfig::default().validate().unwrap();
        assert!((BoostLossConfig::default().activation_threshold() - 0.825).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_psd_weights() {
        let mut cfg = BoostLossConfig::default();
        cfg.q[0][0] = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = BoostLossConfig::default();
        cfg.r[0][1] = 0.5;
        assert!(cfg.validate().is_err());
        assert!(CbfConfig {
            zeta: 1.0,
            ..CbfConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn lq_examples() {
        let cfg = BoostLossConfig::default();
        assert_eq!(lq_loss(&cfg, &rollout(&[[0.0; 4]; 3], &[[0.0; 2]; 3])), 0.0);
        let one = rollout(&[[1.0, 0.0, 0.0, 0.0]], &[[2.0, 0.0]]);
        assert!((lq_loss(&cfg, &one) - 1.4).abs() < 1e-15);

        let base = rollout(
            &[[0.3, -0.2, 1.0, 0.5], [1.0, 2.0, -1.0, 0.0]],
            &[[0.2, 0.1], [-1.0, 3.0]],
        );
        let mut doubled = base.clone();
        doubled.x.as_mut_slice().iter_mut().for_each(|v| *v *= 2.0);
        doubled.u.as_mut_slice().iter_mut().for_each(|v| *v *= 2.0);
        assert!((lq_loss(&cfg, &doubled) - 4.0 * lq_loss(&cfg, &base)).abs() < 1e-12);
    }

    #[test]
    fn collision_examples() {
        let cfg = BoostLossConfig::default();
        let at = rollout(&[[1.0, 0.5, 0.0, 0.0], [10.0, 0.0, 0.0, 0.0]], &[[0.0; 2]; 2]);
        assert!((collision_loss(&cfg, &at) - 0.001).abs() < 1e-15);
        assert_eq!(collision_loss(&cfg, &far(5)), 0.0);

        // find a position whose squared distance is exactly the threshold
        let thr = cfg.activation_threshold();
        let dist2 = |ax: f64, ay: f64| (ax - 1.0) * (ax - 1.0) + (ay - 0.5) * (ay - 0.5);
        let mut found = None;
        'search: for k in 0..200 {
            let ay = 0.5 + k as f64 * 1e-3;
            let mut ax = 1.0 + (thr - (ay - 0.5) * (ay - 0.5)).sqrt();
            for _ in 0..8 {
                let d2 = dist2(ax, ay);
                if d2 == thr {
                    found = Some((ax, ay));
                    break 'search;
                }
                ax = if d2 > thr { ax.next_down() } else { ax.next_up() };
            }
        }
        let (ax, ay) = found.expect("an exact boundary point exists");
        assert_eq!(dist2(ax, ay), thr);
        let edge = rollout(&[[ax, ay, 0.0, 0.0]], &[[0.0; 2]]);
        assert!((collision_loss(&cfg, &edge) - 0.826).abs() < 1e-12);
        let outside = rollout(&[[ax.next_up(), ay, 0.0, 0.0]], &[[0.0; 2]]);
        assert!(dist2(ax.next_up(), ay) > thr);
        assert_eq!(collision_loss(&cfg, &outside), 0.0);
    }

    #[test]
    fn cbf_examples() {
        let cfg = CbfConfig::default();
        let still = rollout(&[[0.0; 4]; 4], &[[0.0; 2]; 4]);
        assert_eq!(cbf_penalty(&cfg, &still), 0.0);

        let drop = rollout(&[[0.0; 4], [0.0, 0.0, -0.45, 0.0]], &[[0.0; 2]; 2]);
        assert!((cbf_penalty(&cfg, &drop) - 0.35).abs() < 1e-15);
        let heavy = CbfConfig { omega: 1e3, ..cfg };
        assert!((cbf_penalty(&heavy, &drop) - 350.0).abs() < 1e-12);

        let zero = CbfConfig { omega: 0.0, ..cfg };
        assert_eq!(cbf_penalty(&zero, &drop), 0.0);
    }

    fn copies_of(r: &Rollout) -> Copies {
        Copies {
            x: vec![r.x.clone()],
            u: vec![r.u.clone()],
        }
    }

    #[test]
    fn augmented_examples() {
        let r = rollout(&[[1.0, 2.0, 3.0, 4.0], [0.5, 0.0, 0.0, 1.0]], &[[1.0, 1.0]; 2]);
        let lambda = MultiplierSet::zeros_like(std::slice::from_ref(&r));
        assert_eq!(
            augmented_term(std::slice::from_ref(&r), &copies_of(&r), &lambda).unwrap(),
            0.0
        );

        // scalar toy: x - x^p = 1, lambda = 1
        let toy = Rollout {
            scenario: 0,
            x: Trajectory::new(1, vec![1.0]).unwrap(),
            u: Trajectory::new(1, vec![0.0]).unwrap(),
        };
        let copies = Copies {
            x: vec![Trajectory::new(1, vec![0.0]).unwrap()],
            u: vec![Trajectory::new(1, vec![0.0]).unwrap()],
        };
        let lambda = MultiplierSet {
            x: vec![Trajectory::new(1, vec![1.0]).unwrap()],
            u: vec![Trajectory::new(1, vec![0.0]).unwrap()],
        };
        assert_eq!(
            augmented_term(std::slice::from_ref(&toy), &copies, &lambda).unwrap(),
            4.0
        );

        // translation invariance
        let mut shifted = toy.clone();
        shifted.x.as_mut_slice()[0] += 7.0;
        let mut shifted_copies = copies.clone();
        shifted_copies.x[0].as_mut_slice()[0] += 7.0;
        assert_eq!(augmented_term(&[shifted], &shifted_copies, &lambda).unwrap(), 4.0);

        // shape mismatch
        let bad = Copies {
            x: vec![Trajectory::zeros(1, 2)],
            u: copies.u.clone(),
        };
        assert!(augmented_term(&[toy], &bad, &lambda).is_err());
    }

    #[test]
    fn augmented_tape_matches_plain() {
        let r = rollout(
            &[[1.0, 2.0, 3.0, 4.0], [0.5, 0.0, 0.0, 1.0]],
            &[[1.0, -1.0], [0.3, 0.2]],
        );
        let mut copies = copies_of(&r);
        copies.x[0].as_mut_slice().iter_mut().for_each(|v| *v *= 0.5);
        let mut lambda = MultiplierSet::zeros_like(std::slice::from_ref(&r));
        lambda.u[0].as_mut_slice()[1] = 0.7;
        let plain = augmented_term(std::slice::from_ref(&r), &copies, &lambda).unwrap();

        let target = |c: &Trajectory, l: &Trajectory| {
            let d: Vec<f64> = c.as_slice().iter().zip(l.as_slice()).map(|(a, b)| a - b).collect();
            Trajectory::new(c.dim(), d).unwrap()
        };
        let mut tape = Tape::new();
        let rec = replay(&mut tape, &r);
        let v = augmented_on_tape(
            &mut tape,
            &rec,
            &target(&copies.x[0], &lambda.x[0]),
            &target(&copies.u[0], &lambda.u[0]),
        )
        .unwrap();
        assert!((tape.values(v)[0] - plain).abs() < 1e-12);
    }

    #[test]
    fn total_loss_modes() {
        let cfg = BoostLossConfig::default();
        let r = rollout(&[[1.0, 0.8, -0.7, 0.1], [0.9, 0.7, -0.9, 0.0]], &[[0.5, 0.5]; 2]);
        let l = boost_loss(&cfg, &r);
        let copies = Copies {
            x: vec![Trajectory::zeros(4, 2)],
            u: vec![Trajectory::zeros(2, 2)],
        };
        let lambda = MultiplierSet::zeros_like(std::slice::from_ref(&r));
        let admm = AugmentedInputs {
            rho: 0.0,
            copies: &copies,
            lambda: &lambda,
        };
        let v = total_training_loss(LossMode::AdmmPb, &cfg, std::slice::from_ref(&r), Some(admm), None).unwrap();
        assert_eq!(v, l);

        let c0 = CbfConfig {
            omega: 0.0,
            ..CbfConfig::default()
        };
        let v = total_training_loss(LossMode::CbfBaseline, &cfg, std::slice::from_ref(&r), None, Some(&c0)).unwrap();
        assert_eq!(v, l);

        let c1 = CbfConfig::default();
        let single =
            total_training_loss(LossMode::CbfBaseline, &cfg, std::slice::from_ref(&r), None, Some(&c1)).unwrap();
        let pair = total_training_loss(LossMode::CbfBaseline, &cfg, &[r.clone(), r.clone()], None, Some(&c1)).unwrap();
        assert!((single - pair).abs() < 1e-12);

        assert!(matches!(
            total_training_loss(LossMode::AdmmPb, &cfg, &[r], None, None),
            Err(Error::MissingAdmmState)
        ));
    }

    #[test]
    fn multiplier_rescale() {
        let r = far(3);
        let mut l = MultiplierSet::zeros_like(&[r]);
        l.x[0].as_mut_slice()[0] = 3.0;
        l.u[0].as_mut_slice()[1] = 4.0;
        assert_eq!(l.norm(), 5.0);
        l.scale(0.5);
        assert_eq!(l.norm(), 2.5);
    }
}
