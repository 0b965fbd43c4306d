//! Convex sets, Euclidean projections and the velocity-violation metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{Rollout, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    /// Componentwise bounds; infinite entries mean unbounded.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// No constraint.
    All,
}

impl ConvexSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::mismatch("box bounds", lower.len(), upper.len()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidConfig("box needs lower <= upper".into()));
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        let expected = match self {
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::All => return Ok(()),
        };
        if expected != n {
            return Err(Error::mismatch("projection input", expected, n));
        }
        Ok(())
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        match self {
            ConvexSet::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(x, (l, u))| l <= x && x <= u),
            ConvexSet::Ball { center, radius } => dist(v, center) <= *radius,
            ConvexSet::All => true,
        }
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.project_in_place(&mut out)?;
        Ok(out)
    }

    /// Euclidean projection; points already in the set are left untouched.
    pub fn project_in_place(&self, v: &mut [f64]) -> Result<()> {
        self.check_dim(v.len())?;
        match self {
            ConvexSet::Box { lower, upper } => {
                for (x, (l, u)) in v.iter_mut().zip(lower.iter().zip(upper)) {
                    if *x < *l {
                        *x = *l;
                    } else if *x > *u {
                        *x = *u;
                    }
                }
            }
            ConvexSet::Ball { center, radius } => {
                let d = dist(v, center);
                if d > *radius {
                    // Shrink the factor ulp by ulp until the image is inside,
                    // so a second projection is the identity.
                    let mut factor = radius / d;
                    loop {
                        let p: Vec<f64> = v.iter().zip(center).map(|(x, c)| c + factor * (x - c)).collect();
                        if dist(&p, center) <= *radius {
                            v.copy_from_slice(&p);
                            break;
                        }
                        factor = factor.next_down();
                    }
                }
            }
            ConvexSet::All => {}
        }
        Ok(())
    }

    /// Squared Euclidean distance to the set.
    pub fn sq_distance(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v.len())?;
        Ok(match self {
            ConvexSet::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| {
                    if x < l {
                        (l - x) * (l - x)
                    } else if x > u {
                        (x - u) * (x - u)
                    } else {
                        0.0
                    }
                })
                .sum(),
            ConvexSet::Ball { center, radius } => {
                let d = dist(v, center);
                if d > *radius {
                    (d - radius).powi(2)
                } else {
                    0.0
                }
            }
            ConvexSet::All => 0.0,
        })
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Time-invariant state and input sets applied at every `t in [0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConstraint {
    pub state: ConvexSet,
    pub input: ConvexSet,
}

impl TrajectoryConstraint {
    /// Projects `x + lambda_x` and `u + lambda_u` onto `X^{T+1}` and
    /// `U^{T+1}`, one time step at a time.
    pub fn project_trajectory(
        &self,
        x_shifted: &Trajectory,
        u_shifted: &Trajectory,
    ) -> Result<(Trajectory, Trajectory)> {
        if x_shifted.len() != u_shifted.len() {
            return Err(Error::mismatch(
                "input trajectory length",
                x_shifted.len(),
                u_shifted.len(),
            ));
        }
        let mut xp = x_shifted.clone();
        let mut up = u_shifted.clone();
        for t in 0..xp.len() {
            self.state.project_in_place(xp.row_mut(t))?;
            self.input.project_in_place(up.row_mut(t))?;
        }
        Ok((xp, up))
    }
}

/// Serializable bounds: `null` entries are unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl BoxBounds {
    pub fn to_set(&self) -> Result<ConvexSet> {
        if self.lower.iter().chain(&self.upper).all(Option::is_none) {
            return Ok(ConvexSet::All);
        }
        let lower = self.lower.iter().map(|b| b.unwrap_or(f64::NEG_INFINITY)).collect();
        let upper = self.upper.iter().map(|b| b.unwrap_or(f64::INFINITY)).collect();
        ConvexSet::new_box(lower, upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    pub state: BoxBounds,
    pub input: BoxBounds,
}

impl Default for ConstraintConfig {
    /// Velocities in `[-0.5, 0.5]`, positions and inputs free.
    fn default() -> Self {
        Self {
            state: BoxBounds {
                lower: vec![None, None, Some(-0.5), Some(-0.5)],
                upper: vec![None, None, Some(0.5), Some(0.5)],
            },
            input: BoxBounds {
                lower: vec![None, None],
                upper: vec![None, None],
            },
        }
    }
}

impl ConstraintConfig {
    pub fn build(&self) -> Result<TrajectoryConstraint> {
        Ok(TrajectoryConstraint {
            state: self.state.to_set()?,
            input: self.input.to_set()?,
        })
    }
}

/// Sum over scenarios and time of the squared excess of the state beyond
/// `bounds`. Points on the boundary count as feasible.
pub fn violation_metric(rollouts: &[Rollout], bounds: &ConvexSet) -> Result<f64> {
    if let Some(first) = rollouts.first() {
        if let Some(r) = rollouts.iter().find(|r| r.x.len() != first.x.len()) {
            return Err(Error::mismatch("rollout horizon", first.x.len(), r.x.len()));
        }
    }
    let mut total = 0.0;
    for r in rollouts {
        for x in r.x.rows() {
            total += bounds.sq_distance(x)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn velocity_box() -> ConvexSet {
        ConstraintConfig::default().build().unwrap().state
    }

    fn rollout_with_velocity(q: &[[f64; 2]]) -> Rollout {
        let rows: Vec<Vec<f64>> = q.iter().map(|v| vec![1.0, -3.0, v[0], v[1]]).collect();
        Rollout {
            scenario: 0,
            x: Trajectory::from_rows(&rows).unwrap(),
            u: Trajectory::zeros(2, q.len()),
        }
    }

    #[test]
    fn box_clamps() {
        let b = ConvexSet::new_box(vec![-0.5; 2], vec![0.5; 2]).unwrap();
        assert_eq!(b.project(&[0.7, -0.6]).unwrap(), vec![0.5, -0.5]);
        assert_eq!(b.project(&[0.1, -0.2]).unwrap(), vec![0.1, -0.2]);
    }

    #[test]
    fn ball_scales_radially() {
        let b = ConvexSet::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = b.project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(ConvexSet::new_box(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexSet::new_box(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(ConvexSet::new_ball(vec![0.0], 0.0).is_err());
        let b = ConvexSet::new_box(vec![0.0; 2], vec![1.0; 2]).unwrap();
        assert!(b.project(&[0.0; 3]).is_err());
    }

    #[test]
    fn trajectory_projection_acts_on_velocities_only() {
        let tc = ConstraintConfig::default().build().unwrap();
        let x = Trajectory::from_rows(&vec![vec![3.0, -7.0, 0.6, 0.6]; 5]).unwrap();
        let u = Trajectory::from_rows(&vec![vec![9.0, -9.0]; 5]).unwrap();
        let (xp, up) = tc.project_trajectory(&x, &u).unwrap();
        assert!(xp.rows().all(|r| r == [3.0, -7.0, 0.5, 0.5]));
        assert_eq!(up, u);
    }

    #[test]
    fn trajectory_projection_leaves_feasible_unchanged() {
        let tc = ConstraintConfig::default().build().unwrap();
        let x = Trajectory::from_rows(&vec![vec![3.0, -7.0, 0.1, -0.4]; 4]).unwrap();
        let u = Trajectory::zeros(2, 4);
        let (xp, up) = tc.project_trajectory(&x, &u).unwrap();
        assert_eq!((xp, up), (x, u));
    }

    #[test]
    fn trajectory_length_mismatch() {
        let tc = ConstraintConfig::default().build().unwrap();
        let x = Trajectory::zeros(4, 4);
        let u = Trajectory::zeros(2, 5);
        assert!(tc.project_trajectory(&x, &u).is_err());
    }

    #[test]
    fn null_bounds_mean_unbounded() {
        let json = r#"{"lower":[null,-1.0],"upper":[null,null]}"#;
        let b: BoxBounds = serde_json::from_str(json).unwrap();
        let set = b.to_set().unwrap();
        assert_eq!(set.project(&[-1e9, -3.0]).unwrap(), vec![-1e9, -1.0]);
        let free: BoxBounds = serde_json::from_str(r#"{"lower":[null],"upper":[null]}"#).unwrap();
        assert_eq!(free.to_set().unwrap(), ConvexSet::All);
    }

    #[test]
    fn violation_examples() {
        let set = velocity_box();
        let ok = rollout_with_velocity(&[[0.5, -0.5], [0.0, 0.2]]);
        assert_eq!(violation_metric(std::slice::from_ref(&ok), &set).unwrap(), 0.0);

        let one = rollout_with_velocity(&[[0.0, 0.0], [0.6, 0.0]]);
        let v = violation_metric(&[ok.clone(), one], &set).unwrap();
        assert!((v - 0.01).abs() < 1e-15);

        let neg = rollout_with_velocity(&[[0.0, -0.7], [0.0, 0.0]]);
        let v = violation_metric(&[neg], &set).unwrap();
        assert!((v - 0.04).abs() < 1e-15);
    }

    #[test]
    fn violation_rejects_mixed_horizons() {
        let a = rollout_with_velocity(&[[0.0, 0.0]; 3]);
        let b = rollout_with_velocity(&[[0.0, 0.0]; 4]);
        assert!(violation_metric(&[a, b], &velocity_box()).is_err());
    }

    fn any_set() -> impl Strategy<Value = ConvexSet> {
        prop_oneof![
            (
                proptest::collection::vec(-2.0f64..0.0, 3),
                proptest::collection::vec(0.0f64..2.0, 3)
            )
                .prop_map(|(l, u)| ConvexSet::new_box(l, u).unwrap()),
            (proptest::collection::vec(-1.0f64..1.0, 3), 0.1f64..3.0)
                .prop_map(|(c, r)| ConvexSet::new_ball(c, r).unwrap()),
            Just(ConvexSet::All),
        ]
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_lands_in_set(
            set in any_set(),
            v in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let p = set.project(&v).unwrap();
            prop_assert!(set.contains(&p));
            prop_assert_eq!(set.project(&p).unwrap(), p);
        }

        #[test]
        fn projection_is_non_expansive(
            set in any_set(),
            a in proptest::collection::vec(-10.0f64..10.0, 3),
            b in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let pa = set.project(&a).unwrap();
            let pb = set.project(&b).unwrap();
            prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-12);
        }

        #[test]
        fn violation_zero_iff_feasible(
            q in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20),
        ) {
            let q: Vec<[f64; 2]> = q.into_iter().map(|(a, b)| [a, b]).collect();
            let set = velocity_box();
            let r = rollout_with_velocity(&q);
            let feasible = q.iter().all(|v| v.iter().all(|x| x.abs() <= 0.5));
            prop_assert_eq!(violation_metric(&[r], &set).unwrap() == 0.0, feasible);
        }
    }
}
