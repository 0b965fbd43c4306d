//! Point-mass benchmark: training banks, ADMM-PB and CBF-penalty training
//! runs, held-out evaluation and the indicator table.

use serde::{Deserialize, Serialize};

use crate::admm::{run_admm_pb, AdmmConfig, AdmmState, IterateRecord, IterationHook};
use crate::constraints::{violation_metric, ConstraintConfig, ConvexSet};
use crate::error::{Error, Result};
use crate::losses::{collision_loss, lq_loss, BoostLossConfig, CbfConfig, POSITION};
use crate::objective::{evaluate as evaluate_objective, rollouts as closed_loop, Objective, Problem};
use crate::optim::Adam;
use crate::plant::{sample_bank, NoiseDistribution, NoiseRealization, PointMass, PointMassParams, Rollout};
use crate::stable_ops::{init_params, OperatorDims, ThetaVector};
use crate::VERSION;

pub const TRAIN_STREAM: u64 = 1;
pub const TEST_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorConfig {
    pub dims: OperatorDims,
    pub kappa: f64,
    pub prescale: f64,
    /// standard deviation of the Gaussian initial parameters
    pub init_std: f64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            dims: OperatorDims::new(4, 4, 2),
            kappa: 0.99,
            prescale: 1.0,
            init_std: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// penalty weights of the sweep
    pub omegas: Vec<f64>,
    pub zeta: f64,
    /// full-batch epochs `E`
    pub epochs: usize,
    /// fixed Adam learning rate
    pub eta: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            omegas: vec![1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6],
            zeta: 0.2,
            epochs: 6900,
            eta: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub plant: PointMassParams,
    pub noise: NoiseDistribution,
    pub loss: BoostLossConfig,
    pub constraints: ConstraintConfig,
    pub operator: OperatorConfig,
    pub train_scenarios: usize,
    pub test_scenarios: usize,
    /// horizon `T`; trajectories have `T + 1` samples
    pub horizon: usize,
    pub admm: AdmmConfig,
    pub baseline: BaselineConfig,
    /// drives parameter initialization and both noise banks
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plant: PointMassParams::default(),
            noise: NoiseDistribution::default(),
            loss: BoostLossConfig::default(),
            constraints: ConstraintConfig::default(),
            operator: OperatorConfig::default(),
            train_scenarios: 8,
            test_scenarios: 5,
            horizon: 249,
            admm: AdmmConfig {
                max_iters: 1150,
                ..AdmmConfig::default()
            },
            baseline: BaselineConfig::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Reduced sizes: 4 training scenarios, `T = 100`, 150 ADMM iterations
    /// and a baseline budget of the same number of gradient epochs.
    pub fn desk_scale(mut self) -> Self {
        self.train_scenarios = 4;
        self.horizon = 100;
        self.admm.max_iters = 150;
        self.baseline.epochs = 150 * self.admm.epochs_per_step;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.noise.validate()?;
        self.loss.validate()?;
        self.admm.validate()?;
        self.constraints.build()?;
        let dims = self.operator.dims;
        if dims.n_in != 4 || dims.n_out != 2 {
            return Err(Error::InvalidConfig(format!(
                "the point mass needs n_in = 4 and n_out = 2, got {} and {}",
                dims.n_in, dims.n_out
            )));
        }
        if self.noise.dim() != 4 {
            return Err(Error::mismatch("noise dimension", 4, self.noise.dim()));
        }
        if self.train_scenarios == 0 || self.test_scenarios == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig(
                "scenario counts and horizon must be positive".into(),
            ));
        }
        for &omega in &self.baseline.omegas {
            self.cbf(omega).validate()?;
        }
        if !(self.baseline.eta > 0.0) {
            return Err(Error::InvalidConfig("baseline learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn cbf(&self, omega: f64) -> CbfConfig {
        let bound = match self.constraints.state.upper.get(crate::losses::VELOCITY) {
            Some(Some(b)) => *b,
            _ => 0.5,
        };
        CbfConfig {
            omega,
            zeta: self.baseline.zeta,
            bound,
        }
    }

    pub fn initial_theta(&self) -> Result<ThetaVector> {
        init_params(self.operator.dims, self.operator.init_std, self.seed)
    }

    pub fn train_bank(&self) -> Result<Vec<NoiseRealization>> {
        sample_bank(&self.noise, self.train_scenarios, self.horizon, self.seed, TRAIN_STREAM)
    }

    pub fn test_bank(&self) -> Result<Vec<NoiseRealization>> {
        sample_bank(&self.noise, self.test_scenarios, self.horizon, self.seed, TEST_STREAM)
    }

    pub fn plant_model(&self) -> Result<PointMass> {
        PointMass::new(self.plant)
    }

    fn state_set(&self) -> Result<ConvexSet> {
        self.constraints.state.to_set()
    }
}

/// Plant, bank and loss bundled for one experiment.
pub struct Bench {
    pub config: ExperimentConfig,
    pub plant: PointMass,
    pub train: Vec<NoiseRealization>,
    pub test: Vec<NoiseRealization>,
}

impl Bench {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            plant: config.plant_model()?,
            train: config.train_bank()?,
            test: config.test_bank()?,
            config,
        })
    }

    fn problem<'a>(&'a self, bank: &'a [NoiseRealization]) -> Problem<'a> {
        Problem {
            plant: &self.plant,
            kappa: self.config.operator.kappa,
            prescale: self.config.operator.prescale,
            loss: &self.config.loss,
            bank,
        }
    }

    pub fn train_problem(&self) -> Problem<'_> {
        self.problem(&self.train)
    }

    pub fn test_problem(&self) -> Problem<'_> {
        self.problem(&self.test)
    }
}

#[derive(Debug, Clone)]
pub struct AdmmRun {
    pub theta: ThetaVector,
    pub log: Vec<IterateRecord>,
    pub loss_trace: Vec<f64>,
    pub converged: bool,
    pub penalty_changes: usize,
    pub max_scaled_dual_drift: f64,
}

pub fn train_admm_pb(bench: &Bench, hook: Option<&mut IterationHook<'_>>) -> Result<AdmmRun> {
    let cfg = &bench.config;
    let constraints = cfg.constraints.build()?;
    let out = run_admm_pb(
        &cfg.admm,
        &bench.train_problem(),
        &constraints,
        cfg.initial_theta()?,
        hook,
    )?;
    Ok(AdmmRun {
        theta: out.theta,
        log: out.log,
        loss_trace: out.loss_trace,
        converged: out.converged,
        penalty_changes: out.penalty_changes,
        max_scaled_dual_drift: out.max_scaled_dual_drift,
    })
}

/// Convenience for callers that want periodic checkpoints without
/// building their own hook.
pub fn checkpoint_hook<'a>(
    every: usize,
    mut save: impl FnMut(usize, &ThetaVector) -> Result<()> + 'a,
) -> impl FnMut(&AdmmState, &IterateRecord) -> Result<()> + 'a {
    move |state, rec| {
        if every > 0 && (rec.j + 1) % every == 0 {
            save(rec.j, &state.theta)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub omega: f64,
    pub theta: ThetaVector,
    /// scenario-mean of `L + CBF` before every epoch; length `E`
    pub loss_trace: Vec<f64>,
}

/// Unconstrained full-batch Adam on `mean (L + CBF)` at a fixed learning
/// rate.
pub fn train_cbf_baseline(bench: &Bench, omega: f64) -> Result<BaselineRun> {
    let cfg = &bench.config;
    let cbf = cfg.cbf(omega);
    cbf.validate()?;
    let problem = bench.train_problem();
    let theta0 = cfg.initial_theta()?;
    let dims = theta0.dims();
    let mut adam = Adam::new(theta0.len());
    let mut params = theta0.into_vec();
    let trace = crate::admm::descend(
        &mut adam,
        &mut params,
        cfg.baseline.eta,
        cfg.baseline.epochs,
        |p, epoch| {
            let theta = ThetaVector::new(dims, p.to_vec())?;
            let e = evaluate_objective(&problem, &theta, Objective::Cbf(&cbf), true)?;
            let g = e.gradient.expect("gradient requested");
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient { iteration: 0, epoch });
            }
            Ok((e.value, e.value, g))
        },
    )?;
    Ok(BaselineRun {
        omega,
        theta: ThetaVector::new(dims, params)?,
        loss_trace: trace,
    })
}

/// Total variation `sum_i |L_i - L_{i-1}|` of a loss trace.
pub fn total_variation(trace: &[f64]) -> f64 {
    trace.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub method: String,
    pub omega: Option<f64>,
    pub seed: u64,
    /// total variation of the training-loss trace
    pub delta_loss: f64,
    /// mean LQ cost over the test scenarios
    pub lq_mean: f64,
    /// mean collision-avoidance loss over the test scenarios (unweighted)
    pub ca_mean: f64,
    /// velocity-constraint violation summed over test scenarios and time
    pub violation: f64,
    pub violation_times_lq: f64,
    pub collision_free: bool,
    pub min_obstacle_distance: f64,
    pub version: String,
}

#[derive(Debug, Clone, Copy)]
pub struct Method<'a> {
    pub name: &'a str,
    pub omega: Option<f64>,
}

pub fn test_rollouts(bench: &Bench, theta: &ThetaVector) -> Result<Vec<Rollout>> {
    closed_loop(&bench.test_problem(), theta)
}

pub fn indicators_from_rollouts(
    cfg: &ExperimentConfig,
    method: Method<'_>,
    rollouts: &[Rollout],
    trace: &[f64],
) -> Result<IndicatorReport> {
    if rollouts.is_empty() {
        return Err(Error::InvalidConfig("need at least one test scenario".into()));
    }
    let s = rollouts.len() as f64;
    let lq_mean = rollouts.iter().map(|r| lq_loss(&cfg.loss, r)).sum::<f64>() / s;
    let ca_mean = rollouts.iter().map(|r| collision_loss(&cfg.loss, r)).sum::<f64>() / s;
    let violation = violation_metric(rollouts, &cfg.state_set()?)?;
    let [ox, oy] = cfg.loss.obstacle;
    let min_d2 = rollouts
        .iter()
        .flat_map(|r| r.x.rows())
        .map(|x| (x[POSITION] - ox).powi(2) + (x[POSITION + 1] - oy).powi(2))
        .fold(f64::INFINITY, f64::min);
    let min_obstacle_distance = min_d2.sqrt();
    Ok(IndicatorReport {
        method: method.name.to_string(),
        omega: method.omega,
        seed: cfg.seed,
        delta_loss: total_variation(trace),
        lq_mean,
        ca_mean,
        violation,
        violation_times_lq: violation * lq_mean,
        collision_free: min_obstacle_distance > cfg.loss.radius,
        min_obstacle_distance,
        version: VERSION.to_string(),
    })
}

/// Rolls out every test scenario under `theta` and computes the indicators.
pub fn evaluate(bench: &Bench, method: Method<'_>, theta: &ThetaVector, trace: &[f64]) -> Result<IndicatorReport> {
    let rollouts = test_rollouts(bench, theta)?;
    indicators_from_rollouts(&bench.config, method, &rollouts, trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    /// `delta_loss * 1e5`
    pub delta_loss_e5: f64,
    pub lq_mean: f64,
    pub ca_mean: f64,
    pub violation: f64,
    pub violation_times_lq: f64,
}

impl TableRow {
    fn from_report(r: &IndicatorReport) -> Self {
        let label = match r.omega {
            Some(w) => format!("{} (omega={})", r.method, format_omega(w)),
            None => r.method.clone(),
        };
        Self {
            label,
            delta_loss_e5: r.delta_loss * 1e5,
            lq_mean: r.lq_mean,
            ca_mean: r.ca_mean,
            violation: r.violation,
            violation_times_lq: r.violation_times_lq,
        }
    }

    fn cells(&self) -> [String; 6] {
        [
            self.label.clone(),
            format!("{:.1}", self.delta_loss_e5),
            format!("{:.2}", self.lq_mean),
            format!("{:.2}", self.ca_mean),
            format!("{:.2}", self.violation),
            format!("{:.2}", self.violation_times_lq),
        ]
    }
}

fn format_omega(w: f64) -> String {
    if w >= 10.0 && w.log10().fract() == 0.0 {
        format!("1e{}", w.log10() as i32)
    } else {
        format!("{w}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<TableRow>,
}

pub const TABLE_HEADER: [&str; 6] = ["method", "dL_x1e5", "L_LQ", "L_ca", "V", "V_x_L_LQ"];

impl ComparisonTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TABLE_HEADER)?;
        for row in &self.rows {
            w.write_record(&[
                row.label.clone(),
                row.delta_loss_e5.to_string(),
                row.lq_mean.to_string(),
                row.ca_mean.to_string(),
                row.violation.to_string(),
                row.violation_times_lq.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_text(&self) -> String {
        let cells: Vec<[String; 6]> = self.rows.iter().map(TableRow::cells).collect();
        let mut widths = TABLE_HEADER.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |row: &[String]| {
            row.iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{:<w$}", c, w = widths[i])
                    } else {
                        format!("{:>w$}", c, w = widths[i])
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(&TABLE_HEADER.map(String::from));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

/// One ADMM-PB row followed by one row per baseline report.
pub fn compare(admm: &IndicatorReport, baselines: &[IndicatorReport]) -> Result<ComparisonTable> {
    if baselines.is_empty() {
        return Err(Error::EmptyBaseline);
    }
    let rows = std::iter::once(admm)
        .chain(baselines)
        .map(TableRow::from_report)
        .collect();
    Ok(ComparisonTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(method: &str, omega: Option<f64>, delta: f64) -> IndicatorReport {
        IndicatorReport {
            method: method.into(),
            omega,
            seed: 0,
            delta_loss: delta,
            lq_mean: 2.0,
            ca_mean: 0.5,
            violation: 0.25,
            violation_times_lq: 0.5,
            collision_free: true,
            min_obstacle_distance: 1.0,
            version: VERSION.into(),
        }
    }

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default().desk_scale();
        cfg.train_scenarios = 2;
        cfg.test_scenarios = 2;
        cfg.horizon = 20;
        cfg.admm.max_iters = 3;
        cfg.baseline.epochs = 4;
        cfg
    }

    #[test]
    fn defaults_and_desk_scale() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.train_scenarios, cfg.test_scenarios, cfg.horizon), (8, 5, 249));
        assert_eq!(cfg.baseline.epochs, 6900);
        assert_eq!(cfg.admm.max_iters * cfg.admm.epochs_per_step, cfg.baseline.epochs);
        let desk = cfg.desk_scale();
        assert_eq!((desk.train_scenarios, desk.horizon, desk.admm.max_iters), (4, 100, 150));
        assert_eq!(desk.baseline.epochs, 900);
    }

    #[test]
    fn config_round_trip() {
        let cfg = ExperimentConfig::default().with_seed(17);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let sparse: ExperimentConfig = serde_json::from_str(r#"{"seed": 5, "horizon": 30}"#).unwrap();
        assert_eq!(sparse.seed, 5);
        assert_eq!(sparse.horizon, 30);
        assert_eq!(sparse.admm, ExperimentConfig::default().admm);
    }

    #[test]
    fn banks_are_disjoint() {
        let cfg = ExperimentConfig::default();
        let train = cfg.train_bank().unwrap();
        let test = cfg.test_bank().unwrap();
        for a in &train {
            for b in &test {
                assert_ne!(a.w.row(0), b.w.row(0));
            }
        }
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&[1.0, 3.0, 2.0]), 3.0);
        assert_eq!(total_variation(&[4.0; 10]), 0.0);
        assert_eq!(total_variation(&[]), 0.0);
    }

    #[test]
    fn comparison_table() {
        let table = compare(&report("admm-pb", None, 7e-6), &[report("cbf", Some(1.0), 2e-5)]).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].cells()[1], "0.7");
        assert!(compare(&report("admm-pb", None, 0.0), &[]).is_err());
        let csv = table.to_csv().unwrap();
        assert!(csv.starts_with("method,dL_x1e5,L_LQ,L_ca,V,V_x_L_LQ\n"));
        assert_eq!(csv.lines().count(), 3);
        let text = table.to_text();
        assert!(text.contains("cbf (omega=1)"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn equilibrium_bank_gives_zero_indicators() {
        let mut cfg = tiny();
        cfg.noise = NoiseDistribution::equilibrium(4);
        let bench = Bench::new(cfg).unwrap();
        let run = train_admm_pb(&bench, None).unwrap();
        let rep = evaluate(
            &bench,
            Method {
                name: "admm-pb",
                omega: None,
            },
            &run.theta,
            &run.loss_trace,
        )
        .unwrap();
        assert_eq!(rep.lq_mean, 0.0);
        assert_eq!(rep.violation, 0.0);
        assert_eq!(rep.ca_mean, 0.0);
        assert_eq!(rep.delta_loss, 0.0);
    }

    #[test]
    fn baseline_trace_length_and_determinism() {
        let bench = Bench::new(tiny()).unwrap();
        let a = train_cbf_baseline(&bench, 10.0).unwrap();
        let b = train_cbf_baseline(&bench, 10.0).unwrap();
        assert_eq!(a.loss_trace.len(), 4);
        assert_eq!(a.theta, b.theta);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn baseline_single_plain_step() {
        let mut cfg = tiny();
        cfg.baseline.epochs = 1;
        let bench = Bench::new(cfg.clone()).unwrap();
        let run = train_cbf_baseline(&bench, 0.0).unwrap();
        let theta0 = cfg.initial_theta().unwrap();
        let e = evaluate_objective(&bench.train_problem(), &theta0, Objective::Boost, true).unwrap();
        let mut expected = theta0.into_vec();
        Adam::new(expected.len()).step(&mut expected, &e.gradient.unwrap(), cfg.baseline.eta);
        assert_eq!(run.theta.as_slice(), expected.as_slice());
        assert_eq!(run.loss_trace, vec![e.value]);
    }

    #[test]
    fn indicators_ignore_scenario_order() {
        let bench = Bench::new(tiny()).unwrap();
        let theta = bench.config.initial_theta().unwrap();
        let mut rolls = test_rollouts(&bench, &theta).unwrap();
        let m = Method { name: "x", omega: None };
        let a = indicators_from_rollouts(&bench.config, m, &rolls, &[]).unwrap();
        rolls.reverse();
        let b = indicators_from_rollouts(&bench.config, m, &rolls, &[]).unwrap();
        assert!((a.lq_mean - b.lq_mean).abs() <= 1e-12 * a.lq_mean);
        assert!((a.violation - b.violation).abs() <= 1e-12 * a.violation.max(1.0));
        assert_eq!(a.min_obstacle_distance, b.min_obstacle_distance);
    }

    #[test]
    fn checkpoint_hook_fires_every_k() {
        let mut cfg = tiny();
        cfg.admm.max_iters = 5;
        cfg.admm.eps_abs = 0.0;
        cfg.admm.eps_rel = 0.0;
        let bench = Bench::new(cfg).unwrap();
        let mut saved = Vec::new();
        let mut hook = checkpoint_hook(2, |j, _| {
            saved.push(j);
            Ok(())
        });
        train_admm_pb(&bench, Some(&mut hook)).unwrap();
        drop(hook);
        assert_eq!(saved, vec![1, 3]);
    }
}
