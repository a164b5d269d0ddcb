//! Experiment runners. Each returns a summary, one CSV row set and one trace
//! record per trial; nothing here touches the filesystem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trustgames_core::cartpole::{run_episode, CartPoleParams, CartPoleState, CartPoleStrategy, Episode};
use trustgames_core::lq::{simulate_lq, HumanKind, LqDraw, LqOutcome, LqParams, MeanSe, PlannerOptions, RobotStrategy};
use trustgames_core::{reproduce_table1, PlateGameSpec, Table1Options, Table1Row};

use crate::config::{ExperimentConfig, ExperimentId, Overrides, TrueHuman};
use crate::CliError;

pub const TABLE1_HEADER: &[&str] =
    &["formulation", "distribution", "robot_actions", "human_actions", "estimate", "estimate_label", "value_robot", "value_human"];
pub const LQ_CASE_HEADER: &[&str] = &[
    "trial", "eta", "strategy", "theta_r", "theta_h", "estimate0", "robot_cost", "human_cost", "communication_pct",
    "final_position", "theta_tilde", "planner_warning",
];
pub const LQ_MODEL_ERROR_HEADER: &[&str] = &[
    "trial", "true_human", "strategy", "theta_r", "theta_h", "estimate0", "robot_cost", "human_cost", "communication_pct",
    "final_position", "theta_tilde", "planner_warning",
];
pub const CARTPOLE_HEADER: &[&str] = &["trial", "strategy", "initial_phi", "time_upright_pct", "human_effort_pct", "final_phi"];

/// CSV column names for an experiment.
pub fn csv_header(id: ExperimentId) -> &'static [&'static str] {
    match id {
        ExperimentId::Table1 => TABLE1_HEADER,
        ExperimentId::LqCaseStudy => LQ_CASE_HEADER,
        ExperimentId::LqModelError => LQ_MODEL_ERROR_HEADER,
        ExperimentId::CartpoleHeadless => CARTPOLE_HEADER,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: ExperimentId,
    pub trials: usize,
    pub seed: u64,
    pub overrides: Overrides,
    pub results: Results,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Results {
    Table1 { rows: Vec<Table1Row<f64>> },
    LqCaseStudy { params: LqParams<f64>, conditions: Vec<EtaCondition>, planner_warnings: usize },
    LqModelError { params: LqParams<f64>, true_human: HumanKind<f64>, rows: Vec<StrategyRow>, planner_warnings: usize },
    Cartpole { params: CartPoleParams<f64>, episode_steps: usize, rows: Vec<CartpoleRow> },
}

/// Mean ± standard error of one strategy's costs over the trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: String,
    pub robot_cost: MeanSe,
    pub human_cost: MeanSe,
    pub communication_pct: MeanSe,
    pub final_abs_position: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaCondition {
    pub eta: f64,
    pub rows: Vec<StrategyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartpoleRow {
    pub strategy: CartPoleStrategy,
    pub time_upright_pct: MeanSe,
    pub human_effort_pct: MeanSe,
}

/// One robot strategy's run within an LQ trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqRun {
    /// Learning rate of the simulated human, when it learns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub strategy: String,
    pub outcome: LqOutcome<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqTrial {
    pub trial: usize,
    pub draw: LqDraw<f64>,
    pub runs: Vec<LqRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartpoleRun {
    pub strategy: CartPoleStrategy,
    pub episode: Episode<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartpoleTrial {
    pub trial: usize,
    pub initial_phi: f64,
    pub runs: Vec<CartpoleRun>,
}

/// Everything an experiment emits. `traces[k]` is trial `k`'s JSON.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub summary: Summary,
    pub csv: String,
    pub traces: Vec<String>,
}

fn solver(e: trustgames_core::Error) -> CliError {
    match e {
        trustgames_core::Error::Config(m) => CliError::Config(m),
        other => CliError::Solver(other.to_string()),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string(v).map_err(|e| CliError::Io(e.to_string()))
}

/// Runs `f` for trials `0..n` on `jobs` worker threads (all cores when
/// `None`), keeping trial order.
fn par_trials<R: Send>(n: usize, jobs: Option<usize>, f: impl Fn(usize) -> Result<R, CliError> + Sync + Send) -> Result<Vec<R>, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct CsvOut(csv::Writer<Vec<u8>>);

impl CsvOut {
    fn new(header: &[&str]) -> Result<Self, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Self(w))
    }

    fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.0.write_record(fields).map_err(|e| CliError::Io(e.to_string()))
    }

    fn finish(self) -> Result<String, CliError> {
        let bytes = self.0.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Artifacts, CliError> {
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    match cfg.id {
        ExperimentId::Table1 => table1(cfg),
        ExperimentId::LqCaseStudy => lq_case_study(cfg, jobs),
        ExperimentId::LqModelError => lq_model_error(cfg, jobs),
        ExperimentId::CartpoleHeadless => cartpole(cfg, jobs),
    }
}

fn summary(cfg: &ExperimentConfig, results: Results) -> Summary {
    Summary { experiment: cfg.id, trials: cfg.trials, seed: cfg.seed, overrides: cfg.overrides.clone(), results }
}

pub fn table1_options(o: &Overrides) -> Table1Options<f64> {
    let mut opts = Table1Options::<f64>::default();
    let std = PlateGameSpec::<f64>::standard();
    opts.spec = PlateGameSpec {
        theta_r: o.theta_r.unwrap_or(std.theta_r),
        theta_h: o.theta_h.unwrap_or(std.theta_h),
        alpha: o.alpha.unwrap_or(std.alpha),
        horizon: o.horizon.map_or(std.horizon, |h| h as usize),
    };
    opts.grid = o.grid.map_or(opts.grid, |g| g as usize);
    opts.boltzmann_a = o.boltzmann_a.unwrap_or(opts.boltzmann_a);
    opts
}

/// CSV of the six formulations.
pub fn table1_csv(rows: &[Table1Row<f64>]) -> Result<String, CliError> {
    let join = |a: &[usize]| a.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let mut out = CsvOut::new(TABLE1_HEADER)?;
    for r in rows {
        out.row(&[
            r.formulation.clone(),
            r.distribution.clone(),
            join(&r.robot_actions),
            join(&r.human_actions),
            r.estimate.to_string(),
            r.estimate_label.clone(),
            r.value_robot.to_string(),
            r.value_human.to_string(),
        ])?;
    }
    out.finish()
}

fn table1(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    let rows = reproduce_table1(&table1_options(&cfg.overrides)).map_err(solver)?;
    let csv = table1_csv(&rows)?;
    let traces = vec![to_json(&rows)?];
    Ok(Artifacts { summary: summary(cfg, Results::Table1 { rows }), csv, traces })
}

struct LqSetup {
    params: LqParams<f64>,
    planner: PlannerOptions<f64>,
}

impl LqSetup {
    fn new(o: &Overrides) -> Self {
        let mut params = LqParams::<f64>::standard();
        if let Some(s) = o.steps {
            params.steps = s as usize;
        }
        let mut planner = PlannerOptions::<f64>::default();
        if let Some(i) = o.planner_iters {
            planner.max_iters = i as usize;
        }
        if let Some(p) = o.perturbations {
            planner.perturbations = p as usize;
        }
        Self { params, planner }
    }

    /// Trial `k`'s objectives: sampled, then replaced by any fixed overrides.
    fn draw(&self, o: &Overrides, seed: u64, k: usize) -> LqDraw<f64> {
        let d = LqDraw::<f64>::sample(seed, k as u64);
        LqDraw::fixed(o.theta_r.unwrap_or(d.theta_r), o.theta_h.unwrap_or(d.theta_h), o.estimate0.unwrap_or(d.estimate0))
    }

    fn run(&self, strategy: RobotStrategy<f64>, human: HumanKind<f64>, draw: &LqDraw<f64>) -> Result<LqOutcome<f64>, CliError> {
        let mut params = self.params;
        params.theta_r = draw.theta_r;
        params.theta_h = draw.theta_h;
        simulate_lq(&params, strategy, human, draw, &self.planner).map_err(solver)
    }
}

fn strategy_row(strategy: String, runs: &[&LqOutcome<f64>]) -> StrategyRow {
    let col = |f: fn(&LqOutcome<f64>) -> f64| MeanSe::of(&runs.iter().map(|o| f(o)).collect::<Vec<_>>());
    StrategyRow {
        strategy,
        robot_cost: col(|o| o.metrics.robot_cost),
        human_cost: col(|o| o.metrics.human_cost),
        communication_pct: col(|o| o.metrics.communication_pct),
        final_abs_position: col(|o| o.trace.final_state[0].abs()),
    }
}

fn lq_fields(trial: usize, label: String, draw: &LqDraw<f64>, run: &LqRun) -> Vec<String> {
    let o = &run.outcome;
    vec![
        trial.to_string(),
        label,
        run.strategy.clone(),
        draw.theta_r.to_string(),
        draw.theta_h.to_string(),
        draw.estimate0.to_string(),
        o.metrics.robot_cost.to_string(),
        o.metrics.human_cost.to_string(),
        o.metrics.communication_pct.to_string(),
        o.trace.final_state[0].to_string(),
        fmt_opt(o.theta_tilde),
        o.planner_warning.to_string(),
    ]
}

pub const DEFAULT_CASE_ETAS: [f64; 4] = [2.5, 5.0, 10.0, 20.0];
pub const DEFAULT_ASSUMED_ETAS: [f64; 3] = [5.0, 10.0, 20.0];

fn lq_case_study(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Artifacts, CliError> {
    let o = &cfg.overrides;
    let setup = LqSetup::new(o);
    let etas = o.etas.clone().unwrap_or_else(|| DEFAULT_CASE_ETAS.to_vec());
    let trials = par_trials(cfg.trials, jobs, |k| {
        let draw = setup.draw(o, cfg.seed, k);
        let mut runs = Vec::with_capacity(3 * etas.len());
        for &eta in &etas {
            let human = HumanKind::Learn { eta };
            for strategy in [RobotStrategy::Nash, RobotStrategy::Optimistic, RobotStrategy::Trust { eta_assumed: eta }] {
                let outcome = setup.run(strategy, human, &draw)?;
                runs.push(LqRun { eta: Some(eta), strategy: strategy.label(), outcome });
            }
        }
        Ok(LqTrial { trial: k, draw, runs })
    })?;

    let mut csv = CsvOut::new(LQ_CASE_HEADER)?;
    for t in &trials {
        for run in &t.runs {
            csv.row(&lq_fields(t.trial, fmt_opt(run.eta), &t.draw, run))?;
        }
    }
    let conditions = etas
        .iter()
        .enumerate()
        .map(|(i, &eta)| {
            let rows = (0..3)
                .map(|j| {
                    let runs: Vec<_> = trials.iter().map(|t| &t.runs[3 * i + j].outcome).collect();
                    strategy_row(trials[0].runs[3 * i + j].strategy.clone(), &runs)
                })
                .collect();
            EtaCondition { eta, rows }
        })
        .collect();
    let planner_warnings = trials.iter().flat_map(|t| &t.runs).filter(|r| r.outcome.planner_warning).count();
    let traces = trials.iter().map(to_json).collect::<Result<_, _>>()?;
    let results = Results::LqCaseStudy { params: setup.params, conditions, planner_warnings };
    Ok(Artifacts { summary: summary(cfg, results), csv: csv.finish()?, traces })
}

fn true_human_kind(o: &Overrides) -> HumanKind<f64> {
    match o.true_human.unwrap_or(TrueHuman::Fixed) {
        TrueHuman::Fixed => HumanKind::Fixed,
        TrueHuman::Predict => HumanKind::Predict { lookahead: o.lookahead.map_or(trustgames_core::lq::human::DEFAULT_LOOKAHEAD, |n| n as usize) },
    }
}

fn human_label(kind: &HumanKind<f64>) -> String {
    match kind {
        HumanKind::Fixed => "fixed".into(),
        HumanKind::Predict { lookahead } => format!("predict({lookahead})"),
        HumanKind::Learn { eta } => format!("learn({eta})"),
    }
}

fn lq_model_error(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Artifacts, CliError> {
    let o = &cfg.overrides;
    let setup = LqSetup::new(o);
    let human = true_human_kind(o);
    let mut strategies = vec![RobotStrategy::Nash, RobotStrategy::Optimistic];
    let etas = o.assumed_etas.clone().unwrap_or_else(|| DEFAULT_ASSUMED_ETAS.to_vec());
    strategies.extend(etas.iter().map(|&eta_assumed| RobotStrategy::Trust { eta_assumed }));

    let trials = par_trials(cfg.trials, jobs, |k| {
        let draw = setup.draw(o, cfg.seed, k);
        let runs = strategies
            .iter()
            .map(|&s| Ok(LqRun { eta: None, strategy: s.label(), outcome: setup.run(s, human, &draw)? }))
            .collect::<Result<_, CliError>>()?;
        Ok(LqTrial { trial: k, draw, runs })
    })?;

    let mut csv = CsvOut::new(LQ_MODEL_ERROR_HEADER)?;
    for t in &trials {
        for run in &t.runs {
            csv.row(&lq_fields(t.trial, human_label(&human), &t.draw, run))?;
        }
    }
    let rows = strategies
        .iter()
        .enumerate()
        .map(|(j, s)| strategy_row(s.label(), &trials.iter().map(|t| &t.runs[j].outcome).collect::<Vec<_>>()))
        .collect();
    let planner_warnings = trials.iter().flat_map(|t| &t.runs).filter(|r| r.outcome.planner_warning).count();
    let traces = trials.iter().map(to_json).collect::<Result<_, _>>()?;
    let results = Results::LqModelError { params: setup.params, true_human: human, rows, planner_warnings };
    Ok(Artifacts { summary: summary(cfg, results), csv: csv.finish()?, traces })
}

pub const DEFAULT_INITIAL_PHI_MAX: f64 = 0.1;
/// Smallest sampled initial angle; an exactly upright pole never falls.
pub const MIN_INITIAL_PHI: f64 = 0.01;
pub const DEFAULT_EPISODE_STEPS: usize = 500;

/// Trial `k`'s initial angle: magnitude uniform in `[MIN_INITIAL_PHI, max]`
/// with a random sign, from stream `k` of `seed`.
pub fn initial_phi(seed: u64, k: usize, max: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let magnitude = if max > MIN_INITIAL_PHI { rng.random_range(MIN_INITIAL_PHI..=max) } else { max };
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

fn cartpole(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Artifacts, CliError> {
    let o = &cfg.overrides;
    let mut params = CartPoleParams::<f64>::default();
    params.t_destab = o.t_destab.unwrap_or(params.t_destab);
    params.force = o.force.unwrap_or(params.force);
    let steps = o.episode_steps.map_or(DEFAULT_EPISODE_STEPS, |s| s as usize);
    let max = o.initial_phi_max.unwrap_or(DEFAULT_INITIAL_PHI_MAX);
    let strategies = [CartPoleStrategy::Nash, CartPoleStrategy::Trust];

    let trials = par_trials(cfg.trials, jobs, |k| {
        let phi = initial_phi(cfg.seed, k, max);
        let runs = strategies
            .iter()
            .map(|&strategy| {
                let episode = run_episode(&params, strategy, CartPoleState::upright(phi), steps, |_| 0.0).map_err(solver)?;
                Ok(CartpoleRun { strategy, episode })
            })
            .collect::<Result<_, CliError>>()?;
        Ok(CartpoleTrial { trial: k, initial_phi: phi, runs })
    })?;

    let mut csv = CsvOut::new(CARTPOLE_HEADER)?;
    for t in &trials {
        for r in &t.runs {
            let m = &r.episode.metrics;
            csv.row(&[
                t.trial.to_string(),
                serde_json::to_value(r.strategy).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                t.initial_phi.to_string(),
                m.time_upright_pct.to_string(),
                m.human_effort_pct.to_string(),
                r.episode.final_state.phi.to_string(),
            ])?;
        }
    }
    let rows = strategies
        .iter()
        .enumerate()
        .map(|(j, &strategy)| {
            let col = |f: fn(&CartpoleRun) -> f64| MeanSe::of(&trials.iter().map(|t| f(&t.runs[j])).collect::<Vec<_>>());
            CartpoleRow {
                strategy,
                time_upright_pct: col(|r| r.episode.metrics.time_upright_pct),
                human_effort_pct: col(|r| r.episode.metrics.human_effort_pct),
            }
        })
        .collect();
    let traces = trials.iter().map(to_json).collect::<Result<_, _>>()?;
    let results = Results::Cartpole { params, episode_steps: steps, rows };
    Ok(Artifacts { summary: summary(cfg, results), csv: csv.finish()?, traces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_angles_are_small_and_seeded() {
        for k in 0..200 {
            let phi = initial_phi(3, k, 0.1);
            assert!((MIN_INITIAL_PHI..=0.1).contains(&phi.abs()));
            assert_eq!(phi, initial_phi(3, k, 0.1));
        }
        assert_eq!(initial_phi(3, 0, 0.0), 0.0);
    }

    #[test]
    fn fixed_overrides_replace_draws() {
        let o = Overrides { theta_r: Some(5.0), estimate0: Some(0.1), ..Default::default() };
        let setup = LqSetup::new(&o);
        let d = setup.draw(&o, 1, 4);
        assert_eq!((d.theta_r, d.estimate0), (5.0, 0.1));
        assert_eq!(d.theta_h, LqDraw::<f64>::sample(1, 4).theta_h);
    }

    #[test]
    fn error_exit_codes() {
        let singular = trustgames_core::Error::Singular { step: 0, determinant: 0.0 };
        assert_eq!(solver(singular).exit_code(), 3);
        assert_eq!(solver(trustgames_core::Error::Config("x".into())).exit_code(), 2);
        assert_eq!(CliError::Io("x".into()).exit_code(), 2);
    }

    #[test]
    fn trial_order_is_independent_of_jobs() {
        let a = par_trials(16, Some(1), |k| Ok(k * k)).unwrap();
        let b = par_trials(16, Some(4), |k| Ok(k * k)).unwrap();
        assert_eq!(a, b);
    }
}
