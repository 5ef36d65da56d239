use std::path::Path;
use std::thread;

use nalgebra::{DMatrix, DVector};

use super::config::{ExperimentConfig, Strategy};
use super::records::ExperimentRecord;
use crate::active::{select_next, SelectionProblem};
use crate::error::{check_dim, Error, Result};
use crate::estimator::{
    apply_stabilizing_noise, gradient_update, prediction_error, rls_update, EstimatorState, GradientConfig,
};
use crate::kinematics::{ChainModel, JointConfig, PARAMS_PER_JOINT};
use crate::schema::ChainDocument;
use crate::sim::{builtin_chain, measure, metrics, random_config, GroundTruth, SeededRng, Stream, BUILTIN_CHAINS};

const PROBE_ATTEMPTS_PER_PROBE: usize = 1000;

/// Everything shared by the runs of one experiment.
#[derive(Clone, Debug)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub truth: GroundTruth,
    pub model: ChainModel,
    /// Held-out configurations with visible, noiseless truth positions.
    pub probes: Vec<(JointConfig, DVector<f64>)>,
}

/// A built-in fixture name or a chain file. The experiment's observation
/// variance replaces whatever the chain carries.
pub fn resolve_chain(chain: &str, obs_variance: f64) -> Result<GroundTruth> {
    let mut gt = if BUILTIN_CHAINS.contains(&chain) {
        builtin_chain(chain)?
    } else {
        ChainDocument::load(Path::new(chain))?.ground_truth(obs_variance)?
    };
    gt.obs_variance = obs_variance;
    gt.validate()?;
    Ok(gt)
}

impl Setup {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let truth = resolve_chain(&config.chain, config.noise.obs_variance)?;
        Self::with_truth(config, truth)
    }

    pub fn with_truth(config: ExperimentConfig, truth: GroundTruth) -> Result<Self> {
        config.validate()?;
        truth.validate()?;
        if let Some(b) = &config.init.bounds {
            check_dim("init bounds", truth.params.param_dim(), b.len())?;
        }
        let model = ChainModel::for_chain(&truth.params).with_jacobian(config.jacobian);
        let probes = probe_set(&truth, config.probe_set_size, config.probe_seed)?;
        Ok(Self {
            config,
            truth,
            model,
            probes,
        })
    }

    /// Initial estimate of run `seed`.
    pub fn initial_mean(&self, seed: u64) -> DVector<f64> {
        let mut rng = SeededRng::stream(seed, Stream::Init);
        let init = &self.config.init;
        match &init.bounds {
            Some(b) => DVector::from_iterator(b.len(), b.iter().map(|[lo, hi]| rng.uniform_in(*lo, *hi))),
            None => {
                let truth = self.truth.params.to_vector();
                DVector::from_iterator(
                    truth.len(),
                    truth.iter().enumerate().map(|(i, x)| {
                        let s = if i % PARAMS_PER_JOINT < 3 { init.w_spread } else { init.v_spread };
                        x + rng.uniform_in(-s, s)
                    }),
                )
            }
        }
    }
}

fn probe_set(truth: &GroundTruth, size: usize, seed: u64) -> Result<Vec<(JointConfig, DVector<f64>)>> {
    let mut rng = SeededRng::stream(seed, Stream::Probes);
    let mut probes = Vec::with_capacity(size);
    for _ in 0..size * PROBE_ATTEMPTS_PER_PROBE {
        if probes.len() == size {
            break;
        }
        let q = random_config(&truth.joint_limits, &mut rng);
        let p = truth.true_position(&q)?;
        if truth.is_visible(&p) {
            probes.push((q, DVector::from_column_slice(p.as_slice())));
        }
    }
    if probes.len() < size {
        return Err(Error::Config(format!(
            "only {} of {size} probe configurations are visible",
            probes.len()
        )));
    }
    Ok(probes)
}

struct Run<'a> {
    setup: &'a Setup,
    strategy: Strategy,
    seed: u64,
    state: EstimatorState,
    gradient_steps: usize,
    fov_rejections: usize,
    skipped_updates: usize,
    /// Actively chosen configurations that yielded no measurement.
    rejected: Vec<JointConfig>,
    records: Vec<ExperimentRecord>,
}

struct Selection {
    config: JointConfig,
    cost: Option<f64>,
    evaluations: Option<usize>,
    seconds: Option<f64>,
}

impl Run<'_> {
    fn is_rls(&self) -> bool {
        self.strategy != Strategy::RandomGradient
    }

    fn record(&mut self, iteration: usize, sel: &Selection) -> Result<()> {
        let m = metrics(&self.state.mean, &self.setup.truth)?;
        let pe = prediction_error(&self.setup.model, &self.state.mean, &self.setup.probes)?;
        self.records.push(ExperimentRecord {
            strategy: self.strategy,
            seed: self.seed,
            iteration,
            config: sel.config.angles.clone(),
            orientation_error: m.orientation_error,
            location_error: m.location_error,
            prediction_error: pe,
            covariance_trace: self.is_rls().then(|| self.state.trace()),
            selection_cost: sel.cost,
            selection_evaluations: sel.evaluations,
            selection_seconds: sel.seconds,
            fov_rejections: self.fov_rejections,
            skipped_updates: self.skipped_updates,
            failure: None,
        });
        Ok(())
    }

    /// Errors of the current estimate, infinite where they cannot be computed.
    fn current_errors(&self) -> (f64, f64, f64) {
        let m = metrics(&self.state.mean, &self.setup.truth).ok();
        let p = prediction_error(&self.setup.model, &self.state.mean, &self.setup.probes).ok();
        (
            m.map_or(f64::INFINITY, |m| m.orientation_error),
            m.map_or(f64::INFINITY, |m| m.location_error),
            p.unwrap_or(f64::INFINITY),
        )
    }

    fn fail(&mut self, iteration: usize, err: &Error) {
        log::warn!("{} seed {} failed at iteration {iteration}: {err}", self.strategy, self.seed);
        let mut rec = match self.records.last() {
            Some(r) => r.clone(),
            None => {
                let (o, l, p) = self.current_errors();
                ExperimentRecord {
                    strategy: self.strategy,
                    seed: self.seed,
                    iteration,
                    config: Vec::new(),
                    orientation_error: o,
                    location_error: l,
                    prediction_error: p,
                    covariance_trace: None,
                    selection_cost: None,
                    selection_evaluations: None,
                    selection_seconds: None,
                    fov_rejections: self.fov_rejections,
                    skipped_updates: self.skipped_updates,
                    failure: None,
                }
            }
        };
        rec.iteration = iteration;
        rec.failure = Some(err.to_string());
        self.records.push(rec);
    }

    fn select(&self, configs: &mut SeededRng) -> Result<Selection> {
        let cfg = &self.setup.config;
        if self.strategy != Strategy::ActiveRls {
            return Ok(Selection {
                config: random_config(&self.setup.truth.joint_limits, configs),
                cost: None,
                evaluations: None,
                seconds: None,
            });
        }
        let problem = SelectionProblem {
            state: self.state.clone(),
            model: self.setup.model.clone(),
            noise: cfg.noise,
            joint_limits: self.setup.truth.joint_limits.clone(),
            fov: self.setup.truth.fov,
            optimizer: cfg.optimizer,
            record_trace: false,
            excluded: self.rejected.clone(),
            exclusion_radius: cfg.active.exclusion_radius,
        };
        let res = select_next(&problem)?;
        Ok(Selection {
            config: res.config,
            cost: Some(res.cost),
            evaluations: Some(res.evaluations),
            seconds: cfg.record_timing.then_some(res.duration),
        })
    }

    fn step(&mut self, t: usize, configs: &mut SeededRng, noise: &mut SeededRng) -> Result<()> {
        let cfg = &self.setup.config;
        let sel = self.select(configs)?;
        match measure(&self.setup.truth, &sel.config, noise)? {
            None => {
                self.fov_rejections += 1;
                if self.strategy == Strategy::ActiveRls {
                    self.rejected.push(sel.config.clone());
                }
            }
            Some(p) => {
                let y = DVector::from_column_slice(p.as_slice());
                if self.is_rls() {
                    match rls_update(&self.state, &self.setup.model, &sel.config, &y, &cfg.noise) {
                        Ok(next) => self.state = next,
                        Err(Error::DegenerateUpdate) => {
                            log::debug!("{} seed {} skipped a degenerate update at {t}", self.strategy, self.seed);
                            self.skipped_updates += 1;
                        }
                        Err(e) => return Err(e),
                    }
                } else {
                    let step_cfg = GradientConfig {
                        learning_rate: cfg.gradient.rate_at(self.gradient_steps),
                        decay: None,
                    };
                    let mean = gradient_update(&self.setup.model, &self.state.mean, &sel.config, &y, &step_cfg)?;
                    if !mean.iter().all(|v| v.is_finite()) {
                        return Err(Error::InvalidArgument("gradient estimate diverged".into()));
                    }
                    self.state.mean = mean;
                    self.gradient_steps += 1;
                }
            }
        }
        if self.is_rls() && t % cfg.noise.stabilizing_period == 0 {
            self.state = apply_stabilizing_noise(&self.state, &cfg.noise);
        }
        self.record(t, &sel)
    }
}

/// One run, one record per iteration.
/// Failures end the run with a record carrying the error.
pub fn run_seed(setup: &Setup, strategy: Strategy, seed: u64) -> Vec<ExperimentRecord> {
    let cfg = &setup.config;
    let mean = setup.initial_mean(seed);
    let n = mean.len();
    // config validation guarantees a finite mean and a non-negative variance
    let state = EstimatorState {
        mean,
        covariance: DMatrix::identity(n, n) * cfg.init.prior_variance,
    };
    let mut run = empty_run(setup, strategy, seed, state);
    let mut configs = SeededRng::stream(seed, Stream::Configs);
    let mut noise = SeededRng::stream(seed, Stream::Noise);
    for t in 1..=cfg.iterations {
        if let Err(e) = run.step(t, &mut configs, &mut noise) {
            run.fail(t, &e);
            break;
        }
    }
    run.records
}

fn empty_run(setup: &Setup, strategy: Strategy, seed: u64, state: EstimatorState) -> Run<'_> {
    Run {
        setup,
        strategy,
        seed,
        state,
        gradient_steps: 0,
        fov_rejections: 0,
        skipped_updates: 0,
        rejected: Vec::new(),
        records: Vec::with_capacity(setup.config.iterations + 1),
    }
}

/// All seeds of one strategy, run in parallel. Records come back grouped by
/// seed in configuration order, independent of scheduling.
pub fn run_strategy(setup: &Setup, strategy: Strategy) -> Vec<ExperimentRecord> {
    let seeds = &setup.config.seeds;
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len());
    let mut per_seed: Vec<Vec<ExperimentRecord>> = vec![Vec::new(); seeds.len()];
    thread::scope(|s| {
        let chunk = seeds.len().div_ceil(workers);
        for (slots, ids) in per_seed.chunks_mut(chunk).zip(seeds.chunks(chunk)) {
            s.spawn(move || {
                for (slot, &seed) in slots.iter_mut().zip(ids) {
                    *slot = run_seed(setup, strategy, seed);
                }
            });
        }
    });
    per_seed.into_iter().flatten().collect()
}

/// Runs every strategy in `strategies` (the configured one when empty).
pub fn run_experiment(config: &ExperimentConfig, strategies: &[Strategy]) -> Result<Vec<ExperimentRecord>> {
    let setup = Setup::new(config.clone())?;
    let list = if strategies.is_empty() { vec![config.strategy] } else { strategies.to_vec() };
    Ok(list.into_iter().flat_map(|s| run_strategy(&setup, s)).collect())
}
