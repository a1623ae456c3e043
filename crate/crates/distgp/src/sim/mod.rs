//! Multi-agent world: agent motion, measurement generation, and the full
//! estimation loop (sense, fuse, move) for the distributed tracker, the
//! centralized oracle, and the forgetting baseline.
//!
//! Determinism: all randomness derives from `SimConfig::seed` through fixed
//! ChaCha streams — stream 0 samples the shared representative points,
//! stream `2 i + 1` drives agent i's motion, stream `2 i + 2` its
//! measurement noise. Any parallel schedule that respects the per-step
//! round barrier therefore reproduces the serial run exactly; runs of
//! different estimators under one seed see identical trajectories and
//! measurement realizations.

pub mod output;
pub mod runlog;
pub mod wind;

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::consensus::{
    build_graph, consensus_step, disagreement, is_connected, ConsensusPool, WeightScheme,
};
use crate::error::{Error, Result};
use crate::filter::{CovUpdate, FilterState, InfoState, NoiseParams, INFO_EIGENVALUE_FLOOR};
use crate::kernel::{KernelFamily, KernelSpec, PointSet};
use crate::nystrom::{build_basis, sample_representative_points, AxisBox, NystromBasis};

pub use runlog::{Checkpoint, RunKind, RunLog, SampleRecord, StepMetrics};
pub use wind::{Cloud, WindField};

/// What to do when the communication graph loses connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConnectivityPolicy {
    /// Record the step and keep going.
    #[default]
    Warn,
    /// Stop the run with an error naming the step.
    Abort,
}

impl ConnectivityPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "warn" => Some(Self::Warn),
            "abort" => Some(Self::Abort),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Warn => "warn",
            Self::Abort => "abort",
        }
    }
}

/// Full experiment configuration. [`SimConfig::default`] mirrors the
/// 16-agent scenario: Laplace kernel on a 20x20 domain, 100 representative
/// points, 600 steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_agents: usize,
    pub domain: AxisBox,
    /// Number of representative points (upper bound on the feature rank).
    pub feature_count: usize,
    pub kernel: KernelSpec,
    pub sigma_omega: f64,
    pub sigma_nu: f64,
    pub sigma_init: f64,
    /// Communication range; `None` derives 1.6x the initial grid spacing,
    /// which keeps the starting formation connected.
    pub comm_range: Option<f64>,
    pub u_max: f64,
    pub step_std: f64,
    pub sensing_period: u64,
    pub horizon: u64,
    pub seed: u64,
    pub weights: WeightScheme,
    pub connectivity: ConnectivityPolicy,
    pub rel_threshold: f64,
    /// Inflate the coefficient covariance once per sensing event instead of
    /// once per elapsed model step.
    pub alg1_literal: bool,
    pub cov_update: CovUpdate,
    pub checkpoints: Vec<u64>,
    /// Evaluation grid resolution per axis.
    pub eval_grid: usize,
    /// Ground-truth clouds; `None` uses [`WindField::default_cumulus`].
    pub clouds: Option<Vec<Cloud>>,
    /// Disable the consensus exchange (isolated agents). Testing hook.
    pub consensus_enabled: bool,
    /// Override the evenly-spaced initial formation. Testing hook.
    pub initial_positions: Option<Vec<Vec<f64>>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_agents: 16,
            domain: AxisBox::square(20.0).expect("static box"),
            feature_count: 100,
            kernel: KernelSpec::new(KernelFamily::Laplace, 2.0).expect("static kernel"),
            sigma_omega: 1e-2,
            sigma_nu: 0.1,
            sigma_init: 1.0,
            comm_range: None,
            u_max: 0.5,
            step_std: 0.3,
            sensing_period: 1,
            horizon: 600,
            seed: 1,
            weights: WeightScheme::Uniform,
            connectivity: ConnectivityPolicy::Warn,
            rel_threshold: crate::nystrom::DEFAULT_REL_THRESHOLD,
            alg1_literal: false,
            cov_update: CovUpdate::Standard,
            checkpoints: vec![50, 300, 600],
            eval_grid: 50,
            clouds: None,
            consensus_enabled: true,
            initial_positions: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::InvalidInput("agent count must be >= 1".into()));
        }
        if self.domain.dim() != 2 {
            return Err(Error::InvalidInput("the world is two-dimensional".into()));
        }
        if self.feature_count == 0 {
            return Err(Error::InvalidInput(
                "representative point count must be >= 1".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be >= 1".into()));
        }
        if self.sensing_period == 0 {
            return Err(Error::InvalidInput("sensing period must be >= 1".into()));
        }
        if self.eval_grid == 0 {
            return Err(Error::InvalidInput("evaluation grid must be >= 1".into()));
        }
        if !(self.u_max >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "u_max must be >= 0, got {}",
                self.u_max
            )));
        }
        if !(self.step_std > 0.0) {
            return Err(Error::InvalidInput(format!(
                "step_std must be > 0, got {}",
                self.step_std
            )));
        }
        if let Some(d) = self.comm_range {
            if !(d > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "communication range must be > 0, got {d}"
                )));
            }
        }
        NoiseParams::new(self.sigma_omega, self.sigma_nu)?;
        if !(self.sigma_init > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sigma_init must be > 0, got {}",
                self.sigma_init
            )));
        }
        if let Some(ps) = &self.initial_positions {
            if ps.len() != self.n_agents {
                return Err(Error::InvalidInput(format!(
                    "{} initial positions for {} agents",
                    ps.len(),
                    self.n_agents
                )));
            }
            for p in ps {
                if !self.domain.contains(p) {
                    return Err(Error::InvalidInput(format!(
                        "initial position {p:?} outside the domain"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Side length of the initial placement grid.
    fn formation_side(&self) -> usize {
        (self.n_agents as f64).sqrt().ceil() as usize
    }

    /// Communication range, derived from the formation spacing when not set.
    pub fn resolved_comm_range(&self) -> f64 {
        self.comm_range.unwrap_or_else(|| {
            let g = self.formation_side() as f64;
            let spacing = self.domain.side(0).max(self.domain.side(1)) / g;
            1.6 * spacing
        })
    }

    /// Evenly spaced starting positions (cell centers of a near-square
    /// grid), or the explicit override.
    pub fn starting_positions(&self) -> Vec<Vec<f64>> {
        if let Some(ps) = &self.initial_positions {
            return ps.clone();
        }
        let g = self.formation_side();
        let (w, h) = (self.domain.side(0), self.domain.side(1));
        (0..self.n_agents)
            .map(|k| {
                let col = (k % g) as f64;
                let row = (k / g) as f64;
                vec![
                    self.domain.lo()[0] + (col + 0.5) * w / g as f64,
                    self.domain.lo()[1] + (row + 0.5) * h / g as f64,
                ]
            })
            .collect()
    }

    /// Cell centers of the `eval_grid` x `eval_grid` evaluation lattice, in
    /// row-major order with x varying fastest.
    pub fn evaluation_grid(&self) -> PointSet {
        let g = self.eval_grid;
        let (w, h) = (self.domain.side(0), self.domain.side(1));
        let mut coords = Vec::with_capacity(g * g * 2);
        for row in 0..g {
            for col in 0..g {
                coords.push(self.domain.lo()[0] + (col as f64 + 0.5) * w / g as f64);
                coords.push(self.domain.lo()[1] + (row as f64 + 0.5) * h / g as f64);
            }
        }
        PointSet::from_flat(2, coords).expect("grid construction")
    }

    pub fn wind_field(&self) -> Result<WindField> {
        match &self.clouds {
            Some(clouds) => WindField::new(clouds.clone(), self.domain.clone()),
            None => WindField::default_cumulus(&self.domain),
        }
    }

    pub fn shared_basis(&self) -> Result<NystromBasis> {
        let points = sample_representative_points(&self.domain, self.feature_count, self.seed)?;
        build_basis(&self.kernel, &points, self.rel_threshold)
    }
}

/// Clip the control to norm `u_max`, apply single-integrator dynamics, and
/// reflect at the domain boundary.
pub fn step_dynamics(x: &[f64], u: &[f64], u_max: f64, domain: &AxisBox) -> Vec<f64> {
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if norm > u_max { u_max / norm } else { 1.0 };
    x.iter()
        .zip(u.iter())
        .enumerate()
        .map(|(axis, (xi, ui))| {
            let mut v = xi + scale * ui;
            let (lo, hi) = (domain.lo()[axis], domain.hi()[axis]);
            loop {
                if v < lo {
                    v = 2.0 * lo - v;
                } else if v > hi {
                    v = 2.0 * hi - v;
                } else {
                    break;
                }
            }
            v
        })
        .collect()
}

/// Gaussian random-walk step, N(0, step_std^2 I), before clipping.
pub fn random_walk_controller<R: Rng>(rng: &mut R, step_std: f64, dim: usize) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, step_std)
        .map_err(|e| Error::InvalidInput(format!("bad step_std {step_std}: {e}")))?;
    Ok((0..dim).map(|_| normal.sample(rng)).collect())
}

/// Noisy field observation: `f(x, t) + N(0, sigma_nu^2)`. With zero noise
/// the field value is returned exactly and the generator is untouched.
pub fn sample_function<R: Rng>(
    field: &WindField,
    x: &[f64],
    t: u64,
    sigma_nu: f64,
    rng: &mut R,
) -> f64 {
    let truth = field.eval(x, t);
    if sigma_nu == 0.0 {
        return truth;
    }
    let normal = Normal::new(0.0, sigma_nu).expect("sigma_nu validated upstream");
    truth + normal.sample(rng)
}

/// Per-point posterior mean and variance of the field over a grid, from one
/// agent's moment-form state.
pub fn field_estimate(
    state: &FilterState,
    basis: &NystromBasis,
    grid: &PointSet,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let phi = basis.features(grid)?;
    if state.dim() != basis.rank() {
        return Err(Error::DimensionMismatch(state.dim(), basis.rank()));
    }
    let means = &phi * &state.theta;
    let phi_p = &phi * &state.cov;
    let vars = DVector::from_iterator(
        grid.len(),
        phi_p
            .row_iter()
            .zip(phi.row_iter())
            .map(|(a, b)| a.dot(&b).max(0.0)),
    );
    Ok((means, vars))
}

/// Distributed Kalman tracking: every agent senses, updates its own
/// coefficient filter, and runs one consensus round per step.
pub fn run_distkp(config: &SimConfig) -> Result<RunLog> {
    run_internal(config, Mode::Distkp)
}

/// Centralized gold standard: a single filter ingests all n measurements
/// per sensing step (sequential scalar updates), with motion and noise
/// realizations identical to [`run_distkp`] under the same seed.
pub fn run_centralized_oracle(config: &SimConfig) -> Result<RunLog> {
    run_internal(config, Mode::Oracle)
}

/// Exponential-forgetting baseline: same loop as [`run_distkp`] but old
/// information is damped by `lambda` at each sensing event and the
/// covariance is never inflated.
pub fn run_forgetting_baseline(config: &SimConfig, lambda: f64) -> Result<RunLog> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "forgetting factor must lie in (0, 1], got {lambda}"
        )));
    }
    run_internal(config, Mode::Baseline(lambda))
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    Distkp,
    Oracle,
    Baseline(f64),
}

impl Mode {
    fn kind(&self) -> RunKind {
        match self {
            Mode::Distkp => RunKind::Distkp,
            Mode::Oracle => RunKind::Oracle,
            Mode::Baseline(_) => RunKind::Baseline,
        }
    }
}

/// Recover theta from an information state, flooring the information matrix
/// in place if damping has made it singular.
fn recover_theta(info: &mut InfoState) -> Result<DVector<f64>> {
    if let Some(chol) = Cholesky::new(info.info_mat.clone()) {
        return Ok(chol.solve(&info.info_vec));
    }
    info.floor_eigenvalues(INFO_EIGENVALUE_FLOOR);
    let chol = Cholesky::new(info.info_mat.clone()).ok_or_else(|| {
        Error::Numerical("information matrix unrecoverable even after flooring".into())
    })?;
    Ok(chol.solve(&info.info_vec))
}

/// Full moment-form recovery with the same flooring fallback.
fn recover_state(info: &mut InfoState, t_last: u64) -> Result<FilterState> {
    match FilterState::from_info(info, t_last) {
        Ok(s) => Ok(s),
        Err(Error::Numerical(_)) => {
            info.floor_eigenvalues(INFO_EIGENVALUE_FLOOR);
            FilterState::from_info(info, t_last)
        }
        Err(e) => Err(e),
    }
}

fn run_internal(config: &SimConfig, mode: Mode) -> Result<RunLog> {
    config.validate()?;

    let basis = config.shared_basis()?;
    let rank = basis.rank();
    let field = config.wind_field()?;
    let grid = config.evaluation_grid();
    let grid_features = basis.features(&grid)?;
    let noise = NoiseParams::new(config.sigma_omega, config.sigma_nu)?;
    let comm_range = config.resolved_comm_range();
    let n = config.n_agents;
    let centralized = matches!(mode, Mode::Oracle);
    let n_estimators = if centralized { 1 } else { n };

    let mut positions = config.starting_positions();
    let mut motion_rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(2 * i as u64 + 1);
            r
        })
        .collect();
    let mut meas_rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(2 * i as u64 + 2);
            r
        })
        .collect();

    let init = FilterState::new(rank, config.sigma_init)?;
    let mut pool = ConsensusPool::new(vec![init.to_info()?; n_estimators])?;
    let mut central = init;
    let mut last_sensed = vec![0u64; n_estimators];

    let payload = rank as u64 + (rank as u64 * (rank as u64 + 1)) / 2;
    let mut log = RunLog {
        kind: mode.kind(),
        lambda: match mode {
            Mode::Baseline(l) => Some(l),
            _ => None,
        },
        seed: config.seed,
        basis: basis.clone(),
        eval_grid: grid.clone(),
        field: field.clone(),
        metrics: Vec::with_capacity(config.horizon as usize),
        checkpoints: Vec::new(),
        samples: Vec::new(),
        final_states: Vec::new(),
        step_micros: Vec::with_capacity(config.horizon as usize),
        payload_scalars_per_message: payload,
        disconnected_steps: Vec::new(),
    };

    for t in 0..config.horizon {
        let timer = Instant::now();
        let step_label = t + 1;

        let graph = build_graph(&PointSet::from_points(2, &positions)?, comm_range)?;
        if n > 1 && !is_connected(&graph) {
            log.disconnected_steps.push(step_label);
            if config.connectivity == ConnectivityPolicy::Abort {
                return Err(Error::Disconnected { step: step_label });
            }
        }

        // Sensing.
        if t % config.sensing_period == 0 {
            match mode {
                Mode::Distkp => {
                    for i in 0..n {
                        let elapsed = if config.alg1_literal {
                            1
                        } else {
                            (t - last_sensed[i]).max(1)
                        };
                        let mut state = FilterState::from_info(&pool.states()[i], last_sensed[i])?;
                        let phi = basis.feature_map(&positions[i])?;
                        let y =
                            sample_function(&field, &positions[i], t, config.sigma_nu, &mut meas_rngs[i]);
                        state.predict_update_with(&phi, y, &noise, elapsed, config.cov_update)?;
                        pool.states_mut()[i] = state.to_info()?;
                        last_sensed[i] = t;
                        log.samples.push(SampleRecord {
                            step: step_label,
                            agent: i,
                            position: positions[i].clone(),
                            value: y,
                        });
                    }
                }
                Mode::Oracle => {
                    let elapsed = if config.alg1_literal {
                        1
                    } else {
                        (t - last_sensed[0]).max(1)
                    };
                    central.predict(config.sigma_omega, elapsed);
                    let pure_update = NoiseParams::new(0.0, config.sigma_nu)?;
                    for i in 0..n {
                        let phi = basis.feature_map(&positions[i])?;
                        let y =
                            sample_function(&field, &positions[i], t, config.sigma_nu, &mut meas_rngs[i]);
                        central.predict_update_with(&phi, y, &pure_update, 1, config.cov_update)?;
                        log.samples.push(SampleRecord {
                            step: step_label,
                            agent: i,
                            position: positions[i].clone(),
                            value: y,
                        });
                    }
                    last_sensed[0] = t;
                }
                Mode::Baseline(lambda) => {
                    for i in 0..n {
                        let phi = basis.feature_map(&positions[i])?;
                        let y =
                            sample_function(&field, &positions[i], t, config.sigma_nu, &mut meas_rngs[i]);
                        pool.states_mut()[i].forgetting_update(&phi, y, lambda, config.sigma_nu)?;
                        last_sensed[i] = t;
                        log.samples.push(SampleRecord {
                            step: step_label,
                            agent: i,
                            position: positions[i].clone(),
                            value: y,
                        });
                    }
                }
            }
        }

        // Consensus round (every step).
        let mut messages = 0u64;
        if !centralized && config.consensus_enabled && n > 1 {
            pool = consensus_step(&pool, &graph, config.weights)?;
            messages = graph.directed_message_count();
        }

        // Metrics against the field at the measurement time.
        let theta_matrix = if centralized {
            DMatrix::from_column_slice(rank, 1, central.theta.as_slice())
        } else {
            let mut cols = DMatrix::zeros(rank, n_estimators);
            for (i, info) in pool.states_mut().iter_mut().enumerate() {
                cols.set_column(i, &recover_theta(info)?);
            }
            cols
        };
        let mean_grid = &grid_features * &theta_matrix;
        let truth = DVector::from_iterator(grid.len(), grid.iter().map(|p| field.eval(p, t)));
        let mut rmse_per_agent = Vec::with_capacity(n_estimators);
        for c in 0..n_estimators {
            let mut sq = 0.0;
            for r in 0..grid.len() {
                let d = mean_grid[(r, c)] - truth[r];
                sq += d * d;
            }
            rmse_per_agent.push((sq / grid.len() as f64).sqrt());
        }
        let rmse = rmse_per_agent.iter().sum::<f64>() / n_estimators as f64;
        let agreement = if centralized { 0.0 } else { disagreement(&pool) };
        log.metrics.push(StepMetrics {
            step: step_label,
            rmse,
            disagreement: agreement,
            messages,
        });

        // Checkpoint snapshot.
        if config.checkpoints.contains(&step_label) {
            let estimates = if centralized {
                vec![central.clone()]
            } else {
                let mut out = Vec::with_capacity(n_estimators);
                for (i, info) in pool.states_mut().iter_mut().enumerate() {
                    out.push(recover_state(info, last_sensed[i])?);
                }
                out
            };
            log.checkpoints.push(Checkpoint {
                step: step_label,
                positions: positions.clone(),
                estimates,
                graph: graph.clone(),
                rmse_per_agent: rmse_per_agent.clone(),
            });
        }

        // Motion.
        for i in 0..n {
            let u = random_walk_controller(&mut motion_rngs[i], config.step_std, 2)?;
            positions[i] = step_dynamics(&positions[i], &u, config.u_max, &config.domain);
        }

        log.step_micros.push(timer.elapsed().as_micros() as u64);
    }

    log.final_states = if centralized {
        vec![central]
    } else {
        let mut out = Vec::with_capacity(n_estimators);
        for (i, info) in pool.states_mut().iter_mut().enumerate() {
            out.push(recover_state(info, last_sensed[i])?);
        }
        out
    };

    Ok(log)
}
