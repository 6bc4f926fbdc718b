//! Metropolis-within-Gibbs sampler for the SPDE model.
//!
//! One iteration consists of
//! 1. redrawing the latent Gaussian values at censored and missing entries,
//! 2. a random-walk step on λ (censored model only),
//! 3. a joint random-walk proposal of (θ, b). The Kalman filter of the proposal
//!    gives its marginal likelihood, and on acceptance the latent coefficients
//!    α are redrawn by backward sampling. On rejection α is kept.
//!
//! Random numbers for iteration `i` come from streams keyed by `(seed, i)`, so
//! a chain restarted from a checkpoint continues exactly as an uninterrupted
//! run would.

use std::cell::RefCell;

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use rand::Rng;

use super::diagnostics::effective_sample_size;
use super::gibbs::{gibbs_censored, gibbs_missing, mh_lambda_step};
use super::prior::{from_sampling, log_jacobian, log_prior, to_sampling};
use super::proposal::AdaptiveProposal;
use crate::error::{Result, SpdeError};
use crate::inference::{
    backward_sample, dense_backward_sample, dense_kalman_filter, observation_matrix,
    spectral_kalman_filter, FilterInit,
};
use crate::rng::{self, mix, tags};
use crate::spde_model::{SpdeParams, SpectralSystem, PARAM_NAMES};
use crate::spectral_grid::{FrequencySelection, IncidenceMap, WavenumberGrid};
use crate::tobit::Design;

/// How observations relate to the latent Gaussian field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Response {
    /// Observations are the Gaussian values themselves.
    Gaussian,
    /// Rain amounts: zero when the latent value is non-positive, otherwise
    /// the latent value to the power λ.
    Tobit,
}

/// Observations plus everything needed to evaluate the likelihood.
#[derive(Clone, Debug)]
pub struct ChainData {
    /// `T × m`; NaN marks missing.
    pub obs: Array2<f64>,
    pub response: Response,
    pub design: Option<Design>,
    pub grid: WavenumberGrid,
    pub selection: FrequencySelection,
    /// Station cells. Without it every grid cell is observed, `m = n²`, and
    /// the diagonal spectral filter is used.
    pub incidence: Option<IncidenceMap>,
}

impl ChainData {
    pub fn validate(&self) -> Result<()> {
        let m = match &self.incidence {
            Some(h) => h.len(),
            None => self.grid.num_slots(),
        };
        if self.obs.ncols() != m {
            return Err(SpdeError::invalid(format!(
                "observations have {} columns, the observation layout has {m}",
                self.obs.ncols()
            )));
        }
        if let Some(d) = &self.design {
            if d.columns.iter().any(|c| c.dim() != self.obs.dim()) {
                return Err(SpdeError::invalid("design columns do not match the observations"));
            }
        }
        if self.obs.nrows() == 0 {
            return Err(SpdeError::invalid("no observation times"));
        }
        if self.response == Response::Tobit && self.obs.iter().any(|&v| v < 0.0) {
            return Err(SpdeError::invalid("negative rain amount"));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.design.as_ref().map_or(0, |d| d.p())
    }
}

#[derive(Clone, Debug)]
pub struct ChainConfig {
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    /// Parameters that are sampled; the others stay at their initial values.
    pub free: [bool; 9],
    pub adapt: bool,
    pub adapt_every: u64,
    /// Minimum number of recorded draws before the covariance is refit.
    pub adapt_start: u64,
    pub global_scale: bool,
    pub target_accept: f64,
    /// Initial random-walk standard deviations, free parameters first (on
    /// their sampling scale), then the regression coefficients.
    pub initial_sd: Option<Vec<f64>>,
    pub jitter: f64,
    pub sample_lambda: bool,
    pub lambda_sd: f64,
    pub delta: f64,
    pub filter_init: FilterInit,
    /// Keep `α(t_T)` of every retained draw, for forecasting.
    pub keep_alpha: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 10_000,
            burn_in: 2_000,
            thin: 1,
            seed: 1,
            free: [true; 9],
            adapt: true,
            adapt_every: 50,
            adapt_start: 200,
            global_scale: true,
            target_accept: 0.25,
            initial_sd: None,
            jitter: 1e-8,
            sample_lambda: true,
            lambda_sd: 0.02,
            delta: 1.0,
            filter_init: FilterInit::Innovation,
            keep_alpha: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(SpdeError::invalid("thinning interval must be at least 1"));
        }
        if self.burn_in > self.iterations {
            return Err(SpdeError::invalid(format!(
                "burn-in {} exceeds the {} iterations",
                self.burn_in, self.iterations
            )));
        }
        if self.adapt_every == 0 {
            return Err(SpdeError::invalid("adapt_every must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tallies {
    pub joint_accepted: u64,
    pub joint_proposed: u64,
    /// Counts after burn-in only.
    pub joint_accepted_post: u64,
    pub joint_proposed_post: u64,
    pub lambda_accepted: u64,
    pub lambda_proposed: u64,
    pub window_accepted: u64,
    pub window_proposed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    /// Number of completed iterations.
    pub iteration: u64,
    pub theta: SpdeParams,
    pub b: Vec<f64>,
    pub lambda: f64,
    /// `T × K` latent spectral coefficients.
    pub alpha: Array2<f64>,
    /// `T × m` latent Gaussian values with censored and missing entries filled in.
    pub w: Array2<f64>,
    pub proposal: AdaptiveProposal,
    pub tallies: Tallies,
}

/// Retained draws of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSample {
    /// Column names: the nine SPDE parameters, `b1..bp`, `lambda`, `loglik`.
    pub names: Vec<String>,
    pub draws: Vec<Vec<f64>>,
    /// `α(t_T)` per retained draw when requested.
    pub final_alpha: Vec<Vec<f64>>,
}

impl PosteriorSample {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(self.draws.iter().map(|d| d[j]).collect())
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Empirical quantile (linear interpolation) of one column.
    pub fn quantile(&self, name: &str, q: f64) -> Option<f64> {
        let mut v = self.column(name)?;
        if v.is_empty() {
            return None;
        }
        v.sort_by(|a, b| a.total_cmp(b));
        let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport {
    pub sample: PosteriorSample,
    /// Joint acceptance rate after burn-in (over all iterations if there is
    /// no post-burn-in period).
    pub acceptance: f64,
    pub lambda_acceptance: f64,
    pub ess: Vec<(String, f64)>,
    /// Log-likelihood at every iteration.
    pub loglik_trace: Vec<f64>,
}

enum Engine {
    Spectral,
    Dense(DMatrix<f64>),
}

/// Result of evaluating a parameter value.
struct Evaluation {
    system: SpectralSystem,
    loglik: f64,
    filter: FilterKind,
}

enum FilterKind {
    Spectral(crate::inference::FilterOutput),
    Dense(crate::inference::DenseFilterOutput),
}

/// Stream offsets within one iteration.
const S_CENSORED: u64 = 0;
const S_MISSING: u64 = 1;
const S_LAMBDA: u64 = 2;
const S_PROPOSE: u64 = 3;
const S_ACCEPT: u64 = 4;
const S_FFBS: u64 = 5;
const STREAMS_PER_ITER: u64 = 8;

pub struct Sampler {
    pub data: ChainData,
    pub config: ChainConfig,
    pub state: ChainState,
    pub sample: PosteriorSample,
    pub loglik_trace: Vec<f64>,
    engine: Engine,
    missing: Array2<bool>,
    censored: Array2<bool>,
    free_idx: Vec<usize>,
    /// Log-likelihood of the current state, invalidated whenever `w` changes.
    current_loglik: Option<f64>,
    /// Forward transform of `w`, under the same invalidation rule.
    spec_w: RefCell<Option<Array2<f64>>>,
    /// Forward transforms of the design columns.
    spec_x: Vec<Array2<f64>>,
}

fn sample_names(p: usize) -> Vec<String> {
    let mut names: Vec<String> = PARAM_NAMES.iter().map(|s| s.to_string()).collect();
    for j in 0..p {
        names.push(format!("b{}", j + 1));
    }
    names.push("lambda".into());
    names.push("loglik".into());
    names
}

impl Sampler {
    /// Starts a chain at `theta`, `b`, `lambda` with `α = 0`.
    pub fn new(
        data: ChainData,
        config: ChainConfig,
        theta: SpdeParams,
        b: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        data.validate()?;
        config.validate()?;
        theta.validate()?;
        if b.len() != data.p() {
            return Err(SpdeError::invalid(format!(
                "{} regression coefficients for {} design columns",
                b.len(),
                data.p()
            )));
        }
        if !log_prior(&theta, &b, lambda).is_finite() {
            return Err(SpdeError::invalid("initial value lies outside the prior support"));
        }
        let free_idx: Vec<usize> = (0..9).filter(|&i| config.free[i]).collect();
        if config.free[3] && theta.rho1 == 0.0 {
            return Err(SpdeError::invalid("rho1 = 0 must be held fixed"));
        }
        let d = free_idx.len() + b.len();
        let initial_sd = match &config.initial_sd {
            Some(sd) if sd.len() == d => sd.clone(),
            Some(sd) => {
                return Err(SpdeError::invalid(format!(
                    "{} initial proposal sds for {d} sampled coordinates",
                    sd.len()
                )))
            }
            None => {
                let mut sd: Vec<f64> = free_idx
                    .iter()
                    .map(|&i| if i == 5 { 0.05 } else if i == 6 || i == 7 { 0.01 } else { 0.05 })
                    .collect();
                sd.extend(std::iter::repeat_n(0.05, b.len()));
                sd
            }
        };
        let system = SpectralSystem::with_selection(&data.grid, &theta, config.delta, &data.selection)?;
        let steps = data.obs.nrows();
        let (missing, censored) = classify(&data);
        let mut w = data.obs.clone();
        if data.response == Response::Tobit {
            w.zip_mut_with(&data.obs, |wv, &y| {
                *wv = if y.is_nan() || y <= 0.0 { 0.0 } else { y.powf(1.0 / lambda) };
            });
        } else {
            w.mapv_inplace(|v| if v.is_nan() { 0.0 } else { v });
        }
        let engine = match &data.incidence {
            Some(h) => Engine::Dense(observation_matrix(&data.grid, Some(h), &system)),
            None => Engine::Spectral,
        };
        let spec_x = match (&engine, &data.design) {
            (Engine::Spectral, Some(d)) => d
                .columns
                .iter()
                .map(|c| data.grid.forward_rows(c))
                .collect::<Result<Vec<_>>>()?,
            _ => Vec::new(),
        };
        let p = b.len();
        let state = ChainState {
            iteration: 0,
            theta,
            b,
            lambda,
            alpha: Array2::zeros((steps, system.dim())),
            w,
            proposal: AdaptiveProposal::new(&initial_sd, config.jitter),
            tallies: Tallies::default(),
        };
        Ok(Sampler {
            data,
            config,
            state,
            sample: PosteriorSample {
                names: sample_names(p),
                draws: Vec::new(),
                final_alpha: Vec::new(),
            },
            loglik_trace: Vec::new(),
            engine,
            missing,
            censored,
            free_idx,
            current_loglik: None,
            spec_w: RefCell::new(None),
            spec_x,
        })
    }

    /// Continues a chain from a saved state and the draws retained so far.
    pub fn resume(
        data: ChainData,
        config: ChainConfig,
        state: ChainState,
        sample: PosteriorSample,
        loglik_trace: Vec<f64>,
    ) -> Result<Self> {
        let mut s = Sampler::new(
            data,
            config,
            state.theta,
            state.b.clone(),
            state.lambda,
        )?;
        if state.alpha.dim() != s.state.alpha.dim() || state.w.dim() != s.state.w.dim() {
            return Err(SpdeError::invalid("checkpoint does not match the data dimensions"));
        }
        s.state = state;
        s.sample = sample;
        s.loglik_trace = loglik_trace;
        Ok(s)
    }

    /// Replaces the observations, e.g. for successive-conditional testing.
    /// Latent values at observed entries are reset from the new data.
    pub fn set_observations(&mut self, obs: Array2<f64>) -> Result<()> {
        if obs.dim() != self.data.obs.dim() {
            return Err(SpdeError::invalid("new observations change the data dimensions"));
        }
        self.data.obs = obs;
        let (missing, censored) = classify(&self.data);
        self.missing = missing;
        self.censored = censored;
        let lambda = self.state.lambda;
        let resp = self.data.response;
        let obs = &self.data.obs;
        let w = &mut self.state.w;
        for ((wv, &y), (&m, &c)) in w
            .iter_mut()
            .zip(obs.iter())
            .zip(self.missing.iter().zip(self.censored.iter()))
        {
            if !m && !c {
                *wv = if resp == Response::Tobit { y.powf(1.0 / lambda) } else { y };
            }
        }
        self.invalidate();
        Ok(())
    }

    fn invalidate(&mut self) {
        self.current_loglik = None;
        *self.spec_w.get_mut() = None;
    }

    /// Spectral residual `Φᵀ(w − Xb)`, reusing the transforms of `w` and `X`.
    fn spectral_residual(&self, b: &[f64]) -> Result<Array2<f64>> {
        let mut cache = self.spec_w.borrow_mut();
        if cache.is_none() {
            *cache = Some(self.data.grid.forward_rows(&self.state.w)?);
        }
        let mut spec = cache.as_ref().expect("filled above").clone();
        for (sx, &bj) in self.spec_x.iter().zip(b) {
            spec.scaled_add(-bj, sx);
        }
        Ok(spec)
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free_idx
    }

    /// Current point on the random-walk scale: free parameters, then b.
    pub fn sampling_vector(&self, theta: &SpdeParams, b: &[f64]) -> Vec<f64> {
        let a = theta.to_array();
        let mut x: Vec<f64> = self.free_idx.iter().map(|&i| to_sampling(i, a[i])).collect();
        x.extend_from_slice(b);
        x
    }

    fn decode(&self, x: &[f64]) -> (SpdeParams, Vec<f64>) {
        let mut a = self.state.theta.to_array();
        for (k, &i) in self.free_idx.iter().enumerate() {
            a[i] = from_sampling(i, x[k]);
        }
        (SpdeParams::from_array(&a), x[self.free_idx.len()..].to_vec())
    }

    /// Latent Gaussian values minus the regression mean.
    fn residual(&self, b: &[f64]) -> Array2<f64> {
        let mut r = self.state.w.clone();
        if let Some(d) = &self.data.design {
            for (col, &bj) in d.columns.iter().zip(b) {
                r.scaled_add(-bj, col);
            }
        }
        r
    }

    fn evaluate(&self, theta: &SpdeParams, b: &[f64]) -> Result<Evaluation> {
        let system =
            SpectralSystem::with_selection(&self.data.grid, theta, self.config.delta, &self.data.selection)?;
        match &self.engine {
            Engine::Spectral => {
                let spec = self.spectral_residual(b)?;
                let f = spectral_kalman_filter(&spec, &system, theta.tau2, self.config.filter_init)?;
                Ok(Evaluation {
                    loglik: f.loglik,
                    system,
                    filter: FilterKind::Spectral(f),
                })
            }
            Engine::Dense(a) => {
                let resid = self.residual(b);
                let f = dense_kalman_filter(&resid, a, &system, theta.tau2, self.config.filter_init)?;
                Ok(Evaluation {
                    loglik: f.loglik,
                    system,
                    filter: FilterKind::Dense(f),
                })
            }
        }
    }

    /// Log-likelihood `log p(w | θ, b)` of the current latent values.
    pub fn log_likelihood(&self, theta: &SpdeParams, b: &[f64]) -> Result<f64> {
        Ok(self.evaluate(theta, b)?.loglik)
    }

    /// Unnormalized log posterior of (θ, b) on the sampling scale with λ and
    /// the latent values held fixed: likelihood, prior and Jacobian.
    pub fn log_target(&self, theta: &SpdeParams, b: &[f64]) -> Result<f64> {
        let lp = log_prior(theta, b, self.state.lambda);
        if !lp.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.log_likelihood(theta, b)? + lp + log_jacobian(theta, &self.config.free))
    }

    /// `Φα` at the observation layout, `T × m`.
    pub fn latent_field(&self, alpha: &Array2<f64>) -> Result<Array2<f64>> {
        match &self.engine {
            Engine::Spectral => {
                let mut full = Array2::zeros((alpha.nrows(), self.data.grid.num_slots()));
                for (p, &s) in self.data.selection.kept.iter().enumerate() {
                    full.column_mut(s).assign(&alpha.column(p));
                }
                self.data.grid.inverse_rows(&full)
            }
            Engine::Dense(a) => {
                let steps = alpha.nrows();
                let mut out = Array2::zeros((steps, a.nrows()));
                for (t, row) in alpha.axis_iter(Axis(0)).enumerate() {
                    let x = nalgebra::DVector::from_iterator(row.len(), row.iter().copied());
                    let y = a * x;
                    for j in 0..a.nrows() {
                        out[[t, j]] = y[j];
                    }
                }
                Ok(out)
            }
        }
    }

    fn regression_mean(&self, b: &[f64]) -> Option<Array2<f64>> {
        self.data.design.as_ref().map(|d| d.mean(b))
    }

    fn stream(&self, offset: u64) -> rand_chacha::ChaCha8Rng {
        rng::stream(
            self.config.seed,
            tags::MCMC,
            self.state.iteration * STREAMS_PER_ITER + offset,
        )
    }

    fn gibbs_pass(&mut self) -> Result<()> {
        let any_missing = self.missing.iter().any(|&m| m);
        let any_censored = self.censored.iter().any(|&c| c);
        if !any_missing && !any_censored {
            return Ok(());
        }
        let mut mean = self.latent_field(&self.state.alpha)?;
        if let Some(xb) = self.regression_mean(&self.state.b) {
            mean += &xb;
        }
        let mean = mean.as_standard_layout().to_owned();
        let tau2 = self.state.theta.tau2;
        let w = self
            .state
            .w
            .as_slice_mut()
            .ok_or_else(|| SpdeError::invalid("latent values are not contiguous"))?;
        if any_censored {
            let mut rng = rng::stream(
                self.config.seed,
                tags::MCMC,
                self.state.iteration * STREAMS_PER_ITER + S_CENSORED,
            );
            gibbs_censored(
                &mut rng,
                w,
                mean.as_slice().expect("standard layout"),
                self.censored.as_slice().expect("standard layout"),
                tau2,
            );
        }
        if any_missing {
            let mut rng = rng::stream(
                self.config.seed,
                tags::MCMC,
                self.state.iteration * STREAMS_PER_ITER + S_MISSING,
            );
            gibbs_missing(
                &mut rng,
                w,
                mean.as_slice().expect("standard layout"),
                self.missing.as_slice().expect("standard layout"),
                tau2,
            );
        }
        self.invalidate();
        Ok(())
    }

    fn lambda_pass(&mut self) -> Result<()> {
        if self.data.response != Response::Tobit || !self.config.sample_lambda {
            return Ok(());
        }
        let mut mean = self.latent_field(&self.state.alpha)?;
        if let Some(xb) = self.regression_mean(&self.state.b) {
            mean += &xb;
        }
        let mut y_pos = Vec::new();
        let mut m_pos = Vec::new();
        for (&y, &m) in self.data.obs.iter().zip(mean.iter()) {
            if y > 0.0 {
                y_pos.push(y);
                m_pos.push(m);
            }
        }
        if y_pos.is_empty() {
            return Ok(());
        }
        let mut rng = self.stream(S_LAMBDA);
        let (lambda, accepted) = mh_lambda_step(
            &mut rng,
            self.state.lambda,
            self.config.lambda_sd,
            &y_pos,
            &m_pos,
            self.state.theta.tau2,
        );
        self.state.tallies.lambda_proposed += 1;
        if accepted {
            self.state.tallies.lambda_accepted += 1;
            self.state.lambda = lambda;
            let inv = 1.0 / lambda;
            self.state.w.zip_mut_with(&self.data.obs, |w, &y| {
                if y > 0.0 {
                    *w = y.powf(inv);
                }
            });
            self.invalidate();
        }
        Ok(())
    }

    fn draw_alpha(&self, eval: &Evaluation) -> Result<Array2<f64>> {
        let seed = mix(
            self.config.seed,
            self.state.iteration * STREAMS_PER_ITER + S_FFBS,
        );
        match &eval.filter {
            FilterKind::Spectral(f) => backward_sample(f, &eval.system, seed),
            FilterKind::Dense(f) => dense_backward_sample(f, &eval.system, seed),
        }
    }

    fn joint_pass(&mut self) -> Result<bool> {
        let x = self.sampling_vector(&self.state.theta, &self.state.b);
        if x.is_empty() {
            return Ok(false);
        }
        let cur_ll = match self.current_loglik {
            Some(v) => v,
            None => {
                let v = self.log_likelihood(&self.state.theta, &self.state.b)?;
                self.current_loglik = Some(v);
                v
            }
        };
        let cur = cur_ll
            + log_prior(&self.state.theta, &self.state.b, self.state.lambda)
            + log_jacobian(&self.state.theta, &self.config.free);
        let mut rng = self.stream(S_PROPOSE);
        let xp = self.state.proposal.propose(&mut rng, &x);
        let (theta_p, b_p) = self.decode(&xp);
        let lp = log_prior(&theta_p, &b_p, self.state.lambda);
        let mut accepted = false;
        if lp.is_finite() {
            // Proposals where the filter breaks down are rejected.
            if let Ok(eval) = self.evaluate(&theta_p, &b_p) {
                let prop = eval.loglik + lp + log_jacobian(&theta_p, &self.config.free);
                let mut urng = self.stream(S_ACCEPT);
                let u: f64 = urng.random();
                if prop.is_finite() && u.ln() < prop - cur {
                    self.state.alpha = self.draw_alpha(&eval)?;
                    self.state.theta = theta_p;
                    self.state.b = b_p;
                    self.current_loglik = Some(eval.loglik);
                    accepted = true;
                }
            }
        }
        let t = &mut self.state.tallies;
        t.joint_proposed += 1;
        t.window_proposed += 1;
        if self.state.iteration >= self.config.burn_in {
            t.joint_proposed_post += 1;
        }
        if accepted {
            t.joint_accepted += 1;
            t.window_accepted += 1;
            if self.state.iteration >= self.config.burn_in {
                t.joint_accepted_post += 1;
            }
        }
        Ok(accepted)
    }

    fn adapt_pass(&mut self) {
        let it = self.state.iteration;
        if !self.config.adapt || it >= self.config.burn_in {
            return;
        }
        let x = self.sampling_vector(&self.state.theta, &self.state.b);
        if x.is_empty() {
            return;
        }
        self.state.proposal.record(&x);
        if (it + 1) % self.config.adapt_every == 0 {
            if self.state.proposal.history.count >= self.config.adapt_start {
                self.state.proposal.adapt();
            }
            if self.config.global_scale {
                let t = &self.state.tallies;
                let rate = t.window_accepted as f64 / t.window_proposed.max(1) as f64;
                self.state.proposal.update_scale(rate, self.config.target_accept);
            }
            self.state.tallies.window_accepted = 0;
            self.state.tallies.window_proposed = 0;
        }
    }

    /// Runs one full iteration.
    pub fn step(&mut self) -> Result<()> {
        self.gibbs_pass()?;
        self.lambda_pass()?;
        self.joint_pass()?;
        self.adapt_pass();
        let ll = match self.current_loglik {
            Some(v) => v,
            None => {
                let v = self.log_likelihood(&self.state.theta, &self.state.b)?;
                self.current_loglik = Some(v);
                v
            }
        };
        if !ll.is_finite() {
            return Err(SpdeError::degenerate(format!(
                "non-finite log-likelihood at iteration {}: state {:?}",
                self.state.iteration, self.state.theta
            )));
        }
        self.loglik_trace.push(ll);
        let it = self.state.iteration;
        if it >= self.config.burn_in && (it - self.config.burn_in) % self.config.thin == 0 {
            let mut row: Vec<f64> = self.state.theta.to_array().to_vec();
            row.extend_from_slice(&self.state.b);
            row.push(self.state.lambda);
            row.push(ll);
            self.sample.draws.push(row);
            if self.config.keep_alpha {
                let last = self.state.alpha.nrows() - 1;
                self.sample.final_alpha.push(self.state.alpha.row(last).to_vec());
            }
        }
        self.state.iteration += 1;
        Ok(())
    }

    /// Runs until `config.iterations` iterations are complete.
    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.config.iterations)
    }

    /// Runs until `stop` iterations are complete (or the configured total).
    pub fn run_until(&mut self, stop: u64) -> Result<()> {
        let stop = stop.min(self.config.iterations);
        while self.state.iteration < stop {
            self.step()?;
        }
        Ok(())
    }

    pub fn report(&self) -> ChainReport {
        let t = &self.state.tallies;
        let acceptance = if t.joint_proposed_post > 0 {
            t.joint_accepted_post as f64 / t.joint_proposed_post as f64
        } else {
            t.joint_accepted as f64 / t.joint_proposed.max(1) as f64
        };
        let lambda_acceptance = t.lambda_accepted as f64 / t.lambda_proposed.max(1) as f64;
        let ess = self
            .sample
            .names
            .iter()
            .map(|n| {
                let col = self.sample.column(n).unwrap_or_default();
                (n.clone(), effective_sample_size(&col))
            })
            .collect();
        ChainReport {
            sample: self.sample.clone(),
            acceptance,
            lambda_acceptance,
            ess,
            loglik_trace: self.loglik_trace.clone(),
        }
    }
}

fn classify(data: &ChainData) -> (Array2<bool>, Array2<bool>) {
    let missing = data.obs.mapv(|v| v.is_nan());
    let censored = match data.response {
        Response::Tobit => data.obs.mapv(|v| v == 0.0),
        Response::Gaussian => data.obs.mapv(|_| false),
    };
    (missing, censored)
}

/// Runs a chain from the given start and returns its report.
pub fn run_chain(
    data: ChainData,
    config: ChainConfig,
    theta: SpdeParams,
    b: Vec<f64>,
    lambda: f64,
) -> Result<ChainReport> {
    let mut s = Sampler::new(data, config, theta, b, lambda)?;
    s.run()?;
    Ok(s.report())
}

/// Starting point used when none is given: mid-range values on the unit
/// domain with a nugget of `tau2`.
pub fn default_start(tau2: f64) -> SpdeParams {
    SpdeParams {
        rho0: 0.1,
        sigma2: 1.0,
        zeta: 0.1,
        rho1: 0.05,
        gamma: 1.0,
        psi: std::f64::consts::FRAC_PI_4,
        mu: [0.0, 0.0],
        tau2,
    }
}
