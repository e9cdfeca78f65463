//! Ground-truth problems and covariate/noise streams.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, sym_eigendecompose, Mat, Rng, Stream};

/// Ground truth known to the simulator; estimators never read it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub dim: usize,
    pub arms: Vec<Vec<f64>>,
    pub sigma: f64,
    pub support: Option<Vec<usize>>,
    pub lambda_min: f64,
    pub lambda_max: Option<f64>,
    pub lambda_max_s_off: Option<f64>,
    pub lambda_max_1_off: Option<f64>,
    pub margin: Option<f64>,
    pub optimal_arms: Option<Vec<usize>>,
}

impl ProblemSpec {
    pub fn regression(beta: Vec<f64>, sigma: f64) -> Self {
        Self::bandit(vec![beta], sigma)
    }

    /// Sparse regression with `values[k]` at coordinate `support[k]`.
    pub fn sparse(dim: usize, support: &[usize], values: &[f64], sigma: f64) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::InvalidProblem(
                "support and values differ in length".into(),
            ));
        }
        let mut beta = vec![0.0; dim];
        for (&i, &v) in support.iter().zip(values) {
            if i >= dim {
                return Err(Error::InvalidProblem(format!(
                    "support index {i} out of range for d = {dim}"
                )));
            }
            beta[i] = v;
        }
        let mut s: Vec<usize> = support.to_vec();
        s.sort_unstable();
        s.dedup();
        let mut spec = Self::regression(beta, sigma);
        spec.support = Some(s);
        spec.validate()?;
        Ok(spec)
    }

    pub fn bandit(arms: Vec<Vec<f64>>, sigma: f64) -> Self {
        let dim = arms.first().map_or(0, Vec::len);
        Self {
            dim,
            arms,
            sigma,
            support: None,
            lambda_min: 1.0,
            lambda_max: None,
            lambda_max_s_off: None,
            lambda_max_1_off: None,
            margin: None,
            optimal_arms: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProblem(m));
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.arms.is_empty() {
            return bad("at least one arm is required".into());
        }
        if let Some(a) = self.arms.iter().find(|a| a.len() != self.dim) {
            return bad(format!(
                "arm of length {} in a d = {} problem",
                a.len(),
                self.dim
            ));
        }
        if self.arms.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma = {} must be >= 0", self.sigma));
        }
        if !(self.lambda_min > 0.0) {
            return bad(format!("lambda_min = {} must be > 0", self.lambda_min));
        }
        if let Some(s) = &self.support {
            if s.iter().any(|&i| i >= self.dim) {
                return bad("support index out of range".into());
            }
            let nonzero = self
                .beta()
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i);
            if let Some(i) = nonzero.into_iter().find(|i| !s.contains(i)) {
                return bad(format!(
                    "coordinate {i} is nonzero but outside the declared support"
                ));
            }
        }
        if let Some(h) = self.margin {
            if !(h > 0.0) {
                return bad(format!("margin h = {h} must be > 0"));
            }
        }
        if let Some(a) = &self.optimal_arms {
            if a.iter().any(|&i| i >= self.arms.len()) {
                return bad("optimal arm index out of range".into());
            }
        }
        Ok(())
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    /// Regression parameter (the first arm).
    pub fn beta(&self) -> &[f64] {
        &self.arms[0]
    }

    pub fn sparsity(&self) -> Option<usize> {
        self.support.as_ref().map(Vec::len)
    }

    pub fn with_lambdas(mut self, lambda_min: f64, lambda_max: Option<f64>) -> Self {
        self.lambda_min = lambda_min;
        self.lambda_max = lambda_max;
        self
    }
}

pub fn emit_regression_obs(spec: &ProblemSpec, x: &[f64], xi: f64) -> f64 {
    dot(x, spec.beta()) + xi
}

pub fn emit_bandit_reward(spec: &ProblemSpec, x: &[f64], arm: usize, xi: f64) -> Result<f64> {
    let beta = spec.arms.get(arm).ok_or(Error::ArmOutOfRange {
        arm,
        k: spec.num_arms(),
    })?;
    Ok(dot(x, beta) + xi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateKind {
    /// N(0, Sigma) with `Sigma_ij = correlation^|i-j|`.
    IidGaussian { correlation: f64 },
    /// `X_t = a_t X_{t-1}/||X_{t-1}|| + E_t` with Rademacher `a_t`.
    SphereAr,
    /// `X_t = sum_i nu_{t,i} X_{t-1-i} + E_t` over a bounded window.
    WeightedHistory { window: usize },
}

impl CovariateKind {
    pub fn iid() -> Self {
        Self::IidGaussian { correlation: 0.0 }
    }

    /// Bounds `(lambda_min, lambda_max)` on the eigenvalues of `E[X X^T]`.
    /// Exact for Gaussian and sphere-AR covariates, conservative for weighted history.
    pub fn second_moment_bounds(&self, dim: usize) -> Result<(f64, f64)> {
        match *self {
            Self::IidGaussian { correlation: 0.0 } => Ok((1.0, 1.0)),
            Self::IidGaussian { correlation } => {
                let m = Mat::from_fn(dim, |i, j| correlation.powi((i as i32 - j as i32).abs()));
                let e = sym_eigendecompose(&m, 1e-13)?;
                Ok((e.values[dim - 1], e.values[0]))
            }
            Self::SphereAr => Ok((1.0 + 1.0 / dim as f64, 1.0 + 1.0 / dim as f64)),
            Self::WeightedHistory { window } => {
                // each past term adds E[nu^2] <= 1/48 times the stationary second moment
                let load = window as f64 / 48.0;
                Ok((
                    1.0,
                    if load < 1.0 {
                        1.0 / (1.0 - load)
                    } else {
                        f64::INFINITY
                    },
                ))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitKind {
    #[default]
    Gaussian,
    Sphere,
}

pub const DEFAULT_HISTORY_WINDOW: usize = 16;

/// One sphere-AR step with the sign and innovation supplied.
pub fn sphere_ar_step(prev: &[f64], a: f64, innovation: &[f64]) -> Vec<f64> {
    let r = norm(prev);
    let scale = if r > 0.0 { a / r } else { 0.0 };
    prev.iter()
        .zip(innovation)
        .map(|(p, e)| scale * p + e)
        .collect()
}

#[derive(Debug, Clone)]
pub struct CovariateProcess {
    kind: CovariateKind,
    dim: usize,
    init: InitKind,
    history: VecDeque<Vec<f64>>,
    t: u64,
}

impl CovariateProcess {
    pub fn new(kind: CovariateKind, dim: usize, init: InitKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidProblem(
                "covariate dimension must be >= 1".into(),
            ));
        }
        match kind {
            CovariateKind::IidGaussian { correlation } if !(correlation.abs() < 1.0) => {
                return Err(Error::InvalidProblem(format!(
                    "correlation {correlation} must lie in (-1, 1)"
                )));
            }
            CovariateKind::WeightedHistory { window: 0 } => {
                return Err(Error::InvalidProblem("history window must be >= 1".into()));
            }
            _ => {}
        }
        Ok(Self {
            kind,
            dim,
            init,
            history: VecDeque::new(),
            t: 0,
        })
    }

    /// Starts from a given previous covariate instead of a random X_0.
    pub fn with_history(mut self, prev: Vec<f64>) -> Self {
        assert_eq!(prev.len(), self.dim);
        self.history.push_front(prev);
        self.t = 1;
        self
    }

    pub fn kind(&self) -> CovariateKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.history.front().map(Vec::as_slice)
    }

    fn draw_correlated(&self, rng: &mut Rng, out: &mut [f64], rho: f64) {
        rng.fill_gaussian(out);
        if rho != 0.0 {
            let c = (1.0 - rho * rho).sqrt();
            for j in 1..out.len() {
                out[j] = rho * out[j - 1] + c * out[j];
            }
        }
    }

    fn draw_initial(&self, rng: &mut Rng, out: &mut [f64]) {
        rng.fill_gaussian(out);
        if self.init == InitKind::Sphere {
            let r = norm(out);
            if r > 0.0 {
                out.iter_mut().for_each(|v| *v /= r);
            }
        }
    }

    /// Writes the next covariate into `out` and advances the state.
    pub fn next_into(&mut self, rng: &mut Rng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match self.kind {
            CovariateKind::IidGaussian { correlation } => {
                self.draw_correlated(rng, out, correlation);
                self.t += 1;
                return;
            }
            _ if self.history.is_empty() => self.draw_initial(rng, out),
            CovariateKind::SphereAr => {
                let a = rng.rademacher();
                rng.fill_gaussian(out);
                let prev = &self.history[0];
                let r = norm(prev);
                if r > 0.0 {
                    let s = a / r;
                    for (o, p) in out.iter_mut().zip(prev) {
                        *o += s * p;
                    }
                }
            }
            CovariateKind::WeightedHistory { .. } => {
                rng.fill_gaussian(out);
                let half_width = 0.5 / (self.t as f64 + 1.0);
                for past in &self.history {
                    let nu = rng.uniform_range(-half_width, half_width);
                    for (o, p) in out.iter_mut().zip(past) {
                        *o += nu * p;
                    }
                }
            }
        }
        let window = match self.kind {
            CovariateKind::WeightedHistory { window } => window,
            _ => 1,
        };
        let mut slot = if self.history.len() >= window {
            self.history.pop_back().unwrap_or_default()
        } else {
            Vec::with_capacity(self.dim)
        };
        slot.clear();
        slot.extend_from_slice(out);
        self.history.push_front(slot);
        self.t += 1;
    }

    pub fn next_covariate(&mut self, rng: &mut Rng) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.next_into(rng, &mut x);
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    IidGaussian,
    /// `xi_t = a_t clamp(xi_{t-1}, -1, 1) sign(X_{t-1,1}) + sigma N(0,1)`.
    DependentSign,
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One dependent-sign noise step with the sign and innovation supplied.
pub fn dependent_sign_step(prev_noise: f64, prev_x1: f64, a: f64, innovation: f64) -> f64 {
    a * prev_noise.clamp(-1.0, 1.0) * sign0(prev_x1) + innovation
}

#[derive(Debug, Clone)]
pub struct NoiseProcess {
    kind: NoiseKind,
    sigma: f64,
    prev: Option<f64>,
}

impl NoiseProcess {
    pub fn new(kind: NoiseKind, sigma: f64) -> Self {
        Self {
            kind,
            sigma,
            prev: None,
        }
    }

    pub fn with_history(mut self, prev: f64) -> Self {
        self.prev = Some(prev);
        self
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    /// `prev_x1` is the first coordinate of the previous covariate.
    pub fn next_noise(&mut self, prev_x1: Option<f64>, rng: &mut Rng) -> f64 {
        let xi = match (self.kind, self.prev) {
            (NoiseKind::DependentSign, Some(prev)) => {
                let a = rng.rademacher();
                let e = self.sigma * rng.gaussian();
                dependent_sign_step(prev, prev_x1.unwrap_or(0.0), a, e)
            }
            _ => self.sigma * rng.gaussian(),
        };
        self.prev = Some(xi);
        xi
    }
}

/// How to build the covariate and noise processes of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    pub covariates: CovariateKind,
    pub init: InitKind,
    pub noise: NoiseKind,
}

impl StreamConfig {
    pub fn iid() -> Self {
        Self {
            covariates: CovariateKind::iid(),
            init: InitKind::Gaussian,
            noise: NoiseKind::IidGaussian,
        }
    }

    pub fn dependent() -> Self {
        Self {
            covariates: CovariateKind::SphereAr,
            init: InitKind::Gaussian,
            noise: NoiseKind::DependentSign,
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(self.covariates, CovariateKind::IidGaussian { .. })
            && self.noise == NoiseKind::IidGaussian
    }

    pub fn build(&self, spec: &ProblemSpec, seed: u64, replication: u64) -> Result<DataStream> {
        DataStream::new(
            CovariateProcess::new(self.covariates, spec.dim, self.init)?,
            NoiseProcess::new(self.noise, spec.sigma),
            seed,
            replication,
        )
    }
}

/// Paired covariate/noise stream with its own substreams.
#[derive(Debug, Clone)]
pub struct DataStream {
    cov: CovariateProcess,
    noise: NoiseProcess,
    cov_rng: Rng,
    noise_rng: Rng,
    prev_x1: Option<f64>,
}

impl DataStream {
    pub fn new(
        cov: CovariateProcess,
        noise: NoiseProcess,
        seed: u64,
        replication: u64,
    ) -> Result<Self> {
        Ok(Self {
            prev_x1: cov.last().map(|x| x[0]),
            cov,
            noise,
            cov_rng: Rng::substream(seed, replication, Stream::Covariate),
            noise_rng: Rng::substream(seed, replication, Stream::Noise),
        })
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    /// Writes X_t into `x` and returns xi_t.
    pub fn next_into(&mut self, x: &mut [f64]) -> f64 {
        self.cov.next_into(&mut self.cov_rng, x);
        let xi = self.noise.next_noise(self.prev_x1, &mut self.noise_rng);
        self.prev_x1 = Some(x[0]);
        xi
    }
}
