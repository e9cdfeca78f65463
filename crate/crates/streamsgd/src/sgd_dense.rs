//! Last-iterate SGD for linear regression with a two-phase stepsize.

use crate::datagen::{emit_regression_obs, DataStream, ProblemSpec};
use crate::error::{Error, Result};
use crate::numerics::{dist_sq, dot};
use crate::record::{LogCursor, LogSchedule};
use crate::schedules::{StepsizeSchedule, TwoPhaseSchedule, WarmStart};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Constant,
    Decaying,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Constant => "constant",
            Phase::Decaying => "decaying",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseSgdState {
    pub beta: Vec<f64>,
    pub t: u64,
    pub phase: Phase,
    pub t1: Option<u64>,
}

impl DenseSgdState {
    pub fn new(beta0: Vec<f64>) -> Self {
        Self {
            beta: beta0,
            t: 0,
            phase: Phase::Constant,
            t1: None,
        }
    }
}

/// `beta <- beta - eta (x.beta - y) x`, in place. Returns the residual.
pub(crate) fn sgd_update(beta: &mut [f64], x: &[f64], y: f64, eta: f64) -> Result<f64> {
    if x.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            got: x.len(),
        });
    }
    let r = dot(x, beta) - y;
    if !(r.is_finite() && eta.is_finite()) {
        return Err(Error::NonFinite("sgd_step"));
    }
    let g = eta * r;
    if g != 0.0 {
        for (b, xi) in beta.iter_mut().zip(x) {
            *b -= g * xi;
        }
    }
    Ok(r)
}

pub fn sgd_step(state: &mut DenseSgdState, x: &[f64], y: f64, eta: f64) -> Result<()> {
    sgd_update(&mut state.beta, x, y, eta)?;
    state.t += 1;
    Ok(())
}

/// Decides when the constant warm start ends.
#[derive(Debug, Clone)]
pub(crate) struct PhaseController {
    warm: WarmStart,
    pub t1: Option<u64>,
}

impl PhaseController {
    pub fn new(warm: WarmStart) -> Self {
        Self { warm, t1: None }
    }

    /// Returns true when step `t` should use the constant stepsize.
    /// `err_sq` is only evaluated in oracle mode.
    pub fn constant_at(&mut self, t: u64, err_sq: impl FnOnce() -> f64) -> bool {
        if self.t1.is_some() {
            return false;
        }
        let switch = match self.warm {
            WarmStart::Steps(n) => t >= n,
            WarmStart::Oracle {
                threshold,
                max_steps,
            } => t >= max_steps || err_sq() <= threshold,
        };
        if switch {
            self.t1 = Some(t);
        }
        !switch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensePoint {
    pub t: u64,
    pub err_sq: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseRun {
    pub points: Vec<DensePoint>,
    /// Step at which the decaying phase started, if it did.
    pub t1: Option<u64>,
    pub beta: Vec<f64>,
}

impl DenseRun {
    pub fn errors(&self) -> Vec<(u64, f64)> {
        self.points.iter().map(|p| (p.t, p.err_sq)).collect()
    }

    pub fn final_error(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.err_sq)
    }
}

/// Runs `horizon` SGD steps from `beta = 0`, logging the oracle squared error.
pub fn run_dense(
    spec: &ProblemSpec,
    stream: &mut DataStream,
    sched: &TwoPhaseSchedule,
    horizon: u64,
    log: &LogSchedule,
) -> Result<DenseRun> {
    spec.validate()?;
    if spec.num_arms() != 1 {
        return Err(Error::InvalidProblem(
            "regression needs exactly one parameter vector".into(),
        ));
    }
    let d = spec.dim;
    let beta_star = spec.beta();
    let mut state = DenseSgdState::new(vec![0.0; d]);
    let mut phases = PhaseController::new(sched.warm_start);
    let mut decay: Option<StepsizeSchedule> = None;
    let mut cursor = LogCursor::new(log, horizon);
    let mut points = Vec::with_capacity(cursor.len());
    let mut x = vec![0.0; d];

    for t in 0..=horizon {
        let constant = phases.constant_at(t, || dist_sq(&state.beta, beta_star));
        if !constant && decay.is_none() {
            state.phase = Phase::Decaying;
            state.t1 = phases.t1;
            decay = Some(sched.decaying(d as f64, t)?);
        }
        if cursor.hit(t) {
            points.push(DensePoint {
                t,
                err_sq: dist_sq(&state.beta, beta_star),
                phase: state.phase,
            });
        }
        if t == horizon {
            break;
        }
        let eta = match &decay {
            Some(s) => s.stepsize_at(t)?,
            None => sched.constant_eta,
        };
        let xi = stream.next_into(&mut x);
        let y = emit_regression_obs(spec, &x, xi);
        sgd_step(&mut state, &x, y, eta)?;
    }
    Ok(DenseRun {
        points,
        t1: state.t1,
        beta: state.beta,
    })
}
