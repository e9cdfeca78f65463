//! Stepsize sequences, exploration rates and tail sequences.

use std::fmt;

use crate::error::{Error, Result};

/// Learning rate eta_t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeSchedule {
    Constant {
        eta: f64,
    },
    /// `(c_a / lambda_min) / (t - t1 + c_b * scale_dim)`. `scale_dim` is `d`
    /// for dense regression and `s log(2d/s)` for sparse regression.
    Decaying {
        c_a: f64,
        c_b: f64,
        lambda_min: f64,
        scale_dim: f64,
        t1: u64,
    },
}

impl StepsizeSchedule {
    pub fn constant(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "constant stepsize {eta} must be finite and >= 0"
            )));
        }
        Ok(Self::Constant { eta })
    }

    pub fn decaying(c_a: f64, c_b: f64, lambda_min: f64, d: usize, t1: u64) -> Result<Self> {
        Self::decaying_scaled(c_a, c_b, lambda_min, d as f64, t1)
    }

    /// Sparse variant with `s log(2d/s)` in place of `d`.
    pub fn decaying_sparse(
        c_a: f64,
        c_b: f64,
        lambda_min: f64,
        d: usize,
        s: usize,
        t1: u64,
    ) -> Result<Self> {
        Self::decaying_scaled(c_a, c_b, lambda_min, sparse_scale_dim(d, s), t1)
    }

    pub fn decaying_scaled(
        c_a: f64,
        c_b: f64,
        lambda_min: f64,
        scale_dim: f64,
        t1: u64,
    ) -> Result<Self> {
        if !(c_a >= 2.0 && c_a.is_finite()) {
            return Err(Error::InvalidSchedule(format!("C_a = {c_a} must be >= 2")));
        }
        if !(c_b > 0.0 && c_b.is_finite()) {
            return Err(Error::InvalidSchedule(format!("C_b = {c_b} must be > 0")));
        }
        if !(lambda_min > 0.0 && lambda_min.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "lambda_min = {lambda_min} must be > 0"
            )));
        }
        if !(scale_dim > 0.0 && scale_dim.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "dimension scale {scale_dim} must be > 0"
            )));
        }
        Ok(Self::Decaying {
            c_a,
            c_b,
            lambda_min,
            scale_dim,
            t1,
        })
    }

    pub fn stepsize_at(&self, t: u64) -> Result<f64> {
        match *self {
            Self::Constant { eta } => Ok(eta),
            Self::Decaying {
                c_a,
                c_b,
                lambda_min,
                scale_dim,
                t1,
            } => {
                if t < t1 {
                    return Err(Error::BeforeScheduleStart { t, t1 });
                }
                Ok((c_a / lambda_min) / ((t - t1) as f64 + c_b * scale_dim))
            }
        }
    }

    /// Which sufficient conditions of the rate theory this schedule meets.
    pub fn regime(&self, lambda_max: Option<f64>) -> RegimeReport {
        let mut report = RegimeReport::default();
        let Some(lambda_max) = lambda_max else {
            report
                .notes
                .push("lambda_max not declared; stepsize conditions unchecked".into());
            return report;
        };
        match *self {
            Self::Constant { eta } => {
                // The bound depends on d and lambda_min, which a constant schedule
                // does not carry; callers use `constant_stepsize_bound`.
                report
                    .notes
                    .push(format!("constant eta = {eta}, lambda_max = {lambda_max}"));
            }
            Self::Decaying {
                c_a,
                c_b,
                lambda_min,
                ..
            } => {
                let need = 3.0 * c_a * c_a * (lambda_max / lambda_min).powi(2);
                let ok = c_b >= need;
                report.decaying_ok = Some(ok);
                if !ok {
                    report.notes.push(format!(
                        "C_b = {c_b} is below 3 C_a^2 (lambda_max/lambda_min)^2 = {need:.3}; outside the sufficient regime"
                    ));
                }
            }
        }
        report
    }
}

pub fn sparse_scale_dim(d: usize, s: usize) -> f64 {
    let s = s.max(1) as f64;
    s * (2.0 * d as f64 / s).ln()
}

/// Largest constant stepsize covered by the constant-phase analysis.
pub fn constant_stepsize_bound(lambda_min: f64, lambda_max: f64, d: usize) -> f64 {
    lambda_min / (d as f64 * lambda_max * lambda_max)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegimeReport {
    pub decaying_ok: Option<bool>,
    pub exploration_ok: Option<bool>,
    pub notes: Vec<String>,
}

impl RegimeReport {
    /// Checks `C_a >= 2K/pi` for the exploration phase of the bandit analysis.
    pub fn with_exploration(mut self, c_a: f64, k: usize, pi: f64) -> Self {
        let need = 2.0 * k as f64 / pi;
        let ok = pi > 0.0 && c_a >= need;
        self.exploration_ok = Some(ok);
        if !ok {
            self.notes.push(format!(
                "C_a = {c_a} is below 2K/pi = {need:.3}; outside the exploration-phase regime"
            ));
        }
        self
    }
}

/// How the constant phase ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WarmStart {
    /// Switch after exactly this many constant steps.
    Steps(u64),
    /// Switch at the first step whose oracle error is at most `threshold`,
    /// or after `max_steps` steps.
    Oracle { threshold: f64, max_steps: u64 },
}

/// Constant warm start followed by a decaying schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhaseSchedule {
    pub constant_eta: f64,
    pub warm_start: WarmStart,
    pub c_a: f64,
    pub c_b: f64,
    pub lambda_min: f64,
}

impl TwoPhaseSchedule {
    pub fn decaying(&self, scale_dim: f64, t1: u64) -> Result<StepsizeSchedule> {
        StepsizeSchedule::decaying_scaled(self.c_a, self.c_b, self.lambda_min, scale_dim, t1)
    }

    pub fn c_a_prime(&self) -> f64 {
        self.c_a / self.lambda_min
    }
}

/// Exploration probability pi_t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExplorationSchedule {
    ConstantPi {
        rate: f64,
    },
    /// `c_pi / (t + 2 c_pi)`
    Harmonic {
        c_pi: f64,
    },
    /// `(c_pi / (t + 2^{1/p} c_pi))^p`
    Power {
        c_pi: f64,
        p: f64,
    },
    /// `rate` before `t1`, zero from `t1` on.
    TwoPhaseZero {
        t1: u64,
        rate: f64,
    },
    /// `pre_rate` before `start`, then `min(pre_rate, scale / (t - start + offset)^power)`.
    Shifted {
        scale: f64,
        offset: f64,
        power: f64,
        start: u64,
        pre_rate: f64,
    },
}

impl ExplorationSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        match *self {
            Self::ConstantPi { rate } | Self::TwoPhaseZero { rate, .. } if !(0.0..=1.0).contains(&rate) => {
                bad(format!("exploration rate {rate} outside [0, 1]"))
            }
            Self::Harmonic { c_pi } if !(c_pi > 0.0 && c_pi.is_finite()) => bad(format!("C_pi = {c_pi} must be > 0")),
            Self::Power { c_pi, p } if !(c_pi > 0.0 && c_pi.is_finite() && p > 0.0 && p < 1.0) => {
                bad(format!("power schedule needs C_pi > 0 and p in (0, 1), got C_pi = {c_pi}, p = {p}"))
            }
            Self::Shifted {
                scale,
                offset,
                power,
                pre_rate,
                ..
            } if !(scale >= 0.0 && offset > 0.0 && power > 0.0 && (0.0..=1.0).contains(&pre_rate)) => bad(format!(
                "shifted schedule needs scale >= 0, offset > 0, power > 0, pre_rate in [0, 1]; got {scale}, {offset}, {power}, {pre_rate}"
            )),
            _ => Ok(()),
        }
    }

    pub fn rate_at(&self, t: u64) -> f64 {
        let tf = t as f64;
        match *self {
            Self::ConstantPi { rate } => rate,
            Self::Harmonic { c_pi } => c_pi / (tf + 2.0 * c_pi),
            Self::Power { c_pi, p } => (c_pi / (tf + 2f64.powf(1.0 / p) * c_pi)).powf(p),
            Self::TwoPhaseZero { t1, rate } => {
                if t < t1 {
                    rate
                } else {
                    0.0
                }
            }
            Self::Shifted {
                scale,
                offset,
                power,
                start,
                pre_rate,
            } => {
                if t < start {
                    pre_rate
                } else {
                    pre_rate.min(scale / ((t - start) as f64 + offset).powf(power))
                }
            }
        }
    }

    /// Limiting exploration rate pi*.
    pub fn limit(&self) -> f64 {
        match *self {
            Self::ConstantPi { rate } => rate,
            _ => 0.0,
        }
    }

    /// Checks membership in the class of non-increasing `[0,1]`-valued
    /// schedules that stay at or above `pi` on `[0, tau]`, sampling every
    /// integer in `[0, t_check]`.
    pub fn validate_pi_membership(&self, tau: u64, pi: f64, t_check: u64) -> Membership {
        let t_check = t_check.max(tau);
        let mut prev = f64::INFINITY;
        for t in 0..=t_check {
            let r = self.rate_at(t);
            let violation = if !(0.0..=1.0).contains(&r) {
                Some(Violation::OutOfRange)
            } else if r > prev {
                Some(Violation::Increasing)
            } else if t <= tau && r < pi {
                Some(Violation::BelowFloor)
            } else {
                None
            };
            if let Some(kind) = violation {
                return Membership {
                    member: false,
                    first_violation: Some((t, kind)),
                };
            }
            prev = r;
        }
        Membership {
            member: true,
            first_violation: None,
        }
    }
}

impl fmt::Display for ExplorationSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::ConstantPi { rate } => write!(f, "constant:{rate}"),
            Self::Harmonic { c_pi } => write!(f, "harmonic:{c_pi}"),
            Self::Power { c_pi, p } => write!(f, "power:{c_pi},{p}"),
            Self::TwoPhaseZero { t1, rate } => write!(f, "two-phase-zero:{t1},{rate}"),
            Self::Shifted {
                scale,
                offset,
                power,
                start,
                pre_rate,
            } => write!(f, "shifted:{scale},{offset},{power},{start},{pre_rate}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    OutOfRange,
    Increasing,
    BelowFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Membership {
    pub member: bool,
    pub first_violation: Option<(u64, Violation)>,
}

/// delta_t, the tail-probability sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailSequence {
    Zero,
    LogT { c: f64 },
}

impl TailSequence {
    /// `min(c log(1 + t), t / c_b)` for `LogT`.
    pub fn tail_at(&self, t: f64, c_b: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::LogT { c } => (c * t.ln_1p()).min(t / c_b).max(0.0),
        }
    }
}
