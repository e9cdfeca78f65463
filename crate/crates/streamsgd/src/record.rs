//! Logging grids and trajectory fits.

use crate::error::{Error, Result};

/// Which steps of a run are logged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogSchedule {
    Every(u64),
    /// Roughly geometric spacing: `t_{k+1} = max(t_k + 1, round(ratio * t_k))`.
    Geometric {
        ratio: f64,
    },
}

impl Default for LogSchedule {
    fn default() -> Self {
        Self::Geometric { ratio: 1.2 }
    }
}

impl LogSchedule {
    /// Sorted, de-duplicated log times in `[0, horizon]`, always including both ends.
    pub fn points(&self, horizon: u64) -> Vec<u64> {
        let mut pts = vec![0];
        match *self {
            Self::Every(stride) => {
                let stride = stride.max(1);
                let mut t = stride;
                while t < horizon {
                    pts.push(t);
                    t += stride;
                }
            }
            Self::Geometric { ratio } => {
                let ratio = if ratio > 1.0 { ratio } else { 1.2 };
                let mut t = 1u64;
                while t < horizon {
                    pts.push(t);
                    t = (t + 1).max((t as f64 * ratio).round() as u64);
                }
            }
        }
        if horizon > 0 {
            pts.push(horizon);
        }
        pts
    }
}

/// Walks a precomputed grid of log times.
#[derive(Debug, Clone)]
pub struct LogCursor {
    points: Vec<u64>,
    next: usize,
}

impl LogCursor {
    pub fn new(schedule: &LogSchedule, horizon: u64) -> Self {
        Self {
            points: schedule.points(horizon),
            next: 0,
        }
    }

    /// True once for each logged `t`; calls must use non-decreasing `t`.
    pub fn hit(&mut self, t: u64) -> bool {
        while self.next < self.points.len() && self.points[self.next] < t {
            self.next += 1;
        }
        if self.next < self.points.len() && self.points[self.next] == t {
            self.next += 1;
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

const MIN_FIT_POINTS: usize = 10;

/// OLS slope of `log(err)` against `log(t)` over points with `t_lo <= t <= t_hi`.
pub fn fit_loglog_slope(points: &[(u64, f64)], t_lo: u64, t_hi: u64) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, e) in points
        .iter()
        .filter(|(t, _)| *t >= t_lo && *t <= t_hi && *t > 0)
    {
        if !(e > 0.0) {
            return Err(Error::NonPositiveError { t, value: e });
        }
        xs.push((t as f64).ln());
        ys.push(e.ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_FIT_POINTS,
            found: xs.len(),
        });
    }
    Ok(linear_fit(&xs, &ys).slope)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 && sxx > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        1.0
    };
    LinearFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Elementwise mean and sample standard deviation across equally long series.
pub fn mean_std(series: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let Some(first) = series.first() else {
        return (Vec::new(), Vec::new());
    };
    let n = series.len() as f64;
    let len = first.len();
    let mut mean = vec![0.0; len];
    for s in series {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; len];
    if series.len() > 1 {
        for s in series {
            for ((sd, v), m) in std.iter_mut().zip(s).zip(&mean) {
                *sd += (v - m) * (v - m) / (n - 1.0);
            }
        }
        std.iter_mut().for_each(|v| *v = v.sqrt());
    }
    (mean, std)
}
