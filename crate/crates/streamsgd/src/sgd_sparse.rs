//! Hard-thresholded SGD with online support recovery.

use crate::datagen::{emit_regression_obs, DataStream, ProblemSpec};
use crate::error::{Error, Result};
use crate::numerics::{dist_sq, dot};
use crate::record::{LogCursor, LogSchedule};
use crate::schedules::{sparse_scale_dim, StepsizeSchedule, TwoPhaseSchedule};
use crate::sgd_dense::{sgd_update, DensePoint, Phase, PhaseController};

/// Sorted index set with O(1) membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    indices: Vec<usize>,
    mask: Vec<bool>,
}

impl SupportSet {
    pub fn new(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut s = Self::empty(dim);
        for &i in indices {
            if i >= dim {
                return Err(Error::InvalidProblem(format!(
                    "support index {i} out of range for d = {dim}"
                )));
            }
            s.insert(i);
        }
        Ok(s)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            mask: vec![false; dim],
        }
    }

    pub fn full(dim: usize) -> Self {
        Self {
            indices: (0..dim).collect(),
            mask: vec![true; dim],
        }
    }

    /// Returns false if `i` was already present.
    pub fn insert(&mut self, i: usize) -> bool {
        if self.mask[i] {
            return false;
        }
        self.mask[i] = true;
        let pos = self.indices.partition_point(|&j| j < i);
        self.indices.insert(pos, i);
        true
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.dim()
    }

    pub fn complement(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| !**m)
            .map(|(i, _)| i)
    }

    pub fn is_superset_of(&self, other: &[usize]) -> bool {
        other.iter().all(|&i| self.contains(i))
    }
}

pub fn hard_threshold(v: &[f64], s: &SupportSet) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(i, x)| if s.contains(i) { *x } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSgdState {
    pub beta: Vec<f64>,
    pub support: SupportSet,
    pub g_window: Vec<f64>,
    pub g_cum: Vec<f64>,
    pub t: u64,
    pub last_update: u64,
    pub update_log: Vec<(u64, usize)>,
}

impl SparseSgdState {
    /// Starts from `H_S(beta0)`.
    pub fn new(beta0: &[f64], support: SupportSet) -> Self {
        let d = beta0.len();
        Self {
            beta: hard_threshold(beta0, &support),
            support,
            g_window: vec![0.0; d],
            g_cum: vec![0.0; d],
            t: 0,
            last_update: 0,
            update_log: Vec::new(),
        }
    }

    /// Adds `i` to the support and resets the local window.
    pub fn add_to_support(&mut self, i: usize) -> bool {
        if !self.support.insert(i) {
            return false;
        }
        self.update_log.push((self.t, i));
        self.last_update = self.t;
        self.g_window.iter_mut().for_each(|g| *g = 0.0);
        true
    }

    pub fn statistic(&self, window: GWindow) -> &[f64] {
        match window {
            GWindow::Local => &self.g_window,
            GWindow::Cumulative => &self.g_cum,
        }
    }
}

pub fn sparse_sgd_step(state: &mut SparseSgdState, x: &[f64], y: f64, eta: f64) -> Result<()> {
    let d = state.beta.len();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let r = dot(x, &state.beta) - y;
    if !(r.is_finite() && eta.is_finite()) {
        return Err(Error::NonFinite("sparse_sgd_step"));
    }
    if r != 0.0 {
        for i in 0..d {
            let g = r * x[i];
            state.g_window[i] += g;
            state.g_cum[i] += g;
            if state.support.mask[i] {
                state.beta[i] -= eta * g;
            } else {
                state.beta[i] = 0.0;
            }
        }
    }
    state.t += 1;
    Ok(())
}

/// `argmax_{i not in S} |g_i|`, lowest index on ties.
pub fn select_support_addition(g: &[f64], s: &SupportSet) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in s.complement() {
        let v = g[i].abs();
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::SupportFull(s.dim()))
}

/// Which accumulation of G drives support updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GWindow {
    /// Reset at every support update.
    Local,
    /// Accumulated since the start of the sparse phase.
    Cumulative,
}

fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Fires when the largest off-support `|G_i|` stands out from the median by a factor `rho`.
pub fn heuristic_update_trigger(
    state: &SparseSgdState,
    rho: f64,
    min_gap: u64,
    window: GWindow,
) -> bool {
    if state.t.saturating_sub(state.last_update) < min_gap {
        return false;
    }
    let g = state.statistic(window);
    let mut vals: Vec<f64> = state.support.complement().map(|i| g[i].abs()).collect();
    if vals.is_empty() {
        return false;
    }
    let max = vals.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return false;
    }
    max >= rho * median(&mut vals)
}

/// Smallest `tau >= 3` with `tau / ln(tau) >= need`.
fn smallest_tau_over_log(need: f64) -> u64 {
    let f = |t: u64| t as f64 / (t as f64).ln();
    if f(3) >= need {
        return 3;
    }
    let mut hi = 4u64;
    while f(hi) < need {
        hi *= 2;
    }
    let mut lo = hi / 2;
    // f(lo) < need <= f(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid) >= need {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Planned support-update times (relative to the start of the sparse phase),
/// assuming each update adds the largest missing signal. Unspecified
/// constants are all set to `c_sched`.
pub fn oracle_update_times(
    spec: &ProblemSpec,
    initial: &SupportSet,
    window: GWindow,
    c_sched: f64,
    c_a: f64,
) -> Result<Vec<u64>> {
    let beta = spec.beta();
    let truth: Vec<usize> = match &spec.support {
        Some(s) => s.clone(),
        None => (0..spec.dim).filter(|&i| beta[i] != 0.0).collect(),
    };
    let mut missing: Vec<usize> = truth
        .into_iter()
        .filter(|&i| !initial.contains(i))
        .collect();
    missing.sort_by(|&i, &j| beta[j].abs().total_cmp(&beta[i].abs()).then(i.cmp(&j)));
    if missing.is_empty() {
        return Ok(Vec::new());
    }
    let d = spec.dim as f64;
    let noise = spec.sigma * spec.sigma / spec.lambda_min;
    let mass = |set: &[usize]| set.iter().map(|&i| beta[i] * beta[i]).sum::<f64>();
    let gap = |set: &[usize]| {
        let s = set.len() as f64;
        c_sched * s * (2.0 * d / s).ln() * noise / mass(set)
    };

    let mut times = vec![smallest_tau_over_log(gap(&missing))];
    for l in 1..missing.len() {
        let rest = &missing[l..];
        let m = mass(rest);
        let prev = times[l - 1] as f64;
        let need = match window {
            GWindow::Local => {
                let acc: f64 = times
                    .iter()
                    .zip(&missing)
                    .map(|(&tau, &i)| (tau as f64 / prev).powf(c_a - 2.0) * beta[i] * beta[i])
                    .sum();
                (c_sched * prev * prev * acc / m)
                    .sqrt()
                    .max(prev + gap(rest))
            }
            GWindow::Cumulative => {
                let acc: f64 = times
                    .iter()
                    .zip(&missing)
                    .map(|(&tau, &i)| tau as f64 * beta[i].abs())
                    .sum();
                (c_sched * acc / m.sqrt()).max(gap(rest))
            }
        };
        let tau = if need.is_finite() {
            need.ceil() as u64
        } else {
            u64::MAX
        };
        times.push(tau.max(times[l - 1] + 1));
    }
    Ok(times)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportMode {
    FixedSupport,
    OracleLocal,
    OracleCumulative,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOptions {
    pub mode: SupportMode,
    /// Statistic used by the heuristic trigger.
    pub window: GWindow,
    /// Initial support; otherwise the top `s + extra_initial` warm-start coordinates.
    pub initial_support: Option<Vec<usize>>,
    pub extra_initial: usize,
    pub rho: f64,
    pub min_gap: u64,
    pub s_max: Option<usize>,
    pub max_updates: Option<usize>,
    pub c_sched: f64,
    /// Also run dense SGD on the same observations.
    pub compare_dense: bool,
}

impl Default for SparseOptions {
    fn default() -> Self {
        Self {
            mode: SupportMode::Heuristic,
            window: GWindow::Cumulative,
            initial_support: None,
            extra_initial: 2,
            rho: 10.0,
            min_gap: 1000,
            s_max: None,
            max_updates: None,
            c_sched: 1.0,
            compare_dense: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsePoint {
    pub t: u64,
    pub err_sq: f64,
    pub err_sq_on_support: f64,
    pub err_sq_off_support: f64,
    pub support_size: usize,
    pub event: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRun {
    pub points: Vec<SparsePoint>,
    pub dense: Option<Vec<DensePoint>>,
    /// Global step at which the sparse phase started.
    pub t1: Option<u64>,
    pub initial_support: Option<SupportSet>,
    pub support: Option<SupportSet>,
    /// `(global step, added index)`.
    pub events: Vec<(u64, usize)>,
    pub beta: Vec<f64>,
    pub dense_beta: Option<Vec<f64>>,
}

impl SparseRun {
    pub fn final_error(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.err_sq)
    }

    pub fn final_dense_error(&self) -> Option<f64> {
        self.dense.as_ref().and_then(|d| d.last()).map(|p| p.err_sq)
    }

    pub fn errors(&self) -> Vec<(u64, f64)> {
        self.points.iter().map(|p| (p.t, p.err_sq)).collect()
    }

    pub fn on_support_errors(&self) -> Vec<(u64, f64)> {
        self.points
            .iter()
            .map(|p| (p.t, p.err_sq_on_support))
            .collect()
    }
}

/// Indices of the `k` largest `|v_i|`, lowest index first on ties.
pub fn top_k(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()).then(i.cmp(&j)));
    idx.truncate(k);
    idx
}

fn on_support_error(beta: &[f64], beta_star: &[f64], s: &SupportSet) -> f64 {
    s.indices()
        .iter()
        .map(|&i| (beta[i] - beta_star[i]).powi(2))
        .sum()
}

fn off_support_error(beta: &[f64], beta_star: &[f64], s: &SupportSet) -> f64 {
    s.complement()
        .map(|i| (beta[i] - beta_star[i]).powi(2))
        .sum()
}

/// Dense warm start, thresholding to an initial support, then sparse SGD
/// with support updates chosen by `opts.mode`.
pub fn run_sparse(
    spec: &ProblemSpec,
    stream: &mut DataStream,
    sched: &TwoPhaseSchedule,
    opts: &SparseOptions,
    horizon: u64,
    log: &LogSchedule,
) -> Result<SparseRun> {
    spec.validate()?;
    if spec.num_arms() != 1 {
        return Err(Error::InvalidProblem(
            "sparse regression needs exactly one parameter vector".into(),
        ));
    }
    let d = spec.dim;
    let beta_star = spec.beta();
    let s = spec.sparsity();
    if opts.initial_support.is_none() && s.is_none() {
        return Err(Error::InvalidProblem(
            "sparse run needs either an initial support or a declared sparsity".into(),
        ));
    }
    let s_max = opts
        .s_max
        .unwrap_or_else(|| s.map_or(d, |s| (2 * s).min(d)));
    let max_updates = opts.max_updates.unwrap_or(usize::MAX);
    let scale_dim = s.map_or(d as f64, |s| sparse_scale_dim(d, s));

    let mut warm = vec![0.0; d];
    let mut phases = PhaseController::new(sched.warm_start);
    let mut sparse: Option<SparseSgdState> = None;
    let mut sparse_sched: Option<StepsizeSchedule> = None;
    let mut dense: Option<(Vec<f64>, StepsizeSchedule)> = None;
    let mut plan: Vec<u64> = Vec::new();
    let mut initial_support = None;
    let mut start = 0u64;

    let mut cursor = LogCursor::new(log, horizon);
    let mut points = Vec::with_capacity(cursor.len());
    let mut dense_points = opts.compare_dense.then(|| Vec::with_capacity(cursor.len()));
    let mut pending_event: Option<usize> = None;
    let mut x = vec![0.0; d];

    for t in 0..=horizon {
        if sparse.is_none() && !phases.constant_at(t, || dist_sq(&warm, beta_star)) {
            let s0 = match &opts.initial_support {
                Some(idx) => SupportSet::new(d, idx)?,
                None => SupportSet::new(d, &top_k(&warm, s.unwrap_or(d) + opts.extra_initial))?,
            };
            plan = match opts.mode {
                SupportMode::OracleLocal => {
                    oracle_update_times(spec, &s0, GWindow::Local, opts.c_sched, sched.c_a)?
                }
                SupportMode::OracleCumulative => {
                    oracle_update_times(spec, &s0, GWindow::Cumulative, opts.c_sched, sched.c_a)?
                }
                _ => Vec::new(),
            };
            plan.reverse();
            if opts.compare_dense {
                dense = Some((warm.clone(), sched.decaying(d as f64, t)?));
            }
            sparse_sched = Some(sched.decaying(scale_dim, t)?);
            initial_support = Some(s0.clone());
            sparse = Some(SparseSgdState::new(&warm, s0));
            start = t;
        }

        let logged = cursor.hit(t);
        if logged || pending_event.is_some() {
            let point = match &sparse {
                Some(st) => SparsePoint {
                    t,
                    err_sq: dist_sq(&st.beta, beta_star),
                    err_sq_on_support: on_support_error(&st.beta, beta_star, &st.support),
                    err_sq_off_support: off_support_error(&st.beta, beta_star, &st.support),
                    support_size: st.support.len(),
                    event: pending_event.take(),
                },
                None => {
                    let e = dist_sq(&warm, beta_star);
                    SparsePoint {
                        t,
                        err_sq: e,
                        err_sq_on_support: e,
                        err_sq_off_support: 0.0,
                        support_size: d,
                        event: None,
                    }
                }
            };
            points.push(point);
            if let Some(dp) = dense_points.as_mut() {
                let (b, phase) = match &dense {
                    Some((b, _)) => (b, Phase::Decaying),
                    None => (&warm, Phase::Constant),
                };
                dp.push(DensePoint {
                    t,
                    err_sq: dist_sq(b, beta_star),
                    phase,
                });
            }
        }
        if t == horizon {
            break;
        }

        let xi = stream.next_into(&mut x);
        let y = emit_regression_obs(spec, &x, xi);
        let Some(st) = sparse.as_mut() else {
            sgd_update(&mut warm, &x, y, sched.constant_eta)?;
            continue;
        };
        let eta = sparse_sched
            .as_ref()
            .expect("set with state")
            .stepsize_at(t)?;
        sparse_sgd_step(st, &x, y, eta)?;
        if let Some((b, ds)) = dense.as_mut() {
            sgd_update(b, &x, y, ds.stepsize_at(t)?)?;
        }

        let can_grow =
            st.support.len() < s_max && st.update_log.len() < max_updates && !st.support.is_full();
        let fire = match opts.mode {
            SupportMode::FixedSupport => false,
            SupportMode::Heuristic => {
                can_grow && heuristic_update_trigger(st, opts.rho, opts.min_gap, opts.window)
            }
            SupportMode::OracleLocal | SupportMode::OracleCumulative => {
                if plan.last() == Some(&st.t) {
                    plan.pop();
                    can_grow
                } else {
                    false
                }
            }
        };
        if fire {
            let window = match opts.mode {
                SupportMode::OracleLocal => GWindow::Local,
                SupportMode::OracleCumulative => GWindow::Cumulative,
                _ => opts.window,
            };
            let i = select_support_addition(st.statistic(window), &st.support)?;
            st.add_to_support(i);
            pending_event = Some(i);
        }
    }

    let events = sparse
        .as_ref()
        .map(|st| {
            st.update_log
                .iter()
                .map(|&(tau, i)| (tau + start, i))
                .collect()
        })
        .unwrap_or_default();
    Ok(SparseRun {
        points,
        dense: dense_points,
        t1: sparse.as_ref().map(|_| start),
        initial_support,
        support: sparse.as_ref().map(|st| st.support.clone()),
        events,
        beta: sparse.map_or(warm, |st| st.beta),
        dense_beta: dense.map(|(b, _)| b),
    })
}
