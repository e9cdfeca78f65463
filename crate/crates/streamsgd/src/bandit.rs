//! Epsilon-greedy contextual linear bandit with per-arm SGD.

use crate::datagen::{emit_bandit_reward, DataStream, ProblemSpec};
use crate::error::{Error, Result};
use crate::inference::CovAccumulators;
use crate::numerics::{dist_sq, dot, norm, Rng};
use crate::record::{LogCursor, LogSchedule};
use crate::schedules::{ExplorationSchedule, StepsizeSchedule, TwoPhaseSchedule};
use crate::sgd_dense::{sgd_update, PhaseController};

/// `(x.beta_i - max_{j != i} x.beta_j) / ||x||`.
pub fn conic_margin(x: &[f64], i: usize, betas: &[Vec<f64>]) -> Result<f64> {
    let k = betas.len();
    if i >= k {
        return Err(Error::ArmOutOfRange { arm: i, k });
    }
    if k < 2 {
        return Err(Error::InvalidProblem(
            "conic margin needs at least two arms".into(),
        ));
    }
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::ZeroCovariate);
    }
    let own = dot(x, &betas[i]);
    let best_other = (0..k)
        .filter(|&j| j != i)
        .map(|j| dot(x, &betas[j]))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((own - best_other) / r)
}

/// Index of the largest `x.beta_i`, lowest index on ties.
pub fn greedy_arm(x: &[f64], betas: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, b) in betas.iter().enumerate() {
        let v = dot(x, b);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Returns `(arm, explored)`. Always consumes one uniform draw for the coin.
pub fn choose_arm(x: &[f64], betas: &[Vec<f64>], pi: f64, rng: &mut Rng) -> (usize, bool) {
    if rng.bernoulli(pi) {
        (rng.index(betas.len()), true)
    } else {
        (greedy_arm(x, betas), false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    pub betas: Vec<Vec<f64>>,
    pub t: u64,
    pub pull_counts: Vec<u64>,
    pub regret_cum: f64,
    pub explore_count: u64,
}

impl BanditState {
    pub fn new(k: usize, d: usize) -> Self {
        Self {
            betas: vec![vec![0.0; d]; k],
            t: 0,
            pull_counts: vec![0; k],
            regret_cum: 0.0,
            explore_count: 0,
        }
    }
}

/// SGD step on the pulled arm only.
pub fn bandit_update(
    state: &mut BanditState,
    x: &[f64],
    y: f64,
    arm: usize,
    explored: bool,
    eta: f64,
) -> Result<()> {
    let k = state.betas.len();
    let beta = state
        .betas
        .get_mut(arm)
        .ok_or(Error::ArmOutOfRange { arm, k })?;
    sgd_update(beta, x, y, eta)?;
    state.pull_counts[arm] += 1;
    state.explore_count += u64::from(explored);
    state.t += 1;
    Ok(())
}

pub fn instantaneous_regret(spec: &ProblemSpec, x: &[f64], arm: usize) -> Result<f64> {
    let k = spec.num_arms();
    if arm >= k {
        return Err(Error::ArmOutOfRange { arm, k });
    }
    let best = spec
        .arms
        .iter()
        .map(|b| dot(x, b))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((best - dot(x, &spec.arms[arm])).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complexity {
    pub com2: f64,
    pub com1: f64,
    pub com_inf: f64,
}

/// Pairwise-distance complexity measures of the true arms.
pub fn complexity_measures(spec: &ProblemSpec) -> Complexity {
    let arms = &spec.arms;
    let k = arms.len();
    let dist = |i: usize, j: usize| dist_sq(&arms[i], &arms[j]).sqrt();
    let mut com2 = 0.0;
    let mut com1 = 0.0;
    let mut com_inf: f64 = 0.0;
    for j in 0..k {
        let mut col_max: f64 = 0.0;
        for i in 0..k {
            let v = dist(i, j);
            com2 += v;
            col_max = col_max.max(v);
            com_inf = com_inf.max(v);
        }
        com1 += col_max;
    }
    Complexity {
        com2,
        com1,
        com_inf,
    }
}

/// Arm optimality margin `h` for the given suboptimal arms:
/// `min_{j in suboptimal} min_x (max_i x.beta_i - x.beta_j) / ||x||`.
///
/// Exact in two dimensions, where the minimum over directions of a maximum of
/// sinusoids sits at a crossing of two of them or at a trough of one. In
/// higher dimensions it is a sampled upper bound. With no suboptimal arms the
/// condition is vacuous and the result is infinite.
pub fn arm_optimality_margin(
    spec: &ProblemSpec,
    suboptimal: &[usize],
    samples: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let betas = &spec.arms;
    let k = betas.len();
    if let Some(&j) = suboptimal.iter().find(|&&j| j >= k) {
        return Err(Error::ArmOutOfRange { arm: j, k });
    }
    if suboptimal.is_empty() {
        return Ok(f64::INFINITY);
    }
    let gap = |x: &[f64]| -> f64 {
        let r = norm(x);
        let best = betas
            .iter()
            .map(|b| dot(x, b))
            .fold(f64::NEG_INFINITY, f64::max);
        suboptimal
            .iter()
            .map(|&j| (best - dot(x, &betas[j])) / r)
            .fold(f64::INFINITY, f64::min)
    };
    let mut h = f64::INFINITY;
    if spec.dim == 2 {
        let mut angles = vec![0.0];
        for i in 0..k {
            for j in 0..k {
                let dx = betas[i][0] - betas[j][0];
                let dy = betas[i][1] - betas[j][1];
                if dx == 0.0 && dy == 0.0 {
                    continue;
                }
                let a = dy.atan2(dx);
                // tie line x.(beta_i - beta_j) = 0, and the trough direction
                angles.extend([
                    a + std::f64::consts::FRAC_PI_2,
                    a - std::f64::consts::FRAC_PI_2,
                    a + std::f64::consts::PI,
                ]);
            }
        }
        for a in angles {
            h = h.min(gap(&[a.cos(), a.sin()]));
        }
    } else {
        let mut x = vec![0.0; spec.dim];
        for _ in 0..samples.max(1) {
            rng.fill_gaussian(&mut x);
            if norm(&x) > 0.0 {
                h = h.min(gap(&x));
            }
        }
    }
    Ok(h.max(0.0))
}

/// Arms that are never the strict best over `samples` random Gaussian directions.
pub fn never_optimal_arms(spec: &ProblemSpec, samples: usize, rng: &mut Rng) -> Vec<usize> {
    let k = spec.num_arms();
    let mut seen = vec![false; k];
    let mut x = vec![0.0; spec.dim];
    for _ in 0..samples {
        rng.fill_gaussian(&mut x);
        let i = greedy_arm(&x, &spec.arms);
        if conic_margin(&x, i, &spec.arms).is_ok_and(|m| m > 0.0) {
            seen[i] = true;
        }
    }
    (0..k).filter(|&i| !seen[i]).collect()
}

/// `e1, 0.1 e1, -e1, e2, -e2` in `d >= 2` dimensions, truncated to the first `k`.
/// The second arm is never optimal.
pub fn example_arms(d: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    if d < 2 || !(1..=5).contains(&k) {
        return Err(Error::InvalidProblem(format!(
            "example arms need d >= 2 and 1 <= K <= 5, got d = {d}, K = {k}"
        )));
    }
    let unit = |i: usize, v: f64| {
        let mut b = vec![0.0; d];
        b[i] = v;
        b
    };
    Ok([
        unit(0, 1.0),
        unit(0, 0.1),
        unit(0, -1.0),
        unit(1, 1.0),
        unit(1, -1.0),
    ]
    .into_iter()
    .take(k)
    .collect())
}

/// Step after which exploration can stop for an arm margin `h`:
/// `warm + max(0, ceil(16 C* d sigma^2 / (lambda_min h^2)) - C_b d)` with
/// `C* = c C_a^2 lambda_max / lambda_min + C_b lambda_min / lambda_max`.
pub fn exploration_cutoff(
    spec: &ProblemSpec,
    sched: &TwoPhaseSchedule,
    h: f64,
    c: f64,
    warm: u64,
) -> Result<u64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "cutoff needs a positive finite margin, got {h}"
        )));
    }
    let lmin = spec.lambda_min;
    let lmax = spec.lambda_max.unwrap_or(lmin);
    let d = spec.dim as f64;
    let c_star = c * sched.c_a * sched.c_a * lmax / lmin + sched.c_b * lmin / lmax;
    let need =
        (16.0 * c_star * d * spec.sigma * spec.sigma / (lmin * h * h)).ceil() - sched.c_b * d;
    Ok(warm + need.max(0.0) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RegionCheck {
    pub nesting: u64,
    pub inside_optimal: u64,
    pub chain: u64,
    pub checks: u64,
}

impl RegionCheck {
    pub fn total(&self) -> u64 {
        self.nesting + self.inside_optimal + self.chain
    }
}

/// Random estimates within `h0` of the truth (in norm), per arm.
pub fn perturbed_arms(spec: &ProblemSpec, h0: f64, rng: &mut Rng) -> Vec<Vec<f64>> {
    spec.arms
        .iter()
        .map(|b| {
            let mut u = vec![0.0; spec.dim];
            rng.fill_gaussian(&mut u);
            let r = norm(&u);
            let scale = if r > 0.0 { h0 * rng.uniform() / r } else { 0.0 };
            b.iter().zip(&u).map(|(bi, ui)| bi + scale * ui).collect()
        })
        .collect()
}

/// Empirically checks the conic-region relations over `n_samples` Gaussian
/// covariates: nesting of `U_i(h)` in `h`, `U_i(h)` inside the oracle argmax
/// region for `h > 0`, and `U_i(2h0) ⊆ X(i) ⊆ U_i(-2h0)` for estimates
/// within `h0`.
pub fn check_region_lemmas(
    spec: &ProblemSpec,
    h0: f64,
    n_samples: usize,
    rng: &mut Rng,
) -> Result<RegionCheck> {
    let k = spec.num_arms();
    if k < 2 {
        return Err(Error::InvalidProblem(
            "region checks need at least two arms".into(),
        ));
    }
    let est = perturbed_arms(spec, h0, rng);
    let levels = [
        -4.0 * h0 - 0.1,
        -2.0 * h0,
        -h0,
        0.0,
        h0,
        2.0 * h0,
        4.0 * h0 + 0.1,
        1.0,
    ];
    let mut out = RegionCheck::default();
    let mut x = vec![0.0; spec.dim];
    for _ in 0..n_samples {
        rng.fill_gaussian(&mut x);
        if norm(&x) == 0.0 {
            continue;
        }
        for i in 0..k {
            let m = conic_margin(&x, i, &spec.arms)?;
            for (a, &h1) in levels.iter().enumerate() {
                for &h2 in &levels[..a] {
                    if h1 > h2 && m >= h1 && m < h2 {
                        out.nesting += 1;
                    }
                }
                if h1 > 0.0 && m >= h1 && m <= 0.0 {
                    out.inside_optimal += 1;
                }
            }
            let own = dot(&x, &est[i]);
            let empirical = (0..k).filter(|&j| j != i).all(|j| own > dot(&x, &est[j]));
            if m >= 2.0 * h0 && !empirical && h0 > 0.0 {
                out.chain += 1;
            }
            if h0 == 0.0 && (m > 0.0) != empirical {
                out.chain += 1;
            }
            if empirical && m < -2.0 * h0 {
                out.chain += 1;
            }
            out.checks += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditOptions {
    pub explore: ExplorationSchedule,
    /// Step at which the decaying exploration starts, for cutoff bookkeeping.
    pub cutoff: Option<u64>,
    pub track_inference: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditRun {
    pub t: Vec<u64>,
    pub regret_cum: Vec<f64>,
    /// `err_sq[log point][arm]`
    pub err_sq: Vec<Vec<f64>>,
    pub explore_frac: Vec<f64>,
    pub pull_counts: Vec<u64>,
    pub pulls_after_cutoff: Vec<u64>,
    /// Whether all estimates were within `h/2` of the truth at the cutoff.
    pub within_half_margin_at_cutoff: Option<bool>,
    pub betas: Vec<Vec<f64>>,
    pub t1: Option<u64>,
    pub accumulators: Option<CovAccumulators>,
}

impl BanditRun {
    pub fn final_regret(&self) -> f64 {
        self.regret_cum.last().copied().unwrap_or(0.0)
    }

    pub fn final_errors(&self) -> &[f64] {
        self.err_sq.last().map_or(&[], Vec::as_slice)
    }
}

/// One bandit replication. The stepsize warm start runs at the constant rate,
/// after which every arm shares the decaying rate.
pub fn run_bandit_single(
    spec: &ProblemSpec,
    stream: &mut DataStream,
    sched: &TwoPhaseSchedule,
    opts: &BanditOptions,
    horizon: u64,
    log: &LogSchedule,
    policy_rng: &mut Rng,
) -> Result<BanditRun> {
    spec.validate()?;
    opts.explore.validate()?;
    let k = spec.num_arms();
    let d = spec.dim;
    let mut state = BanditState::new(k, d);
    let mut phases = PhaseController::new(sched.warm_start);
    let mut decay: Option<StepsizeSchedule> = None;
    let mut cursor = LogCursor::new(log, horizon);
    let mut run = BanditRun {
        t: Vec::with_capacity(cursor.len()),
        regret_cum: Vec::with_capacity(cursor.len()),
        err_sq: Vec::with_capacity(cursor.len()),
        explore_frac: Vec::with_capacity(cursor.len()),
        pull_counts: Vec::new(),
        pulls_after_cutoff: vec![0; k],
        within_half_margin_at_cutoff: None,
        betas: Vec::new(),
        t1: None,
        accumulators: opts.track_inference.then(|| CovAccumulators::new(d, k)),
    };
    let max_err = |st: &BanditState| {
        st.betas
            .iter()
            .zip(&spec.arms)
            .map(|(b, s)| dist_sq(b, s))
            .fold(0.0, f64::max)
    };
    let mut x = vec![0.0; d];

    for t in 0..=horizon {
        if decay.is_none() && !phases.constant_at(t, || max_err(&state)) {
            decay = Some(sched.decaying(d as f64, t)?);
            run.t1 = Some(t);
        }
        if opts.cutoff == Some(t) {
            if let Some(h) = spec.margin {
                let ok = state
                    .betas
                    .iter()
                    .zip(&spec.arms)
                    .all(|(b, s)| dist_sq(b, s).sqrt() <= h / 2.0);
                run.within_half_margin_at_cutoff = Some(ok);
            }
        }
        if cursor.hit(t) {
            run.t.push(t);
            run.regret_cum.push(state.regret_cum);
            run.err_sq.push(
                state
                    .betas
                    .iter()
                    .zip(&spec.arms)
                    .map(|(b, s)| dist_sq(b, s))
                    .collect(),
            );
            run.explore_frac.push(if t == 0 {
                0.0
            } else {
                state.explore_count as f64 / t as f64
            });
        }
        if t == horizon {
            break;
        }
        let xi = stream.next_into(&mut x);
        let pi = opts.explore.rate_at(t);
        let (arm, explored) = choose_arm(&x, &state.betas, pi, policy_rng);
        let y = emit_bandit_reward(spec, &x, arm, xi)?;
        state.regret_cum += instantaneous_regret(spec, &x, arm)?;
        if let Some(acc) = run.accumulators.as_mut() {
            acc.accumulate(&x, y, arm, explored, &state.betas[arm]);
        }
        let eta = match &decay {
            Some(s) => s.stepsize_at(t)?,
            None => sched.constant_eta,
        };
        bandit_update(&mut state, &x, y, arm, explored, eta)?;
        if opts.cutoff.is_some_and(|c| t >= c) {
            run.pulls_after_cutoff[arm] += 1;
        }
    }
    run.pull_counts = state.pull_counts;
    run.betas = state.betas;
    Ok(run)
}

/// Cumulative regret of each replication on a shared log grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    pub t: Vec<u64>,
    pub per_replication: Vec<Vec<f64>>,
}

impl RegretLedger {
    pub fn from_runs(runs: &[BanditRun]) -> Self {
        Self {
            t: runs.first().map(|r| r.t.clone()).unwrap_or_default(),
            per_replication: runs.iter().map(|r| r.regret_cum.clone()).collect(),
        }
    }

    pub fn mean_std(&self) -> (Vec<f64>, Vec<f64>) {
        crate::record::mean_std(&self.per_replication)
    }

    pub fn final_mean(&self) -> f64 {
        self.mean_std().0.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditReport {
    pub ledger: RegretLedger,
    pub runs: Vec<BanditRun>,
}

impl BanditReport {
    /// Mean over replications of each arm's squared error at each log point.
    pub fn mean_errors(&self) -> Vec<Vec<f64>> {
        let n = self.runs.len() as f64;
        let Some(first) = self.runs.first() else {
            return Vec::new();
        };
        (0..first.err_sq.len())
            .map(|p| {
                (0..first.err_sq[p].len())
                    .map(|a| self.runs.iter().map(|r| r.err_sq[p][a]).sum::<f64>() / n)
                    .collect()
            })
            .collect()
    }

    pub fn mean_explore_frac(&self) -> Vec<f64> {
        let series: Vec<Vec<f64>> = self.runs.iter().map(|r| r.explore_frac.clone()).collect();
        crate::record::mean_std(&series).0
    }
}

/// Independent replications with per-replication substreams.
#[allow(clippy::too_many_arguments)]
pub fn run_bandit(
    spec: &ProblemSpec,
    streams: &crate::datagen::StreamConfig,
    sched: &TwoPhaseSchedule,
    opts: &BanditOptions,
    horizon: u64,
    log: &LogSchedule,
    replications: usize,
    seed: u64,
) -> Result<BanditReport> {
    if spec.num_arms() < 2 {
        return Err(Error::InvalidProblem(
            "bandit runs need at least two arms".into(),
        ));
    }
    let runs: Vec<Result<BanditRun>> = crate::par::replicate(replications, |r| {
        let mut stream = streams.build(spec, seed, r as u64)?;
        let mut policy = Rng::substream(seed, r as u64, crate::numerics::Stream::Policy);
        run_bandit_single(spec, &mut stream, sched, opts, horizon, log, &mut policy)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BanditReport {
        ledger: RegretLedger::from_runs(&runs),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::StreamConfig;
    use crate::numerics::Rng;
    use crate::schedules::WarmStart;
    use crate::sgd_dense::{sgd_step, DenseSgdState};
    use proptest::prelude::*;

    #[test]
    fn cutoff_formula() {
        let spec = ProblemSpec::bandit(example_arms(2, 5).unwrap(), 1.0);
        let sched = TwoPhaseSchedule {
            constant_eta: 0.1,
            warm_start: WarmStart::Steps(20),
            c_a: 2.0,
            c_b: 10.0,
            lambda_min: 1.0,
        };
        // C* = 4 + 10 = 14; 16 * 14 * 2 / 0.25 = 1792; minus 20
        assert_eq!(
            exploration_cutoff(&spec, &sched, 0.5, 1.0, 20).unwrap(),
            20 + 1772
        );
        assert!(exploration_cutoff(&spec, &sched, 0.0, 1.0, 0).is_err());
        assert_eq!(
            example_arms(3, 2).unwrap(),
            vec![vec![1.0, 0.0, 0.0], vec![0.1, 0.0, 0.0]]
        );
        assert!(example_arms(1, 2).is_err());
    }

    fn arms(v: &[[f64; 2]]) -> Vec<Vec<f64>> {
        v.iter().map(|a| a.to_vec()).collect()
    }

    #[test]
    fn margin_examples() {
        let b = arms(&[[1.0, 0.0], [-1.0, 0.0]]);
        assert_eq!(conic_margin(&[2.0, 0.0], 0, &b).unwrap(), 2.0);
        let same = arms(&[[0.3, 0.1], [0.3, 0.1], [0.3, 0.1]]);
        assert_eq!(conic_margin(&[1.0, 2.0], 1, &same).unwrap(), 0.0);
        assert!(matches!(
            conic_margin(&[0.0, 0.0], 0, &b),
            Err(Error::ZeroCovariate)
        ));
        assert!(conic_margin(&[1.0, 0.0], 0, &b[..1]).is_err());
    }

    #[test]
    fn greedy_choices() {
        let mut rng = Rng::new(1);
        let b = arms(&[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(choose_arm(&[1.0, 0.5], &b, 0.0, &mut rng), (0, false));
        let same = arms(&[[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(choose_arm(&[0.2, 0.7], &same, 0.0, &mut rng), (0, false));
        assert_eq!(choose_arm(&[0.0, 0.0], &b, 0.0, &mut rng), (0, false));
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = Rng::new(2);
        let b = vec![vec![0.0; 2]; 4];
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let (a, e) = choose_arm(&[1.0, 0.0], &b, 1.0, &mut rng);
            assert!(e);
            counts[a] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn update_touches_only_pulled_arm() {
        let mut s = BanditState::new(3, 2);
        s.betas[2] = vec![0.4, -0.1];
        let before = s.clone();
        bandit_update(&mut s, &[1.0, 1.0], 0.5, 1, true, 0.1).unwrap();
        assert_eq!(s.betas[0], before.betas[0]);
        assert_eq!(s.betas[2], before.betas[2]);
        assert_eq!(s.betas[1], vec![0.05, 0.05]);
        assert_eq!(s.pull_counts, vec![0, 1, 0]);
        assert_eq!(s.explore_count, 1);
        assert!(bandit_update(&mut s, &[1.0, 1.0], 0.5, 3, false, 0.1).is_err());
    }

    #[test]
    fn single_arm_matches_sgd_step() {
        let mut b = BanditState::new(1, 2);
        b.betas[0] = vec![1.0, 0.0];
        let mut d = DenseSgdState::new(vec![1.0, 0.0]);
        bandit_update(&mut b, &[1.0, 1.0], 0.5, 0, false, 0.1).unwrap();
        sgd_step(&mut d, &[1.0, 1.0], 0.5, 0.1).unwrap();
        assert_eq!(b.betas[0], d.beta);
        assert_eq!(b.betas[0], vec![0.95, -0.05]);
    }

    #[test]
    fn regret_examples() {
        let spec = ProblemSpec::bandit(arms(&[[1.0, 0.0], [0.0, 1.0]]), 1.0);
        assert_eq!(instantaneous_regret(&spec, &[1.0, 0.0], 1).unwrap(), 1.0);
        assert_eq!(instantaneous_regret(&spec, &[1.0, 0.0], 0).unwrap(), 0.0);
        assert!(instantaneous_regret(&spec, &[1.0, 0.0], 2).is_err());
    }

    #[test]
    fn complexity_examples() {
        let one = ProblemSpec::bandit(arms(&[[1.0, 2.0]]), 1.0);
        assert_eq!(
            complexity_measures(&one),
            Complexity {
                com2: 0.0,
                com1: 0.0,
                com_inf: 0.0
            }
        );
        let two = ProblemSpec::bandit(arms(&[[0.0, 0.0], [1.0, 0.0]]), 1.0);
        assert_eq!(
            complexity_measures(&two),
            Complexity {
                com2: 2.0,
                com1: 2.0,
                com_inf: 1.0
            }
        );
        let same = ProblemSpec::bandit(arms(&[[0.5, 0.5], [0.5, 0.5], [0.5, 0.5]]), 1.0);
        assert_eq!(
            complexity_measures(&same),
            Complexity {
                com2: 0.0,
                com1: 0.0,
                com_inf: 0.0
            }
        );
    }

    fn random_spec(rng: &mut Rng, k: usize, d: usize) -> ProblemSpec {
        ProblemSpec::bandit(
            (0..k)
                .map(|_| (0..d).map(|_| rng.gaussian()).collect())
                .collect(),
            1.0,
        )
    }

    #[test]
    fn region_properties_hold() {
        let mut rng = Rng::new(5);
        let spec = random_spec(&mut rng, 3, 4);
        let c = check_region_lemmas(&spec, 0.05, 20_000, &mut rng).unwrap();
        assert_eq!(c.total(), 0, "{c:?}");
        let c = check_region_lemmas(&spec, 0.0, 20_000, &mut rng).unwrap();
        assert_eq!(c.total(), 0, "{c:?}");
    }

    #[test]
    fn two_dimensional_margin_of_example_arms() {
        let spec = ProblemSpec::bandit(
            arms(&[[1.0, 0.0], [0.1, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
            1.0,
        );
        let h = arm_optimality_margin(&spec, &[1], 0, &mut Rng::new(1)).unwrap();
        // worst direction is the diagonal, where the best arm scores 1/sqrt(2)
        assert!((h - 0.9 / 2f64.sqrt()).abs() < 1e-12, "{h}");
        let scan = (0..100_000)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 100_000.0;
                let x = [a.cos(), a.sin()];
                let best = spec
                    .arms
                    .iter()
                    .map(|b| dot(&x, b))
                    .fold(f64::NEG_INFINITY, f64::max);
                best - dot(&x, &spec.arms[1])
            })
            .fold(f64::INFINITY, f64::min);
        assert!(scan >= h - 1e-12 && scan - h < 1e-6);
        assert_eq!(never_optimal_arms(&spec, 20_000, &mut Rng::new(3)), vec![1]);
        assert_eq!(
            arm_optimality_margin(&spec, &[], 0, &mut Rng::new(1)).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn margin_vanishes_off_the_arm_span() {
        let mut embedded = arms(&[[1.0, 0.0], [0.1, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]);
        embedded.iter_mut().for_each(|b| b.push(0.0));
        let spec = ProblemSpec::bandit(embedded, 1.0);
        let h = arm_optimality_margin(&spec, &[1], 20_000, &mut Rng::new(2)).unwrap();
        assert!(h < 0.2, "{h}");
    }

    #[test]
    fn identical_arms_have_zero_regret() {
        let spec = ProblemSpec::bandit(vec![vec![0.5, -0.5]; 3], 1.0);
        let sched = TwoPhaseSchedule {
            constant_eta: 0.1,
            warm_start: WarmStart::Steps(10),
            c_a: 3.0,
            c_b: 10.0,
            lambda_min: 1.0,
        };
        let opts = BanditOptions {
            explore: ExplorationSchedule::ConstantPi { rate: 0.5 },
            cutoff: None,
            track_inference: false,
        };
        let rep = run_bandit(
            &spec,
            &StreamConfig::iid(),
            &sched,
            &opts,
            2000,
            &LogSchedule::default(),
            2,
            1,
        )
        .unwrap();
        assert!(rep.runs.iter().all(|r| r.final_regret() == 0.0));
    }

    #[test]
    fn uniform_exploration_pull_counts() {
        let spec = ProblemSpec::bandit(arms(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]), 1.0);
        let sched = TwoPhaseSchedule {
            constant_eta: 0.05,
            warm_start: WarmStart::Steps(0),
            c_a: 3.0,
            c_b: 10.0,
            lambda_min: 1.0,
        };
        let opts = BanditOptions {
            explore: ExplorationSchedule::ConstantPi { rate: 1.0 },
            cutoff: None,
            track_inference: false,
        };
        let horizon = 30_000u64;
        let rep = run_bandit(
            &spec,
            &StreamConfig::iid(),
            &sched,
            &opts,
            horizon,
            &LogSchedule::default(),
            1,
            7,
        )
        .unwrap();
        let p = 1.0 / 3.0;
        let sd = (horizon as f64 * p * (1.0 - p)).sqrt();
        for &c in &rep.runs[0].pull_counts {
            assert!((c as f64 - horizon as f64 * p).abs() <= 3.0 * sd);
        }
        assert_eq!(rep.runs[0].pull_counts.iter().sum::<u64>(), horizon);
    }

    #[test]
    fn bandit_runs_are_deterministic() {
        let spec = ProblemSpec::bandit(arms(&[[1.0, 0.0], [0.0, 1.0]]), 1.0);
        let sched = TwoPhaseSchedule {
            constant_eta: 0.05,
            warm_start: WarmStart::Steps(20),
            c_a: 3.0,
            c_b: 10.0,
            lambda_min: 1.0,
        };
        let opts = BanditOptions {
            explore: ExplorationSchedule::Harmonic { c_pi: 50.0 },
            cutoff: None,
            track_inference: true,
        };
        let go = || {
            run_bandit(
                &spec,
                &StreamConfig::dependent(),
                &sched,
                &opts,
                3000,
                &LogSchedule::default(),
                3,
                11,
            )
            .unwrap()
        };
        let a = go();
        assert_eq!(a, go());
        for s in &a.ledger.per_replication {
            assert!(s.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    proptest! {
        #[test]
        fn cone_scale_invariance(
            x in proptest::collection::vec(-5.0f64..5.0, 3),
            a in 1e-3f64..1e3,
            seed in 0u64..1000,
            h in -1.0f64..1.0,
        ) {
            prop_assume!(norm(&x) > 1e-6);
            let spec = random_spec(&mut Rng::new(seed), 3, 3);
            let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
            for i in 0..3 {
                let m1 = conic_margin(&x, i, &spec.arms).unwrap();
                let m2 = conic_margin(&ax, i, &spec.arms).unwrap();
                prop_assert!((m1 - m2).abs() <= 1e-12 * (1.0 + m1.abs()));
                if (m1 - h).abs() > 1e-9 {
                    prop_assert_eq!(m1 >= h, m2 >= h);
                }
            }
        }

        #[test]
        fn nesting_is_pointwise(x in proptest::collection::vec(-5.0f64..5.0, 2), h1 in -2.0f64..2.0, dh in 0.0f64..2.0) {
            prop_assume!(norm(&x) > 1e-9);
            let b = arms(&[[1.0, 0.0], [0.0, 1.0], [-0.5, -0.5]]);
            let h2 = h1 - dh;
            for i in 0..3 {
                let m = conic_margin(&x, i, &b).unwrap();
                if m >= h1 {
                    prop_assert!(m >= h2);
                }
            }
        }

        #[test]
        fn regret_nonnegative(x in proptest::collection::vec(-5.0f64..5.0, 3), arm in 0usize..4, seed in 0u64..100) {
            let spec = random_spec(&mut Rng::new(seed), 4, 3);
            let r = instantaneous_regret(&spec, &x, arm).unwrap();
            prop_assert!(r >= 0.0);
            if arm == greedy_arm(&x, &spec.arms) {
                prop_assert_eq!(r, 0.0);
            }
        }
    }
}
