//! Plug-in covariance estimates, limiting variances and CI coverage.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::bandit::{run_bandit_single, BanditOptions};
use crate::datagen::{ProblemSpec, StreamConfig};
use crate::error::{Error, Result};
use crate::numerics::{sym_eigendecompose, Mat, Rng, Stream};
use crate::record::LogSchedule;
use crate::schedules::{ExplorationSchedule, TwoPhaseSchedule};

const EIGEN_TOL: f64 = 1e-12;

/// Running sums for the plug-in estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct CovAccumulators {
    pub t: u64,
    pub s_xx: Mat,
    /// Exploitation-only `sum x x^T` per arm.
    pub s_arm: Vec<Mat>,
    pub n_exploit: Vec<u64>,
    /// `sum (y - x.beta_a)^2` with the working estimate of the pulled arm.
    pub rss: f64,
}

impl CovAccumulators {
    pub fn new(d: usize, k: usize) -> Self {
        Self {
            t: 0,
            s_xx: Mat::zeros(d),
            s_arm: vec![Mat::zeros(d); k],
            n_exploit: vec![0; k],
            rss: 0.0,
        }
    }

    pub fn accumulate(&mut self, x: &[f64], y: f64, arm: usize, explored: bool, beta_arm: &[f64]) {
        self.s_xx.add_outer(1.0, x);
        if !explored {
            self.s_arm[arm].add_outer(1.0, x);
            self.n_exploit[arm] += 1;
        }
        let r = y - crate::numerics::dot(x, beta_arm);
        self.rss += r * r;
        self.t += 1;
    }

    fn require_samples(&self) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::InvalidProblem("no samples accumulated".into()));
        }
        Ok(self.t as f64)
    }

    /// `S_xx / t`
    pub fn sigma_star_hat(&self) -> Result<Mat> {
        Ok(self.s_xx.scaled(1.0 / self.require_samples()?))
    }

    /// `S_i / ((1 - pi*) t)`
    pub fn sigma_arm_hat(&self, arm: usize, pi_star: f64) -> Result<Mat> {
        let t = self.require_samples()?;
        let k = self.s_arm.len();
        let s = self.s_arm.get(arm).ok_or(Error::ArmOutOfRange { arm, k })?;
        if self.n_exploit[arm] == 0 {
            return Err(Error::NoExploitSamples(arm));
        }
        Ok(s.scaled(1.0 / ((1.0 - pi_star) * t)))
    }

    /// `(pi*/K) Sigma*_hat + (1 - pi*) Sigma_i_hat`; the second term is skipped when `pi* = 1`.
    pub fn finalize_sigma_combined(&self, arm: usize, pi_star: f64, k: usize) -> Result<Mat> {
        let k_arms = self.s_arm.len();
        if arm >= k_arms {
            return Err(Error::ArmOutOfRange { arm, k: k_arms });
        }
        let mut out = self.sigma_star_hat()?.scaled(pi_star / k as f64);
        if pi_star < 1.0 {
            out.add_scaled(1.0 - pi_star, &self.sigma_arm_hat(arm, pi_star)?);
        }
        Ok(out)
    }

    /// `rss / t`
    pub fn noise_var_hat(&self) -> Result<f64> {
        Ok(self.rss / self.require_samples()?)
    }
}

/// `sigma^2 / lambda_j * (C lambda_j)^2 / (2 C lambda_j - 1)` per eigenvalue.
pub fn limiting_variance_diag(
    lambda_raw: &[f64],
    c_a_prime: f64,
    sigma_star: f64,
) -> Result<Vec<f64>> {
    lambda_raw
        .iter()
        .enumerate()
        .map(|(index, &l)| {
            let cl = c_a_prime * l;
            if !(2.0 * cl > 1.0) {
                return Err(Error::DegenerateVariance {
                    index,
                    value: 2.0 * cl,
                });
            }
            Ok(sigma_star * sigma_star / l * cl * cl / (2.0 * cl - 1.0))
        })
        .collect()
}

/// Limiting covariance `U diag(lambda_c) U^T` of `sqrt(t) (beta_t - beta*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitingVariance {
    pub u: Mat,
    pub lambda_raw: Vec<f64>,
    pub lambda_c: Vec<f64>,
    pub c_a_prime: f64,
    pub sigma_star: f64,
}

impl LimitingVariance {
    pub fn from_sigma(sigma: &Mat, c_a_prime: f64, sigma_star: f64) -> Result<Self> {
        let eig = sym_eigendecompose(sigma, EIGEN_TOL)?;
        let lambda_c = limiting_variance_diag(&eig.values, c_a_prime, sigma_star)?;
        Ok(Self {
            u: eig.vectors,
            lambda_raw: eig.values,
            lambda_c,
            c_a_prime,
            sigma_star,
        })
    }

    pub fn covariance(&self) -> Mat {
        let n = self.lambda_c.len();
        Mat::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.u[(i, k)] * self.lambda_c[k] * self.u[(j, k)])
                .sum()
        })
    }
}

/// `sqrt(t) diag(lambda_c)^{-1/2} U^T (beta_t - beta*)`.
pub fn whiten_and_test(
    beta_t: &[f64],
    beta_star: &[f64],
    t: u64,
    u: &Mat,
    lambda_c: &[f64],
) -> Result<Vec<f64>> {
    if let Some((index, &value)) = lambda_c.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::DegenerateVariance { index, value });
    }
    let diff: Vec<f64> = beta_t.iter().zip(beta_star).map(|(a, b)| a - b).collect();
    let rotated = u.mul_t_vec(&diff);
    let st = (t as f64).sqrt();
    Ok(rotated
        .iter()
        .zip(lambda_c)
        .map(|(r, l)| st * r / l.sqrt())
        .collect())
}

/// Inverse of [`whiten_and_test`]: `beta* + U diag(lambda_c)^{1/2} z / sqrt(t)`.
pub fn unwhiten(z: &[f64], beta_star: &[f64], t: u64, u: &Mat, lambda_c: &[f64]) -> Vec<f64> {
    let st = (t as f64).sqrt();
    let scaled: Vec<f64> = z
        .iter()
        .zip(lambda_c)
        .map(|(v, l)| v * l.sqrt() / st)
        .collect();
    u.mul_vec(&scaled)
        .iter()
        .zip(beta_star)
        .map(|(a, b)| a + b)
        .collect()
}

/// Two-sided standard normal quantile for coverage `level`.
pub fn normal_two_sided(level: f64) -> f64 {
    if level >= 1.0 {
        f64::INFINITY
    } else if level <= 0.0 {
        0.0
    } else {
        Normal::standard().inverse_cdf(0.5 + level / 2.0)
    }
}

pub fn chi_squared_quantile(level: f64, dof: usize) -> f64 {
    if level >= 1.0 {
        f64::INFINITY
    } else if level <= 0.0 {
        0.0
    } else {
        ChiSquared::new(dof as f64)
            .expect("positive dof")
            .inverse_cdf(level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhitenedRow {
    pub replication: usize,
    pub arm: usize,
    pub coordinate: usize,
    pub value: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmCoverage {
    pub arm: usize,
    /// Per-coordinate marginal coverage at `level`.
    pub marginal: Vec<f64>,
    /// Joint coverage of the Sidak-adjusted rectangle.
    pub rectangle: f64,
    /// Joint coverage of the chi-squared ellipsoid.
    pub ellipsoid: f64,
}

/// Empirical vs. formula variance of `sqrt(t)(beta_t - beta*)` along the
/// eigenvectors of the replication-averaged plug-in covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCheck {
    pub arm: usize,
    pub empirical: Vec<f64>,
    pub theoretical: Vec<f64>,
}

impl VarianceCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.empirical
            .iter()
            .zip(&self.theoretical)
            .map(|(e, t)| ((e - t) / t).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub level: f64,
    pub t_eval: u64,
    pub replications: usize,
    pub arms: Vec<ArmCoverage>,
    pub variance: Vec<VarianceCheck>,
    pub rows: Vec<WhitenedRow>,
}

struct ReplicationResult {
    scaled_err: Vec<Vec<f64>>,
    sigma: Vec<Mat>,
    noise_var: f64,
    z: Vec<Vec<f64>>,
}

/// Runs `replications` independent bandits (or a regression when K = 1) to
/// `t_eval` and checks whitened plug-in confidence regions against the truth.
#[allow(clippy::too_many_arguments)]
pub fn coverage_experiment(
    spec: &ProblemSpec,
    streams: &StreamConfig,
    sched: &TwoPhaseSchedule,
    explore: &ExplorationSchedule,
    t_eval: u64,
    level: f64,
    replications: usize,
    seed: u64,
) -> Result<CoverageReport> {
    if t_eval == 0 {
        return Err(Error::InvalidProblem("coverage needs t_eval >= 1".into()));
    }
    let k = spec.num_arms();
    let d = spec.dim;
    let pi_star = explore.limit();
    let c_a_prime = sched.c_a_prime();
    let opts = BanditOptions {
        explore: *explore,
        cutoff: None,
        track_inference: true,
    };
    let log = LogSchedule::Every(t_eval);

    let results: Vec<Result<ReplicationResult>> = crate::par::replicate(replications, |r| {
        let mut stream = streams.build(spec, seed, r as u64)?;
        let mut policy = Rng::substream(seed, r as u64, Stream::Policy);
        let run = run_bandit_single(spec, &mut stream, sched, &opts, t_eval, &log, &mut policy)?;
        let acc = run.accumulators.expect("tracking enabled");
        let noise_var = acc.noise_var_hat()?;
        let st = (t_eval as f64).sqrt();
        let mut out = ReplicationResult {
            scaled_err: Vec::with_capacity(k),
            sigma: Vec::with_capacity(k),
            noise_var,
            z: Vec::with_capacity(k),
        };
        for arm in 0..k {
            let sigma = acc.finalize_sigma_combined(arm, pi_star, k)?;
            let lv = LimitingVariance::from_sigma(&sigma, c_a_prime, noise_var.sqrt())?;
            out.z.push(whiten_and_test(
                &run.betas[arm],
                &spec.arms[arm],
                t_eval,
                &lv.u,
                &lv.lambda_c,
            )?);
            out.scaled_err.push(
                run.betas[arm]
                    .iter()
                    .zip(&spec.arms[arm])
                    .map(|(b, s)| st * (b - s))
                    .collect(),
            );
            out.sigma.push(sigma);
        }
        Ok(out)
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let q_marginal = normal_two_sided(level);
    let q_rect = normal_two_sided(level.clamp(0.0, 1.0).powf(1.0 / d as f64));
    let q_ellipse = chi_squared_quantile(level, d);
    let n = results.len() as f64;
    let mut rows = Vec::with_capacity(results.len() * k * d);
    let mut arms = Vec::with_capacity(k);
    let mut variance = Vec::with_capacity(k);
    for arm in 0..k {
        let mut marginal = vec![0usize; d];
        let mut rectangle = 0usize;
        let mut ellipsoid = 0usize;
        for (rep, res) in results.iter().enumerate() {
            let z = &res.z[arm];
            for (j, &v) in z.iter().enumerate() {
                let covered = v.abs() < q_marginal;
                marginal[j] += usize::from(covered);
                rows.push(WhitenedRow {
                    replication: rep,
                    arm,
                    coordinate: j,
                    value: v,
                    covered,
                });
            }
            rectangle += usize::from(z.iter().all(|v| v.abs() < q_rect));
            ellipsoid += usize::from(z.iter().map(|v| v * v).sum::<f64>() < q_ellipse);
        }
        arms.push(ArmCoverage {
            arm,
            marginal: marginal.iter().map(|&c| c as f64 / n).collect(),
            rectangle: rectangle as f64 / n,
            ellipsoid: ellipsoid as f64 / n,
        });

        let mut mean_sigma = Mat::zeros(d);
        for res in &results {
            mean_sigma.add_scaled(1.0 / n, &res.sigma[arm]);
        }
        let mean_noise = results.iter().map(|r| r.noise_var).sum::<f64>() / n;
        let lv = LimitingVariance::from_sigma(&mean_sigma, c_a_prime, mean_noise.sqrt())?;
        let projections: Vec<Vec<f64>> = results
            .iter()
            .map(|r| lv.u.mul_t_vec(&r.scaled_err[arm]))
            .collect();
        let empirical = (0..d)
            .map(|j| {
                let m = projections.iter().map(|p| p[j]).sum::<f64>() / n;
                projections.iter().map(|p| (p[j] - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)
            })
            .collect();
        variance.push(VarianceCheck {
            arm,
            empirical,
            theoretical: lv.lambda_c,
        });
    }
    Ok(CoverageReport {
        level,
        t_eval,
        replications: results.len(),
        arms,
        variance,
        rows,
    })
}
