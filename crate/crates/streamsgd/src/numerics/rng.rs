use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Labels for independent substreams inside one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Stream {
    Covariate = 1,
    Noise = 2,
    Policy = 3,
    Init = 4,
    Aux = 5,
}

/// Deterministic generator (ChaCha8) seeded from a 64-bit value.
///
/// Substreams share the seed but use distinct ChaCha stream ids, so draws from
/// different (replication, label) pairs never overlap.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
    seed: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn substream(seed: u64, replication: u64, label: Stream) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream((replication << 8) | label as u64);
        Self { inner, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gaussian(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.inner.sample(StandardNormal);
        }
    }

    pub fn rademacher(&mut self) -> f64 {
        if self.inner.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Always consumes exactly one uniform draw, so streams stay aligned
    /// across different probabilities.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

pub fn sample_gaussian_vector(rng: &mut Rng, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    rng.fill_gaussian(&mut v);
    v
}

pub fn sample_rademacher(rng: &mut Rng) -> f64 {
    rng.rademacher()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let a: Vec<f64> = {
            let mut r = Rng::new(7);
            (0..100).map(|_| r.gaussian()).collect()
        };
        let b: Vec<f64> = {
            let mut r = Rng::new(7);
            (0..100).map(|_| r.gaussian()).collect()
        };
        assert_eq!(a, b);
        let mut r1 = Rng::new(11);
        let mut r2 = Rng::new(11);
        assert_eq!(
            sample_gaussian_vector(&mut r1, 1),
            sample_gaussian_vector(&mut r2, 1)
        );
    }

    #[test]
    fn substreams_differ() {
        let mut a = Rng::substream(3, 0, Stream::Covariate);
        let mut b = Rng::substream(3, 0, Stream::Noise);
        let mut c = Rng::substream(3, 1, Stream::Covariate);
        let xa: Vec<f64> = (0..8).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..8).map(|_| b.uniform()).collect();
        let xc: Vec<f64> = (0..8).map(|_| c.uniform()).collect();
        assert_ne!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn substreams_are_uncorrelated() {
        let mut a = Rng::substream(5, 2, Stream::Covariate);
        let mut b = Rng::substream(5, 2, Stream::Noise);
        let n = 100_000;
        let s: f64 = (0..n).map(|_| a.gaussian() * b.gaussian()).sum();
        assert!((s / n as f64).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn gaussian_mean_d3() {
        let mut r = Rng::new(1);
        let n = 100_000;
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let v = sample_gaussian_vector(&mut r, 3);
            for j in 0..3 {
                mean[j] += v[j] / n as f64;
            }
        }
        for m in mean {
            assert!(m.abs() < 0.02, "{m}");
        }
    }

    #[test]
    fn gaussian_covariance_d2() {
        let mut r = Rng::new(2);
        let n = 100_000;
        let mut c = [[0.0; 2]; 2];
        for _ in 0..n {
            let v = sample_gaussian_vector(&mut r, 2);
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += v[i] * v[j] / n as f64;
                }
            }
        }
        assert!((c[0][0] - 1.0).abs() < 0.05);
        assert!((c[1][1] - 1.0).abs() < 0.05);
        assert!(c[0][1].abs() < 0.05);
    }

    #[test]
    fn rademacher_values_and_mean() {
        let mut r = Rng::new(3);
        let n = 100_000;
        let mut s = 0.0;
        for _ in 0..n {
            let v = sample_rademacher(&mut r);
            assert!(v == 1.0 || v == -1.0);
            s += v;
        }
        assert!((s / n as f64).abs() < 0.02);
        let mut a = Rng::new(9);
        let mut b = Rng::new(9);
        for _ in 0..50 {
            assert_eq!(a.rademacher(), b.rademacher());
        }
    }

    #[test]
    fn bernoulli_extremes() {
        let mut r = Rng::new(4);
        for _ in 0..1000 {
            assert!(!r.bernoulli(0.0));
            assert!(r.bernoulli(1.0));
        }
    }
}
