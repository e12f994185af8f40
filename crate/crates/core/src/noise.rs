//! Seeded, replayable noise streams.

use rand::distributions::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Identifies one independent random stream.
///
/// The pair `(seed, stream_id)` keys a ChaCha8 generator: the seed fills
/// the key and the stream id selects the ChaCha stream, so distinct ids
/// under one seed never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream for sub-task `label`. Children of different parents or
    /// labels get (with overwhelming probability) different ids.
    pub fn derive(&self, label: u64) -> RngStream {
        let mixed = splitmix64(splitmix64(self.stream_id) ^ label.wrapping_mul(0xA24B_AED4_963E_E407));
        RngStream { seed: self.seed, stream_id: mixed }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Laplace,
    Gaussian,
}

impl NoiseKind {
    pub fn sample_vec(self, n: usize, scale: f64, stream: &RngStream) -> Result<Vec<f64>> {
        match self {
            NoiseKind::Laplace => sample_laplace_vec(n, scale, stream),
            NoiseKind::Gaussian => sample_gaussian_vec(n, scale, stream),
        }
    }

    /// Adds fresh noise of the given scale to `x` in place.
    pub(crate) fn add_to(self, x: &mut [f64], scale: f64, stream: &RngStream) {
        let mut rng = stream.rng();
        match self {
            NoiseKind::Laplace => {
                for xi in x.iter_mut() {
                    *xi += laplace(&mut rng, scale);
                }
            }
            NoiseKind::Gaussian => {
                for xi in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *xi += scale * z;
                }
            }
        }
    }
}

/// Inverse-CDF Laplace draw with scale `b`: density `exp(-|x|/b) / 2b`.
fn laplace<R: rand::Rng>(rng: &mut R, b: f64) -> f64 {
    let u: f64 = Open01.sample(rng);
    let v = u - 0.5;
    // v is strictly inside (-1/2, 1/2), so the log argument is in (0, 1].
    -b * v.signum() * (1.0 - 2.0 * v.abs()).ln()
}

fn check(n: usize, scale: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("noise vector length must be at least 1"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("noise scale must be positive and finite, got {scale}")));
    }
    Ok(())
}

/// `n` i.i.d. Laplace draws with scale `scale` (variance `2 scale^2`).
pub fn sample_laplace_vec(n: usize, scale: f64, stream: &RngStream) -> Result<Vec<f64>> {
    check(n, scale)?;
    let mut rng = stream.rng();
    Ok((0..n).map(|_| laplace(&mut rng, scale)).collect())
}

/// `n` i.i.d. zero-mean Gaussian draws with standard deviation `sigma`.
pub fn sample_gaussian_vec(n: usize, sigma: f64, stream: &RngStream) -> Result<Vec<f64>> {
    check(n, sigma)?;
    let mut rng = stream.rng();
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn laplace_moments() {
        let x = sample_laplace_vec(1_000_000, 1.0, &RngStream::new(7, 0)).unwrap();
        let (mean, var) = moments(&x);
        assert!(mean.abs() <= 0.01, "mean {mean}");
        assert!((1.9..=2.1).contains(&var), "var {var}");
    }

    #[test]
    fn gaussian_moments() {
        let x = sample_gaussian_vec(1_000_000, 1.0, &RngStream::new(7, 1)).unwrap();
        let (mean, var) = moments(&x);
        assert!(mean.abs() <= 0.01, "mean {mean}");
        assert!((0.98..=1.02).contains(&var), "var {var}");
    }

    #[test]
    fn tiny_scale_gives_tiny_draws() {
        let s = RngStream::new(1, 2);
        assert!(sample_laplace_vec(10_000, 1e-300, &s).unwrap().iter().all(|v| v.abs() < 1e-290));
        assert!(sample_gaussian_vec(10_000, 1e-300, &s).unwrap().iter().all(|v| v.abs() < 1e-290));
    }

    #[test]
    fn same_stream_same_output() {
        let s = RngStream::new(42, 9);
        assert_eq!(sample_laplace_vec(100, 0.3, &s).unwrap(), sample_laplace_vec(100, 0.3, &s).unwrap());
        assert_eq!(sample_gaussian_vec(100, 0.3, &s).unwrap(), sample_gaussian_vec(100, 0.3, &s).unwrap());
        assert_ne!(
            sample_laplace_vec(100, 0.3, &s).unwrap(),
            sample_laplace_vec(100, 0.3, &RngStream::new(42, 10)).unwrap()
        );
    }

    #[test]
    fn rejects_bad_scale() {
        let s = RngStream::new(0, 0);
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(sample_laplace_vec(3, bad, &s).is_err());
            assert!(sample_gaussian_vec(3, bad, &s).is_err());
        }
        assert!(sample_laplace_vec(0, 1.0, &s).is_err());
    }

    #[test]
    fn laplace_ks_statistic() {
        let mut x = sample_laplace_vec(100_000, 1.0, &RngStream::new(3, 3)).unwrap();
        x.sort_by(f64::total_cmp);
        let cdf = |t: f64| if t < 0.0 { 0.5 * t.exp() } else { 1.0 - 0.5 * (-t).exp() };
        let n = x.len() as f64;
        let ks = x
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let f = cdf(t);
                (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let a = sample_laplace_vec(100_000, 1.0, &RngStream::new(5, 0)).unwrap();
        let b = sample_laplace_vec(100_000, 1.0, &RngStream::new(5, 1)).unwrap();
        let (ma, va) = moments(&a);
        let (mb, vb) = moments(&b);
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0);
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 0.02, "correlation {corr}");

        let d = RngStream::new(5, 0).derive(1);
        assert_ne!(d, RngStream::new(5, 0).derive(2));
        assert_ne!(d, RngStream::new(5, 1).derive(1));
    }
}
