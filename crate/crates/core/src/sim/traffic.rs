//! Random inputs: Poisson measurement arrivals and per-message link delays.
//!
//! All randomness comes from ChaCha20 keyed by the scenario seed. Stream 0
//! drives the measurement process and stream `1 + i` drives link `i`, so a
//! change on one link never perturbs the draws of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::config::{ConfigError, LinkSpec, NoiseModel};

pub const MEASUREMENT_STREAM: u64 = 0;

pub fn link_stream(link_index: usize) -> u64 {
    1 + link_index as u64
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` Poisson arrival instants with rate `n / horizon`. Times past the
/// horizon are kept.
pub fn generate_measurement_times(
    seed: u64,
    horizon: f64,
    n: usize,
) -> Result<Vec<f64>, ConfigError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(ConfigError::Invalid(vec![format!(
            "horizon_s must be > 0 to place {n} measurements, got {horizon}"
        )]));
    }
    let exp = Exp::new(n as f64 / horizon).expect("positive finite rate");
    let mut rng = stream_rng(seed, MEASUREMENT_STREAM);
    let mut t = 0.0;
    let mut times = Vec::with_capacity(n);
    while times.len() < n {
        let gap: f64 = exp.sample(&mut rng);
        // zero-length gaps would break strict ordering
        if gap > 0.0 {
            t += gap;
            times.push(t);
        }
    }
    Ok(times)
}

/// Noise part of one message delay (always `>= 0`).
pub fn noise_draw<R: Rng + ?Sized>(noise: &NoiseModel, rng: &mut R) -> f64 {
    match *noise {
        NoiseModel::None => 0.0,
        NoiseModel::Gaussian(sigma) if sigma <= 0.0 => 0.0,
        NoiseModel::Gaussian(sigma) => {
            let normal = Normal::new(0.0, sigma).expect("valid sigma");
            loop {
                let x: f64 = normal.sample(rng);
                if x >= 0.0 {
                    return x;
                }
            }
        }
        NoiseModel::Exponential(mean) if mean <= 0.0 => 0.0,
        NoiseModel::Exponential(mean) => Exp::new(1.0 / mean).expect("valid mean").sample(rng),
    }
}

/// Fixed plus noise delay of one message, in seconds.
pub fn link_delay<R: Rng + ?Sized>(link: &LinkSpec, rng: &mut R) -> f64 {
    link.fixed_delay_s() + noise_draw(&link.noise, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{FixedDelay, SPEED_OF_LIGHT_MPS};

    fn link(fixed: FixedDelay, noise: NoiseModel) -> LinkSpec {
        LinkSpec {
            upstream: "a".into(),
            downstream: "b".into(),
            fixed,
            noise,
            prop_speed_mps: SPEED_OF_LIGHT_MPS,
        }
    }

    #[test]
    fn noiseless_delays() {
        let mut rng = stream_rng(7, 1);
        let d = link_delay(
            &link(FixedDelay::DistanceM(200.0), NoiseModel::None),
            &mut rng,
        );
        assert!((d - 6.6711e-7).abs() < 1e-11);
        let d = link_delay(
            &link(FixedDelay::DistanceM(100.0), NoiseModel::None),
            &mut rng,
        );
        assert!((d - 3.3356e-7).abs() < 1e-11);
        let d = link_delay(&link(FixedDelay::Seconds(0.0), NoiseModel::None), &mut rng);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn noisy_delays_are_nonnegative() {
        let mut rng = stream_rng(3, 2);
        for noise in [NoiseModel::Gaussian(1e-6), NoiseModel::Exponential(1e-6)] {
            let l = link(FixedDelay::Seconds(1e-6), noise);
            let draws: Vec<f64> = (0..2000).map(|_| link_delay(&l, &mut rng)).collect();
            assert!(draws.iter().all(|&d| d >= 1e-6));
            let mean_noise = draws.iter().map(|d| d - 1e-6).sum::<f64>() / draws.len() as f64;
            // half-normal mean is σ·sqrt(2/π) ≈ 0.798σ; exponential mean is the parameter
            let want = match noise {
                NoiseModel::Gaussian(s) => s * (2.0 / std::f64::consts::PI).sqrt(),
                _ => 1e-6,
            };
            assert!(
                (mean_noise - want).abs() < 0.1 * want,
                "{noise}: {mean_noise}"
            );
        }
    }

    #[test]
    fn no_measurements() {
        assert!(generate_measurement_times(1, 120.0, 0).unwrap().is_empty());
        assert!(generate_measurement_times(1, 0.0, 0).unwrap().is_empty());
        assert!(generate_measurement_times(1, 0.0, 3).is_err());
    }

    #[test]
    fn poisson_times() {
        let a = generate_measurement_times(42, 120.0, 100).unwrap();
        assert_eq!(a, generate_measurement_times(42, 120.0, 100).unwrap());
        assert_ne!(a, generate_measurement_times(43, 120.0, 100).unwrap());
        assert_eq!(a.len(), 100);
        assert!(a[0] > 0.0);
        assert!(a.windows(2).all(|w| w[1] > w[0]));
    }

    /// Across many seeds the sample mean gap stays within 3 standard errors
    /// of 1.2 s (standard error of the mean of 100 exponentials: 1.2 / 10).
    #[test]
    fn mean_gap_matches_rate() {
        let mut outside = 0;
        for seed in 0..200 {
            let t = generate_measurement_times(seed, 120.0, 100).unwrap();
            let mean_gap = t[99] / 100.0;
            if (mean_gap - 1.2).abs() > 3.0 * 0.12 {
                outside += 1;
            }
        }
        // P(|Z| > 3) ≈ 0.27%
        assert!(outside <= 3, "{outside} of 200 seeds outside 3 SE");
    }

    #[test]
    fn streams_are_independent() {
        let mut a = stream_rng(5, link_stream(0));
        let mut b = stream_rng(5, link_stream(1));
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        assert_ne!(xa, xb);
    }
}
