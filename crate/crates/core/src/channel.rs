//! Channel-matrix samplers.
//!
//! All samplers take an `M x K` matrix of link distances (rows are UAVs,
//! columns are the users of one group) and return one realization of the
//! `M x K` complex channel for one coherence interval.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelModel {
    /// Deterministic inverse-distance amplitude, i.i.d. uniform phase.
    LosRandomPhase,
    /// Independent CSCG entries with per-link variance `tau0 / d^2`.
    RayleighPerLink,
    /// Each column CSCG with the user's total power spread evenly over UAVs.
    RayleighIsotropic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: DMatrix<Complex64>,
    pub model: ChannelModel,
}

impl ChannelMatrix {
    pub fn num_uavs(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.entries.ncols()
    }
}

/// Average channel power gain `tau0 / d^2` at distance `d`.
pub fn path_gain(d: f64, tau0: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("path gain needs a positive distance, got {d}")));
    }
    Ok(tau0 / (d * d))
}

fn check_distances(distances: &DMatrix<f64>) -> Result<()> {
    match distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        Some(d) => Err(Error::domain(format!("link distances must be positive, got {d}"))),
        None => Ok(()),
    }
}

/// CSCG sample with variance `var` (each of re/im has `var / 2`).
fn cscg<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

pub fn sample_los_random_phase<R: Rng + ?Sized>(
    distances: &DMatrix<f64>,
    tau0: f64,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    check_distances(distances)?;
    let entries = DMatrix::from_fn(distances.nrows(), distances.ncols(), |m, k| {
        let amp = tau0.sqrt() / distances[(m, k)];
        let theta = rng.random_range(0.0..2.0 * PI);
        Complex64::from_polar(amp, theta)
    });
    Ok(ChannelMatrix {
        entries,
        model: ChannelModel::LosRandomPhase,
    })
}

pub fn sample_rayleigh<R: Rng + ?Sized>(
    distances: &DMatrix<f64>,
    tau0: f64,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    check_distances(distances)?;
    let entries = DMatrix::from_fn(distances.nrows(), distances.ncols(), |m, k| {
        let d = distances[(m, k)];
        cscg(rng, tau0 / (d * d))
    });
    Ok(ChannelMatrix {
        entries,
        model: ChannelModel::RayleighPerLink,
    })
}

/// Per-entry variance of column `k` under the isotropic approximation:
/// `tau0 * sum_m d_{k,m}^-2 / M`.
pub fn isotropic_variance(distances: &DMatrix<f64>, k: usize, tau0: f64) -> f64 {
    let col = distances.column(k);
    tau0 * col.iter().map(|d| d.powi(-2)).sum::<f64>() / col.len() as f64
}

pub fn sample_isotropic<R: Rng + ?Sized>(
    distances: &DMatrix<f64>,
    tau0: f64,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    check_distances(distances)?;
    let vars: Vec<f64> = (0..distances.ncols())
        .map(|k| isotropic_variance(distances, k, tau0))
        .collect();
    let entries = DMatrix::from_fn(distances.nrows(), distances.ncols(), |_, k| cscg(rng, vars[k]));
    Ok(ChannelMatrix {
        entries,
        model: ChannelModel::RayleighIsotropic,
    })
}

pub fn sample<R: Rng + ?Sized>(
    model: ChannelModel,
    distances: &DMatrix<f64>,
    tau0: f64,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    match model {
        ChannelModel::LosRandomPhase => sample_los_random_phase(distances, tau0, rng),
        ChannelModel::RayleighPerLink => sample_rayleigh(distances, tau0, rng),
        ChannelModel::RayleighIsotropic => sample_isotropic(distances, tau0, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamTag};
    use approx::assert_relative_eq;

    fn dists() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 2, &[100.0, 150.0, 120.0, 200.0, 180.0, 110.0])
    }

    #[test]
    fn path_gain_examples() {
        assert_relative_eq!(path_gain(1.0, 1e-4).unwrap(), 1e-4);
        assert_relative_eq!(path_gain(100.0, 1e-4).unwrap(), 1e-8, max_relative = 1e-12);
        assert_relative_eq!(path_gain(10.0, 1.0).unwrap(), 1e-2, max_relative = 1e-12);
        assert!(matches!(path_gain(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn los_amplitude_is_deterministic() {
        let d = dists();
        let mut rng = substream(3, StreamTag::Channel, &[0]);
        let h = sample_los_random_phase(&d, 1e-4, &mut rng).unwrap();
        for m in 0..3 {
            for k in 0..2 {
                assert_relative_eq!(
                    h.entries[(m, k)].norm_sqr(),
                    path_gain(d[(m, k)], 1e-4).unwrap(),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn los_phase_mean_vanishes() {
        let d = DMatrix::from_element(1, 1, 1.0);
        let mut rng = substream(5, StreamTag::Channel, &[1]);
        let n = 100_000;
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            acc += sample_los_random_phase(&d, 1.0, &mut rng).unwrap().entries[(0, 0)];
        }
        assert!((acc / n as f64).norm() < 0.02);
    }

    #[test]
    fn fixed_seed_reproduces() {
        let d = dists();
        let a = sample_los_random_phase(&d, 1e-4, &mut substream(9, StreamTag::Channel, &[2])).unwrap();
        let b = sample_los_random_phase(&d, 1e-4, &mut substream(9, StreamTag::Channel, &[2])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rayleigh_moments() {
        let d = DMatrix::from_element(1, 1, 100.0);
        let tau0 = 1e-4;
        let var = tau0 / 1e4;
        let mut rng = substream(11, StreamTag::Channel, &[3]);
        let n = 100_000;
        let (mut p, mut re2, mut im2) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let h = sample_rayleigh(&d, tau0, &mut rng).unwrap().entries[(0, 0)];
            p += h.norm_sqr();
            re2 += h.re * h.re;
            im2 += h.im * h.im;
        }
        let nf = n as f64;
        assert_relative_eq!(p / nf, var, max_relative = 0.02);
        assert_relative_eq!(re2 / nf, var / 2.0, max_relative = 0.03);
        assert_relative_eq!(im2 / nf, var / 2.0, max_relative = 0.03);
    }

    #[test]
    fn rayleigh_inverse_square_scaling() {
        let near = DMatrix::from_element(1, 1, 50.0);
        let far = DMatrix::from_element(1, 1, 100.0);
        let mut rng_a = substream(13, StreamTag::Channel, &[4]);
        let mut rng_b = substream(13, StreamTag::Channel, &[4]);
        // Same underlying normals, so the ratio is exact.
        let a = sample_rayleigh(&near, 1e-4, &mut rng_a).unwrap().entries[(0, 0)].norm_sqr();
        let b = sample_rayleigh(&far, 1e-4, &mut rng_b).unwrap().entries[(0, 0)].norm_sqr();
        assert_relative_eq!(b / a, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn isotropic_matches_rayleigh_for_equal_distances() {
        let d = DMatrix::from_element(4, 2, 120.0);
        let a = sample_isotropic(&d, 1e-4, &mut substream(1, StreamTag::Channel, &[5])).unwrap();
        let b = sample_rayleigh(&d, 1e-4, &mut substream(1, StreamTag::Channel, &[5])).unwrap();
        for (x, y) in a.entries.iter().zip(b.entries.iter()) {
            assert_relative_eq!(x.re, y.re, max_relative = 1e-12);
            assert_relative_eq!(x.im, y.im, max_relative = 1e-12);
        }
    }

    #[test]
    fn isotropic_variance_is_constant_across_uavs_and_conserves_column_power() {
        let d = dists();
        let tau0 = 1e-4;
        for k in 0..2 {
            let total: f64 = d.column(k).iter().map(|x| tau0 / (x * x)).sum();
            assert_relative_eq!(isotropic_variance(&d, k, tau0) * 3.0, total, max_relative = 1e-12);
        }
        let mut rng = substream(17, StreamTag::Channel, &[6]);
        let n = 100_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let h = sample_isotropic(&d, tau0, &mut rng).unwrap();
            for k in 0..2 {
                acc[k] += h.entries.column(k).norm_squared();
            }
        }
        for k in 0..2 {
            let total: f64 = d.column(k).iter().map(|x| tau0 / (x * x)).sum();
            assert_relative_eq!(acc[k] / n as f64, total, max_relative = 0.02);
        }
    }

    #[test]
    fn rejects_nonpositive_distance() {
        let mut d = dists();
        d[(1, 1)] = 0.0;
        let mut rng = substream(1, StreamTag::Channel, &[]);
        assert!(sample_rayleigh(&d, 1e-4, &mut rng).is_err());
        assert!(sample_isotropic(&d, 1e-4, &mut rng).is_err());
        assert!(sample_los_random_phase(&d, 1e-4, &mut rng).is_err());
    }
}
