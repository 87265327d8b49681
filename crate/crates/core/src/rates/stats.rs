//! Random-matrix statistics behind the closed-form bounds, estimated by
//! simulation so they can be compared against their theoretical values.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{isotropic_variance, sample_isotropic};
use crate::error::{Error, Result};
use crate::rates::zf_beamformers;
use crate::rng::{substream, StreamTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatEstimate {
    pub name: String,
    pub theoretical: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl StatEstimate {
    pub fn rel_error(&self) -> f64 {
        ((self.empirical - self.theoretical) / self.theoretical).abs()
    }
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Empirical mean of `tr((G^H G)^-1)` for `M x K` matrices `G` with i.i.d.
/// standard CSCG entries; the theoretical value is `K / (M - K)`.
pub fn wishart_inverse_trace(m: usize, k: usize, trials: usize, seed: u64) -> Result<StatEstimate> {
    if k >= m {
        return Err(Error::domain(format!("inverse Wishart mean needs K < M (M = {m}, K = {k})")));
    }
    if trials < 2 {
        return Err(Error::domain("need at least two trials"));
    }
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = substream(seed, StreamTag::Statistics, &[1, t as u64]);
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let g = DMatrix::from_fn(m, k, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            });
            let gram = g.adjoint() * &g;
            match gram.cholesky() {
                Some(c) => Ok(c.inverse().trace().re),
                None => Err(Error::SingularChannel {
                    condition: f64::INFINITY,
                    limit: super::CONDITION_LIMIT,
                }),
            }
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_se(&samples);
    Ok(StatEstimate {
        name: "wishart_inverse_trace".into(),
        theoretical: k as f64 / (m - k) as f64,
        empirical: mean,
        std_error: se,
        trials,
    })
}

/// Empirical mean of `|w_k^H h_k|^2` under the isotropic channel model, with
/// `w_k` the zero-forcing beamformer; the theoretical value is
/// `(M - K + 1) tau0 sum_m d_{k,m}^-2 / M`.
pub fn projected_power_mean(
    distances: &DMatrix<f64>,
    tau0: f64,
    user: usize,
    trials: usize,
    seed: u64,
) -> Result<StatEstimate> {
    let (m, k) = distances.shape();
    if user >= k {
        return Err(Error::domain("user index out of range"));
    }
    if trials < 2 {
        return Err(Error::domain("need at least two trials"));
    }
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = substream(seed, StreamTag::Statistics, &[2, t as u64]);
            let h = sample_isotropic(distances, tau0, &mut rng)?;
            let w = zf_beamformers(&h)?;
            Ok(w.column(user).dotc(&h.entries.column(user)).norm_sqr())
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_se(&samples);
    let theoretical = (m - k + 1) as f64 * isotropic_variance(distances, user, tau0);
    Ok(StatEstimate {
        name: "projected_power_mean".into(),
        theoretical,
        empirical: mean,
        std_error: se,
        trials,
    })
}
