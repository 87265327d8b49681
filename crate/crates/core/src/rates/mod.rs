//! Zero-forcing reception, ergodic rates and their closed-form bounds.
//!
//! Every rate in this module carries the `1/L` pre-log factor of orthogonal
//! group scheduling, so Monte-Carlo estimates, bounds and optimizer
//! objectives are directly comparable.

pub mod stats;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelMatrix, ChannelModel};
use crate::error::{Error, Result};
use crate::rng::{substream, StreamTag};
use crate::scenario::{link_distance, EpisodeTracks, Point, ScenarioConfig};

/// Largest Gram-matrix condition number accepted before a draw is treated as
/// singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Largest relative disagreement tolerated between the two SNR expressions.
pub const SNR_AGREEMENT: f64 = 1e-8;

/// Maximum fraction of singular draws a Monte-Carlo run may resample.
pub const MAX_SINGULAR_FRACTION: f64 = 1e-3;

/// The link-budget constants the rate formulas need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub tx_power: f64,
    pub ref_gain: f64,
    pub noise_power: f64,
    pub num_uavs: usize,
    pub users_per_group: usize,
    pub num_groups: usize,
}

impl RateParams {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        RateParams {
            tx_power: config.tx_power(),
            ref_gain: config.ref_gain(),
            noise_power: config.noise_power(),
            num_uavs: config.num_uavs(),
            users_per_group: config.users_per_group(),
            num_groups: config.num_groups(),
        }
    }

    pub fn prelog(&self) -> f64 {
        1.0 / self.num_groups as f64
    }

    /// `P tau0 (M - K) / (M sigma^2)`: multiplies `sum_m d^-2` inside the
    /// lower-bound logarithm.
    pub fn lower_bound_gain(&self) -> f64 {
        let m = self.num_uavs as f64;
        let k = self.users_per_group as f64;
        self.tx_power * self.ref_gain * (m - k) / (m * self.noise_power)
    }
}

struct ZfSolution {
    beams: DMatrix<Complex64>,
    gram_inv_diag: Vec<f64>,
}

fn zf_solve(h: &ChannelMatrix) -> Result<ZfSolution> {
    let hm = &h.entries;
    let (m, k) = hm.shape();
    if k > m {
        return Err(Error::domain(format!("zero forcing needs K <= M, got K = {k}, M = {m}")));
    }
    let gram = hm.adjoint() * hm;
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularChannel {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let chol = gram.cholesky().ok_or(Error::SingularChannel {
        condition,
        limit: CONDITION_LIMIT,
    })?;
    let gram_inv = chol.inverse();
    // Column k of H (H^H H)^-1 is the conjugate of row k of the pseudo-inverse.
    let mut beams = hm * &gram_inv;
    for mut col in beams.column_iter_mut() {
        let norm = col.norm();
        col /= Complex64::new(norm, 0.0);
    }
    let gram_inv_diag = (0..k).map(|i| gram_inv[(i, i)].re).collect();
    Ok(ZfSolution { beams, gram_inv_diag })
}

/// Unit-norm zero-forcing beamformers, one per column.
pub fn zf_beamformers(h: &ChannelMatrix) -> Result<DMatrix<Complex64>> {
    Ok(zf_solve(h)?.beams)
}

/// Per-user post-ZF SNR computed through both the beamformer gain and the
/// Gram-inverse diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfSnr {
    pub via_beamformer: Vec<f64>,
    pub via_gram: Vec<f64>,
}

pub fn zf_snr(h: &ChannelMatrix, tx_power: f64, noise_power: f64) -> Result<ZfSnr> {
    let sol = zf_solve(h)?;
    let k = h.num_users();
    let mut via_beamformer = Vec::with_capacity(k);
    let mut via_gram = Vec::with_capacity(k);
    for i in 0..k {
        let gain = sol.beams.column(i).dotc(&h.entries.column(i)).norm_sqr();
        let a = tx_power * gain / noise_power;
        let b = tx_power / (sol.gram_inv_diag[i] * noise_power);
        if (a - b).abs() > SNR_AGREEMENT * a.abs().max(b.abs()) {
            return Err(Error::SingularChannel {
                condition: f64::NAN,
                limit: CONDITION_LIMIT,
            });
        }
        via_beamformer.push(a);
        via_gram.push(b);
    }
    Ok(ZfSnr { via_beamformer, via_gram })
}

/// Monte-Carlo estimate of each user's ergodic rate within one group.
#[derive(Debug, Clone, PartialEq)]
pub struct McRate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub singular_draws: usize,
}

/// Averages `(1/L) log2(1 + SNR_k)` over `trials` independent channel draws.
///
/// Trial `t` draws from the substream `(seed, Channel, key ++ [t])`; a singular
/// draw is redrawn from the same substream. The reduction runs in trial order
/// so the result does not depend on thread scheduling.
pub fn monte_carlo_ergodic_rate(
    distances: &DMatrix<f64>,
    params: &RateParams,
    model: ChannelModel,
    trials: usize,
    seed: u64,
    key: &[u64],
) -> Result<McRate> {
    if trials < 100 {
        return Err(Error::domain(format!("Monte-Carlo needs at least 100 trials, got {trials}")));
    }
    let k = distances.ncols();
    let max_redraws = ((trials as f64 * MAX_SINGULAR_FRACTION).ceil() as usize).max(1);
    let per_trial: Vec<Result<(Vec<f64>, usize)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream_key = key.to_vec();
            stream_key.push(t as u64);
            let mut rng = substream(seed, StreamTag::Channel, &stream_key);
            let mut singular = 0;
            loop {
                let h = channel::sample(model, distances, params.ref_gain, &mut rng)?;
                match zf_snr(&h, params.tx_power, params.noise_power) {
                    Ok(snr) => {
                        let rates = snr
                            .via_gram
                            .iter()
                            .map(|s| params.prelog() * (1.0 + s).log2())
                            .collect();
                        return Ok((rates, singular));
                    }
                    Err(Error::SingularChannel { .. }) if singular < max_redraws => singular += 1,
                    Err(Error::SingularChannel { .. }) => {
                        return Err(Error::NumericalDegeneracy {
                            singular: singular + 1,
                            trials,
                        })
                    }
                    Err(e) => return Err(e),
                }
            }
        })
        .collect();

    let mut sum = vec![0.0; k];
    let mut singular = 0;
    let mut samples = Vec::with_capacity(trials);
    for r in per_trial {
        let (rates, s) = r?;
        singular += s;
        for (acc, v) in sum.iter_mut().zip(&rates) {
            *acc += v;
        }
        samples.push(rates);
    }
    if singular as f64 >= MAX_SINGULAR_FRACTION * trials as f64 && singular > 0 {
        return Err(Error::NumericalDegeneracy { singular, trials });
    }
    let n = trials as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = (0..k)
        .map(|i| {
            let ss: f64 = samples.iter().map(|r| (r[i] - mean[i]).powi(2)).sum();
            (ss / (n - 1.0) / n).sqrt()
        })
        .collect();
    Ok(McRate {
        mean,
        std_error,
        singular_draws: singular,
    })
}

fn sum_inverse_square(distances: &[f64]) -> Result<f64> {
    if distances.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::domain("link distances must be positive"));
    }
    Ok(distances.iter().map(|d| d.powi(-2)).sum())
}

fn check_uav_count(distances: &[f64], params: &RateParams) -> Result<()> {
    if distances.len() != params.num_uavs {
        return Err(Error::domain(format!(
            "expected {} UAV distances, got {}",
            params.num_uavs,
            distances.len()
        )));
    }
    Ok(())
}

/// Closed-form upper bound on one user's ergodic rate from its distances to
/// all UAVs (effective noise `M sigma^2 / (M - K + 1)`).
pub fn rate_upper_bound(distances: &[f64], params: &RateParams) -> Result<f64> {
    check_uav_count(distances, params)?;
    let m = params.num_uavs as f64;
    let k = params.users_per_group as f64;
    if params.users_per_group > params.num_uavs {
        return Err(Error::domain("upper bound needs K <= M"));
    }
    let s = sum_inverse_square(distances)?;
    let snr = params.tx_power * params.ref_gain * s * (m - k + 1.0) / (m * params.noise_power);
    Ok(params.prelog() * (1.0 + snr).log2())
}

/// Closed-form lower bound (effective noise `M sigma^2 / (M - K)`).
pub fn rate_lower_bound(distances: &[f64], params: &RateParams) -> Result<f64> {
    check_uav_count(distances, params)?;
    if params.users_per_group >= params.num_uavs {
        return Err(Error::domain(format!(
            "lower bound has a pole at M - K = 0 (M = {}, K = {})",
            params.num_uavs, params.users_per_group
        )));
    }
    let s = sum_inverse_square(distances)?;
    Ok(params.prelog() * (1.0 + params.lower_bound_gain() * s).log2())
}

/// Lower-bound rate of a user as a function of `sum_m d^-2`; this is the
/// per-episode term of the optimizer objective.
pub fn lower_bound_from_sum(sum_inv_sq: f64, params: &RateParams) -> f64 {
    params.prelog() * (1.0 + params.lower_bound_gain() * sum_inv_sq).log2()
}

/// Distances from every UAV to one user.
pub fn user_distances(uavs: &[Point], user: Point, altitude: f64) -> Vec<f64> {
    uavs.iter().map(|u| link_distance(*u, user, altitude)).collect()
}

/// `M x K` distance matrix for group `group` at one episode.
pub fn group_distances(
    uavs: &[Point],
    users: &[Point],
    group: usize,
    users_per_group: usize,
    altitude: f64,
) -> DMatrix<f64> {
    let members = &users[group * users_per_group..(group + 1) * users_per_group];
    DMatrix::from_fn(uavs.len(), users_per_group, |m, k| link_distance(uavs[m], members[k], altitude))
}

/// Which per-episode rate a report aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateKind {
    Lower,
    Upper,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub trials: usize,
    pub seed: u64,
    pub model: ChannelModel,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            trials: 2000,
            seed: 0,
            model: ChannelModel::LosRandomPhase,
        }
    }
}

/// Per-user, per-episode rates and their episode averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub kind: RateKind,
    /// `[episode][user]`
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    pub mc: Option<Vec<Vec<f64>>>,
    pub mc_std_error: Option<Vec<Vec<f64>>>,
    /// Average over episodes of the selected kind, per user.
    pub averages: Vec<f64>,
    pub min_rate: f64,
    pub min_user: usize,
    /// Standard error of `min_rate` for Monte-Carlo reports.
    pub min_rate_std_error: Option<f64>,
}

/// Evaluates every user's rates along `tracks` (which must carry UAV
/// positions) and the minimum over users of the episode-averaged rate.
pub fn average_min_rate(
    tracks: &EpisodeTracks,
    config: &ScenarioConfig,
    kind: RateKind,
    mc: &McOptions,
) -> Result<RateReport> {
    tracks.check_shape(config)?;
    if tracks.uavs.len() != tracks.num_episodes()
        || tracks.uavs.iter().any(|e| e.len() != config.num_uavs())
    {
        return Err(Error::config("tracks must carry M UAV positions for every episode"));
    }
    let params = RateParams::from_config(config);
    let h = config.altitude();
    let n_ep = tracks.num_episodes();
    let n_users = config.total_users();
    let mut lower = vec![vec![0.0; n_users]; n_ep];
    let mut upper = vec![vec![0.0; n_users]; n_ep];
    for n in 0..n_ep {
        for u in 0..n_users {
            let d = user_distances(&tracks.uavs[n], tracks.users[n][u], h);
            lower[n][u] = rate_lower_bound(&d, &params)?;
            upper[n][u] = rate_upper_bound(&d, &params)?;
        }
    }
    let (mc_rates, mc_se) = if kind == RateKind::MonteCarlo {
        let k = config.users_per_group();
        let mut rates = vec![vec![0.0; n_users]; n_ep];
        let mut ses = vec![vec![0.0; n_users]; n_ep];
        for n in 0..n_ep {
            for l in 0..config.num_groups() {
                let d = group_distances(&tracks.uavs[n], &tracks.users[n], l, k, h);
                let est = monte_carlo_ergodic_rate(&d, &params, mc.model, mc.trials, mc.seed, &[n as u64, l as u64])?;
                for i in 0..k {
                    rates[n][l * k + i] = est.mean[i];
                    ses[n][l * k + i] = est.std_error[i];
                }
            }
        }
        (Some(rates), Some(ses))
    } else {
        (None, None)
    };

    let source = match kind {
        RateKind::Lower => &lower,
        RateKind::Upper => &upper,
        RateKind::MonteCarlo => mc_rates.as_ref().expect("computed above"),
    };
    let averages: Vec<f64> = (0..n_users)
        .map(|u| (0..n_ep).map(|n| source[n][u]).sum::<f64>() / n_ep as f64)
        .collect();
    let (min_user, min_rate) = averages
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (u, v)| if v < best.1 { (u, v) } else { best });
    let min_rate_std_error = mc_se.as_ref().map(|se| {
        (0..n_ep).map(|n| se[n][min_user].powi(2)).sum::<f64>().sqrt() / n_ep as f64
    });
    Ok(RateReport {
        kind,
        lower,
        upper,
        mc: mc_rates,
        mc_std_error: mc_se,
        averages,
        min_rate,
        min_user,
        min_rate_std_error,
    })
}

/// Minimum over users of the episode-averaged lower bound for a placement;
/// the objective the optimizer maximizes.
pub fn min_average_lower_bound(users: &[Vec<Point>], placement: &[Vec<Point>], config: &ScenarioConfig) -> Result<f64> {
    let params = RateParams::from_config(config);
    let h = config.altitude();
    let n_ep = users.len();
    if placement.len() != n_ep {
        return Err(Error::config("placement and user tracks differ in episode count"));
    }
    let n_users = users.first().map_or(0, Vec::len);
    let mut min = f64::INFINITY;
    for u in 0..n_users {
        let mut acc = 0.0;
        for n in 0..n_ep {
            acc += rate_lower_bound(&user_distances(&placement[n], users[n][u], h), &params)?;
        }
        min = min.min(acc / n_ep as f64);
    }
    Ok(min)
}

/// Largest possible distance between the upper and lower bound of any user,
/// `(1/L) log2((M-K+1)/(M-K))`.
pub fn bound_gap_limit(params: &RateParams) -> f64 {
    let m = params.num_uavs as f64;
    let k = params.users_per_group as f64;
    params.prelog() * ((m - k + 1.0) / (m - k)).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_rayleigh;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn column_norms(h: &DMatrix<Complex64>) -> DVector<f64> {
        DVector::from_iterator(h.ncols(), h.column_iter().map(|c| c.norm()))
    }

    fn paper_params(m: usize, k: usize, l: usize) -> RateParams {
        RateParams {
            tx_power: crate::scenario::dbm_to_watts(23.0),
            ref_gain: 1e-4,
            noise_power: crate::scenario::dbm_to_watts(-169.0) * 10e6,
            num_uavs: m,
            users_per_group: k,
            num_groups: l,
        }
    }

    fn random_channel(m: usize, k: usize, seed: u64) -> ChannelMatrix {
        let d = DMatrix::from_fn(m, k, |i, j| 100.0 + 7.0 * i as f64 + 13.0 * j as f64);
        sample_rayleigh(&d, 1e-4, &mut substream(seed, StreamTag::Statistics, &[])).unwrap()
    }

    #[test]
    fn single_user_is_matched_filter() {
        let h = random_channel(4, 1, 1);
        let w = zf_beamformers(&h).unwrap();
        let mf = h.entries.column(0) / Complex64::new(h.entries.column(0).norm(), 0.0);
        for (a, b) in w.iter().zip(mf.iter()) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn orthogonal_columns_give_normalized_columns() {
        let mut e = DMatrix::zeros(3, 2);
        e[(0, 0)] = Complex64::new(2.0, 1.0);
        e[(1, 1)] = Complex64::new(0.0, -3.0);
        e[(2, 1)] = Complex64::new(1.0, 0.0);
        let h = ChannelMatrix {
            entries: e.clone(),
            model: ChannelModel::RayleighPerLink,
        };
        let w = zf_beamformers(&h).unwrap();
        let norms = column_norms(&e);
        for k in 0..2 {
            for m in 0..3 {
                let expect = e[(m, k)] / norms[k];
                assert_relative_eq!(w[(m, k)].re, expect.re, epsilon = 1e-12);
                assert_relative_eq!(w[(m, k)].im, expect.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zf_nulls_interference() {
        let h = random_channel(4, 2, 2);
        let w = zf_beamformers(&h).unwrap();
        for k in 0..2 {
            assert_relative_eq!(w.column(k).norm(), 1.0, epsilon = 1e-12);
            for j in 0..2 {
                if j != k {
                    let leak = w.column(k).dotc(&h.entries.column(j)).norm();
                    assert!(leak <= 1e-9 * h.entries.column(j).norm(), "leak {leak}");
                }
            }
        }
    }

    #[test]
    fn rank_deficient_channel_is_rejected() {
        let mut e = DMatrix::from_element(3, 2, Complex64::new(1.0, 0.5));
        e[(0, 1)] = Complex64::new(1.0, 0.5);
        let h = ChannelMatrix {
            entries: e,
            model: ChannelModel::LosRandomPhase,
        };
        assert!(matches!(zf_beamformers(&h), Err(Error::SingularChannel { .. })));
    }

    #[test]
    fn scalar_snr_hand_value() {
        let h = ChannelMatrix {
            entries: DMatrix::from_element(1, 1, Complex64::new(1e-4, 0.0)),
            model: ChannelModel::LosRandomPhase,
        };
        let s = zf_snr(&h, 0.1995, 1.259e-13).unwrap();
        assert_relative_eq!(s.via_gram[0], 1.585e4, max_relative = 1e-3);
        assert_relative_eq!(s.via_beamformer[0], s.via_gram[0], max_relative = 1e-12);
    }

    #[test]
    fn snr_linear_in_power() {
        let h = random_channel(5, 3, 3);
        let a = zf_snr(&h, 0.1, 1e-13).unwrap();
        let b = zf_snr(&h, 0.2, 1e-13).unwrap();
        for (x, y) in a.via_gram.iter().zip(&b.via_gram) {
            assert_relative_eq!(*y, 2.0 * x, max_relative = 1e-12);
        }
    }

    #[test]
    fn snr_forms_agree_on_many_draws() {
        let d = DMatrix::from_fn(6, 3, |i, j| 100.0 + 11.0 * i as f64 + 5.0 * j as f64);
        for t in 0..1000u64 {
            let mut rng = substream(21, StreamTag::Statistics, &[t]);
            let h = sample_rayleigh(&d, 1e-4, &mut rng).unwrap();
            let s = zf_snr(&h, 0.2, 1e-13).unwrap();
            for (a, b) in s.via_beamformer.iter().zip(&s.via_gram) {
                assert!((a - b).abs() <= 1e-8 * a.max(*b));
            }
        }
    }

    #[test]
    fn bound_hand_values() {
        let p = paper_params(10, 6, 1);
        let d = vec![100.0; 10];
        assert_relative_eq!(rate_upper_bound(&d, &p).unwrap(), 16.27, epsilon = 5e-3);
        assert_relative_eq!(rate_lower_bound(&d, &p).unwrap(), 15.95, epsilon = 5e-3);
    }

    #[test]
    fn upper_bound_single_user_reduction() {
        let p = paper_params(4, 1, 1);
        let d: [f64; 4] = [90.0, 110.0, 130.0, 170.0];
        let s: f64 = d.iter().map(|x| x.powi(-2)).sum();
        let mrc = (1.0 + p.tx_power * p.ref_gain * s / p.noise_power).log2();
        assert_relative_eq!(rate_upper_bound(&d, &p).unwrap(), mrc, max_relative = 1e-12);
    }

    #[test]
    fn doubling_distance_costs_six_db() {
        let p = paper_params(4, 2, 1);
        let d = [90.0, 110.0, 130.0, 170.0];
        let d2: Vec<f64> = d.iter().map(|x| 2.0 * x).collect();
        let snr = |r: f64| 2f64.powf(r) - 1.0;
        let ratio = snr(rate_upper_bound(&d, &p).unwrap()) / snr(rate_upper_bound(&d2, &p).unwrap());
        assert_relative_eq!(10.0 * ratio.log10(), 6.0206, epsilon = 1e-3);
    }

    #[test]
    fn lower_bound_pole() {
        let p = paper_params(4, 4, 1);
        let err = rate_lower_bound(&[100.0; 4], &p).unwrap_err();
        assert!(err.to_string().contains("M - K"));
    }

    #[test]
    fn gap_shrinks_with_more_uavs() {
        // Fixed K and fixed sum of inverse squares.
        let mut prev = f64::INFINITY;
        for m in [8usize, 16, 32, 64] {
            let p = paper_params(m, 4, 1);
            let d = vec![100.0 * (m as f64 / 8.0).sqrt(); m];
            let gap = rate_upper_bound(&d, &p).unwrap() - rate_lower_bound(&d, &p).unwrap();
            assert!(gap > 0.0 && gap < prev, "m = {m}: gap {gap} prev {prev}");
            prev = gap;
        }
    }

    #[test]
    fn prelog_halves_rate() {
        let d = DMatrix::from_fn(6, 3, |i, j| 100.0 + 9.0 * i as f64 + 4.0 * j as f64);
        let p1 = paper_params(6, 3, 1);
        let p2 = paper_params(6, 3, 2);
        let a = monte_carlo_ergodic_rate(&d, &p1, ChannelModel::LosRandomPhase, 200, 4, &[]).unwrap();
        let b = monte_carlo_ergodic_rate(&d, &p2, ChannelModel::LosRandomPhase, 200, 4, &[]).unwrap();
        for (x, y) in a.mean.iter().zip(&b.mean) {
            assert_relative_eq!(*y, x / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn too_few_trials_rejected() {
        let d = DMatrix::from_element(3, 2, 100.0);
        let p = paper_params(3, 2, 1);
        assert!(monte_carlo_ergodic_rate(&d, &p, ChannelModel::LosRandomPhase, 10, 0, &[]).is_err());
    }
}
