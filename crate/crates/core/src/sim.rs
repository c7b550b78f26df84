//! Event-level Monte Carlo execution of the two-round protocol over the
//! non-coherent Gaussian multiple-access channel.
//!
//! Signals are never materialized in the `N`-dimensional channel space:
//! orthogonality makes the matched-filter outputs sufficient statistics, so
//! each sensor's branch statistics are drawn directly — the transmitted
//! branch as `|sqrt(E) e^{i phi} + Z|^2` and every other branch as `|Z|^2`,
//! with `Z` circularly symmetric of variance `n0` per complex dimension. The
//! detector never reads the phases.
//!
//! Reproducibility: trial `t` of a run draws from stream `t` of a ChaCha8
//! generator keyed by the run seed. Trials are batched and batch partials are
//! merged in index order, so parallel and sequential execution produce
//! bit-identical summaries.

use crate::protocol::{detection_window, EnergyBudget};
use crate::source::{estimate_common, sample_sources, QuantizerSpec, SourceConfig, SourceFamily};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use std::f64::consts::TAU;

/// Default cap on the nominal joint-detection hypothesis count
/// `2^B * W^(M-1)`.
pub const DEFAULT_DETECTION_CAP: u64 = 1 << 24;

/// Two-sided 99% normal quantile, for the confidence intervals the
/// acceptance checks use.
pub const Z99: f64 = 2.5758293035489004;

const BATCH_SIZE: u64 = 4096;

/// Draws one sensor's matched-filter magnitude statistics for all
/// `num_messages` orthogonal branches.
///
/// Draw order per sensor: the phase, then two Gaussians per branch in branch
/// order.
pub fn branch_statistics<R: Rng + ?Sized>(
    message: usize,
    num_messages: usize,
    energy: f64,
    n0: f64,
    rng: &mut R,
) -> Vec<f64> {
    let phase = TAU * rng.random::<f64>();
    branch_statistics_with_phase(message, num_messages, energy, n0, phase, rng)
}

/// As [`branch_statistics`] with the carrier phase pinned; the detector must
/// be invariant to it (tested, not assumed).
pub fn branch_statistics_with_phase<R: Rng + ?Sized>(
    message: usize,
    num_messages: usize,
    energy: f64,
    n0: f64,
    phase: f64,
    rng: &mut R,
) -> Vec<f64> {
    let sigma = (n0 / 2.0).sqrt();
    let amp = energy.sqrt();
    let (sin, cos) = phase.sin_cos();
    (0..num_messages)
        .map(|m| {
            let re: f64 = sigma * gaussian(rng);
            let im: f64 = sigma * gaussian(rng);
            if m == message {
                (amp * cos + re).powi(2) + (amp * sin + im).powi(2)
            } else {
                re * re + im * im
            }
        })
        .collect()
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

/// Data-phase transmission for all sensors: one statistics vector per sensor.
pub fn transmit_data_phase<R: Rng + ?Sized>(
    messages: &[usize],
    num_messages: usize,
    energy_per_sensor: f64,
    n0: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    messages
        .iter()
        .map(|&m| branch_statistics(m, num_messages, energy_per_sensor, n0, rng))
        .collect()
}

/// Candidate-bin range for a sensor constrained to a window of `w_eff` bins
/// around `center`. The window slides to stay inside the support (no
/// wraparound), so it always holds exactly `w_eff` candidates and always
/// contains the center; `w_eff = 2^B` is fully unconstrained.
fn window_bounds(center: usize, w_eff: usize, num_bins: usize) -> (usize, usize) {
    let lo = center.saturating_sub((w_eff - 1) / 2).min(num_bins - w_eff);
    (lo, lo + w_eff - 1)
}

fn range_max(stats: &[f64], lo: usize, hi: usize) -> (usize, f64) {
    let mut best = (lo, stats[lo]);
    for (m, &s) in stats.iter().enumerate().take(hi + 1).skip(lo + 1) {
        if s > best.1 {
            best = (m, s);
        }
    }
    best
}

/// Separable exact argmax over the constrained hypothesis space. The
/// objective decomposes per sensor once the anchor coordinate is fixed, so
/// the search is linear in the candidate counts instead of their product.
/// Ties break toward the lowest lexicographic message vector.
fn detect_engine(
    stats: &[Vec<f64>],
    frozen: &[Option<usize>],
    range_of: impl Fn(usize) -> (usize, usize),
) -> Vec<usize> {
    let sensors = stats.len();
    let num_bins = stats[0].len();
    let mut decided = vec![0usize; sensors];
    match frozen[0] {
        Some(anchor) => {
            decided[0] = anchor;
            let (lo, hi) = range_of(anchor);
            for j in 1..sensors {
                decided[j] = match frozen[j] {
                    Some(f) => f,
                    None => range_max(&stats[j], lo, hi).0,
                };
            }
        }
        None => {
            let mut best = (0usize, f64::NEG_INFINITY);
            for m1 in 0..num_bins {
                let (lo, hi) = range_of(m1);
                let mut score = stats[0][m1];
                for j in 1..sensors {
                    if frozen[j].is_none() {
                        score += range_max(&stats[j], lo, hi).1;
                    }
                }
                if score > best.1 {
                    best = (m1, score);
                }
            }
            decided[0] = best.0;
            let (lo, hi) = range_of(best.0);
            for j in 1..sensors {
                decided[j] = match frozen[j] {
                    Some(f) => f,
                    None => range_max(&stats[j], lo, hi).0,
                };
            }
        }
    }
    decided
}

/// Exact joint maximum-statistic detection.
///
/// The receiver maximizes the sum of per-sensor statistics over message
/// vectors whose coordinates beyond the first stay within a window of
/// `window` bins around the first coordinate. The objective is separable
/// given `m_1`, so the argmax is found exactly without enumerating the full
/// product space; the nominal hypothesis count is still checked against `cap`
/// and exceeding it is an error.
///
/// Ties break toward the lowest lexicographic message vector.
pub fn joint_detect(stats: &[Vec<f64>], window: usize, cap: u64) -> Result<Vec<usize>> {
    detect_with_frozen(stats, window, &vec![None; stats.len()], cap)
}

/// [`joint_detect`] with some coordinates pinned to known decisions (the
/// round-2 re-detection freezes sensors the control phase reported correct).
/// Frozen coordinates contribute a constant to every hypothesis and are not
/// re-constrained by the window.
pub fn detect_with_frozen(
    stats: &[Vec<f64>],
    window: usize,
    frozen: &[Option<usize>],
    cap: u64,
) -> Result<Vec<usize>> {
    let sensors = stats.len();
    assert_eq!(frozen.len(), sensors);
    assert!(sensors >= 1);
    let num_bins = stats[0].len();
    let w_eff = window.clamp(1, num_bins);

    let mut hypotheses: u128 = if frozen[0].is_none() {
        num_bins as u128
    } else {
        1
    };
    for f in &frozen[1..] {
        if f.is_none() {
            hypotheses = hypotheses.saturating_mul(w_eff as u128);
        }
    }
    if hypotheses > cap as u128 {
        return Err(Error::InfeasibleConfig(format!(
            "joint detection would enumerate {hypotheses} hypotheses (cap {cap})"
        )));
    }

    Ok(detect_engine(stats, frozen, |center| {
        window_bounds(center, w_eff, num_bins)
    }))
}

/// Control phase: sensors whose fed-back decision is wrong signal a NACK with
/// energy `energy_per_sensor`; the others stay silent. The receiver
/// thresholds each matched-filter energy at `lambda * energy_per_sensor` and
/// reports the per-sensor error detections.
pub fn control_phase<R: Rng + ?Sized>(
    in_error: &[bool],
    energy_per_sensor: f64,
    lambda: f64,
    n0: f64,
    rng: &mut R,
) -> Vec<bool> {
    let sigma = (n0 / 2.0).sqrt();
    let threshold = lambda * energy_per_sensor;
    in_error
        .iter()
        .map(|&nack| {
            let phase = TAU * rng.random::<f64>();
            let amp = if nack { energy_per_sensor.sqrt() } else { 0.0 };
            let (sin, cos) = phase.sin_cos();
            let re = amp * cos + sigma * gaussian(rng);
            let im = amp * sin + sigma * gaussian(rng);
            re * re + im * im > threshold
        })
        .collect()
}

/// Everything one protocol execution produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub true_messages: Vec<usize>,
    pub decoded_round1: Vec<usize>,
    /// Receiver-side per-sensor error detections after the control phase.
    pub ack_decisions: Vec<bool>,
    pub went_round2: bool,
    pub decoded_final: Vec<usize>,
    pub u_hat: f64,
    pub squared_error: f64,
    /// Exact ledger: round-1 data energy, per-sensor control energy for the
    /// NACKing sensors, and per-sensor round-2 data energy for the sensors
    /// the receiver asked to retransmit.
    pub energy_spent: f64,
}

/// Configured protocol simulator.
///
/// The joint detector constrains each non-anchor sensor to the bins that can
/// actually hold its observation given the anchor's bin: `V_j` lies within
/// `2 sqrt(3) sqrt(1 - rho^2)` of `V_1`, so the candidate set is the bins
/// overlapping that value interval. The analytic window `W` counts the same
/// interval in average-width bins; with the uneven tail/interior bin widths
/// the value-interval set is the physically faithful one and never excludes
/// the transmitted message.
#[derive(Debug, Clone)]
pub struct ProtocolSim {
    source: SourceConfig,
    quantizer: QuantizerSpec,
    budget: EnergyBudget,
    window: usize,
    /// Per-anchor-bin candidate range `(lo, hi)` for the other sensors.
    candidate_ranges: Vec<(usize, usize)>,
}

impl ProtocolSim {
    /// Validates the configuration and pre-checks detection feasibility.
    ///
    /// The protocol is defined for the scalar uniform family with `rho > 0`
    /// and `1 <= l <= M`.
    pub fn new(
        source: SourceConfig,
        quantizer: QuantizerSpec,
        budget: EnergyBudget,
        detect_cap: u64,
    ) -> Result<Self> {
        source.validate()?;
        if source.family != SourceFamily::Uniform {
            return Err(Error::InvalidParameter(
                "the protocol is defined for uniform sources only".into(),
            ));
        }
        if source.dimension != 1 {
            return Err(Error::InvalidParameter(
                "the protocol is defined for scalar (K = 1) sources".into(),
            ));
        }
        if source.rho <= 0.0 {
            return Err(Error::EstimatorUndefined(
                "the reconstruction estimator needs rho > 0".into(),
            ));
        }
        if budget.l > source.sensors {
            return Err(Error::InvalidParameter(format!(
                "trigger threshold l = {} exceeds sensor count {}",
                budget.l, source.sensors
            )));
        }
        let window = detection_window(quantizer.bits(), source.rho);
        let num_bins = quantizer.num_bins();

        // candidate bins for m_j given the anchor bin: everything overlapping
        // [lower edge - delta, upper edge + delta], the reachable observation
        // interval under bounded noise
        let delta = 2.0 * crate::source::SQRT3 * (1.0 - source.rho * source.rho).sqrt();
        let edges = quantizer.edges();
        let candidate_ranges: Vec<(usize, usize)> = (0..num_bins)
            .map(|m1| {
                let v_lo = edges[m1] - delta;
                let v_hi = edges[m1 + 1] + delta;
                let lo = edges.partition_point(|&e| e <= v_lo).saturating_sub(1);
                let hi = (edges.partition_point(|&e| e < v_hi) - 1).min(num_bins - 1);
                (lo, hi)
            })
            .collect();
        let widest = candidate_ranges
            .iter()
            .map(|&(lo, hi)| hi - lo + 1)
            .max()
            .unwrap() as u128;
        let hypotheses =
            (num_bins as u128).saturating_mul(widest.saturating_pow(source.sensors as u32 - 1));
        if hypotheses > detect_cap as u128 {
            return Err(Error::InfeasibleConfig(format!(
                "joint detection needs {hypotheses} hypotheses, exceeding the cap {detect_cap}"
            )));
        }
        Ok(ProtocolSim {
            source,
            quantizer,
            budget,
            window,
            candidate_ranges,
        })
    }

    fn detect(&self, stats: &[Vec<f64>], frozen: &[Option<usize>]) -> Vec<usize> {
        detect_engine(stats, frozen, |center| self.candidate_ranges[center])
    }

    pub fn source(&self) -> &SourceConfig {
        &self.source
    }

    pub fn quantizer(&self) -> &QuantizerSpec {
        &self.quantizer
    }

    pub fn budget(&self) -> &EnergyBudget {
        &self.budget
    }

    /// Analytic detector window (before the simulator's `max(W, 1)` clamp).
    pub fn window(&self) -> usize {
        self.window
    }

    /// Runs one full protocol execution.
    pub fn run_trial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrialTrace> {
        let m = self.source.sensors;
        let mf = m as f64;
        let num_bins = self.quantizer.num_bins();
        let bud = &self.budget;

        let sample = sample_sources(&self.source, rng)?;
        let true_messages: Vec<usize> = sample
            .observations
            .iter()
            .map(|&v| self.quantizer.quantize(v))
            .collect::<Result<_>>()?;

        let stats1 =
            transmit_data_phase(&true_messages, num_bins, bud.e_d1 / mf, bud.n0, rng);
        let decoded_round1 = self.detect(&stats1, &vec![None; m]);

        // perfect feedback: each sensor knows whether its message was decoded
        let in_error: Vec<bool> = decoded_round1
            .iter()
            .zip(&true_messages)
            .map(|(d, t)| d != t)
            .collect();
        let nacks = in_error.iter().filter(|&&e| e).count();

        let ack_decisions = control_phase(&in_error, bud.e_c1 / mf, bud.lambda, bud.n0, rng);
        let detected = ack_decisions.iter().filter(|&&d| d).count();
        let went_round2 = detected >= bud.l;

        let mut energy_spent = bud.e_d1 + nacks as f64 * bud.e_c1 / mf;
        let decoded_final = if went_round2 {
            // only sensors the receiver flagged retransmit; the rest stay
            // silent and their round-1 decisions are frozen
            let mut combined = stats1;
            let mut frozen: Vec<Option<usize>> = Vec::with_capacity(m);
            for j in 0..m {
                if ack_decisions[j] {
                    let stats2 = branch_statistics(
                        true_messages[j],
                        num_bins,
                        bud.e_d2 / mf,
                        bud.n0,
                        rng,
                    );
                    for (acc, s) in combined[j].iter_mut().zip(stats2) {
                        *acc += s;
                    }
                    energy_spent += bud.e_d2 / mf;
                    frozen.push(None);
                } else {
                    frozen.push(Some(decoded_round1[j]));
                }
            }
            self.detect(&combined, &frozen)
        } else {
            decoded_round1.clone()
        };

        let reconstructed: Vec<f64> = decoded_final
            .iter()
            .map(|&idx| self.quantizer.centroid(idx))
            .collect();
        let u_hat = estimate_common(&self.source, &reconstructed)?;
        let squared_error = (u_hat - sample.common).powi(2);
        Ok(TrialTrace {
            true_messages,
            decoded_round1,
            ack_decisions,
            went_round2,
            decoded_final,
            u_hat,
            squared_error,
            energy_spent,
        })
    }

    /// Runs `n_trials` independent trials and aggregates them.
    ///
    /// Deterministic given the seed: trial `t` uses ChaCha8 stream `t` keyed
    /// by `seed`, and batch partials merge in index order regardless of the
    /// execution schedule.
    pub fn monte_carlo(&self, n_trials: u64, seed: u64) -> Result<McSummary> {
        if n_trials == 0 {
            return Err(Error::InvalidParameter("n_trials must be >= 1".into()));
        }
        let ranges = batch_ranges(n_trials);
        #[cfg(feature = "parallel")]
        let partials: Result<Vec<BatchStats>> = ranges
            .into_par_iter()
            .map(|r| self.run_batch(r, seed))
            .collect();
        #[cfg(not(feature = "parallel"))]
        let partials: Result<Vec<BatchStats>> =
            ranges.into_iter().map(|r| self.run_batch(r, seed)).collect();
        Ok(McSummary::merge(partials?, self.source.sensors))
    }

    /// Sequential reference path with identical batching and stream
    /// assignment; produces bit-identical summaries to [`Self::monte_carlo`].
    pub fn monte_carlo_seq(&self, n_trials: u64, seed: u64) -> Result<McSummary> {
        if n_trials == 0 {
            return Err(Error::InvalidParameter("n_trials must be >= 1".into()));
        }
        let partials: Result<Vec<BatchStats>> = batch_ranges(n_trials)
            .into_iter()
            .map(|r| self.run_batch(r, seed))
            .collect();
        Ok(McSummary::merge(partials?, self.source.sensors))
    }

    fn run_batch(&self, range: std::ops::Range<u64>, seed: u64) -> Result<BatchStats> {
        let base = ChaCha8Rng::seed_from_u64(seed);
        let mut acc = BatchStats::new(self.source.sensors);
        for t in range {
            let mut rng = base.clone();
            rng.set_stream(t);
            let trace = self.run_trial(&mut rng)?;
            acc.push(&trace);
        }
        Ok(acc)
    }
}

fn batch_ranges(n_trials: u64) -> Vec<std::ops::Range<u64>> {
    (0..n_trials)
        .step_by(BATCH_SIZE as usize)
        .map(|start| start..(start + BATCH_SIZE).min(n_trials))
        .collect()
}

#[derive(Debug, Clone)]
struct BatchStats {
    n: u64,
    sum_se: f64,
    sum_se2: f64,
    sum_energy: f64,
    sum_energy2: f64,
    round2: u64,
    round1_errors: u64,
    final_errors: u64,
    final_error_hist: Vec<u64>,
}

impl BatchStats {
    fn new(sensors: usize) -> Self {
        BatchStats {
            n: 0,
            sum_se: 0.0,
            sum_se2: 0.0,
            sum_energy: 0.0,
            sum_energy2: 0.0,
            round2: 0,
            round1_errors: 0,
            final_errors: 0,
            final_error_hist: vec![0; sensors + 1],
        }
    }

    fn push(&mut self, t: &TrialTrace) {
        self.n += 1;
        self.sum_se += t.squared_error;
        self.sum_se2 += t.squared_error * t.squared_error;
        self.sum_energy += t.energy_spent;
        self.sum_energy2 += t.energy_spent * t.energy_spent;
        self.round2 += u64::from(t.went_round2);
        let r1 = t
            .decoded_round1
            .iter()
            .zip(&t.true_messages)
            .filter(|(d, t)| d != t)
            .count();
        let fin = t
            .decoded_final
            .iter()
            .zip(&t.true_messages)
            .filter(|(d, t)| d != t)
            .count();
        self.round1_errors += r1 as u64;
        self.final_errors += fin as u64;
        self.final_error_hist[fin] += 1;
    }
}

/// Aggregate of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub n_trials: u64,
    /// Mean squared reconstruction error.
    pub mean_mse: f64,
    /// Standard error of the MSE estimate (normal approximation).
    pub mse_std_err: f64,
    /// Mean energy spent per protocol execution.
    pub mean_energy: f64,
    pub energy_std_err: f64,
    /// Fraction of trials that triggered the second round.
    pub round2_rate: f64,
    /// Histogram of the number of sensors still in error at the end
    /// (`final_error_hist[k]` counts trials with exactly `k`).
    pub final_error_hist: Vec<u64>,
    /// Mean number of sensors in error after round 1 / at the end.
    pub mean_round1_errors: f64,
    pub mean_final_errors: f64,
}

impl McSummary {
    fn merge(partials: Vec<BatchStats>, sensors: usize) -> Self {
        let mut total = BatchStats::new(sensors);
        for p in partials {
            total.n += p.n;
            total.sum_se += p.sum_se;
            total.sum_se2 += p.sum_se2;
            total.sum_energy += p.sum_energy;
            total.sum_energy2 += p.sum_energy2;
            total.round2 += p.round2;
            total.round1_errors += p.round1_errors;
            total.final_errors += p.final_errors;
            for (acc, h) in total.final_error_hist.iter_mut().zip(&p.final_error_hist) {
                *acc += h;
            }
        }
        let n = total.n as f64;
        let mean_mse = total.sum_se / n;
        let mean_energy = total.sum_energy / n;
        let var_se = (total.sum_se2 / n - mean_mse * mean_mse).max(0.0);
        let var_energy = (total.sum_energy2 / n - mean_energy * mean_energy).max(0.0);
        McSummary {
            n_trials: total.n,
            mean_mse,
            mse_std_err: (var_se / n).sqrt(),
            mean_energy,
            energy_std_err: (var_energy / n).sqrt(),
            round2_rate: total.round2 as f64 / n,
            final_error_hist: total.final_error_hist,
            mean_round1_errors: total.round1_errors as f64 / n,
            mean_final_errors: total.final_errors as f64 / n,
        }
    }

    /// Two-sided confidence interval for the mean squared error.
    pub fn mse_ci(&self, z: f64) -> (f64, f64) {
        (
            self.mean_mse - z * self.mse_std_err,
            self.mean_mse + z * self.mse_std_err,
        )
    }

    /// Two-sided confidence interval for the mean energy.
    pub fn energy_ci(&self, z: f64) -> (f64, f64) {
        (
            self.mean_energy - z * self.energy_std_err,
            self.mean_energy + z * self.energy_std_err,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sim(m: usize, rho: f64, bits: u32, e_d1: f64, lambda: f64, mu: f64, l: usize) -> ProtocolSim {
        let source = SourceConfig::new(m, rho, SourceFamily::Uniform).unwrap();
        let quant = QuantizerSpec::build(bits, rho).unwrap();
        let budget = EnergyBudget::from_relations(e_d1, lambda, mu, 1.0, l).unwrap();
        ProtocolSim::new(source, quant, budget, DEFAULT_DETECTION_CAP).unwrap()
    }

    #[test]
    fn noiseless_statistics_pick_the_sent_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stats = branch_statistics(3, 8, 4.0, 1e-12, &mut rng);
        assert_relative_eq!(stats[3], 4.0, max_relative = 1e-4);
        for (m, &s) in stats.iter().enumerate() {
            if m != 3 {
                assert!(s < 1e-9);
            }
        }
    }

    #[test]
    fn joint_detection_decodes_noiseless_messages() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let msgs = vec![5usize, 4, 6];
        let stats = transmit_data_phase(&msgs, 8, 2.0, 1e-12, &mut rng);
        let dec = joint_detect(&stats, 3, DEFAULT_DETECTION_CAP).unwrap();
        assert_eq!(dec, msgs);
    }

    #[test]
    fn single_sensor_detection_is_plain_argmax() {
        let stats = vec![vec![0.1, 0.9, 0.3, 0.2]];
        let dec = joint_detect(&stats, 1, DEFAULT_DETECTION_CAP).unwrap();
        assert_eq!(dec, vec![1]);
    }

    #[test]
    fn unconstrained_window_separates_sensors() {
        // a window covering all bins makes the joint argmax per-sensor
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let stats: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..8).map(|_| rng.random::<f64>()).collect())
                .collect();
            let joint = joint_detect(&stats, 8, DEFAULT_DETECTION_CAP).unwrap();
            let independent: Vec<usize> = stats
                .iter()
                .map(|s| {
                    s.iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .unwrap()
                        .0
                })
                .collect();
            assert_eq!(joint, independent);
        }
    }

    #[test]
    fn window_constrains_secondary_sensors() {
        // sensor 2's biggest statistic sits outside the window around m1
        let stats = vec![
            vec![0.0, 0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 9.0],
        ];
        let dec = joint_detect(&stats, 3, DEFAULT_DETECTION_CAP).unwrap();
        assert_eq!(dec, vec![2, 3]);
    }

    #[test]
    fn frozen_coordinates_stay_put() {
        let stats = vec![
            vec![0.0, 5.0, 0.0, 0.0],
            vec![9.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 7.0],
        ];
        let dec =
            detect_with_frozen(&stats, 4, &[None, Some(2), None], DEFAULT_DETECTION_CAP).unwrap();
        assert_eq!(dec[1], 2);
        assert_eq!(dec[0], 1);
        // anchor frozen: secondary windows center on it (here fully open)
        let dec =
            detect_with_frozen(&stats, 4, &[Some(0), None, None], DEFAULT_DETECTION_CAP).unwrap();
        assert_eq!(dec, vec![0, 0, 3]);
        // a tight window around the anchor shuts the distant peak out
        let dec =
            detect_with_frozen(&stats, 1, &[Some(0), None, None], DEFAULT_DETECTION_CAP).unwrap();
        assert_eq!(dec, vec![0, 0, 0]);
    }

    #[test]
    fn detection_cap_is_enforced() {
        let stats: Vec<Vec<f64>> = (0..6).map(|_| vec![0.0; 32]).collect();
        assert!(matches!(
            joint_detect(&stats, 32, 1 << 10),
            Err(Error::InfeasibleConfig(_))
        ));
        // infeasible configurations are rejected at construction
        let source = SourceConfig::new(8, 0.9, SourceFamily::Uniform).unwrap();
        let quant = QuantizerSpec::build(5, 0.9).unwrap();
        let budget = EnergyBudget::from_relations(10.0, 0.25, 1.0, 1.0, 1).unwrap();
        assert!(matches!(
            ProtocolSim::new(source, quant, budget, DEFAULT_DETECTION_CAP),
            Err(Error::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn control_phase_fires_on_zero_budget() {
        // zero control energy degenerates the threshold: every sensor flags
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let det = control_phase(&[false, false, true], 0.0, 0.25, 1.0, &mut rng);
        assert_eq!(det, vec![true, true, true]);
    }

    #[test]
    fn trial_energy_ledger_is_exact() {
        let s = sim(2, 0.95, 3, 6.0, 0.25, 1.0, 1);
        let b = *s.budget();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let t = s.run_trial(&mut rng).unwrap();
            let nacks = t
                .decoded_round1
                .iter()
                .zip(&t.true_messages)
                .filter(|(d, m)| d != m)
                .count();
            let retx = if t.went_round2 {
                t.ack_decisions.iter().filter(|&&d| d).count()
            } else {
                0
            };
            let expected =
                b.e_d1 + nacks as f64 * b.e_c1 / 2.0 + retx as f64 * b.e_d2 / 2.0;
            assert_relative_eq!(t.energy_spent, expected, max_relative = 1e-12);
            assert_eq!(t.went_round2, t.ack_decisions.iter().filter(|&&d| d).count() >= 1);
        }
    }

    #[test]
    fn trigger_threshold_l_equals_m() {
        let s = sim(3, 0.95, 3, 2.0, 0.25, 1.0, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut seen_round2 = false;
        for _ in 0..2000 {
            let t = s.run_trial(&mut rng).unwrap();
            let detected = t.ack_decisions.iter().filter(|&&d| d).count();
            assert_eq!(t.went_round2, detected == 3);
            seen_round2 |= t.went_round2;
        }
        assert!(seen_round2, "expected at least one full-NACK trial at low SNR");
    }

    #[test]
    fn high_snr_trial_is_quantization_limited() {
        let s = sim(2, 0.99, 5, 1e6, 0.25, 1.0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = s.run_trial(&mut rng).unwrap();
        assert_eq!(t.decoded_round1, t.true_messages);
        assert!(!t.went_round2);
        assert_eq!(t.energy_spent, s.budget().e_d1);
    }

    #[test]
    fn summary_matches_single_trace() {
        let s = sim(2, 0.95, 3, 8.0, 0.25, 1.0, 1);
        let sum = s.monte_carlo(1, 42).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        rng.set_stream(0);
        let t = s.run_trial(&mut rng).unwrap();
        assert_eq!(sum.n_trials, 1);
        assert_eq!(sum.mean_mse, t.squared_error);
        assert_eq!(sum.mean_energy, t.energy_spent);
        assert_eq!(sum.round2_rate, f64::from(u8::from(t.went_round2)));
    }

    #[test]
    fn same_seed_same_summary() {
        let s = sim(2, 0.95, 4, 10.0, 0.25, 1.0, 1);
        let a = s.monte_carlo(5000, 9).unwrap();
        let b = s.monte_carlo(5000, 9).unwrap();
        assert_eq!(a, b);
        let c = s.monte_carlo(5000, 10).unwrap();
        assert_ne!(a.mean_mse, c.mean_mse);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let s = sim(3, 0.97, 4, 12.0, 0.25, 1.0, 1);
        let a = s.monte_carlo(10_000, 123).unwrap();
        let b = s.monte_carlo_seq(10_000, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_protocol_on_gaussian_or_zero_rho() {
        let quant = QuantizerSpec::build(4, 0.9).unwrap();
        let budget = EnergyBudget::from_relations(10.0, 0.25, 1.0, 1.0, 1).unwrap();
        let gaussian = SourceConfig::new(2, 0.9, SourceFamily::Gaussian).unwrap();
        assert!(ProtocolSim::new(gaussian, quant.clone(), budget, DEFAULT_DETECTION_CAP).is_err());
        let rho0 = SourceConfig::new(2, 0.0, SourceFamily::Uniform).unwrap();
        let quant0 = QuantizerSpec::build(4, 0.0).unwrap();
        assert!(ProtocolSim::new(rho0, quant0, budget, DEFAULT_DETECTION_CAP).is_err());
        let l_too_big = EnergyBudget::from_relations(10.0, 0.25, 1.0, 1.0, 3).unwrap();
        let uni = SourceConfig::new(2, 0.9, SourceFamily::Uniform).unwrap();
        assert!(ProtocolSim::new(uni, quant, l_too_big, DEFAULT_DETECTION_CAP).is_err());
    }
}
