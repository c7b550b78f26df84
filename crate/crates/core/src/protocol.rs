//! Closed-form analysis of the two-round retransmission protocol: pairwise
//! and union error probabilities, control-phase detection errors, distortion
//! terms, the assembled distortion upper bound (with the L-threshold
//! retransmission rule) and the average energy the protocol spends.
//!
//! Energy bookkeeping: `e_d1`, `e_c1`, `e_d2` are aggregate round energies,
//! split equally across the `M` sensors. The SNR argument of the pairwise
//! error probability [`pairwise_p2`] is the combined energy of the mismatched
//! branches over `2 n0`: first-round terms use `k * e_d1 / (2 M n0)` and
//! chase-combined second-round terms replace `e_d1` with `e_d1 + e_d2`.
//!
//! Union-bound terms are carried raw (they may exceed 1) and clipped where a
//! probability is consumed, so the assembled distortion and energy stay
//! meaningful at low SNR.

use crate::numerics::{binomial, binomial_u128, marcum_q1_complement};
use crate::{Error, Result};

/// Default O(1) threshold of the high-correlation condition
/// `2^(B+1) sqrt(1 - rho^2) < theta`.
pub const DEFAULT_THETA: f64 = 1.0;

/// Energy split of the two-round protocol.
///
/// The control and second-round energies are tied to the first round by
/// `e_d2 = (2 - mu) e_d1` and `e_c1 = e_d2 / (2 (1 - sqrt(lambda))^2)`, which
/// makes the residual first-round error decay at the same exponent as the
/// chase-combined retransmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBudget {
    /// Aggregate data energy of round 1.
    pub e_d1: f64,
    /// Aggregate control energy of round 1.
    pub e_c1: f64,
    /// Aggregate data energy of round 2.
    pub e_d2: f64,
    /// Noise spectral density.
    pub n0: f64,
    /// Control detection threshold, in `[0, 1)`.
    pub lambda: f64,
    /// Energy split parameter, in `(0, 2)`.
    pub mu: f64,
    /// Retransmission trigger: round 2 runs only when the receiver detects at
    /// least `l` erroneous sensors.
    pub l: usize,
}

impl EnergyBudget {
    /// Builds the budget from the first-round data energy and the coupling
    /// relations.
    pub fn from_relations(e_d1: f64, lambda: f64, mu: f64, n0: f64, l: usize) -> Result<Self> {
        if !(e_d1 >= 0.0) {
            return Err(Error::InvalidParameter("e_d1 must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in [0, 1), got {lambda}"
            )));
        }
        if !(mu > 0.0 && mu < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must lie in (0, 2), got {mu}"
            )));
        }
        if !(n0 > 0.0) {
            return Err(Error::InvalidParameter("n0 must be > 0".into()));
        }
        if l == 0 {
            return Err(Error::InvalidParameter("l must be >= 1".into()));
        }
        let e_d2 = (2.0 - mu) * e_d1;
        let e_c1 = e_d2 / (2.0 * (1.0 - lambda.sqrt()).powi(2));
        Ok(EnergyBudget {
            e_d1,
            e_c1,
            e_d2,
            n0,
            lambda,
            mu,
            l,
        })
    }

    /// Ceiling on what one protocol run can spend.
    pub fn total(&self) -> f64 {
        self.e_d1 + self.e_c1 + self.e_d2
    }

    fn validate_sensors(&self, sensors: usize) -> Result<()> {
        if sensors == 0 {
            return Err(Error::InvalidParameter("sensor count must be >= 1".into()));
        }
        if self.l > sensors {
            return Err(Error::InvalidParameter(format!(
                "trigger threshold l = {} exceeds sensor count {}",
                self.l, sensors
            )));
        }
        Ok(())
    }
}

/// Number of candidate bins the joint detector must consider for each sensor
/// beyond the first: `ceil(2^(B+1) sqrt(1-rho^2) / (rho + sqrt(1-rho^2)))`.
///
/// Bounded observation noise confines `m_j` to a window around `m_1`. The
/// analytic formulas use this value verbatim (0 at rho = 1); the simulator
/// uses `max(W, 1)` clamped to the number of bins.
pub fn detection_window(bits: u32, rho: f64) -> usize {
    assert!(bits >= 1);
    assert!((0.0..=1.0).contains(&rho));
    let comp = (1.0 - rho * rho).sqrt();
    let w = 2f64.powi(bits as i32 + 1) * comp / (rho + comp);
    w.ceil() as usize
}

/// High-correlation regime test `2^(B+1) sqrt(1-rho^2) < theta`; the quantizer
/// tail geometry is matched to the bin width exactly when this holds.
pub fn high_correlation_condition(bits: u32, rho: f64, theta: f64) -> bool {
    2f64.powi(bits as i32 + 1) * (1.0 - rho * rho).sqrt() < theta
}

/// Pairwise error probability of square-law combining over `k` mismatched
/// branches with combined SNR `gamma`:
/// `P2(k) = 2^(1-2k) e^(-gamma) C_k` with
/// `C_k = sum_n (1/n!) (sum_l C(2k-1, l)) gamma^n`.
pub fn pairwise_p2(k: usize, gamma: f64) -> f64 {
    assert!(k >= 1, "pairwise error needs k >= 1");
    assert!(gamma >= 0.0, "gamma must be >= 0");
    let mut c = 0.0f64;
    let mut gamma_pow = 1.0f64; // gamma^n / n!
    for n in 0..k {
        let inner: u128 = (0..=(k - 1 - n))
            .map(|l| binomial_u128(2 * k as u64 - 1, l as u64))
            .sum();
        c += inner as f64 * gamma_pow;
        gamma_pow *= gamma / (n + 1) as f64;
    }
    2f64.powi(1 - 2 * k as i32) * (-gamma).exp() * c
}

/// Control-phase error probabilities for `k` sensors in error (per-sensor
/// control energy `e_c1 / M`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlErrorProbs {
    /// Exact probability that all `k` NACKs are missed: `(1 - Q1(a, b))^k`.
    pub exact: f64,
    /// Exponential bound `(1/2)^k exp(-k (sqrt(lambda)-1)^2 e_c1 / (M n0))`.
    pub bound: f64,
    /// False-NACK probability on an all-correct round,
    /// `exp(-lambda e_c1 / n0)`.
    pub miss: f64,
}

/// Evaluates the control-phase detection errors for `k` of `sensors` in
/// error. The Marcum arguments follow the matched-filter statistic with noise
/// variance `n0/2` per real dimension.
pub fn control_error_probs(
    bud: &EnergyBudget,
    sensors: usize,
    k: usize,
) -> Result<ControlErrorProbs> {
    bud.validate_sensors(sensors)?;
    if k == 0 || k > sensors {
        return Err(Error::InvalidParameter(format!(
            "k must lie in 1..=M, got {k}"
        )));
    }
    let per_sensor = bud.e_c1 / sensors as f64;
    let a = (2.0 * per_sensor / bud.n0).sqrt();
    let b = (2.0 * bud.lambda * per_sensor / bud.n0).sqrt();
    let single_miss = marcum_q1_complement(a, b);
    let exact = single_miss.powi(k as i32);
    let bound = 0.5f64.powi(k as i32)
        * (-(k as f64) * (bud.lambda.sqrt() - 1.0).powi(2) * bud.e_c1
            / (sensors as f64 * bud.n0))
            .exp();
    let miss = (-bud.lambda * bud.e_c1 / bud.n0).exp();
    Ok(ControlErrorProbs { exact, bound, miss })
}

fn gamma_round1(k: usize, sensors: usize, bud: &EnergyBudget) -> f64 {
    k as f64 * bud.e_d1 / (2.0 * sensors as f64 * bud.n0)
}

fn gamma_combined(k: usize, sensors: usize, bud: &EnergyBudget) -> f64 {
    k as f64 * (bud.e_d1 + bud.e_d2) / (2.0 * sensors as f64 * bud.n0)
}

/// First-round union bound, split by the number of erroneous sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionBound {
    /// Raw term for `k = 1..=M` in error (`terms[k-1]`); the last entry
    /// carries the `2^B W^(M-1)` prefactor, the others `C(M,k) W^k`.
    pub terms: Vec<f64>,
    /// Detector window used in the prefactors.
    pub window: usize,
}

impl UnionBound {
    /// Raw union-bound total (may exceed 1).
    pub fn total_raw(&self) -> f64 {
        self.terms.iter().sum()
    }

    /// Union bound clipped to a probability.
    pub fn total(&self) -> f64 {
        self.total_raw().min(1.0)
    }

    /// Per-k terms renormalized onto the probability simplex: they bound the
    /// probabilities of disjoint events, so their sum is capped at 1 before
    /// entering any energy or distortion ledger.
    pub fn normalized_terms(&self) -> Vec<f64> {
        let total = self.total_raw();
        if total > 1.0 {
            self.terms.iter().map(|t| t / total).collect()
        } else {
            self.terms.clone()
        }
    }
}

/// Union bound on the probability of any decoding error after round 1.
pub fn union_bound_round1(
    bits: u32,
    rho: f64,
    sensors: usize,
    bud: &EnergyBudget,
) -> Result<UnionBound> {
    bud.validate_sensors(sensors)?;
    let w = detection_window(bits, rho) as f64;
    let nb = 2f64.powi(bits as i32);
    let mut terms = Vec::with_capacity(sensors);
    for k in 1..sensors {
        terms.push(
            binomial(sensors as u64, k as u64)
                * w.powi(k as i32)
                * pairwise_p2(k, gamma_round1(k, sensors, bud)),
        );
    }
    terms.push(
        nb * w.powi(sensors as i32 - 1)
            * pairwise_p2(sensors, gamma_round1(sensors, sensors, bud)),
    );
    Ok(UnionBound {
        terms,
        window: detection_window(bits, rho),
    })
}

/// Distortion contributions conditioned on how many sensors end in error.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionTerms {
    /// Quantization-plus-observation floor when every message decodes.
    pub d_q: f64,
    /// Distortion with `k = 1..=M-1` sensors in error (`d_ek[k-1]`).
    pub d_ek: Vec<f64>,
    /// Distortion with all `M` sensors in error (order 1).
    pub d_em: f64,
}

/// Evaluates the three distortion-term families.
pub fn distortion_terms(bits: u32, rho: f64, sensors: usize) -> Result<DistortionTerms> {
    if sensors == 0 {
        return Err(Error::InvalidParameter("sensor count must be >= 1".into()));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::EstimatorUndefined(
            "distortion terms divide by rho; need rho > 0".into(),
        ));
    }
    let m = sensors as f64;
    let r2 = rho * rho;
    let comp2 = 1.0 - r2;
    let comp = comp2.sqrt();
    let sqrt3 = 3f64.sqrt();
    let b = bits as i32;

    let d_q = comp2 / (r2 * m)
        + (sqrt3 / (r2 * m)) * (2f64.powi(-2 * b + 1) + sqrt3 * comp2 / 2.0)
        + 2f64.powi(-b + 2) * 3.0 * comp / (m * r2);

    let d_ek = (1..sensors)
        .map(|k| {
            let kf = k as f64;
            3.0 * ((m + 8.0 * kf) * comp2
                + 2f64.powi(-b + 2) * ((m + 2.0 * kf) * comp + m * 2f64.powi(-b)))
                / (m * m * r2)
        })
        .collect();

    let d_em = 1.0 + 12.0 / m + 12.0 * comp / (rho * m) + 3.0 * comp2 / (r2 * m);

    Ok(DistortionTerms { d_q, d_ek, d_em })
}

/// Control factor entering the residual first-round error under the
/// L-threshold rule: with `k >= l` sensors in error, the errors survive to
/// the end only if at least `k - l + 1` of the `k` NACKs are missed. Each
/// missed NACK contributes the exponential bound of the single-sensor miss;
/// the binomial counts which subset is missed. For `k < l` the receiver never
/// retransmits, so the factor is 1.
fn control_factor_bound(k: usize, sensors: usize, bud: &EnergyBudget) -> f64 {
    if k < bud.l {
        return 1.0;
    }
    let misses = (k - bud.l + 1) as f64;
    let per_miss =
        0.5 * (-(bud.lambda.sqrt() - 1.0).powi(2) * bud.e_c1 / (sensors as f64 * bud.n0)).exp();
    (binomial(k as u64, (k - bud.l + 1) as u64) * per_miss.powf(misses)).min(1.0)
}

/// Exact probability that fewer than `l` of the `k` NACKs are detected
/// (binomial over the per-sensor Marcum miss probability); 1 when `k < l`.
fn control_factor_exact(k: usize, sensors: usize, bud: &EnergyBudget) -> f64 {
    let per_sensor = bud.e_c1 / sensors as f64;
    let a = (2.0 * per_sensor / bud.n0).sqrt();
    let b = (2.0 * bud.lambda * per_sensor / bud.n0).sqrt();
    let miss = marcum_q1_complement(a, b);
    let detect = 1.0 - miss;
    let mut acc = 0.0;
    for d in 0..bud.l.min(k + 1) {
        acc += binomial(k as u64, d as u64) * detect.powi(d as i32) * miss.powi((k - d) as i32);
    }
    acc.min(1.0)
}

/// Error probabilities after both protocol rounds, split by the number of
/// sensors in error.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    /// Detector window `W`.
    pub window: usize,
    /// First-round pairwise probabilities `P2(k)` for `k = 1..=M`.
    pub p2: Vec<f64>,
    /// Raw two-round bounds for `k = 1..=M-1` in error (`p_ek_raw[k-1]`).
    pub p_ek_raw: Vec<f64>,
    /// Raw two-round bound for all `M` in error.
    pub p_em_raw: f64,
    /// First-round union bound.
    pub union: UnionBound,
}

impl ErrorProfile {
    /// Clipped `P_{e,k}` for `k` in `1..=M-1`.
    pub fn p_ek(&self, k: usize) -> f64 {
        self.p_ek_raw[k - 1].min(1.0)
    }

    /// Clipped `P_{e,M}`.
    pub fn p_em(&self) -> f64 {
        self.p_em_raw.min(1.0)
    }
}

/// Two-round error probabilities under the L-threshold rule.
///
/// Each `P_{e,k}` combines the residual first-round error (first-round
/// pairwise probability times the control factor) with the chase-combined
/// second-round error at energy `e_d1 + e_d2`. With `l = 1` this is the plain
/// two-round protocol.
pub fn two_round_error_probs(
    bits: u32,
    rho: f64,
    sensors: usize,
    bud: &EnergyBudget,
) -> Result<ErrorProfile> {
    bud.validate_sensors(sensors)?;
    let union = union_bound_round1(bits, rho, sensors, bud)?;
    let w = union.window as f64;
    let nb = 2f64.powi(bits as i32);
    let p2: Vec<f64> = (1..=sensors)
        .map(|k| pairwise_p2(k, gamma_round1(k, sensors, bud)))
        .collect();
    let mut p_ek_raw = Vec::with_capacity(sensors.saturating_sub(1));
    for k in 1..sensors {
        let residual = control_factor_bound(k, sensors, bud) * p2[k - 1];
        let second = pairwise_p2(2 * k, gamma_combined(k, sensors, bud));
        p_ek_raw.push(binomial(sensors as u64, k as u64) * w.powi(k as i32) * (residual + second));
    }
    let residual_m = control_factor_bound(sensors, sensors, bud) * p2[sensors - 1];
    let second_m = pairwise_p2(2 * sensors, gamma_combined(sensors, sensors, bud));
    let p_em_raw = nb * w.powi(sensors as i32 - 1) * (residual_m + second_m);
    Ok(ErrorProfile {
        window: union.window,
        p2,
        p_ek_raw,
        p_em_raw,
        union,
    })
}

/// Assembled distortion upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionBound {
    pub terms: DistortionTerms,
    pub errors: ErrorProfile,
    /// `d_q + sum_k d_ek P_ek + d_em P_em` with clipped probabilities.
    pub total: f64,
}

/// End-to-end distortion bound of the two-round protocol with the
/// L-threshold rule taken from the budget.
pub fn upper_bound_distortion(
    bits: u32,
    rho: f64,
    sensors: usize,
    bud: &EnergyBudget,
) -> Result<DistortionBound> {
    let terms = distortion_terms(bits, rho, sensors)?;
    let errors = two_round_error_probs(bits, rho, sensors, bud)?;
    let mut total = terms.d_q;
    for k in 1..sensors {
        total += terms.d_ek[k - 1] * errors.p_ek(k);
    }
    total += terms.d_em * errors.p_em();
    Ok(DistortionBound {
        terms,
        errors,
        total,
    })
}

/// Average energy spent by the protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageEnergy {
    /// Ledger form: first-round data energy, per-sensor control energy for
    /// the erroneous sensors, and second-round energy weighted by the actual
    /// trigger probabilities (exact Marcum control terms).
    pub exact: f64,
    /// The coarser closed form that bounds every trigger weight by the
    /// all-in-error case.
    pub bound: f64,
}

/// Evaluates both average-energy forms.
///
/// First-round per-k probabilities are the union-bound terms, renormalized
/// onto the simplex when they saturate so the ledger stays inside
/// `[e_d1, e_d1 + e_c1 + e_d2]`.
pub fn average_energy(
    bits: u32,
    rho: f64,
    sensors: usize,
    bud: &EnergyBudget,
) -> Result<AverageEnergy> {
    bud.validate_sensors(sensors)?;
    let union = union_bound_round1(bits, rho, sensors, bud)?;
    let m = sensors as f64;
    let terms = union.normalized_terms();
    let p_e = union.total();
    let residual = (1.0 - terms.iter().sum::<f64>()).max(0.0);
    let miss = (-bud.lambda * bud.e_c1 / bud.n0).exp();

    let mut exact = bud.e_d1;
    for (i, t) in terms.iter().enumerate() {
        let k = i + 1;
        exact += (k as f64 / m) * bud.e_c1 * t;
        exact += bud.e_d2 * t * (1.0 - control_factor_exact(k, sensors, bud));
    }
    exact += bud.e_d2 * residual * miss;

    let bound = bud.e_d1
        + bud.e_c1 * p_e
        + bud.e_d2
            * (p_e * (1.0 - control_factor_exact(sensors, sensors, bud)) + (1.0 - p_e) * miss);
    Ok(AverageEnergy { exact, bound })
}

/// Distortion bound of a single-round transmission without feedback, with the
/// whole budget in the data phase.
pub fn one_shot_baseline(
    bits: u32,
    rho: f64,
    sensors: usize,
    e_total: f64,
    n0: f64,
) -> Result<f64> {
    if !(e_total >= 0.0) {
        return Err(Error::InvalidParameter("e_total must be >= 0".into()));
    }
    if !(n0 > 0.0) {
        return Err(Error::InvalidParameter("n0 must be > 0".into()));
    }
    let terms = distortion_terms(bits, rho, sensors)?;
    let w = detection_window(bits, rho) as f64;
    let nb = 2f64.powi(bits as i32);
    let m = sensors as f64;
    let mut total = terms.d_q;
    for k in 1..sensors {
        let gamma = k as f64 * e_total / (2.0 * m * n0);
        let t = binomial(sensors as u64, k as u64) * w.powi(k as i32) * pairwise_p2(k, gamma);
        total += terms.d_ek[k - 1] * t.min(1.0);
    }
    let gamma_m = e_total / (2.0 * n0);
    let t_m = nb * w.powi(sensors as i32 - 1) * pairwise_p2(sensors, gamma_m);
    total += terms.d_em * t_m.min(1.0);
    Ok(total)
}
