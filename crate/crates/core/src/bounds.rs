//! Closed-form lower bounds on the reconstruction error.
//!
//! All bounds come from sandwiching a cut-set mutual information between a
//! channel-side expansion (which carries the energy) and a source-side
//! expansion (which carries the distortion). Conditioning on a subset `S` of
//! observations trades observation-noise distortion against channel-noise
//! distortion; every bound is therefore a max (or a given choice) over the
//! subset size `|S|`.
//!
//! Conventions: energies are per-sensor, `n0` is the noise spectral density,
//! and a missing channel dimension means the wideband limit `N -> infinity`.
//! Raw bound values can exceed the unit source variance at low energy; they
//! are reported as-is, with [`BoundReport::clipped`] providing the usable
//! `min(value, 1)` form.

use crate::source::{SourceConfig, SourceFamily};
use crate::{Error, Result};
use std::f64::consts::{E, PI};

/// Per-sensor channel budget for the bound evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelBudget {
    /// Per-sensor energy (equal across sensors).
    pub energy_per_sensor: f64,
    /// Noise spectral density.
    pub n0: f64,
    /// Channel dimension `N`; `None` selects the wideband limit.
    pub channel_dim: Option<u64>,
}

impl ChannelBudget {
    pub fn new(energy_per_sensor: f64, n0: f64, channel_dim: Option<u64>) -> Result<Self> {
        if !(energy_per_sensor >= 0.0) {
            return Err(Error::InvalidParameter(
                "per-sensor energy must be >= 0".into(),
            ));
        }
        if !(n0 > 0.0) {
            return Err(Error::InvalidParameter("n0 must be > 0".into()));
        }
        if channel_dim == Some(0) {
            return Err(Error::InvalidParameter(
                "channel dimension must be >= 1".into(),
            ));
        }
        Ok(ChannelBudget {
            energy_per_sensor,
            n0,
            channel_dim,
        })
    }
}

/// Result of a bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    /// The distortion lower bound (raw, possibly vacuous).
    pub value: f64,
    /// Subset size attaining the max (where a max is taken).
    pub argmax_subset_size: usize,
    /// The distribution-dependent constant used at that subset size.
    pub constant_used: f64,
    /// Regime identifier: the subset size of the active piecewise branch.
    pub regime_index: usize,
}

impl BoundReport {
    /// Bound clipped against the trivial unit-variance bound, for plotting.
    pub fn clipped(&self) -> f64 {
        self.value.min(1.0)
    }
}

/// Distribution constant for the common-sample bound: `(6/(pi e))^(|S|+1)`
/// for the uniform family, 1 for the Gaussian family.
pub fn c_d_constant(family: SourceFamily, subset_size: usize) -> f64 {
    match family {
        SourceFamily::Uniform => (6.0 / (PI * E)).powi(subset_size as i32 + 1),
        SourceFamily::Gaussian => 1.0,
    }
}

/// The correlation factor `(1 - rho^2) / (1 + (|S|-1) rho^2)`.
///
/// At `|S| = 0` the ratio is identically 1 for rho < 1 and is defined as its
/// limit 1 at rho = 1.
pub fn correlation_gain(subset_size: usize, rho: f64) -> f64 {
    if subset_size == 0 {
        1.0
    } else {
        (1.0 - rho * rho) / (1.0 + (subset_size as f64 - 1.0) * rho * rho)
    }
}

/// Minimum mean-square error of estimating the common sample from all `M`
/// noisy observations: `(1 - rho^2) / (1 + (M-1) rho^2)`.
pub fn mmse_observation(sensors: usize, rho: f64) -> f64 {
    assert!(sensors >= 1);
    correlation_gain(sensors, rho)
}

/// One candidate term of the wideband common-sample bound at subset size `s`.
pub fn asymptotic_term(
    family: SourceFamily,
    sensors: usize,
    rho: f64,
    e_over_n0: f64,
    s: usize,
) -> f64 {
    c_d_constant(family, s)
        * correlation_gain(s, rho)
        * (-2.0 * (sensors - s) as f64 * e_over_n0).exp()
}

fn finite_n_term(cfg: &SourceConfig, bud: &ChannelBudget, n: u64, s: usize) -> f64 {
    let k = cfg.dimension as f64;
    let excluded = (cfg.sensors - s) as f64;
    let load = k * excluded * bud.energy_per_sensor / (n as f64 * bud.n0);
    let channel = (-(2.0 * n as f64 / k) * load.ln_1p()).exp();
    c_d_constant(cfg.family, s) * correlation_gain(s, cfg.rho) * channel
}

/// Common-sample lower bound at finite channel dimension: the max over
/// `|S| in 0..=M` of
/// `C_D * (1-rho^2)/(1+(|S|-1)rho^2) * (1 + K(M-|S|)E/(N n0))^(-2N/K)`.
pub fn lower_bound_u_finite_n(cfg: &SourceConfig, bud: &ChannelBudget) -> Result<BoundReport> {
    cfg.validate()?;
    let n = bud
        .channel_dim
        .ok_or_else(|| Error::InvalidParameter("finite-N bound needs a channel dimension".into()))?;
    let mut best = (0usize, f64::NEG_INFINITY);
    for s in 0..=cfg.sensors {
        let t = finite_n_term(cfg, bud, n, s);
        if t > best.1 {
            best = (s, t);
        }
    }
    Ok(BoundReport {
        value: best.1,
        argmax_subset_size: best.0,
        constant_used: c_d_constant(cfg.family, best.0),
        regime_index: best.0,
    })
}

/// Common-sample lower bound in the wideband limit, by exhaustive enumeration
/// of the `M + 1` subset sizes.
///
/// The reported `regime_index` is the maximizing subset size; it always
/// satisfies the local regime conditions checked by
/// [`regime_condition_holds`].
pub fn lower_bound_u_asymptotic(cfg: &SourceConfig, e_over_n0: f64) -> Result<BoundReport> {
    cfg.validate()?;
    if !(e_over_n0 >= 0.0) {
        return Err(Error::InvalidParameter("energy ratio must be >= 0".into()));
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for s in 0..=cfg.sensors {
        let t = asymptotic_term(cfg.family, cfg.sensors, cfg.rho, e_over_n0, s);
        if t > best.1 {
            best = (s, t);
        }
    }
    Ok(BoundReport {
        value: best.1,
        argmax_subset_size: best.0,
        constant_used: c_d_constant(cfg.family, best.0),
        regime_index: best.0,
    })
}

/// Closed-form regime selection for the wideband common-sample bound.
///
/// The log of the candidate term is convex in `|S|` (the step ratios of both
/// the correlation factor and the constant increase with `|S|`), so the max
/// sits at an endpoint. This picks the regime by comparing the two endpoint
/// closed forms directly, independently of the enumeration path.
pub fn asymptotic_piecewise(cfg: &SourceConfig, e_over_n0: f64) -> Result<BoundReport> {
    cfg.validate()?;
    if !(e_over_n0 >= 0.0) {
        return Err(Error::InvalidParameter("energy ratio must be >= 0".into()));
    }
    let m = cfg.sensors;
    let all_excluded = c_d_constant(cfg.family, 0) * (-2.0 * m as f64 * e_over_n0).exp();
    let mmse_floor = c_d_constant(cfg.family, m) * correlation_gain(m, cfg.rho);
    let (s, value) = if mmse_floor > all_excluded {
        (m, mmse_floor)
    } else {
        (0, all_excluded)
    };
    Ok(BoundReport {
        value,
        argmax_subset_size: s,
        constant_used: c_d_constant(cfg.family, s),
        regime_index: s,
    })
}

/// Local regime condition for subset size `s`: its candidate term is not
/// beaten by either neighbour. This is the condition chain of the piecewise
/// bound with the distribution constant carried along (the branch conditions
/// printed without the constant only cover the Gaussian family).
pub fn regime_condition_holds(
    family: SourceFamily,
    sensors: usize,
    rho: f64,
    e_over_n0: f64,
    s: usize,
) -> bool {
    let term = |i: usize| asymptotic_term(family, sensors, rho, e_over_n0, i);
    let up_ok = s == sensors || term(s) >= term(s + 1) * (1.0 - 1e-12);
    let down_ok = s == 0 || term(s) >= term(s - 1) * (1.0 - 1e-12);
    up_ok && down_ok
}

/// Distribution constant for the per-observation bound.
pub fn c_v_constant(family: SourceFamily, subset_size: usize, rho: f64) -> f64 {
    let r2 = rho * rho;
    match family {
        SourceFamily::Gaussian => {
            correlation_gain(subset_size, rho) * (2.0 - r2 + subset_size as f64)
        }
        SourceFamily::Uniform => {
            let s = subset_size;
            let two_pi_e = 2.0 * PI * E;
            let first = if s == 0 {
                // (1-r^2)^2 / (1-r^2) simplified to stay finite at rho = 1
                1728.0 * r2 * (1.0 - r2) / two_pi_e.powi(2)
            } else {
                1728.0 * r2 * (1.0 - r2).powi(2 - s as i32)
                    / (two_pi_e.powi(s as i32 + 2) * (1.0 + (s as f64 - 1.0) * r2))
            };
            first + (6.0 / (PI * E)).powi(s as i32 + 1) * correlation_gain(s, rho)
        }
    }
}

/// Lower bound on the distortion of a single observation `V_j` given a side
/// subset of size `|S|` (which excludes `j`, so `|S| <= M - 1`).
pub fn lower_bound_vj(
    cfg: &SourceConfig,
    bud: &ChannelBudget,
    subset_size: usize,
) -> Result<BoundReport> {
    cfg.validate()?;
    if subset_size >= cfg.sensors {
        return Err(Error::InvalidParameter(format!(
            "side subset excludes the estimated sensor: |S| <= M - 1 = {}",
            cfg.sensors - 1
        )));
    }
    let constant = c_v_constant(cfg.family, subset_size, cfg.rho);
    let channel = match bud.channel_dim {
        Some(n) => {
            let k = cfg.dimension as f64;
            let excluded = (cfg.sensors - subset_size) as f64;
            let load = k * excluded * bud.energy_per_sensor / (n as f64 * bud.n0);
            (-(2.0 * n as f64 / k) * load.ln_1p()).exp()
        }
        None => {
            (-2.0 * (cfg.sensors - subset_size) as f64 * bud.energy_per_sensor / bud.n0).exp()
        }
    };
    Ok(BoundReport {
        value: constant * channel,
        argmax_subset_size: subset_size,
        constant_used: constant,
        regime_index: subset_size,
    })
}

/// Distribution constant for the product-distortion bound.
pub fn c_p_constant(family: SourceFamily, sensors: usize, rho: f64) -> f64 {
    let m = sensors as f64;
    let r2 = rho * rho;
    match family {
        // expanded form of (1-r^2)^M (1 + M r^2/(1-r^2)); finite at rho = 1
        SourceFamily::Gaussian => {
            (1.0 - r2).powi(sensors as i32) + m * r2 * (1.0 - r2).powi(sensors as i32 - 1)
        }
        SourceFamily::Uniform => {
            (((12.0 * r2).powf(1.0 / m) + 12.0 * (1.0 - r2)) / (2.0 * PI * E)).powi(sensors as i32)
        }
    }
}

/// Product-distortion bound and its equal-distortion per-source form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductBound {
    /// Lower bound on the product of the `M` per-observation distortions.
    pub product: f64,
    /// Per-source form under equal distortions, `C_p^(1/M) e^(-2E/n0)`;
    /// this is the point-to-point optimal (Goblick) exponent.
    pub per_source: f64,
    /// The constant `C_p` used.
    pub constant: f64,
}

/// Bound on the product of all `M` observation distortions, assuming equal
/// per-sensor energies.
pub fn product_bound(cfg: &SourceConfig, bud: &ChannelBudget) -> Result<ProductBound> {
    cfg.validate()?;
    let m = cfg.sensors as f64;
    let constant = c_p_constant(cfg.family, cfg.sensors, cfg.rho);
    let product = match bud.channel_dim {
        Some(n) => {
            let k = cfg.dimension as f64;
            let load = k * m * bud.energy_per_sensor / (n as f64 * bud.n0);
            constant * (-(2.0 * n as f64 / k) * load.ln_1p()).exp()
        }
        None => constant * (-2.0 * m * bud.energy_per_sensor / bud.n0).exp(),
    };
    let per_source = constant.powf(1.0 / m) * (-2.0 * bud.energy_per_sensor / bud.n0).exp();
    Ok(ProductBound {
        product,
        per_source,
        constant,
    })
}
