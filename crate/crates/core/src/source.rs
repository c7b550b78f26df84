//! Correlated source model, observation quantizer and reconstruction
//! estimator.
//!
//! Each of `M` sensors observes the common unit-variance sample `U` through
//! its own observation noise: `V_j = rho * U + sqrt(1 - rho^2) * U'_j`. For
//! the uniform family, `U` and the `U'_j` are `Uniform(-sqrt(3), sqrt(3))`,
//! so `V_j` has a contaminated uniform density: a flat center with linear
//! ramps at both ends. The quantizer dedicates one bin to each ramp and
//! splits the flat region into `2^B - 2` equal bins; reconstruction uses bin
//! midpoints and the linear estimator `u_hat = sum(v_hat_j) / (rho * M)`.

use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// `sqrt(3)`: support half-width of a zero-mean unit-variance uniform.
pub const SQRT3: f64 = 1.7320508075688772;

/// Distribution family of the common sample and the observation noises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFamily {
    /// `Uniform(-sqrt(3), sqrt(3))`; the only family the protocol supports.
    Uniform,
    /// Standard normal; used by the lower bounds only.
    Gaussian,
}

/// Static description of the sensing network's source side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    /// Number of sensors `M`.
    pub sensors: usize,
    /// Correlation coefficient tying observations to the common sample.
    pub rho: f64,
    /// Distribution family.
    pub family: SourceFamily,
    /// Source dimension `K`. Protocol paths require `K = 1`; only the
    /// finite-blocklength bounds use larger values.
    pub dimension: usize,
}

impl SourceConfig {
    /// Scalar (`K = 1`) configuration.
    pub fn new(sensors: usize, rho: f64, family: SourceFamily) -> Result<Self> {
        Self::with_dimension(sensors, rho, family, 1)
    }

    pub fn with_dimension(
        sensors: usize,
        rho: f64,
        family: SourceFamily,
        dimension: usize,
    ) -> Result<Self> {
        let cfg = SourceConfig {
            sensors,
            rho,
            family,
            dimension,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors == 0 {
            return Err(Error::InvalidParameter("sensor count must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!(
                "rho must lie in [0, 1], got {}",
                self.rho
            )));
        }
        if self.dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(())
    }
}

/// One draw of the source side: the common sample, the per-sensor observation
/// noises and the observations they produce.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// The common sample `U` (the estimation target).
    pub common: f64,
    /// Per-sensor observations `V_j`.
    pub observations: Vec<f64>,
    /// Per-sensor observation noises `U'_j`.
    pub noise: Vec<f64>,
}

/// Draws the common sample and all observations. Deterministic given the rng
/// state; the observation identity `v = rho*u + sqrt(1-rho^2)*u'` holds
/// bit-exactly on the returned set.
///
/// Requires `K = 1` (the sample set is scalar-valued per sensor).
pub fn sample_sources<R: Rng + ?Sized>(cfg: &SourceConfig, rng: &mut R) -> Result<SampleSet> {
    cfg.validate()?;
    if cfg.dimension != 1 {
        return Err(Error::InvalidParameter(
            "sampling is defined for dimension K = 1".into(),
        ));
    }
    let draw = |rng: &mut R| -> f64 {
        match cfg.family {
            SourceFamily::Uniform => (2.0 * rng.random::<f64>() - 1.0) * SQRT3,
            SourceFamily::Gaussian => rng.sample(StandardNormal),
        }
    };
    let common = draw(rng);
    let noise: Vec<f64> = (0..cfg.sensors).map(|_| draw(rng)).collect();
    let scale = (1.0 - cfg.rho * cfg.rho).sqrt();
    let observations = noise
        .iter()
        .map(|&u_prime| cfg.rho * common + scale * u_prime)
        .collect();
    Ok(SampleSet {
        common,
        observations,
        noise,
    })
}

/// Scalar quantizer for the contaminated-uniform observation density.
///
/// Bins are indexed `0..2^B`; `edges` has `2^B + 1` strictly increasing
/// entries covering the full observation support, and `centroids[i]` is the
/// midpoint of bin `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    bits: u32,
    edges: Vec<f64>,
    centroids: Vec<f64>,
}

impl QuantizerSpec {
    /// Builds the quantizer for correlation `rho`.
    ///
    /// The two outermost bins cover the density ramps, each of width
    /// `2*sqrt(3)*min(rho, sqrt(1-rho^2))`; the interior `2^B - 2` bins split
    /// the flat region evenly. When either the ramps or the flat region
    /// degenerate to zero width (`rho` in {0, 1} or `rho = 1/sqrt(2)`), the
    /// whole support is split into `2^B` equal bins instead.
    pub fn build(bits: u32, rho: f64) -> Result<Self> {
        if bits < 2 {
            return Err(Error::InvalidParameter(
                "quantizer needs B >= 2 (two tail bins plus interior)".into(),
            ));
        }
        if bits > 24 {
            return Err(Error::InvalidParameter("quantizer bits cap is 24".into()));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!(
                "rho must lie in [0, 1], got {rho}"
            )));
        }
        let bins = 1usize << bits;
        let comp = (1.0 - rho * rho).sqrt();
        let support = SQRT3 * (rho + comp); // outer support half-width
        let flat = SQRT3 * (rho - comp).abs(); // flat-region half-width
        let tail = support - flat;

        let mut edges = Vec::with_capacity(bins + 1);
        if tail <= 1e-12 * support || flat <= 1e-12 * support {
            // degenerate geometry: rectangular (or triangular) density
            for i in 0..=bins {
                edges.push(-support + 2.0 * support * i as f64 / bins as f64);
            }
        } else {
            edges.push(-support);
            let interior = bins - 2;
            for i in 0..=interior {
                edges.push(-flat + 2.0 * flat * i as f64 / interior as f64);
            }
            edges.push(support);
        }
        debug_assert_eq!(edges.len(), bins + 1);
        let centroids = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(QuantizerSpec {
            bits,
            edges,
            centroids,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn num_bins(&self) -> usize {
        self.centroids.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    /// Reconstruction value of bin `idx` (the bin midpoint).
    pub fn centroid(&self, idx: usize) -> f64 {
        self.centroids[idx]
    }

    /// Half-width of the observation support covered by the partition.
    pub fn support(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Largest bin half-width; bounds the round-trip error of `quantize`.
    pub fn max_half_width(&self) -> f64 {
        self.edges
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]))
            .fold(0.0, f64::max)
    }

    /// Maps an observation to its message index.
    ///
    /// Values exactly on an interior edge go to the lower bin; values outside
    /// the support clamp to the nearest tail bin. NaN is rejected.
    pub fn quantize(&self, v: f64) -> Result<usize> {
        if v.is_nan() {
            return Err(Error::InvalidInput("cannot quantize NaN".into()));
        }
        let idx = self.edges.partition_point(|&e| e < v);
        Ok(if idx == 0 {
            0
        } else {
            (idx - 1).min(self.num_bins() - 1)
        })
    }
}

/// Linear reconstruction of the common sample from decoded observation
/// values: `u_hat = sum(v_hat) / (rho * M)`.
pub fn estimate_common(cfg: &SourceConfig, decoded: &[f64]) -> Result<f64> {
    if cfg.rho == 0.0 {
        return Err(Error::EstimatorUndefined(
            "reconstruction divides by rho; rho = 0 carries no information about u".into(),
        ));
    }
    if decoded.len() != cfg.sensors {
        return Err(Error::InvalidInput(format!(
            "expected {} decoded values, got {}",
            cfg.sensors,
            decoded.len()
        )));
    }
    let sum: f64 = decoded.iter().sum();
    Ok(sum / (cfg.rho * cfg.sensors as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, rho: f64) -> SourceConfig {
        SourceConfig::new(m, rho, SourceFamily::Uniform).unwrap()
    }

    #[test]
    fn full_correlation_removes_contamination() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_sources(&cfg(4, 1.0), &mut rng).unwrap();
        for &v in &s.observations {
            assert_eq!(v, s.common);
        }
    }

    #[test]
    fn zero_correlation_passes_noise_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sample_sources(&cfg(3, 0.0), &mut rng).unwrap();
        for (v, u_prime) in s.observations.iter().zip(&s.noise) {
            assert_eq!(v, u_prime);
        }
    }

    #[test]
    fn observation_identity_holds_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &rho in &[0.2, 0.6, 0.95] {
            let c = cfg(5, rho);
            let s = sample_sources(&c, &mut rng).unwrap();
            let scale = (1.0 - rho * rho).sqrt();
            for j in 0..c.sensors {
                assert_eq!(s.observations[j], rho * s.common + scale * s.noise[j]);
                assert!(s.common.abs() <= SQRT3);
                assert!(s.noise[j].abs() <= SQRT3);
            }
        }
    }

    #[test]
    fn observation_variance_is_unit() {
        // Var(v) = rho^2 + (1 - rho^2) = 1 regardless of rho
        let c = cfg(2, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let s = sample_sources(&c, &mut rng).unwrap();
            sum += s.observations[0];
            sum2 += s.observations[0] * s.observations[0];
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!((var - 1.0).abs() < 0.01, "sample variance {var}");
    }

    #[test]
    fn gaussian_family_samples() {
        let c = SourceConfig::new(2, 0.5, SourceFamily::Gaussian).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sample_sources(&c, &mut rng).unwrap();
        assert_eq!(s.observations.len(), 2);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SourceConfig::new(0, 0.5, SourceFamily::Uniform).is_err());
        assert!(SourceConfig::new(2, 1.5, SourceFamily::Uniform).is_err());
        let c = SourceConfig::with_dimension(2, 0.5, SourceFamily::Uniform, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(matches!(
            sample_sources(&c, &mut rng),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn quantizer_full_correlation_is_rectangular() {
        let q = QuantizerSpec::build(2, 1.0).unwrap();
        assert_eq!(q.num_bins(), 4);
        assert_relative_eq!(q.support(), SQRT3, max_relative = 1e-15);
        // equal widths
        let w: Vec<f64> = q.edges().windows(2).map(|w| w[1] - w[0]).collect();
        for &wi in &w {
            assert_relative_eq!(wi, 2.0 * SQRT3 / 4.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn quantizer_interior_bins_are_equal_width() {
        let q = QuantizerSpec::build(3, 0.8).unwrap();
        assert_eq!(q.num_bins(), 8);
        let comp = (1.0f64 - 0.64).sqrt();
        let flat = SQRT3 * (0.8 - comp);
        let w: Vec<f64> = q.edges().windows(2).map(|w| w[1] - w[0]).collect();
        for wi in &w[1..7] {
            assert_relative_eq!(*wi, 2.0 * flat / 6.0, max_relative = 1e-12);
        }
        // tails cover the ramps
        assert_relative_eq!(w[0], 2.0 * SQRT3 * comp, max_relative = 1e-12);
        assert_relative_eq!(w[7], w[0], max_relative = 1e-12);
    }

    #[test]
    fn partition_covers_support_without_gaps() {
        for &(bits, rho) in &[(2u32, 0.9), (3, 0.5), (5, 0.99), (4, 0.0), (4, 1.0)] {
            let q = QuantizerSpec::build(bits, rho).unwrap();
            let comp = (1.0 - rho * rho).sqrt();
            let total: f64 = q.edges().windows(2).map(|w| w[1] - w[0]).sum();
            assert_relative_eq!(total, 2.0 * SQRT3 * (rho + comp), max_relative = 1e-12);
        }
    }

    #[test]
    fn quantizer_rejects_small_b() {
        assert!(matches!(
            QuantizerSpec::build(1, 0.5),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn centroid_round_trip() {
        let q = QuantizerSpec::build(4, 0.9).unwrap();
        for k in 0..q.num_bins() {
            assert_eq!(q.quantize(q.centroid(k)).unwrap(), k);
        }
    }

    #[test]
    fn quantize_boundary_and_clamping() {
        let q = QuantizerSpec::build(3, 0.7).unwrap();
        assert_eq!(q.quantize(q.edges()[0]).unwrap(), 0);
        assert_eq!(q.quantize(-q.support() - 1.0).unwrap(), 0);
        assert_eq!(q.quantize(q.support() + 1.0).unwrap(), q.num_bins() - 1);
        // interior edge goes to the lower bin
        assert_eq!(q.quantize(q.edges()[3]).unwrap(), 2);
        assert!(matches!(
            q.quantize(f64::NAN),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn round_trip_error_bounded_by_half_width() {
        let q = QuantizerSpec::build(5, 0.95).unwrap();
        let hw = q.max_half_width();
        let s = q.support();
        for i in 0..10_000 {
            let v = -s + 2.0 * s * i as f64 / 9_999.0;
            let err = (q.centroid(q.quantize(v).unwrap()) - v).abs();
            assert!(err <= hw * (1.0 + 1e-12), "v={v} err={err} hw={hw}");
        }
    }

    #[test]
    fn estimator_examples() {
        // perfect decode: all v_hat = rho * u recovers u
        let c = cfg(3, 0.8);
        let u = 0.37;
        let est = estimate_common(&c, &vec![0.8 * u; 3]).unwrap();
        assert_relative_eq!(est, u, max_relative = 1e-14);
        // plain arithmetic mean at rho = 1
        let c1 = cfg(2, 1.0);
        assert_relative_eq!(
            estimate_common(&c1, &[0.5, 0.7]).unwrap(),
            0.6,
            max_relative = 1e-15
        );
        assert!(matches!(
            estimate_common(&cfg(2, 0.0), &[0.1, 0.2]),
            Err(Error::EstimatorUndefined(_))
        ));
        assert!(estimate_common(&c, &[0.1]).is_err());
    }

    proptest! {
        #[test]
        fn edges_strictly_increasing(bits in 2u32..9, rho in 0.0f64..=1.0) {
            let q = QuantizerSpec::build(bits, rho).unwrap();
            prop_assert_eq!(q.num_bins(), 1usize << bits);
            for w in q.edges().windows(2) {
                prop_assert!(w[1] > w[0]);
            }
            for (i, &c) in q.centroids().iter().enumerate() {
                prop_assert!(q.edges()[i] < c && c < q.edges()[i + 1]);
            }
        }

        #[test]
        fn quantize_is_monotone(bits in 2u32..8, rho in 0.0f64..=1.0,
                                a in -4.0f64..4.0, b in -4.0f64..4.0) {
            let q = QuantizerSpec::build(bits, rho).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(q.quantize(lo).unwrap() <= q.quantize(hi).unwrap());
        }

        #[test]
        fn estimator_is_linear(scale in -3.0f64..3.0, v in proptest::collection::vec(-1.5f64..1.5, 4)) {
            let c = cfg(4, 0.9);
            let base = estimate_common(&c, &v).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| scale * x).collect();
            let est = estimate_common(&c, &scaled).unwrap();
            prop_assert!((est - scale * base).abs() <= 1e-12 * (1.0 + base.abs() * scale.abs()));
        }
    }
}
