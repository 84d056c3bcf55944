//! Radial kernel profiles and the variably scaled (augmented) metric.
//!
//! A variably scaled kernel lifts every point `u` to `(u, s(u))`, where `s` is a
//! scaling function, and evaluates an ordinary radial kernel on the lifted
//! points. With a constant scaling the extra coordinate cancels and the kernel
//! reduces to the plain radial one.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::freq_domain::FrequencyDomain;

/// Strictly positive definite radial families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KernelFamily {
    /// `exp(-(γr)²)`
    #[default]
    Gaussian,
    /// `1 / sqrt(1 + (γr)²)`
    InverseMultiquadric,
    /// `(1 + γr) exp(-γr)`
    MaternC2,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::InverseMultiquadric => "inverse_multiquadric",
            KernelFamily::MaternC2 => "matern_c2",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "inverse_multiquadric" | "imq" => Ok(KernelFamily::InverseMultiquadric),
            "matern_c2" | "matern" => Ok(KernelFamily::MaternC2),
            other => Err(Error::Config(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Kernel family plus its shape parameter (frequency units⁻¹).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    family: KernelFamily,
    gamma: f64,
}

impl KernelConfig {
    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Config(format!(
                "shape parameter must be positive and finite, got {gamma}"
            )));
        }
        Ok(Self { family, gamma })
    }

    pub fn gaussian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, gamma)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Profile value at a distance already known to be valid.
    #[inline]
    pub(crate) fn profile(&self, r: f64) -> f64 {
        let t = self.gamma * r;
        match self.family {
            KernelFamily::Gaussian => (-(t * t)).exp(),
            KernelFamily::InverseMultiquadric => 1.0 / (1.0 + t * t).sqrt(),
            KernelFamily::MaternC2 => (1.0 + t) * (-t).exp(),
        }
    }

    /// Profile value from a squared distance.
    #[inline]
    pub(crate) fn profile_sq(&self, d2: f64) -> f64 {
        self.profile(d2.sqrt())
    }
}

/// Scaling function samples: one value per node, and optionally the scaling
/// on the evaluation grid (zero outside the frequency support).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSamples {
    nodal_values: Vec<f64>,
    grid_field: Option<Array2<f64>>,
}

impl ScalingSamples {
    pub fn new(nodal_values: Vec<f64>) -> Result<Self> {
        if let Some(i) = nodal_values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("scaling value at node {i} is not finite")));
        }
        Ok(Self {
            nodal_values,
            grid_field: None,
        })
    }

    /// Constant scaling; the kernel collapses to the plain radial kernel.
    pub fn constant(n: usize, value: f64) -> Self {
        Self {
            nodal_values: vec![value; n],
            grid_field: None,
        }
    }

    /// Attaches the scaling on the grid of `domain`, zero-padded outside the
    /// support.
    pub fn with_grid_field(mut self, field: Array2<f64>, domain: &FrequencyDomain) -> Result<Self> {
        domain.check_shape(field.dim())?;
        if field.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("scaling grid field is not finite".into()));
        }
        self.grid_field = Some(domain.apply_mask(&field));
        Ok(self)
    }

    /// Constant scaling on both the nodes and the grid of `domain`.
    pub fn constant_on(n: usize, value: f64, domain: &FrequencyDomain) -> Self {
        let field = Array2::from_elem(domain.grid().dim(), value);
        Self {
            nodal_values: vec![value; n],
            grid_field: Some(domain.apply_mask(&field)),
        }
    }

    pub fn nodal_values(&self) -> &[f64] {
        &self.nodal_values
    }

    pub fn grid_field(&self) -> Option<&Array2<f64>> {
        self.grid_field.as_ref()
    }

    pub fn len(&self) -> usize {
        self.nodal_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodal_values.is_empty()
    }
}

/// `φ_γ(r)` for the configured family.
pub fn radial_profile(config: &KernelConfig, r: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::Domain(format!("radial distance must be nonnegative, got {r}")));
    }
    Ok(config.profile(r))
}

#[inline]
pub(crate) fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Euclidean distance between the augmented points `(u, su)` and `(v, sv)`.
pub fn vsk_distance(u: &[f64], v: &[f64], su: f64, sv: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let ds = su - sv;
    Ok((squared_distance(u, v) + ds * ds).sqrt())
}

/// Kernel value between two augmented points.
pub fn kernel_entry(config: &KernelConfig, u: &[f64], v: &[f64], su: f64, sv: f64) -> Result<f64> {
    radial_profile(config, vsk_distance(u, v, su, sv)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_profile_values() {
        let k = KernelConfig::gaussian(1.0).unwrap();
        assert_eq!(radial_profile(&k, 0.0).unwrap(), 1.0);
        assert!((radial_profile(&k, 1.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn matern_profile_matches_high_precision_value() {
        // (1 + 2·0.5)·exp(-1) = 2/e, evaluated with 50-digit arithmetic.
        let k = KernelConfig::new(KernelFamily::MaternC2, 2.0).unwrap();
        let v = radial_profile(&k, 0.5).unwrap();
        assert!((v - 0.735_758_882_342_884_6).abs() < 1e-15);
    }

    #[test]
    fn inverse_multiquadric_profile() {
        let k = KernelConfig::new(KernelFamily::InverseMultiquadric, 0.5).unwrap();
        let v = radial_profile(&k, 2.0).unwrap();
        assert!((v - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn negative_distance_is_rejected() {
        let k = KernelConfig::gaussian(1.0).unwrap();
        assert!(matches!(radial_profile(&k, -1e-3), Err(Error::Domain(_))));
        assert!(radial_profile(&k, f64::NAN).is_err());
    }

    #[test]
    fn invalid_shape_parameter() {
        assert!(KernelConfig::gaussian(0.0).is_err());
        assert!(KernelConfig::gaussian(-1.0).is_err());
        assert!(KernelConfig::gaussian(f64::INFINITY).is_err());
    }

    #[test]
    fn augmented_distances() {
        assert_eq!(vsk_distance(&[1.0, 2.0], &[1.0, 2.0], 3.0, 3.0).unwrap(), 0.0);
        assert_eq!(vsk_distance(&[0.0, 0.0], &[3.0, 0.0], 0.0, 4.0).unwrap(), 5.0);
        let u = [0.3, -1.7];
        let v = [2.2, 0.9];
        let plain = squared_distance(&u, &v).sqrt();
        assert_eq!(vsk_distance(&u, &v, 7.5, 7.5).unwrap(), plain);
        assert!(matches!(
            vsk_distance(&[0.0, 0.0], &[0.0, 0.0, 0.0], 0.0, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diagonal_entry_is_one() {
        let k = KernelConfig::gaussian(0.02).unwrap();
        assert_eq!(kernel_entry(&k, &[10.0, 5.0], &[10.0, 5.0], 2.0, 2.0).unwrap(), 1.0);
    }

    fn family() -> impl Strategy<Value = KernelFamily> {
        prop_oneof![
            Just(KernelFamily::Gaussian),
            Just(KernelFamily::InverseMultiquadric),
            Just(KernelFamily::MaternC2)
        ]
    }

    proptest! {
        #[test]
        fn entry_is_symmetric_and_bounded(
            fam in family(),
            gamma in 1e-3f64..1.0,
            u in prop::array::uniform2(-10.0f64..10.0),
            v in prop::array::uniform2(-10.0f64..10.0),
            su in -5.0f64..5.0,
            sv in -5.0f64..5.0,
        ) {
            let k = KernelConfig::new(fam, gamma).unwrap();
            let a = kernel_entry(&k, &u, &v, su, sv).unwrap();
            let b = kernel_entry(&k, &v, &u, sv, su).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a > 0.0);
            prop_assert!(a <= radial_profile(&k, 0.0).unwrap());
        }

        #[test]
        fn entry_is_composition(
            fam in family(),
            gamma in 1e-3f64..5.0,
            u in prop::array::uniform3(-10.0f64..10.0),
            v in prop::array::uniform3(-10.0f64..10.0),
            su in -5.0f64..5.0,
            sv in -5.0f64..5.0,
        ) {
            let k = KernelConfig::new(fam, gamma).unwrap();
            let d = vsk_distance(&u, &v, su, sv).unwrap();
            prop_assert_eq!(kernel_entry(&k, &u, &v, su, sv).unwrap(), radial_profile(&k, d).unwrap());
        }

        #[test]
        fn profile_is_decreasing(fam in family(), gamma in 1e-2f64..5.0, r in 0.0f64..3.0, dr in 1e-3f64..1.0) {
            let k = KernelConfig::new(fam, gamma).unwrap();
            prop_assert!(radial_profile(&k, r + dr).unwrap() < radial_profile(&k, r).unwrap());
        }

        #[test]
        fn constant_scaling_reduces_to_radial(
            gamma in 1e-3f64..5.0,
            u in prop::array::uniform2(-10.0f64..10.0),
            v in prop::array::uniform2(-10.0f64..10.0),
            s in -100.0f64..100.0,
        ) {
            let k = KernelConfig::gaussian(gamma).unwrap();
            let plain = radial_profile(&k, squared_distance(&u, &v).sqrt()).unwrap();
            prop_assert_eq!(kernel_entry(&k, &u, &v, s, s).unwrap(), plain);
        }
    }
}
