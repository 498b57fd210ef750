//! Uniform linear array steering vectors.
//!
//! Element `i` (0-based) sits at `i * spacing` wavelengths along the array axis and
//! the phase reference is element 0, so `a(θ)[0] == 1` for every angle. Angles are
//! measured from broadside in the owning device's local frame.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{CVector, C64};

/// Uniform linear array geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub num_elements: usize,
    #[serde(default = "half_wavelength")]
    pub element_spacing_wavelengths: f64,
}

fn half_wavelength() -> f64 {
    0.5
}

impl ArraySpec {
    /// Half-wavelength ULA with `num_elements` elements.
    pub fn ula(num_elements: usize) -> Self {
        assert!(num_elements >= 1, "array needs at least one element");
        ArraySpec {
            num_elements,
            element_spacing_wavelengths: 0.5,
        }
    }

    /// Steering vector `a(θ)`, element `i` = `exp(j 2π d i sin θ)`.
    pub fn steering(&self, theta: f64) -> CVector {
        let k = 2.0 * PI * self.element_spacing_wavelengths * theta.sin();
        CVector::from_fn(self.num_elements, |i, _| C64::from_polar(1.0, k * i as f64))
    }

    /// Exact derivative `∂a(θ)/∂θ`.
    pub fn steering_derivative(&self, theta: f64) -> CVector {
        let scale = 2.0 * PI * self.element_spacing_wavelengths;
        let k = scale * theta.sin();
        let dk = scale * theta.cos();
        CVector::from_fn(self.num_elements, |i, _| {
            let i = i as f64;
            C64::new(0.0, dk * i) * C64::from_polar(1.0, k * i)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn broadside_is_all_ones() {
        let a = ArraySpec::ula(7).steering(0.0);
        for v in a.iter() {
            assert_relative_eq!(v.re, 1.0);
            assert_relative_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn endfire_two_elements() {
        let a = ArraySpec::ula(2).steering(PI / 2.0);
        assert_relative_eq!(a[0].re, 1.0);
        assert_relative_eq!(a[1].re, -1.0, epsilon = 1e-15);
        assert!(a[1].im.abs() < 1e-15);
        let da = ArraySpec::ula(16).steering_derivative(PI / 2.0);
        assert!(da.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn derivative_matches_central_difference() {
        let spec = ArraySpec::ula(16);
        let (theta, h) = (0.3, 1e-6);
        let fd = (spec.steering(theta + h) - spec.steering(theta - h)) / C64::from(2.0 * h);
        let an = spec.steering_derivative(theta);
        assert_eq!(an[0], C64::new(0.0, 0.0));
        let rel = (&fd - &an).norm() / an.norm();
        assert!(rel < 1e-6, "relative error {rel}");
    }

    proptest! {
        #[test]
        fn unit_modulus_and_symmetry(theta in -3.2f64..3.2, m in 1usize..33) {
            let spec = ArraySpec::ula(m);
            let a = spec.steering(theta);
            prop_assert!((a.norm_squared() - m as f64).abs() < 1e-9);
            let b = spec.steering(-theta);
            prop_assert!((a.conjugate() - b).norm() < 1e-9);
            let da = spec.steering_derivative(theta);
            prop_assert!(a.dotc(&da).re.abs() < 1e-8 * (1.0 + da.norm()));
        }
    }
}
