//! Two-mode Gaussian state algebra in shot-noise units.
//!
//! Covariance matrices are kept in the standard form
//!
//! ```text
//!     [ a·I    c·σz ]
//!     [ c·σz   b·I  ]
//! ```
//!
//! with vacuum variance 1. All entropies are in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack below 1 that is attributed to rounding and clamped away.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-6;

/// Symmetric two-mode covariance matrix in `(a·I, c·σz; c·σz, b·I)` form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeCovariance {
    /// Per-quadrature variance of the first mode.
    pub a: f64,
    /// Per-quadrature variance of the second mode.
    pub b: f64,
    /// Quadrature correlation: `+c` on x, `-c` on p.
    pub c: f64,
}

impl TwoModeCovariance {
    /// Builds a covariance matrix, rejecting non-finite entries and
    /// variances below the vacuum level.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::NonPhysicalState(format!(
                "non-finite covariance entries ({a}, {b}, {c})"
            )));
        }
        if a < 1.0 - PHYSICALITY_TOLERANCE || b < 1.0 - PHYSICALITY_TOLERANCE {
            return Err(Error::NonPhysicalState(format!(
                "variance below vacuum level: a = {a}, b = {b}"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Two-mode vacuum.
    pub fn vacuum() -> Self {
        Self { a: 1.0, b: 1.0, c: 0.0 }
    }

    /// Two-mode squeezed vacuum of variance `v`.
    pub fn tmsv(v: f64) -> Result<Self> {
        if !(v >= 1.0) {
            return Err(crate::error::invalid(
                "v",
                format!("TMSV variance must be >= 1, got {v}"),
            ));
        }
        Self::new(v, v, ((v - 1.0) * (v + 1.0)).sqrt())
    }

    /// `ab - c²`, the determinant of the x-quadrature block, evaluated with
    /// compensated products.
    pub fn quadrature_block_det(&self) -> f64 {
        let p = self.a * self.b;
        let p_err = self.a.mul_add(self.b, -p);
        let q = self.c * self.c;
        let q_err = self.c.mul_add(self.c, -q);
        (p - q) + (p_err - q_err)
    }

    /// Determinant of the full 4×4 matrix, `(ab - c²)²`.
    pub fn determinant(&self) -> f64 {
        let s = self.quadrature_block_det();
        s * s
    }

    pub fn is_physical(&self) -> bool {
        symplectic_eigenvalues(self).is_ok()
    }
}

/// Symplectic eigenvalues of a two-mode state, in descending order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticSpectrum {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl SymplecticSpectrum {
    pub fn as_array(&self) -> [f64; 2] {
        [self.lambda1, self.lambda2]
    }
}

// The entries of γ are themselves rounded, so `ab - c²` carries an error of
// order ε·(a² + b²). Below that floor a deficit is indistinguishable from noise.
fn rounding_floor(gamma: &TwoModeCovariance) -> f64 {
    let scale = gamma.a * gamma.a + gamma.b * gamma.b + 2.0 * gamma.c * gamma.c;
    PHYSICALITY_TOLERANCE.max(4.0 * f64::EPSILON * scale)
}

/// Symplectic eigenvalues of `gamma`.
///
/// Uses `Δ = a² + b² - 2c²` and `det γ = (ab - c²)²`, rewritten so that the
/// discriminant `Δ² - 4 det γ = (a-b)²·((a-b)² + 4(ab - c²))` has no
/// cancellation. The smaller eigenvalue is recovered from the product
/// `λ₁²λ₂² = det γ`.
pub fn symplectic_eigenvalues(gamma: &TwoModeCovariance) -> Result<SymplecticSpectrum> {
    let floor = rounding_floor(gamma);
    if gamma.a < 1.0 - floor || gamma.b < 1.0 - floor {
        return Err(Error::NonPhysicalState(format!(
            "variance below vacuum level: a = {}, b = {}",
            gamma.a, gamma.b
        )));
    }
    if gamma.c == 0.0 {
        // product of two thermal modes
        return Ok(SymplecticSpectrum {
            lambda1: clamp_to_vacuum(gamma.a.max(gamma.b), floor, gamma)?,
            lambda2: clamp_to_vacuum(gamma.a.min(gamma.b), floor, gamma)?,
        });
    }
    let s = gamma.quadrature_block_det();
    let d = (gamma.a - gamma.b).powi(2);
    let delta = d + 2.0 * s;
    let mut disc = d * (d + 4.0 * s);
    if disc < 0.0 {
        if disc < -floor {
            return Err(Error::NonPhysicalState(format!(
                "negative symplectic discriminant {disc:e} for {gamma:?}"
            )));
        }
        disc = 0.0;
    }
    let upper_sq = 0.5 * (delta + disc.sqrt());
    if !(upper_sq > 0.0) {
        return Err(Error::NonPhysicalState(format!(
            "vanishing symplectic spectrum for {gamma:?}"
        )));
    }
    let lower_sq = s * s / upper_sq;

    let lambda1 = clamp_to_vacuum(upper_sq.sqrt(), floor, gamma)?;
    let lambda2 = clamp_to_vacuum(lower_sq.sqrt(), floor, gamma)?;
    Ok(SymplecticSpectrum { lambda1, lambda2 })
}

fn clamp_to_vacuum(lambda: f64, floor: f64, gamma: &TwoModeCovariance) -> Result<f64> {
    if lambda >= 1.0 {
        Ok(lambda)
    } else if lambda >= 1.0 - floor {
        Ok(1.0)
    } else {
        Err(Error::NonPhysicalState(format!(
            "symplectic eigenvalue {lambda} < 1 for {gamma:?}"
        )))
    }
}

/// Von Neumann entropy of a thermal mode with symplectic eigenvalue `lam`:
///
/// `G(λ) = ((λ+1)/2) log₂((λ+1)/2) - ((λ-1)/2) log₂((λ-1)/2)`.
pub fn entropy_g(lam: f64) -> Result<f64> {
    if !(lam >= 1.0 - PHYSICALITY_TOLERANCE) || !lam.is_finite() {
        return Err(Error::Domain(format!("G(λ) requires λ >= 1, got {lam}")));
    }
    if lam <= 1.0 {
        return Ok(0.0);
    }
    let plus = 0.5 * (lam + 1.0);
    let minus = 0.5 * (lam - 1.0);
    Ok(plus * plus.log2() - minus * minus.log2())
}

/// Entropy of the two-mode state, `G(λ₁) + G(λ₂)`.
pub fn von_neumann_entropy(gamma: &TwoModeCovariance) -> Result<f64> {
    let spectrum = symplectic_eigenvalues(gamma)?;
    Ok(entropy_g(spectrum.lambda1)? + entropy_g(spectrum.lambda2)?)
}

/// Variance of mode A after a heterodyne measurement on mode B:
/// `vA - c²/(vB + 1)`.
pub fn heterodyne_condition_single(v_a: f64, c: f64, v_b: f64) -> Result<f64> {
    let denom = v_b + 1.0;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!(
            "heterodyne conditioning needs vB + 1 > 0, got vB = {v_b}"
        )));
    }
    Ok(v_a - c * c / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vacuum_and_product_states() {
        let s = symplectic_eigenvalues(&TwoModeCovariance::vacuum()).unwrap();
        assert_eq!(s.as_array(), [1.0, 1.0]);

        let s = symplectic_eigenvalues(&TwoModeCovariance::new(40.0, 40.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(s.lambda1, 40.0, max_relative = 1e-12);
        assert_relative_eq!(s.lambda2, 40.0, max_relative = 1e-12);
    }

    #[test]
    fn tmsv_is_pure() {
        let s = symplectic_eigenvalues(&TwoModeCovariance::tmsv(40.0).unwrap()).unwrap();
        assert!((s.lambda1 - 1.0).abs() < 1e-9);
        assert!((s.lambda2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn entropy_closed_form() {
        assert_eq!(entropy_g(1.0).unwrap(), 0.0);
        assert_relative_eq!(entropy_g(3.0).unwrap(), 2.0, max_relative = 1e-15);
        // mpmath, 40 digits
        assert_relative_eq!(entropy_g(40.0).unwrap(), 5.764472826856873, max_relative = 1e-14);
        assert_eq!(entropy_g(1.0 - 1e-8).unwrap(), 0.0);
        assert!(matches!(entropy_g(0.99), Err(Error::Domain(_))));
        assert!(entropy_g(f64::NAN).is_err());
    }

    #[test]
    fn entropy_of_two_modes() {
        let tmsv = TwoModeCovariance::tmsv(40.0).unwrap();
        assert!(von_neumann_entropy(&tmsv).unwrap().abs() < 1e-9);
        let thermal = TwoModeCovariance::new(3.0, 3.0, 0.0).unwrap();
        assert_relative_eq!(von_neumann_entropy(&thermal).unwrap(), 4.0, max_relative = 1e-14);
        let g = TwoModeCovariance::new(40.0, 40.0, 30.0).unwrap();
        // both eigenvalues equal √700 (mpmath eigenvalues of Ωγ)
        assert_relative_eq!(
            von_neumann_entropy(&g).unwrap(),
            10.33591390134372,
            max_relative = 1e-13
        );
    }

    #[test]
    fn heterodyne_conditioning_examples() {
        assert_eq!(heterodyne_condition_single(40.0, 0.0, 40.0).unwrap(), 40.0);
        let c = 1599f64.sqrt();
        assert_relative_eq!(
            heterodyne_condition_single(40.0, c, 40.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            heterodyne_condition_single(40.0, 20.0, 10.0).unwrap(),
            40.0 - 400.0 / 11.0,
            max_relative = 1e-15
        );
        assert!(heterodyne_condition_single(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn unphysical_states_are_rejected() {
        // correlation stronger than the TMSV bound
        let g = TwoModeCovariance { a: 2.0, b: 2.0, c: 2.0 };
        assert!(matches!(symplectic_eigenvalues(&g), Err(Error::NonPhysicalState(_))));
        assert!(TwoModeCovariance::new(0.5, 1.0, 0.0).is_err());
        assert!(TwoModeCovariance::new(f64::INFINITY, 1.0, 0.0).is_err());
    }

    #[test]
    fn determinant_matches_spectrum() {
        let g = TwoModeCovariance::new(26.79661016949152, 3.380661016949152, 8.133050450087677).unwrap();
        let s = symplectic_eigenvalues(&g).unwrap();
        assert_relative_eq!(g.determinant(), (s.lambda1 * s.lambda2).powi(2), max_relative = 1e-9);
    }
}
