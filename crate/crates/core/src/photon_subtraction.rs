//! Virtual photon subtraction on a two-mode squeezed vacuum source.
//!
//! A party prepares a TMSV state of variance `V`, taps the sent arm on a beam
//! splitter of transmittance `T_PS` and keeps the event where the tapped port
//! carries exactly `k` photons. In the prepare-and-measure picture the same
//! state is obtained by keeping each Gaussian modulation pair `(x, p)` with
//! probability
//!
//! ```text
//!     P(k | x, p) = e^{-w} w^k / k!,   w = s·(1 - T_PS)·λ²·(x² + p²)
//! ```
//!
//! where `λ² = (V-1)/(V+1)` and `(x, p)` are heterodyne outcomes with
//! per-quadrature variance `(V+1)/2`.
//!
//! # Quadrature scale
//!
//! Under that sampling variance `x² + p²` is exponential with mean `V + 1`,
//! so `E[e^{-w} w^k / k!] = m^k / (m+1)^{k+1}` with `m = s(1-T_PS)λ²(V+1)`.
//! Matching this to the unconditional subtraction probability
//!
//! ```text
//!     P_k = (1-λ²)/(1-T_PS λ²) · [λ²(1-T_PS)/(1-T_PS λ²)]^k
//! ```
//!
//! for every `k` forces `m = λ²(1-T_PS)/(1-λ²)`, i.e. **`s = 1/2`**
//! ([`SELECTION_EXPONENT_SCALE`]). Equivalently the coherent amplitude
//! heralded by `(x, p)` is `α = λ(x + ip)/√2`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaussian::{symplectic_eigenvalues, TwoModeCovariance};

/// Largest supported number of subtracted photons.
pub const MAX_SUBTRACTED: u32 = 8;

/// Scale `s` in the post-selection exponent `w = s(1-T_PS)λ²(x²+p²)`.
pub const SELECTION_EXPONENT_SCALE: f64 = 0.5;

const FACTORIALS: [f64; MAX_SUBTRACTED as usize + 1] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0];

/// One party's (virtually) photon-subtracted TMSV source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    v: f64,
    k: u32,
    t_ps: f64,
}

impl SourceParams {
    pub fn new(v: f64, k: u32, t_ps: f64) -> Result<Self> {
        if !(v > 1.0) || !v.is_finite() {
            return Err(invalid("v", format!("TMSV variance must be finite and > 1, got {v}")));
        }
        if k > MAX_SUBTRACTED {
            return Err(invalid(
                "k",
                format!("at most {MAX_SUBTRACTED} subtracted photons, got {k}"),
            ));
        }
        if !(t_ps > 0.0 && t_ps <= 1.0) {
            return Err(invalid("t_ps", format!("transmittance must lie in (0, 1], got {t_ps}")));
        }
        Ok(Self { v, k, t_ps })
    }

    /// Source without subtraction (`k = 0`, `T_PS = 1`).
    pub fn unmodified(v: f64) -> Result<Self> {
        Self::new(v, 0, 1.0)
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn t_ps(&self) -> f64 {
        self.t_ps
    }

    pub fn with_t_ps(self, t_ps: f64) -> Result<Self> {
        Self::new(self.v, self.k, t_ps)
    }

    pub fn is_subtracting(&self) -> bool {
        !(self.k == 0 && self.t_ps == 1.0)
    }

    /// `λ² = (V-1)/(V+1)`.
    pub fn lambda_sq(&self) -> f64 {
        (self.v - 1.0) / (self.v + 1.0)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_sq().sqrt()
    }

    /// Two-mode squeezing parameter `r` with `λ = tanh r`.
    pub fn squeezing(&self) -> f64 {
        self.lambda().atanh()
    }

    /// `1 - T_PS λ²`, written as `((1-T_PS)V + 1 + T_PS)/(V+1)` so it keeps
    /// full precision for large `V`.
    fn one_minus_t_lambda_sq(&self) -> f64 {
        ((1.0 - self.t_ps) * self.v + 1.0 + self.t_ps) / (self.v + 1.0)
    }
}

/// One Gaussian modulation / heterodyne pair in shot-noise units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSample {
    pub x: f64,
    pub p: f64,
}

impl ModulationSample {
    pub fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }
}

/// Unconditional probability of subtracting exactly `k` photons.
pub fn success_probability(src: &SourceParams) -> f64 {
    photon_count_probability(src.v, src.t_ps, src.k)
}

/// Probability that the tapped port of a TMSV arm (variance `v`, beam
/// splitter `t_ps`) carries `k` photons. Geometric in `k`; unlike
/// [`SourceParams`] this accepts any `k`.
pub fn photon_count_probability(v: f64, t_ps: f64, k: u32) -> f64 {
    let lambda_sq = (v - 1.0) / (v + 1.0);
    let denom = ((1.0 - t_ps) * v + 1.0 + t_ps) / (v + 1.0);
    let ratio = lambda_sq * (1.0 - t_ps) / denom;
    2.0 / (v + 1.0) / denom * ratio.powi(k as i32)
}

/// Probability of keeping one modulation pair.
pub fn selection_probability(src: &SourceParams, sample: &ModulationSample) -> f64 {
    let r_sq = sample.x * sample.x + sample.p * sample.p;
    let w = SELECTION_EXPONENT_SCALE * (1.0 - src.t_ps) * src.lambda_sq() * r_sq;
    (-w).exp() * w.powi(src.k as i32) / FACTORIALS[src.k as usize]
}

/// Covariance matrix of the subtracted source: `a` is the heterodyned
/// (kept) mode, `b` the mode sent into the channel.
///
/// ```text
///     V' = (k+1)/(1 - T_PS λ²)
///     a  = 2V' - 1
///     b  = 2 T_PS λ² V' + 1
///     c  = 2 √T_PS λ V'
/// ```
pub fn subtracted_covariance(src: &SourceParams) -> Result<TwoModeCovariance> {
    let v_prime = f64::from(src.k + 1) / src.one_minus_t_lambda_sq();
    let l2 = src.lambda_sq();
    let gamma = TwoModeCovariance::new(
        2.0 * v_prime - 1.0,
        2.0 * src.t_ps * l2 * v_prime + 1.0,
        2.0 * (src.t_ps * l2).sqrt() * v_prime,
    )?;
    symplectic_eigenvalues(&gamma)?;
    Ok(gamma)
}
