//! Asymptotic reverse-reconciliation key rate against collective attacks,
//! with heterodyne detection on both sides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{entropy_g, heterodyne_condition_single, symplectic_eigenvalues, TwoModeCovariance};
use crate::photon_subtraction::success_probability;
use crate::protocol::{end_to_end_covariance, equivalent_channel, Gain, ProtocolConfig};

/// Smallest key rate (bits/pulse) that still counts as a usable key.
pub const KEY_RATE_FLOOR: f64 = 1e-8;

const HOLEVO_ROUNDING: f64 = 1e-9;

/// Everything that goes into the rate at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateBreakdown {
    /// Joint post-selection probability `P = P_A·P_B`.
    pub p_success: f64,
    /// Mutual information between Alice and Bob, bits.
    pub i_ab: f64,
    /// Holevo bound on Eve's information about Bob's data, bits.
    pub chi_be: f64,
    /// Key rate before post-selection losses, `βI - χ`.
    pub k_s: f64,
    /// Signed rate `P(βI - χ)`.
    pub raw_rate: f64,
    /// Reported rate, `max(0, raw_rate)`.
    pub key_rate: f64,
    pub beta: f64,
    pub t_eq: f64,
    pub eps_eq: f64,
    pub mu: f64,
    /// True when `βI <= χ`.
    pub insecure: bool,
}

/// `I(A:B) = log₂((V_A1 + 1)/(V_A1|B + 1))` for heterodyne on both modes.
pub fn mutual_information(gamma: &TwoModeCovariance) -> Result<f64> {
    let conditional = heterodyne_condition_single(gamma.a, gamma.c, gamma.b)?;
    Ok(((gamma.a + 1.0) / (conditional + 1.0)).log2())
}

/// Holevo bound `χ_BE = G(λ₁) + G(λ₂) - G(λ₃)`, where `λ₃` is the variance
/// of Alice's mode conditioned on Bob's heterodyne outcome.
pub fn holevo_bound(gamma: &TwoModeCovariance) -> Result<f64> {
    let spectrum = symplectic_eigenvalues(gamma)?;
    let lambda3 = heterodyne_condition_single(gamma.a, gamma.c, gamma.b)?;
    let chi = entropy_g(spectrum.lambda1)? + entropy_g(spectrum.lambda2)? - entropy_g(lambda3)?;
    if chi >= 0.0 {
        Ok(chi)
    } else if chi >= -HOLEVO_ROUNDING {
        Ok(0.0)
    } else {
        Err(Error::NonPhysicalState(format!(
            "negative Holevo bound {chi:e} for {gamma:?}"
        )))
    }
}

/// Key rate for one operating point, with Bob's gain at its optimum.
pub fn key_rate(cfg: &ProtocolConfig) -> Result<KeyRateBreakdown> {
    let chan = equivalent_channel(&cfg.bob, &cfg.link, cfg.attack, Gain::Optimal, cfg.ce_convention)?;
    let gamma = end_to_end_covariance(&cfg.alice, &chan)?;
    let i_ab = mutual_information(&gamma)?;
    let chi_be = holevo_bound(&gamma)?;
    let p_success = success_probability(&cfg.alice) * success_probability(&cfg.bob);
    let k_s = cfg.beta * i_ab - chi_be;
    let raw_rate = p_success * k_s;
    Ok(KeyRateBreakdown {
        p_success,
        i_ab,
        chi_be,
        k_s,
        raw_rate,
        key_rate: raw_rate.max(0.0),
        beta: cfg.beta,
        t_eq: chan.t_eq,
        eps_eq: chan.eps_eq,
        mu: chan.mu,
        insecure: k_s <= 0.0,
    })
}

/// Repeaterless secret-key capacity of a pure-loss channel, `-log₂(1 - T)`.
pub fn plob_bound(t_total: f64) -> Result<f64> {
    if !(t_total > 0.0 && t_total < 1.0) {
        return Err(Error::Domain(format!("PLOB bound needs 0 < T < 1, got {t_total}")));
    }
    Ok(-(-t_total).ln_1p() / std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_subtraction::SourceParams;
    use crate::protocol::{Attack, LinkParams};
    use approx::assert_relative_eq;

    #[test]
    fn mutual_information_examples() {
        let independent = TwoModeCovariance::new(40.0, 12.0, 0.0).unwrap();
        assert_eq!(mutual_information(&independent).unwrap(), 0.0);
        let tmsv = TwoModeCovariance::tmsv(40.0).unwrap();
        assert_relative_eq!(
            mutual_information(&tmsv).unwrap(),
            4.357552004618084,
            max_relative = 1e-12
        );
        let lossy = TwoModeCovariance::new(40.0, 20.5, 799.5f64.sqrt()).unwrap();
        // mpmath
        assert_relative_eq!(
            mutual_information(&lossy).unwrap(),
            3.426264754702098,
            max_relative = 1e-12
        );
    }

    #[test]
    fn holevo_examples() {
        let tmsv = TwoModeCovariance::tmsv(40.0).unwrap();
        assert!(holevo_bound(&tmsv).unwrap() < 1e-9);
        let thermal = TwoModeCovariance::new(3.0, 3.0, 0.0).unwrap();
        assert_relative_eq!(holevo_bound(&thermal).unwrap(), 2.0, max_relative = 1e-14);
        let lossy = TwoModeCovariance::new(40.0, 20.5, 799.5f64.sqrt()).unwrap();
        // mpmath eigenvalues of Ωγ
        assert_relative_eq!(holevo_bound(&lossy).unwrap(), 2.895972307260051, max_relative = 1e-12);
    }

    #[test]
    fn plob_examples() {
        assert_relative_eq!(plob_bound(0.5).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(plob_bound(0.01).unwrap(), 0.01449956969511508, max_relative = 1e-13);
        let tiny = 1e-12;
        assert_relative_eq!(
            plob_bound(tiny).unwrap(),
            tiny / std::f64::consts::LN_2,
            max_relative = 1e-9
        );
        assert!(plob_bound(0.0).is_err());
        assert!(plob_bound(1.0).is_err());
    }

    #[test]
    fn noiseless_identity_configuration() {
        let src = SourceParams::unmodified(40.0).unwrap();
        let link = LinkParams::new(0.0, 0.0, 0.2, 0.0, 0.0).unwrap();
        let cfg = ProtocolConfig::new(src, src, link, Attack::Independent, 1.0).unwrap();
        let r = key_rate(&cfg).unwrap();
        assert_eq!(r.p_success, 1.0);
        assert!(r.i_ab > 0.0);
        // the equivalent channel is pure loss with T = λ² < 1, so Eve still holds its purification
        assert_relative_eq!(r.t_eq, 39.0 / 41.0, max_relative = 1e-14);
        assert!(r.eps_eq.abs() < 1e-14);
        assert!(r.chi_be > 0.0);
        assert_relative_eq!(r.key_rate, r.i_ab - r.chi_be, max_relative = 1e-15);
        assert!(!r.insecure);
    }

    #[test]
    fn insecure_points_report_zero() {
        let src = SourceParams::unmodified(40.0).unwrap();
        let link = LinkParams::new(200.0, 0.0, 0.2, 0.05, 0.05).unwrap();
        let cfg = ProtocolConfig::new(src, src, link, Attack::Independent, 0.95).unwrap();
        let r = key_rate(&cfg).unwrap();
        assert!(r.insecure);
        assert!(r.raw_rate < 0.0);
        assert_eq!(r.key_rate, 0.0);
    }
}
