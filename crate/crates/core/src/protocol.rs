//! Reduction of the two-link MDI configuration to an equivalent one-way
//! channel from Alice to Bob.
//!
//! Charlie's Bell-type measurement and Bob's displacement `B₁ = B₂ + μC`
//! turn the pair of links into a single channel of transmittance
//! `T = (T_A/2)μ²` and input-referred excess noise
//!
//! ```text
//!     ε' = 1 + [T_B(χ_B - 1) + T_A χ_A - C_E]/T_A
//!            + [(√2/μ)√(V_B5 - 1) - √(T_B(V_B2 + 1))]²/T_A
//! ```
//!
//! with `χ_j = (1-T_j)/T_j + ε_j`. At the optimal gain the last bracket
//! vanishes and, without correlations, `ε' = ε_A + [T_B(ε_B - 2) + 2]/T_A`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{symplectic_eigenvalues, TwoModeCovariance};
use crate::photon_subtraction::{subtracted_covariance, SourceParams};

/// Standard telecom fiber loss.
pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;

/// Geometry and noise of the two links into Charlie.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Alice-Charlie distance in km.
    pub l_ac: f64,
    /// Bob-Charlie distance in km.
    pub l_bc: f64,
    pub loss_db_per_km: f64,
    /// Excess noise on Alice's link, referred to the channel input (SNU).
    pub eps_a: f64,
    /// Excess noise on Bob's link (SNU).
    pub eps_b: f64,
}

impl LinkParams {
    pub fn new(l_ac: f64, l_bc: f64, loss_db_per_km: f64, eps_a: f64, eps_b: f64) -> Result<Self> {
        for (name, value) in [("l_ac", l_ac), ("l_bc", l_bc), ("eps_a", eps_a), ("eps_b", eps_b)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(invalid(name, format!("must be finite and >= 0, got {value}")));
            }
        }
        if !(loss_db_per_km > 0.0) || !loss_db_per_km.is_finite() {
            return Err(invalid(
                "loss_db_per_km",
                format!("must be finite and > 0, got {loss_db_per_km}"),
            ));
        }
        Ok(Self {
            l_ac,
            l_bc,
            loss_db_per_km,
            eps_a,
            eps_b,
        })
    }

    pub fn t_a(&self) -> f64 {
        transmittance(self.l_ac, self.loss_db_per_km)
    }

    pub fn t_b(&self) -> f64 {
        transmittance(self.l_bc, self.loss_db_per_km)
    }

    pub fn with_noise(self, eps: f64) -> Result<Self> {
        Self::new(self.l_ac, self.l_bc, self.loss_db_per_km, eps, eps)
    }
}

/// Fiber transmittance `10^(-αL/10)`.
pub fn transmittance(length_km: f64, loss_db_per_km: f64) -> f64 {
    10f64.powf(-loss_db_per_km * length_km / 10.0)
}

/// Where the relay sits for a given total Alice-Bob distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    /// Relay at Bob's station: `L_BC = 0`, `L_AC` = total.
    ExtremeAsymmetric,
    /// Relay halfway: `L_AC = L_BC` = total/2.
    Symmetric,
}

impl Geometry {
    pub fn link(self, total_km: f64, loss_db_per_km: f64, eps: f64) -> Result<LinkParams> {
        match self {
            Geometry::ExtremeAsymmetric => LinkParams::new(total_km, 0.0, loss_db_per_km, eps, eps),
            Geometry::Symmetric => LinkParams::new(0.5 * total_km, 0.5 * total_km, loss_db_per_km, eps, eps),
        }
    }
}

/// Eve's strategy on the two links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attack {
    /// Two independent entangling cloners.
    Independent,
    /// Cloner ancillas maximally entangled with negative x-correlation.
    NegativeEpr,
}

/// Normalization of the correlation term `C_E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CeConvention {
    /// `C_E = (2/T_A)√((1-T_A)(1-T_B))⟨E₂ₓE₃ₓ⟩`, then divided by `T_A` again in `ε'`.
    #[default]
    AsPrinted,
    /// `C_E = 2√((1-T_A)(1-T_B))⟨E₂ₓE₃ₓ⟩`, divided by `T_A` once.
    SingleFactor,
}

/// Second moments of Eve's two injected modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveStatistics {
    pub w_a: f64,
    pub w_b: f64,
    /// `⟨E₂ₓE₃ₓ⟩`; the p-correlation is its negative.
    pub corr_x: f64,
}

impl EveStatistics {
    /// Cloner variances calibrated so that `(1-T_j)W_j = (1-T_j) + T_j ε_j`.
    /// Returns `None` when either link is lossless and Eve has no loss port.
    pub fn for_attack(attack: Attack, link: &LinkParams) -> Option<Self> {
        let (t_a, t_b) = (link.t_a(), link.t_b());
        if t_a >= 1.0 || t_b >= 1.0 {
            return None;
        }
        let w_a = 1.0 + t_a * link.eps_a / (1.0 - t_a);
        let w_b = 1.0 + t_b * link.eps_b / (1.0 - t_b);
        let corr_x = match attack {
            Attack::Independent => 0.0,
            Attack::NegativeEpr => -((w_a * w_a - 1.0) * (w_b * w_b - 1.0)).sqrt().sqrt(),
        };
        Some(Self { w_a, w_b, corr_x })
    }
}

/// Displacement gain for Bob: either the noise-minimizing value or a fixed one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gain {
    Optimal,
    Fixed(f64),
}

/// Equivalent one-way channel seen by Alice's mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentChannel {
    pub t_eq: f64,
    pub eps_eq: f64,
    pub mu: f64,
    pub c_e: f64,
}

/// `χ_j = (1-T_j)/T_j + ε_j`, total input-referred noise of one link.
pub fn link_noise(t: f64, eps: f64) -> f64 {
    (1.0 - t) / t + eps
}

/// Gain that minimizes the equivalent excess noise,
/// `μ = √(2(V_B5 - 1)/(T_B(V_B2 + 1)))`.
pub fn optimal_mu(src_b: &SourceParams, link: &LinkParams) -> Result<f64> {
    let bob = subtracted_covariance(src_b)?;
    optimal_mu_for(&bob, link.t_b())
}

fn optimal_mu_for(bob: &TwoModeCovariance, t_b: f64) -> Result<f64> {
    let (v_b2, v_b5) = (bob.a, bob.b);
    if !(v_b5 > 1.0) {
        return Err(Error::DegenerateSource(v_b5));
    }
    if !(t_b > 0.0) {
        return Err(invalid("l_bc", "Bob-Charlie transmittance underflows to zero"));
    }
    Ok((2.0 * (v_b5 - 1.0) / (t_b * (v_b2 + 1.0))).sqrt())
}

/// Noise-minimized `ε'` for independent attacks,
/// `ε_A + [T_B(ε_B - 2) + 2]/T_A`.
pub fn minimized_excess_noise(link: &LinkParams) -> Result<f64> {
    let t_a = link.t_a();
    if !(t_a > 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    Ok(link.eps_a + (link.t_b() * (link.eps_b - 2.0) + 2.0) / t_a)
}

/// Correlation term `C_E` for the chosen convention.
pub fn correlation_term(attack: Attack, link: &LinkParams, convention: CeConvention) -> f64 {
    let Some(eve) = EveStatistics::for_attack(attack, link) else {
        return 0.0;
    };
    let (t_a, t_b) = (link.t_a(), link.t_b());
    let base = 2.0 * ((1.0 - t_a) * (1.0 - t_b)).sqrt() * eve.corr_x;
    match convention {
        CeConvention::AsPrinted => base / t_a,
        CeConvention::SingleFactor => base,
    }
}

/// Equivalent channel for Bob's source, the two links and Eve's attack.
pub fn equivalent_channel(
    src_b: &SourceParams,
    link: &LinkParams,
    attack: Attack,
    gain: Gain,
    convention: CeConvention,
) -> Result<EquivalentChannel> {
    let (t_a, t_b) = (link.t_a(), link.t_b());
    if !(t_a > 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    let bob = subtracted_covariance(src_b)?;
    let mu = match gain {
        Gain::Optimal => optimal_mu_for(&bob, t_b)?,
        Gain::Fixed(mu) if mu > 0.0 && mu.is_finite() => mu,
        Gain::Fixed(mu) => return Err(invalid("mu", format!("gain must be finite and > 0, got {mu}"))),
    };
    let c_e = correlation_term(attack, link, convention);
    let chi_a = link_noise(t_a, link.eps_a);
    let chi_b = link_noise(t_b, link.eps_b);
    let mismatch = std::f64::consts::SQRT_2 / mu * (bob.b - 1.0).sqrt() - (t_b * (bob.a + 1.0)).sqrt();
    let eps_eq = 1.0 + (t_b * (chi_b - 1.0) + t_a * chi_a - c_e) / t_a + mismatch * mismatch / t_a;
    Ok(EquivalentChannel {
        t_eq: 0.5 * t_a * mu * mu,
        eps_eq,
        mu,
        c_e,
    })
}

/// Covariance of Alice's kept mode and Bob's displaced mode:
/// `(V_A1, T(V_A4 - 1) + 1 + Tε', √T·C_A1A4)`.
pub fn end_to_end_covariance(src_a: &SourceParams, chan: &EquivalentChannel) -> Result<TwoModeCovariance> {
    if !(chan.t_eq > 0.0) || !chan.t_eq.is_finite() {
        return Err(invalid(
            "t_eq",
            format!("equivalent transmittance must be > 0, got {}", chan.t_eq),
        ));
    }
    let alice = subtracted_covariance(src_a)?;
    let t = chan.t_eq;
    let gamma = TwoModeCovariance::new(alice.a, t * (alice.b - 1.0) + 1.0 + t * chan.eps_eq, t.sqrt() * alice.c)?;
    symplectic_eigenvalues(&gamma)?;
    Ok(gamma)
}

/// Full operating point: both sources, links, attack and reconciliation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub alice: SourceParams,
    pub bob: SourceParams,
    pub link: LinkParams,
    pub attack: Attack,
    pub beta: f64,
    pub ce_convention: CeConvention,
}

impl ProtocolConfig {
    pub fn new(alice: SourceParams, bob: SourceParams, link: LinkParams, attack: Attack, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid(
                "beta",
                format!("reconciliation efficiency must lie in (0, 1], got {beta}"),
            ));
        }
        Ok(Self {
            alice,
            bob,
            link,
            attack,
            beta,
            ce_convention: CeConvention::default(),
        })
    }

    pub fn with_ce_convention(mut self, convention: CeConvention) -> Self {
        self.ce_convention = convention;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unmodified() -> SourceParams {
        SourceParams::unmodified(40.0).unwrap()
    }

    #[test]
    fn transmittance_from_distance() {
        assert_eq!(transmittance(0.0, 0.2), 1.0);
        assert_relative_eq!(transmittance(100.0, 0.2), 0.01, max_relative = 1e-14);
    }

    #[test]
    fn optimal_mu_examples() {
        let link = LinkParams::new(0.0, 0.0, 0.2, 0.0, 0.0).unwrap();
        assert_relative_eq!(
            optimal_mu(&unmodified(), &link).unwrap(),
            1.379289318594994,
            max_relative = 1e-14
        );
        // T_B = 0.5 ⇔ L_BC = 10 log10(2)/0.2 km
        let l_bc = 10.0 * 2f64.log10() / 0.2;
        let link = LinkParams::new(0.0, l_bc, 0.2, 0.0, 0.0).unwrap();
        assert_relative_eq!(
            optimal_mu(&unmodified(), &link).unwrap(),
            1.950609660793386,
            max_relative = 1e-13
        );

        let nearly_vacuum = SourceParams::unmodified(1.0 + 1e-12).unwrap();
        let link = LinkParams::new(0.0, 0.0, 0.2, 0.0, 0.0).unwrap();
        assert!(optimal_mu(&nearly_vacuum, &link).unwrap() < 1e-5);
    }

    #[test]
    fn equivalent_noise_example() {
        let link = LinkParams::new(10.0, 0.0, 0.2, 0.002, 0.002).unwrap();
        let chan = equivalent_channel(
            &unmodified(),
            &link,
            Attack::Independent,
            Gain::Optimal,
            CeConvention::AsPrinted,
        )
        .unwrap();
        // mpmath: 0.002 + 0.002/10^-0.2
        assert_relative_eq!(chan.eps_eq, 0.005169786384922227, max_relative = 1e-12);
        assert_relative_eq!(chan.t_eq, 0.6001789374323789, max_relative = 1e-13);
    }

    #[test]
    fn lossless_noiseless_links_add_nothing() {
        let link = LinkParams::new(0.0, 0.0, 0.2, 0.0, 0.0).unwrap();
        let chan = equivalent_channel(
            &unmodified(),
            &link,
            Attack::Independent,
            Gain::Optimal,
            CeConvention::AsPrinted,
        )
        .unwrap();
        assert!(chan.eps_eq.abs() < 1e-14);
        assert_eq!(minimized_excess_noise(&link).unwrap(), 0.0);
    }

    #[test]
    fn off_optimal_gain_adds_noise() {
        let link = LinkParams::new(20.0, 3.0, 0.2, 0.01, 0.01).unwrap();
        let opt = equivalent_channel(
            &unmodified(),
            &link,
            Attack::Independent,
            Gain::Optimal,
            CeConvention::AsPrinted,
        )
        .unwrap();
        for scale in [0.5, 0.9, 1.1, 2.0] {
            let other = equivalent_channel(
                &unmodified(),
                &link,
                Attack::Independent,
                Gain::Fixed(opt.mu * scale),
                CeConvention::AsPrinted,
            )
            .unwrap();
            assert!(other.eps_eq > opt.eps_eq);
        }
        assert!(equivalent_channel(
            &unmodified(),
            &link,
            Attack::Independent,
            Gain::Fixed(-1.0),
            CeConvention::AsPrinted
        )
        .is_err());
    }

    #[test]
    fn lossless_link_has_no_eve_correlation() {
        let link = LinkParams::new(30.0, 0.0, 0.2, 0.002, 0.002).unwrap();
        assert!(EveStatistics::for_attack(Attack::NegativeEpr, &link).is_none());
        assert_eq!(
            correlation_term(Attack::NegativeEpr, &link, CeConvention::AsPrinted),
            0.0
        );
    }

    #[test]
    fn negative_epr_is_maximal_and_negative() {
        let link = LinkParams::new(2.0, 2.0, 0.2, 0.002, 0.002).unwrap();
        let eve = EveStatistics::for_attack(Attack::NegativeEpr, &link).unwrap();
        assert_relative_eq!(eve.w_a, eve.w_b);
        assert_relative_eq!(eve.corr_x, -(eve.w_a * eve.w_a - 1.0).sqrt(), max_relative = 1e-14);
        let t = link.t_a();
        assert_relative_eq!((1.0 - t) * eve.w_a, (1.0 - t) + t * 0.002, max_relative = 1e-14);

        let printed = correlation_term(Attack::NegativeEpr, &link, CeConvention::AsPrinted);
        let single = correlation_term(Attack::NegativeEpr, &link, CeConvention::SingleFactor);
        assert!(printed < 0.0);
        assert_relative_eq!(printed, single / t, max_relative = 1e-14);
    }

    #[test]
    fn end_to_end_examples() {
        let ident = EquivalentChannel {
            t_eq: 1.0,
            eps_eq: 0.0,
            mu: 1.0,
            c_e: 0.0,
        };
        let g = end_to_end_covariance(&unmodified(), &ident).unwrap();
        assert_relative_eq!(g.a, 40.0, max_relative = 1e-12);
        assert_relative_eq!(g.b, 40.0, max_relative = 1e-12);
        assert_relative_eq!(g.c, 1599f64.sqrt(), max_relative = 1e-12);

        let half = EquivalentChannel { t_eq: 0.5, ..ident };
        let g = end_to_end_covariance(&unmodified(), &half).unwrap();
        assert_relative_eq!(g.b, 20.5, max_relative = 1e-12);
        assert_relative_eq!(g.c, (1599f64 * 0.5).sqrt(), max_relative = 1e-12);

        let src = SourceParams::new(40.0, 1, 0.9).unwrap();
        let chan = EquivalentChannel {
            t_eq: 0.1,
            eps_eq: 0.01,
            mu: 1.0,
            c_e: 0.0,
        };
        let g = end_to_end_covariance(&src, &chan).unwrap();
        // mpmath composition of the subtracted covariance and the channel
        assert_relative_eq!(g.a, 26.79661016949152, max_relative = 1e-13);
        assert_relative_eq!(g.b, 3.380661016949152, max_relative = 1e-13);
        assert_relative_eq!(g.c, 8.133050450087677, max_relative = 1e-13);
    }

    #[test]
    fn geometry_mapping() {
        let l = Geometry::ExtremeAsymmetric.link(50.0, 0.2, 0.002).unwrap();
        assert_eq!((l.l_ac, l.l_bc), (50.0, 0.0));
        let l = Geometry::Symmetric.link(50.0, 0.2, 0.002).unwrap();
        assert_eq!((l.l_ac, l.l_bc), (25.0, 25.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(LinkParams::new(-1.0, 0.0, 0.2, 0.0, 0.0).is_err());
        assert!(LinkParams::new(1.0, 0.0, 0.0, 0.0, 0.0).is_err());
        let link = LinkParams::new(1.0, 0.0, 0.2, 0.0, 0.0).unwrap();
        assert!(ProtocolConfig::new(unmodified(), unmodified(), link, Attack::Independent, 0.0).is_err());
        assert!(ProtocolConfig::new(unmodified(), unmodified(), link, Attack::Independent, 1.01).is_err());
        let far = LinkParams::new(1e6, 0.0, 0.2, 0.0, 0.0).unwrap();
        assert_eq!(
            equivalent_channel(
                &unmodified(),
                &far,
                Attack::Independent,
                Gain::Optimal,
                CeConvention::AsPrinted
            ),
            Err(Error::DegenerateGeometry)
        );
    }
}
