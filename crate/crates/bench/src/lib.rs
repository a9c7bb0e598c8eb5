//! Fixtures shared by the benchmarks in `benches/`.

use cvmdi::{McConfig, ProtocolConfig, Scenario, Scheme, SourceParams};

/// Alice subtracts one photon, otherwise default parameters.
pub fn alice_one_photon() -> Scenario {
    Scenario::default().with_scheme(Scheme::AliceOnly, 1)
}

/// Alice subtracts one photon at a fixed transmittance, `distance_km` from
/// the relay.
pub fn fixed_protocol(distance_km: f64, t_ps: f64) -> ProtocolConfig {
    alice_one_photon()
        .protocol(distance_km, t_ps, 1.0)
        .expect("fixture parameters are valid")
}

pub fn sampler(k: u32, t_ps: f64, n_samples: u64) -> McConfig {
    let src = SourceParams::new(40.0, k, t_ps).expect("fixture parameters are valid");
    McConfig::new(src, n_samples, 42).expect("fixture parameters are valid")
}
