//! Parameter searches: optimal beam-splitter transmittance, maximum
//! distance, tolerable excess noise and one-dimensional sweeps.
//!
//! All searches are deterministic. Grid scans are followed by golden-section
//! refinement; root finding is plain bisection on the signed rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::keyrate::{key_rate, plob_bound, KeyRateBreakdown, KEY_RATE_FLOOR};
use crate::photon_subtraction::SourceParams;
use crate::protocol::{Attack, CeConvention, Geometry, ProtocolConfig, DEFAULT_LOSS_DB_PER_KM};

/// Coarse grid spacing for `T_PS`.
pub const TPS_GRID_STEP: f64 = 0.005;
/// Final bracket width of the golden-section refinement.
pub const TPS_TOLERANCE: f64 = 1e-6;
/// Bisection stops once the distance bracket is narrower than this (km).
pub const DISTANCE_TOLERANCE_KM: f64 = 0.01;
/// Bisection stops once the noise bracket is narrower than this (SNU).
pub const NOISE_TOLERANCE: f64 = 1e-6;

const TPS_GRID_POINTS: usize = 199;
const REFINED_CANDIDATES: usize = 3;
const MAX_DISTANCE_SEARCH_KM: f64 = 2000.0;
const MAX_NOISE_SEARCH: f64 = 1e3;

/// Which parties post-select their data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    None,
    AliceOnly,
    BobOnly,
    Both,
}

impl Scheme {
    pub fn alice_subtracts(self) -> bool {
        matches!(self, Scheme::AliceOnly | Scheme::Both)
    }

    pub fn bob_subtracts(self) -> bool {
        matches!(self, Scheme::BobOnly | Scheme::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Party {
    Alice,
    Bob,
}

/// Beam-splitter transmittance: searched or given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TpsChoice {
    Optimal,
    Fixed(f64),
}

/// A protocol family evaluated at varying distance and noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub va: f64,
    pub vb: f64,
    pub scheme: Scheme,
    /// Photons subtracted by each post-selecting party.
    pub k: u32,
    pub tps_a: TpsChoice,
    pub tps_b: TpsChoice,
    /// Excess noise applied to both links.
    pub eps: f64,
    pub beta: f64,
    pub geometry: Geometry,
    pub loss_db_per_km: f64,
    pub attack: Attack,
    pub ce_convention: CeConvention,
}

impl Default for Scenario {
    /// `V = 40`, `ε = 0.002`, `β = 0.95`, relay at Bob, independent attacks.
    fn default() -> Self {
        Self {
            va: 40.0,
            vb: 40.0,
            scheme: Scheme::None,
            k: 1,
            tps_a: TpsChoice::Optimal,
            tps_b: TpsChoice::Optimal,
            eps: 0.002,
            beta: 0.95,
            geometry: Geometry::ExtremeAsymmetric,
            loss_db_per_km: DEFAULT_LOSS_DB_PER_KM,
            attack: Attack::Independent,
            ce_convention: CeConvention::AsPrinted,
        }
    }
}

/// Outcome of [`Scenario::evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub distance_km: f64,
    pub breakdown: KeyRateBreakdown,
    /// Alice's `T_PS` (1 when she does not subtract).
    pub tps_a: f64,
    /// Bob's `T_PS` (1 when he does not subtract).
    pub tps_b: f64,
    /// `-log₂(1 - T_A)`, or `None` on a lossless Alice link.
    pub plob: Option<f64>,
}

impl Scenario {
    /// Symmetric relay with `V = 10⁴`, otherwise as [`Scenario::default`].
    pub fn symmetric() -> Self {
        Self {
            va: 1e4,
            vb: 1e4,
            geometry: Geometry::Symmetric,
            ..Self::default()
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme, k: u32) -> Self {
        self.scheme = scheme;
        self.k = k;
        self
    }

    pub fn with_tps(mut self, tps: TpsChoice) -> Self {
        self.tps_a = tps;
        self.tps_b = tps;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_attack(mut self, attack: Attack) -> Self {
        self.attack = attack;
        self
    }

    pub fn validate(&self) -> Result<()> {
        SourceParams::unmodified(self.va)?;
        SourceParams::unmodified(self.vb)?;
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(invalid("eps", format!("must be finite and >= 0, got {}", self.eps)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid("beta", format!("must lie in (0, 1], got {}", self.beta)));
        }
        for (subtracts, v, choice) in [
            (self.scheme.alice_subtracts(), self.va, self.tps_a),
            (self.scheme.bob_subtracts(), self.vb, self.tps_b),
        ] {
            if !subtracts {
                continue;
            }
            match choice {
                TpsChoice::Optimal if self.k == 0 => {
                    return Err(invalid("k", "optimal T_PS needs at least one subtracted photon"));
                }
                TpsChoice::Fixed(t) => {
                    SourceParams::new(v, self.k, t)?;
                }
                TpsChoice::Optimal => {
                    SourceParams::new(v, self.k, 0.5)?;
                }
            }
        }
        Ok(())
    }

    /// Protocol configuration at `distance_km` with explicit transmittances.
    pub fn protocol(&self, distance_km: f64, tps_a: f64, tps_b: f64) -> Result<ProtocolConfig> {
        let alice = if self.scheme.alice_subtracts() {
            SourceParams::new(self.va, self.k, tps_a)?
        } else {
            SourceParams::unmodified(self.va)?
        };
        let bob = if self.scheme.bob_subtracts() {
            SourceParams::new(self.vb, self.k, tps_b)?
        } else {
            SourceParams::unmodified(self.vb)?
        };
        let link = self.geometry.link(distance_km, self.loss_db_per_km, self.eps)?;
        Ok(ProtocolConfig::new(alice, bob, link, self.attack, self.beta)?.with_ce_convention(self.ce_convention))
    }

    fn rate_at(&self, distance_km: f64, tps_a: f64, tps_b: f64) -> Result<KeyRateBreakdown> {
        key_rate(&self.protocol(distance_km, tps_a, tps_b)?)
    }

    /// Key rate at `distance_km`, optimizing `T_PS` where requested. The
    /// optimum maximizes the signed rate, so the result stays meaningful for
    /// root finding when no transmittance gives a positive key.
    pub fn evaluate(&self, distance_km: f64) -> Result<Evaluation> {
        let alice = self.scheme.alice_subtracts();
        let bob = self.scheme.bob_subtracts();
        let (tps_a, tps_b) = match (alice, bob) {
            (false, false) => (1.0, 1.0),
            (true, false) => {
                let t = self.resolve(self.tps_a, |t| Ok(self.rate_at(distance_km, t, 1.0)?.raw_rate))?;
                (t, 1.0)
            }
            (false, true) => {
                let t = self.resolve(self.tps_b, |t| Ok(self.rate_at(distance_km, 1.0, t)?.raw_rate))?;
                (1.0, t)
            }
            (true, true) => {
                let best_b = |ta: f64| -> Result<TpsOptimum> {
                    match self.tps_b {
                        TpsChoice::Fixed(tb) => Ok(TpsOptimum {
                            t_ps: tb,
                            value: self.rate_at(distance_km, ta, tb)?.raw_rate,
                        }),
                        TpsChoice::Optimal => maximize_tps(|tb| Ok(self.rate_at(distance_km, ta, tb)?.raw_rate)),
                    }
                };
                let ta = self.resolve(self.tps_a, |ta| Ok(best_b(ta)?.value))?;
                (ta, best_b(ta)?.t_ps)
            }
        };
        let breakdown = self.rate_at(distance_km, tps_a, tps_b)?;
        let link = self.geometry.link(distance_km, self.loss_db_per_km, self.eps)?;
        Ok(Evaluation {
            distance_km,
            breakdown,
            tps_a,
            tps_b,
            plob: plob_bound(link.t_a()).ok(),
        })
    }

    fn resolve<F: Fn(f64) -> Result<f64>>(&self, choice: TpsChoice, objective: F) -> Result<f64> {
        match choice {
            TpsChoice::Fixed(t) => Ok(t),
            TpsChoice::Optimal => {
                if self.k == 0 {
                    return Err(invalid("k", "optimal T_PS needs at least one subtracted photon"));
                }
                Ok(maximize_tps(objective)?.t_ps)
            }
        }
    }

    /// Copy of `self` with the transmittances fixed at their optimum for
    /// `distance_km`.
    pub fn frozen_at(&self, distance_km: f64) -> Result<Self> {
        let eval = self.evaluate(distance_km)?;
        Ok(Self {
            tps_a: TpsChoice::Fixed(eval.tps_a),
            tps_b: TpsChoice::Fixed(eval.tps_b),
            ..*self
        })
    }
}

/// Maximizer of an objective over `T_PS`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpsOptimum {
    pub t_ps: f64,
    pub value: f64,
}

/// `T_PS` values of the coarse grid. `T_PS = 1` is excluded: it makes the
/// subtraction probability vanish for `k >= 1`.
pub fn tps_grid() -> impl Iterator<Item = f64> + Clone {
    (1..=TPS_GRID_POINTS).map(|i| i as f64 * TPS_GRID_STEP)
}

/// Grid scan followed by golden-section refinement of the best few local
/// maxima. Unimodality is not assumed.
pub fn maximize_tps<F: Fn(f64) -> Result<f64>>(objective: F) -> Result<TpsOptimum> {
    let grid: Vec<f64> = tps_grid().collect();
    let values = grid.iter().map(|&t| objective(t)).collect::<Result<Vec<_>>>()?;

    let mut peaks: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let left = i == 0 || values[i] >= values[i - 1];
            let right = i + 1 == grid.len() || values[i] >= values[i + 1];
            left && right
        })
        .collect();
    peaks.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    peaks.truncate(REFINED_CANDIDATES);

    let mut best = TpsOptimum {
        t_ps: grid[peaks[0]],
        value: values[peaks[0]],
    };
    for &i in &peaks {
        let lo = if i == 0 { TPS_TOLERANCE } else { grid[i - 1] };
        let hi = if i + 1 == grid.len() {
            1.0 - TPS_TOLERANCE
        } else {
            grid[i + 1]
        };
        let refined = golden_section_max(&objective, lo, hi, TPS_TOLERANCE)?;
        if refined.value > best.value {
            best = refined;
        }
    }
    Ok(best)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum on `[lo, hi]`; returns the best
/// point evaluated.
pub fn golden_section_max<F: Fn(f64) -> Result<f64>>(
    objective: &F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<TpsOptimum> {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = objective(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = objective(x2)?;
        }
    }
    Ok(if f1 >= f2 {
        TpsOptimum { t_ps: x1, value: f1 }
    } else {
        TpsOptimum { t_ps: x2, value: f2 }
    })
}

/// One row of a `T_PS` profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpsScanRow {
    pub t_ps: f64,
    pub breakdown: KeyRateBreakdown,
}

/// Result of [`optimal_tps`]. `argmax` is `None` when no transmittance
/// yields a positive rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub argmax: Option<f64>,
    pub value: f64,
    pub scan: Vec<TpsScanRow>,
}

impl OptimumReport {
    pub fn require_positive(&self) -> Result<f64> {
        self.argmax
            .ok_or_else(|| Error::NoPositiveRate("key rate <= 0 for every T_PS".into()))
    }
}

/// Best `T_PS` for `party` subtracting `k` photons, all else as in `base`.
pub fn optimal_tps(base: &ProtocolConfig, k: u32, party: Party) -> Result<OptimumReport> {
    if k == 0 {
        return Err(invalid("k", "optimal T_PS needs at least one subtracted photon"));
    }
    let with_tps = |t: f64| -> Result<ProtocolConfig> {
        let mut cfg = *base;
        match party {
            Party::Alice => cfg.alice = SourceParams::new(base.alice.v(), k, t)?,
            Party::Bob => cfg.bob = SourceParams::new(base.bob.v(), k, t)?,
        }
        Ok(cfg)
    };
    let scan = tps_grid()
        .map(|t| {
            Ok(TpsScanRow {
                t_ps: t,
                breakdown: key_rate(&with_tps(t)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = maximize_tps(|t| Ok(key_rate(&with_tps(t)?)?.raw_rate))?;
    Ok(OptimumReport {
        argmax: (best.value > 0.0).then_some(best.t_ps),
        value: best.value,
        scan,
    })
}

/// Largest distance whose rate stays at or above [`KEY_RATE_FLOOR`].
pub fn max_distance(scenario: &Scenario) -> Result<f64> {
    let margin = |d: f64| -> Result<f64> { Ok(scenario.evaluate(d)?.breakdown.raw_rate - KEY_RATE_FLOOR) };
    if margin(0.0)? < 0.0 {
        return Err(Error::NoPositiveRate(format!(
            "key rate below {KEY_RATE_FLOOR:e} already at 0 km"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 25.0;
    while margin(hi)? >= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_DISTANCE_SEARCH_KM {
            return Err(Error::Domain(format!(
                "key rate still above the floor at {MAX_DISTANCE_SEARCH_KM} km"
            )));
        }
    }
    bisect(margin, lo, hi, DISTANCE_TOLERANCE_KM)
}

/// Largest excess noise (applied to both links) with a positive rate at
/// `distance_km`. With `reoptimize`, `T_PS` is re-optimized at every trial
/// noise; otherwise it stays at the optimum for the scenario's own noise.
pub fn tolerable_excess_noise(scenario: &Scenario, distance_km: f64, reoptimize: bool) -> Result<f64> {
    let base = if reoptimize {
        *scenario
    } else {
        scenario.frozen_at(distance_km)?
    };
    let rate = |eps: f64| -> Result<f64> { Ok(base.with_eps(eps).evaluate(distance_km)?.breakdown.raw_rate) };
    if rate(0.0)? <= 0.0 {
        return Err(Error::NoPositiveRate(format!(
            "no positive key rate at {distance_km} km even without excess noise"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 0.01;
    while rate(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_NOISE_SEARCH {
            return Err(Error::Domain("key rate stays positive for any excess noise".into()));
        }
    }
    // strict positivity: shift so that zero rate counts as failure
    bisect(
        |eps| Ok(if rate(eps)? > 0.0 { 1.0 } else { -1.0 }),
        lo,
        hi,
        NOISE_TOLERANCE,
    )
}

/// Bisection for the last point where `f >= 0`, given `f(lo) >= 0 > f(hi)`.
fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    if !(f(lo)? >= 0.0 && f(hi)? < 0.0) {
        return Err(Error::Domain(format!(
            "bisection bracket [{lo}, {hi}] does not straddle a root"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Independent variable of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    DistanceKm,
    ExcessNoise,
    TPs,
}

/// A one-dimensional grid over one variable; the others come from the
/// scenario (and `distance_km` when distance is not swept).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub distance_km: f64,
}

impl SweepSpec {
    pub fn distances(min: f64, max: f64, step: f64) -> Self {
        Self {
            variable: SweepVariable::DistanceKm,
            min,
            max,
            step,
            distance_km: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(invalid(
                "range",
                format!("need min <= max, got [{}, {}]", self.min, self.max),
            ));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(invalid("step", format!("must be finite and > 0, got {}", self.step)));
        }
        Ok(())
    }

    /// Grid points `min + i·step` up to `max` (inclusive, with a small slack).
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: f64,
    pub evaluation: Evaluation,
}

/// Ordered sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
}

/// Evaluates the scenario on every grid point. Points are computed in
/// parallel; rows come back in grid order.
pub fn sweep(spec: &SweepSpec, scenario: &Scenario) -> Result<SweepResult> {
    spec.validate()?;
    let rows = spec
        .points()
        .into_par_iter()
        .map(|x| {
            let evaluation = match spec.variable {
                SweepVariable::DistanceKm => scenario.evaluate(x)?,
                SweepVariable::ExcessNoise => scenario.with_eps(x).evaluate(spec.distance_km)?,
                SweepVariable::TPs => scenario.with_tps(TpsChoice::Fixed(x)).evaluate(spec.distance_km)?,
            };
            Ok(SweepRow { x, evaluation })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        variable: spec.variable,
        rows,
    })
}

/// Tolerable excess noise at each distance; `None` where no noise level
/// gives a positive key.
pub fn tolerable_noise_curve(
    scenario: &Scenario,
    distances: &[f64],
    reoptimize: bool,
) -> Result<Vec<(f64, Option<f64>)>> {
    distances
        .par_iter()
        .map(|&d| match tolerable_excess_noise(scenario, d, reoptimize) {
            Ok(eps) => Ok((d, Some(eps))),
            Err(Error::NoPositiveRate(_)) => Ok((d, None)),
            Err(e) => Err(e),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::LinkParams;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let f = |x: f64| Ok(-(x - 0.3141).powi(2));
        let opt = golden_section_max(&f, 0.0, 1.0, 1e-8).unwrap();
        assert!((opt.t_ps - 0.3141).abs() < 1e-7);
    }

    #[test]
    fn maximize_handles_two_peaks() {
        // narrow global peak away from the wide local one
        let f = |x: f64| Ok((-(x - 0.2).powi(2) * 50.0).exp() + 2.0 * (-(x - 0.8123).powi(2) * 4000.0).exp());
        let opt = maximize_tps(f).unwrap();
        assert!((opt.t_ps - 0.8123).abs() < 1e-5);
        assert!(opt.value > 1.99);
    }

    #[test]
    fn grid_excludes_unit_transmittance() {
        let grid: Vec<f64> = tps_grid().collect();
        assert_eq!(grid.len(), 199);
        assert!(grid.iter().all(|&t| t > 0.0 && t < 1.0));
    }

    #[test]
    fn sweep_points_inclusive() {
        assert_eq!(SweepSpec::distances(0.0, 0.0, 1.0).points(), vec![0.0]);
        assert_eq!(SweepSpec::distances(0.0, 3.0, 1.0).points().len(), 4);
        assert_eq!(SweepSpec::distances(0.0, 1.0, 0.1).points().len(), 11);
        assert!(SweepSpec::distances(2.0, 1.0, 1.0).validate().is_err());
        assert!(SweepSpec::distances(0.0, 1.0, 0.0).validate().is_err());
    }

    #[test]
    fn optimal_tps_is_interior() {
        let src = SourceParams::unmodified(40.0).unwrap();
        let link = LinkParams::new(50.0, 0.0, 0.2, 0.002, 0.002).unwrap();
        let cfg = ProtocolConfig::new(src, src, link, Attack::Independent, 0.95).unwrap();
        let report = optimal_tps(&cfg, 1, Party::Alice).unwrap();
        let t = report.require_positive().unwrap();
        assert!(t > 0.0 && t < 1.0);
        let best_grid = report
            .scan
            .iter()
            .map(|r| r.breakdown.raw_rate)
            .fold(f64::MIN, f64::max);
        assert!(report.value >= best_grid);
        assert!(optimal_tps(&cfg, 0, Party::Alice).is_err());
    }

    #[test]
    fn lossless_identity_tolerates_noise() {
        let scenario = Scenario::default().with_eps(0.0);
        let eps = tolerable_excess_noise(&scenario, 0.0, true).unwrap();
        assert!(eps > 0.1);
    }

    #[test]
    fn hopeless_configurations_report_no_rate() {
        let noisy = Scenario::default().with_eps(5.0);
        assert!(matches!(max_distance(&noisy), Err(Error::NoPositiveRate(_))));
        assert!(matches!(
            tolerable_excess_noise(&Scenario::default(), 500.0, true),
            Err(Error::NoPositiveRate(_))
        ));
    }

    #[test]
    fn validation_names_the_field() {
        let bad = Scenario::default().with_scheme(Scheme::AliceOnly, 0);
        assert!(matches!(bad.validate(), Err(Error::InvalidParameter { name: "k", .. })));
        let bad = Scenario {
            beta: 0.0,
            ..Scenario::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidParameter { name: "beta", .. })
        ));
        assert!(Scenario::default().validate().is_ok());
    }
}
