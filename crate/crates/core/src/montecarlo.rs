//! Monte Carlo check that post-selecting Gaussian modulation data
//! reproduces the photon-subtracted source.
//!
//! Each sample draws Alice's heterodyne pair `(x, p)` with per-quadrature
//! variance `(V+1)/2`, keeps it with probability
//! [`selection_probability`], and for kept samples draws the x-quadrature
//! of the heralded coherent state `|√T_PS·α⟩`: Gaussian with unit variance
//! and mean `√2·√T_PS·λ·x`. The moments
//!
//! ```text
//!     V_A1 = 2E[x²] - 1,   C = √2·E[x·A₄ₓ],   V_A4 = E[A₄ₓ²]
//! ```
//!
//! are compared with the closed forms.
//!
//! Samples are split into fixed-size blocks; block `i` uses ChaCha8 stream
//! `i` of the run's seed, so the result does not depend on thread count.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::TwoModeCovariance;
use crate::photon_subtraction::{
    selection_probability, subtracted_covariance, success_probability, ModulationSample, SourceParams,
};

/// Heralded coherent-state mean per unit `√T_PS·λ·x`. Fixed by requiring
/// the `k = 0, T_PS = 1` run to reproduce the TMSV covariance.
pub const COHERENT_MEAN_SCALE: f64 = std::f64::consts::SQRT_2;

pub const MIN_SAMPLES: u64 = 10_000;
pub const MAX_SAMPLES: u64 = 1_000_000_000;
pub const MIN_ACCEPTED: u64 = 100;

const BLOCK_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub src: SourceParams,
    pub n_samples: u64,
    pub seed: u64,
}

impl McConfig {
    pub fn new(src: SourceParams, n_samples: u64, seed: u64) -> Result<Self> {
        if !(MIN_SAMPLES..=MAX_SAMPLES).contains(&n_samples) {
            return Err(invalid(
                "samples",
                format!("must lie in [{MIN_SAMPLES}, {MAX_SAMPLES}], got {n_samples}"),
            ));
        }
        Ok(Self { src, n_samples, seed })
    }
}

/// Per-element standard errors of an estimated covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceStderr {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Empirical {
    pub p: f64,
    pub p_stderr: f64,
    pub accepted: u64,
    /// `a = V_A1`, `b = V_A4`, `c = C_A1A4`.
    pub cov: TwoModeCovariance,
    pub cov_stderr: CovarianceStderr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub p: f64,
    pub cov: TwoModeCovariance,
}

/// `(empirical - closed form)/stderr` for each quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScores {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ZScores {
    pub fn as_array(&self) -> [f64; 4] {
        [self.p, self.a, self.b, self.c]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0, |m, z| m.max(z.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: McConfig,
    pub empirical: Empirical,
    pub closed_form: ClosedForm,
    pub z_scores: ZScores,
    pub runtime_ms: f64,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Self {
            n,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * w,
        }
    }

    /// Standard error of the mean.
    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BlockStats {
    drawn: u64,
    x_sq: Moments,
    x_a4: Moments,
    a4_sq: Moments,
}

impl BlockStats {
    fn merge(self, other: Self) -> Self {
        Self {
            drawn: self.drawn + other.drawn,
            x_sq: self.x_sq.merge(other.x_sq),
            x_a4: self.x_a4.merge(other.x_a4),
            a4_sq: self.a4_sq.merge(other.a4_sq),
        }
    }

    fn accepted(&self) -> u64 {
        self.x_sq.n
    }
}

fn run_block(src: &SourceParams, seed: u64, block: u64, len: u64) -> BlockStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    let sigma = (0.5 * (src.v() + 1.0)).sqrt();
    let mean_per_x = COHERENT_MEAN_SCALE * (src.t_ps() * src.lambda_sq()).sqrt();
    let mut stats = BlockStats {
        drawn: len,
        ..BlockStats::default()
    };
    for _ in 0..len {
        let x = sigma * rng.sample::<f64, _>(StandardNormal);
        let p = sigma * rng.sample::<f64, _>(StandardNormal);
        let u: f64 = rng.random();
        if u >= selection_probability(src, &ModulationSample::new(x, p)) {
            continue;
        }
        let a4 = mean_per_x * x + rng.sample::<f64, _>(StandardNormal);
        stats.x_sq.push(x * x);
        stats.x_a4.push(x * a4);
        stats.a4_sq.push(a4 * a4);
    }
    stats
}

fn z_score(empirical: f64, closed: f64, stderr: f64) -> f64 {
    let diff = empirical - closed;
    if diff == 0.0 {
        0.0
    } else {
        diff / stderr
    }
}

/// Samples the prepare-and-measure post-selection and compares acceptance
/// rate and covariance with the closed forms.
pub fn run_equivalence_check(cfg: &McConfig) -> Result<McReport> {
    let start = Instant::now();
    let n_blocks = cfg.n_samples.div_ceil(BLOCK_SIZE);
    let blocks: Vec<BlockStats> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK_SIZE.min(cfg.n_samples - b * BLOCK_SIZE);
            run_block(&cfg.src, cfg.seed, b, len)
        })
        .collect();
    let stats = blocks.into_iter().fold(BlockStats::default(), BlockStats::merge);

    let accepted = stats.accepted();
    if accepted < MIN_ACCEPTED {
        return Err(Error::InsufficientAcceptance { accepted });
    }
    let n = stats.drawn as f64;
    let p = accepted as f64 / n;
    // Agresti-Coull style shrinkage keeps the error positive when p̂ ∈ {0, 1}.
    let p_tilde = (accepted as f64 + 1.0) / (n + 2.0);
    let p_stderr = (p_tilde * (1.0 - p_tilde) / n).sqrt();

    let sqrt2 = std::f64::consts::SQRT_2;
    let cov = TwoModeCovariance {
        a: 2.0 * stats.x_sq.mean - 1.0,
        b: stats.a4_sq.mean,
        c: sqrt2 * stats.x_a4.mean,
    };
    let cov_stderr = CovarianceStderr {
        a: 2.0 * stats.x_sq.stderr(),
        b: stats.a4_sq.stderr(),
        c: sqrt2 * stats.x_a4.stderr(),
    };

    let closed = ClosedForm {
        p: success_probability(&cfg.src),
        cov: subtracted_covariance(&cfg.src)?,
    };
    let z_scores = ZScores {
        p: z_score(p, closed.p, p_stderr),
        a: z_score(cov.a, closed.cov.a, cov_stderr.a),
        b: z_score(cov.b, closed.cov.b, cov_stderr.b),
        c: z_score(cov.c, closed.cov.c, cov_stderr.c),
    };

    Ok(McReport {
        config: *cfg,
        empirical: Empirical {
            p,
            p_stderr,
            accepted,
            cov,
            cov_stderr,
        },
        closed_form: closed,
        z_scores,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
