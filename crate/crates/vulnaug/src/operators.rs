//! Representation-level augmentation operators.
//!
//! Every operator produces `h+ = alpha (.) h + beta (.) h'` for some pair
//! of coefficient fields and partner choice, elementwise over the full
//! `L x d` block:
//!
//! - linear interpolation:  alpha ~ U(a_lo, a_hi) with a_hi <= 1, beta = 1 - alpha
//! - linear extrapolation:  alpha ~ U(a_lo, a_hi) with a_lo >= 1, beta = 1 - alpha
//! - stochastic perturbation: dropout with keep-scaling, h' = 0,
//!   alpha in {0, 1/(1-p)}
//! - binary interpolation:  alpha ~ Bernoulli in {0, 1}, beta = 1 - alpha
//! - gaussian scaling:      h+ = beta (.) h with beta ~ N(1, sigma)
//!
//! Gaussian scaling has two readings. Taken literally, the source
//! formulation (`h = h'`, `alpha = 1`, `beta ~ N(1, sigma)`) expands to
//! `h+ = (1 + beta) (.) h`, which doubles the representation on average and
//! contradicts the "scaling coefficients" intent. The default here is pure
//! scaling `h+ = beta (.) h`; set [`AugmentConfig::gs_literal`] to get the
//! literal `(1 + beta)` form for comparison.
//!
//! Coefficients come from a counter generator keyed by
//! `(seed, output sample id, element index)`, so a generated sample's bytes
//! depend only on its inputs and id, never on batch order or thread count.
//! Arithmetic runs in f64 and rounds to f32 per element, before any
//! conditioned restore and before writing.
//!
//! Operators act on padding rows too: under the partnered methods, partner
//! values can leak into rows past the token count. Conditioned mode is
//! unaffected because flaw spans never reach padding.

use crate::error::{Error, Result};
use crate::rng::{domain, CounterRng};
use crate::sample::{AugmentMethod, Embedding, EmbeddingSample, FlawSpan, Label, Provenance};

/// Operator selection and distribution parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AugmentConfig {
    pub method: AugmentMethod,
    /// Lower bound of the uniform alpha distribution (LI/LE).
    pub a_lo: f64,
    /// Upper bound of the uniform alpha distribution (LI/LE).
    pub a_hi: f64,
    /// Drop probability for stochastic perturbation.
    pub p: f64,
    /// Per-cell swap probability for binary interpolation.
    pub swap_fraction: f64,
    /// Standard deviation of the gaussian scaling coefficients.
    pub sigma: f64,
    /// Restore flaw-span rows from the source sample after augmenting.
    pub conditioned: bool,
    /// Root seed for all coefficient draws.
    pub seed: u64,
    /// Draw one alpha per sample instead of one per element (LI/LE).
    pub scalar_alpha: bool,
    /// Use the literal `(1 + beta)` gaussian scaling reading.
    pub gs_literal: bool,
}

pub const DEFAULT_LI_ALPHA: (f64, f64) = (0.9, 1.0);
pub const DEFAULT_LE_ALPHA: (f64, f64) = (1.0, 1.1);
pub const DEFAULT_DROP_P: f64 = 0.1;
pub const DEFAULT_SWAP_FRACTION: f64 = 0.25;
pub const DEFAULT_SIGMA: f64 = 0.1;

impl AugmentConfig {
    /// Config with the per-method default parameters.
    pub fn for_method(method: AugmentMethod, seed: u64) -> Self {
        let (a_lo, a_hi) = match method {
            AugmentMethod::LinearExtrapolation => DEFAULT_LE_ALPHA,
            _ => DEFAULT_LI_ALPHA,
        };
        AugmentConfig {
            method,
            a_lo,
            a_hi,
            p: DEFAULT_DROP_P,
            swap_fraction: DEFAULT_SWAP_FRACTION,
            sigma: DEFAULT_SIGMA,
            conditioned: false,
            seed,
            scalar_alpha: false,
            gs_literal: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::Config(format!("p must be in [0, 1), got {}", self.p)));
        }
        if !(0.0..=1.0).contains(&self.swap_fraction) {
            return Err(Error::Config(format!(
                "swap fraction must be in [0, 1], got {}",
                self.swap_fraction
            )));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Config(format!("sigma must be > 0, got {}", self.sigma)));
        }
        match self.method {
            AugmentMethod::LinearInterpolation => validate_alpha_interpolation(self.a_lo, self.a_hi),
            AugmentMethod::LinearExtrapolation => validate_alpha_extrapolation(self.a_lo, self.a_hi),
            _ => Ok(()),
        }
    }
}

fn validate_alpha_bounds(a_lo: f64, a_hi: f64) -> Result<()> {
    if !a_lo.is_finite() || !a_hi.is_finite() || a_lo >= a_hi {
        return Err(Error::Config(format!(
            "alpha bounds must satisfy a_lo < a_hi, got [{a_lo}, {a_hi}]"
        )));
    }
    Ok(())
}

fn validate_alpha_interpolation(a_lo: f64, a_hi: f64) -> Result<()> {
    validate_alpha_bounds(a_lo, a_hi)?;
    if a_lo < 0.0 || a_hi > 1.0 {
        return Err(Error::Config(format!(
            "interpolation needs 0 <= a_lo < a_hi <= 1, got [{a_lo}, {a_hi}]"
        )));
    }
    Ok(())
}

fn validate_alpha_extrapolation(a_lo: f64, a_hi: f64) -> Result<()> {
    validate_alpha_bounds(a_lo, a_hi)?;
    if a_lo < 1.0 {
        return Err(Error::Config(format!(
            "extrapolation needs a_lo >= 1, got [{a_lo}, {a_hi}]"
        )));
    }
    Ok(())
}

fn require_same_shape(h: &Embedding, other: &Embedding) -> Result<()> {
    if !h.same_shape(other) {
        return Err(Error::Input(format!(
            "shape mismatch: {}x{} vs {}x{}",
            h.rows(),
            h.cols(),
            other.rows(),
            other.cols()
        )));
    }
    Ok(())
}

/// The coefficient stream for one generated sample.
fn coeff_rng(cfg: &AugmentConfig, output_id: u64) -> CounterRng {
    CounterRng::new(cfg.seed, domain::COEFF, output_id)
}

/// `h+ = alpha (.) h + (1 - alpha) (.) h'`, f64 arithmetic rounded to f32.
pub(crate) fn blend(h: &Embedding, partner: &Embedding, mut alpha_at: impl FnMut(u64) -> f64) -> Embedding {
    let mut out = Embedding::zeros(h.rows(), h.cols());
    let hs = h.as_slice();
    let ps = partner.as_slice();
    for i in 0..hs.len() {
        let a = alpha_at(i as u64);
        let v = a * hs[i] as f64 + (1.0 - a) * ps[i] as f64;
        out.set(i / h.cols(), i % h.cols(), v as f32);
    }
    out
}

fn uniform_blend(
    h: &Embedding,
    partner: &Embedding,
    cfg: &AugmentConfig,
    output_id: u64,
) -> Embedding {
    let rng = coeff_rng(cfg, output_id);
    if cfg.scalar_alpha {
        let a = rng.uniform_in_at(0, cfg.a_lo, cfg.a_hi);
        blend(h, partner, |_| a)
    } else {
        blend(h, partner, |i| rng.uniform_in_at(i, cfg.a_lo, cfg.a_hi))
    }
}

/// Convex elementwise mix toward a partner sample, alpha ~ U(a_lo, a_hi)
/// with the interval inside [0, 1].
pub fn linear_interpolation(
    h: &Embedding,
    partner: &Embedding,
    cfg: &AugmentConfig,
    output_id: u64,
) -> Result<Embedding> {
    validate_alpha_interpolation(cfg.a_lo, cfg.a_hi)?;
    require_same_shape(h, partner)?;
    Ok(uniform_blend(h, partner, cfg, output_id))
}

/// Elementwise mix away from a partner sample, alpha ~ U(a_lo, a_hi) with
/// a_lo >= 1, so the result lands on the far side of `h`.
pub fn linear_extrapolation(
    h: &Embedding,
    partner: &Embedding,
    cfg: &AugmentConfig,
    output_id: u64,
) -> Result<Embedding> {
    validate_alpha_extrapolation(cfg.a_lo, cfg.a_hi)?;
    require_same_shape(h, partner)?;
    Ok(uniform_blend(h, partner, cfg, output_id))
}

/// Dropout-style perturbation: each element is zeroed with probability `p`
/// and scaled by `1/(1-p)` otherwise.
pub fn stochastic_perturbation(
    h: &Embedding,
    cfg: &AugmentConfig,
    output_id: u64,
) -> Result<Embedding> {
    if !(0.0..1.0).contains(&cfg.p) {
        return Err(Error::Config(format!("p must be in [0, 1), got {}", cfg.p)));
    }
    let rng = coeff_rng(cfg, output_id);
    let scale = 1.0 / (1.0 - cfg.p);
    let mut out = Embedding::zeros(h.rows(), h.cols());
    let hs = h.as_slice();
    for i in 0..hs.len() {
        let v = if rng.bernoulli_at(i as u64, cfg.p) {
            0.0f32
        } else {
            (hs[i] as f64 * scale) as f32
        };
        out.set(i / h.cols(), i % h.cols(), v);
    }
    Ok(out)
}

/// Exchanges a random subset of cells with the partner's values.
pub fn binary_interpolation(
    h: &Embedding,
    partner: &Embedding,
    cfg: &AugmentConfig,
    output_id: u64,
) -> Result<Embedding> {
    if !(0.0..=1.0).contains(&cfg.swap_fraction) {
        return Err(Error::Config(format!(
            "swap fraction must be in [0, 1], got {}",
            cfg.swap_fraction
        )));
    }
    require_same_shape(h, partner)?;
    let rng = coeff_rng(cfg, output_id);
    let mut out = Embedding::zeros(h.rows(), h.cols());
    let hs = h.as_slice();
    let ps = partner.as_slice();
    for i in 0..hs.len() {
        let v = if rng.bernoulli_at(i as u64, cfg.swap_fraction) {
            ps[i]
        } else {
            hs[i]
        };
        out.set(i / h.cols(), i % h.cols(), v);
    }
    Ok(out)
}

/// Per-feature scaling by beta ~ N(1, sigma); `gs_literal` switches to the
/// `(1 + beta)` reading.
pub fn gaussian_scaling(h: &Embedding, cfg: &AugmentConfig, output_id: u64) -> Result<Embedding> {
    if cfg.sigma <= 0.0 {
        return Err(Error::Config(format!("sigma must be > 0, got {}", cfg.sigma)));
    }
    let rng = coeff_rng(cfg, output_id);
    let mut out = Embedding::zeros(h.rows(), h.cols());
    let hs = h.as_slice();
    for i in 0..hs.len() {
        let beta = rng.normal_at(i as u64, 1.0, cfg.sigma);
        let factor = if cfg.gs_literal { 1.0 + beta } else { beta };
        out.set(i / h.cols(), i % h.cols(), (factor * hs[i] as f64) as f32);
    }
    Ok(out)
}

/// Copies the flaw-span rows of `h_orig` into `h_aug`, bit-exactly.
pub fn conditioned_restore(
    h_aug: &Embedding,
    h_orig: &Embedding,
    spans: &[FlawSpan],
) -> Result<Embedding> {
    require_same_shape(h_aug, h_orig)?;
    let mut out = h_aug.clone();
    for span in spans {
        if span.end > h_aug.rows() {
            return Err(Error::Input(format!(
                "flaw span [{}, {}) exceeds {} rows",
                span.start,
                span.end,
                h_aug.rows()
            )));
        }
        for row in span.start..span.end {
            out.row_mut(row).copy_from_slice(h_orig.row(row));
        }
    }
    Ok(out)
}

/// Applies `cfg.method` to a parent sample and assembles the generated
/// sample: augmented embedding, parent's token ids and flaw spans, label
/// vulnerable, provenance recording method and parent id(s).
pub fn augment_sample(
    parent: &EmbeddingSample,
    partner: Option<&EmbeddingSample>,
    cfg: &AugmentConfig,
    output_id: u64,
) -> Result<EmbeddingSample> {
    let mut parents = vec![parent.id];
    let augmented = match cfg.method {
        AugmentMethod::RandomOversampling => {
            return Err(Error::Config(
                "random oversampling copies samples; it is not an operator".to_string(),
            ))
        }
        AugmentMethod::StochasticPerturbation => stochastic_perturbation(&parent.embedding, cfg, output_id)?,
        AugmentMethod::GaussianScaling => gaussian_scaling(&parent.embedding, cfg, output_id)?,
        method => {
            let partner = partner.ok_or_else(|| {
                Error::Input(format!("method {} requires a partner sample", method.code()))
            })?;
            if partner.id == parent.id {
                return Err(Error::Input(format!(
                    "partner must be a different sample, got id {} twice",
                    parent.id
                )));
            }
            parents.push(partner.id);
            match method {
                AugmentMethod::LinearInterpolation => {
                    linear_interpolation(&parent.embedding, &partner.embedding, cfg, output_id)?
                }
                AugmentMethod::LinearExtrapolation => {
                    linear_extrapolation(&parent.embedding, &partner.embedding, cfg, output_id)?
                }
                AugmentMethod::BinaryInterpolation => {
                    binary_interpolation(&parent.embedding, &partner.embedding, cfg, output_id)?
                }
                _ => unreachable!(),
            }
        }
    };
    let embedding = if cfg.conditioned {
        conditioned_restore(&augmented, &parent.embedding, &parent.flaw_spans)?
    } else {
        augmented
    };
    EmbeddingSample::new(
        output_id,
        parent.token_ids.clone(),
        embedding,
        Label::Vulnerable,
        parent.flaw_spans.clone(),
        Provenance::Augmented {
            method: cfg.method,
            parents,
        },
    )
}
