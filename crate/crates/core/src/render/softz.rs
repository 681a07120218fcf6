use crate::error::{Error, Result};

/// Soft z-buffer parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftZConfig {
    /// Sharpness multiplier on inverse depth (1/m).
    pub tau: f64,
    /// Floor for weight sums.
    pub epsilon: f64,
}

pub const DEFAULT_TAU: f64 = 50.0;
pub const DEFAULT_EPSILON: f64 = 1e-12;

impl Default for SoftZConfig {
    fn default() -> Self {
        SoftZConfig {
            tau: DEFAULT_TAU,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl SoftZConfig {
    pub fn new(tau: f64, epsilon: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) || !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "soft z-buffer needs tau > 0 and epsilon > 0, got tau={tau} epsilon={epsilon}"
            )));
        }
        Ok(SoftZConfig { tau, epsilon })
    }
}

/// One candidate sample at a target pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contribution {
    pub color: [f64; 3],
    pub alpha: f64,
    pub inv_depth: f64,
    /// Splat weight, multiplies the exponential term.
    pub weight: f64,
}

/// Weighted softmax over inverse depth:
/// `C̄ = Σ w C e^{(d - d_max)τ} / max(Σ w e^{(d - d_max)τ}, ε)`, likewise for α.
///
/// `d_max` is taken over positive-weight contributions. Empty (or all-zero
/// weight) input resolves to zero color and opacity.
pub fn soft_z_resolve(contributions: &[Contribution], cfg: &SoftZConfig) -> ([f64; 3], f64) {
    let d_max = contributions
        .iter()
        .filter(|c| c.weight > 0.0)
        .map(|c| c.inv_depth)
        .fold(f64::NEG_INFINITY, f64::max);
    if d_max == f64::NEG_INFINITY {
        return ([0.0; 3], 0.0);
    }
    let mut sw = 0.0;
    let mut sc = [0.0; 3];
    let mut sa = 0.0;
    for c in contributions.iter().filter(|c| c.weight > 0.0) {
        let we = c.weight * ((c.inv_depth - d_max) * cfg.tau).exp();
        sw += we;
        for k in 0..3 {
            sc[k] += we * c.color[k];
        }
        sa += we * c.alpha;
    }
    let den = sw.max(cfg.epsilon);
    ([sc[0] / den, sc[1] / den, sc[2] / den], sa / den)
}
