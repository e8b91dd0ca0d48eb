use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::VerifyError;

/// How the Gaussian variance is formed from `σ_e` and `C`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceConvention {
    /// `v = σ_e + C`, exactly as the bound is stated.
    #[default]
    Verbatim,
    /// `v = σ_e² + C²`.
    Squared,
}

/// `δ = 1 - erf((σ - ε) / sqrt(2v))`: the mass of a centered Gaussian with
/// variance `v` outside `[-(σ-ε), σ-ε]`.
pub fn confidence_bound(
    sigma: f64,
    epsilon: f64,
    sigma_e: f64,
    c: f64,
    convention: VarianceConvention,
) -> Result<f64, VerifyError> {
    if !(epsilon >= 0.0 && sigma >= epsilon) {
        return Err(VerifyError::Precondition(format!("need sigma >= epsilon >= 0, got {sigma}, {epsilon}")));
    }
    let v = match convention {
        VarianceConvention::Verbatim => sigma_e + c,
        VarianceConvention::Squared => sigma_e * sigma_e + c * c,
    };
    if !(v > 0.0) || !v.is_finite() {
        return Err(VerifyError::Precondition(format!("variance term {v} must be positive")));
    }
    let w = sigma - epsilon;
    if w.is_infinite() {
        return Ok(0.0);
    }
    Ok(1.0 - erf(w / (2.0 * v).sqrt()))
}
