use super::cosine;
use crate::error::{Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoNce {
    pub value: f64,
    /// Set when there were no negatives and the loss is trivially zero.
    pub degenerate: bool,
}

/// −log softmax of the positive score among all scores divided by `tau`,
/// evaluated as a log-sum-exp shifted by the largest logit.
pub fn infonce_from_scores(positive: f64, negatives: &[f64], tau: f64) -> Result<InfoNce> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Parameter(format!("temperature must be positive, got {tau}")));
    }
    if !positive.is_finite() || negatives.iter().any(|s| !s.is_finite()) {
        return Err(Error::Validation("non-finite similarity score".into()));
    }
    if negatives.is_empty() {
        log::warn!("InfoNCE with no negatives is identically zero");
        return Ok(InfoNce {
            value: 0.0,
            degenerate: true,
        });
    }
    let xp = positive / tau;
    let xs: Vec<f64> = negatives.iter().map(|s| s / tau).collect();
    let (arg, m) = xs
        .iter()
        .copied()
        .enumerate()
        .fold((None, xp), |(a, m), (i, x)| if x > m { (Some(i), x) } else { (a, m) });
    // log Σ exp(x) = m + ln(1 + Σ_{others} exp(x - m))
    let mut rest: f64 = xs
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != arg)
        .map(|(_, x)| (x - m).exp())
        .sum();
    if arg.is_some() {
        rest += (xp - m).exp();
    }
    let value = (m - xp) + rest.ln_1p();
    Ok(InfoNce {
        value: value.max(0.0),
        degenerate: false,
    })
}

/// InfoNCE over cosine similarities of raw vectors.
pub fn infonce_loss(q: &[f32], positive: &[f32], negatives: &[&[f32]], tau: f64) -> Result<InfoNce> {
    let sp = cosine(q, positive)?;
    let sn = negatives
        .iter()
        .map(|n| cosine(q, n))
        .collect::<Result<Vec<_>>>()?;
    infonce_from_scores(sp, &sn, tau)
}
