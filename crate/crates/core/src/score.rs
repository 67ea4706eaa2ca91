//! Dirichlet-multinomial scoring.
//!
//! The score of a stage with prior `a` and counts `y` is
//! `lnΓ(Σa) − lnΓ(Σa + Σy) + Σ_j [lnΓ(a_j + y_j) − lnΓ(a_j)]`, the log
//! probability of the counts (in any fixed order) with the stage's
//! probabilities integrated out. A staged tree's score is the sum over its
//! stages.

use crate::error::{Error, Result};

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

fn check_prior(prior: &[f64]) -> Result<()> {
    if let Some(bad) = prior.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::Domain(format!(
            "Dirichlet parameters must be positive and finite, got {bad}"
        )));
    }
    Ok(())
}

/// Log marginal likelihood of one stage.
pub fn log_marginal_stage(prior: &[f64], data: &[u64]) -> Result<f64> {
    if prior.len() != data.len() {
        return Err(Error::validation(format!(
            "prior has {} entries but data has {}",
            prior.len(),
            data.len()
        )));
    }
    if prior.is_empty() {
        return Err(Error::validation("a stage needs at least one outgoing edge"));
    }
    check_prior(prior)?;
    Ok(log_marginal_unchecked(prior, data))
}

pub(crate) fn log_marginal_unchecked(prior: &[f64], data: &[u64]) -> f64 {
    let total_prior: f64 = prior.iter().sum();
    let total_data: f64 = data.iter().map(|&y| y as f64).sum();
    let edges: f64 = prior
        .iter()
        .zip(data)
        .filter(|(_, &y)| y > 0)
        .map(|(&a, &y)| ln_gamma(a + y as f64) - ln_gamma(a))
        .sum();
    if total_data == 0.0 {
        return 0.0;
    }
    ln_gamma(total_prior) - ln_gamma(total_prior + total_data) + edges
}

/// Change in total score from pooling two stages into one whose prior and
/// counts are the elementwise sums of theirs.
pub fn merge_log_bayes_factor(
    prior_a: &[f64],
    data_a: &[u64],
    prior_b: &[f64],
    data_b: &[u64],
) -> Result<f64> {
    if prior_a.len() != prior_b.len() {
        return Err(Error::validation(format!(
            "cannot pool stages with {} and {} outgoing edges",
            prior_a.len(),
            prior_b.len()
        )));
    }
    let la = log_marginal_stage(prior_a, data_a)?;
    let lb = log_marginal_stage(prior_b, data_b)?;
    let prior: Vec<f64> = prior_a.iter().zip(prior_b).map(|(a, b)| a + b).collect();
    let data: Vec<u64> = data_a.iter().zip(data_b).map(|(a, b)| a + b).collect();
    Ok(log_marginal_unchecked(&prior, &data) - la - lb)
}

/// Mean and per-entry variance of a Dirichlet distribution.
pub fn dirichlet_moments(alpha: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_prior(alpha)?;
    let total: f64 = alpha.iter().sum();
    let mean = alpha.iter().map(|a| a / total).collect();
    let var = alpha
        .iter()
        .map(|a| a * (total - a) / (total * total * (total + 1.0)))
        .collect();
    Ok((mean, var))
}
