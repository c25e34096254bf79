//! Conditional Value-at-Risk of Gaussian costs.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{CoreError, Result};

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CoreError::Domain(format!("risk level {alpha} outside (0, 1)")))
    }
}

/// `φ(Φ⁻¹(α)) / (1 − α)`, the number of standard deviations CVaR adds to the mean.
pub fn tail_factor(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let n = Normal::standard();
    Ok(n.pdf(n.inverse_cdf(alpha)) / (1.0 - alpha))
}

/// CVaR at level `alpha` of a `N(mu, sigma²)` cost.
pub fn cvar_gaussian(mu: f64, sigma: f64, alpha: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(CoreError::Domain(format!("negative standard deviation {sigma}")));
    }
    if sigma == 0.0 {
        check_alpha(alpha)?;
        return Ok(mu);
    }
    Ok(mu + sigma * tail_factor(alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_is_the_mean() {
        assert_eq!(cvar_gaussian(1.0, 0.0, 0.9).unwrap(), 1.0);
    }

    #[test]
    fn standard_normal_at_95() {
        assert!((cvar_gaussian(0.0, 1.0, 0.95).unwrap() - 2.06271).abs() < 5e-6);
    }

    #[test]
    fn small_alpha_tends_to_mean() {
        assert!(cvar_gaussian(0.0, 1.0, 1e-9).unwrap().abs() < 1e-7);
    }

    #[test]
    fn domain_errors() {
        assert!(cvar_gaussian(0.0, 1.0, 1.0).is_err());
        assert!(cvar_gaussian(0.0, 1.0, 0.0).is_err());
        assert!(cvar_gaussian(0.0, -0.1, 0.5).is_err());
        assert!(cvar_gaussian(0.0, f64::NAN, 0.5).is_err());
    }
}
