use crate::error::{Error, Result};

fn check(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.is_empty() || y.len() != y_hat.len() {
        return Err(Error::arg(format!(
            "metric inputs must be non-empty and equal length (got {} and {})",
            y.len(),
            y_hat.len()
        )));
    }
    Ok(())
}

/// Root mean squared error, in the units of `y`.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    let ss: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

/// Root mean squared percentage error, in percent.
pub fn rmspe(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    if let Some(i) = y.iter().position(|v| *v == 0.0) {
        return Err(Error::arg(format!("rmspe undefined: target {i} is zero")));
    }
    let ss: f64 = y.iter().zip(y_hat).map(|(a, b)| ((a - b) / a).powi(2)).sum();
    Ok(100.0 * (ss / y.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_examples() {
        assert_eq!(rmse(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(rmspe(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 1.0], &[1.1, 0.9]).unwrap() - 0.1).abs() < 1e-15);
        assert!((rmspe(&[1.0, 1.0], &[1.1, 0.9]).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmspe(&[1.0, 0.0], &[1.0, 0.1]).is_err());
    }
}
