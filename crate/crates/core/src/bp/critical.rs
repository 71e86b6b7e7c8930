use crate::error::{Error, Result};

fn check(q: usize, c: f64) -> Result<()> {
    if q == 0 || !c.is_finite() || c <= 0.0 {
        return Err(Error::Domain(format!("q = {q}, c = {c}")));
    }
    Ok(())
}

/// Temperature at which the uniform fixed point loses stability:
/// `ln(q / (sqrt(c) - 1) + 1)`. Requires `c > 1`.
pub fn beta_star(q: usize, c: f64) -> Result<f64> {
    check(q, c)?;
    if c <= 1.0 {
        return Err(Error::Domain(format!("beta* needs c > 1, got c = {c}")));
    }
    Ok((q as f64 / (c.sqrt() - 1.0)).ln_1p())
}

/// Temperature at which the spin-glass phase appears: `ln(q / (c - 1) + 1)`.
/// Requires `c > 1`.
pub fn beta_zero(q: usize, c: f64) -> Result<f64> {
    check(q, c)?;
    if c <= 1.0 {
        return Err(Error::Domain(format!("beta_0 needs c > 1, got c = {c}")));
    }
    Ok((q as f64 / (c - 1.0)).ln_1p())
}

/// Starting temperature for EM: midway between `beta_0` and `beta*`,
/// or `ln(q + 1)` on graphs with `c <= 1`.
pub fn initial_beta(q: usize, c: f64) -> f64 {
    match (beta_zero(q, c), beta_star(q, c)) {
        (Ok(b0), Ok(bs)) => 0.5 * (b0 + bs),
        _ => (q as f64).ln_1p(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let q = 4;
        let c = 9.0;
        assert!((beta_star(q, c).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!((beta_zero(q, c).unwrap() - 1.5f64.ln()).abs() < 1e-15);
        assert!(beta_star(q, c).unwrap() > beta_zero(q, c).unwrap());
    }

    #[test]
    fn domain_errors() {
        assert!(beta_star(2, 1.0).is_err());
        assert!(beta_zero(2, 0.5).is_err());
        assert!(beta_star(0, 4.0).is_err());
        assert!((initial_beta(2, 0.5) - 3f64.ln()).abs() < 1e-15);
    }
}
