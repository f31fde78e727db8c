//! Logarithmic terms that recur across the capacity formulas.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("H^2 ln n = {0} must exceed e for ln ln(H^2 ln n) to be positive")]
    IteratedLog(f64),
    #[error("n = {0} must be at least 3")]
    TooSmall(f64),
    #[error("{name} = {value} is out of range")]
    Parameter { name: &'static str, value: f64 },
}

/// `ln n`, `ln(H² ln n)` and `ln ln(H² ln n)` for one `(n, H)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogTerms {
    pub ln_n: f64,
    pub ln_h2: f64,
    pub ln_ln_h2: f64,
}

impl LogTerms {
    /// Fails when `H² ln n <= e`, where the iterated log is not positive.
    pub fn new(n: f64, h: f64) -> Result<LogTerms, DomainError> {
        if !(n > 1.0) {
            return Err(DomainError::TooSmall(n));
        }
        if !(h >= 1.0) {
            return Err(DomainError::Parameter { name: "H", value: h });
        }
        let ln_n = n.ln();
        let inner = h * h * ln_n;
        if !(inner > std::f64::consts::E) {
            return Err(DomainError::IteratedLog(inner));
        }
        let ln_h2 = inner.ln();
        Ok(LogTerms { ln_n, ln_h2, ln_ln_h2: ln_h2.ln() })
    }

    /// `ln ln(H² ln n) / ln(H² ln n)`.
    pub fn destination_ratio(&self) -> f64 {
        self.ln_ln_h2 / self.ln_h2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_is_rejected() {
        assert!(matches!(LogTerms::new(3.0, 1.0), Err(DomainError::IteratedLog(_))));
        assert!(LogTerms::new(16.0, 1.0).is_ok());
        assert!(LogTerms::new(1.0, 1.0).is_err());
    }

    #[test]
    fn values() {
        let t = LogTerms::new(1e6, 10.0).unwrap();
        assert!((t.ln_h2 - 7.2309).abs() < 1e-4);
        assert!((t.ln_ln_h2 - 1.97837).abs() < 1e-4);
    }
}
