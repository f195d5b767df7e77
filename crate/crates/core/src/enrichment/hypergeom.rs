//! Upper-tail hypergeometric probabilities, computed in log space.

use crate::error::{AuditError, Result};
use crate::special::ln_choose;

fn check_contingency(k: u64, n_total: u64, k_total: u64, n_drawn: u64) -> Result<(u64, u64)> {
    let err = || AuditError::InvalidContingency {
        k,
        n_total,
        k_total,
        n_drawn,
    };
    if k_total > n_total || n_drawn > n_total {
        return Err(err());
    }
    let lower = (n_drawn + k_total).saturating_sub(n_total);
    let upper = k_total.min(n_drawn);
    if k < lower || k > upper {
        return Err(err());
    }
    Ok((lower, upper))
}

/// P(X >= k) for X hypergeometric: `n_drawn` draws without replacement from
/// `n_total` genes of which `k_total` are annotated.
pub fn hypergeom_tail(k: u64, n_total: u64, k_total: u64, n_drawn: u64) -> Result<f64> {
    let (lower, upper) = check_contingency(k, n_total, k_total, n_drawn)?;
    if k == lower {
        return Ok(1.0);
    }
    let ln_denom = ln_choose(n_total, n_drawn);
    let mut tail = 0.0;
    for x in k..=upper {
        let ln_term =
            ln_choose(k_total, x) + ln_choose(n_total - k_total, n_drawn - x) - ln_denom;
        tail += ln_term.exp();
    }
    Ok(tail.min(1.0))
}
