//! Continued fractions `α = [a_1, a_2, …] = 1/(a_1 + 1/(a_2 + …))`.

use crate::error::{Error, Result};
use crate::num::{BigReal, Rational};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Partial quotients with convergents; index 0 of `p`, `q` holds `0/1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CFExpansion {
    pub quotients: Vec<BigInt>,
    pub p: Vec<BigInt>,
    pub q: Vec<BigInt>,
    /// True when the expansion of a rational ended before the requested length.
    pub terminated: bool,
}

impl CFExpansion {
    pub fn from_quotients(quotients: Vec<BigInt>, terminated: bool) -> Self {
        let (mut p, mut q) = (vec![BigInt::zero()], vec![BigInt::one()]);
        let (mut p2, mut q2) = (BigInt::one(), BigInt::zero());
        for a in &quotients {
            let pk = a * p.last().unwrap() + &p2;
            let qk = a * q.last().unwrap() + &q2;
            p2 = p.last().unwrap().clone();
            q2 = q.last().unwrap().clone();
            p.push(pk);
            q.push(qk);
        }
        CFExpansion { quotients, p, q, terminated }
    }

    pub fn len(&self) -> usize {
        self.quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotients.is_empty()
    }

    pub fn convergent(&self, k: usize) -> Rational {
        Rational::new(self.p[k].clone(), self.q[k].clone())
    }
}

fn check_unit(ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::OutOfRange("continued fractions need 0 < α < 1".into()))
    }
}

/// Up to `n` partial quotients of a rational in `(0,1)`; terminates exactly.
pub fn continued_fraction_rational(alpha: &Rational, n: usize) -> Result<CFExpansion> {
    check_unit(alpha.is_positive() && alpha < &Rational::one())?;
    let (mut num, mut den) = (alpha.numer().clone(), alpha.denom().clone());
    let mut out = Vec::new();
    while out.len() < n && !num.is_zero() {
        out.push(&den / &num);
        let r = &den % &num;
        den = num;
        num = r;
    }
    Ok(CFExpansion::from_quotients(out, num.is_zero()))
}

/// Quotients shared by every real in `[α - r, α + r]` with `r = 2^{-(p-4)}`,
/// capped at `n`.
pub fn trusted_prefix(alpha: &BigReal, n: usize) -> Result<CFExpansion> {
    let p = alpha.precision();
    let r = BigReal::pow2(-((p - 4) as i64), p).to_rational();
    let a = alpha.to_rational();
    let lo = &a - &r;
    let hi = &a + &r;
    check_unit(lo.is_positive() && hi < Rational::one())?;
    let cl = continued_fraction_rational(&lo, n + 1)?;
    let ch = continued_fraction_rational(&hi, n + 1)?;
    let usable = |c: &CFExpansion| if c.terminated { c.len().saturating_sub(1) } else { c.len() };
    let m = usable(&cl).min(usable(&ch));
    let k = (0..m).take_while(|&i| cl.quotients[i] == ch.quotients[i]).count().min(n);
    Ok(CFExpansion::from_quotients(cl.quotients[..k].to_vec(), false))
}

/// `n` partial quotients of a high-precision real; errors with the trusted
/// prefix if precision runs out first.
pub fn continued_fraction_real(alpha: &BigReal, n: usize) -> Result<CFExpansion> {
    let cf = trusted_prefix(alpha, n)?;
    if cf.len() < n {
        let prefix: Vec<String> = cf.quotients.iter().map(|a| a.to_string()).collect();
        return Err(Error::PrecisionExhausted(format!(
            "only {} quotients trusted at {} bits: [{}]",
            cf.len(),
            alpha.precision(),
            prefix.join(", ")
        )));
    }
    Ok(cf)
}

/// `(√5 − 1)/2` at precision `p`.
pub fn golden(p: usize) -> BigReal {
    let five = BigReal::from_i64(5, p + 32).sqrt();
    ((&five - &BigReal::one(p + 32)) / BigReal::from_i64(2, p + 32)).with_precision(p)
}
