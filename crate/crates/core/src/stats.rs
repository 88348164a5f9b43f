//! Exact rational arithmetic and interval helpers shared by the experiment
//! drivers.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = Ratio<BigInt>;

pub fn rat(num: i64, den: i64) -> Rat {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parse "a/b", "a", or a decimal like "0.125" into an exact rational.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let num: i64 = a.trim().parse().map_err(|_| bad(s))?;
        let den: i64 = b.trim().parse().map_err(|_| bad(s))?;
        if den == 0 {
            return Err(bad(s));
        }
        return Ok(rat(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let int_part: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad(s))? };
        let digits = frac.len() as u32;
        let frac_part: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad(s))? };
        let den = 10i64.checked_pow(digits).ok_or_else(|| bad(s))?;
        let sign = if s.starts_with('-') { -1 } else { 1 };
        return Ok(rat(int_part * den + sign * frac_part, den));
    }
    let num: i64 = s.parse().map_err(|_| bad(s))?;
    Ok(rat(num, 1))
}

fn bad(s: &str) -> Error {
    Error::Parse(format!("bad rational {s:?}"))
}

pub fn rat_pow(r: &Rat, e: u32) -> Rat {
    let mut out = Rat::one();
    for _ in 0..e {
        out *= r;
    }
    out
}

pub fn rat_in_unit(r: &Rat) -> bool {
    !r.is_negative() && *r <= Rat::one()
}

/// Wilson 95% score interval for x successes out of n.
pub fn wilson_ci(x: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let nf = n as f64;
    let phat = x as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (phat + z2 / (2.0 * nf)) / denom;
    let half = (z / denom) * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Sample standard deviation of a Bernoulli mean estimate.
pub fn bernoulli_sigma(x: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let p = x as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rat("1/12").unwrap(), rat(1, 12));
        assert_eq!(parse_rat("0.125").unwrap(), rat(1, 8));
        assert_eq!(parse_rat("3").unwrap(), rat(3, 1));
        assert!(parse_rat("x").is_err());
        assert!(parse_rat("1/0").is_err());
    }

    #[test]
    fn wilson_sane() {
        let (lo, hi) = wilson_ci(50, 100);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi - lo < 0.25);
        let (lo, _) = wilson_ci(0, 100);
        assert_eq!(lo, 0.0);
    }
}
