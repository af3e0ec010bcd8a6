//! Scalar abstraction for the real-valued numerics.
//!
//! Exact quantities (simplex integrals, Gram matrices, exponent inequalities)
//! use arbitrary-precision rationals; everything measured in floating point is
//! generic over [`Real`] so the same code runs in `f64` or in double-double
//! precision where log-ratio cancellation matters.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f64` or an extended-precision drop-in.
pub trait Real: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {
    fn from_f64_exact(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
    /// Natural log seeded by the correctly rounded f64 `ln` (the
    /// double-double library's own `ln` drifts at the 1e-12 level).
    fn ln_r(self) -> Self {
        self.ln()
    }
}

impl Real for f64 {}
impl Real for twofloat::TwoFloat {
    // the FromPrimitive default routes f64 through i64 and truncates
    fn from_f64_exact(v: f64) -> Self {
        twofloat::TwoFloat::from(v)
    }
    // ln(x) = ln(m) + ln(1 + (x-m)/m) with m the nearest f64; the residue
    // is below one f64 ulp, so the first-order term suffices
    fn ln_r(self) -> Self {
        let m = self.to_f64_lossy();
        if !(m > 0.0) || !m.is_finite() {
            return twofloat::TwoFloat::from(m.ln());
        }
        let res = (self - twofloat::TwoFloat::from(m)) / twofloat::TwoFloat::from(m);
        twofloat::TwoFloat::from(m.ln()) + res
    }
}

/// Default working scalar.
pub type F = f64;

/// Extended-precision scalar (106-bit effective mantissa), used where
/// irrational log-ratios feed into cancelling sums.
pub type Ext = twofloat::TwoFloat;

/// Exact rational scalar for simplex integration and inequality checks.
pub type Rat = num_rational::BigRational;

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rat {
    use num_bigint::BigInt;
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Lossy conversion of an exact rational to `f64`.
pub fn rat_to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or_else(|| {
        // fall back to a scaled division for ratios of huge integers
        let digits = |n: &num_bigint::BigInt| n.to_string().len() as i32;
        let shift = digits(r.numer()).max(digits(r.denom())) - 300;
        if shift > 0 {
            let scale = num_bigint::BigInt::from(10u32).pow(shift as u32);
            let n = r.numer() / &scale;
            let d = r.denom() / &scale;
            n.to_f64().unwrap() / d.to_f64().unwrap()
        } else {
            f64::NAN
        }
    })
}

/// Parse a rational from `"p/q"` or a plain decimal string like `"0.525"`.
pub fn parse_rat(s: &str) -> Option<Rat> {
    use num_bigint::BigInt;
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d == BigInt::from(0) {
            return None;
        }
        return Some(Rat::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int: BigInt = if int.is_empty() || int == "-" {
            BigInt::from(0)
        } else {
            int.parse().ok()?
        };
        let digits = frac.len() as u32;
        let frac_n: BigInt = if frac.is_empty() {
            BigInt::from(0)
        } else {
            frac.parse().ok()?
        };
        let den = BigInt::from(10u32).pow(digits);
        let mag = int.magnitude().clone() * den.magnitude().clone() + frac_n.magnitude().clone();
        let num = BigInt::from_biguint(
            if neg {
                num_bigint::Sign::Minus
            } else {
                num_bigint::Sign::Plus
            },
            mag,
        );
        return Some(Rat::new(num, den));
    }
    let n: BigInt = s.parse().ok()?;
    Some(Rat::from(n))
}

/// Render a rational as `"p/q"` (or `"p"` when integral).
pub fn rat_to_string(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serde adapter: rationals as `"p/q"` strings.
pub mod rat_serde {
    use super::{parse_rat, rat_to_string, Rat};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&rat_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(de)?;
        parse_rat(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational: {s}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rat("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rat("0.525").unwrap(), rat(21, 40));
        assert_eq!(parse_rat("-0.5").unwrap(), rat(-1, 2));
        assert_eq!(parse_rat("7").unwrap(), rat(7, 1));
        assert!(parse_rat("1/0").is_none());
    }

    #[test]
    fn ext_from_f64_keeps_fraction() {
        let v = Ext::from_f64_exact(2.4361);
        assert_eq!(v.to_f64_lossy(), 2.4361);
        assert_eq!(Ext::from_f64_exact(-1.25).to_f64_lossy(), -1.25);
    }

    #[test]
    fn round_trip_string() {
        let r = rat(-21, 40);
        assert_eq!(parse_rat(&rat_to_string(&r)).unwrap(), r);
    }
}
