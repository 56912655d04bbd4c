//! Exact rational helpers used by constant folding, parametric models and beliefs.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact value of the binary floating point number `x`.
pub fn exact_from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// Recovers the simple fraction a double was rounded from (e.g. `1.0/6.0` → 1/6).
///
/// Uses continued-fraction convergents with denominators up to 10^6 and accepts
/// the first one within 4 ulps; otherwise returns the exact binary value.
pub fn recover_from_f64(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let tol = 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
    let negative = x < 0.0;
    let target = x.abs();
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut rest = target;
    let limit = BigInt::from(1_000_000u64);
    for _ in 0..64 {
        let a = rest.floor();
        let a_int = BigInt::from(a as u64);
        let h2 = &a_int * &h1 + &h0;
        let k2 = &a_int * &k1 + &k0;
        if k2 > limit {
            break;
        }
        let approx = h2.to_f64().unwrap_or(f64::NAN) / k2.to_f64().unwrap_or(f64::NAN);
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        if (approx - target).abs() <= tol {
            let r = Rational::new(h1.clone(), k1.clone());
            return Some(if negative { -r } else { r });
        }
        let frac = rest - a;
        if frac <= 0.0 {
            break;
        }
        rest = 1.0 / frac;
        if !rest.is_finite() || rest > 1e18 {
            break;
        }
    }
    exact_from_f64(x)
}

/// Parses decimal text such as `0.25`, `3`, `-1.5e-3` exactly.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let t = text.trim();
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let negative = mantissa.starts_with('-');
    let mantissa = mantissa.trim_start_matches(['-', '+']);
    let (ip, fp) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if ip.is_empty() && fp.is_empty() {
        return None;
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{ip}{fp}0").parse::<BigInt>().ok()? / BigInt::from(10);
    let scale = exp - fp.len() as i32;
    let ten = BigInt::from(10);
    let mut r = Rational::from_integer(digits);
    if scale >= 0 {
        r *= Rational::from_integer(num::pow(ten, scale as usize));
    } else {
        r /= Rational::from_integer(num::pow(ten, (-scale) as usize));
    }
    Some(if negative { -r } else { r })
}

/// `num/den` text form used in belief dumps.
pub fn to_text(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn is_negative(r: &Rational) -> bool {
    r.is_negative()
}
