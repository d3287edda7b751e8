//! Rational helpers and small-integer number theory shared by the other modules.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn q_from_big(n: &BigInt) -> Q {
    Q::from_integer(n.clone())
}

/// `2^e` for a possibly negative exponent.
pub fn pow2(e: i64) -> Q {
    if e >= 0 {
        Q::from_integer(BigInt::one() << (e as usize))
    } else {
        Q::new(BigInt::one(), BigInt::one() << ((-e) as usize))
    }
}

/// Total order by cross multiplication; `Ord` on `Ratio` recurses along
/// the continued fraction, which is deep for wide dyadic endpoints.
pub fn qcmp(a: &Q, b: &Q) -> std::cmp::Ordering {
    if a.denom() == b.denom() {
        return a.numer().cmp(b.numer());
    }
    (a.numer() * b.denom()).cmp(&(b.numer() * a.denom()))
}

pub fn qlt(a: &Q, b: &Q) -> bool {
    qcmp(a, b).is_lt()
}

pub fn qle(a: &Q, b: &Q) -> bool {
    qcmp(a, b).is_le()
}

pub fn floor(q: &Q) -> BigInt {
    q.floor().to_integer()
}

pub fn ceil(q: &Q) -> BigInt {
    q.ceil().to_integer()
}

/// Nearest integer, ties rounded towards +infinity.
pub fn round_half_up(q: &Q) -> BigInt {
    floor(&(q + q_frac(1, 2)))
}

/// Canonical textual form `p/q` (always with a denominator).
pub fn format_q(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Accepts `p`, `p/q`, and plain decimals such as `-0.25`.
pub fn parse_q(s: &str) -> Result<Q> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let neg = ip.trim_start().starts_with('-');
        let ip_abs = ip.trim_start_matches(['-', '+']);
        if !fp.chars().all(|c| c.is_ascii_digit()) || fp.is_empty() {
            return Err(bad());
        }
        let whole: BigInt = if ip_abs.is_empty() { BigInt::zero() } else { ip_abs.parse().map_err(|_| bad())? };
        let frac: BigInt = fp.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), fp.len());
        let v = Q::new(whole * &scale + frac, scale);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

/// Decimal rendering rounded toward -infinity (`up == false`) or +infinity.
pub fn to_decimal(q: &Q, digits: usize, up: bool) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = q * Q::from_integer(scale.clone());
    let r = if up { ceil(&scaled) } else { floor(&scaled) };
    let neg = r.is_negative();
    let a = r.abs();
    let (ip, fp) = a.div_rem(&scale);
    let mut s = format!("{}.{:0>width$}", ip, fp.to_string(), width = digits);
    if digits == 0 {
        s = ip.to_string();
    }
    if neg {
        format!("-{s}")
    } else {
        s
    }
}

pub fn is_integer(q: &Q) -> bool {
    q.denom().is_one()
}

pub fn is_perfect_square(n: &BigInt) -> bool {
    if n.is_negative() {
        return false;
    }
    let r = n.sqrt();
    &(&r * &r) == n
}

/// Square root of a rational when it is a perfect square.
pub fn rational_sqrt(q: &Q) -> Option<Q> {
    if q.is_negative() {
        return None;
    }
    let (n, d) = (q.numer(), q.denom());
    if is_perfect_square(n) && is_perfect_square(d) {
        Some(Q::new(n.sqrt(), d.sqrt()))
    } else {
        None
    }
}

pub fn bit_length(n: &BigInt) -> u64 {
    n.bits()
}

/// Trial-division factorisation of |n| into (prime, exponent) pairs.
/// Fails when a cofactor above `limit²` would remain unresolved.
pub fn factor(n: &BigInt, limit: u64) -> Result<Vec<(BigInt, u32)>> {
    let mut m = n.abs();
    let mut out = Vec::new();
    if m.is_zero() {
        return Err(Error::Validation("cannot factor zero".into()));
    }
    let mut p: u64 = 2;
    while BigInt::from(p) * BigInt::from(p) <= m {
        if p > limit {
            return Err(Error::Budget(format!("factorisation of {n} exceeds trial-division limit {limit}")));
        }
        let bp = BigInt::from(p);
        let mut e = 0;
        while (&m % &bp).is_zero() {
            m /= &bp;
            e += 1;
        }
        if e > 0 {
            out.push((bp, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if !m.is_one() {
        out.push((m, 1));
    }
    Ok(out)
}

pub fn factor_u64(n: u64) -> Vec<(u64, u32)> {
    let mut m = n;
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= m {
        let mut e = 0;
        while m.is_multiple_of(p) {
            m /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if m > 1 {
        out.push((m, 1));
    }
    out
}

pub fn is_prime_u64(n: u64) -> bool {
    n >= 2 && factor_u64(n).len() == 1 && factor_u64(n)[0].1 == 1
}

pub fn euler_phi(n: u64) -> u64 {
    factor_u64(n).iter().fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

pub fn is_squarefree(n: &BigInt) -> bool {
    if n.is_zero() {
        return false;
    }
    let m = n.abs();
    let small = match m.to_u64() {
        Some(v) => v,
        None => return false,
    };
    factor_u64(small).iter().all(|&(_, e)| e == 1)
}

/// Valuation of a nonzero rational at a prime.
pub fn valuation(q: &Q, p: &BigInt) -> i64 {
    fn v_int(n: &BigInt, p: &BigInt) -> i64 {
        let mut m = n.clone();
        let mut e = 0;
        while !m.is_zero() && (&m % p).is_zero() {
            m /= p;
            e += 1;
        }
        e
    }
    v_int(q.numer(), p) - v_int(q.denom(), p)
}

pub fn sign_of(q: &Q) -> Sign {
    if q.is_zero() {
        Sign::NoSign
    } else if q.is_positive() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Legendre symbol (a/p) for an odd prime p.
pub fn legendre(a: &BigInt, p: &BigInt) -> i32 {
    let r = a.mod_floor(p);
    if r.is_zero() {
        return 0;
    }
    let e = (p - 1u32) / 2u32;
    let v = r.modpow(&e, p);
    if v.is_one() {
        1
    } else {
        -1
    }
}

pub fn lcm_of_denominators<'a>(qs: impl IntoIterator<Item = &'a Q>) -> BigInt {
    qs.into_iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}

pub fn primes_up_to(n: usize) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n {
        if sieve[i] {
            let mut j = i * i;
            while j <= n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    sieve.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("3/6").unwrap(), q_frac(1, 2));
        assert_eq!(parse_q("-7").unwrap(), q_int(-7));
        assert_eq!(parse_q("0.6").unwrap(), q_frac(3, 5));
        assert_eq!(parse_q("-0.25").unwrap(), q_frac(-1, 4));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
    }

    #[test]
    fn decimal_rounding_is_directed() {
        let third = q_frac(1, 3);
        assert_eq!(to_decimal(&third, 3, false), "0.333");
        assert_eq!(to_decimal(&third, 3, true), "0.334");
        assert_eq!(to_decimal(&-third, 3, false), "-0.334");
    }

    #[test]
    fn factoring_and_phi() {
        assert_eq!(factor_u64(360), vec![(2, 3), (3, 2), (5, 1)]);
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(12), 4);
        assert!(is_prime_u64(13));
        assert!(!is_prime_u64(1));
        assert!(is_squarefree(&BigInt::from(-15)));
        assert!(!is_squarefree(&BigInt::from(45)));
    }

    #[test]
    fn legendre_symbol() {
        assert_eq!(legendre(&BigInt::from(-15), &BigInt::from(17)), 1);
        assert_eq!(legendre(&BigInt::from(2), &BigInt::from(5)), -1);
    }
}

/// `serialize_with` helpers rendering integers and rationals as strings.
pub mod ser {
    use super::{format_q, Q};
    use num_bigint::BigInt;
    use serde::ser::{SerializeSeq, Serializer};

    pub fn big<S: Serializer>(b: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&b.to_string())
    }

    pub fn big_vec<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for b in v {
            seq.serialize_element(&b.to_string())?;
        }
        seq.end()
    }

    pub fn big_mat<S: Serializer>(m: &[Vec<BigInt>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = m.iter().map(|r| r.iter().map(|b| b.to_string()).collect()).collect();
        serde::Serialize::serialize(&rows, s)
    }

    pub fn q<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_q(q))
    }

    pub fn q_vec<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<String> = v.iter().map(format_q).collect();
        serde::Serialize::serialize(&v, s)
    }

    pub fn q_mat<S: Serializer>(m: &[Vec<Q>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = m.iter().map(|r| r.iter().map(format_q).collect()).collect();
        serde::Serialize::serialize(&rows, s)
    }

    pub fn big_opt<S: Serializer>(b: &Option<BigInt>, s: S) -> Result<S::Ok, S::Error> {
        match b {
            Some(b) => s.serialize_str(&b.to_string()),
            None => s.serialize_none(),
        }
    }
}
