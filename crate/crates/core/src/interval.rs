//! Certified real and complex intervals with exact rational endpoints.
//!
//! Endpoints are exact rationals; operations that would otherwise produce
//! irrational or very long endpoints (square roots, logarithms, pi, and
//! explicit [`Interval::round`] calls) round outward to a requested number of
//! significant bits, so every enclosure is rigorous.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{ceil, floor, parse_q, pow2, q_frac, q_int, qcmp, qle, qlt, rational_sqrt, to_decimal, Q};

/// Default cap for precision escalation loops.
pub const PRECISION_CAP: u32 = 4096;

/// Digits used when rendering endpoints as decimal strings.
pub const DECIMAL_DIGITS: usize = 30;

#[derive(Clone, PartialEq, Eq)]
pub struct Interval {
    lo: Q,
    hi: Q,
}

fn magnitude_exponent(q: &Q) -> i64 {
    q.numer().bits() as i64 - q.denom().bits() as i64
}

/// Round toward -inf (`up == false`) or +inf to about `prec` significant bits.
fn round_dir(q: &Q, prec: u32, up: bool) -> Q {
    if q.is_zero() {
        return Q::zero();
    }
    let k = prec as i64 - magnitude_exponent(q);
    let scaled = q * pow2(k);
    if scaled.denom().is_one() {
        return q.clone();
    }
    let r = if up { ceil(&scaled) } else { floor(&scaled) };
    Q::from_integer(r) * pow2(-k)
}

fn sqrt_dir(q: &Q, prec: u32, up: bool) -> Q {
    if !q.is_positive() {
        return Q::zero();
    }
    if let Some(r) = rational_sqrt(q) {
        return r;
    }
    let k = prec as i64 - magnitude_exponent(q) / 2;
    let scaled = q * pow2(2 * k);
    let s = floor(&scaled).sqrt();
    let s = if up { s + 1 } else { s };
    Q::from_integer(s) * pow2(-k)
}

fn root_dir(q: &Q, n: u32, prec: u32, up: bool) -> Q {
    if !q.is_positive() {
        return Q::zero();
    }
    let k = prec as i64 - magnitude_exponent(q) / n as i64;
    let scaled = q * pow2(n as i64 * k);
    let fl = floor(&scaled);
    let r = fl.nth_root(n);
    let exact = scaled.denom().is_one() && num_traits::pow(r.clone(), n as usize) == fl;
    let r = if up && !exact { r + 1 } else { r };
    Q::from_integer(r) * pow2(-k)
}

impl Interval {
    pub fn new(lo: Q, hi: Q) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        Interval { lo, hi }
    }

    pub fn point(q: Q) -> Self {
        Interval { lo: q.clone(), hi: q }
    }

    pub fn zero() -> Self {
        Self::point(Q::zero())
    }

    pub fn from_int(n: i64) -> Self {
        Self::point(q_int(n))
    }

    pub fn lo(&self) -> &Q {
        &self.lo
    }

    pub fn hi(&self) -> &Q {
        &self.hi
    }

    pub fn width(&self) -> Q {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> Q {
        (&self.lo + &self.hi) / q_int(2)
    }

    pub fn is_point(&self) -> bool {
        qcmp(&self.lo, &self.hi).is_eq()
    }

    pub fn contains(&self, q: &Q) -> bool {
        qle(&self.lo, q) && qle(q, &self.hi)
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(&Q::zero())
    }

    pub fn is_positive(&self) -> bool {
        self.lo.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.hi.is_negative()
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        qle(&self.lo, &other.hi) && qle(&other.lo, &self.hi)
    }

    /// Certified `self <= other` (every point of self is at most every point of other).
    pub fn certainly_le(&self, other: &Interval) -> bool {
        qle(&self.hi, &other.lo)
    }

    pub fn certainly_lt(&self, other: &Interval) -> bool {
        qlt(&self.hi, &other.lo)
    }

    /// Outward rounding of both endpoints to about `prec` significant bits.
    pub fn round(&self, prec: u32) -> Interval {
        Interval { lo: round_dir(&self.lo, prec, false), hi: round_dir(&self.hi, prec, true) }
    }

    pub fn scale(&self, c: &Q) -> Interval {
        let a = &self.lo * c;
        let b = &self.hi * c;
        if qle(&a, &b) {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    pub fn shift(&self, c: &Q) -> Interval {
        Interval { lo: &self.lo + c, hi: &self.hi + c }
    }

    pub fn square(&self) -> Interval {
        let a = &self.lo * &self.lo;
        let b = &self.hi * &self.hi;
        if self.contains_zero() {
            Interval { lo: Q::zero(), hi: if qlt(&b, &a) { a } else { b } }
        } else if qle(&a, &b) {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    pub fn abs(&self) -> Interval {
        if self.lo.is_negative() && self.hi.is_positive() {
            let m = if qlt(&self.hi, &-&self.lo) { -&self.lo } else { self.hi.clone() };
            Interval { lo: Q::zero(), hi: m }
        } else if self.hi <= Q::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Pointwise maximum of two enclosed quantities.
    pub fn max(&self, other: &Interval) -> Interval {
        Interval {
            lo: if qle(&other.lo, &self.lo) { self.lo.clone() } else { other.lo.clone() },
            hi: if qle(&other.hi, &self.hi) { self.hi.clone() } else { other.hi.clone() },
        }
    }

    pub fn recip(&self) -> Result<Interval> {
        if self.contains_zero() {
            return Err(Error::Precision("reciprocal of interval containing zero".into()));
        }
        Ok(Interval { lo: self.hi.recip(), hi: self.lo.recip() })
    }

    pub fn div(&self, other: &Interval) -> Result<Interval> {
        Ok(self * &other.recip()?)
    }

    pub fn pow(&self, e: u32) -> Interval {
        let mut acc = Interval::from_int(1);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Enclosure of the square root; negative parts are clamped to zero.
    pub fn sqrt(&self, prec: u32) -> Interval {
        assert!(!self.hi.is_negative(), "sqrt of negative interval");
        Interval { lo: sqrt_dir(&self.lo, prec, false), hi: sqrt_dir(&self.hi, prec, true) }
    }

    pub fn nth_root(&self, n: u32, prec: u32) -> Interval {
        assert!(n >= 1);
        assert!(!self.hi.is_negative(), "root of negative interval");
        Interval { lo: root_dir(&self.lo, n, prec, false), hi: root_dir(&self.hi, n, prec, true) }
    }

    /// Natural logarithm of a positive interval.
    pub fn ln(&self, prec: u32) -> Result<Interval> {
        if !self.is_positive() {
            return Err(Error::Precision("logarithm of non-positive interval".into()));
        }
        let lo = ln_rational(&self.lo, prec);
        let hi = if self.is_point() { lo.clone() } else { ln_rational(&self.hi, prec) };
        Ok(Interval { lo: lo.lo, hi: hi.hi })
    }

    pub fn pi(prec: u32) -> Interval {
        let p = prec + 16;
        let a = atan_inv(5, p).scale(&q_int(16));
        let b = atan_inv(239, p).scale(&q_int(4));
        (&a - &b).round(prec)
    }

    pub fn ln2(prec: u32) -> Interval {
        atanh_enclosure(&q_frac(1, 3), prec + 16).scale(&q_int(2)).round(prec)
    }

    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.mid().to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_decimal_pair(&self, digits: usize) -> (String, String) {
        (to_decimal(&self.lo, digits, false), to_decimal(&self.hi, digits, true))
    }

    pub fn parse_pair(lo: &str, hi: &str) -> Result<Interval> {
        let (a, b) = (parse_q(lo)?, parse_q(hi)?);
        if a > b {
            return Err(Error::Parse(format!("interval [{lo}, {hi}] is empty")));
        }
        Ok(Interval { lo: a, hi: b })
    }
}

/// atanh(z) for rational 0 <= z <= 1/2 via its odd power series with a
/// geometric tail bound.
fn atanh_enclosure(z: &Q, prec: u32) -> Interval {
    if z.is_zero() {
        return Interval::zero();
    }
    let z2 = Interval::point(z * z).round(prec + 8);
    let mut power = Interval::point(z.clone()).round(prec + 8);
    let mut sum = Interval::zero();
    let tol = pow2(-(prec as i64) - 4);
    let mut j: i64 = 0;
    loop {
        let term = power.scale(&q_frac(1, 2 * j + 1));
        sum = (&sum + &term).round(prec + 8);
        power = (&power * &z2).round(prec + 8);
        j += 1;
        if power.hi < tol {
            break;
        }
    }
    // tail: sum_{i>=j} z^{2i+1}/(2i+1) <= power / ((2j+1) (1 - z^2))
    let denom = (Q::one() - z2.hi.clone()) * q_int(2 * j + 1);
    let tail = &power.hi / denom;
    Interval { lo: sum.lo, hi: sum.hi + tail }
}

/// atan(1/k) for an integer k >= 2 via the alternating series.
fn atan_inv(k: i64, prec: u32) -> Interval {
    let x = q_frac(1, k);
    let x2 = &x * &x;
    let mut power = x.clone();
    let mut sum = Interval::zero();
    let tol = pow2(-(prec as i64) - 4);
    let mut j: i64 = 0;
    loop {
        let term = Interval::point(&power / q_int(2 * j + 1)).round(prec + 8);
        sum = if j % 2 == 0 { &sum + &term } else { &sum - &term };
        power = round_dir(&(&power * &x2), prec + 8, true);
        j += 1;
        if power < tol {
            break;
        }
    }
    // alternating tail is bounded by the next term in absolute value
    let next = &power / q_int(2 * j + 1);
    Interval { lo: sum.lo - next.clone(), hi: sum.hi + next }
}

fn ln_rational(q: &Q, prec: u32) -> Interval {
    assert!(q.is_positive());
    if q.is_one() {
        return Interval::zero();
    }
    let mut e = magnitude_exponent(q);
    let mut y = q * pow2(-e);
    let two = q_int(2);
    while y >= two {
        y /= &two;
        e += 1;
    }
    while y < Q::one() {
        y *= &two;
        e -= 1;
    }
    let z = (&y - Q::one()) / (&y + Q::one());
    let p = prec + 16 + (64 - (e.unsigned_abs().max(1)).leading_zeros());
    let frac = atanh_enclosure(&z, p).scale(&two);
    if e == 0 {
        return frac.round(prec);
    }
    let l2 = atanh_enclosure(&q_frac(1, 3), p).scale(&two);
    (&l2.scale(&q_int(e)) + &frac).round(prec)
}

impl Add for &Interval {
    type Output = Interval;
    fn add(self, rhs: &Interval) -> Interval {
        Interval { lo: &self.lo + &rhs.lo, hi: &self.hi + &rhs.hi }
    }
}

impl Sub for &Interval {
    type Output = Interval;
    fn sub(self, rhs: &Interval) -> Interval {
        Interval { lo: &self.lo - &rhs.hi, hi: &self.hi - &rhs.lo }
    }
}

impl Mul for &Interval {
    type Output = Interval;
    fn mul(self, rhs: &Interval) -> Interval {
        if self.is_point() {
            return rhs.scale(&self.lo);
        }
        if rhs.is_point() {
            return self.scale(&rhs.lo);
        }
        let c = [&self.lo * &rhs.lo, &self.lo * &rhs.hi, &self.hi * &rhs.lo, &self.hi * &rhs.hi];
        let mut lo = c[0].clone();
        let mut hi = c[0].clone();
        for v in &c[1..] {
            if qlt(v, &lo) {
                lo = v.clone();
            }
            if qlt(&hi, v) {
                hi = v.clone();
            }
        }
        Interval { lo, hi }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.to_decimal_pair(12);
        write!(f, "[{a}, {b}]")
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (a, b) = self.to_decimal_pair(DECIMAL_DIGITS);
        [a, b].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b] = <[String; 2]>::deserialize(d)?;
        Interval::parse_pair(&a, &b).map_err(serde::de::Error::custom)
    }
}

/// Rectangular complex interval.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexInterval {
    pub re: Interval,
    pub im: Interval,
}

impl ComplexInterval {
    pub fn new(re: Interval, im: Interval) -> Self {
        ComplexInterval { re, im }
    }

    pub fn zero() -> Self {
        Self::new(Interval::zero(), Interval::zero())
    }

    pub fn real(re: Interval) -> Self {
        Self::new(re, Interval::zero())
    }

    pub fn imag(im: Interval) -> Self {
        Self::new(Interval::zero(), im)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    pub fn scale(&self, c: &Q) -> Self {
        Self::new(self.re.scale(c), self.im.scale(c))
    }

    pub fn norm_sqr(&self) -> Interval {
        &self.re.square() + &self.im.square()
    }

    pub fn abs(&self, prec: u32) -> Interval {
        self.norm_sqr().sqrt(prec)
    }

    pub fn round(&self, prec: u32) -> Self {
        Self::new(self.re.round(prec), self.im.round(prec))
    }

    pub fn is_purely_imaginary_candidate(&self) -> bool {
        self.re.contains_zero()
    }

    pub fn contains(&self, re: &Q, im: &Q) -> bool {
        self.re.contains(re) && self.im.contains(im)
    }
}

impl Add for &ComplexInterval {
    type Output = ComplexInterval;
    fn add(self, rhs: &ComplexInterval) -> ComplexInterval {
        ComplexInterval::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl Sub for &ComplexInterval {
    type Output = ComplexInterval;
    fn sub(self, rhs: &ComplexInterval) -> ComplexInterval {
        ComplexInterval::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl Mul for &ComplexInterval {
    type Output = ComplexInterval;
    fn mul(self, rhs: &ComplexInterval) -> ComplexInterval {
        let re = &(&self.re * &rhs.re) - &(&self.im * &rhs.im);
        let im = &(&self.re * &rhs.im) + &(&self.im * &rhs.re);
        ComplexInterval::new(re, im)
    }
}

impl fmt::Debug for ComplexInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} + {:?}i", self.re, self.im)
    }
}

/// Certified sign decision with precision doubling up to [`PRECISION_CAP`].
///
/// `eval` must return an enclosure of the same real number at each requested
/// precision. Returns `Ok(0)` only for a point interval at zero.
pub fn decide_sign<F>(start_prec: u32, mut eval: F) -> Result<i32>
where
    F: FnMut(u32) -> Interval,
{
    let mut prec = start_prec.max(32);
    loop {
        let iv = eval(prec);
        if iv.is_positive() {
            return Ok(1);
        }
        if iv.is_negative() {
            return Ok(-1);
        }
        if iv.is_point() && iv.lo.is_zero() {
            return Ok(0);
        }
        if prec >= PRECISION_CAP {
            return Err(Error::Precision(format!("sign undecided at {prec} bits (enclosure {iv:?})")));
        }
        prec = (prec * 2).min(PRECISION_CAP);
    }
}

/// Exact integer floor of the enclosed value, or an error when the interval
/// straddles an integer.
pub fn certified_floor(iv: &Interval) -> Result<BigInt> {
    let a = floor(&iv.lo);
    let b = floor(&iv.hi);
    if a == b {
        Ok(a)
    } else {
        Err(Error::Precision(format!("interval {iv:?} straddles an integer; more precision required")))
    }
}

impl From<Q> for Interval {
    fn from(q: Q) -> Self {
        Interval::point(q)
    }
}

/// `a <= b` for intervals is decided on the rounded endpoints only when
/// separated; exposes `hi` of an upper-bound style quantity.
pub fn upper(iv: &Interval) -> Q {
    iv.hi.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn close(iv: &Interval, x: f64, tol: f64) -> bool {
        let lo = iv.lo().to_f64().unwrap();
        let hi = iv.hi().to_f64().unwrap();
        lo <= x + tol && x - tol <= hi && hi - lo < tol
    }

    #[test]
    fn sqrt_is_exact_on_squares_and_tight_otherwise() {
        let r = Interval::point(q_frac(9, 4)).sqrt(64);
        assert!(r.is_point());
        assert_eq!(r.lo(), &q_frac(3, 2));
        let s5 = Interval::from_int(5).sqrt(128);
        assert!(s5.contains(&q_frac(2236067977, 1000000000)) || s5.lo() > &q_frac(2236067977, 1000000000));
        assert!(close(&s5, 5f64.sqrt(), 1e-15));
        let sq = s5.square();
        assert!(sq.contains(&q_int(5)));
    }

    #[test]
    fn pi_and_logs() {
        let pi = Interval::pi(200);
        assert!(close(&pi, std::f64::consts::PI, 1e-15));
        assert!(pi.width() < pow2(-190));
        let l2 = Interval::ln2(128);
        assert!(close(&l2, std::f64::consts::LN_2, 1e-15));
        let l10 = Interval::from_int(10).ln(128).unwrap();
        assert!(close(&l10, 10f64.ln(), 1e-14));
        let small = Interval::point(q_frac(1, 1000)).ln(128).unwrap();
        assert!(close(&small, (0.001f64).ln(), 1e-13));
        assert_eq!(Interval::from_int(1).ln(64).unwrap(), Interval::zero());
    }

    #[test]
    fn roots() {
        let r = Interval::from_int(5).nth_root(4, 100);
        assert!(close(&r, 5f64.powf(0.25), 1e-15));
        let e = Interval::from_int(81).nth_root(4, 100);
        assert!(e.is_point() && e.lo() == &q_int(3));
    }

    #[test]
    fn arithmetic_encloses() {
        let a = Interval::new(q_int(-1), q_int(2));
        let b = Interval::new(q_int(3), q_int(4));
        let p = &a * &b;
        assert_eq!(p, Interval::new(q_int(-4), q_int(8)));
        assert_eq!(a.square(), Interval::new(q_int(0), q_int(4)));
        assert!(a.recip().is_err());
        assert_eq!(b.recip().unwrap(), Interval::new(q_frac(1, 4), q_frac(1, 3)));
    }

    #[test]
    fn floors_and_signs() {
        assert_eq!(certified_floor(&Interval::new(q_frac(3, 2), q_frac(7, 4))).unwrap(), BigInt::from(1));
        assert!(certified_floor(&Interval::new(q_frac(3, 4), q_frac(5, 4))).is_err());
        let s = decide_sign(32, |p| &Interval::from_int(2).sqrt(p) - &Interval::point(q_frac(141421356, 100000000)));
        assert_eq!(s.unwrap(), 1);
    }

    #[test]
    fn serde_round_trip_is_outward() {
        let x = Interval::from_int(2).sqrt(128);
        let s = serde_json::to_string(&x).unwrap();
        let y: Interval = serde_json::from_str(&s).unwrap();
        assert!(y.lo() <= x.lo() && y.hi() >= x.hi());
    }
}
