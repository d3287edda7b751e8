//! Bound arithmetic for Minkowski lattices of rings of integers: shortest
//! vectors, covering radii, the ball-volume inequality, and the cyclotomic
//! root-discriminant scan.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Tower, TowerJson};
use crate::integers::{discriminant_n, integral_basis};
use crate::interval::{decide_sign, Interval, PRECISION_CAP};
use crate::lattice::{
    covering_radius_small, shortest_vector_l2, CoverMode, CoveringRadius, LatticeInstance, MAX_ENUM_RANK,
    MAX_EXACT_COVER_RANK,
};
use crate::linalg::{self, Mat};
use crate::rational::{euler_phi, factor_u64, format_q, parse_q, pow2, q_frac, q_from_big, q_int, qcmp, to_decimal, Q};

pub const MAX_MIN_NORM_DEGREE: usize = 8;

/// A number field whose ring of integers has a known Z-basis here.
#[derive(Clone, Debug)]
pub enum NumberField {
    /// Multiquadratic field or tower with an available integral basis.
    Tower(Tower),
    /// `Q(ζ_m)` with `m ≢ 2 mod 4`, power basis.
    Cyclotomic(u64),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FieldJson {
    Cyclotomic { cyclotomic: u64 },
    Tower(TowerJson),
}

fn normalize_conductor(m: u64) -> u64 {
    if m % 4 == 2 {
        m / 2
    } else {
        m
    }
}

impl NumberField {
    pub fn rational() -> NumberField {
        NumberField::Tower(Tower::base_i64(&[]).expect("Q is a valid tower"))
    }

    pub fn quadratic(d: i64) -> Result<NumberField> {
        Ok(NumberField::Tower(Tower::base_i64(&[d])?))
    }

    pub fn cyclotomic(m: u64) -> Result<NumberField> {
        if m == 0 {
            return Err(Error::Validation("conductor must be positive".into()));
        }
        Ok(match normalize_conductor(m) {
            1 => NumberField::rational(),
            4 => NumberField::quadratic(-1)?,
            m => NumberField::Cyclotomic(m),
        })
    }

    /// Accepts `Q`, `Q(i)`, `Q(sqrt(d),…)`, `Q(zeta_m)`, or JSON
    /// (`{"level1":[…]}` / `{"cyclotomic":m}`).
    pub fn parse(s: &str) -> Result<NumberField> {
        let s = s.trim();
        if s.starts_with('{') {
            let j: FieldJson = serde_json::from_str(s).map_err(|e| Error::Parse(format!("field JSON: {e}")))?;
            return match j {
                FieldJson::Cyclotomic { cyclotomic } => NumberField::cyclotomic(cyclotomic),
                FieldJson::Tower(t) => Ok(NumberField::Tower(Tower::from_json(&t)?)),
            };
        }
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact == "Q" {
            return Ok(NumberField::rational());
        }
        let inner = compact
            .strip_prefix("Q(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("unrecognised field '{s}'")))?;
        let bad = || Error::Parse(format!("unrecognised field '{s}'"));
        for pre in ["zeta_", "zeta", "ζ_", "ζ"] {
            if let Some(rest) = inner.strip_prefix(pre) {
                let rest = rest.trim_start_matches('(').trim_end_matches(')');
                return NumberField::cyclotomic(rest.parse().map_err(|_| bad())?);
            }
        }
        let mut ms = Vec::new();
        for part in inner.split(',') {
            let m: i64 = if part == "i" {
                -1
            } else {
                let body = part
                    .strip_prefix("sqrt(")
                    .or_else(|| part.strip_prefix("√("))
                    .and_then(|r| r.strip_suffix(')'))
                    .or_else(|| part.strip_prefix('√'))
                    .ok_or_else(bad)?;
                body.parse().map_err(|_| bad())?
            };
            ms.push(m);
        }
        Ok(NumberField::Tower(Tower::base_i64(&ms)?))
    }

    pub fn degree(&self) -> usize {
        match self {
            NumberField::Tower(t) => t.degree(),
            NumberField::Cyclotomic(m) => euler_phi(*m) as usize,
        }
    }

    /// Number of complex places.
    pub fn r2(&self) -> Result<usize> {
        match self {
            NumberField::Tower(t) => Ok(t.signature()?.1),
            NumberField::Cyclotomic(_) => Ok(self.degree() / 2),
        }
    }

    /// `|Δ(K)|`.
    pub fn discriminant(&self) -> Result<BigInt> {
        match self {
            NumberField::Tower(t) => discriminant_n(t),
            NumberField::Cyclotomic(m) => Ok(cyclotomic_discriminant(*m)),
        }
    }

    /// Gram of the integral basis under `Σ_real xy + Σ_pairs Re(z w̄)`.
    pub fn minkowski_gram(&self) -> Result<Mat> {
        match self {
            NumberField::Tower(t) => {
                let cj = t.conjugation()?;
                let b = integral_basis(t)?;
                Ok(b.iter().map(|x| b.iter().map(|y| x.inner_with(y, &cj)).collect()).collect())
            }
            NumberField::Cyclotomic(m) => {
                let n = self.degree();
                let half = q_frac(1, 2);
                Ok((0..n)
                    .map(|a| (0..n).map(|b| q_int(ramanujan_sum(*m, a.abs_diff(b) as u64)) * &half).collect())
                    .collect())
            }
        }
    }

    pub fn minkowski_lattice(&self) -> Result<LatticeInstance> {
        LatticeInstance::from_gram(self.minkowski_gram()?)
    }
}

impl fmt::Display for NumberField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumberField::Cyclotomic(m) => write!(f, "Q(zeta_{m})"),
            NumberField::Tower(t) if t.num_units() == 0 => {
                if t.ell() == 0 {
                    return write!(f, "Q");
                }
                let parts: Vec<String> = t
                    .level1()
                    .iter()
                    .map(|m| if *m == BigInt::from(-1) { "i".to_string() } else { format!("sqrt({m})") })
                    .collect();
                write!(f, "Q({})", parts.join(","))
            }
            NumberField::Tower(t) => write!(f, "{}", serde_json::to_string(&t.to_json()).unwrap_or_default()),
        }
    }
}

fn mobius(n: u64) -> i64 {
    let f = factor_u64(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `c_m(k) = Tr_{Q(ζ_m)/Q}(ζ_m^k) = μ(m/g) φ(m)/φ(m/g)` with `g = gcd(k, m)`.
pub fn ramanujan_sum(m: u64, k: u64) -> i64 {
    let g = k.gcd(&m);
    let q = m / g;
    mobius(q) * (euler_phi(m) / euler_phi(q)) as i64
}

/// `|Δ(Q(ζ_m))| = m^φ / ∏_{p|m} p^{φ/(p−1)}`.
pub fn cyclotomic_discriminant(m: u64) -> BigInt {
    let n = euler_phi(m);
    let mut num = num_traits::pow(BigInt::from(m), n as usize);
    for (p, _) in factor_u64(m) {
        num /= num_traits::pow(BigInt::from(p), (n / (p - 1)) as usize);
    }
    num
}

// ---------------------------------------------------------------------------
// Shortest vectors and covering radii

#[derive(Clone, Debug, Serialize)]
pub struct MinNormCheck {
    #[serde(serialize_with = "crate::rational::ser::q")]
    pub min_sq: Q,
    pub min_l2: Interval,
    /// `n/2`.
    #[serde(serialize_with = "crate::rational::ser::q")]
    pub bound_sq: Q,
    pub holds: bool,
    pub equality: bool,
    #[serde(serialize_with = "crate::rational::ser::big_vec")]
    pub witness: Vec<BigInt>,
}

/// Exact minimum of `‖α‖₂²` over nonzero `α ∈ O_F`, against `n/2`.
pub fn min_norm_check(field: &NumberField, prec: u32, budget: u64) -> Result<MinNormCheck> {
    let n = field.degree();
    if n > MAX_MIN_NORM_DEGREE {
        return Err(Error::Capacity(format!("degree {n} exceeds {MAX_MIN_NORM_DEGREE}")));
    }
    let sv = shortest_vector_l2(&field.minkowski_lattice()?, budget)?;
    let bound_sq = q_frac(n as i64, 2);
    let ord = qcmp(&sv.norm_sq, &bound_sq);
    Ok(MinNormCheck {
        min_l2: Interval::point(sv.norm_sq.clone()).sqrt(prec),
        min_sq: sv.norm_sq,
        bound_sq,
        holds: ord.is_ge(),
        equality: ord.is_eq(),
        witness: sv.coeffs,
    })
}

/// `μ(K)`: exact for `n ≤ 4`, bracketed for `n ≤ 10`.
pub fn covering_radius_field(field: &NumberField, prec: u32, budget: u64) -> Result<CoveringRadius> {
    let n = field.degree();
    let mode = if n <= MAX_EXACT_COVER_RANK {
        CoverMode::Exact
    } else if n <= MAX_ENUM_RANK {
        CoverMode::Bounds
    } else {
        return Err(Error::Capacity(format!("degree {n} exceeds the covering-radius cap {MAX_ENUM_RANK}")));
    };
    covering_radius_small(&field.minkowski_lattice()?, mode, prec, budget)
}

// ---------------------------------------------------------------------------
// Volume inequality

/// `Γ(n/2 + 1) = q` (n even) or `q·√π` (n odd).
pub fn gamma_half(n: usize) -> (Q, bool) {
    if n.is_multiple_of(2) {
        let mut f = BigInt::one();
        for k in 2..=(n / 2) {
            f *= k;
        }
        (q_from_big(&f), false)
    } else {
        // Γ(k + 1/2) = (2k−1)!! / 2^k · √π with k = (n+1)/2
        let mut df = BigInt::one();
        let mut k = n as i64;
        while k > 1 {
            df *= k;
            k -= 2;
        }
        (q_from_big(&df) * pow2(-((n as i64 + 1) / 2)), true)
    }
}

/// Volume of the unit n-ball, `π^{n/2}/Γ(n/2+1)`, as `c·π^j` squared:
/// returns `(c², j)` with `V_n² = c² π^j`.
fn ball_volume_sq(n: usize) -> (Q, u32) {
    let (g, sqrt_pi) = gamma_half(n);
    let c = Q::one() / (&g * &g);
    if sqrt_pi {
        (c, (n - 1) as u32)
    } else {
        (c, n as u32)
    }
}

pub fn ball_volume(n: usize, prec: u32) -> Interval {
    let (c2, j) = ball_volume_sq(n);
    let v = Interval::pi(prec + 8).pow(j).scale(&c2);
    v.sqrt(prec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    Exact,
    Interval,
    /// The bracket on μ is too wide to decide.
    Undecided,
}

#[derive(Clone, Debug, Serialize)]
pub struct VolumeBound {
    /// `2^{−r₂} Δ^{1/2}`.
    pub lhs: Interval,
    /// `μ^n π^{n/2} / Γ(n/2+1)` at the lower end of the μ bracket.
    pub rhs: Interval,
    pub holds: bool,
    pub certification: Certification,
    /// `½ log δ − (r₂/n) log 2 − ½(1 + log 2π)`.
    pub log_lhs: Interval,
    /// `log d` with `d = μ/√n`.
    pub log_d: Interval,
    /// `log d − log_lhs`, the unmodelled `O(log n / n)` term.
    pub residual: Interval,
}

pub fn volbound_eval(field: &NumberField, cover: &CoveringRadius, prec: u32) -> Result<VolumeBound> {
    let n = field.degree();
    let r2 = field.r2()?;
    let disc = q_from_big(&field.discriminant()?);
    let lhs_sq = &disc * pow2(-2 * r2 as i64);
    let (c2, j) = ball_volume_sq(n);
    let mu_sq = cover.sq_lower.clone();
    let rhs_sq_rat = num_traits::pow(mu_sq.clone(), n) * &c2;
    let (holds, certification) = if j == 0 {
        (qcmp(&lhs_sq, &rhs_sq_rat).is_le(), Certification::Exact)
    } else {
        let s = decide_sign(prec, |p| &Interval::pi(p).pow(j).scale(&rhs_sq_rat) - &Interval::point(lhs_sq.clone()));
        match s {
            Ok(s) => (s >= 0, Certification::Interval),
            Err(_) => (false, Certification::Undecided),
        }
    };
    let lhs = Interval::point(lhs_sq).sqrt(prec);
    let rhs = Interval::pi(prec + 8).pow(j).scale(&rhs_sq_rat).sqrt(prec);

    let nq = q_int(n as i64);
    let ln2 = Interval::ln2(prec + 8);
    let ln_delta = Interval::point(disc).ln(prec + 8)?.scale(&(Q::one() / &nq));
    let ln_2pi = Interval::pi(prec + 8).scale(&q_int(2)).ln(prec + 8)?;
    let half = q_frac(1, 2);
    let log_lhs = &(&ln_delta.scale(&half) - &ln2.scale(&Q::new(BigInt::from(r2), BigInt::from(n))))
        - &ln_2pi.shift(&Q::one()).scale(&half);
    // log d = ½ log(μ²/n), bracketed over the μ² bracket
    let d_sq = Interval::new(&cover.sq_lower / &nq, &cover.sq_upper / &nq);
    let log_d = d_sq.ln(prec + 8)?.scale(&half);
    let residual = &log_d - &log_lhs;
    Ok(VolumeBound {
        lhs,
        rhs,
        holds,
        certification,
        log_lhs: log_lhs.round(prec),
        log_d: log_d.round(prec),
        residual: residual.round(prec),
    })
}

// ---------------------------------------------------------------------------
// Field report

#[derive(Clone, Debug, Serialize)]
pub struct FieldReport {
    pub field: String,
    pub n: usize,
    pub r2: usize,
    #[serde(serialize_with = "crate::rational::ser::big")]
    pub discriminant: BigInt,
    /// `δ = |Δ|^{1/n}`.
    pub delta: Interval,
    pub mu_interval: Interval,
    pub cover_mode: CoverMode,
    pub deep_hole: Vec<String>,
    #[serde(serialize_with = "crate::rational::ser::q")]
    pub shortest_l2_sq: Q,
    pub shortest_l2: Interval,
    /// `μ/√n`.
    pub d: Interval,
    pub min_norm: MinNormCheck,
    pub volume: VolumeBound,
    /// `2μ ≥ ‖shortest‖₂`.
    pub packing_le_covering: bool,
}

pub fn field_report(field: &NumberField, prec: u32, budget: u64) -> Result<FieldReport> {
    let n = field.degree();
    let r2 = field.r2()?;
    let disc = field.discriminant()?;
    let det = linalg::det(&field.minkowski_gram()?);
    if det * pow2(2 * r2 as i64) != q_from_big(&disc) {
        return Err(Error::Internal(format!("covolume of {field} disagrees with its discriminant")));
    }
    let mn = min_norm_check(field, prec, budget)?;
    let cover = covering_radius_field(field, prec, budget)?;
    let volume = volbound_eval(field, &cover, prec)?;
    let nq = q_int(n as i64);
    let d = Interval::new(&cover.sq_lower / &nq, &cover.sq_upper / &nq).sqrt(prec);
    // (2μ)² ≥ min² on the lower end of the bracket
    let packing = qcmp(&(q_int(4) * &cover.sq_upper), &mn.min_sq).is_ge();
    Ok(FieldReport {
        field: field.to_string(),
        n,
        r2,
        delta: Interval::point(q_from_big(&disc)).nth_root(n as u32, prec),
        discriminant: disc,
        mu_interval: cover.radius.clone(),
        cover_mode: cover.mode,
        deep_hole: cover.deep_hole.iter().map(format_q).collect(),
        shortest_l2_sq: mn.min_sq.clone(),
        shortest_l2: mn.min_l2.clone(),
        d,
        min_norm: mn,
        volume,
        packing_le_covering: packing,
    })
}

// ---------------------------------------------------------------------------
// Cyclotomic root discriminants

/// `log δ(Q(ζ_m)) = Σ_p c_p log p` with `c_p = r_p − 1/(p−1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogCombination {
    pub terms: BTreeMap<u64, Q>,
}

impl LogCombination {
    pub fn eval(&self, prec: u32) -> Interval {
        let mut acc = Interval::zero();
        for (p, c) in &self.terms {
            if !c.is_zero() {
                acc = &acc + &ln_prime(*p, prec).scale(c);
            }
        }
        acc.round(prec)
    }

    fn sub_scaled(&self, o: &LogCombination, k: &Q) -> LogCombination {
        let mut terms = self.terms.clone();
        for (p, c) in &o.terms {
            *terms.entry(*p).or_insert_with(Q::zero) -= c * k;
        }
        terms.retain(|_, c| !c.is_zero());
        LogCombination { terms }
    }

    /// `∏ p^{k·c_p}` when every exponent is an integer.
    pub fn exp_scaled(&self, k: u64) -> Option<Q> {
        let mut acc = Q::one();
        for (p, c) in &self.terms {
            let e = c * q_int(k as i64);
            if !e.is_integer() {
                return None;
            }
            let e = e.to_integer().to_i64()?;
            acc *= pow_q(&q_int(*p as i64), e);
        }
        Some(acc)
    }
}

fn pow_q(b: &Q, e: i64) -> Q {
    let p = num_traits::pow(b.clone(), e.unsigned_abs() as usize);
    if e < 0 {
        Q::one() / p
    } else {
        p
    }
}

fn log_of_integer(n: u64) -> LogCombination {
    LogCombination { terms: factor_u64(n).into_iter().map(|(p, e)| (p, q_int(e as i64))).collect() }
}

fn ln_prime(p: u64, prec: u32) -> Interval {
    Interval::from_int(p as i64).ln(prec).expect("primes are positive")
}

/// `atanh(num/den) ∈ [lo, hi] / 2^bits` for `0 < num/den ≤ 1/3`, by the odd
/// power series in integer fixed point. Each truncated power is within
/// `k+1` units of the exact one, each term within 2, and the tail is at
/// most the last power.
fn atanh_fixed(num: u64, den: u64, bits: u32) -> (BigInt, BigInt) {
    let (n, d) = (BigInt::from(num), BigInt::from(den));
    let (n2, d2) = (&n * &n, &d * &d);
    let mut pw = (BigInt::one() << bits as usize) * &n / &d;
    let mut sum = BigInt::zero();
    let mut k: u64 = 0;
    while !pw.is_zero() {
        sum += &pw / (2 * k + 1);
        pw = pw * &n2 / &d2;
        k += 1;
    }
    let err = BigInt::from(2 * k + 2);
    (&sum - &err, sum + &err + BigInt::from(k + 1))
}

/// `ln p ∈ [lo, hi] / 2^bits` for every prime in range, chained as
/// `ln p = ln q + ln(p/q)` so each step is a short series; the widths add
/// up linearly along the chain.
struct LnTable {
    bits: u32,
    fixed: BTreeMap<u64, (BigInt, BigInt)>,
}

impl LnTable {
    fn new(primes: &[u64], prec: u32) -> LnTable {
        let work = prec + 32;
        let mut fixed = BTreeMap::new();
        let (mut lo, mut hi) = (BigInt::zero(), BigInt::zero());
        let mut q = 1u64;
        for &p in primes {
            // ln p − ln q = 2 atanh((p−q)/(p+q))
            let (a, b) = atanh_fixed(p - q, p + q, work);
            lo += a << 1;
            hi += b << 1;
            let shift = (work - prec) as usize;
            fixed.insert(p, (&lo >> shift, -((-&hi) >> shift)));
            q = p;
        }
        LnTable { bits: prec, fixed }
    }

    /// Enclosure of `Σ c_p ln p` as integers over `den · 2^bits`.
    fn enclose(&self, c: &LogCombination) -> (BigInt, BigInt, BigInt) {
        let den = c.terms.values().fold(BigInt::one(), |a, q| a.lcm(q.denom()));
        let mut lo = BigInt::zero();
        let mut hi = BigInt::zero();
        for (p, q) in &c.terms {
            let k = q.numer() * (&den / q.denom());
            let (l, h) = &self.fixed[p];
            if k.is_negative() {
                lo += &k * h;
                hi += &k * l;
            } else {
                lo += &k * l;
                hi += &k * h;
            }
        }
        (lo, hi, den)
    }

    fn interval(&self, c: &LogCombination) -> Interval {
        let (lo, hi, den) = self.enclose(c);
        let d = den << self.bits as usize;
        Interval::new(Q::new(lo, d.clone()), Q::new(hi, d))
    }
}

pub fn cyclo_log_root_disc(m: u64) -> LogCombination {
    LogCombination {
        terms: factor_u64(m).into_iter().map(|(p, r)| (p, q_int(r as i64) - q_frac(1, p as i64 - 1))).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PrimeTerm {
    pub p: u64,
    pub r: u32,
    /// `e(p, r) = (εr − 1/(p−1)) log p`.
    pub e: Interval,
}

#[derive(Clone, Debug, Serialize)]
pub struct CycloRow {
    pub m: u64,
    pub phi_m: u64,
    pub log_delta: Interval,
    /// `(1−ε) log φ(m)`.
    pub threshold: Interval,
    pub holds: bool,
    pub terms: Vec<PrimeTerm>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CycloScan {
    pub min_m: u64,
    pub max_m: u64,
    #[serde(serialize_with = "crate::rational::ser::q")]
    pub epsilon: Q,
    /// Failures within the scanned range only.
    pub exceptional: Vec<u64>,
    pub max_failing: Option<u64>,
    pub rows: Vec<CycloRow>,
}

pub const CYCLO_COLUMNS: [&str; 6] = ["m", "phi_m", "log_delta", "threshold", "verdict", "exceptional_flag"];

/// Parses ε as an exact rational (`0.1`, `1/10`).
pub fn parse_epsilon(s: &str) -> Result<Q> {
    let e = parse_q(s)?;
    if !e.is_positive() {
        return Err(Error::Validation("epsilon must be positive".into()));
    }
    Ok(e)
}

fn cyclo_row(m: u64, eps: &Q, table: &LnTable) -> Result<CycloRow> {
    let phi = euler_phi(m);
    let ld = cyclo_log_root_disc(m);
    let one_minus = Q::one() - eps;
    let ln_phi = log_of_integer(phi);
    let threshold = ln_phi.sub_scaled(&ln_phi, eps);
    let diff = ld.sub_scaled(&ln_phi, &one_minus);
    // logs of distinct primes are independent over Q, so a zero
    // combination is the only way to get equality
    let holds = if diff.terms.is_empty() {
        true
    } else {
        let (lo, hi, _) = table.enclose(&diff);
        if lo.is_positive() {
            true
        } else if hi.is_negative() {
            false
        } else {
            decide_sign(2 * table.bits, |p| diff.eval(p))? > 0
        }
    };
    let terms = factor_u64(m)
        .into_iter()
        .map(|(p, r)| {
            let c = LogCombination { terms: [(p, eps * q_int(r as i64) - q_frac(1, p as i64 - 1))].into() };
            PrimeTerm { p, r, e: table.interval(&c) }
        })
        .collect();
    Ok(CycloRow { m, phi_m: phi, log_delta: table.interval(&ld), threshold: table.interval(&threshold), holds, terms })
}

/// Checks `δ(Q(ζ_m)) ≥ φ(m)^{1−ε}` for every m in range, rows in parallel.
pub fn cyclo_scan(min_m: u64, max_m: u64, eps: &Q, prec: u32) -> Result<CycloScan> {
    if min_m == 0 || min_m > max_m {
        return Err(Error::Validation("need 1 ≤ min_m ≤ max_m".into()));
    }
    if !eps.is_positive() {
        return Err(Error::Validation("epsilon must be positive".into()));
    }
    let prec = prec.clamp(32, PRECISION_CAP);
    let primes = crate::rational::primes_up_to(max_m as usize);
    let table = LnTable::new(&primes, prec);
    let rows: Vec<CycloRow> =
        (min_m..=max_m).into_par_iter().map(|m| cyclo_row(m, eps, &table)).collect::<Result<_>>()?;
    let exceptional: Vec<u64> = rows.iter().filter(|r| !r.holds).map(|r| r.m).collect();
    Ok(CycloScan { min_m, max_m, epsilon: eps.clone(), max_failing: exceptional.last().copied(), exceptional, rows })
}

impl CycloScan {
    pub fn csv(&self) -> String {
        let mut out = CYCLO_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.m,
                r.phi_m,
                to_decimal(&r.log_delta.mid(), 12, false),
                to_decimal(&r.threshold.mid(), 12, false),
                if r.holds { "holds" } else { "fails" },
                u8::from(!r.holds)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_descriptors() {
        assert_eq!(NumberField::parse("Q").unwrap().degree(), 1);
        assert_eq!(NumberField::parse("Q(i)").unwrap().to_string(), "Q(i)");
        assert_eq!(NumberField::parse("Q(zeta_5)").unwrap().degree(), 4);
        assert_eq!(NumberField::parse("Q(zeta_6)").unwrap().degree(), 2);
        assert_eq!(NumberField::parse("{\"cyclotomic\":8}").unwrap().degree(), 4);
        assert_eq!(NumberField::parse("{\"level1\":[5,13]}").unwrap().degree(), 4);
        assert!(NumberField::parse("R").is_err());
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_half(2), (q_int(1), false));
        assert_eq!(gamma_half(1), (q_frac(1, 2), true));
        assert_eq!(gamma_half(3), (q_frac(3, 4), true));
        assert!((ball_volume(3, 64).to_f64() - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn small_log_root_discs() {
        assert!(cyclo_log_root_disc(1).terms.is_empty());
        assert_eq!(cyclo_log_root_disc(4).terms[&2], q_int(1));
        assert_eq!(cyclo_log_root_disc(3).terms[&3], q_frac(1, 2));
    }
}
