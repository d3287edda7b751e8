//! Exact arithmetic in two-step multiquadratic towers
//! `Q ⊂ L = Q(√m_1,…,√m_ℓ) ⊂ N = L(√w : w ∈ S₀)`.
//!
//! An element of `N` is stored densely over the basis `√m_D · q_T`, where `D`
//! and `T` are bit masks over the level-one generators and the second-step
//! units, and `q_T = ∏_{j∈T} √w_j`. Index `(T << ℓ) | D`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{decide_sign, Interval};
use crate::linalg;
use crate::rational::{format_q, is_perfect_square, is_squarefree, parse_q, q_from_big, rational_sqrt, Q};

/// Hard cap on `ℓ + #S₀`.
pub const MAX_TOTAL_GENERATORS: usize = 10;

// ---------------------------------------------------------------------------
// Dense arithmetic in a multiquadratic field over Q, used for L and its
// subfields. A vector of length 2^k holds coefficients of √m_D.

pub(crate) fn mprod_of(gens: &[BigInt]) -> Vec<BigInt> {
    let k = gens.len();
    let mut out = vec![BigInt::one(); 1 << k];
    for d in 1..(1usize << k) {
        let low = d.trailing_zeros() as usize;
        out[d] = &out[d & (d - 1)] * &gens[low];
    }
    out
}

pub(crate) fn lmul(x: &[Q], y: &[Q], mprod: &[BigInt]) -> Vec<Q> {
    let n = x.len();
    let mut out = vec![Q::zero(); n];
    for (d, xd) in x.iter().enumerate() {
        if xd.is_zero() {
            continue;
        }
        for (e, ye) in y.iter().enumerate() {
            if ye.is_zero() {
                continue;
            }
            let f = &mprod[d & e];
            out[d ^ e] += xd * ye * q_from_big(f);
        }
    }
    out
}

fn lis_zero(x: &[Q]) -> bool {
    x.iter().all(|c| c.is_zero())
}

pub(crate) fn linv(x: &[Q], mprod: &[BigInt]) -> Option<Vec<Q>> {
    let n = x.len();
    if n == 1 {
        return if x[0].is_zero() { None } else { Some(vec![x[0].recip()]) };
    }
    let h = n / 2;
    let (a, b) = x.split_at(h);
    let m = q_from_big(&mprod[h]);
    let a2 = lmul(a, a, mprod);
    let b2 = lmul(b, b, mprod);
    let nrm: Vec<Q> = a2.iter().zip(&b2).map(|(p, q)| p - &m * q).collect();
    let ninv = linv(&nrm, mprod)?;
    let mut out = lmul(a, &ninv, mprod);
    out.extend(lmul(b, &ninv, mprod).into_iter().map(|c| -c));
    Some(out)
}

/// Exact square root in a multiquadratic field, by descending through the
/// last generator: `(c + d√m)² = a + b√m` forces `c² = (a ± √(a² − m b²))/2`.
pub(crate) fn lsqrt(x: &[Q], mprod: &[BigInt]) -> Option<Vec<Q>> {
    let n = x.len();
    if n == 1 {
        return rational_sqrt(&x[0]).map(|r| vec![r]);
    }
    let h = n / 2;
    let (a, b) = x.split_at(h);
    let m = q_from_big(&mprod[h]);
    if lis_zero(b) {
        if let Some(c) = lsqrt(a, mprod) {
            let mut out = c;
            out.extend(std::iter::repeat_n(Q::zero(), h));
            return Some(out);
        }
        let am: Vec<Q> = a.iter().map(|c| c / &m).collect();
        let d = lsqrt(&am, mprod)?;
        let mut out = vec![Q::zero(); h];
        out.extend(d);
        return Some(out);
    }
    let a2 = lmul(a, a, mprod);
    let b2 = lmul(b, b, mprod);
    let nrm: Vec<Q> = a2.iter().zip(&b2).map(|(p, q)| p - &m * q).collect();
    let s = lsqrt(&nrm, mprod)?;
    let half = Q::new(1.into(), 2.into());
    for sign in [1i32, -1] {
        let t: Vec<Q> =
            a.iter().zip(&s).map(|(ai, si)| if sign > 0 { (ai + si) * &half } else { (ai - si) * &half }).collect();
        if lis_zero(&t) {
            continue;
        }
        if let Some(c) = lsqrt(&t, mprod) {
            let two_c: Vec<Q> = c.iter().map(|v| v * Q::from_integer(2.into())).collect();
            let inv = match linv(&two_c, mprod) {
                Some(i) => i,
                None => continue,
            };
            let d = lmul(b, &inv, mprod);
            let mut cand = c;
            cand.extend(d);
            if lmul(&cand, &cand, mprod) == x {
                return Some(cand);
            }
        }
    }
    None
}

/// Certified enclosure of a real embedding of a dense L-element. Embedding
/// `s` sends √m_i to `(-1)^{s_i} √m_i`; requires a totally real L.
pub(crate) fn eval_l_real(x: &[Q], mprod: &[BigInt], s: usize, prec: u32) -> Interval {
    let mut acc = Interval::zero();
    for (d, c) in x.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let root = Interval::point(q_from_big(&mprod[d])).sqrt(prec);
        let sign = if (d & s).count_ones() % 2 == 1 { -c.clone() } else { c.clone() };
        acc = &acc + &root.scale(&sign);
    }
    acc.round(prec)
}

// ---------------------------------------------------------------------------

/// A total order on subsets `T ⊆ S₀` extending inclusion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SubsetOrder {
    /// Sort by `(#T, binary encoding of T)`.
    #[default]
    CardinalityThenBinary,
    /// Sort by the binary encoding alone; also extends inclusion.
    Binary,
    /// Explicit sequence of masks; validated to extend inclusion.
    Explicit(Vec<u32>),
}

impl SubsetOrder {
    /// All subsets of an `s`-element set, ascending.
    pub fn sequence(&self, s: usize) -> Result<Vec<u32>> {
        let all: Vec<u32> = (0..(1u32 << s)).collect();
        let seq = match self {
            SubsetOrder::CardinalityThenBinary => {
                let mut v = all;
                v.sort_by_key(|&t| (t.count_ones(), t));
                v
            }
            SubsetOrder::Binary => all,
            SubsetOrder::Explicit(v) => {
                let mut sorted = v.clone();
                sorted.sort_unstable();
                if sorted != all {
                    return Err(Error::Validation("explicit subset order must list every subset exactly once".into()));
                }
                v.clone()
            }
        };
        for (i, &t) in seq.iter().enumerate() {
            for &u in &seq[..i] {
                if u & t == t && u != t {
                    return Err(Error::Validation(format!("subset order places {u:#b} before its subset {t:#b}")));
                }
            }
        }
        Ok(seq)
    }
}

/// Global complex conjugation ι of a tower, when one exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conjugation {
    /// Generators √m_i negated by ι.
    pub flip_d: u32,
    /// Units √w_j negated by ι.
    pub flip_t: u32,
    /// Constant `c` in `⟨α, β⟩ = c · Tr(α ι(β))`: ½ when totally complex, 1 when totally real.
    pub scale: Q,
    pub totally_complex: bool,
}

pub struct TowerData {
    level1: Vec<BigInt>,
    units: Vec<Vec<Q>>,
    mprod: Vec<BigInt>,
    wprod: Vec<Vec<Q>>,
    unit_signs: OnceLock<Result<Vec<Vec<i8>>>>,
    pub(crate) cache: crate::integers::TowerCache,
}

/// Descriptor of a tower `N/L/Q`; cheap to clone and share.
#[derive(Clone)]
pub struct Tower(Arc<TowerData>);

impl PartialEq for Tower {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.level1 == other.0.level1 && self.0.units == other.0.units)
    }
}

impl Eq for Tower {}

impl fmt::Debug for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tower(level1={:?}, #S0={})", self.0.level1, self.0.units.len())
    }
}

impl Tower {
    /// The rational field.
    pub fn rational() -> Tower {
        Tower::base(&[]).expect("Q is a valid tower")
    }

    pub fn base_i64(level1: &[i64]) -> Result<Tower> {
        let v: Vec<BigInt> = level1.iter().map(|&m| BigInt::from(m)).collect();
        Tower::base(&v)
    }

    /// `L = Q(√m_1,…,√m_ℓ)` with no second step.
    pub fn base(level1: &[BigInt]) -> Result<Tower> {
        Tower::build(level1.to_vec(), Vec::new())
    }

    /// `N = L(√w : w ∈ units)` where every unit is an element of `L`.
    pub fn with_units(level1: &[BigInt], units: &[FieldElement]) -> Result<Tower> {
        let mut dense = Vec::with_capacity(units.len());
        for (j, u) in units.iter().enumerate() {
            if u.tower().level1() != level1 {
                return Err(Error::TowerMismatch);
            }
            if !u.in_l() {
                return Err(Error::Validation(format!("second-step element {j} does not lie in L")));
            }
            dense.push(u.l_part(0));
        }
        Tower::build(level1.to_vec(), dense)
    }

    fn build(level1: Vec<BigInt>, units: Vec<Vec<Q>>) -> Result<Tower> {
        let ell = level1.len();
        if ell + units.len() > MAX_TOTAL_GENERATORS {
            return Err(Error::Capacity(format!(
                "tower with {} generators exceeds the cap of {MAX_TOTAL_GENERATORS}",
                ell + units.len()
            )));
        }
        for (i, m) in level1.iter().enumerate() {
            if m.is_zero() || !is_squarefree(m) {
                return Err(Error::Validation(format!(
                    "generator m_{} = {m} is not a nonzero squarefree integer",
                    i + 1
                )));
            }
            for m2 in &level1[..i] {
                if !m.gcd(m2).is_one() {
                    return Err(Error::Validation(format!("generators {m2} and {m} are not coprime")));
                }
            }
        }
        let mprod = mprod_of(&level1);
        for (d, md) in mprod.iter().enumerate().skip(1) {
            if is_perfect_square(md) {
                return Err(Error::Validation(format!(
                    "generators are multiplicatively dependent (subset {d:#b} has square product {md})"
                )));
            }
        }
        let nl = 1usize << ell;
        for (j, u) in units.iter().enumerate() {
            if u.len() != nl {
                return Err(Error::Validation(format!("unit {j} has {} coefficients, expected {nl}", u.len())));
            }
            if lis_zero(u) {
                return Err(Error::Validation(format!("unit {j} is zero")));
            }
        }
        // the second step has full degree iff the units are independent mod squares
        let s = units.len();
        let mut wprod = vec![Vec::new(); 1 << s];
        let mut one = vec![Q::zero(); nl];
        one[0] = Q::one();
        wprod[0] = one;
        for t in 1..(1usize << s) {
            let low = t.trailing_zeros() as usize;
            wprod[t] = lmul(&wprod[t & (t - 1)], &units[low], &mprod);
            if lsqrt(&wprod[t], &mprod).is_some() {
                return Err(Error::Validation(format!(
                    "second-step elements are dependent modulo squares (subset {t:#b} multiplies to a square)"
                )));
            }
        }
        Ok(Tower(Arc::new(TowerData {
            level1,
            units,
            mprod,
            wprod,
            unit_signs: OnceLock::new(),
            cache: Default::default(),
        })))
    }

    pub(crate) fn data(&self) -> &TowerData {
        &self.0
    }

    pub fn level1(&self) -> &[BigInt] {
        &self.0.level1
    }

    pub fn ell(&self) -> usize {
        self.0.level1.len()
    }

    pub fn num_units(&self) -> usize {
        self.0.units.len()
    }

    pub fn degree_l(&self) -> usize {
        1 << self.ell()
    }

    pub fn degree(&self) -> usize {
        1 << (self.ell() + self.num_units())
    }

    /// `m_D = ∏_{i∈D} m_i`.
    pub fn m_d(&self, d: usize) -> &BigInt {
        &self.0.mprod[d]
    }

    pub(crate) fn mprod(&self) -> &[BigInt] {
        &self.0.mprod
    }

    /// `w_T = ∏_{j∈T} w_j` as a dense L-vector.
    pub(crate) fn w_dense(&self, t: usize) -> &[Q] {
        &self.0.wprod[t]
    }

    pub fn base_tower(&self) -> Tower {
        if self.num_units() == 0 {
            return self.clone();
        }
        Tower::base(&self.0.level1).expect("level-one data was already validated")
    }

    /// The second-step units as elements of the base field L.
    pub fn units_in_l(&self) -> Vec<FieldElement> {
        let b = self.base_tower();
        self.0.units.iter().map(|u| b.from_l(u.clone())).collect()
    }

    /// All level-one generators are distinct primes ≡ 1 mod 4.
    pub fn primes_one_mod_four(&self) -> bool {
        self.ell() >= 1
            && self.0.level1.iter().all(|m| {
                m.is_positive()
                    && m.mod_floor(&BigInt::from(4)) == BigInt::one()
                    && m.to_u64().is_some_and(crate::rational::is_prime_u64)
            })
    }

    pub fn l_totally_real(&self) -> bool {
        self.0.level1.iter().all(|m| m.is_positive())
    }

    /// Sign of every unit under each real embedding of a totally real L.
    /// Entry `[j][s]` is the sign of `σ_s(w_j)`.
    pub fn unit_signs(&self) -> Result<&Vec<Vec<i8>>> {
        let r = self.0.unit_signs.get_or_init(|| {
            if !self.l_totally_real() {
                return Err(Error::NotCm("base field is not totally real".into()));
            }
            let mut out = Vec::new();
            for u in &self.0.units {
                let mut signs = Vec::with_capacity(self.degree_l());
                for s in 0..self.degree_l() {
                    let sg = decide_sign(64, |p| eval_l_real(u, &self.0.mprod, s, p))?;
                    signs.push(sg as i8);
                }
                out.push(signs);
            }
            Ok(out)
        });
        r.as_ref().map_err(|e| e.clone())
    }

    /// The global complex conjugation, when every embedding conjugates the
    /// same way: either L totally real with each unit totally positive or
    /// totally negative, or L imaginary with no second step.
    pub fn conjugation(&self) -> Result<Conjugation> {
        let half = Q::new(1.into(), 2.into());
        if !self.l_totally_real() {
            if self.num_units() > 0 {
                return Err(Error::NotCm("imaginary base field with a nontrivial second step".into()));
            }
            let flip_d = self
                .0
                .level1
                .iter()
                .enumerate()
                .filter(|(_, m)| m.is_negative())
                .fold(0u32, |acc, (i, _)| acc | (1 << i));
            return Ok(Conjugation { flip_d, flip_t: 0, scale: half, totally_complex: true });
        }
        let signs = self.unit_signs()?;
        let mut flip_t = 0u32;
        for (j, sv) in signs.iter().enumerate() {
            if sv.iter().all(|&s| s < 0) {
                flip_t |= 1 << j;
            } else if !sv.iter().all(|&s| s > 0) {
                return Err(Error::NotCm(format!("unit w_{j} is neither totally positive nor totally negative")));
            }
        }
        let tc = flip_t != 0;
        Ok(Conjugation { flip_d: 0, flip_t, scale: if tc { half } else { Q::one() }, totally_complex: tc })
    }

    /// `(r₁, r₂)` for N.
    pub fn signature(&self) -> Result<(usize, usize)> {
        let n = self.degree();
        if !self.l_totally_real() {
            return Ok((0, n / 2));
        }
        let signs = self.unit_signs()?;
        let mut real_l = 0;
        for s in 0..self.degree_l() {
            if signs.iter().all(|sv| sv[s] > 0) {
                real_l += 1;
            }
        }
        let r1 = real_l << self.num_units();
        Ok((r1, (n - r1) / 2))
    }

    // -- element constructors ------------------------------------------------

    pub fn zero(&self) -> FieldElement {
        FieldElement { tower: self.clone(), c: vec![Q::zero(); self.degree()] }
    }

    pub fn one(&self) -> FieldElement {
        self.from_q(Q::one())
    }

    pub fn from_q(&self, q: Q) -> FieldElement {
        let mut e = self.zero();
        e.c[0] = q;
        e
    }

    pub fn from_int(&self, n: i64) -> FieldElement {
        self.from_q(Q::from_integer(n.into()))
    }

    /// Basis element `√m_D · q_T`.
    pub fn basis(&self, t: usize, d: usize) -> FieldElement {
        let mut e = self.zero();
        e.c[(t << self.ell()) | d] = Q::one();
        e
    }

    pub fn sqrt_m(&self, d: usize) -> FieldElement {
        self.basis(0, d)
    }

    pub fn q_t(&self, t: usize) -> FieldElement {
        self.basis(t, 0)
    }

    /// Element of L from a dense vector over `√m_D`.
    pub fn from_l(&self, x: Vec<Q>) -> FieldElement {
        assert_eq!(x.len(), self.degree_l());
        let mut e = self.zero();
        for (d, c) in x.into_iter().enumerate() {
            e.c[d] = c;
        }
        e
    }

    /// Element from its L-components: `Σ_T x_T q_T`.
    pub fn from_l_parts(&self, parts: Vec<Vec<Q>>) -> FieldElement {
        assert_eq!(parts.len(), 1 << self.num_units());
        let mut c = Vec::with_capacity(self.degree());
        for p in parts {
            assert_eq!(p.len(), self.degree_l());
            c.extend(p);
        }
        FieldElement { tower: self.clone(), c }
    }

    pub fn from_coeffs(&self, c: Vec<Q>) -> Result<FieldElement> {
        if c.len() != self.degree() {
            return Err(Error::Validation(format!("expected {} coefficients, got {}", self.degree(), c.len())));
        }
        Ok(FieldElement { tower: self.clone(), c })
    }

    /// The unit `w_j` as an element of N.
    pub fn w(&self, j: usize) -> FieldElement {
        self.from_l(self.0.units[j].clone())
    }

    // -- JSON ----------------------------------------------------------------

    pub fn to_json(&self) -> TowerJson {
        let b = self.base_tower();
        TowerJson {
            level1: self.0.level1.clone(),
            level2_units: self.0.units.iter().map(|u| b.from_l(u.clone()).to_json()).collect(),
        }
    }

    pub fn from_json(j: &TowerJson) -> Result<Tower> {
        let b = Tower::base(&j.level1)?;
        let units = j.level2_units.iter().map(|u| b.element_from_json(u)).collect::<Result<Vec<_>>>()?;
        Tower::with_units(&j.level1, &units)
    }

    pub fn element_from_json(&self, j: &ElementJson) -> Result<FieldElement> {
        let mut e = self.zero();
        for (key, val) in j.entries()? {
            let (ts, ds) = key;
            let mut t = 0usize;
            for i in ts {
                if i >= self.num_units() {
                    return Err(Error::Validation(format!("unit index {i} out of range")));
                }
                t |= 1 << i;
            }
            let mut d = 0usize;
            for i in ds {
                if i >= self.ell() {
                    return Err(Error::Validation(format!("generator index {i} out of range")));
                }
                d |= 1 << i;
            }
            e.c[(t << self.ell()) | d] += parse_q(&val)?;
        }
        Ok(e)
    }

    /// Parses expressions such as `(1+sqrt(5))/2`, `-1`, `sqrt(-5)*q(0)`,
    /// `w(0)^2`. `sqrt(k)` accepts `k = m_D · j²` for a subset product `m_D`.
    pub fn parse_element(&self, s: &str) -> Result<FieldElement> {
        let mut p = ExprParser { tower: self, s: s.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(Error::Parse(format!("trailing input at byte {} in {s:?}", p.pos)));
        }
        Ok(e)
    }

    /// `sqrt(k)` as an element, when `k = m_D · j²`.
    pub fn sqrt_of_int(&self, k: &BigInt) -> Result<FieldElement> {
        if k.is_zero() {
            return Ok(self.zero());
        }
        for (d, md) in self.0.mprod.iter().enumerate() {
            if (k % md).is_zero() {
                let r = k / md;
                if let Some(j) = rational_sqrt(&q_from_big(&r)) {
                    let mut e = self.zero();
                    e.c[d] = j;
                    return Ok(e);
                }
            }
        }
        Err(Error::Validation(format!("sqrt({k}) does not lie in this field")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerJson {
    #[serde(with = "bigint_vec")]
    pub level1: Vec<BigInt>,
    #[serde(default)]
    pub level2_units: Vec<ElementJson>,
}

mod bigint_vec {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let vals: Vec<serde_json::Value> = v
            .iter()
            .map(|b| match i64::try_from(b) {
                Ok(x) => serde_json::Value::from(x),
                Err(_) => serde_json::Value::from(b.to_string()),
            })
            .collect();
        vals.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let vals = Vec::<serde_json::Value>::deserialize(d)?;
        vals.into_iter()
            .map(|v| match v {
                serde_json::Value::Number(n) => {
                    n.as_i64().map(BigInt::from).ok_or_else(|| serde::de::Error::custom("generator must be an integer"))
                }
                serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
                _ => Err(serde::de::Error::custom("generator must be an integer")),
            })
            .collect()
    }
}

/// Sparse JSON form: `{"coeffs": [[[[T…],[D…]], "p/q"], …]}`. A single bare
/// pair `[[[T…],[D…]], "p/q"]` is also accepted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementJson {
    pub coeffs: serde_json::Value,
}

type KeyIdx = (Vec<usize>, Vec<usize>);

impl ElementJson {
    fn entries(&self) -> Result<Vec<(KeyIdx, String)>> {
        let bad = || Error::Parse("malformed coefficient list".into());
        let arr = self.coeffs.as_array().ok_or_else(bad)?;
        let pairs: Vec<&serde_json::Value> =
            if arr.len() == 2 && arr[1].is_string() { vec![&self.coeffs] } else { arr.iter().collect() };
        let mut out = Vec::new();
        for p in pairs {
            let (key, val): (KeyIdx, serde_json::Value) = serde_json::from_value(p.clone()).map_err(|_| bad())?;
            let val = match val {
                serde_json::Value::String(s) => s,
                serde_json::Value::Number(n) => n.to_string(),
                _ => return Err(bad()),
            };
            out.push((key, val));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------

/// Exact element of a tower.
#[derive(Clone)]
pub struct FieldElement {
    tower: Tower,
    c: Vec<Q>,
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.tower == other.tower && self.c == other.c
    }
}

impl Eq for FieldElement {}

impl FieldElement {
    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.c
    }

    pub fn coeff(&self, t: usize, d: usize) -> &Q {
        &self.c[(t << self.tower.ell()) | d]
    }

    pub fn is_zero(&self) -> bool {
        lis_zero(&self.c)
    }

    pub fn is_one(&self) -> bool {
        self.c[0].is_one() && self.c[1..].iter().all(|x| x.is_zero())
    }

    pub fn as_rational(&self) -> Option<&Q> {
        if self.c[1..].iter().all(|x| x.is_zero()) {
            Some(&self.c[0])
        } else {
            None
        }
    }

    /// True when all `q_T`-components with `T ≠ ∅` vanish.
    pub fn in_l(&self) -> bool {
        self.c[self.tower.degree_l()..].iter().all(|x| x.is_zero())
    }

    /// The L-coefficient of `q_T`, as a dense vector.
    pub fn l_part(&self, t: usize) -> Vec<Q> {
        let nl = self.tower.degree_l();
        self.c[t * nl..(t + 1) * nl].to_vec()
    }

    pub fn l_parts(&self) -> Vec<Vec<Q>> {
        (0..(1 << self.tower.num_units())).map(|t| self.l_part(t)).collect()
    }

    fn check(&self, other: &FieldElement) -> Result<()> {
        if self.tower == other.tower {
            Ok(())
        } else {
            Err(Error::TowerMismatch)
        }
    }

    pub fn checked_add(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check(other)?;
        Ok(self + other)
    }

    pub fn checked_sub(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check(other)?;
        Ok(self - other)
    }

    pub fn checked_mul(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &FieldElement) -> FieldElement {
        let tw = &self.tower;
        let ell = tw.ell();
        let nl = tw.degree_l();
        let mprod = tw.mprod();
        let mut out = vec![Q::zero(); tw.degree()];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let (t1, d1) = (i >> ell, i & (nl - 1));
            for (j, b) in other.c.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let (t2, d2) = (j >> ell, j & (nl - 1));
                let coef = a * b * q_from_big(&mprod[d1 & d2]);
                let dd = d1 ^ d2;
                let base = (t1 ^ t2) << ell;
                let w = tw.w_dense(t1 & t2);
                for (e, we) in w.iter().enumerate() {
                    if we.is_zero() {
                        continue;
                    }
                    out[base | (dd ^ e)] += &coef * we * q_from_big(&mprod[dd & e]);
                }
            }
        }
        FieldElement { tower: tw.clone(), c: out }
    }

    pub fn scale(&self, q: &Q) -> FieldElement {
        FieldElement { tower: self.tower.clone(), c: self.c.iter().map(|x| x * q).collect() }
    }

    /// Matrix of multiplication by `self`; column `j` holds `self · e_j`.
    pub fn mul_matrix(&self) -> linalg::Mat {
        let n = self.tower.degree();
        let cols: Vec<Vec<Q>> = (0..n)
            .map(|j| {
                let mut e = self.tower.zero();
                e.c[j] = Q::one();
                self.mul_unchecked(&e).c
            })
            .collect();
        linalg::transpose(&cols)
    }

    /// Inverse by solving the multiplication-matrix system `M x = e_0`.
    pub fn inverse(&self) -> Result<FieldElement> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if let Some(q) = self.as_rational() {
            return Ok(self.tower.from_q(q.recip()));
        }
        let m = self.mul_matrix();
        let mut rhs = vec![Q::zero(); self.tower.degree()];
        rhs[0] = Q::one();
        let x = linalg::solve(&m, &rhs)
            .ok_or_else(|| Error::Internal("multiplication matrix of a nonzero element is singular".into()))?;
        Ok(FieldElement { tower: self.tower.clone(), c: x })
    }

    pub fn checked_div(&self, other: &FieldElement) -> Result<FieldElement> {
        self.checked_mul(&other.inverse()?)
    }

    pub fn pow(&self, e: i64) -> Result<FieldElement> {
        let base = if e < 0 { self.inverse()? } else { self.clone() };
        let mut k = e.unsigned_abs();
        let mut acc = self.tower.one();
        let mut b = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul_unchecked(&b);
            }
            k >>= 1;
            if k > 0 {
                b = b.mul_unchecked(&b);
            }
        }
        Ok(acc)
    }

    /// `Tr_{N/Q}`: only the constant coefficient survives.
    pub fn trace(&self) -> Q {
        &self.c[0] * Q::from_integer(self.tower.degree().into())
    }

    /// `Norm_{N/Q}` as the determinant of the multiplication matrix.
    pub fn norm(&self) -> Q {
        if let Some(q) = self.as_rational() {
            let mut r = Q::one();
            for _ in 0..self.tower.degree() {
                r *= q;
            }
            return r;
        }
        linalg::det(&self.mul_matrix())
    }

    pub fn apply_iota(&self) -> Result<FieldElement> {
        let cj = self.tower.conjugation()?;
        Ok(self.apply_conjugation(&cj))
    }

    pub(crate) fn apply_conjugation(&self, cj: &Conjugation) -> FieldElement {
        let ell = self.tower.ell();
        let nl = self.tower.degree_l();
        let c = self
            .c
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let (t, d) = (i >> ell, i & (nl - 1));
                let flips = (t as u32 & cj.flip_t).count_ones() + (d as u32 & cj.flip_d).count_ones();
                if flips % 2 == 1 {
                    -x.clone()
                } else {
                    x.clone()
                }
            })
            .collect();
        FieldElement { tower: self.tower.clone(), c }
    }

    /// `⟨α, β⟩ = c · Tr(α ι(β))` with `c = ½` for totally complex towers.
    pub fn inner(&self, other: &FieldElement) -> Result<Q> {
        self.check(other)?;
        let cj = self.tower.conjugation()?;
        Ok(self.inner_with(other, &cj))
    }

    pub(crate) fn inner_with(&self, other: &FieldElement, cj: &Conjugation) -> Q {
        // only the constant coefficient of α ι(β) is needed
        let tw = &self.tower;
        let ell = tw.ell();
        let nl = tw.degree_l();
        let mprod = tw.mprod();
        let mut c0 = Q::zero();
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let (t, d) = (i >> ell, i & (nl - 1));
            // partners (t', d') with t' = t; the product lands in w_t · √m_{d⊕d'}
            let w = tw.w_dense(t);
            for (dp, b) in other.c[t * nl..(t + 1) * nl].iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let dd = d ^ dp;
                // constant term of √m_dd · w_t is w_t[dd] · m_dd
                if w[dd].is_zero() {
                    continue;
                }
                let flips = (t as u32 & cj.flip_t).count_ones() + (dp as u32 & cj.flip_d).count_ones();
                let mut term = a * b * q_from_big(&mprod[d & dp]) * &w[dd] * q_from_big(&mprod[dd]);
                if flips % 2 == 1 {
                    term = -term;
                }
                c0 += term;
            }
        }
        c0 * Q::from_integer(tw.degree().into()) * &cj.scale
    }

    /// Sign changes `√m_i ↦ -√m_i` for `i ∈ flip`, on an element of L.
    pub fn galois_l(&self, flip: usize) -> Result<FieldElement> {
        if !self.in_l() {
            return Err(Error::Validation("Galois action of L applied to an element outside L".into()));
        }
        let mut e = self.clone();
        for d in 0..self.tower.degree_l() {
            if (d & flip).count_ones() % 2 == 1 {
                e.c[d] = -e.c[d].clone();
            }
        }
        Ok(e)
    }

    /// Exact square root of an element of L, when it is a square in L.
    pub fn sqrt_in_l(&self) -> Result<Option<FieldElement>> {
        if !self.in_l() {
            return Err(Error::Validation("square test in L applied to an element outside L".into()));
        }
        Ok(lsqrt(&self.l_part(0), self.tower.mprod()).map(|r| self.tower.from_l(r)))
    }

    /// Re-homes an element of L in another tower over the same L.
    pub fn to_tower(&self, other: &Tower) -> Result<FieldElement> {
        if other.level1() != self.tower.level1() {
            return Err(Error::TowerMismatch);
        }
        if !self.in_l() {
            return Err(Error::Validation("only elements of L can move between towers".into()));
        }
        Ok(other.from_l(self.l_part(0)))
    }

    pub fn to_base(&self) -> Result<FieldElement> {
        self.to_tower(&self.tower.base_tower())
    }

    pub fn to_json(&self) -> ElementJson {
        let ell = self.tower.ell();
        let nl = self.tower.degree_l();
        let mut entries = Vec::new();
        for (i, x) in self.c.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let (t, d) = (i >> ell, i & (nl - 1));
            let ts: Vec<usize> = (0..self.tower.num_units()).filter(|j| t >> j & 1 == 1).collect();
            let ds: Vec<usize> = (0..ell).filter(|j| d >> j & 1 == 1).collect();
            entries.push(serde_json::json!([[ts, ds], format_q(x)]));
        }
        ElementJson { coeffs: serde_json::Value::Array(entries) }
    }
}

impl Add for &FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: &FieldElement) -> FieldElement {
        assert!(self.tower == rhs.tower, "elements belong to different towers");
        FieldElement { tower: self.tower.clone(), c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: &FieldElement) -> FieldElement {
        assert!(self.tower == rhs.tower, "elements belong to different towers");
        FieldElement { tower: self.tower.clone(), c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: &FieldElement) -> FieldElement {
        assert!(self.tower == rhs.tower, "elements belong to different towers");
        self.mul_unchecked(rhs)
    }
}

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        FieldElement { tower: self.tower.clone(), c: self.c.iter().map(|a| -a).collect() }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ell = self.tower.ell();
        let nl = self.tower.degree_l();
        let mut first = true;
        for (i, x) in self.c.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let (t, d) = (i >> ell, i & (nl - 1));
            let mut factors = Vec::new();
            if d != 0 {
                factors.push(format!("sqrt({})", self.tower.m_d(d)));
            }
            if t != 0 {
                let idx: Vec<String> =
                    (0..self.tower.num_units()).filter(|j| t >> j & 1 == 1).map(|j| j.to_string()).collect();
                factors.push(format!("q({})", idx.join(",")));
            }
            let neg = x.is_negative();
            let a = x.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            first = false;
            let coef = if a.is_integer() { a.numer().to_string() } else { format!("({})", a) };
            if factors.is_empty() {
                write!(f, "{coef}")?;
            } else if a.is_one() {
                write!(f, "{}", factors.join("*"))?;
            } else {
                write!(f, "{coef}*{}", factors.join("*"))?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

// ---------------------------------------------------------------------------

struct ExprParser<'a> {
    tower: &'a Tower,
    s: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at byte {}", self.pos))
    }

    fn expect(&mut self, b: u8) -> Result<()> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", b as char)))
        }
    }

    fn expr(&mut self) -> Result<FieldElement> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<FieldElement> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = &acc * &self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let d = self.unary()?;
                    acc = acc.checked_div(&d)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<FieldElement> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-&self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<FieldElement> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let neg = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let e = self.integer()?;
            let e = e.to_i64().ok_or_else(|| self.err("exponent too large"))?;
            return base.pow(if neg { -e } else { e });
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().map_err(|_| self.err("bad integer"))
    }

    fn signed_integer(&mut self) -> Result<BigInt> {
        let neg = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let v = self.integer()?;
        Ok(if neg { -v } else { v })
    }

    fn index_list(&mut self) -> Result<Vec<usize>> {
        self.expect(b'(')?;
        let mut out = Vec::new();
        if self.peek() == Some(b')') {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            let i = self.integer()?.to_usize().ok_or_else(|| self.err("index too large"))?;
            out.push(i);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(self.err("expected ',' or ')'")),
            }
        }
    }

    fn atom(&mut self) -> Result<FieldElement> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
                    self.pos += 1;
                }
                let txt = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                Ok(self.tower.from_q(parse_q(txt)?))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string();
                match name.as_str() {
                    "sqrt" => {
                        self.expect(b'(')?;
                        let k = self.signed_integer()?;
                        self.expect(b')')?;
                        self.tower.sqrt_of_int(&k)
                    }
                    "q" => {
                        let idx = self.index_list()?;
                        let mut t = 0usize;
                        for i in idx {
                            if i >= self.tower.num_units() {
                                return Err(Error::Validation(format!("unit index {i} out of range")));
                            }
                            t |= 1 << i;
                        }
                        Ok(self.tower.q_t(t))
                    }
                    "w" => {
                        let idx = self.index_list()?;
                        if idx.len() != 1 || idx[0] >= self.tower.num_units() {
                            return Err(Error::Validation("w(j) needs one valid unit index".into()));
                        }
                        Ok(self.tower.w(idx[0]))
                    }
                    _ => Err(self.err(&format!("unknown identifier '{name}'"))),
                }
            }
            _ => Err(self.err("unexpected input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q_frac, q_int};

    fn q5() -> Tower {
        Tower::base_i64(&[5]).unwrap()
    }

    #[test]
    fn quadratic_identities() {
        let t = q5();
        let r5 = t.sqrt_m(1);
        assert_eq!(&r5 * &r5, t.from_int(5));
        let phi = t.parse_element("(1+sqrt(5))/2").unwrap();
        assert_eq!(&phi * &phi, t.parse_element("(3+sqrt(5))/2").unwrap());
        assert_eq!(phi.inverse().unwrap(), t.parse_element("(-1+sqrt(5))/2").unwrap());
        assert_eq!(r5.inverse().unwrap(), r5.scale(&q_frac(1, 5)));
        assert_eq!(phi.trace(), q_int(1));
        assert_eq!(r5.trace(), q_int(0));
        assert_eq!(phi.norm(), q_int(-1));
    }

    #[test]
    fn validation_rejects_bad_generators() {
        assert!(Tower::base_i64(&[4]).is_err());
        assert!(Tower::base_i64(&[6, 10]).is_err());
        assert!(Tower::base_i64(&[-1, -1]).is_err());
        assert!(Tower::base_i64(&[0]).is_err());
        assert!(Tower::base_i64(&[1]).is_err());
        assert!(Tower::base_i64(&[-1, 5, 13]).is_ok());
    }

    #[test]
    fn square_roots_in_l() {
        let t = Tower::base_i64(&[5, 13]).unwrap();
        let x = t.parse_element("3 + sqrt(5) - 2*sqrt(13) + sqrt(65)/2").unwrap();
        let sq = &x * &x;
        let r = sq.sqrt_in_l().unwrap().unwrap();
        assert!(r == x || r == -&x);
        assert!(t.from_int(5).sqrt_in_l().unwrap().is_some());
        assert!(t.from_int(65).sqrt_in_l().unwrap().is_some());
        assert!(t.from_int(3).sqrt_in_l().unwrap().is_none());
        assert!(t.from_int(-1).sqrt_in_l().unwrap().is_none());
    }

    #[test]
    fn tower_with_unit_multiplies_q() {
        let l = q5();
        let w = l.parse_element("-(3+sqrt(5))/2").unwrap();
        let n = Tower::with_units(l.level1(), std::slice::from_ref(&w)).unwrap();
        let q = n.q_t(1);
        assert_eq!(&q * &q, w.to_tower(&n).unwrap());
        assert_eq!(n.degree(), 4);
        assert_eq!(q.apply_iota().unwrap(), -&q);
        assert!(n.conjugation().unwrap().totally_complex);
        assert_eq!(n.one().inner(&n.one()).unwrap(), q_int(2));
    }

    #[test]
    fn dependent_units_are_rejected() {
        let l = q5();
        let w = l.from_int(-1);
        let w2 = l.from_int(-4);
        assert!(Tower::with_units(l.level1(), &[w, w2]).is_err());
    }

    #[test]
    fn subset_orders() {
        let s = SubsetOrder::default().sequence(2).unwrap();
        assert_eq!(s, vec![0, 1, 2, 3]);
        let s3 = SubsetOrder::default().sequence(3).unwrap();
        assert_eq!(s3, vec![0, 1, 2, 4, 3, 5, 6, 7]);
        assert!(SubsetOrder::Explicit(vec![1, 0, 2, 3]).sequence(2).is_err());
        assert!(SubsetOrder::Explicit(vec![0, 2, 1, 3]).sequence(2).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let l = q5();
        let w = l.parse_element("-(3+sqrt(5))/2").unwrap();
        let n = Tower::with_units(l.level1(), &[w]).unwrap();
        let s = serde_json::to_string(&n.to_json()).unwrap();
        let back: TowerJson = serde_json::from_str(&s).unwrap();
        assert_eq!(Tower::from_json(&back).unwrap(), n);
        let single: ElementJson = serde_json::from_str(r#"{"coeffs": [[[],[0]], "1/1"]}"#).unwrap();
        assert_eq!(l.element_from_json(&single).unwrap(), l.sqrt_m(1));
        let e = n.parse_element("1/3 - sqrt(5)*q(0)").unwrap();
        assert_eq!(n.element_from_json(&e.to_json()).unwrap(), e);
        assert_eq!(n.parse_element(&e.to_string()).unwrap(), e);
    }
}
