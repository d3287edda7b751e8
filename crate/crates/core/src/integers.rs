//! Integral bases `λ_D`, `η_T`, integrality, arithmetic in `O_L/4O_L`,
//! square classes, discriminants and the Minkowski bound.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ElementJson, FieldElement, Tower};
use crate::interval::Interval;
use crate::linalg;
use crate::rational::{format_q, is_integer, q_from_big, q_int, Q};

/// Largest `n(L)` for which the mod-4 square table is built.
pub const MAX_MOD4_DEGREE: usize = 8;

/// Lazily built per-tower data.
#[derive(Default)]
pub struct TowerCache {
    square_table: OnceLock<Result<SquareTable>>,
}

struct SquareTable {
    n: usize,
    is_square: Vec<bool>,
}

/// Mask of generators with `m ≡ 1 mod 4`, whose integral basis element is
/// `(1+√m)/2` rather than `√m`.
pub fn half_mask(tower: &Tower) -> usize {
    tower
        .level1()
        .iter()
        .enumerate()
        .filter(|(_, m)| m.mod_floor(&BigInt::from(4)).is_one())
        .fold(0, |acc, (i, _)| acc | (1 << i))
}

/// The tensor basis `λ_D = ∏_{i∈D} ω_i` is a Z-basis of `O_L` when the
/// quadratic discriminants are pairwise coprime, i.e. at most one generator
/// is `≢ 1 mod 4`.
pub fn lambda_basis_available(tower: &Tower) -> Result<()> {
    let others = tower.ell() - half_mask(tower).count_ones() as usize;
    if others > 1 {
        return Err(Error::Undecidable(
            "integral basis of a multiquadratic field with two generators ≢ 1 mod 4".into(),
        ));
    }
    Ok(())
}

/// Coordinates over `{λ_D}` of a dense L-vector over `{√m_D}`.
pub(crate) fn l_to_lambda(tower: &Tower, x: &[Q]) -> Vec<Q> {
    let mut y = x.to_vec();
    let two = q_int(2);
    let h = half_mask(tower);
    for i in 0..tower.ell() {
        if h >> i & 1 == 0 {
            continue;
        }
        let bit = 1 << i;
        for d in 0..y.len() {
            if d & bit != 0 {
                continue;
            }
            let (u, v) = (y[d].clone(), y[d | bit].clone());
            y[d | bit] = &v * &two;
            y[d] = u - v;
        }
    }
    y
}

pub(crate) fn lambda_to_l(tower: &Tower, y: &[Q]) -> Vec<Q> {
    let mut x = y.to_vec();
    let half = Q::new(1.into(), 2.into());
    let h = half_mask(tower);
    for i in 0..tower.ell() {
        if h >> i & 1 == 0 {
            continue;
        }
        let bit = 1 << i;
        for d in 0..x.len() {
            if d & bit != 0 {
                continue;
            }
            let (y0, y1) = (x[d].clone(), x[d | bit].clone());
            let v = &y1 * &half;
            x[d] = y0 + &v;
            x[d | bit] = v;
        }
    }
    x
}

/// `λ_D` as an element of the given tower.
pub fn lambda(tower: &Tower, d: usize) -> FieldElement {
    let mut y = vec![Q::zero(); tower.degree_l()];
    y[d] = Q::one();
    tower.from_l(lambda_to_l(tower, &y))
}

/// `η_T = ∏_{j∈T} (1+√w_j)/2`.
pub fn eta(tower: &Tower, t: usize) -> FieldElement {
    let mut acc = tower.one();
    let half = Q::new(1.into(), 2.into());
    for j in 0..tower.num_units() {
        if t >> j & 1 == 1 {
            let f = (&tower.one() + &tower.q_t(1 << j)).scale(&half);
            acc = &acc * &f;
        }
    }
    acc
}

pub fn is_integral_l(tower: &Tower, x: &[Q]) -> bool {
    l_to_lambda(tower, x).iter().all(is_integer)
}

/// An element of `O_L` with norm ±1.
pub fn is_unit_l(u: &FieldElement) -> Result<bool> {
    lambda_basis_available(u.tower())?;
    if !u.in_l() {
        return Err(Error::Validation("unit test applied to an element outside L".into()));
    }
    if !is_integral_l(u.tower(), &u.l_part(0)) {
        return Ok(false);
    }
    let n = u.to_base()?.norm();
    Ok(n.is_one() || (-n).is_one())
}

/// The basis `{η_T λ_D}` is a Z-basis of `O_N` when L has its tensor basis
/// and every `w` is a unit of `O_L` lying in `1 + 4O_L`.
pub fn eta_basis_available(tower: &Tower) -> Result<()> {
    lambda_basis_available(tower)?;
    for (j, w) in tower.units_in_l().iter().enumerate() {
        if !is_unit_l(w)? {
            return Err(Error::Validation(format!("second-step element w_{j} is not a unit of O_L")));
        }
        if !in_one_plus_4ol(w)? {
            return Err(Error::Validation(format!("second-step element w_{j} is not in 1+4O_L")));
        }
    }
    Ok(())
}

/// Exact coordinates over `{η_T λ_D}`, indexed like field coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegralCoordinates {
    pub tower: Tower,
    pub coords: Vec<Q>,
}

impl IntegralCoordinates {
    pub fn get(&self, t: usize, d: usize) -> &Q {
        &self.coords[(t << self.tower.ell()) | d]
    }

    pub fn is_integral(&self) -> bool {
        self.coords.iter().all(is_integer)
    }

    pub fn to_json(&self) -> ElementJson {
        // same sparse layout as field elements
        let ell = self.tower.ell();
        let nl = self.tower.degree_l();
        let mut entries = Vec::new();
        for (i, x) in self.coords.iter().enumerate() {
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

impl Serialize for IntegralCoordinates {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().coeffs.serialize(s)
    }
}

/// Change of basis without precondition checks; used once a basis is known valid.
pub(crate) fn coords_unchecked(a: &FieldElement) -> Vec<Q> {
    let tower = a.tower();
    let mut parts = a.l_parts();
    let two = q_int(2);
    for j in 0..tower.num_units() {
        let bit = 1 << j;
        for t in 0..parts.len() {
            if t & bit != 0 {
                continue;
            }
            let v = parts[t | bit].clone();
            let u = parts[t].clone();
            parts[t | bit] = v.iter().map(|x| x * &two).collect();
            parts[t] = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        }
    }
    parts.iter().flat_map(|p| l_to_lambda(tower, p)).collect()
}

pub(crate) fn from_coords_unchecked(tower: &Tower, coords: &[Q]) -> FieldElement {
    let nl = tower.degree_l();
    let mut parts: Vec<Vec<Q>> = coords.chunks(nl).map(|c| lambda_to_l(tower, c)).collect();
    let half = Q::new(1.into(), 2.into());
    for j in 0..tower.num_units() {
        let bit = 1 << j;
        for t in 0..parts.len() {
            if t & bit != 0 {
                continue;
            }
            let y1 = parts[t | bit].clone();
            let y0 = parts[t].clone();
            let v: Vec<Q> = y1.iter().map(|x| x * &half).collect();
            parts[t] = y0.iter().zip(&v).map(|(a, b)| a + b).collect();
            parts[t | bit] = v;
        }
    }
    tower.from_l_parts(parts)
}

pub fn to_integral_coordinates(a: &FieldElement) -> Result<IntegralCoordinates> {
    eta_basis_available(a.tower())?;
    Ok(IntegralCoordinates { tower: a.tower().clone(), coords: coords_unchecked(a) })
}

pub fn from_integral_coordinates(c: &IntegralCoordinates) -> FieldElement {
    from_coords_unchecked(&c.tower, &c.coords)
}

pub fn is_integral(a: &FieldElement) -> Result<bool> {
    if a.in_l() {
        lambda_basis_available(a.tower())?;
        return Ok(is_integral_l(a.tower(), &a.l_part(0)));
    }
    Ok(to_integral_coordinates(a)?.is_integral())
}

/// `(u − 1)/4 ∈ O_L`.
pub fn in_one_plus_4ol(u: &FieldElement) -> Result<bool> {
    if !u.in_l() {
        return Err(Error::Validation("1+4O_L test applied to an element outside L".into()));
    }
    lambda_basis_available(u.tower())?;
    let mut x = u.l_part(0);
    x[0] -= Q::one();
    let q = Q::new(1.into(), 4.into());
    let x: Vec<Q> = x.iter().map(|c| c * &q).collect();
    Ok(is_integral_l(u.tower(), &x))
}

/// Coordinates mod 4 in the λ basis of an element of `O_L`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mod4Residue {
    pub residue: Vec<u8>,
}

pub fn mod4_residue(u: &FieldElement) -> Result<Mod4Residue> {
    if !u.in_l() {
        return Err(Error::Validation("mod-4 residue of an element outside L".into()));
    }
    lambda_basis_available(u.tower())?;
    let y = l_to_lambda(u.tower(), &u.l_part(0));
    if !y.iter().all(is_integer) {
        return Err(Error::Validation(format!("{u} is not integral")));
    }
    let four = BigInt::from(4);
    Ok(Mod4Residue { residue: y.iter().map(|c| c.to_integer().mod_floor(&four).to_u8().unwrap()).collect() })
}

fn encode(r: &[u8]) -> usize {
    r.iter().rev().fold(0usize, |acc, &x| acc * 4 + x as usize)
}

fn build_square_table(tower: &Tower) -> Result<SquareTable> {
    let n = tower.degree_l();
    if n > MAX_MOD4_DEGREE {
        return Err(Error::Capacity(format!("mod-4 square table limited to n(L) <= {MAX_MOD4_DEGREE}, got {n}")));
    }
    lambda_basis_available(tower)?;
    let base = tower.base_tower();
    let four = BigInt::from(4);
    // structure constants λ_D λ_E = Σ_F c[D][E][F] λ_F mod 4
    let lam: Vec<FieldElement> = (0..n).map(|d| lambda(&base, d)).collect();
    let mut sc = vec![vec![vec![0u8; n]; n]; n];
    for d in 0..n {
        for e in d..n {
            let p = &lam[d] * &lam[e];
            let y = l_to_lambda(&base, &p.l_part(0));
            for (f, c) in y.iter().enumerate() {
                let v = c.to_integer().mod_floor(&four).to_u8().unwrap();
                sc[d][e][f] = v;
                sc[e][d][f] = v;
            }
        }
    }
    let size = 1usize << (2 * n);
    let mut is_square = vec![false; size];
    let mut x = vec![0u8; n];
    let mut sq = vec![0u32; n];
    for code in 0..size {
        let mut c = code;
        for xi in x.iter_mut() {
            *xi = (c & 3) as u8;
            c >>= 2;
        }
        sq.iter_mut().for_each(|s| *s = 0);
        for d in 0..n {
            if x[d] == 0 {
                continue;
            }
            let dd = (x[d] as u32) * (x[d] as u32);
            for f in 0..n {
                sq[f] += dd * sc[d][d][f] as u32;
            }
            for e in d + 1..n {
                if x[e] == 0 {
                    continue;
                }
                let de = 2 * (x[d] as u32) * (x[e] as u32);
                for f in 0..n {
                    sq[f] += de * sc[d][e][f] as u32;
                }
            }
        }
        let r: Vec<u8> = sq.iter().map(|s| (s % 4) as u8).collect();
        is_square[encode(&r)] = true;
    }
    Ok(SquareTable { n, is_square })
}

/// Whether `u` is a square in `(O_L/4O_L)*`, by lookup in the exhaustive
/// table of squares.
pub fn is_square_mod4(u: &FieldElement) -> Result<bool> {
    let r = mod4_residue(u)?;
    let norm = u.to_base()?.norm();
    if !is_integer(&norm) || norm.to_integer().is_even() {
        return Err(Error::Validation(format!("{u} is not invertible modulo 2O_L")));
    }
    let tower = u.tower();
    let table = tower.cache().square_table.get_or_init(|| build_square_table(tower)).as_ref().map_err(|e| e.clone())?;
    debug_assert_eq!(table.n, r.residue.len());
    Ok(table.is_square[encode(&r.residue)])
}

/// No nonempty subset product of `us` is a square in `L*`.
pub fn square_class_independent(us: &[FieldElement]) -> Result<bool> {
    if us.is_empty() {
        return Ok(true);
    }
    if us.len() > 20 {
        return Err(Error::Capacity("square-class independence limited to 20 elements".into()));
    }
    let tower = us[0].tower();
    for u in us {
        if u.tower() != tower {
            return Err(Error::TowerMismatch);
        }
        if u.is_zero() {
            return Err(Error::Validation("zero has no square class".into()));
        }
    }
    let k = us.len();
    let mut prods = vec![tower.one(); 1 << k];
    for s in 1..(1usize << k) {
        let low = s.trailing_zeros() as usize;
        prods[s] = &prods[s & (s - 1)] * &us[low];
        if prods[s].sqrt_in_l()?.is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Absolute discriminant of a quadratic field `Q(√m)`, `m` squarefree.
pub fn quadratic_discriminant(m: &BigInt) -> BigInt {
    if m.mod_floor(&BigInt::from(4)).is_one() {
        m.abs()
    } else {
        (m * BigInt::from(4)).abs()
    }
}

/// `|Δ(L)| = ∏_{D≠∅} |disc Q(√m_D)|` (conductor–discriminant formula).
pub fn discriminant_l(tower: &Tower) -> BigInt {
    (1..tower.degree_l()).fold(BigInt::one(), |acc, d| acc * quadratic_discriminant(tower.m_d(d)))
}

/// `r₂(L)`.
pub fn r2_l(tower: &Tower) -> usize {
    if tower.l_totally_real() {
        0
    } else {
        tower.degree_l() / 2
    }
}

/// `|Δ(N)|` when the η basis is available (then `Δ(N) = Δ(L)^{[N:L]}`).
pub fn discriminant_n(tower: &Tower) -> Result<BigInt> {
    eta_basis_available(tower)?;
    Ok(num_traits::pow(discriminant_l(tower), 1 << tower.num_units()))
}

/// `det(Tr(b_i b_j))` for a list of elements.
pub fn trace_discriminant(elems: &[FieldElement]) -> Q {
    let g: linalg::Mat = elems.iter().map(|a| elems.iter().map(|b| (a * b).trace()).collect()).collect();
    linalg::det(&g)
}

/// Z-basis of O_N: `{η_T λ_D}` in coefficient index order.
pub fn integral_basis(tower: &Tower) -> Result<Vec<FieldElement>> {
    eta_basis_available(tower)?;
    let n = tower.degree();
    Ok((0..n)
        .map(|i| {
            let mut c = vec![Q::zero(); n];
            c[i] = Q::one();
            from_coords_unchecked(tower, &c)
        })
        .collect())
}

/// `M_L = (4/π)^{r₂} n!/nⁿ √Δ(L)`, certified.
pub fn minkowski_bound(tower: &Tower, prec: u32) -> Interval {
    let n = tower.degree_l() as i64;
    let r2 = r2_l(tower) as u32;
    let mut fact = BigInt::one();
    for k in 2..=n {
        fact *= k;
    }
    let rat = Q::new(fact, num_traits::pow(BigInt::from(n), n as usize));
    let root = Interval::point(q_from_big(&discriminant_l(tower))).sqrt(prec);
    let mut v = root.scale(&rat);
    if r2 > 0 {
        let four_over_pi = Interval::pi(prec).recip().unwrap().scale(&q_int(4));
        v = &v * &four_over_pi.pow(r2);
    }
    v.round(prec)
}

impl Tower {
    pub(crate) fn cache(&self) -> &TowerCache {
        &self.data().cache
    }
}
