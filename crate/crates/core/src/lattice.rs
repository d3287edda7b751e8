//! Z-lattices given by an exact rational Gram matrix (and optionally exact
//! or certified real coordinates): LLL, shortest vectors in L² and L∞,
//! closest vectors, and covering radii in small rank.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, PRECISION_CAP};
use crate::linalg::{self, Mat};
use crate::rational::{ceil, floor, format_q, parse_q, q_frac, q_from_big, q_int, qcmp, qle, qlt, round_half_up, Q};

pub const MAX_ENUM_RANK: usize = 10;
pub const MAX_EXACT_COVER_RANK: usize = 4;
pub const DEFAULT_NODE_BUDGET: u64 = 20_000_000;
/// Grid points tried by the covering-radius lower bound in bounds mode.
pub const GRID_POINT_CAP: u64 = 4096;

type CoordFn = Arc<dyn Fn(u32) -> Vec<Vec<Interval>> + Send + Sync>;

/// Rank-k lattice. Every algorithm here runs on the exact Gram matrix; the
/// coordinates are only needed for L∞ questions and ambient targets.
#[derive(Clone)]
pub struct LatticeInstance {
    gram: Mat,
    basis: Option<Mat>,
    coords: Option<CoordFn>,
}

impl std::fmt::Debug for LatticeInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatticeInstance").field("gram", &self.gram).field("basis", &self.basis).finish()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeJson {
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "entries")]
    pub basis: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "entries")]
    pub gram: Option<Vec<Vec<String>>>,
}

/// Matrix entries given as rational strings or JSON integers.
fn entries<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<Vec<String>>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Str(String),
        Int(i64),
    }
    let m: Option<Vec<Vec<Entry>>> = Option::deserialize(d)?;
    Ok(m.map(|rows| {
        rows.into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|e| match e {
                        Entry::Str(s) => s,
                        Entry::Int(i) => i.to_string(),
                    })
                    .collect()
            })
            .collect()
    }))
}

pub fn mat_to_strings(m: &Mat) -> Vec<Vec<String>> {
    m.iter().map(|r| r.iter().map(format_q).collect()).collect()
}

fn mat_from_strings(m: &[Vec<String>]) -> Result<Mat> {
    m.iter().map(|r| r.iter().map(|s| parse_q(s)).collect()).collect()
}

/// LDLᵀ data of a positive definite Gram: `B_i = ‖b*_i‖²`, `mu[i][j]` for `j < i`.
#[derive(Clone, Debug)]
pub struct Gso {
    pub b: Vec<Q>,
    pub mu: Vec<Vec<Q>>,
}

pub fn gso(g: &Mat) -> Result<Gso> {
    let k = g.len();
    let mut mu = vec![vec![Q::zero(); k]; k];
    let mut b = vec![Q::zero(); k];
    for i in 0..k {
        for j in 0..i {
            let mut s = g[i][j].clone();
            for l in 0..j {
                s -= &mu[j][l] * &mu[i][l] * &b[l];
            }
            mu[i][j] = s / &b[j];
        }
        let mut s = g[i][i].clone();
        for l in 0..i {
            s -= &mu[i][l] * &mu[i][l] * &b[l];
        }
        if !s.is_positive() {
            return Err(Error::Validation("Gram matrix is not positive definite".into()));
        }
        b[i] = s;
    }
    Ok(Gso { b, mu })
}

impl LatticeInstance {
    pub fn from_gram(gram: Mat) -> Result<LatticeInstance> {
        check_square(&gram)?;
        for i in 0..gram.len() {
            for j in 0..i {
                if gram[i][j] != gram[j][i] {
                    return Err(Error::Validation("Gram matrix is not symmetric".into()));
                }
            }
        }
        gso(&gram)?;
        Ok(LatticeInstance { gram, basis: None, coords: None })
    }

    pub fn from_rows(rows: Mat) -> Result<LatticeInstance> {
        if rows.is_empty() {
            return Err(Error::Validation("empty basis".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Validation("ragged basis".into()));
        }
        if linalg::rank(&rows) != rows.len() {
            return Err(Error::Validation("basis rows are dependent".into()));
        }
        let gram = linalg::gram_of_rows(&rows);
        Ok(LatticeInstance { gram, basis: Some(rows), coords: None })
    }

    /// Lattice with exact Gram and certified real coordinates at any precision.
    /// The caller guarantees that the coordinates realise the Gram.
    pub fn with_coords(gram: Mat, coords: CoordFn) -> Result<LatticeInstance> {
        let mut l = Self::from_gram(gram)?;
        l.coords = Some(coords);
        Ok(l)
    }

    pub fn from_json(j: &LatticeJson) -> Result<LatticeInstance> {
        match (&j.basis, &j.gram) {
            (Some(b), _) => Self::from_rows(mat_from_strings(b)?),
            (None, Some(g)) => Self::from_gram(mat_from_strings(g)?),
            _ => Err(Error::Validation("lattice needs a basis or a Gram matrix".into())),
        }
    }

    pub fn to_json(&self) -> LatticeJson {
        LatticeJson { basis: self.basis.as_ref().map(mat_to_strings), gram: Some(mat_to_strings(&self.gram)) }
    }

    pub fn rank(&self) -> usize {
        self.gram.len()
    }

    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    pub fn basis(&self) -> Option<&Mat> {
        self.basis.as_ref()
    }

    /// `|det G|`, the squared covolume.
    pub fn det(&self) -> Q {
        linalg::det(&self.gram)
    }

    pub fn norm_sq(&self, x: &[BigInt]) -> Q {
        let q: Vec<Q> = x.iter().map(q_from_big).collect();
        linalg::bilinear(&q, &self.gram, &q)
    }

    /// Real coordinates of `Σ x_i b_i` at the given precision.
    pub fn coords_of(&self, x: &[BigInt], prec: u32) -> Option<Vec<Interval>> {
        if let Some(b) = &self.basis {
            let q: Vec<Q> = x.iter().map(q_from_big).collect();
            return Some(linalg::vec_mat(&q, b).into_iter().map(Interval::point).collect());
        }
        let rows = (self.coords.as_ref()?)(prec);
        let d = rows[0].len();
        let mut v = vec![Interval::zero(); d];
        for (xi, r) in x.iter().zip(&rows) {
            if xi.is_zero() {
                continue;
            }
            let c = q_from_big(xi);
            for j in 0..d {
                v[j] = &v[j] + &r[j].scale(&c);
            }
        }
        Some(v.into_iter().map(|i| i.round(prec)).collect())
    }

    pub fn ambient_dim(&self) -> Option<usize> {
        if let Some(b) = &self.basis {
            return Some(b[0].len());
        }
        self.coords.as_ref().map(|f| f(16)[0].len())
    }

    /// Lattice with basis `U B` for an integer matrix `U`.
    pub fn transform(&self, u: &[Vec<BigInt>]) -> LatticeInstance {
        let uq: Mat = u.iter().map(|r| r.iter().map(q_from_big).collect()).collect();
        let gram = linalg::mat_mul(&linalg::mat_mul(&uq, &self.gram), &linalg::transpose(&uq));
        let basis = self.basis.as_ref().map(|b| linalg::mat_mul(&uq, b));
        let coords = self.coords.clone().map(|f| {
            let u = u.to_vec();
            Arc::new(move |p: u32| {
                let rows = f(p);
                u.iter()
                    .map(|ur| {
                        let mut v = vec![Interval::zero(); rows[0].len()];
                        for (c, r) in ur.iter().zip(&rows) {
                            if !c.is_zero() {
                                for j in 0..v.len() {
                                    v[j] = &v[j] + &r[j].scale(&q_from_big(c));
                                }
                            }
                        }
                        v
                    })
                    .collect()
            }) as CoordFn
        });
        LatticeInstance { gram, basis, coords }
    }

    /// Basis scaled by `c`.
    pub fn scaled(&self, c: &Q) -> LatticeInstance {
        let c2 = c * c;
        let gram = self.gram.iter().map(|r| r.iter().map(|x| x * &c2).collect()).collect();
        let basis = self.basis.as_ref().map(|b| b.iter().map(|r| r.iter().map(|x| x * c).collect()).collect());
        let coords = self.coords.clone().map(|f| {
            let c = c.clone();
            Arc::new(move |p: u32| f(p).into_iter().map(|r| r.into_iter().map(|x| x.scale(&c)).collect()).collect())
                as CoordFn
        });
        LatticeInstance { gram, basis, coords }
    }
}

fn check_square(g: &Mat) -> Result<()> {
    if g.is_empty() || g.iter().any(|r| r.len() != g.len()) {
        return Err(Error::Validation("Gram matrix must be square and nonempty".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// LLL

#[derive(Clone, Debug)]
pub struct LllResult {
    pub lattice: LatticeInstance,
    /// Unimodular `U` with reduced basis `U B`.
    pub transform: Vec<Vec<BigInt>>,
}

pub fn default_delta() -> Q {
    q_frac(99, 100)
}

/// Exact LLL on the Gram matrix.
pub fn lll_reduce(lat: &LatticeInstance, delta: &Q) -> Result<LllResult> {
    if *delta <= q_frac(1, 4) || *delta >= Q::one() {
        return Err(Error::Validation("LLL parameter must lie in (1/4, 1)".into()));
    }
    let k = lat.rank();
    let mut g = lat.gram.clone();
    let mut u: Vec<Vec<BigInt>> =
        (0..k).map(|i| (0..k).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect();
    let mut s = gso(&g)?;
    let half = q_frac(1, 2);
    let mut i = 1;
    while i < k {
        for j in (0..i).rev() {
            if s.mu[i][j].abs() > half {
                let r = round_half_up(&s.mu[i][j]);
                let rq = q_from_big(&r);
                // b_i ← b_i − r b_j
                for c in 0..k {
                    let t = &rq * &g[j][c];
                    g[i][c] -= t;
                }
                for c in 0..k {
                    let t = &rq * &g[c][j];
                    g[c][i] -= t;
                }
                for c in 0..k {
                    let t = &r * &u[j][c];
                    u[i][c] -= t;
                }
                for l in 0..j {
                    let t = &rq * &s.mu[j][l];
                    s.mu[i][l] -= t;
                }
                s.mu[i][j] -= &rq;
            }
        }
        let lhs = s.b[i].clone();
        let rhs = (delta - &s.mu[i][i - 1] * &s.mu[i][i - 1]) * &s.b[i - 1];
        if lhs >= rhs {
            i += 1;
        } else {
            g.swap(i, i - 1);
            for r in g.iter_mut() {
                r.swap(i, i - 1);
            }
            u.swap(i, i - 1);
            s = gso(&g)?;
            i = (i - 1).max(1);
        }
    }
    Ok(LllResult { lattice: lat.transform(&u), transform: u })
}

/// Lovász and size conditions at `delta`, checked exactly.
pub fn is_lll_reduced(g: &Mat, delta: &Q) -> Result<bool> {
    let s = gso(g)?;
    let half = q_frac(1, 2);
    for i in 0..g.len() {
        for j in 0..i {
            if s.mu[i][j].abs() > half {
                return Ok(false);
            }
        }
        if i > 0 && s.b[i] < (delta - &s.mu[i][i - 1] * &s.mu[i][i - 1]) * &s.b[i - 1] {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Enumeration

/// Integers `y` with `(y − m)² ≤ t`, increasing.
fn int_range(m: &Q, t: &Q) -> (i64, i64) {
    let s = floor(t).sqrt();
    let lo = ceil(&(m - q_from_big(&s) - Q::one()));
    let hi = floor(&(m + q_from_big(&s) + Q::one()));
    let mut lo = lo.to_i64().unwrap_or(i64::MIN / 4);
    let mut hi = hi.to_i64().unwrap_or(i64::MAX / 4);
    let ok = |y: i64| {
        let d = q_int(y) - m;
        &d * &d <= *t
    };
    while lo <= hi && !ok(lo) {
        lo += 1;
    }
    while hi >= lo && !ok(hi) {
        hi -= 1;
    }
    (lo, hi)
}

struct Enum<'a> {
    s: &'a Gso,
    center: &'a [Q],
    nodes: u64,
    budget: u64,
}

impl Enum<'_> {
    /// Depth-first over levels `k-1..0`; `visit` sees each point with
    /// `Q(y − c) ≤ radius` and may shrink the radius.
    fn run<F>(&mut self, radius: &mut Q, visit: &mut F) -> Result<()>
    where
        F: FnMut(&[i64], &Q) -> Option<Q>,
    {
        let k = self.s.b.len();
        let mut y = vec![0i64; k];
        let zero = Q::zero();
        self.level(k, &mut y, &zero, radius, visit)
    }

    fn level<F>(&mut self, i: usize, y: &mut Vec<i64>, acc: &Q, radius: &mut Q, visit: &mut F) -> Result<()>
    where
        F: FnMut(&[i64], &Q) -> Option<Q>,
    {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Budget(format!("lattice enumeration exceeded {} nodes", self.budget)));
        }
        if i == 0 {
            if let Some(r) = visit(y, acc) {
                *radius = r;
            }
            return Ok(());
        }
        let i = i - 1;
        let k = y.len();
        let mut partial = Q::zero();
        for j in i + 1..k {
            partial += &self.s.mu[j][i] * (q_int(y[j]) - &self.center[j]);
        }
        let m = &self.center[i] - &partial;
        if acc > radius {
            return Ok(());
        }
        let t = (&*radius - acc) / &self.s.b[i];
        let (lo, hi) = int_range(&m, &t);
        for v in lo..=hi {
            let d = q_int(v) - &m;
            let nacc = acc + &self.s.b[i] * &d * &d;
            if nacc > *radius {
                continue;
            }
            y[i] = v;
            self.level(i, y, &nacc, radius, visit)?;
        }
        y[i] = 0;
        Ok(())
    }
}

/// `x = y U` (coefficients over the original basis).
fn back(y: &[i64], u: &[Vec<BigInt>]) -> Vec<BigInt> {
    let k = u.len();
    (0..k).map(|c| y.iter().zip(u).fold(BigInt::zero(), |a, (yi, r)| a + BigInt::from(*yi) * &r[c])).collect()
}

fn canonical_sign(x: Vec<BigInt>) -> Vec<BigInt> {
    match x.iter().find(|c| !c.is_zero()) {
        Some(c) if c.is_negative() => x.into_iter().map(|c| -c).collect(),
        _ => x,
    }
}

fn check_rank(lat: &LatticeInstance, cap: usize) -> Result<()> {
    if lat.rank() > cap {
        return Err(Error::Capacity(format!("rank {} exceeds enumeration cap {cap}", lat.rank())));
    }
    Ok(())
}

/// Every nonzero `x` (over the original basis, first nonzero entry
/// positive) with `Q(x) ≤ radius`.
pub fn vectors_within(lat: &LatticeInstance, radius: &Q, budget: u64) -> Result<Vec<(Vec<BigInt>, Q)>> {
    check_rank(lat, MAX_ENUM_RANK)?;
    let red = lll_reduce(lat, &default_delta())?;
    let s = gso(&red.lattice.gram)?;
    let center = vec![Q::zero(); lat.rank()];
    let mut out = Vec::new();
    let mut r = radius.clone();
    let mut e = Enum { s: &s, center: &center, nodes: 0, budget };
    e.run(&mut r, &mut |y, q| {
        if y.iter().any(|&c| c != 0) {
            let x = back(y, &red.transform);
            if canonical_sign(x.clone()) == x {
                out.push((x, q.clone()));
            }
        }
        None
    })?;
    out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShortVector {
    #[serde(serialize_with = "crate::rational::ser::big_vec")]
    pub coeffs: Vec<BigInt>,
    #[serde(serialize_with = "crate::rational::ser::q")]
    pub norm_sq: Q,
}

/// Exact L² shortest vector; ties go to the lexicographically least
/// coefficient vector with positive leading entry.
pub fn shortest_vector_l2(lat: &LatticeInstance, budget: u64) -> Result<ShortVector> {
    check_rank(lat, MAX_ENUM_RANK)?;
    let red = lll_reduce(lat, &default_delta())?;
    let s = gso(&red.lattice.gram)?;
    let center = vec![Q::zero(); lat.rank()];
    let mut best: Option<(Q, Vec<BigInt>)> = None;
    let mut r = (0..lat.rank()).map(|i| red.lattice.gram[i][i].clone()).min().unwrap();
    let mut e = Enum { s: &s, center: &center, nodes: 0, budget };
    e.run(&mut r, &mut |y, q| {
        if y.iter().all(|&c| c == 0) {
            return None;
        }
        let x = canonical_sign(back(y, &red.transform));
        let better = match &best {
            None => true,
            Some((bq, bx)) => q < bq || (q == bq && x < *bx),
        };
        if better {
            best = Some((q.clone(), x));
            return Some(q.clone());
        }
        None
    })?;
    let (norm_sq, coeffs) = best.ok_or_else(|| Error::Internal("enumeration missed the basis vectors".into()))?;
    Ok(ShortVector { coeffs, norm_sq })
}

#[derive(Clone, Debug, Serialize)]
pub struct LinfVector {
    #[serde(serialize_with = "crate::rational::ser::big_vec")]
    pub coeffs: Vec<BigInt>,
    pub linf: Interval,
    pub precision_bits: u32,
}

fn linf_of(lat: &LatticeInstance, x: &[BigInt], prec: u32) -> Result<Interval> {
    let v = lat.coords_of(x, prec).ok_or_else(|| Error::Validation("L∞ questions need lattice coordinates".into()))?;
    Ok(v.iter().map(|c| c.abs()).reduce(|a, b| a.max(&b)).unwrap_or_else(Interval::zero))
}

/// Shortest nonzero vector in the max-coordinate norm among those with
/// `‖x‖∞ ≤ bound`, or `None` when there is none. Candidates come from the
/// L² ball of radius² `d·bound²`; ties that survive refinement to the
/// precision cap go to the lexicographically least coefficient vector.
pub fn shortest_vector_linf(
    lat: &LatticeInstance,
    bound: &Interval,
    prec: u32,
    budget: u64,
) -> Result<Option<LinfVector>> {
    check_rank(lat, MAX_ENUM_RANK)?;
    let d = lat.ambient_dim().ok_or_else(|| Error::Validation("L∞ questions need lattice coordinates".into()))?;
    let hi = bound.hi().clone();
    if hi.is_negative() {
        return Ok(None);
    }
    let radius = q_int(d as i64) * &hi * &hi;
    // x and -x tie; keep the one whose first nonzero coefficient is positive
    let cands: Vec<Vec<BigInt>> = vectors_within(lat, &radius, budget)?
        .into_iter()
        .map(|(x, _)| x)
        .filter(|x| x.iter().find(|c| !c.is_zero()).is_some_and(|c| c.is_positive()))
        .collect();
    let mut p = prec.max(32);
    let mut alive: Vec<Vec<BigInt>> = cands;
    loop {
        let vals: Vec<Interval> = alive.iter().map(|x| linf_of(lat, x, p)).collect::<Result<_>>()?;
        let mut keep = Vec::new();
        let mut kv = Vec::new();
        for (x, v) in alive.iter().zip(vals) {
            if qlt(bound.hi(), v.lo()) {
                continue;
            }
            keep.push(x.clone());
            kv.push(v);
        }
        if keep.is_empty() {
            return Ok(None);
        }
        let min_hi = kv.iter().map(|v| v.hi().clone()).min_by(qcmp).unwrap();
        let mut next = Vec::new();
        let mut nv = Vec::new();
        for (x, v) in keep.into_iter().zip(kv) {
            if qle(v.lo(), &min_hi) {
                next.push(x);
                nv.push(v);
            }
        }
        let undecided = nv.iter().any(|v| !v.certainly_le(bound)) && nv.iter().any(|v| qle(v.lo(), bound.hi()));
        if (next.len() == 1 && !undecided) || p >= PRECISION_CAP {
            let (i, _) = next.iter().enumerate().min_by(|a, b| a.1.cmp(b.1)).unwrap();
            if !nv[i].certainly_le(bound) {
                if qlt(bound.hi(), nv[i].lo()) {
                    return Ok(None);
                }
                return Err(Error::Precision("L∞ comparison with the bound undecided at the precision cap".into()));
            }
            return Ok(Some(LinfVector { coeffs: next[i].clone(), linf: nv[i].clone(), precision_bits: p }));
        }
        alive = next;
        p *= 2;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosestVector {
    #[serde(serialize_with = "crate::rational::ser::big_vec")]
    pub coeffs: Vec<BigInt>,
    /// Exact squared distance within the span of the lattice.
    #[serde(serialize_with = "crate::rational::ser::q")]
    pub dist_sq: Q,
    pub distance: Interval,
}

/// Exact CVP for a target given by rational coefficients over the basis.
pub fn closest_vector(lat: &LatticeInstance, target: &[Q], prec: u32, budget: u64) -> Result<ClosestVector> {
    check_rank(lat, MAX_ENUM_RANK)?;
    if target.len() != lat.rank() {
        return Err(Error::Validation("target has the wrong length".into()));
    }
    let red = lll_reduce(lat, &default_delta())?;
    let uq: Mat = red.transform.iter().map(|r| r.iter().map(q_from_big).collect()).collect();
    let uinv = linalg::inverse(&uq).ok_or_else(|| Error::Internal("singular LLL transform".into()))?;
    let t = linalg::vec_mat(target, &uinv);
    let s = gso(&red.lattice.gram)?;
    // Babai nearest plane gives the starting radius
    let k = lat.rank();
    let mut yb = vec![0i64; k];
    for i in (0..k).rev() {
        let mut c = t[i].clone();
        for j in i + 1..k {
            c -= &s.mu[j][i] * (q_int(yb[j]) - &t[j]);
        }
        yb[i] = round_half_up(&c).to_i64().ok_or_else(|| Error::Capacity("coefficient overflow".into()))?;
    }
    let diff = |y: &[i64]| -> Q {
        let d: Vec<Q> = y.iter().zip(&t).map(|(a, b)| q_int(*a) - b).collect();
        linalg::bilinear(&d, &red.lattice.gram, &d)
    };
    let mut r = diff(&yb);
    let mut best: (Q, Vec<BigInt>) = (r.clone(), back(&yb, &red.transform));
    let mut e = Enum { s: &s, center: &t, nodes: 0, budget };
    e.run(&mut r, &mut |y, q| {
        let x = back(y, &red.transform);
        if *q < best.0 || (*q == best.0 && x < best.1) {
            best = (q.clone(), x);
            return Some(q.clone());
        }
        None
    })?;
    let distance = Interval::point(best.0.clone()).sqrt(prec);
    Ok(ClosestVector { coeffs: best.1, dist_sq: best.0, distance })
}

/// CVP for an ambient point of a lattice with exact basis: projects onto the
/// span, then adds the orthogonal part to the distance.
pub fn closest_vector_ambient(lat: &LatticeInstance, point: &[Q], prec: u32, budget: u64) -> Result<ClosestVector> {
    let b = lat.basis.as_ref().ok_or_else(|| Error::Validation("ambient targets need an exact basis".into()))?;
    if point.len() != b[0].len() {
        return Err(Error::Validation("target has the wrong dimension".into()));
    }
    let rhs: Vec<Q> = b.iter().map(|r| linalg::dot(r, point)).collect();
    let t = linalg::solve(&lat.gram, &rhs).ok_or_else(|| Error::Internal("singular Gram".into()))?;
    let proj = linalg::vec_mat(&t, b);
    let orth: Vec<Q> = point.iter().zip(&proj).map(|(a, c)| a - c).collect();
    let extra = linalg::dot(&orth, &orth);
    let mut c = closest_vector(lat, &t, prec, budget)?;
    c.dist_sq += extra;
    c.distance = Interval::point(c.dist_sq.clone()).sqrt(prec);
    Ok(c)
}

// ---------------------------------------------------------------------------
// Covering radius

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMode {
    Exact,
    Bounds,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoveringRadius {
    pub mode: CoverMode,
    #[serde(serialize_with = "crate::rational::ser::q")]
    pub sq_lower: Q,
    #[serde(serialize_with = "crate::rational::ser::q")]
    pub sq_upper: Q,
    pub radius: Interval,
    /// A point (coefficients over the basis) realising the lower bound.
    #[serde(serialize_with = "crate::rational::ser::q_vec")]
    pub deep_hole: Vec<Q>,
    /// Voronoi-relevant vectors (exact mode), one of each ± pair.
    #[serde(serialize_with = "crate::rational::ser::big_mat")]
    pub relevant: Vec<Vec<BigInt>>,
}

/// Voronoi-relevant vectors: `v` is relevant iff `±v` are the only shortest
/// vectors of the coset `v + 2L`.
pub fn voronoi_relevant(lat: &LatticeInstance, budget: u64) -> Result<Vec<Vec<BigInt>>> {
    check_rank(lat, MAX_ENUM_RANK)?;
    let k = lat.rank();
    if k > 16 {
        return Err(Error::Capacity("too many cosets".into()));
    }
    let mut out = Vec::new();
    for c in 1..(1usize << k) {
        // shortest vectors of c + 2L are c + 2y with y closest to −c/2
        let t: Vec<Q> = (0..k).map(|i| if c >> i & 1 == 1 { q_frac(-1, 2) } else { Q::zero() }).collect();
        let best = closest_vector(lat, &t, 64, budget)?;
        let mut mins: Vec<Vec<BigInt>> = Vec::new();
        let red = lll_reduce(lat, &default_delta())?;
        let uq: Mat = red.transform.iter().map(|r| r.iter().map(q_from_big).collect()).collect();
        let uinv = linalg::inverse(&uq).unwrap();
        let tr = linalg::vec_mat(&t, &uinv);
        let s = gso(&red.lattice.gram)?;
        let mut r = best.dist_sq.clone();
        let mut e = Enum { s: &s, center: &tr, nodes: 0, budget };
        let target = best.dist_sq.clone();
        e.run(&mut r, &mut |y, q| {
            if *q == target {
                mins.push(back(y, &red.transform));
            }
            None
        })?;
        if mins.len() == 2 {
            let v: Vec<BigInt> = (0..k).map(|i| BigInt::from((c >> i & 1) as i64) + 2 * &mins[0][i]).collect();
            out.push(canonical_sign(v));
        }
    }
    out.sort();
    Ok(out)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Covering radius. Exact mode (rank ≤ 4) enumerates the vertices of the
/// Voronoi cell cut out by the relevant vectors. Bounds mode (rank ≤ 10)
/// brackets μ between the largest CVP distance over a dyadic grid in the
/// fundamental parallelepiped and the Babai bound `¼ Σ ‖b*_i‖²`.
pub fn covering_radius_small(lat: &LatticeInstance, mode: CoverMode, prec: u32, budget: u64) -> Result<CoveringRadius> {
    let k = lat.rank();
    match mode {
        CoverMode::Exact => {
            if k > MAX_EXACT_COVER_RANK {
                return Err(Error::Capacity(format!("exact covering radius limited to rank {MAX_EXACT_COVER_RANK}")));
            }
            let rel = voronoi_relevant(lat, budget)?;
            let mut cons: Vec<(Vec<Q>, Q)> = Vec::new();
            for v in &rel {
                let vq: Vec<Q> = v.iter().map(q_from_big).collect();
                let gv = linalg::mat_vec(&lat.gram, &vq);
                let h = linalg::dot(&vq, &gv) / q_int(2);
                cons.push((gv.clone(), h.clone()));
                cons.push((gv.iter().map(|x| -x).collect(), h));
            }
            let mut best: Option<(Q, Vec<Q>)> = None;
            for sub in subsets(cons.len(), k) {
                let a: Mat = sub.iter().map(|&i| cons[i].0.clone()).collect();
                let rhs: Vec<Q> = sub.iter().map(|&i| cons[i].1.clone()).collect();
                let x = match linalg::solve(&a, &rhs) {
                    Some(x) => x,
                    None => continue,
                };
                if cons.iter().all(|(g, h)| linalg::dot(g, &x) <= *h) {
                    let q = linalg::bilinear(&x, &lat.gram, &x);
                    if best.as_ref().is_none_or(|(b, bx)| q > *b || (q == *b && x < *bx)) {
                        best = Some((q, x));
                    }
                }
            }
            let (q, x) = best.ok_or_else(|| Error::Internal("Voronoi cell has no vertices".into()))?;
            Ok(CoveringRadius {
                mode,
                sq_lower: q.clone(),
                sq_upper: q.clone(),
                radius: Interval::point(q).sqrt(prec),
                deep_hole: x,
                relevant: rel,
            })
        }
        CoverMode::Bounds => {
            check_rank(lat, MAX_ENUM_RANK)?;
            let red = lll_reduce(lat, &default_delta())?;
            let s = gso(&red.lattice.gram)?;
            let upper = s.b.iter().fold(Q::zero(), |a, b| a + b) / q_int(4);
            let mut lower = Q::zero();
            let mut hole = vec![Q::zero(); k];
            let mut spent = 0u64;
            'grid: for depth in 1..=16u32 {
                let den = 1i64 << depth;
                let pts = (den as u64).checked_pow(k as u32).unwrap_or(u64::MAX);
                if spent.saturating_add(pts) > GRID_POINT_CAP {
                    break;
                }
                for idx in 0..pts {
                    let mut r = idx;
                    let mut t = vec![Q::zero(); k];
                    let mut fresh = false;
                    for ti in t.iter_mut() {
                        let j = (r % den as u64) as i64;
                        r /= den as u64;
                        if j % 2 == 1 {
                            fresh = true;
                        }
                        *ti = q_frac(j, den);
                    }
                    if !fresh && depth > 1 {
                        continue;
                    }
                    spent += 1;
                    let c = match closest_vector(&red.lattice, &t, prec, budget) {
                        Ok(c) => c,
                        Err(Error::Budget(_)) => break 'grid,
                        Err(e) => return Err(e),
                    };
                    if c.dist_sq > lower {
                        lower = c.dist_sq;
                        hole = t;
                    }
                }
            }
            let uq: Mat = red.transform.iter().map(|r| r.iter().map(q_from_big).collect()).collect();
            let hole = linalg::vec_mat(&hole, &uq);
            let lo = Interval::point(lower.clone()).sqrt(prec);
            let hi = Interval::point(upper.clone()).sqrt(prec);
            Ok(CoveringRadius {
                mode,
                sq_lower: lower,
                sq_upper: upper,
                radius: Interval::new(lo.lo().clone(), hi.hi().clone()),
                deep_hole: hole,
                relevant: Vec::new(),
            })
        }
    }
}
