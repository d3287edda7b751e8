//! The fundamental domain `F_{N,ε}`: short generators `h_T ∈ O_L·q_T`, the
//! subring `O_{N,ε}`, reduction of points into the box, the exact index
//! `[O_N : O_{N,ε}]`, and the radii of the box.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::field::{eval_l_real, linv, lmul, ElementJson, FieldElement, SubsetOrder, Tower, TowerJson};
use crate::integers::{
    coords_unchecked, discriminant_n, eta, eta_basis_available, is_integral_l, l_to_lambda, lambda,
    lambda_basis_available, IntegralCoordinates,
};
use crate::interval::{certified_floor, Interval};
use crate::lattice::{shortest_vector_linf, LatticeInstance, DEFAULT_NODE_BUDGET, MAX_ENUM_RANK};
use crate::linalg::{self, Mat};
use crate::rational::{floor, pow2, q_from_big, q_int, to_decimal, Q};

pub const DEFAULT_VERTEX_CAP: u64 = 1 << 20;

/// Scalars a point can be reduced over: exact rationals or intervals.
pub trait Coefficient: Clone + std::fmt::Debug {
    fn from_q(q: Q) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub_q(&self, q: &Q) -> Self;
    fn scale(&self, q: &Q) -> Self;
    fn floor_cert(&self) -> Result<BigInt>;
}

impl Coefficient for Q {
    fn from_q(q: Q) -> Self {
        q
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_q(&self, q: &Q) -> Self {
        self - q
    }
    fn scale(&self, q: &Q) -> Self {
        self * q
    }
    fn floor_cert(&self) -> Result<BigInt> {
        Ok(floor(self))
    }
}

impl Coefficient for Interval {
    fn from_q(q: Q) -> Self {
        Interval::point(q)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_q(&self, q: &Q) -> Self {
        self.shift(&-q)
    }
    fn scale(&self, q: &Q) -> Self {
        Interval::scale(self, q)
    }
    fn floor_cert(&self) -> Result<BigInt> {
        certified_floor(self)
    }
}

/// `h_T`, the bases `B_T = {h_T λ_D}`, and the generators
/// `(b q_T^{-1}) η_T` of `O_{N,ε}`.
#[derive(Clone, Debug)]
pub struct Domain {
    tower: Tower,
    order_spec: SubsetOrder,
    order: Vec<u32>,
    /// `h_T`, indexed by the mask T.
    h: Vec<FieldElement>,
    /// `h_T / q_T` as dense L-vectors.
    s: Vec<Vec<Q>>,
    /// Rows map the L-coefficients of a `q_T`-component to coordinates over `B_T`.
    coord_maps: Vec<Mat>,
    /// `(h_T λ_D / q_T) η_T`.
    gens: Vec<Vec<FieldElement>>,
    h_linf: Vec<Interval>,
    bound: Interval,
    precision: u32,
}

fn check_domain_tower(tower: &Tower) -> Result<()> {
    lambda_basis_available(tower)?;
    eta_basis_available(tower)?;
    if tower.num_units() > 0 {
        if !tower.l_totally_real() {
            return Err(Error::NotCm("domain needs a totally real L under a CM tower".into()));
        }
        for (j, row) in tower.unit_signs()?.iter().enumerate() {
            if row.iter().any(|&s| s > 0) {
                return Err(Error::NotCm(format!("w_{j} is not totally negative")));
            }
        }
    }
    Ok(())
}

/// Certified `Δ(L)^{1/(2n(L))}`.
pub fn h_bound(tower: &Tower, prec: u32) -> Interval {
    let dl = crate::integers::discriminant_l(tower);
    Interval::point(q_from_big(&dl)).nth_root(2 * tower.degree_l() as u32, prec)
}

/// `O_L·q_T` in the real coordinates `y_σ = σ(s) ∏_{w∈T} √|σ(w)|`, with
/// exact Gram `Tr_L(λ_D λ_D' |w_T|)`.
pub fn twisted_lattice(tower: &Tower, t: usize) -> Result<LatticeInstance> {
    let nl = tower.degree_l();
    let mprod: Vec<BigInt> = tower.mprod().to_vec();
    let sign = if (t.count_ones() % 2) == 1 { -Q::one() } else { Q::one() };
    let wabs: Vec<Q> = tower.w_dense(t).iter().map(|c| c * &sign).collect();
    let lam: Vec<Vec<Q>> = (0..nl).map(|d| lambda(tower, d).l_part(0)).collect();
    let n = q_int(nl as i64);
    let gram: Mat = (0..nl)
        .map(|a| {
            (0..nl)
                .map(|b| {
                    let p = lmul(&lmul(&lam[a], &lam[b], &mprod), &wabs, &mprod);
                    &p[0] * &n
                })
                .collect()
        })
        .collect();
    let coords = Arc::new(move |prec: u32| {
        let p = prec + 16;
        let scale: Vec<Interval> = (0..nl).map(|sg| eval_l_real(&wabs, &mprod, sg, p).sqrt(p)).collect();
        lam.iter().map(|l| (0..nl).map(|sg| (&eval_l_real(l, &mprod, sg, p) * &scale[sg]).round(p)).collect()).collect()
    });
    LatticeInstance::with_coords(gram, coords)
}

impl Domain {
    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    /// Subsets in ascending order.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn subset_order(&self) -> &SubsetOrder {
        &self.order_spec
    }

    pub fn h(&self, t: usize) -> &FieldElement {
        &self.h[t]
    }

    pub fn h_linf(&self, t: usize) -> &Interval {
        &self.h_linf[t]
    }

    /// `Δ(L)^{1/(2n(L))}`.
    pub fn bound(&self) -> &Interval {
        &self.bound
    }

    /// `h_T / q_T`.
    pub fn h_over_q(&self, t: usize) -> FieldElement {
        self.tower.from_l(self.s[t].clone())
    }

    /// `B_T = {h_T λ_D}`.
    pub fn basis_t(&self, t: usize) -> Vec<FieldElement> {
        (0..self.tower.degree_l()).map(|d| &self.h[t] * &lambda(&self.tower, d)).collect()
    }

    /// Z-basis of `O_{N,ε}`, ordered by `(T, D)`.
    pub fn subring_basis(&self) -> Vec<FieldElement> {
        self.gens.iter().flatten().cloned().collect()
    }

    pub fn coefficient_count(&self) -> usize {
        self.tower.degree()
    }

    fn assemble(tower: &Tower, order_spec: SubsetOrder, s: Vec<Vec<Q>>, prec: u32) -> Result<Domain> {
        let order = order_spec.sequence(tower.num_units())?;
        let nl = tower.degree_l();
        let mprod = tower.mprod();
        let mut h = Vec::new();
        let mut coord_maps = Vec::new();
        let mut gens = Vec::new();
        let mut h_linf = Vec::new();
        let emb = Embedder::new(tower, prec)?;
        for (t, st) in s.iter().enumerate() {
            if !is_integral_l(tower, st) || st.iter().all(|c| c.is_zero()) {
                return Err(Error::Validation(format!("h_T/q_T for T = {t:#b} is not a nonzero element of O_L")));
            }
            let ht = &tower.from_l(st.clone()) * &tower.q_t(t);
            let inv = linv(st, mprod).ok_or(Error::DivisionByZero)?;
            // column D: λ-coordinates of e_D · s_T^{-1}
            let cols: Vec<Vec<Q>> = (0..nl)
                .map(|d| {
                    let mut e = vec![Q::zero(); nl];
                    e[d] = Q::one();
                    l_to_lambda(tower, &lmul(&e, &inv, mprod))
                })
                .collect();
            coord_maps.push(linalg::transpose(&cols));
            let et = eta(tower, t);
            let sl = tower.from_l(st.clone());
            gens.push((0..nl).map(|d| &(&sl * &lambda(tower, d)) * &et).collect());
            h_linf.push(emb.norms(&ht).linf);
            h.push(ht);
        }
        Ok(Domain {
            tower: tower.clone(),
            order_spec,
            order,
            h,
            s,
            coord_maps,
            gens,
            h_linf,
            bound: h_bound(tower, prec),
            precision: prec,
        })
    }

    pub fn to_json(&self) -> DomainJson {
        DomainJson {
            tower: self.tower.to_json(),
            subset_order: self.order_spec.clone(),
            h: self.h.iter().map(|x| x.to_json()).collect(),
            h_expr: self.h.iter().map(|x| x.to_string()).collect(),
            h_linf: self.h_linf.clone(),
            bound: Some(self.bound.clone()),
            precision_bits: self.precision,
        }
    }

    /// Rebuilds a domain from its `h_T`, revalidating them.
    pub fn from_json(j: &DomainJson) -> Result<Domain> {
        let tower = Tower::from_json(&j.tower)?;
        check_domain_tower(&tower)?;
        if j.h.len() != 1 << tower.num_units() {
            return Err(Error::Validation("domain needs one h_T per subset".into()));
        }
        let mut s = Vec::new();
        for (t, hj) in j.h.iter().enumerate() {
            let ht = tower.element_from_json(hj)?;
            let st = (&ht * &tower.q_t(t).inverse()?).l_parts();
            if st.iter().enumerate().any(|(u, p)| u != 0 && p.iter().any(|c| !c.is_zero())) {
                return Err(Error::Validation(format!("h_T for T = {t:#b} does not lie in L·q_T")));
            }
            s.push(st[0].clone());
        }
        if !tower.from_l(s[0].clone()).is_one() {
            return Err(Error::Validation("h_∅ must be 1".into()));
        }
        Domain::assemble(&tower, j.subset_order.clone(), s, j.precision_bits.max(64))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainJson {
    pub tower: TowerJson,
    #[serde(default)]
    pub subset_order: SubsetOrder,
    pub h: Vec<ElementJson>,
    #[serde(default)]
    pub h_expr: Vec<String>,
    #[serde(default)]
    pub h_linf: Vec<Interval>,
    #[serde(default)]
    pub bound: Option<Interval>,
    #[serde(default = "default_prec")]
    pub precision_bits: u32,
}

fn default_prec() -> u32 {
    128
}

/// Builds the domain with `h_T` the L∞-shortest element of `O_L q_T`
/// (lexicographically least coefficients on ties).
pub fn build_domain(tower: &Tower, order: SubsetOrder, prec: u32) -> Result<Domain> {
    check_domain_tower(tower)?;
    let nl = tower.degree_l();
    if tower.num_units() > 0 && nl > MAX_ENUM_RANK {
        return Err(Error::Capacity(format!("n(L) = {nl} exceeds the enumeration cap")));
    }
    let bound = h_bound(tower, prec);
    let mut s = vec![{
        let mut one = vec![Q::zero(); nl];
        one[0] = Q::one();
        one
    }];
    for t in 1..(1usize << tower.num_units()) {
        let lat = twisted_lattice(tower, t)?;
        let v = shortest_vector_linf(&lat, &bound, prec, DEFAULT_NODE_BUDGET)?.ok_or_else(|| {
            Error::Internal(format!("no element of O_L q_T within the Minkowski bound for T = {t:#b}"))
        })?;
        let y: Vec<Q> = v.coeffs.iter().map(q_from_big).collect();
        s.push(crate::integers::lambda_to_l(tower, &y));
    }
    Domain::assemble(tower, order, s, prec)
}

// ---------------------------------------------------------------------------
// Reduction

#[derive(Clone, Debug)]
pub struct ReductionResult<S> {
    /// `r_b` per `(T, D)`, with `0 ≤ r_b < 2^{-#T}`.
    pub residue: Vec<Vec<S>>,
    /// Coordinates of τ over the generators of `O_{N,ε}`.
    pub shift: Vec<Vec<BigInt>>,
    pub shift_element: FieldElement,
    pub exact: bool,
}

impl<S: Coefficient> ReductionResult<S> {
    pub fn shift_integral(&self) -> Result<IntegralCoordinates> {
        crate::integers::to_integral_coordinates(&self.shift_element)
    }
}

impl ReductionResult<Q> {
    pub fn residue_element(&self, dom: &Domain) -> FieldElement {
        let mut acc = dom.tower.zero();
        for (t, row) in self.residue.iter().enumerate() {
            for (b, r) in dom.basis_t(t).iter().zip(row) {
                acc = &acc + &b.scale(r);
            }
        }
        acc
    }
}

fn reduce_core<S: Coefficient>(dom: &Domain, mut c: Vec<S>) -> Result<ReductionResult<S>> {
    let tower = &dom.tower;
    let ell = tower.ell();
    let nl = tower.degree_l();
    let ns = 1usize << tower.num_units();
    let mut residue = vec![Vec::new(); ns];
    let mut shift = vec![vec![BigInt::zero(); nl]; ns];
    let mut tau = tower.zero();
    for &t in dom.order.iter().rev() {
        let t = t as usize;
        let a: Vec<S> = (0..nl).map(|d| c[(t << ell) | d].clone()).collect();
        let scale = pow2(t.count_ones() as i64);
        let unscale = pow2(-(t.count_ones() as i64));
        let mut row = Vec::with_capacity(nl);
        for d in 0..nl {
            let mut acc = S::from_q(Q::zero());
            for (m, x) in dom.coord_maps[t][d].iter().zip(&a) {
                if !m.is_zero() {
                    acc = acc.add(&x.scale(m));
                }
            }
            let sb = acc.scale(&scale);
            let f = sb.floor_cert()?;
            row.push(sb.sub_q(&q_from_big(&f)).scale(&unscale));
            shift[t][d] = f;
        }
        for d in 0..nl {
            let f = &shift[t][d];
            if f.is_zero() {
                continue;
            }
            let fq = q_from_big(f);
            let g = dom.gens[t][d].scale(&fq);
            for (ci, gi) in c.iter_mut().zip(g.coeffs()) {
                if !gi.is_zero() {
                    *ci = ci.sub_q(gi);
                }
            }
            tau = &tau + &g;
        }
        residue[t] = row;
    }
    Ok(ReductionResult { residue, shift, shift_element: tau, exact: false })
}

/// Moves an exact point into the box: `alpha = residue + τ`, `τ ∈ O_{N,ε}`.
pub fn reduce_point(dom: &Domain, alpha: &FieldElement) -> Result<ReductionResult<Q>> {
    if alpha.tower() != &dom.tower {
        return Err(Error::TowerMismatch);
    }
    let mut r = reduce_core(dom, alpha.coeffs().to_vec())?;
    r.exact = true;
    Ok(r)
}

/// Interval version; fails with a precision error when a floor is undecided.
pub fn reduce_point_interval(dom: &Domain, alpha: &[Interval]) -> Result<ReductionResult<Interval>> {
    if alpha.len() != dom.tower.degree() {
        return Err(Error::Validation("point has the wrong number of coefficients".into()));
    }
    reduce_core(dom, alpha.to_vec())
}

/// Coordinates of `alpha` over the domain basis `⋃_T B_T`.
pub fn box_coordinates(dom: &Domain, alpha: &FieldElement) -> Vec<Vec<Q>> {
    let ell = dom.tower.ell();
    let nl = dom.tower.degree_l();
    (0..(1usize << dom.tower.num_units()))
        .map(|t| {
            let a: Vec<Q> = (0..nl).map(|d| alpha.coeffs()[(t << ell) | d].clone()).collect();
            linalg::mat_vec(&dom.coord_maps[t], &a)
        })
        .collect()
}

pub fn in_box(dom: &Domain, alpha: &FieldElement) -> bool {
    box_coordinates(dom, alpha).iter().enumerate().all(|(t, row)| {
        let top = pow2(-(t.count_ones() as i64));
        row.iter().all(|r| !r.is_negative() && *r < top)
    })
}

// ---------------------------------------------------------------------------
// Index and covolume

#[derive(Clone, Debug, Serialize)]
pub struct IndexReport {
    #[serde(serialize_with = "crate::rational::ser::big")]
    pub by_norms: BigInt,
    #[serde(serialize_with = "crate::rational::ser::big")]
    pub by_determinant: BigInt,
}

/// `[O_N : O_{N,ε}]` as `∏_T |N_{L/Q}(h_T/q_T)|` and as the determinant of
/// the change of basis from `{η_T λ_D}`; a mismatch is an internal error.
pub fn index_in_on(dom: &Domain) -> Result<IndexReport> {
    let mut by_norms = BigInt::one();
    for t in 0..dom.s.len() {
        let n = dom.h_over_q(t).to_base()?.norm().abs();
        by_norms *= n.to_integer();
    }
    let m: Mat = dom.subring_basis().iter().map(coords_unchecked).collect();
    let det = linalg::det(&m).abs();
    if !det.is_integer() {
        return Err(Error::Internal("non-integral change-of-basis determinant".into()));
    }
    let by_determinant = det.to_integer();
    if by_norms != by_determinant {
        return Err(Error::Internal(format!("index mismatch: {by_norms} vs {by_determinant}")));
    }
    Ok(IndexReport { by_norms, by_determinant })
}

/// `(covol(O_{N,ε})², 2^{-2r₂} |Δ(N)| · index²)`, both exact.
pub fn covolume_identity(dom: &Domain) -> Result<(Q, Q)> {
    let cj = dom.tower.conjugation()?;
    let b = dom.subring_basis();
    let g: Mat = b.iter().map(|x| b.iter().map(|y| x.inner_with(y, &cj)).collect()).collect();
    let lhs = linalg::det(&g);
    let (_, r2) = dom.tower.signature()?;
    let idx = q_from_big(&index_in_on(dom)?.by_norms);
    let rhs = q_from_big(&discriminant_n(&dom.tower)?) * pow2(-2 * r2 as i64) * &idx * &idx;
    Ok((lhs, rhs))
}

/// Exact Gram of the domain basis under the tower inner product.
pub fn domain_gram(dom: &Domain) -> Result<Mat> {
    let cj = dom.tower.conjugation()?;
    let b: Vec<FieldElement> = (0..dom.s.len()).flat_map(|t| dom.basis_t(t)).collect();
    Ok(b.iter().map(|x| b.iter().map(|y| x.inner_with(y, &cj)).collect()).collect())
}

// ---------------------------------------------------------------------------
// Radii

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMethod {
    /// Maximum over all vertices of the closed box.
    Vertex,
    /// Vertex maximum per orthogonal block `T`, summed in squares.
    BlockVertex,
    /// `Σ_T 2^{-#T} Σ_b ‖b‖`.
    Triangle,
}

#[derive(Clone, Debug, Serialize)]
pub struct DomainRadii {
    pub linf: Interval,
    pub l2: Interval,
    pub linf_method: RadiusMethod,
    pub l2_method: RadiusMethod,
    pub linf_triangle: Interval,
    pub l2_triangle: Interval,
}

/// Supremum of `‖·‖∞` and `‖·‖₂` over the closed box.
pub fn domain_radii(dom: &Domain, vertex_cap: u64, prec: u32) -> Result<DomainRadii> {
    let tower = &dom.tower;
    let emb = Embedder::new(tower, prec)?;
    let cj = tower.conjugation()?;
    let ns = dom.s.len();
    let nl = tower.degree_l();
    let n = tower.degree();
    let basis: Vec<Vec<FieldElement>> = (0..ns).map(|t| dom.basis_t(t)).collect();
    let side = |t: usize| pow2(-(t.count_ones() as i64));

    // triangle bounds
    let mut linf_tri = Interval::zero();
    let mut l2_tri = Interval::zero();
    for (t, bt) in basis.iter().enumerate() {
        for b in bt {
            let nb = emb.norms(b);
            linf_tri = &linf_tri + &nb.linf.scale(&side(t));
            let l2 = Interval::point(b.inner_with(b, &cj)).sqrt(prec);
            l2_tri = &l2_tri + &l2.scale(&side(t));
        }
    }
    let linf_tri = linf_tri.round(prec);
    let l2_tri = l2_tri.round(prec);

    // L²: the Gram is block diagonal across T, so the sup splits per block
    let per_block = 1u64 << nl;
    let (l2, l2_method) = if per_block <= vertex_cap {
        let mut total = Q::zero();
        for (t, bt) in basis.iter().enumerate() {
            let g: Mat = bt.iter().map(|x| bt.iter().map(|y| x.inner_with(y, &cj)).collect()).collect();
            let c = side(t);
            let mut best = Q::zero();
            for v in 0..per_block {
                let x: Vec<Q> = (0..nl).map(|d| if v >> d & 1 == 1 { c.clone() } else { Q::zero() }).collect();
                let q = linalg::bilinear(&x, &g, &x);
                if q > best {
                    best = q;
                }
            }
            total += best;
        }
        (Interval::point(total).sqrt(prec), if ns == 1 { RadiusMethod::Vertex } else { RadiusMethod::BlockVertex })
    } else {
        (l2_tri.clone(), RadiusMethod::Triangle)
    };

    // L∞: every vertex, every embedding
    let vertices = if n >= 64 { u64::MAX } else { 1u64 << n };
    let (linf, linf_method) = if vertices <= vertex_cap {
        let flat: Vec<(Q, Vec<crate::interval::ComplexInterval>)> = basis
            .iter()
            .enumerate()
            .flat_map(|(t, bt)| bt.iter().map(move |b| (t, b)))
            .map(|(t, b)| (side(t), emb.values(b)))
            .collect();
        let mut best: Option<Interval> = None;
        for e in 0..n {
            for v in 0..vertices {
                let mut acc = crate::interval::ComplexInterval::zero();
                for (i, (c, vals)) in flat.iter().enumerate() {
                    if v >> i & 1 == 1 {
                        acc = &acc + &vals[e].scale(c);
                    }
                }
                let q = acc.norm_sqr().round(prec);
                best = Some(match best {
                    None => q,
                    Some(b) => b.max(&q),
                });
            }
        }
        (best.unwrap().sqrt(prec), RadiusMethod::Vertex)
    } else {
        (linf_tri.clone(), RadiusMethod::Triangle)
    };
    Ok(DomainRadii { linf, l2, linf_method, l2_method, linf_triangle: linf_tri, l2_triangle: l2_tri })
}

// ---------------------------------------------------------------------------
// Report

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub l2_radius: Interval,
    pub linf_radius: Interval,
    pub log_n_l2: Option<Interval>,
    pub log_n_linf: Option<Interval>,
    #[serde(serialize_with = "crate::rational::ser::big")]
    pub index: BigInt,
    pub eps_hat: Option<Interval>,
    /// `½ + log₂(√5/2)`.
    pub target_nu2: Interval,
    /// `log₂(3/2)`.
    pub target_nuinf: Interval,
    pub target_nu2_at_eps: Option<Interval>,
    pub target_nuinf_at_eps: Option<Interval>,
    pub linf_method: RadiusMethod,
    pub l2_method: RadiusMethod,
}

pub const REPORT_COLUMNS: [&str; 9] =
    ["n", "l2_radius", "linf_radius", "log_n_l2", "log_n_linf", "index", "eps_hat", "target_nu2", "target_nuinf"];

/// The two asymptotic exponents, computed with certified logarithms.
pub fn asymptotic_targets(prec: u32) -> Result<(Interval, Interval)> {
    let ln2 = Interval::ln2(prec);
    let half = Q::new(1.into(), 2.into());
    // log₂(√5/2) = ½ log₂(5/4)
    let nu2 = Interval::point(Q::new(5.into(), 4.into())).ln(prec)?.div(&ln2)?.scale(&half).shift(&half);
    let nuinf = Interval::point(Q::new(3.into(), 2.into())).ln(prec)?.div(&ln2)?;
    Ok((nu2.round(prec), nuinf.round(prec)))
}

pub fn bound_report(dom: &Domain, vertex_cap: u64, prec: u32) -> Result<BoundReport> {
    let radii = domain_radii(dom, vertex_cap, prec)?;
    let idx = index_in_on(dom)?.by_norms;
    let n = dom.tower.degree();
    let (nu2, nuinf) = asymptotic_targets(prec)?;
    let emb = Embedder::new(&dom.tower, prec)?;
    let (log_l2, log_linf, eps_hat) = if n >= 2 {
        let ln_n = Interval::from_int(n as i64).ln(prec)?;
        let logn = |x: &Interval| -> Result<Interval> { Ok(x.ln(prec)?.div(&ln_n)?.round(prec)) };
        let mut eps: Option<Interval> = None;
        for t in 0..dom.s.len() {
            for b in dom.basis_t(t) {
                let v = logn(&emb.norms(&b).linf)?;
                eps = Some(match eps {
                    None => v,
                    Some(e) => e.max(&v),
                });
            }
        }
        (Some(logn(&radii.l2)?), Some(logn(&radii.linf)?), eps)
    } else {
        (None, None, None)
    };
    let two = q_int(2);
    let at_eps = |base: &Interval| eps_hat.as_ref().map(|e| (base + &e.scale(&two)).round(prec));
    Ok(BoundReport {
        n,
        l2_radius: radii.l2,
        linf_radius: radii.linf,
        log_n_l2: log_l2,
        log_n_linf: log_linf,
        index: idx,
        eps_hat: eps_hat.clone(),
        target_nu2_at_eps: at_eps(&nu2),
        target_nuinf_at_eps: at_eps(&nuinf),
        target_nu2: nu2,
        target_nuinf: nuinf,
        linf_method: radii.linf_method,
        l2_method: radii.l2_method,
    })
}

/// Decimal rendering used in CSV: the interval midpoint to `digits` places.
pub fn decimal(iv: &Interval, digits: usize) -> String {
    to_decimal(&iv.mid(), digits, false)
}

impl BoundReport {
    pub fn csv_row(&self) -> String {
        let opt = |x: &Option<Interval>| x.as_ref().map_or_else(|| "NA".to_string(), |v| decimal(v, 12));
        [
            self.n.to_string(),
            decimal(&self.l2_radius, 12),
            decimal(&self.linf_radius, 12),
            opt(&self.log_n_l2),
            opt(&self.log_n_linf),
            self.index.to_string(),
            opt(&self.eps_hat),
            decimal(&self.target_nu2, 12),
            decimal(&self.target_nuinf, 12),
        ]
        .join(",")
    }

    pub fn csv(&self) -> String {
        format!("{}\n{}\n", REPORT_COLUMNS.join(","), self.csv_row())
    }
}

/// Index as a machine integer when it fits.
pub fn index_u64(r: &IndexReport) -> Option<u64> {
    r.by_norms.to_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_degenerate_domain() {
        let t = Tower::base_i64(&[5]).unwrap();
        let d = build_domain(&t, SubsetOrder::default(), 128).unwrap();
        assert_eq!(d.basis_t(0)[1], t.parse_element("(1+sqrt(5))/2").unwrap());
        let r = domain_radii(&d, DEFAULT_VERTEX_CAP, 128).unwrap();
        assert!((r.l2.to_f64() - 7f64.sqrt()).abs() < 1e-15);
        assert!((r.linf.to_f64() - 2.618033988749895).abs() < 1e-12);
        assert_eq!(index_in_on(&d).unwrap().by_norms, BigInt::one());
        let a = t.parse_element("7/3 - 5/2*sqrt(5)").unwrap();
        let red = reduce_point(&d, &a).unwrap();
        assert_eq!(&red.residue_element(&d) + &red.shift_element, a);
        assert!(in_box(&d, &red.residue_element(&d)));
    }

    #[test]
    fn targets_match_constants() {
        let (a, b) = asymptotic_targets(128).unwrap();
        assert!((a.to_f64() - 0.660964047443681).abs() < 1e-12);
        assert!((b.to_f64() - 0.584962500721156).abs() < 1e-12);
    }

    #[test]
    fn cm_tower_domain() {
        let l = Tower::base_i64(&[5, 41]).unwrap();
        let w = l.parse_element("-315 + 126*sqrt(5) - 44*sqrt(41) + 22*sqrt(205)").unwrap();
        let n = Tower::with_units(l.level1(), &[w]).unwrap();
        let d = build_domain(&n, SubsetOrder::default(), 128).unwrap();
        assert!(d.h_linf(1).certainly_le(d.bound()));
        let idx = index_in_on(&d).unwrap();
        assert_eq!(idx.by_norms, idx.by_determinant);
        let (lhs, rhs) = covolume_identity(&d).unwrap();
        assert_eq!(lhs, rhs);
    }
}
