//! Certificates that `L(√w)/L` is unramified at every finite prime,
//! validation of the orthogonality hypothesis on second-step units, the
//! desk-scale unit search, and assembly of validated towers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::embed::sign_in_embedding;
use crate::error::{Error, Result};
use crate::field::{ElementJson, FieldElement, Tower, TowerJson};
use crate::integers::{
    discriminant_l, in_one_plus_4ol, is_integral_l, is_square_mod4, is_unit_l, l_to_lambda, lambda,
    lambda_basis_available, lambda_to_l, quadratic_discriminant, square_class_independent, trace_discriminant,
};
use crate::linalg;
use crate::rational::{factor, is_integer, lcm_of_denominators, q_from_big, q_int, Q};

/// Trial-division limit used when factoring norms and contents.
pub const FACTOR_LIMIT: u64 = 10_000_000;

// ---------------------------------------------------------------------------
// Ideals of a quadratic field, as Z-modules in the basis (1, ω).

/// Integral ideal of `O_L` for quadratic `L`, stored by its row HNF over `(1, ω)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadIdeal {
    tower: Tower,
    rows: Vec<Vec<BigInt>>,
}

impl QuadIdeal {
    fn coords(tower: &Tower, x: &FieldElement) -> Vec<Q> {
        l_to_lambda(tower, &x.l_part(0))
    }

    /// Ideal generated by the given integral elements.
    pub fn from_gens(tower: &Tower, gens: &[FieldElement]) -> Result<QuadIdeal> {
        if tower.ell() != 1 || tower.num_units() != 0 {
            return Err(Error::Validation("quadratic ideals need a quadratic base field".into()));
        }
        let omega = lambda(tower, 1);
        let mut rows = Vec::new();
        for g in gens {
            for h in [g.clone(), g * &omega] {
                let c = Self::coords(tower, &h);
                if !c.iter().all(is_integer) {
                    return Err(Error::Validation(format!("ideal generator {g} is not integral")));
                }
                rows.push(c.iter().map(|q| q.to_integer()).collect());
            }
        }
        let rows = linalg::hnf_rows(&rows);
        if rows.len() != 2 {
            return Err(Error::Validation("ideal generators span a degenerate module".into()));
        }
        Ok(QuadIdeal { tower: tower.clone(), rows })
    }

    pub fn unit(tower: &Tower) -> Result<QuadIdeal> {
        Self::from_gens(tower, &[tower.one()])
    }

    pub fn basis(&self) -> Vec<FieldElement> {
        self.rows
            .iter()
            .map(|r| {
                let y: Vec<Q> = r.iter().map(q_from_big).collect();
                self.tower.from_l(lambda_to_l(&self.tower, &y))
            })
            .collect()
    }

    /// Index `[O_L : I]`.
    pub fn norm(&self) -> BigInt {
        (&self.rows[0][0] * &self.rows[1][1] - &self.rows[0][1] * &self.rows[1][0]).abs()
    }

    pub fn mul(&self, other: &QuadIdeal) -> Result<QuadIdeal> {
        let mut gens = Vec::new();
        for a in self.basis() {
            for b in other.basis() {
                gens.push(&a * &b);
            }
        }
        Self::from_gens(&self.tower, &gens)
    }

    pub fn pow(&self, k: u32) -> Result<QuadIdeal> {
        let mut acc = Self::unit(&self.tower)?;
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    pub fn contains(&self, x: &FieldElement) -> bool {
        let c = Self::coords(&self.tower, x);
        let m: linalg::Mat = linalg::transpose(&self.rows.iter().map(|r| r.iter().map(q_from_big).collect()).collect());
        match linalg::solve(&m, &c) {
            Some(s) => s.iter().all(is_integer),
            None => false,
        }
    }

    pub fn conjugate(&self) -> Result<QuadIdeal> {
        let gens: Vec<FieldElement> = self.basis().iter().map(|b| b.galois_l(1)).collect::<Result<_>>()?;
        Self::from_gens(&self.tower, &gens)
    }

    pub fn describe(&self) -> String {
        let b: Vec<String> = self.basis().iter().map(|x| x.to_string()).collect();
        format!("Z-span{{{}}}", b.join(", "))
    }
}

/// Prime ideals above `p` in a quadratic field, via Kummer–Dedekind on the
/// minimal polynomial of ω.
pub fn primes_above(tower: &Tower, p: &BigInt) -> Result<Vec<QuadIdeal>> {
    let omega = lambda(tower, 1);
    let tr = omega.to_base()?.trace().to_integer();
    let nm = omega.to_base()?.norm().to_integer();
    let pu = p.to_u64().ok_or_else(|| Error::Capacity(format!("prime {p} too large")))?;
    let mut roots = Vec::new();
    for r in 0..pu {
        let r = BigInt::from(r);
        let f = &r * &r - &tr * &r + &nm;
        if f.mod_floor(p).is_zero() {
            roots.push(r);
        }
    }
    let pe = tower.from_q(q_from_big(p));
    match roots.len() {
        0 => Ok(vec![QuadIdeal::from_gens(tower, &[pe])?]),
        1 => Ok(vec![QuadIdeal::from_gens(tower, &[pe, &omega - &tower.from_q(q_from_big(&roots[0]))])?]),
        _ => {
            // a double root mod p (ramified) shows up once; distinct roots split
            let mut out = Vec::new();
            for r in &roots {
                out.push(QuadIdeal::from_gens(tower, &[pe.clone(), &omega - &tower.from_q(q_from_big(r))])?);
            }
            out.dedup();
            Ok(out)
        }
    }
}

fn valuation_at(ideal: &QuadIdeal, x: &FieldElement) -> Result<u32> {
    let mut k = 0;
    let mut pw = ideal.clone();
    while pw.contains(x) {
        k += 1;
        pw = pw.mul(ideal)?;
        if k > 4096 {
            return Err(Error::Internal("runaway valuation".into()));
        }
    }
    Ok(k)
}

/// Factorisation of the principal ideal `xO_L` of a nonzero integral `x`.
pub fn factor_principal(x: &FieldElement) -> Result<Vec<(QuadIdeal, u32)>> {
    let tower = x.tower().clone();
    let n = x.to_base()?.norm().to_integer();
    let mut out = Vec::new();
    for (p, _) in factor(&n, FACTOR_LIMIT)? {
        for pr in primes_above(&tower, &p)? {
            let v = valuation_at(&pr, x)?;
            if v > 0 {
                out.push((pr, v));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Fundamental units of quadratic fields.

/// Fundamental unit `ε = a + b√d > 1` of the real quadratic field `Q(√d)`,
/// from the continued fraction of the ring generator ω.
pub fn fundamental_unit(d: &BigInt) -> Result<(Q, Q)> {
    if !d.is_positive() || *d == BigInt::one() {
        return Err(Error::Validation(format!("fundamental unit needs a real quadratic field, got d = {d}")));
    }
    let one_mod_4 = d.mod_floor(&BigInt::from(4)).is_one();
    let (mut pp, mut qq) = if one_mod_4 { (BigInt::one(), BigInt::from(2)) } else { (BigInt::zero(), BigInt::one()) };
    // trace and norm of ω
    let (tr, nm) = if one_mod_4 { (BigInt::one(), (BigInt::one() - d) / 4) } else { (BigInt::zero(), -d.clone()) };
    let sd = d.sqrt();
    let (mut p1, mut p0) = (BigInt::one(), BigInt::zero());
    let (mut q1, mut q0) = (BigInt::zero(), BigInt::one());
    for _ in 0..200_000 {
        let a = (&pp + &sd).div_floor(&qq);
        let p2 = &a * &p1 + &p0;
        let q2 = &a * &q1 + &q0;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        let norm = &p1 * &p1 - &p1 * &q1 * &tr + &q1 * &q1 * &nm;
        if norm.abs().is_one() {
            // ε = p − q ω̄ = (p − q tr) + q ω
            let (a0, b0) = (&p1 - &q1 * &tr, q1.clone());
            let half = Q::new(1.into(), 2.into());
            return Ok(if one_mod_4 {
                (q_from_big(&a0) + q_from_big(&b0) * &half, q_from_big(&b0) * &half)
            } else {
                (q_from_big(&a0), q_from_big(&b0))
            });
        }
        let pn = &a * &qq - &pp;
        qq = (d - &pn * &pn) / &qq;
        pp = pn;
    }
    Err(Error::Budget(format!("continued fraction of √{d} did not reach a unit")))
}

/// Fundamental unit of `Q(√m_D)` as an element of L.
pub fn subfield_unit(tower: &Tower, d: usize) -> Result<FieldElement> {
    let (a, b) = fundamental_unit(tower.m_d(d))?;
    let mut x = vec![Q::zero(); tower.degree_l()];
    x[0] = a;
    x[d] = b;
    Ok(tower.base_tower().from_l(x))
}

// ---------------------------------------------------------------------------
// Certificates.

#[derive(Clone, Debug, Serialize)]
pub struct VerifiedFacts {
    pub beta2w_in_1_plus_4ol: bool,
    pub ideal_is_square: bool,
    pub ideal_sqrt_description: Option<String>,
}

#[derive(Clone, Debug)]
pub struct UnramifiedCertificate {
    pub w: FieldElement,
    pub beta: FieldElement,
    pub facts: VerifiedFacts,
    /// How the ideal-square fact was decided: "unit", "rational" or "quadratic".
    pub regime: &'static str,
    /// Z-basis of `O_{L(√w)}` when it was assembled, as elements of `L(√w)`.
    pub extension_basis: Option<Vec<FieldElement>>,
    /// `|disc|` of the emitted basis.
    pub extension_discriminant: Option<BigInt>,
    pub relative_discriminant_trivial: Option<bool>,
}

impl UnramifiedCertificate {
    pub fn is_valid(&self) -> bool {
        self.facts.beta2w_in_1_plus_4ol && self.facts.ideal_is_square
    }

    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            field: self.w.tower().base_tower().to_json(),
            w: self.w.to_json(),
            w_expr: self.w.to_string(),
            beta: self.beta.to_json(),
            beta_expr: self.beta.to_string(),
            valid: self.is_valid(),
            regime: self.regime.to_string(),
            verified_facts: self.facts.clone(),
            extension: self.extension_basis.as_ref().map(|b| ExtensionJson {
                field: b[0].tower().to_json(),
                basis: b.iter().map(|x| x.to_json()).collect(),
                discriminant: self.extension_discriminant.as_ref().map(|d| d.to_string()).unwrap_or_default(),
                relative_discriminant_trivial: self.relative_discriminant_trivial.unwrap_or(false),
            }),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionJson {
    pub field: TowerJson,
    pub basis: Vec<ElementJson>,
    pub discriminant: String,
    pub relative_discriminant_trivial: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateJson {
    pub field: TowerJson,
    pub w: ElementJson,
    pub w_expr: String,
    pub beta: ElementJson,
    pub beta_expr: String,
    pub valid: bool,
    pub regime: String,
    pub verified_facts: VerifiedFacts,
    pub extension: Option<ExtensionJson>,
}

/// Square root of the ideal `vO_L` in a Z-basis description of `𝒜^{-1}`,
/// together with the verdict.
struct SquareDecision {
    is_square: bool,
    regime: &'static str,
    description: Option<String>,
    inverse_sqrt_basis: Option<Vec<FieldElement>>,
}

/// `e_p` of `p` in the multiquadratic L: `2^ℓ / #{D : Q(√m_D) unramified at p}`.
fn ramification_index(tower: &Tower, p: &BigInt) -> u32 {
    let unram =
        (0..tower.degree_l()).filter(|&d| d == 0 || !quadratic_discriminant(tower.m_d(d)).is_multiple_of(p)).count();
    (tower.degree_l() / unram) as u32
}

fn decide_ideal_square(v: &FieldElement) -> Result<SquareDecision> {
    let tower = v.tower().clone();
    let lam: Vec<FieldElement> = (0..tower.degree_l()).map(|d| lambda(&tower, d)).collect();
    // clear denominators with a rational square
    let coords = l_to_lambda(&tower, &v.l_part(0));
    let den = lcm_of_denominators(coords.iter());
    let vi = v.scale(&q_from_big(&(&den * &den)));
    let unit_basis = |c: &Q| lam.iter().map(|l| l.scale(c)).collect::<Vec<_>>();
    if is_unit_l(&vi)? {
        return Ok(SquareDecision {
            is_square: true,
            regime: "unit",
            description: Some("O_L (unit)".into()),
            inverse_sqrt_basis: Some(unit_basis(&q_from_big(&den))),
        });
    }
    if tower.ell() == 1 {
        let fac = factor_principal(&vi)?;
        if fac.iter().any(|(_, e)| e % 2 == 1) {
            return Ok(SquareDecision {
                is_square: false,
                regime: "quadratic",
                description: None,
                inverse_sqrt_basis: None,
            });
        }
        let mut a = QuadIdeal::unit(&tower)?;
        for (pr, e) in &fac {
            a = a.mul(&pr.pow(e / 2)?)?;
        }
        // 𝒜^{-1} = conj(𝒜)/N(𝒜), then undo the denominator scaling
        let nrm = q_from_big(&a.norm());
        let inv: Vec<FieldElement> =
            a.conjugate()?.basis().iter().map(|b| b.scale(&(q_from_big(&den) / &nrm))).collect();
        return Ok(SquareDecision {
            is_square: true,
            regime: "quadratic",
            description: Some(format!("A = {}", a.describe())),
            inverse_sqrt_basis: Some(inv),
        });
    }
    if let Some(r) = vi.as_rational() {
        let n = r.to_integer();
        let fac = factor(&n, FACTOR_LIMIT)?;
        let mut sq = true;
        let mut all_even = true;
        let mut c = BigInt::one();
        for (p, e) in &fac {
            if (ramification_index(&tower, p) * e) % 2 == 1 {
                sq = false;
            }
            if e % 2 == 1 {
                all_even = false;
            } else {
                c *= num_traits::pow(p.clone(), (*e / 2) as usize);
            }
        }
        let basis = if sq && all_even { Some(unit_basis(&(q_from_big(&den) / q_from_big(&c)))) } else { None };
        return Ok(SquareDecision {
            is_square: sq,
            regime: "rational",
            description: if sq {
                Some(if all_even { format!("A = {c}·O_L") } else { "product of ramified primes".into() })
            } else {
                None
            },
            inverse_sqrt_basis: basis,
        });
    }
    Err(Error::Undecidable("ideal-square test needs a unit, a rational integer, or a quadratic base field".into()))
}

/// Assembles the Z-basis of `O_L ⊕ O_L(1+β√w)/2 ⊕ 𝒜^{-1}β√w` inside `L(√w)`
/// and checks that it is an order of discriminant `Δ(L)²`.
fn extension_basis(
    w: &FieldElement,
    beta: &FieldElement,
    inv_sqrt: &[FieldElement],
) -> Result<(Vec<FieldElement>, BigInt, bool)> {
    let base = w.tower().clone();
    let ext = Tower::with_units(base.level1(), std::slice::from_ref(w))?;
    let b = beta.to_tower(&ext)?;
    let bq = &b * &ext.q_t(1);
    let half = Q::new(1.into(), 2.into());
    let theta = (&ext.one() + &bq).scale(&half);
    let mut gens = Vec::new();
    for d in 0..base.degree_l() {
        let l = lambda(&ext, d);
        gens.push(l.clone());
        gens.push(&l * &theta);
    }
    for a in inv_sqrt {
        gens.push(&a.to_tower(&ext)? * &bq);
    }
    let rows: Vec<Vec<Q>> = gens.iter().map(|g| g.coeffs().to_vec()).collect();
    let basis_rows = linalg::lattice_basis(&rows);
    if basis_rows.len() != ext.degree() {
        return Err(Error::Internal("extension module has deficient rank".into()));
    }
    let basis: Vec<FieldElement> = basis_rows.into_iter().map(|r| ext.from_coeffs(r)).collect::<Result<_>>()?;
    // closed under multiplication and containing 1 means an order, hence integral
    let m = linalg::transpose(&basis.iter().map(|x| x.coeffs().to_vec()).collect());
    let mut is_order = linalg::solve(&m, ext.one().coeffs()).is_some_and(|s| s.iter().all(is_integer));
    'outer: for i in 0..basis.len() {
        for j in i..basis.len() {
            let p = &basis[i] * &basis[j];
            match linalg::solve(&m, p.coeffs()) {
                Some(s) if s.iter().all(is_integer) => {}
                _ => {
                    is_order = false;
                    break 'outer;
                }
            }
        }
    }
    let disc = trace_discriminant(&basis).abs();
    if !is_integer(&disc) {
        return Err(Error::Internal("non-integral discriminant for an order".into()));
    }
    let disc = disc.to_integer();
    let dl = discriminant_l(&base);
    let trivial = is_order && disc == &dl * &dl;
    Ok((basis, disc, trivial))
}

/// Decides condition (iii): `β²w ∈ 1 + 4O_L` and `β²w O_L` is the square of
/// an ideal. When `𝒜` is explicit, also emits a Z-basis of `O_{L(√w)}`.
pub fn check_unramified_witness(w: &FieldElement, beta: &FieldElement) -> Result<UnramifiedCertificate> {
    if w.tower() != beta.tower() {
        return Err(Error::TowerMismatch);
    }
    let tower = w.tower();
    if tower.num_units() != 0 {
        return Err(Error::Validation("witness check expects elements of the base field L".into()));
    }
    lambda_basis_available(tower)?;
    if w.is_zero() || beta.is_zero() {
        return Err(Error::Validation("w and beta must be nonzero".into()));
    }
    let v = &(beta * beta) * w;
    let fact1 = in_one_plus_4ol(&v)?;
    let sq = decide_ideal_square(&v)?;
    let mut cert = UnramifiedCertificate {
        w: w.clone(),
        beta: beta.clone(),
        facts: VerifiedFacts {
            beta2w_in_1_plus_4ol: fact1,
            ideal_is_square: sq.is_square,
            ideal_sqrt_description: sq.description.clone(),
        },
        regime: sq.regime,
        extension_basis: None,
        extension_discriminant: None,
        relative_discriminant_trivial: None,
    };
    if cert.is_valid() && w.sqrt_in_l()?.is_none() {
        if let Some(inv) = &sq.inverse_sqrt_basis {
            let (basis, disc, trivial) = extension_basis(w, beta, inv)?;
            cert.extension_basis = Some(basis);
            cert.extension_discriminant = Some(disc);
            cert.relative_discriminant_trivial = Some(trivial);
        }
    }
    Ok(cert)
}

// ---------------------------------------------------------------------------
// Witness search.

#[derive(Clone, Debug, Serialize)]
pub struct SearchBudget {
    /// Maximum number of β candidates to test.
    pub max_candidates: u64,
    /// Coordinates of residue candidates range over `[-h, h]`.
    pub height_bound: u32,
    /// Exponent bound for unit candidates built from subfield units.
    pub unit_exponent_bound: u32,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_candidates: 100_000, height_bound: 3, unit_exponent_bound: 2 }
    }
}

#[derive(Clone, Debug)]
pub enum WitnessSearch {
    Found(Box<UnramifiedCertificate>, u64),
    /// `wO_L` is not the square of an ideal, so no β can work.
    NotSquareIdeal,
    /// The whole candidate set was tested without success.
    NotFound(u64),
    /// The candidate budget ran out before the set was exhausted.
    BudgetExhausted(u64),
}

/// Sort key putting small coefficients first and `+c` before `-c`.
fn balanced_key(v: &[i64]) -> (i64, i64, Vec<i64>) {
    let m = v.iter().map(|x| x.abs()).max().unwrap_or(0);
    let s = v.iter().map(|x| x.abs()).sum();
    (m, s, v.iter().map(|&x| 2 * x.abs() - i64::from(x > 0)).collect())
}

fn int_vectors(k: usize, h: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for v in &out {
            for c in -h..=h {
                let mut w = v.clone();
                w.push(c);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Units tried first: roots of unity, then `±∏ ε_D^{e_D}` for real fields.
fn unit_candidates(tower: &Tower, bound: u32) -> Result<Vec<FieldElement>> {
    let mut out = vec![tower.one(), tower.from_int(-1)];
    for d in 1..tower.degree_l() {
        let m = tower.m_d(d);
        if *m == BigInt::from(-1) {
            out.push(tower.sqrt_m(d));
            out.push(-&tower.sqrt_m(d));
        } else if *m == BigInt::from(-3) {
            let z = (&tower.one() + &tower.sqrt_m(d)).scale(&Q::new(1.into(), 2.into()));
            for k in 1..6 {
                if k != 3 {
                    out.push(z.pow(k)?);
                }
            }
        }
    }
    if tower.l_totally_real() && tower.ell() > 0 && bound > 0 {
        let eps: Vec<FieldElement> = (1..tower.degree_l())
            .map(|d| subfield_unit(tower, d).and_then(|u| u.to_tower(tower)))
            .collect::<Result<_>>()?;
        let mut exps = int_vectors(eps.len(), bound as i64);
        exps.sort_by_key(|v| balanced_key(v));
        for e in exps.iter().skip(1) {
            let mut u = tower.one();
            for (x, &k) in eps.iter().zip(e) {
                u = &u * &x.pow(k)?;
            }
            out.push(u.clone());
            out.push(-&u);
        }
    }
    Ok(out)
}

/// Bounded enumeration of β (units first, then small integral elements).
pub fn search_witness(w: &FieldElement, budget: &SearchBudget) -> Result<WitnessSearch> {
    let tower = w.tower().clone();
    lambda_basis_available(&tower)?;
    if !decide_ideal_square(w)?.is_square {
        return Ok(WitnessSearch::NotSquareIdeal);
    }
    let mut tried = 0u64;
    let try_beta = |beta: &FieldElement| -> Result<Option<UnramifiedCertificate>> {
        let c = check_unramified_witness(w, beta)?;
        Ok(if c.is_valid() { Some(c) } else { None })
    };
    for u in unit_candidates(&tower, budget.unit_exponent_bound)? {
        if tried >= budget.max_candidates {
            return Ok(WitnessSearch::BudgetExhausted(tried));
        }
        tried += 1;
        if let Some(c) = try_beta(&u)? {
            return Ok(WitnessSearch::Found(Box::new(c), tried));
        }
    }
    let mut vecs = int_vectors(tower.degree_l(), budget.height_bound as i64);
    vecs.sort_by_key(|v| balanced_key(v));
    for v in vecs.iter().skip(1) {
        if tried >= budget.max_candidates {
            return Ok(WitnessSearch::BudgetExhausted(tried));
        }
        tried += 1;
        let y: Vec<Q> = v.iter().map(|&c| q_int(c)).collect();
        let beta = tower.from_l(lambda_to_l(&tower, &y));
        if let Some(c) = try_beta(&beta)? {
            return Ok(WitnessSearch::Found(Box::new(c), tried));
        }
    }
    Ok(WitnessSearch::NotFound(tried))
}

// ---------------------------------------------------------------------------
// Orthogonality hypothesis and the unit search.

/// Checks that `w` is totally negative and that `L(√w)/Q` is Galois, i.e.
/// `g(w)/w` is a square in L for every generator `g` of `Gal(L/Q)`.
pub fn check_hypothesis_ortho(w: &FieldElement) -> Result<bool> {
    let tower = w.tower();
    if !tower.l_totally_real() {
        return Err(Error::Validation("orthogonality hypothesis needs a totally real L".into()));
    }
    if !w.in_l() {
        return Err(Error::Validation("w must lie in L".into()));
    }
    if !is_unit_l(w)? {
        return Err(Error::Validation(format!("{w} is not a unit of O_L")));
    }
    for s in 0..tower.degree_l() {
        if sign_in_embedding(w, s)? >= 0 {
            return Ok(false);
        }
    }
    galois_compatible(w)
}

fn galois_compatible(w: &FieldElement) -> Result<bool> {
    let winv = w.inverse()?;
    for i in 0..w.tower().ell() {
        let r = &w.galois_l(1 << i)? * &winv;
        if r.sqrt_in_l()?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize)]
pub struct UnitBudget {
    pub exponent_bound: u32,
    pub max_candidates: u64,
    /// Enlarge the subfield-unit subgroup to the full unit group first.
    pub saturate: bool,
}

impl Default for UnitBudget {
    fn default() -> Self {
        UnitBudget { exponent_bound: 3, max_candidates: 2_000_000, saturate: true }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FilterCounts {
    pub examined: u64,
    pub totally_negative: u64,
    pub in_one_plus_4ol: u64,
    pub galois: u64,
    pub independent: u64,
}

#[derive(Clone, Debug)]
pub struct UnitSearchResult {
    /// Generators the exponent vectors refer to.
    pub generators: Vec<FieldElement>,
    pub units: Vec<FieldElement>,
    /// Sign and exponent vector (over `generators`) of each accepted unit.
    pub exponents: Vec<(i8, Vec<i64>)>,
    pub counts: FilterCounts,
    pub budget_exhausted: bool,
}

pub const UNIT_SUBGROUP_NOTE: &str = "candidates come from the subgroup generated by fundamental units of the quadratic subfields; units of L outside it are not searched";
pub const UNIT_SATURATED_NOTE: &str = "candidates come from the full unit group, obtained by 2-saturating the fundamental units of the quadratic subfields";

/// Fundamental units `ε_D` of the quadratic subfields, in binary order of D.
pub fn subfield_units(tower: &Tower) -> Result<Vec<FieldElement>> {
    let base = tower.base_tower();
    (1..base.degree_l()).map(|d| subfield_unit(&base, d)).collect()
}

/// Free generators of `O_L^*/{±1}` for totally real multiquadratic L.
///
/// Starts from the subfield units and, while some `±∏ g_i^{f_i}` with
/// `f ∈ {0,1}^k` is a square, replaces the highest `g_i` in the product by
/// its square root. The quotient of the unit group by the final subgroup is
/// a finite 2-group without elements of order 2, hence trivial.
pub fn unit_group_generators(tower: &Tower) -> Result<Vec<FieldElement>> {
    let base = tower.base_tower();
    if !base.l_totally_real() {
        return Err(Error::Validation("unit group generators need a totally real L".into()));
    }
    let mut gens = subfield_units(&base)?;
    if gens.len() > 15 {
        return Err(Error::Capacity("unit saturation limited to ℓ ≤ 4".into()));
    }
    'outer: loop {
        let k = gens.len();
        let mut prods = vec![base.one(); 1 << k];
        for f in 1..(1usize << k) {
            let low = f.trailing_zeros() as usize;
            prods[f] = &prods[f & (f - 1)] * &gens[low];
            for x in [prods[f].clone(), -&prods[f]] {
                if let Some(mut r) = x.sqrt_in_l()? {
                    if sign_in_embedding(&r, 0)? < 0 {
                        r = -&r;
                    }
                    let top = (usize::BITS - 1 - f.leading_zeros()) as usize;
                    gens[top] = r;
                    continue 'outer;
                }
            }
        }
        return Ok(gens);
    }
}

/// Searches `±∏ g_i^{e_i}` (`|e_i| ≤ bound`) in canonical order for units
/// that are totally negative, in `1 + 4O_L`, Galois-compatible, and
/// independent modulo squares of those already accepted. The `g_i` are the
/// subfield units, or the saturated generators when `budget.saturate` is set.
pub fn unit_search(tower: &Tower, budget: &UnitBudget) -> Result<UnitSearchResult> {
    if !tower.primes_one_mod_four() {
        return Err(Error::Validation("unit search needs distinct primes ≡ 1 mod 4".into()));
    }
    let base = tower.base_tower();
    if base.degree_l() > 16 {
        return Err(Error::Capacity("unit search limited to ℓ ≤ 4".into()));
    }
    let eps = if budget.saturate { unit_group_generators(&base)? } else { subfield_units(&base)? };
    let k = eps.len();
    let eps_neg_at: Vec<Vec<bool>> = eps
        .iter()
        .map(|e| (0..base.degree_l()).map(|s| sign_in_embedding(e, s).map(|x| x < 0)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let b = budget.exponent_bound as i64;
    let mut exps = int_vectors(k, b);
    exps.sort_by(|x, y| {
        let kx = (x.iter().map(|c| c.abs()).sum::<i64>(), x.clone());
        let ky = (y.iter().map(|c| c.abs()).sum::<i64>(), y.clone());
        kx.cmp(&ky)
    });
    let mut cands: Vec<(i8, Vec<i64>)> = Vec::with_capacity(exps.len() * 2);
    for e in exps {
        cands.push((-1, e.clone()));
        cands.push((1, e));
    }
    let total = cands.len() as u64;
    let exhausted = total > budget.max_candidates;
    cands.truncate(budget.max_candidates.min(total) as usize);

    // powers ε_D^j for |j| ≤ b
    let powers: Vec<Vec<FieldElement>> =
        eps.iter().map(|e| (-b..=b).map(|j| e.pow(j)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;

    let totally_negative = |sg: i8, e: &[i64]| -> bool {
        (0..base.degree_l()).all(|s| {
            let mut neg = sg < 0;
            for (dd, &x) in e.iter().enumerate() {
                if x % 2 != 0 && eps_neg_at[dd][s] {
                    neg = !neg;
                }
            }
            neg
        })
    };

    let stage: Vec<(u8, Option<FieldElement>)> = cands
        .par_iter()
        .map(|(sg, e)| -> Result<(u8, Option<FieldElement>)> {
            if !totally_negative(*sg, e) {
                return Ok((0, None));
            }
            let mut u = base.from_int(*sg as i64);
            for (dd, &x) in e.iter().enumerate() {
                u = &u * &powers[dd][(x + b) as usize];
            }
            if !in_one_plus_4ol(&u)? {
                return Ok((1, None));
            }
            if !galois_compatible(&u)? {
                return Ok((2, None));
            }
            Ok((3, Some(u)))
        })
        .collect::<Result<_>>()?;

    let mut counts = FilterCounts { examined: cands.len() as u64, ..Default::default() };
    let mut units: Vec<FieldElement> = Vec::new();
    let mut exponents = Vec::new();
    for ((lvl, u), c) in stage.into_iter().zip(&cands) {
        if lvl >= 1 {
            counts.totally_negative += 1;
        }
        if lvl >= 2 {
            counts.in_one_plus_4ol += 1;
        }
        if lvl >= 3 {
            counts.galois += 1;
            let u = u.unwrap();
            let mut trial = units.clone();
            trial.push(u.clone());
            if square_class_independent(&trial)? {
                units.push(u);
                exponents.push(c.clone());
                counts.independent += 1;
            }
        }
    }
    Ok(UnitSearchResult { generators: eps, units, exponents, counts, budget_exhausted: exhausted })
}

// ---------------------------------------------------------------------------
// Tower assembly.

/// Named reasons for rejecting tower data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TowerCheck {
    NoPrimes,
    NotPrime,
    NotOneMod4,
    RepeatedPrime,
    NotInL,
    NotUnit,
    NotSquareMod4,
    NotOnePlus4,
    NotTotallyNegative,
    NotGalois,
    Dependent,
}

impl TowerCheck {
    pub fn name(&self) -> &'static str {
        match self {
            TowerCheck::NoPrimes => "no_primes",
            TowerCheck::NotPrime => "not_prime",
            TowerCheck::NotOneMod4 => "not_one_mod_4",
            TowerCheck::RepeatedPrime => "repeated_prime",
            TowerCheck::NotInL => "not_in_L",
            TowerCheck::NotUnit => "not_unit",
            TowerCheck::NotSquareMod4 => "unit class not square mod 4",
            TowerCheck::NotOnePlus4 => "unit not in 1+4O_L",
            TowerCheck::NotTotallyNegative => "unit not totally negative",
            TowerCheck::NotGalois => "L(sqrt w) not Galois over Q",
            TowerCheck::Dependent => "units not square-class independent",
        }
    }

    fn err(self, detail: String) -> Error {
        Error::Validation(format!("{}: {detail}", self.name()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TowerReport {
    pub degree_l: usize,
    pub degree_n: usize,
    /// `δ(N) = δ(L) = (∏ p)^{1/2}`, as the integer under the square root.
    pub root_discriminant_squared: String,
    pub discriminant_l: String,
    pub primes_one_mod_four: bool,
    pub satisfies_hypothesis_ortho: bool,
}

/// Validates primes and units and returns the tower `N = L(√w : w ∈ S₀)`.
pub fn build_tower(primes: &[i64], s0: &[FieldElement]) -> Result<(Tower, TowerReport)> {
    if primes.is_empty() {
        return Err(TowerCheck::NoPrimes.err("at least one prime is required".into()));
    }
    for (i, &p) in primes.iter().enumerate() {
        if p < 2 || !crate::rational::is_prime_u64(p as u64) {
            return Err(TowerCheck::NotPrime.err(format!("{p}")));
        }
        if p % 4 != 1 {
            return Err(TowerCheck::NotOneMod4.err(format!("{p}")));
        }
        if primes[..i].contains(&p) {
            return Err(TowerCheck::RepeatedPrime.err(format!("{p}")));
        }
    }
    let base = Tower::base_i64(primes)?;
    let mut units = Vec::new();
    for (j, w) in s0.iter().enumerate() {
        if w.tower().level1() != base.level1() || !w.in_l() {
            return Err(TowerCheck::NotInL.err(format!("w_{j} = {w}")));
        }
        let w = w.to_tower(&base)?;
        if !is_integral_l(&base, &w.l_part(0)) || !is_unit_l(&w)? {
            return Err(TowerCheck::NotUnit.err(format!("w_{j} = {w}")));
        }
        if !is_square_mod4(&w)? {
            return Err(TowerCheck::NotSquareMod4.err(format!("w_{j} = {w}")));
        }
        if !in_one_plus_4ol(&w)? {
            return Err(TowerCheck::NotOnePlus4.err(format!("w_{j} = {w}")));
        }
        for s in 0..base.degree_l() {
            if sign_in_embedding(&w, s)? >= 0 {
                return Err(TowerCheck::NotTotallyNegative.err(format!("w_{j} = {w}")));
            }
        }
        if !galois_compatible(&w)? {
            return Err(TowerCheck::NotGalois.err(format!("w_{j} = {w}")));
        }
        units.push(w);
    }
    if !square_class_independent(&units)? {
        return Err(TowerCheck::Dependent.err(format!("{} units", units.len())));
    }
    let tower = Tower::with_units(base.level1(), &units)?;
    let prod: i64 = primes.iter().product();
    let report = TowerReport {
        degree_l: tower.degree_l(),
        degree_n: tower.degree(),
        root_discriminant_squared: prod.to_string(),
        discriminant_l: discriminant_l(&tower).to_string(),
        primes_one_mod_four: true,
        satisfies_hypothesis_ortho: true,
    };
    Ok((tower, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Smallest solution of x² − d y² = ±4 with y > 0, by brute force.
    fn brute_unit(d: i64) -> (i64, i64) {
        for y in 1..100_000i64 {
            for s in [-4i64, 4] {
                let x2 = d * y * y + s;
                if x2 > 0 {
                    let x = (x2 as f64).sqrt().round() as i64;
                    if x * x == x2 {
                        return (x, y);
                    }
                }
            }
        }
        panic!("no unit found for {d}");
    }

    #[test]
    fn continued_fraction_units_match_brute_force() {
        for d in [2i64, 3, 5, 6, 7, 10, 11, 13, 14, 15, 17, 19, 21, 29, 37, 41, 53, 61, 65, 85, 101] {
            let (a, b) = fundamental_unit(&BigInt::from(d)).unwrap();
            let (x, y) = brute_unit(d);
            assert_eq!((a, b), (q_int(x) / q_int(2), q_int(y) / q_int(2)), "d = {d}");
        }
    }

    #[test]
    fn quadratic_ideal_factorisation() {
        let t = Tower::base_i64(&[-5]).unwrap();
        let f = factor_principal(&t.from_int(5)).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].1, 2);
        let f2 = factor_principal(&t.from_int(2)).unwrap();
        assert_eq!(f2.len(), 1);
        assert_eq!(f2[0].1, 2);
        let f3 = factor_principal(&t.from_int(3)).unwrap();
        assert_eq!(f3.len(), 2);
        assert_eq!(f2[0].0.norm(), BigInt::from(2));
    }

    #[test]
    fn hilbert_class_field_of_minus_five() {
        let t = Tower::base_i64(&[-5]).unwrap();
        let c = check_unramified_witness(&t.from_int(-1), &t.sqrt_m(1)).unwrap();
        assert!(c.is_valid());
        assert_eq!(c.relative_discriminant_trivial, Some(true));
        assert_eq!(c.extension_discriminant, Some(BigInt::from(400)));
    }

    #[test]
    fn rationals_never_unramified_at_two_with_minus_one() {
        let z = Tower::rational();
        for b in 1..20 {
            let c = check_unramified_witness(&z.from_int(-1), &z.from_int(b)).unwrap();
            assert!(!c.is_valid());
        }
    }

    #[test]
    fn orthogonality_hypothesis_examples() {
        let t = Tower::base_i64(&[5]).unwrap();
        let eps = t.parse_element("(1+sqrt(5))/2").unwrap();
        let w = -&(&eps * &eps);
        assert!(check_hypothesis_ortho(&w).unwrap());
        assert!(!check_hypothesis_ortho(&eps).unwrap());
        assert!(check_hypothesis_ortho(&t.from_int(-1)).unwrap());
    }

    #[test]
    fn witness_search_examples() {
        let t = Tower::base_i64(&[-5]).unwrap();
        match search_witness(&t.from_int(-1), &SearchBudget::default()).unwrap() {
            WitnessSearch::Found(c, _) => {
                let b2 = &c.beta * &c.beta;
                assert_eq!(b2, t.from_int(-5));
            }
            other => panic!("unexpected {other:?}"),
        }
        let z = Tower::rational();
        assert!(matches!(
            search_witness(&z.from_int(17), &SearchBudget::default()).unwrap(),
            WitnessSearch::NotSquareIdeal
        ));
    }
}
