//! Certified complex embeddings of a tower, the Minkowski vector, and the
//! L² / L∞ norms.
//!
//! An embedding is a sign choice for each `√m_i` and a branch for each
//! `√w_j`, packed as `e = (branches << ℓ) | signs` (bit set = minus sign).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{eval_l_real, FieldElement, Tower};
use crate::interval::{decide_sign, ComplexInterval, Interval};
use crate::rational::{q_from_big, Q};

use num_traits::{Signed, Zero};

/// Explicit form of one embedding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EmbeddingSpec {
    pub sign_choice: Vec<i8>,
    pub branch_choice: Vec<i8>,
    pub precision_bits: u32,
}

impl EmbeddingSpec {
    pub fn from_index(tower: &Tower, e: usize, precision_bits: u32) -> Self {
        let ell = tower.ell();
        let sgn = |bit: bool| if bit { -1 } else { 1 };
        EmbeddingSpec {
            sign_choice: (0..ell).map(|i| sgn(e >> i & 1 == 1)).collect(),
            branch_choice: (0..tower.num_units()).map(|j| sgn(e >> (ell + j) & 1 == 1)).collect(),
            precision_bits,
        }
    }

    pub fn index(&self) -> usize {
        let ell = self.sign_choice.len();
        let mut e = 0;
        for (i, &s) in self.sign_choice.iter().enumerate() {
            if s < 0 {
                e |= 1 << i;
            }
        }
        for (j, &b) in self.branch_choice.iter().enumerate() {
            if b < 0 {
                e |= 1 << (ell + j);
            }
        }
        e
    }
}

/// Minkowski vector: values at real embeddings, then one value per
/// conjugate pair of complex embeddings.
#[derive(Clone, Debug, Serialize)]
pub struct MinkowskiVector {
    pub real: Vec<Interval>,
    pub complex: Vec<ComplexInterval>,
}

impl MinkowskiVector {
    pub fn norm2_sqr(&self) -> Interval {
        let mut acc = Interval::zero();
        for r in &self.real {
            acc = &acc + &r.square();
        }
        for c in &self.complex {
            acc = &acc + &c.norm_sqr();
        }
        acc
    }

    /// Entry-wise moduli.
    pub fn moduli(&self, prec: u32) -> Vec<Interval> {
        self.real.iter().map(|r| r.abs()).chain(self.complex.iter().map(|c| c.abs(prec))).collect()
    }

    pub fn slots(&self) -> usize {
        self.real.len() + self.complex.len()
    }

    /// Real coordinates `(x_real…, re_1, im_1, …)`; their Euclidean inner
    /// product is the tower inner product.
    pub fn real_coords(&self) -> Vec<Interval> {
        let mut v = self.real.clone();
        for c in &self.complex {
            v.push(c.re.clone());
            v.push(c.im.clone());
        }
        v
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Norms {
    pub l2: Interval,
    pub linf: Interval,
}

/// Embedding evaluator with per-embedding root tables at a fixed precision.
pub struct Embedder {
    tower: Tower,
    prec: u32,
    // rm[s][d]: image of √m_D under sign pattern s
    rm: Vec<Vec<ComplexInterval>>,
    // rw[e][t]: image of q_T under embedding e
    rw: Vec<Vec<ComplexInterval>>,
    conj: Vec<usize>,
}

fn sqrt_int(m: &num_bigint::BigInt, prec: u32) -> ComplexInterval {
    let r = Interval::point(q_from_big(&m.abs())).sqrt(prec);
    if m.is_negative() {
        ComplexInterval::imag(r)
    } else {
        ComplexInterval::real(r)
    }
}

impl Embedder {
    pub fn new(tower: &Tower, prec: u32) -> Result<Embedder> {
        let ell = tower.ell();
        let s = tower.num_units();
        let nl = tower.degree_l();
        if s > 0 && !tower.l_totally_real() {
            return Err(Error::NotCm("embeddings of a second step over an imaginary base".into()));
        }
        let p = prec + 8;
        let roots: Vec<ComplexInterval> = tower.level1().iter().map(|m| sqrt_int(m, p)).collect();
        let mut rm = Vec::with_capacity(nl);
        for sm in 0..nl {
            let mut row = vec![ComplexInterval::real(Interval::from_int(1)); nl];
            for d in 1..nl {
                let low = d.trailing_zeros() as usize;
                let r = if sm >> low & 1 == 1 {
                    roots[low].scale(&Q::from_integer((-1).into()))
                } else {
                    roots[low].clone()
                };
                row[d] = (&row[d & (d - 1)] * &r).round(p);
            }
            rm.push(row);
        }
        let units: Vec<Vec<Q>> = tower.units_in_l().iter().map(|u| u.l_part(0)).collect();
        let signs = if s > 0 { Some(tower.unit_signs()?.clone()) } else { None };
        let n = tower.degree();
        let mut rw = Vec::with_capacity(n);
        let mut conj = Vec::with_capacity(n);
        let neg_m: usize =
            tower.level1().iter().enumerate().filter(|(_, m)| m.is_negative()).fold(0, |a, (i, _)| a | (1 << i));
        for e in 0..n {
            let sm = e & (nl - 1);
            let br = e >> ell;
            let mut wroots = Vec::with_capacity(s);
            let mut neg_w = 0usize;
            for j in 0..s {
                let v = eval_l_real(&units[j], tower.mprod(), sm, p);
                let sg = signs.as_ref().unwrap()[j][sm];
                let a = if sg < 0 { -v } else { v };
                let r = a.sqrt(p);
                let mut c = if sg < 0 {
                    neg_w |= 1 << j;
                    ComplexInterval::imag(r)
                } else {
                    ComplexInterval::real(r)
                };
                if br >> j & 1 == 1 {
                    c = c.scale(&Q::from_integer((-1).into()));
                }
                wroots.push(c);
            }
            let mut row = vec![ComplexInterval::real(Interval::from_int(1)); 1 << s];
            for t in 1..(1usize << s) {
                let low = t.trailing_zeros() as usize;
                row[t] = (&row[t & (t - 1)] * &wroots[low]).round(p);
            }
            rw.push(row);
            conj.push(e ^ neg_m ^ (neg_w << ell));
        }
        Ok(Embedder { tower: tower.clone(), prec, rm, rw, conj })
    }

    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    /// Index of the complex-conjugate embedding.
    pub fn conjugate_of(&self, e: usize) -> usize {
        self.conj[e]
    }

    pub fn is_real(&self, e: usize) -> bool {
        self.conj[e] == e
    }

    /// Embeddings listed in a Minkowski vector: all real ones, then the
    /// smaller index of each conjugate pair.
    pub fn slot_embeddings(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.tower.degree();
        let real = (0..n).filter(|&e| self.is_real(e)).collect();
        let cx = (0..n).filter(|&e| !self.is_real(e) && e < self.conj[e]).collect();
        (real, cx)
    }

    pub fn value(&self, a: &FieldElement, e: usize) -> ComplexInterval {
        let ell = self.tower.ell();
        let nl = self.tower.degree_l();
        let sm = e & (nl - 1);
        let mut acc = ComplexInterval::zero();
        for (i, c) in a.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let (t, d) = (i >> ell, i & (nl - 1));
            let b = &self.rm[sm][d] * &self.rw[e][t];
            acc = &acc + &b.scale(c);
        }
        acc.round(self.prec)
    }

    pub fn values(&self, a: &FieldElement) -> Vec<ComplexInterval> {
        (0..self.tower.degree()).map(|e| self.value(a, e)).collect()
    }

    pub fn minkowski(&self, a: &FieldElement) -> MinkowskiVector {
        let (real, cx) = self.slot_embeddings();
        MinkowskiVector {
            real: real.iter().map(|&e| self.value(a, e).re).collect(),
            complex: cx.iter().map(|&e| self.value(a, e)).collect(),
        }
    }

    pub fn norms(&self, a: &FieldElement) -> Norms {
        let mv = self.minkowski(a);
        let l2 = mv.norm2_sqr().sqrt(self.prec);
        let linf = mv.moduli(self.prec).into_iter().reduce(|x, y| x.max(&y)).unwrap_or_else(Interval::zero);
        Norms { l2, linf }
    }

    /// `Σ_real x y + Σ_pairs Re(z z̄')`, the numeric counterpart of the
    /// exact inner product.
    pub fn inner(&self, a: &FieldElement, b: &FieldElement) -> Interval {
        let ma = self.minkowski(a);
        let mb = self.minkowski(b);
        let mut acc = Interval::zero();
        for (x, y) in ma.real.iter().zip(&mb.real) {
            acc = &acc + &(x * y);
        }
        for (z, w) in ma.complex.iter().zip(&mb.complex) {
            acc = &acc + &(&(&z.re * &w.re) + &(&z.im * &w.im));
        }
        acc
    }
}

pub fn embed_minkowski(a: &FieldElement, prec: u32) -> Result<MinkowskiVector> {
    Ok(Embedder::new(a.tower(), prec)?.minkowski(a))
}

pub fn norms_certified(a: &FieldElement, prec: u32) -> Result<Norms> {
    Ok(Embedder::new(a.tower(), prec)?.norms(a))
}

/// Certified sign of a real embedding of an element of a totally real L.
pub fn sign_in_embedding(u: &FieldElement, s: usize) -> Result<i32> {
    let x = u.l_part(0);
    decide_sign(64, |p| eval_l_real(&x, u.tower().mprod(), s, p))
}
