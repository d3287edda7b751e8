//! Dense exact linear algebra over Q and Z.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rational::Q;

pub type Mat = Vec<Vec<Q>>;

pub fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect()
}

pub fn transpose(a: &Mat) -> Mat {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j].clone()).collect()).collect()
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut s = Q::zero();
                    for k in 0..inner {
                        if !row[k].is_zero() && !b[k][j].is_zero() {
                            s += &row[k] * &b[k][j];
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn mat_vec(a: &Mat, v: &[Q]) -> Vec<Q> {
    a.iter().map(|row| dot(row, v)).collect()
}

pub fn vec_mat(v: &[Q], a: &Mat) -> Vec<Q> {
    let cols = if a.is_empty() { 0 } else { a[0].len() };
    (0..cols)
        .map(|j| {
            let mut s = Q::zero();
            for (i, vi) in v.iter().enumerate() {
                if !vi.is_zero() {
                    s += vi * &a[i][j];
                }
            }
            s
        })
        .collect()
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    let mut s = Q::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            s += x * y;
        }
    }
    s
}

/// Quadratic form `x G y^T`.
pub fn bilinear(x: &[Q], g: &Mat, y: &[Q]) -> Q {
    dot(&vec_mat(x, g), y)
}

/// Gram matrix `B B^T` of the rows of `b`.
pub fn gram_of_rows(b: &Mat) -> Mat {
    b.iter().map(|r| b.iter().map(|s| dot(r, s)).collect()).collect()
}

fn pivot_row(a: &Mat, col: usize, from: usize) -> Option<usize> {
    (from..a.len()).find(|&r| !a[r][col].is_zero())
}

pub fn det(a: &Mat) -> Q {
    let n = a.len();
    let mut m = a.clone();
    let mut d = Q::one();
    for c in 0..n {
        let p = match pivot_row(&m, c, c) {
            Some(p) => p,
            None => return Q::zero(),
        };
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        let piv = m[c][c].clone();
        d *= &piv;
        for r in c + 1..n {
            if m[r][c].is_zero() {
                continue;
            }
            let f = &m[r][c] / &piv;
            for k in c..n {
                let t = &f * &m[c][k];
                m[r][k] -= t;
            }
        }
    }
    d
}

pub fn rank(a: &Mat) -> usize {
    let mut m = a.clone();
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let p = match pivot_row(&m, c, r) {
            Some(p) => p,
            None => continue,
        };
        m.swap(p, r);
        let piv = m[r][c].clone();
        for i in r + 1..rows {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &piv;
            for k in c..cols {
                let t = &f * &m[r][k];
                m[i][k] -= t;
            }
        }
        r += 1;
    }
    r
}

/// Solves `A x = b` for square nonsingular `A`.
pub fn solve(a: &Mat, b: &[Q]) -> Option<Vec<Q>> {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    for c in 0..n {
        let p = pivot_row(&m, c, c)?;
        m.swap(p, c);
        let piv = m[c][c].clone();
        for k in c..=n {
            m[c][k] = &m[c][k] / &piv;
        }
        for r in 0..n {
            if r == c || m[r][c].is_zero() {
                continue;
            }
            let f = m[r][c].clone();
            for k in c..=n {
                let t = &f * &m[c][k];
                m[r][k] -= t;
            }
        }
    }
    Some(m.into_iter().map(|mut r| r.pop().unwrap()).collect())
}

pub fn inverse(a: &Mat) -> Option<Mat> {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    for c in 0..n {
        let p = pivot_row(&m, c, c)?;
        m.swap(p, c);
        let piv = m[c][c].clone();
        for k in c..2 * n {
            m[c][k] = &m[c][k] / &piv;
        }
        for r in 0..n {
            if r == c || m[r][c].is_zero() {
                continue;
            }
            let f = m[r][c].clone();
            for k in c..2 * n {
                let t = &f * &m[c][k];
                m[r][k] -= t;
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Row-style Hermite normal form of the Z-span of integer rows.
/// Returns the nonzero rows, echelon form with positive pivots and entries
/// above each pivot reduced into `[0, pivot)`.
pub fn hnf_rows(rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let mut m: Vec<Vec<BigInt>> = rows.to_vec();
    if m.is_empty() {
        return m;
    }
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        if r == m.len() {
            break;
        }
        // gcd-combine everything below r into row r on column c
        loop {
            let mut best: Option<usize> = None;
            for i in r..m.len() {
                if !m[i][c].is_zero() && best.is_none_or(|b| m[i][c].abs() < m[b][c].abs()) {
                    best = Some(i);
                }
            }
            let b = match best {
                Some(b) => b,
                None => break,
            };
            m.swap(r, b);
            let mut done = true;
            for i in r + 1..m.len() {
                if m[i][c].is_zero() {
                    continue;
                }
                let q = m[i][c].div_floor(&m[r][c]);
                for k in c..cols {
                    let t = &q * &m[r][k];
                    m[i][k] -= t;
                }
                if !m[i][c].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if m[r][c].is_zero() {
            continue;
        }
        if m[r][c].is_negative() {
            for k in c..cols {
                m[r][k] = -&m[r][k];
            }
        }
        for i in 0..r {
            let q = m[i][c].div_floor(&m[r][c]);
            if !q.is_zero() {
                for k in c..cols {
                    let t = &q * &m[r][k];
                    m[i][k] -= t;
                }
            }
        }
        r += 1;
    }
    m.truncate(r);
    m
}

/// Z-basis of the lattice spanned by rational rows (via a common denominator).
pub fn lattice_basis(rows: &[Vec<Q>]) -> Vec<Vec<Q>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let den = rows.iter().flatten().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let dq = Q::from_integer(den.clone());
    let ints: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|q| (q * &dq).to_integer()).collect()).collect();
    hnf_rows(&ints).into_iter().map(|r| r.into_iter().map(|x| Q::new(x, den.clone())).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q_int;

    fn m(rows: &[&[i64]]) -> Mat {
        rows.iter().map(|r| r.iter().map(|&x| q_int(x)).collect()).collect()
    }

    #[test]
    fn det_and_inverse() {
        let a = m(&[&[2, 1], &[1, 3]]);
        assert_eq!(det(&a), q_int(5));
        let inv = inverse(&a).unwrap();
        assert_eq!(mat_mul(&a, &inv), identity(2));
        assert_eq!(det(&m(&[&[1, 2], &[2, 4]])), q_int(0));
        assert!(inverse(&m(&[&[1, 2], &[2, 4]])).is_none());
    }

    #[test]
    fn solve_system() {
        let a = m(&[&[0, 1, 0], &[1, 0, 0], &[0, 0, 2]]);
        let x = solve(&a, &[q_int(3), q_int(4), q_int(1)]).unwrap();
        assert_eq!(mat_vec(&a, &x), vec![q_int(3), q_int(4), q_int(1)]);
    }

    #[test]
    fn hnf_spans_same_lattice() {
        let rows: Vec<Vec<BigInt>> = vec![vec![4.into(), 6.into()], vec![6.into(), 9.into()], vec![2.into(), 0.into()]];
        let h = hnf_rows(&rows);
        assert_eq!(h.len(), 2);
        // lattice {(4,6),(6,9),(2,0)} has determinant 3 * 2 / ... = index check
        let d = det(&h.iter().map(|r| r.iter().map(|x| Q::from_integer(x.clone())).collect()).collect());
        assert_eq!(d.abs(), q_int(6));
        assert_eq!(rank(&m(&[&[1, 2], &[2, 4], &[0, 1]])), 2);
    }
}
