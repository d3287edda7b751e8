use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use quadtower::rational::{euler_phi, q_frac};
use quadtower::voronoi::{
    cyclo_log_root_disc, cyclo_scan, cyclotomic_discriminant, field_report, gamma_half, min_norm_check, ramanujan_sum,
    NumberField,
};
use quadtower::Q;

/// Integer polynomial, lowest degree first.
type Poly = Vec<BigInt>;

fn poly_div_exact(num: &Poly, den: &Poly) -> Poly {
    let mut r = num.clone();
    let dd = den.len() - 1;
    let mut q = vec![BigInt::zero(); r.len() - dd];
    for k in (0..q.len()).rev() {
        let c = &r[k + dd] / den.last().unwrap();
        for (i, d) in den.iter().enumerate() {
            r[k + i] -= &c * d;
        }
        q[k] = c;
    }
    assert!(r.iter().all(Zero::is_zero));
    q
}

fn cyclotomic_poly(m: u64) -> Poly {
    let mut p: Poly = vec![BigInt::zero(); m as usize + 1];
    p[0] = BigInt::from(-1);
    p[m as usize] = BigInt::one();
    for d in 1..m {
        if m.is_multiple_of(d) {
            p = poly_div_exact(&p, &cyclotomic_poly(d));
        }
    }
    p
}

fn derivative(p: &Poly) -> Poly {
    p.iter().enumerate().skip(1).map(|(i, c)| c * BigInt::from(i)).collect()
}

/// Fraction-free Gaussian elimination.
fn bareiss_det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

fn resultant(f: &Poly, g: &Poly) -> BigInt {
    let (m, n) = (f.len() - 1, g.len() - 1);
    let size = m + n;
    let mut s = vec![vec![BigInt::zero(); size]; size];
    for i in 0..n {
        for (j, c) in f.iter().rev().enumerate() {
            s[i][i + j] = c.clone();
        }
    }
    for i in 0..m {
        for (j, c) in g.iter().rev().enumerate() {
            s[n + i][i + j] = c.clone();
        }
    }
    bareiss_det(s)
}

fn disc_by_resultant(m: u64) -> BigInt {
    let f = cyclotomic_poly(m);
    resultant(&f, &derivative(&f)).abs()
}

#[test]
fn cyclotomic_polynomials() {
    let p = cyclotomic_poly(12);
    let want: Vec<BigInt> = [1, 0, -1, 0, 1].iter().map(|&x| BigInt::from(x)).collect();
    assert_eq!(p, want);
    assert_eq!(cyclotomic_poly(15).len() - 1, 8);
}

#[test]
fn log_root_discriminant_matches_resultant_oracle() {
    let mut checked = 0;
    for m in 1..=30u64 {
        let phi = euler_phi(m);
        if phi > 16 {
            continue;
        }
        let oracle = disc_by_resultant(m);
        let combo = cyclo_log_root_disc(m);
        let n = phi;
        assert_eq!(combo.exp_scaled(n), Some(Q::from_integer(oracle.clone())), "m = {m}");
        assert_eq!(cyclotomic_discriminant(m).abs(), oracle, "m = {m}");
        checked += 1;
    }
    assert!(checked >= 25);
}

#[test]
fn minkowski_gram_determinant_gives_discriminant() {
    for m in [3u64, 5, 7, 8, 9, 12, 15, 16] {
        let f = NumberField::cyclotomic(m).unwrap();
        assert_eq!(f.discriminant().unwrap().abs(), disc_by_resultant(m), "m = {m}");
    }
    for d in [5i64, -5, 13, -3, 2] {
        let f = NumberField::quadratic(d).unwrap();
        let want = if d.rem_euclid(4) == 1 { d.abs() } else { 4 * d.abs() };
        assert_eq!(f.discriminant().unwrap().abs(), BigInt::from(want));
    }
}

#[test]
fn ramanujan_sums() {
    // c_m(k) = μ(m/gcd) φ(m)/φ(m/gcd)
    for m in 1..40u64 {
        for k in 0..m {
            let g = m.gcd(&k).max(1);
            let g = if k == 0 { m } else { g };
            let q = m / g;
            let mu: i64 = {
                let f = quadtower::rational::factor_u64(q);
                if f.iter().any(|&(_, e)| e > 1) {
                    0
                } else if f.len().is_multiple_of(2) {
                    1
                } else {
                    -1
                }
            };
            let want = mu * (euler_phi(m) / euler_phi(q)) as i64;
            assert_eq!(ramanujan_sum(m, k), want, "c_{m}({k})");
        }
    }
}

#[test]
fn gamma_at_half_integers() {
    // Γ(n/2+1): n=1 → √π/2, n=2 → 1, n=3 → 3√π/4, n=4 → 2
    assert_eq!(gamma_half(1), (q_frac(1, 2), true));
    assert_eq!(gamma_half(2), (q_frac(1, 1), false));
    assert_eq!(gamma_half(3), (q_frac(3, 4), true));
    assert_eq!(gamma_half(4), (q_frac(2, 1), false));
}

#[test]
fn min_norm_equality_for_totally_complex_fields() {
    for (s, complex) in [("Q", false), ("Q(i)", true), ("Q(zeta_3)", true), ("Q(sqrt(5))", false), ("Q(zeta_5)", true)]
    {
        let f = NumberField::parse(s).unwrap();
        let c = min_norm_check(&f, 128, 20_000_000).unwrap();
        assert!(c.holds, "{s}");
        assert_eq!(c.equality, complex, "{s}");
    }
}

#[test]
fn quadratic_field_reports() {
    let r = field_report(&NumberField::quadratic(-5).unwrap(), 128, 20_000_000).unwrap();
    assert!(r.volume.holds);
    assert_eq!(r.min_norm.min_sq, q_frac(1, 1));
    let r = field_report(&NumberField::quadratic(5).unwrap(), 128, 20_000_000).unwrap();
    assert_eq!(r.min_norm.min_sq, q_frac(2, 1));
    assert!(r.volume.holds);
}

#[test]
fn scan_is_independent_of_the_range_split() {
    let eps = q_frac(1, 10);
    let whole = cyclo_scan(1, 400, &eps, 128).unwrap();
    let low = cyclo_scan(1, 200, &eps, 128).unwrap();
    let high = cyclo_scan(201, 400, &eps, 128).unwrap();
    assert_eq!(whole.rows.len(), low.rows.len() + high.rows.len());
    for (a, b) in whole.rows.iter().zip(low.rows.iter().chain(&high.rows)) {
        assert_eq!(a.m, b.m);
        assert_eq!(a.holds, b.holds);
    }
    assert_eq!(whole.max_failing, Some(390));
}
