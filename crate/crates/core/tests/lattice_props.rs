use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use quadtower::interval::Interval;
use quadtower::lattice::{
    closest_vector, covering_radius_small, default_delta, is_lll_reduced, lll_reduce, shortest_vector_l2,
    shortest_vector_linf, CoverMode, LatticeInstance, DEFAULT_NODE_BUDGET,
};
use quadtower::linalg::{det, gram_of_rows, mat_mul, transpose, Mat};
use quadtower::rational::{q_frac, q_int};
use quadtower::Q;

fn to_mat(rows: &[Vec<i64>]) -> Mat {
    rows.iter().map(|r| r.iter().map(|&x| q_int(x)).collect()).collect()
}

fn int_mat(u: &[Vec<BigInt>]) -> Mat {
    u.iter().map(|r| r.iter().map(|x| Q::from_integer(x.clone())).collect()).collect()
}

fn basis(n: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(-30i64..=30, n), n)
        .prop_filter("full rank", |b| !det(&to_mat(b)).is_zero())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lll_is_unimodular_and_reduced(b in basis(4)) {
        let lat = LatticeInstance::from_rows(to_mat(&b)).unwrap();
        let r = lll_reduce(&lat, &default_delta()).unwrap();
        let u = int_mat(&r.transform);
        prop_assert!(det(&u).abs().is_one());
        prop_assert_eq!(mat_mul(&mat_mul(&u, lat.gram()), &transpose(&u)), r.lattice.gram().clone());
        prop_assert!(is_lll_reduced(r.lattice.gram(), &default_delta()).unwrap());
        prop_assert_eq!(r.lattice.det(), lat.det());
    }

    #[test]
    fn lll_commutes_with_scaling(b in basis(3), num in 1i64..9, den in 1i64..9) {
        let lat = LatticeInstance::from_rows(to_mat(&b)).unwrap();
        let c = q_frac(num, den);
        let r = lll_reduce(&lat, &default_delta()).unwrap();
        let rs = lll_reduce(&lat.scaled(&c), &default_delta()).unwrap();
        prop_assert_eq!(&r.transform, &rs.transform);
        let c2 = &c * &c;
        let scaled: Mat = r.lattice.gram().iter().map(|row| row.iter().map(|x| x * &c2).collect()).collect();
        prop_assert_eq!(rs.lattice.gram().clone(), scaled);
    }

    #[test]
    fn svp_is_basis_invariant(b in basis(3)) {
        let lat = LatticeInstance::from_rows(to_mat(&b)).unwrap();
        let red = lll_reduce(&lat, &default_delta()).unwrap().lattice;
        let s1 = shortest_vector_l2(&lat, DEFAULT_NODE_BUDGET).unwrap();
        let s2 = shortest_vector_l2(&red, DEFAULT_NODE_BUDGET).unwrap();
        prop_assert_eq!(&s1.norm_sq, &s2.norm_sq);
        prop_assert_eq!(lat.norm_sq(&s1.coeffs), s1.norm_sq.clone());
        // no basis vector is shorter than the minimum
        for i in 0..3 {
            prop_assert!(lat.gram()[i][i] >= s1.norm_sq);
        }
    }

    #[test]
    fn cvp_beats_every_rounding_neighbour(b in basis(2), t0 in -40i64..40, t1 in -40i64..40) {
        let lat = LatticeInstance::from_rows(to_mat(&b)).unwrap();
        let target = vec![q_frac(t0, 7), q_frac(t1, 5)];
        let cv = closest_vector(&lat, &target, 128, DEFAULT_NODE_BUDGET).unwrap();
        for dx in -2i64..=2 {
            for dy in -2i64..=2 {
                let x = [BigInt::from(t0.div_euclid(7) + dx), BigInt::from(t1.div_euclid(5) + dy)];
                let diff: Vec<Q> = (0..2).map(|i| Q::from_integer(x[i].clone()) - &target[i]).collect();
                let d = quadtower::linalg::bilinear(&diff, lat.gram(), &diff);
                prop_assert!(cv.dist_sq <= d);
            }
        }
    }
}

#[test]
fn hexagonal_covering_radius() {
    let lat = LatticeInstance::from_gram(to_mat(&[vec![2, 1], vec![1, 2]])).unwrap();
    let cr = covering_radius_small(&lat, CoverMode::Exact, 128, DEFAULT_NODE_BUDGET).unwrap();
    assert_eq!(cr.sq_lower, q_frac(2, 3));
    assert_eq!(cr.sq_upper, q_frac(2, 3));
    assert_eq!(cr.relevant.len(), 3);
}

#[test]
fn cubic_lattice_covering_radius_and_bounds_mode() {
    let z3 = LatticeInstance::from_rows(to_mat(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]])).unwrap();
    let exact = covering_radius_small(&z3, CoverMode::Exact, 128, DEFAULT_NODE_BUDGET).unwrap();
    assert_eq!(exact.sq_upper, q_frac(3, 4));
    let b = covering_radius_small(&z3, CoverMode::Bounds, 128, DEFAULT_NODE_BUDGET).unwrap();
    assert!(b.sq_lower <= q_frac(3, 4) && q_frac(3, 4) <= b.sq_upper);
}

#[test]
fn linf_shortest_vector() {
    let lat = LatticeInstance::from_rows(to_mat(&[vec![3, 1], vec![1, 3]])).unwrap();
    let v = shortest_vector_linf(&lat, &Interval::from_int(3), 128, DEFAULT_NODE_BUDGET).unwrap().unwrap();
    // (1,-1)·B = (2,-2)
    assert!(v.linf.contains(&q_int(2)));
    assert!(shortest_vector_linf(&lat, &Interval::from_int(1), 128, DEFAULT_NODE_BUDGET).unwrap().is_none());
}

#[test]
fn gram_of_rows_matches_from_rows() {
    let rows = to_mat(&[vec![1, 2], vec![3, -1]]);
    let lat = LatticeInstance::from_rows(rows.clone()).unwrap();
    assert_eq!(lat.gram().clone(), gram_of_rows(&rows));
}
