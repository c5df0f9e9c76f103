use approx::assert_relative_eq;
use edmp_core::cayley_menger::{cm_build, cm_embedding_dim, cm_gale, cm_radius_sq, cm_w_inner};
use edmp_core::linalg::{nullspace_basis, pinv, rank_of, sym_eig};
use edmp_core::oracle_gen::{membership_scan, sdp_min_radius_sq};
use edmp_core::perturbation::{radius_squared, t_eq, t_leq};
use edmp_core::yielding::{theta_bounds, theta_c, yielding_report};
use edmp_core::*;
use nalgebra::DMatrix;

const TOL: f64 = 1e-9;

fn dm(rows: &[&[f64]]) -> DistanceMatrix {
    DistanceMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn square() -> DistanceMatrix {
    dm(&[
        &[0., 2., 4., 2.],
        &[2., 0., 2., 4.],
        &[4., 2., 0., 2.],
        &[2., 4., 2., 0.],
    ])
}

fn kite() -> DistanceMatrix {
    dm(&[
        &[0., 4., 2., 2.],
        &[4., 0., 2., 2.],
        &[2., 2., 0., 2.],
        &[2., 2., 2., 0.],
    ])
}

fn triangle() -> DistanceMatrix {
    dm(&[&[0., 1., 3.], &[1., 0., 1.], &[3., 1., 0.]])
}

fn prof(d: &DistanceMatrix) -> EdmProfile {
    EdmProfile::new(d, &TolerancePolicy::default()).unwrap()
}

fn e(k: usize, l: usize) -> EntryIndex {
    EntryIndex::from_one_based(k, l).unwrap()
}

fn assert_interval(i: Interval, lo: f64, hi: f64) {
    assert_relative_eq!(i.lo, lo, epsilon = TOL);
    assert_relative_eq!(i.hi, hi, epsilon = TOL);
}

#[test]
fn square_entries() {
    let p = prof(&square());
    let r12 = classify(&p, e(1, 2)).unwrap();
    assert!(r12.yielding.yielding);
    assert_interval(r12.yielding.interval, 0.0, 8.0);
    assert_interval(r12.t_leq, 0.0, 0.0);
    assert_eq!(r12.case_tag, CaseTag::TleqTrivial);
    assert_eq!(r12.t_eq, TeqSet::Singleton);

    let r13 = classify(&p, e(1, 3)).unwrap();
    assert_interval(r13.yielding.interval, -4.0, 0.0);
    assert_interval(r13.t_leq, -4.0, 0.0);
    assert_eq!(r13.case_tag, CaseTag::ContinuumUnit);
    let TeqSet::Continuum(c) = r13.t_eq else {
        panic!("{:?}", r13.t_eq)
    };
    assert_interval(c, -4.0, 0.0);
    assert_relative_eq!(theta_c(&p, e(1, 3), 1.0).unwrap(), -4.0, epsilon = TOL);
    assert_relative_eq!(theta_c(&p, e(1, 2), -1.0).unwrap(), 8.0, epsilon = TOL);
    assert_eq!(radius_squared(&p, e(1, 3), -2.5).unwrap(), 1.0);
}

#[test]
fn square_gale_from_nullspace() {
    let d = square();
    let p = prof(&d);
    let b = p.b().as_matrix();
    let mut stacked = DMatrix::zeros(5, 4);
    stacked.view_mut((0, 0), (4, 4)).copy_from(b);
    stacked.row_mut(4).fill(1.0);
    let z = nullspace_basis(&stacked, &TolerancePolicy::default()).unwrap();
    assert_eq!(z.ncols(), 1);
    let v = z.column(0) / z[(0, 0)];
    for (x, y) in v.iter().zip([1.0, -1.0, 1.0, -1.0]) {
        assert_relative_eq!(*x, y, epsilon = 1e-12);
    }
    assert_eq!(rank_of(p.b(), &TolerancePolicy::default()).unwrap(), 2);
    let dd = pinv(&d.as_sym(), &TolerancePolicy::default()).unwrap();
    for x in (dd.as_matrix() * nalgebra::DVector::from_element(4, 1.0)).iter() {
        assert_relative_eq!(*x, 0.125, epsilon = 1e-12);
    }
}

#[test]
fn kite_entries() {
    let p = prof(&kite());
    let (lo, hi) = theta_bounds(&p, e(1, 2)).unwrap();
    assert_relative_eq!(lo, -4.0, epsilon = TOL);
    assert_relative_eq!(hi, 2.0, epsilon = TOL);
    let r12 = classify(&p, e(1, 2)).unwrap();
    assert_interval(r12.yielding.interval, -4.0, 2.0);
    assert_interval(r12.t_leq, -4.0, 0.0);
    assert_eq!(r12.t_eq, TeqSet::Singleton);
    assert_eq!(r12.case_tag, CaseTag::SingletonUnit);
    let bd = p.b_dag();
    assert_relative_eq!(bd[(0, 0)], bd[(1, 1)], epsilon = 1e-12);

    let r34 = classify(&p, e(3, 4)).unwrap();
    assert_interval(r34.yielding.interval, -2.0, 2.0);
    assert_interval(r34.t_leq, -2.0, 2.0);
    let TeqSet::Continuum(c) = r34.t_eq else {
        panic!("{:?}", r34.t_eq)
    };
    assert_interval(c, -2.0, 2.0);
    assert_eq!(r34.case_tag, CaseTag::ContinuumUnit);
    for t in [-1.9, -1.0, 0.5, 1.9] {
        assert_relative_eq!(
            sdp_min_radius_sq(&kite(), e(3, 4), t).unwrap(),
            1.0,
            epsilon = 1e-9
        );
    }
}

#[test]
fn triangle_entry_12() {
    let d = triangle();
    let p = prof(&d);
    let s3 = 3f64.sqrt();
    let y = yielding_report(&p, e(1, 2)).unwrap();
    assert_interval(y.interval, 3.0 - 2.0 * s3, 3.0 + 2.0 * s3);
    assert_interval(t_leq(&p, e(1, 2)).unwrap(), 0.0, 3.0);
    for t in [0.0, 0.5, 1.0, 2.0, 3.0] {
        let want = (3.0 + 3.0 * t) / (3.0 + 6.0 * t - t * t);
        assert_relative_eq!(
            radius_squared(&p, e(1, 2), t).unwrap(),
            want,
            epsilon = 1e-10
        );
    }
    let TeqSet::Pair(tc) = t_eq(&p, e(1, 2)).unwrap() else {
        panic!()
    };
    assert_relative_eq!(tc, 3.0, epsilon = TOL);

    let co = classify(&p, e(1, 2)).unwrap().coefficients.unwrap();
    // g(t) = 1 + 2t - t²/3.
    assert_relative_eq!(co.beta1, 2.0, epsilon = 1e-12);
    assert_relative_eq!(co.beta2, -1.0 / 3.0, epsilon = 1e-12);
    // The bordered route gives the same g through ρ² = 1 + t(t-3)/(3 + 6t - t²).
    for t in [-0.3, 0.5, 1.0, 2.0, 2.5] {
        let x = cm_w_inner(&p, e(1, 2), t).unwrap();
        let g = 3.0 + 6.0 * t - t * t;
        assert_relative_eq!(x, -2.0 * t * (t - 3.0) / g, epsilon = 1e-12);
    }
    assert_relative_eq!(
        sdp_min_radius_sq(&d, e(1, 2), 1.0).unwrap(),
        0.75,
        epsilon = 1e-9
    );
}

#[test]
fn triangle_entry_13() {
    let d = triangle();
    let p = prof(&d);
    let y = yielding_report(&p, e(1, 3)).unwrap();
    assert_interval(y.interval, -3.0, 1.0);
    assert_interval(t_leq(&p, e(1, 3)).unwrap(), -3.0, 0.0);
    assert_eq!(t_eq(&p, e(1, 3)).unwrap(), TeqSet::Singleton);
    for t in [-3.0, -2.0, -0.5, 0.0] {
        assert_relative_eq!(
            radius_squared(&p, e(1, 3), t).unwrap(),
            1.0 / (1.0 - t),
            epsilon = 1e-10
        );
    }
    let co = classify(&p, e(1, 3)).unwrap().coefficients.unwrap();
    // g(t) = 1 - 2t/3 - t²/3.
    assert_relative_eq!(co.beta1, -2.0 / 3.0, epsilon = 1e-12);
    assert_relative_eq!(co.beta2, -1.0 / 3.0, epsilon = 1e-12);
    let x = cm_w_inner(&p, e(1, 3), -3.0).unwrap();
    assert_relative_eq!(1.0 - x / 2.0, 0.25, epsilon = 1e-12);

    let view = cm_build(
        &d.shifted(e(1, 3), -3.0).unwrap(),
        &TolerancePolicy::default(),
    )
    .unwrap();
    assert_relative_eq!(cm_radius_sq(&view).unwrap(), 0.25, epsilon = 1e-12);

    let recs = membership_scan(&d, e(1, 3), &[0.5, 1.0], &TolerancePolicy::default()).unwrap();
    assert!(recs[0].is_edm && recs[0].is_spherical && !recs[0].in_t_leq);
    assert_relative_eq!(recs[0].radius_sq.unwrap(), 2.0, epsilon = 1e-10);
    assert!(recs[1].is_edm && !recs[1].is_spherical);
}

#[test]
fn bordered_views_of_examples() {
    let tol = TolerancePolicy::default();
    let v = cm_build(&triangle(), &tol).unwrap();
    assert_eq!(cm_embedding_dim(&v).unwrap(), 2);
    let v = cm_build(&square(), &tol).unwrap();
    assert_eq!(cm_embedding_dim(&v).unwrap(), 2);
    let g = cm_gale(&v).unwrap();
    assert_eq!(g.ncols(), 2);
    assert_relative_eq!(g[(0, 0)], -0.5);
    assert_eq!(g[(0, 1)], 0.0);
    for i in 1..5 {
        assert_relative_eq!(g[(i, 0)], 0.125, epsilon = 1e-12);
    }
}

/// Roots of the characteristic polynomial of a symmetric 3×3 matrix by the
/// trigonometric formula.
fn cubic_eigs(a: &DMatrix<f64>) -> [f64; 3] {
    let q = a.trace() / 3.0;
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let bm = (a - DMatrix::identity(3, 3) * q) / p;
    let r = (bm.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [l1, 3.0 * q - l1 - l3, l3]
}

#[test]
fn triangle_gram_spectrum_matches_cubic_roots() {
    let p = prof(&triangle());
    let got = sym_eig(p.b()).unwrap();
    let want = cubic_eigs(p.b().as_matrix());
    for i in 0..3 {
        assert_relative_eq!(got.eigenvalues[i], want[i], epsilon = 1e-12);
    }
    assert!(want[0] > 0.0 && want[1] > 0.0);
    assert_relative_eq!(want[2], 0.0, epsilon = 1e-12);
}
