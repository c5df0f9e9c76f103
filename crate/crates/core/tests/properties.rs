use edmp_core::cayley_menger::{cm_build, cm_is_edm, cm_w_inner, cm_w_inner_direct};
use edmp_core::edm::centroid_gram;
use edmp_core::linalg::{min_eigenvalue, pinv, rank2_sym_eigs, rank_of, rel_diff, sym_eig};
use edmp_core::oracle_gen::{
    bisect_boundary, edm_margin, gen_nonspherical, gen_unit_spherical, unit_ball_margin,
    InstanceSpec, Structure,
};
use edmp_core::perturbation::analyze_entry;
use edmp_core::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> TolerancePolicy {
    TolerancePolicy::default()
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    })
}

fn instance(n: usize, r: usize, seed: u64) -> DistanceMatrix {
    gen_unit_spherical(&InstanceSpec::new(n, r, Structure::Generic, seed).unwrap()).unwrap()
}

/// `(n, r)` with `3 ≤ n ≤ 8`, `2 ≤ r ≤ n - 1`.
fn order_and_dim() -> impl Strategy<Value = (usize, usize)> {
    (3usize..=8).prop_flat_map(|n| (Just(n), 2..n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pinv_satisfies_penrose_conditions(n in 2usize..=8, k in 1usize..=8, seed in any::<u64>()) {
        let k = k.min(n);
        let x = gaussian(n, k, seed);
        let a = SymMatrix::new(&x * x.transpose()).unwrap();
        let ad = pinv(&a, &tol()).unwrap();
        let (a, ad) = (a.as_matrix(), ad.as_matrix());
        prop_assert!(rel_diff(&(a * ad * a), a) < 1e-8);
        prop_assert!(rel_diff(&(ad * a * ad), ad) < 1e-8);
        prop_assert!(rel_diff(&(a * ad).transpose(), &(a * ad)) < 1e-8);
        prop_assert_eq!(rank_of(&SymMatrix::new(a.clone()).unwrap(), &tol()).unwrap(), k);
    }

    #[test]
    fn rank_two_eigenvalues_match_full_eigendecomposition(r in 2usize..=6, seed in any::<u64>()) {
        let m = gaussian(r, 2, seed);
        let (a, b) = (m.column(0).into_owned(), m.column(1).into_owned());
        let (top, bottom) = rank2_sym_eigs(&a, &b, &tol()).unwrap();
        let full = sym_eig(&SymMatrix::new(&a * b.transpose() + &b * a.transpose()).unwrap()).unwrap();
        let scale = a.norm() * b.norm();
        prop_assert!((top - full.max()).abs() <= 1e-10 * scale);
        prop_assert!((bottom - full.min()).abs() <= 1e-10 * scale);
        prop_assert!(rel_diff(&full.reconstruct(), &(&a * b.transpose() + &b * a.transpose())) < 1e-12);
    }

    #[test]
    fn generated_instances_are_unit_spherical_and_reproducible((n, r) in order_and_dim(), seed in any::<u64>()) {
        let d = instance(n, r, seed);
        prop_assert_eq!(&d, &instance(n, r, seed));
        let p = EdmProfile::new(&d, &tol()).unwrap();
        prop_assert_eq!(p.r(), r);
        prop_assert!((2.0 * p.etw() - 1.0).abs() <= 1e-10);
        prop_assert!(rel_diff(p.bdag_identity().unwrap().as_matrix(), p.b_dag().as_matrix()) < 1e-8);
        // A spherical matrix has the Gale columns as a basis of null(D).
        if let Some(z) = p.gale() {
            prop_assert!((d.as_matrix() * z).amax() < 1e-8);
            prop_assert_eq!(n - p.rank_d(), z.ncols());
        } else {
            prop_assert_eq!(p.rank_d(), n);
        }
    }

    #[test]
    fn relabeling_permutes_w_and_keeps_r((n, r) in order_and_dim(), seed in any::<u64>(), shift in 1usize..8) {
        let d = instance(n, r, seed);
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let dp = DistanceMatrix::new(DMatrix::from_fn(n, n, |i, j| d.get(perm[i], perm[j]))).unwrap();
        let (p, q) = (EdmProfile::new(&d, &tol()).unwrap(), EdmProfile::new(&dp, &tol()).unwrap());
        prop_assert_eq!(p.r(), q.r());
        for i in 0..n {
            prop_assert!((q.w()[i] - p.w()[perm[i]]).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_scales_radius_and_w((n, r) in order_and_dim(), seed in any::<u64>(), s in 0.1f64..10.0) {
        let d = instance(n, r, seed);
        let p = EdmProfile::new(&d.scaled(s).unwrap(), &tol()).unwrap();
        prop_assert!((p.radius().unwrap().powi(2) - s).abs() <= 1e-9 * s);
        let base = EdmProfile::new(&d, &tol()).unwrap();
        prop_assert!((p.w() * s - base.w()).amax() <= 1e-8 * base.w().amax());
        prop_assert_eq!(p.is_unit_spherical(), (s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bordered_matrix_tracks_radius((n, r) in order_and_dim(), seed in any::<u64>(), s in 0.2f64..3.0) {
        let d = instance(n, r, seed).scaled(s).unwrap();
        let view = cm_build(&d, &tol()).unwrap();
        prop_assert_eq!(cm_is_edm(&view).unwrap(), s <= 1.0);
        if s < 0.95 {
            // Radius below one: the bordered matrix is spherical.
            prop_assert!(view.e_tilde_w_tilde() > 1e-6);
        }
    }

    #[test]
    fn tleq_endpoints_are_sign_changes((n, r) in order_and_dim(), seed in any::<u64>()) {
        let d = instance(n, r, seed);
        let p = EdmProfile::new(&d, &tol()).unwrap();
        let nn = n as f64;
        for entry in EntryIndex::all(n) {
            let a = analyze_entry(&p, entry).unwrap();
            let tl = a.t_leq;
            if tl.is_point() {
                continue;
            }
            let inside = |t: f64| Ok(unit_ball_margin(&d, entry, t)? >= -1e-12 * nn);
            for (end, outward) in [(tl.lo, -1.0), (tl.hi, 1.0)] {
                if end == 0.0 {
                    continue;
                }
                let found = bisect_boundary(end - outward * 0.1 * tl.width(), end + outward * 0.5, 1e-9, inside)
                    .unwrap();
                prop_assert!((found - end).abs() < 1e-6, "{entry}: {found} vs {end}");
            }
            // Same for the yielding interval against EDM membership.
            let yi = a.yielding.interval;
            let edm = |t: f64| Ok(edm_margin(&d, entry, t)? >= -1e-12 * nn);
            for (end, outward) in [(yi.lo, -1.0), (yi.hi, 1.0)] {
                if end == 0.0 {
                    continue;
                }
                let found = bisect_boundary(end - outward * 0.1 * yi.width(), end + outward * 0.5, 1e-9, edm)
                    .unwrap();
                prop_assert!((found - end).abs() < 1e-6, "{entry}: {found} vs {end}");
            }
        }
    }

    #[test]
    fn bordered_closed_form_matches_direct_pseudoinverse((n, r) in (3usize..=8).prop_map(|n| (n, n - 1)), seed in any::<u64>()) {
        let d = instance(n, r, seed);
        let p = EdmProfile::new(&d, &tol()).unwrap();
        for entry in EntryIndex::all(n) {
            let tl = analyze_entry(&p, entry).unwrap().t_leq;
            for j in 0..4 {
                let t = tl.lo + (j as f64 + 0.5) / 4.0 * tl.width();
                let closed = cm_w_inner(&p, entry, t).unwrap();
                let direct = cm_w_inner_direct(&d, entry, t, &tol()).unwrap();
                prop_assert!((closed - direct).abs() <= 1e-8 * closed.abs().max(1e-3), "{entry} t={t}: {closed} vs {direct}");
            }
        }
    }
}

#[test]
fn nonspherical_instances() {
    for (n, r, seed) in [
        (4, 2, 1),
        (5, 2, 2),
        (5, 3, 3),
        (7, 4, 4),
        (8, 6, 5),
        (3, 1, 6),
    ] {
        let d = gen_nonspherical(n, r, seed).unwrap();
        assert_eq!(d, gen_nonspherical(n, r, seed).unwrap());
        let p = EdmProfile::new(&d, &tol()).unwrap();
        assert!(!p.is_spherical());
        assert!(p.etw().abs() <= 1e-9);
        assert_eq!(p.rank_d(), r + 2);
        assert_eq!(p.r(), r);
        assert!(!cm_is_edm(&cm_build(&d, &tol()).unwrap()).unwrap());
    }
    assert!(matches!(
        gen_nonspherical(4, 3, 0),
        Err(Error::InfeasibleSpec(_))
    ));
}

#[test]
fn unit_spherical_iff_bordered_matrix_is_nonspherical() {
    for seed in 0..20 {
        let n = 3 + (seed as usize % 6);
        let r = 2 + (seed as usize % (n - 2));
        let d = instance(n, r, seed);
        // Unit spherical: D̃ is an EDM with ẽᵀw̃ = 0 and rank r̃ + 2.
        let view = cm_build(&d, &tol()).unwrap();
        assert!(cm_is_edm(&view).unwrap());
        assert!(view.e_tilde_w_tilde().abs() <= 1e-8);
        let dt = view.d_tilde();
        let rt = rank_of(&centroid_gram(dt.as_matrix()), &tol()).unwrap();
        assert_eq!(rank_of(dt, &tol()).unwrap(), rt + 2);
        // Radius below one: D̃ is an EDM but spherical.
        let shrunk = cm_build(&d.scaled(0.5).unwrap(), &tol()).unwrap();
        assert!(cm_is_edm(&shrunk).unwrap());
        assert!(shrunk.e_tilde_w_tilde() > 1e-3);
    }
}

#[test]
fn unyielding_entries_lose_edm_property() {
    let d = instance(5, 2, 42);
    let p = EdmProfile::new(&d, &tol()).unwrap();
    let mut seen = 0;
    for entry in EntryIndex::all(5) {
        let y = edmp_core::yielding::yielding_report(&p, entry).unwrap();
        if y.yielding {
            continue;
        }
        seen += 1;
        assert_eq!(y.interval, Interval::point(0.0));
        for t in [-0.1, -1e-3, 1e-3, 0.1] {
            let raw = edmp_core::oracle_gen::shifted_raw(&d, entry, t);
            assert!(min_eigenvalue(&centroid_gram(&raw)).unwrap() < -1e-12);
        }
    }
    assert!(seen > 0);
}

#[test]
fn structured_instances_hit_their_cases() {
    for seed in 0..10u64 {
        for (n, r, s) in [
            (
                4,
                2,
                Structure::ParallelGalePair(EntryIndex::new(0, 2).unwrap()),
            ),
            (
                7,
                4,
                Structure::ParallelGalePair(EntryIndex::new(3, 6).unwrap()),
            ),
            (
                4,
                3,
                Structure::ZeroGalePair(EntryIndex::new(1, 2).unwrap()),
            ),
            (
                7,
                5,
                Structure::ZeroGalePair(EntryIndex::new(0, 6).unwrap()),
            ),
            (5, 4, Structure::MirrorPair(EntryIndex::new(1, 4).unwrap())),
        ] {
            let d = gen_unit_spherical(&InstanceSpec::new(n, r, s, seed).unwrap()).unwrap();
            let p = EdmProfile::new(&d, &tol()).unwrap();
            let rep = classify(&p, s.entry().unwrap()).unwrap();
            assert_eq!(Some(rep.case_tag), s.expected_case());
            if let Some(z) = p.gale() {
                let (k, l) = s.entry().unwrap().zero_based();
                let zero = matches!(s, Structure::ZeroGalePair(_));
                assert_eq!(zero, z.row(k).norm() < 1e-10 && z.row(l).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn gram_modes_have_rank_r() {
    for seed in 0..10u64 {
        let d = instance(6, 2 + (seed as usize % 4), seed);
        let p = EdmProfile::new(&d, &tol()).unwrap();
        let b = edmp_core::edm::gram(&d, GramChoice::Centroid, &tol()).unwrap();
        let bp = edmp_core::edm::gram(&d, GramChoice::WVector, &tol()).unwrap();
        assert_eq!(rank_of(&b, &tol()).unwrap(), p.r());
        assert_eq!(rank_of(&bp, &tol()).unwrap(), p.r());
        let e = DVector::from_element(6, 1.0);
        assert!((b.as_matrix() * e).amax() < 1e-12);
        assert!((bp.as_matrix() * p.w()).amax() < 1e-12);
    }
}
