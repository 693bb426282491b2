use peierls::bloch_section::{riesz_projection, riesz_projection_contour, smooth_section, transport_section};
use peierls::bloch_solver::{assemble_fiber_matrix, compute_bands, fiber_eigen, DEFAULT_GAP_TOL};
use peierls::lattice::{BZGrid, DualShell, Lattice};
use peierls::symbols::{PeriodicPotential, PeriodicSymbol};
use peierls::Error;

fn mathieu(a: f64) -> PeriodicSymbol {
    let l = Lattice::one_dim_standard();
    PeriodicSymbol::nonrelativistic(PeriodicPotential::cosine(&l, a))
}

#[test]
fn mathieu_section_1d() {
    let s = mathieu(1.0);
    let l = Lattice::one_dim_standard();
    let shell = DualShell::new(&l, 8.0).unwrap();
    let grid = BZGrid::new(&l, 64).unwrap();
    let b = compute_bands(&s, &grid, &shell, 3, true).unwrap();
    for k in 0..2 {
        let sec = transport_section(&b, k, DEFAULT_GAP_TOL).unwrap();
        let r = sec.report().unwrap();
        println!("band {k}: {r:?} kappa={}", sec.kappa());
        assert!(r.norm_defect < 1e-12);
        assert!(r.residual < 1e-10);
        assert!(r.equivariance < 1e-8);
        assert!(r.conjugation < 1e-8);
        assert!(r.berry_defect < 1e-6);
        assert!(r.min_overlap_re > 0.9);
        let sm = smooth_section(&sec, 3.0 / 64.0).unwrap();
        let r2 = sm.report().unwrap();
        println!("smoothed: {r2:?}");
        assert!(r2.equivariance < 1e-8);
        assert!(r2.conjugation < 1e-8);
        assert!(r2.residual < 1e-10);
    }
}

#[test]
fn cosine_section_2d() {
    let l = Lattice::square_standard();
    let v = PeriodicPotential::separable_cosine_2d(&l, 1.0).unwrap();
    let s = PeriodicSymbol::nonrelativistic(v);
    let shell = DualShell::new(&l, 8.0).unwrap();
    let grid = BZGrid::new(&l, 16).unwrap();
    let b = compute_bands(&s, &grid, &shell, 2, true).unwrap();
    let sec = transport_section(&b, 0, DEFAULT_GAP_TOL).unwrap();
    let r = sec.report().unwrap();
    println!("{r:?}");
    assert!(r.norm_defect < 1e-12);
    assert!(r.residual < 1e-10);
    assert!(r.equivariance < 1e-8);
    assert!(r.conjugation < 1e-8);
    assert!(r.kappa_periodicity < 1e-8);
    assert!(r.min_overlap_re > 0.8);
    let sm = smooth_section(&sec, 2.0 / 16.0).unwrap();
    let r2 = sm.report().unwrap();
    assert!(r2.equivariance < 1e-8 && r2.conjugation < 1e-8);
}

#[test]
fn free_first_band_is_degenerate_at_zone_edge() {
    let l = Lattice::one_dim_standard();
    let s = PeriodicSymbol::nonrelativistic(PeriodicPotential::zero(&l));
    let shell = DualShell::new(&l, 4.0).unwrap();
    let grid = BZGrid::new(&l, 16).unwrap();
    let b = compute_bands(&s, &grid, &shell, 3, true).unwrap();
    assert!(matches!(
        transport_section(&b, 0, DEFAULT_GAP_TOL),
        Err(Error::NearDegeneracy { .. })
    ));
}

#[test]
fn contour_projector_matches_outer_product() {
    let s = mathieu(1.0);
    let l = Lattice::one_dim_standard();
    let shell = DualShell::new(&l, 6.0).unwrap();
    let f = assemble_fiber_matrix(&s, [0.3, 0.0], &shell).unwrap();
    let e = fiber_eigen(&s, [0.3, 0.0], &shell).unwrap();
    let p = riesz_projection(&f, 0, &e, DEFAULT_GAP_TOL).unwrap();
    let q = riesz_projection_contour(&f, 0, &e, DEFAULT_GAP_TOL, 32).unwrap();
    let d = peierls::linalg::max_abs(&(&p.matrix - &q.matrix));
    assert!(d < 1e-8, "{d}");
    assert!((p.trace().re - 1.0).abs() < 1e-12);
    assert!(q.idempotency_defect() < 1e-8);
    assert!(q.hermitian_defect() < 1e-8);
}
