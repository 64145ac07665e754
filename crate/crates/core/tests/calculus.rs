//! Convergence of the discrete helical calculus on smooth closed-form fields.

use helimag::grid::{
    boundary_pairing, helical_gradient_with, helical_laplacian_composed, inner_product, l2_norm, max_boundary_flux,
    partial_derivative, Boundary,
};
use helimag::{Grid, MaterialParams, Vec3, VectorField};

const EXTENTS: [f64; 3] = [1.0, 0.8, 0.6];

fn params() -> MaterialParams {
    MaterialParams {
        ell_ex: 0.7,
        kappa: 0.4,
        ..MaterialParams::default()
    }
}

fn u_of(x: Vec3) -> Vec3 {
    Vec3::new((2.0 * x.x()).sin(), x.y() * x.z().cos(), (x.x() + 0.5 * x.y()).cos())
}

fn v_of(x: Vec3) -> Vec3 {
    Vec3::new(x.y().cos() * x.z(), (x.x() * x.x() + 0.3).sqrt(), (1.5 * x.z()).sin() + x.x())
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|p| (p[0] / p[1]).log2()).collect()
}

#[test]
fn derivative_of_sine_is_second_order() {
    let mut errs = Vec::new();
    for n in [8, 16, 32, 64] {
        let g = Grid::new(EXTENTS, [n, 4, 4]).unwrap();
        let u = VectorField::from_fn(g, |x| Vec3::new((3.0 * x.x()).sin(), 0.0, 0.0));
        let exact = VectorField::from_fn(g, |x| Vec3::new(3.0 * (3.0 * x.x()).cos(), 0.0, 0.0));
        let d = partial_derivative(&u, 0, Boundary::Free).unwrap();
        errs.push(d.sub(&exact).unwrap().max_norm());
    }
    for q in orders(&errs) {
        assert!(q > 1.8, "{errs:?}");
    }
}

/// `‖∇_h(u×v) − (∇_h u × v + u × ∇_h v)‖` with one-sided boundary stencils.
fn leibniz_defect(n: usize) -> f64 {
    let p = params();
    let g = Grid::new(EXTENTS, [n, n, n]).unwrap();
    let u = VectorField::from_fn(g, u_of);
    let v = VectorField::from_fn(g, v_of);
    let uv = u.cross(&v).unwrap();
    let gu = helical_gradient_with(&u, &p, Boundary::Free).unwrap();
    let gv = helical_gradient_with(&v, &p, Boundary::Free).unwrap();
    let guv = helical_gradient_with(&uv, &p, Boundary::Free).unwrap();
    let mut sq = 0.0;
    for a in 0..3 {
        let rhs = gu.components[a].cross(&v).unwrap().add(&u.cross(&gv.components[a]).unwrap()).unwrap();
        let r = guv.components[a].sub(&rhs).unwrap();
        sq += l2_norm(&r).powi(2);
    }
    sq.sqrt()
}

#[test]
fn leibniz_rule_converges() {
    let errs: Vec<f64> = [8, 16, 32].into_iter().map(leibniz_defect).collect();
    for q in orders(&errs) {
        assert!(q >= 1.0, "{errs:?}");
    }
    assert!(errs[2] < 1e-2);
}

/// `⟨∇_h u, ∇_h v⟩ − l_ex ⟨u, ∇_h v · n⟩_∂Ω + ⟨u, Δ_h v⟩`.
fn integration_by_parts_defect(n: usize) -> f64 {
    let p = params();
    let g = Grid::new(EXTENTS, [n, n, n]).unwrap();
    let u = VectorField::from_fn(g, u_of);
    let v = VectorField::from_fn(g, v_of);
    let gu = helical_gradient_with(&u, &p, Boundary::Free).unwrap();
    let gv = helical_gradient_with(&v, &p, Boundary::Free).unwrap();
    let lap = helical_laplacian_composed(&v, &p, Boundary::Free).unwrap();
    let lhs = gu.inner(&gv).unwrap();
    let boundary = p.ell_ex * boundary_pairing(&u, &gv).unwrap();
    (lhs - boundary + inner_product(&u, &lap).unwrap()).abs()
}

#[test]
fn integration_by_parts_converges() {
    let errs: Vec<f64> = [8, 16, 32].into_iter().map(integration_by_parts_defect).collect();
    for q in orders(&errs) {
        assert!(q >= 1.0, "{errs:?}");
    }
}

#[test]
fn ghost_fill_removes_helical_flux() {
    let p = params();
    for n in [4, 8, 16] {
        let g = Grid::new(EXTENTS, [n, n, n]).unwrap();
        let m = VectorField::from_fn(g, |x| u_of(x).normalized().unwrap());
        let h = g.spacing().iter().copied().fold(0.0, f64::max);
        assert!(max_boundary_flux(&m, &p) <= 1e-12 + h * h);
        assert!(max_boundary_flux(&m, &p) <= 1e-12);
    }
}
