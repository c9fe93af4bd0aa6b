use std::f64::consts::PI;

use proptest::prelude::*;
use vortex_core::geometry::*;
use vortex_core::VortexError;

fn unit_torus(n: usize) -> TorusGeometry {
    TorusGeometry::new(1.0, 1.0, n, n, 0.0).unwrap()
}

fn torus_field(t: &TorusGeometry, f: impl Fn(f64, f64) -> f64) -> ScalarField {
    ScalarField::from_fn(Grid::Torus(t.clone()), |i| {
        let (u, v) = t.point(i);
        f(u, v)
    })
}

fn plane_field(p: &PlaneGrid, f: impl Fn(f64, f64) -> f64) -> ScalarField {
    ScalarField::from_fn(Grid::Plane(p.clone()), |i| {
        let (x, y) = p.point(i);
        f(x, y)
    })
}

#[test]
fn laplacian_kills_constants() {
    let t = unit_torus(16);
    let g = Grid::Torus(t.clone());
    let out = laplacian(&ScalarField::constant(g.clone(), 3.5), &g).unwrap();
    assert!(out.values.iter().all(|v| v.abs() < 1e-12));

    let p = ProductGrid::new(PlaneGrid::new(2.0, 8).unwrap(), unit_torus(8));
    let g = Grid::Product(p);
    let f = ScalarField::from_fn(g.clone(), |i| (i / 64) as f64 * 0.0 + 1.0);
    let out = laplacian(&f, &g).unwrap();
    // interior plane cells only: the zero ghosts make the boundary ring nonzero
    let n = 8;
    for ix in 1..n - 1 {
        for iy in 1..n - 1 {
            for t in 0..64 {
                assert!(out.values[(ix * n + iy) * 64 + t].abs() < 1e-10);
            }
        }
    }
}

#[test]
fn lowest_mode_on_unit_torus() {
    let t = unit_torus(32);
    let g = Grid::Torus(t.clone());
    let f = torus_field(&t, |u, _| (2.0 * PI * u).sin());
    let out = laplacian(&f, &g).unwrap();
    for (o, v) in out.values.iter().zip(&f.values) {
        assert!((o - 4.0 * PI * PI * v).abs() < 1e-9);
    }
}

#[test]
fn stencil_is_exact_on_quadratics() {
    let p = PlaneGrid::new(2.0, 16).unwrap();
    let g = Grid::Plane(p.clone());
    let f = plane_field(&p, |x, y| x * x + y * y);
    let out = laplacian(&f, &g).unwrap();
    let n = p.n;
    for ix in 1..n - 1 {
        for iy in 1..n - 1 {
            assert!((out.values[ix * n + iy] + 4.0).abs() < 1e-10);
        }
    }
}

#[test]
fn grid_mismatch_is_reported() {
    let a = Grid::Torus(unit_torus(8));
    let b = Grid::Torus(unit_torus(16));
    let err = laplacian(&ScalarField::zeros(a), &b).unwrap_err();
    assert!(matches!(err, VortexError::GridMismatch { .. }));
    assert!(ScalarField::new(b, vec![0.0; 3]).is_err());
}

#[test]
fn quadrature_examples() {
    let t = unit_torus(8);
    assert!((integrate(&ScalarField::constant(Grid::Torus(t.clone()), 1.0)) - 1.0).abs() < 1e-15);
    for n in [4, 10, 64] {
        let p = PlaneGrid::new(2.0, n).unwrap();
        assert!((integrate(&ScalarField::constant(Grid::Plane(p), 1.0)) - 16.0).abs() < 1e-12);
    }
    let s = torus_field(&t, |u, _| (2.0 * PI * u).sin());
    assert!(integrate(&s).abs() < 1e-15);
}

#[test]
fn torus_volume_and_first_eigenvalue() {
    let t = TorusGeometry::new(3.0, 5.0, 16, 32, -1.0).unwrap();
    assert_eq!(t.volume(), 15.0);
    let one = ScalarField::constant(Grid::Torus(t.clone()), 1.0);
    assert!((integrate(&one) - 15.0).abs() < 1e-12);
    // slowest mode varies along the long period
    let f = torus_field(&t, |_, v| (2.0 * PI * v / 5.0).cos());
    let out = laplacian(&f, &Grid::Torus(t.clone())).unwrap();
    let lam = (2.0 * PI / 5.0f64).powi(2);
    for (o, v) in out.values.iter().zip(&f.values) {
        assert!((o - lam * v).abs() < 1e-10);
    }
}

#[test]
fn plane_quadrature_ignores_radius_beyond_support() {
    let bump = |x: f64, y: f64| {
        let t = x * x + y * y;
        if t < 1.0 {
            (1.0 - 1.0 / (1.0 - t)).exp()
        } else {
            0.0
        }
    };
    // same spacing h = 1/16 on two radii
    let a = integrate(&plane_field(&PlaneGrid::new(2.0, 64).unwrap(), bump));
    let b = integrate(&plane_field(&PlaneGrid::new(4.0, 128).unwrap(), bump));
    assert!((a - b).abs() < 1e-14 * a.abs());
}

#[test]
fn fubini_on_separable_fields() {
    let p = PlaneGrid::new(3.0, 24).unwrap();
    let t = TorusGeometry::new(2.0, 3.0, 8, 16, -1.0).unwrap();
    let g = ProductGrid::new(p.clone(), t.clone());
    let a = |x: f64, y: f64| (-(x * x + 0.5 * y * y)).exp();
    let b = |u: f64, v: f64| 2.0 + (PI * u).cos() * (2.0 * PI * v / 3.0).sin();
    let nt = t.len();
    let prod = ScalarField::from_fn(Grid::Product(g), |i| {
        let (x, y) = p.point(i / nt);
        let (u, v) = t.point(i % nt);
        a(x, y) * b(u, v)
    });
    let iterated = integrate(&plane_field(&p, a)) * integrate(&torus_field(&t, b));
    assert!((integrate(&prod) - iterated).abs() < 1e-12 * iterated.abs());
}

#[test]
fn helmholtz_reconstructs_smooth_field() {
    let t = TorusGeometry::new(2.0, 2.0, 32, 32, 0.0).unwrap();
    let g = Grid::Torus(t.clone());
    let target = torus_field(&t, |u, v| (PI * u).sin() * (PI * v).cos() + 0.3);
    let one = ScalarField::constant(g.clone(), 1.0);
    let mut k = laplacian(&target, &g).unwrap();
    for (k, v) in k.values.iter_mut().zip(&target.values) {
        *k += v;
    }
    let u = solve_helmholtz(&one, &k, &g, 1e-12).unwrap();
    for (a, b) in u.values.iter().zip(&target.values) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn helmholtz_residual_below_tolerance_for_variable_potential() {
    let p = PlaneGrid::new(4.0, 32).unwrap();
    let g = Grid::Plane(p.clone());
    let v = plane_field(&p, |x, y| 1.0 + 0.5 * (x * y).sin());
    let k = plane_field(&p, |x, y| (-(x * x + y * y)).exp());
    let tol = 1e-10;
    let u = solve_helmholtz(&v, &k, &g, tol).unwrap();
    let mut r = laplacian(&u, &g).unwrap();
    for i in 0..r.values.len() {
        r.values[i] += v.values[i] * u.values[i] - k.values[i];
    }
    assert!(norm(&r.values) < tol * norm(&k.values));
}

#[test]
fn helmholtz_refuses_zero_potential() {
    let g = Grid::Torus(unit_torus(8));
    let err = solve_helmholtz(&ScalarField::zeros(g.clone()), &ScalarField::constant(g.clone(), 1.0), &g, 1e-10);
    assert!(matches!(err, Err(VortexError::SingularPotential)));
}

/// K0 by trapezoid quadrature of its cosh representation.
fn k0_oracle(r: f64) -> f64 {
    let n = 6000;
    let t_max = ((700.0 + r) / r).acosh();
    let h = t_max / n as f64;
    let mut acc = 0.5 * (-r).exp();
    for i in 1..n {
        acc += (-r * (i as f64 * h).cosh()).exp();
    }
    acc * h
}

#[test]
fn helmholtz_fundamental_solution_is_k0() {
    let p = PlaneGrid::new(16.0, 256).unwrap();
    let g = Grid::Plane(p.clone());
    // unit mass on the four cells around the origin
    let area = p.cell_area();
    let k = plane_field(&p, |x, y| if x.abs() < p.h() && y.abs() < p.h() { 0.25 / area } else { 0.0 });
    let u = solve_helmholtz(&ScalarField::constant(g.clone(), 1.0), &k, &g, 1e-12).unwrap();
    for i in 0..p.len() {
        let (x, y) = p.point(i);
        let r = x.hypot(y);
        if (2.0..=6.0).contains(&r) {
            let exact = k0_oracle(r) / (2.0 * PI);
            assert!((u.values[i] / exact - 1.0).abs() < 0.01, "r = {r}: {} vs {exact}", u.values[i]);
        }
    }
}

#[test]
fn stencil_error_is_second_order() {
    let f = |x: f64, y: f64| (-(x * x + y * y)).exp() * (x + 0.5).cos();
    let lap = |x: f64, y: f64| {
        // -(f_xx + f_yy) for f = e^{-r^2} cos(x + 1/2)
        let e = (-(x * x + y * y)).exp();
        let (c, s) = ((x + 0.5).cos(), (x + 0.5).sin());
        let fxx = e * ((4.0 * x * x - 2.0) * c + 4.0 * x * s - c);
        let fyy = e * (4.0 * y * y - 2.0) * c;
        -(fxx + fyy)
    };
    let err = |n: usize| {
        let p = PlaneGrid::new(6.0, n).unwrap();
        let out = laplacian(&plane_field(&p, f), &Grid::Plane(p.clone())).unwrap();
        (0..p.len())
            .map(|i| {
                let (x, y) = p.point(i);
                if x.hypot(y) < 3.0 {
                    (out.values[i] - lap(x, y)).abs()
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    };
    let ratio = err(64) / err(128);
    assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn separable_inverse_inverts_the_stencil() {
    let n = 24;
    let h = 0.25;
    let t = unit_torus(8);
    let ts = TorusSpectral::new(&t);
    let pg = ProductGrid::new(PlaneGrid::new(n as f64 * h / 2.0, n).unwrap(), t.clone());
    let inv = SeparableInverse::new(n, h, PlaneBc::Dirichlet, Some(&ts));
    let rhs: Vec<f64> = (0..pg.len()).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect();
    let mut u = vec![0.0; rhs.len()];
    inv.apply(&rhs, 0.7, &mut u);
    let mut back = vec![0.0; rhs.len()];
    product_laplacian(&u, &pg, &ts, Ghosts::Zero, &mut back);
    for i in 0..rhs.len() {
        back[i] += 0.7 * u[i];
        assert!((back[i] - rhs[i]).abs() < 1e-10);
    }
}

#[test]
fn gauss_legendre_integrates_polynomials() {
    let (x, w) = gauss_legendre(6, -1.0, 3.0);
    let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(11)).sum();
    let exact = (3.0f64.powi(12) - 1.0) / 12.0;
    assert!((q - exact).abs() < 1e-9 * exact);
}

fn smooth_torus(t: &TorusGeometry, c: &[f64]) -> Vec<f64> {
    (0..t.len())
        .map(|i| {
            let (u, v) = t.point(i);
            let (a, b) = (2.0 * PI * u / t.period_u, 2.0 * PI * v / t.period_v);
            c[0] * a.cos() + c[1] * (2.0 * b).sin() + c[2] * (a + b).cos() + c[3] * (3.0 * a - b).sin() + c[4]
        })
        .collect()
}

/// Smooth field vanishing on the boundary ring of the plane grid.
fn compact_plane(p: &PlaneGrid, c: &[f64]) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let (ix, iy) = (i / p.n, i % p.n);
            if ix == 0 || iy == 0 || ix == p.n - 1 || iy == p.n - 1 {
                return 0.0;
            }
            let (x, y) = p.point(i);
            let r = p.radius;
            let w = (1.0 - (x / r).powi(2)) * (1.0 - (y / r).powi(2));
            w * (c[0] + c[1] * x + c[2] * y * y + c[3] * (x * y).sin() + c[4] * (0.7 * x).cos())
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn torus_laplacian_symmetric_and_positive(a in prop::collection::vec(-1.0f64..1.0, 5), b in prop::collection::vec(-1.0f64..1.0, 5)) {
        let t = TorusGeometry::new(2.0, 3.0, 16, 16, 0.0).unwrap();
        let ts = TorusSpectral::new(&t);
        let (f, g) = (smooth_torus(&t, &a), smooth_torus(&t, &b));
        let (mut lf, mut lg) = (vec![0.0; f.len()], vec![0.0; f.len()]);
        ts.laplacian(&f, &mut lf);
        ts.laplacian(&g, &mut lg);
        let scale = 1.0 + dot(&lf, &lf).sqrt() * dot(&g, &g).sqrt();
        prop_assert!((dot(&lf, &g) - dot(&f, &lg)).abs() < 1e-12 * scale);
        prop_assert!(dot(&lf, &f) >= -1e-12 * scale);
    }

    #[test]
    fn plane_laplacian_symmetric_and_positive(a in prop::collection::vec(-1.0f64..1.0, 5), b in prop::collection::vec(-1.0f64..1.0, 5)) {
        let p = PlaneGrid::new(3.0, 20).unwrap();
        let g = Grid::Plane(p.clone());
        let f = ScalarField::new(g.clone(), compact_plane(&p, &a)).unwrap();
        let h = ScalarField::new(g.clone(), compact_plane(&p, &b)).unwrap();
        let lf = laplacian(&f, &g).unwrap();
        let lh = laplacian(&h, &g).unwrap();
        let scale = 1.0 + norm(&lf.values) * norm(&h.values);
        prop_assert!((dot(&lf.values, &h.values) - dot(&f.values, &lh.values)).abs() < 1e-12 * scale);
        prop_assert!(dot(&lf.values, &f.values) >= -1e-12 * scale);
    }

    #[test]
    fn torus_helmholtz_is_inverted_by_laplacian(c in prop::collection::vec(-1.0f64..1.0, 5), lam in 0.1f64..5.0) {
        let t = TorusGeometry::new(2.0, 3.0, 16, 16, 0.0).unwrap();
        let g = Grid::Torus(t.clone());
        let k = ScalarField::new(g.clone(), smooth_torus(&t, &c)).unwrap();
        let tol = 1e-11;
        let u = solve_helmholtz(&ScalarField::constant(g.clone(), lam), &k, &g, tol).unwrap();
        let mut back = laplacian(&u, &g).unwrap();
        for i in 0..back.values.len() {
            back.values[i] += lam * u.values[i];
        }
        for (a, b) in back.values.iter().zip(&k.values) {
            prop_assert!((a - b).abs() < 10.0 * tol * (1.0 + norm(&k.values)));
        }
    }
}
