use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vortex_core::bundles::*;
use vortex_core::geometry::*;
use vortex_core::plane_vortex::{background_plane, moment_map_plane, BoundaryRule};
use vortex_core::product_monopole::*;
use vortex_core::surface_vortex::*;
use vortex_core::VortexError;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Volume 8 pi, K0 = -1; c_eff = -2 for m = 1.
fn torus(n: usize) -> TorusGeometry {
    TorusGeometry::new(4.0 * PI, 2.0, n, n, -1.0).unwrap()
}

fn dirichlet() -> ProductConfig {
    ProductConfig {
        boundary: ProductBoundary::DirichletZero,
        ..ProductConfig::default()
    }
}

fn linear_map() -> PolynomialMap {
    PolynomialMap::new(vec![vec![c(0.0, 0.0)], vec![c(1.0, 0.0)]]).unwrap()
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Bump in the plane of radius `r`, optionally modulated along the fibre.
fn compact(grid: &ProductGrid, r: f64, amp: f64, wobble: f64) -> Vec<f64> {
    let t = &grid.torus;
    let nt = t.len();
    (0..grid.len())
        .map(|i| {
            let (x, y) = grid.plane.point(i / nt);
            let (u, v) = t.point(i % nt);
            let s = (x * x + y * y) / (r * r);
            if s < 1.0 {
                let fibre = 1.0 + wobble * (2.0 * PI * u / t.period_u).cos() * (2.0 * PI * v / t.period_v).sin();
                amp * (1.0 - 1.0 / (1.0 - s)).exp() * fibre
            } else {
                0.0
            }
        })
        .collect()
}

#[test]
fn constant_map_pulls_back_the_fibre_vortex() {
    let t = torus(16);
    let grid = ProductGrid::new(PlaneGrid::new(4.0, 16).unwrap(), t.clone());
    let f = PolynomialMap::new(vec![vec![c(0.8, 0.3)]]).unwrap();
    let raw = theta_basis(&t, 1).unwrap();
    let bg = prepare_product(&f, &raw, &grid, &dirichlet()).unwrap();
    assert!(bg.beta.iter().all(|b| *b == 0.0));
    assert!(bg.delta.iter().all(|d| *d == 0.0));
    assert!(bg.mu0.iter().all(|m| m.abs() < 1e-9));
    let sigma = bg.basis.combine(&f.coefficients[0]).unwrap();
    let nt = t.len();
    for (i, s) in bg.sigma1_sq.iter().enumerate() {
        assert!((s - sigma[i % nt].norm_sqr()).abs() < 1e-12);
    }
    let (sol, _) = solve_product(&f, &raw, &grid, &dirichlet()).unwrap();
    assert!(sol.alpha.iter().all(|a| a.abs() < 1e-9));
    assert!(sol.energy.e_an.abs() < 1e-9 && sol.energy.e_top == 0.0);
    assert!(sol.energy.identity_gap < 1e-9);
}

#[test]
fn linear_map_background_is_radial() {
    let t = torus(8);
    let grid = ProductGrid::new(PlaneGrid::new(4.0, 32).unwrap(), t.clone());
    let bg = prepare_product(&linear_map(), &theta_basis(&t, 1).unwrap(), &grid, &dirichlet()).unwrap();
    assert!(bg.delta.iter().all(|d| *d == 0.0));
    let p = &grid.plane;
    for i in 0..p.len() {
        let (x, y) = p.point(i);
        assert!((bg.beta[i] + 0.5 * (1.0 + x * x + y * y).ln()).abs() < 1e-14);
    }
    // stencil Laplacian of beta against 2 / (1 + r^2)^2, interior only
    let pg = Grid::Plane(p.clone());
    let lap = laplacian(&ScalarField::new(pg.clone(), bg.beta.clone()).unwrap(), &pg).unwrap();
    let h = p.h();
    for i in 0..p.len() {
        let (x, y) = p.point(i);
        if x.abs().max(y.abs()) < 3.0 {
            let exact = 2.0 / (1.0 + x * x + y * y).powi(2);
            assert!((lap.values[i] - exact).abs() < 2.0 * h * h, "{} vs {exact}", lap.values[i]);
        }
    }
}

#[test]
fn gap_data_tail_decays_like_inverse_square() {
    // m = 2 needs volume above 8 pi
    let t = TorusGeometry::new(4.0, 4.0 * PI, 8, 8, -1.0).unwrap();
    let raw = theta_basis(&t, 2).unwrap();
    let f = PolynomialMap::new(vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
    let annulus_norm = |radius: f64| {
        let grid = ProductGrid::new(PlaneGrid::new(radius, (4.0 * radius) as usize).unwrap(), t.clone());
        let bg = prepare_product(&f, &raw, &grid, &dirichlet()).unwrap();
        let nt = t.len();
        let mut acc = 0.0;
        for (i, m) in bg.mu0.iter().enumerate() {
            let (x, y) = grid.plane.point(i / nt);
            let r = x.hypot(y);
            if r >= 0.5 * radius && r <= radius {
                acc += m * m;
            }
        }
        (acc * grid.cell_volume()).sqrt()
    };
    let ratio = annulus_norm(16.0) / annulus_norm(8.0);
    assert!((0.35..=0.65).contains(&ratio), "ratio {ratio}");
}

#[test]
fn moment_map_at_zero_is_mu0() {
    let t = torus(8);
    let grid = ProductGrid::new(PlaneGrid::new(4.0, 16).unwrap(), t.clone());
    let bg = prepare_product(&linear_map(), &theta_basis(&t, 1).unwrap(), &grid, &dirichlet()).unwrap();
    assert_eq!(moment_map_product(&vec![0.0; grid.len()], &bg).unwrap(), bg.mu0);
    assert!(moment_map_product(&[0.0; 3], &bg).is_err());
}

#[test]
fn trivial_bundle_reduces_to_the_plane() {
    let t = TorusGeometry::new(3.0, 2.0, 8, 8, -1.0).unwrap();
    let plane = PlaneGrid::new(5.0, 32).unwrap();
    let grid = ProductGrid::new(plane.clone(), t.clone());
    let bg = prepare_product(&linear_map(), &theta_basis(&t, 0).unwrap(), &grid, &dirichlet()).unwrap();
    let pbg = background_plane(&Divisor::simple(vec![(0.0, 0.0)]), &plane, BoundaryRule::DirichletZero).unwrap();
    let a_plane: Vec<f64> = (0..plane.len())
        .map(|i| {
            let (x, y) = plane.point(i);
            -0.3 * (-(x * x + y * y) / 4.0).exp()
        })
        .collect();
    let nt = t.len();
    let a_prod: Vec<f64> = (0..grid.len()).map(|i| a_plane[i / nt]).collect();
    let mu = moment_map_product(&a_prod, &bg).unwrap();
    let mp = moment_map_plane(&a_plane, &pbg);
    for (i, m) in mu.iter().enumerate() {
        assert!((m - mp[i / nt]).abs() < 1e-12);
    }
}

#[test]
fn linearisation_matches_finite_differences() {
    let t = torus(8);
    let grid = ProductGrid::new(PlaneGrid::new(4.0, 16).unwrap(), t.clone());
    let bg = prepare_product(&linear_map(), &theta_basis(&t, 1).unwrap(), &grid, &ProductConfig::default()).unwrap();
    let alpha = compact(&grid, 3.0, -0.4, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let gamma: Vec<f64> = compact(&grid, 2.5, 1.0, 0.0)
        .iter()
        .map(|g| g * rng.gen_range(0.5..1.5))
        .collect();
    let eps = 1e-5;
    let shift = |s: f64| -> Vec<f64> { alpha.iter().zip(&gamma).map(|(a, g)| a + s * g).collect() };
    let mp = moment_map_product(&shift(eps), &bg).unwrap();
    let mm = moment_map_product(&shift(-eps), &bg).unwrap();
    let fd: Vec<f64> = mp.iter().zip(&mm).map(|(p, m)| (p - m) / (2.0 * eps)).collect();
    let exact = linearized_product(&alpha, &gamma, &bg).unwrap();
    let diff: Vec<f64> = fd.iter().zip(&exact).map(|(a, b)| a - b).collect();
    assert!(l2_product(&diff, &grid) < 1e-6 * l2_product(&exact, &grid));
}

#[test]
fn energy_identity_is_second_order_in_the_plane() {
    let t = torus(8);
    let raw = theta_basis(&t, 1).unwrap();
    let gap = |n: usize| {
        let grid = ProductGrid::new(PlaneGrid::new(6.0, n).unwrap(), t.clone());
        let bg = prepare_product(&linear_map(), &raw, &grid, &dirichlet()).unwrap();
        energy_product(&compact(&grid, 3.0, 0.4, 0.0), &bg).unwrap().identity_gap
    };
    let ratio = gap(64) / gap(128);
    assert!((ratio - 4.0).abs() < 0.7, "ratio {ratio}");
}

#[test]
fn flat_fibre_identity_is_exact() {
    let t = torus(16);
    let ts = TorusSpectral::new(&t);
    let psi: Vec<f64> = (0..t.len()).map(|i| (t.point(i).1 * PI).sin()).collect();
    let cfg = FiberConfig::from_conformal(&ts, &psi, vec![c(0.0, 0.0); t.len()], 1);
    let id = verify_fiber_identity(&cfg, &t).unwrap();
    assert!(id.gap < 1e-10, "{id:?}");
}

#[test]
fn fibre_identity_gap_is_second_order() {
    let gap = |n: usize, vortex: bool| {
        let g = torus(n);
        let b = theta_basis(&g, 1).unwrap();
        let ts = TorusSpectral::new(&g);
        if vortex {
            let v = solve_surface(&g, &b, &[c(1.0, 0.0)], &SurfaceConfig::default()).unwrap();
            verify_fiber_identity(&FiberConfig::from_conformal(&ts, &v.w, v.sigma, 1), &g).unwrap().gap
        } else {
            let psi: Vec<f64> = (0..g.len())
                .map(|i| {
                    let (u, v) = g.point(i);
                    0.3 * (2.0 * PI * u / g.period_u).sin() + 0.2 * (PI * v).cos()
                })
                .collect();
            let s = b.sections[0].iter().zip(&psi).map(|(s, p)| s * (1.5 * p).exp()).collect();
            verify_fiber_identity(&FiberConfig::from_conformal(&ts, &psi, s, 1), &g).unwrap().gap
        }
    };
    for vortex in [true, false] {
        let ratio = gap(16, vortex) / gap(32, vortex);
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }
}

#[test]
fn reducible_cases() {
    let plane = PlaneGrid::new(3.0, 8).unwrap();
    let flat = TorusGeometry::new(2.0, 2.0, 8, 8, 0.0).unwrap();
    let rep = check_reducible(&plane, &flat, 0, &ProductConfig::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::Reducible, "{rep:?}");

    let volume = 4.0 * PI;
    let tilted = TorusGeometry::new(2.0, 2.0 * PI, 16, 16, -4.0 * PI / volume).unwrap();
    let rep = check_reducible(&plane, &tilted, 1, &ProductConfig::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::Reducible, "{rep:?}");
    assert!(rep.sigma_sq < 1e-6 * rep.volume);

    let err = check_reducible(&plane, &torus(8), 1, &ProductConfig::default()).unwrap_err();
    assert!(matches!(err, VortexError::Precondition(_)));
}

#[test]
fn positive_effective_chern_is_refused() {
    let t = TorusGeometry::new(2.0, 2.0 * PI, 8, 8, -1.0).unwrap();
    let grid = ProductGrid::new(PlaneGrid::new(4.0, 8).unwrap(), t.clone());
    let err = prepare_product(&linear_map(), &theta_basis(&t, 1).unwrap(), &grid, &ProductConfig::default()).unwrap_err();
    assert!(matches!(err, VortexError::Solvability { .. }));
}

#[test]
fn solution_is_independent_of_initial_guess() {
    let t = torus(8);
    let grid = ProductGrid::new(PlaneGrid::new(6.0, 24).unwrap(), t.clone());
    let f = PolynomialMap::new(vec![vec![c(0.5, 0.0)], vec![c(1.0, 0.0)]]).unwrap();
    let cfg = ProductConfig {
        tol: 1e-10,
        cg_tol: 1e-12,
        ..ProductConfig::default()
    };
    let bg = prepare_product(&f, &theta_basis(&t, 1).unwrap(), &grid, &cfg).unwrap();
    let a = solve_product_from(&bg, vec![0.0; grid.len()], &cfg).unwrap();
    let b = solve_product_from(&bg, vec![-0.5; grid.len()], &cfg).unwrap();
    assert!(sup(&a.alpha, &b.alpha) < 1e-7);
    assert!(a.energy.mu_sq < cfg.tol * cfg.tol);
}

#[test]
fn rescaling_the_map_leaves_the_section_norm() {
    let t = torus(8);
    let raw = theta_basis(&t, 1).unwrap();
    let grid = ProductGrid::new(PlaneGrid::new(6.0, 24).unwrap(), t.clone());
    let f = linear_map();
    let cfg = ProductConfig {
        tol: 1e-11,
        cg_tol: 1e-12,
        ..ProductConfig::default()
    };
    let (sa, ba) = solve_product(&f, &raw, &grid, &cfg).unwrap();
    let (sb, bb) = solve_product(&f.scaled(c(-1.5, 2.0)), &raw, &grid, &cfg).unwrap();
    let norm = |s: &ProductSolution, b: &ProductBackground| -> Vec<f64> {
        s.alpha.iter().zip(&b.sigma1_sq).map(|(a, q)| (2.0 * a).exp() * q).collect()
    };
    assert!(sup(&sa.alpha, &sb.alpha) < 1e-9);
    assert!(sup(&norm(&sa, &ba), &norm(&sb, &bb)) < 1e-9);
}

#[test]
fn constant_map_slices_match_the_fibre_vortex() {
    let t = torus(8);
    let grid = ProductGrid::new(PlaneGrid::new(4.0, 16).unwrap(), t.clone());
    let f = PolynomialMap::new(vec![vec![c(1.0, -1.0)]]).unwrap();
    let (sol, bg) = solve_product(&f, &theta_basis(&t, 1).unwrap(), &grid, &ProductConfig::default()).unwrap();
    let rep = slice_report(&sol, &bg).unwrap();
    assert!(!rep.rows.is_empty());
    assert!(rep.rows.iter().all(|r| r.distance < 1e-8));
}

#[test]
fn solved_state_meets_its_topological_energy() {
    let t = torus(8);
    let grid = ProductGrid::new(PlaneGrid::new(8.0, 32).unwrap(), t.clone());
    let (sol, bg) = solve_product(&linear_map(), &theta_basis(&t, 1).unwrap(), &grid, &ProductConfig::default()).unwrap();
    assert!((bg.c_eff + 2.0).abs() < 1e-12);
    assert!((sol.energy.e_top - 8.0 * PI * PI).abs() < 1e-9);
    assert!(sol.energy.mu_sq < 1e-12);
    assert!((sol.energy.e_an / sol.energy.e_top - 1.0).abs() < 0.05);
    assert!(!sol.boundary_warning);
}
