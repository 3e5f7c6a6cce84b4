use nalgebra::DMatrix;
use proptest::prelude::*;

use vem_sad_core::adaptivity::{bulk_holds, doerfler_mark_values, is_minimal};
use vem_sad_core::geometry::{build_mesh, BoundaryTag, Point2, PolyMesh};
use vem_sad_core::harness::{convergence_rate, span_rate};
use vem_sad_core::polybasis::polygon_quadrature;
use vem_sad_core::vem_diffusion::LocalDiffusion;
use vem_sad_core::vem_elasticity::LocalElasticity;

/// Convex polygon: sorted angles on an ellipse, sheared and shifted.
fn convex_polygon() -> impl Strategy<Value = Vec<Point2>> {
    (3usize..=8)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.1f64..0.9, n),
                0.5f64..1.5,
                -0.4f64..0.4,
                0.02f64..2.0,
                -1.0f64..1.0,
                -1.0f64..1.0,
            )
        })
        .prop_map(|(jit, ay, shear, s, ox, oy)| {
            let n = jit.len();
            jit.iter()
                .enumerate()
                .map(|(i, j)| {
                    let t = (i as f64 + j) * std::f64::consts::TAU / n as f64;
                    let (x, y) = (t.cos(), ay * t.sin());
                    Point2::new(ox + s * (x + shear * y), oy + s * y)
                })
                .collect()
        })
}

fn one_cell(pts: Vec<Point2>) -> PolyMesh {
    let lp: Vec<usize> = (0..pts.len()).collect();
    build_mesh(pts, &[lp], |_| BoundaryTag::Dirichlet).unwrap()
}

fn reproduction_error(p: &DMatrix<f64>) -> f64 {
    (p - DMatrix::identity(p.nrows(), p.ncols())).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn doerfler_marks_a_minimal_bulk(
        values in prop::collection::vec(0.0f64..10.0, 1..60),
        delta in 0.0f64..1.0,
    ) {
        let m = doerfler_mark_values(&values, delta);
        prop_assert!(bulk_holds(&values, &m, delta));
        prop_assert!(is_minimal(&values, &m, delta));
        let mut s = m.clone();
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), m.len());
        prop_assert!(m.iter().all(|&i| i < values.len()));
    }

    #[test]
    fn doerfler_is_monotone_in_delta(
        values in prop::collection::vec(0.01f64..10.0, 1..40),
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(doerfler_mark_values(&values, lo).len() <= doerfler_mark_values(&values, hi).len());
    }

    #[test]
    fn projections_reproduce_polynomials(pts in convex_polygon(), k2 in 1usize..=2) {
        let k1 = k2 + 1;
        let mesh = one_cell(pts);
        let rule = polygon_quadrature(&mesh, 0, 2 * k1 + 2).unwrap();
        let el = LocalElasticity::new(&mesh, 0, k1, &rule).unwrap();
        let e = reproduction_error(&(&el.proj_energy * &el.dof_of_poly));
        prop_assert!(e < 1e-9, "elasticity {e:e}");
        let dl = LocalDiffusion::new(&mesh, 0, k2, &rule).unwrap();
        let e = reproduction_error(&(&dl.proj * &dl.dof_of_poly));
        prop_assert!(e < 1e-9, "diffusion {e:e}");
    }

    #[test]
    fn rates_recover_power_laws(
        r in 0.25f64..4.0,
        c in 1e-3f64..1e3,
        n0 in 10usize..1000,
        growth in prop::collection::vec(2usize..5, 1..6),
    ) {
        let mut dofs = vec![n0];
        for g in &growth {
            dofs.push(dofs.last().unwrap() * g);
        }
        let errs: Vec<f64> = dofs.iter().map(|&n| c * (n as f64).powf(-r / 2.0)).collect();
        for got in convergence_rate(&dofs, &errs).unwrap() {
            prop_assert!((got - r).abs() < 1e-9);
        }
        let last = dofs.len() - 1;
        prop_assert!((span_rate(dofs[0], errs[0], dofs[last], errs[last]) - r).abs() < 1e-9);
    }
}

#[test]
fn rates_reject_bad_input() {
    assert!(convergence_rate(&[10, 20], &[1.0]).is_err());
    assert!(convergence_rate(&[10, 20], &[1.0, 0.0]).is_err());
    assert!(convergence_rate(&[0, 20], &[1.0, 0.5]).is_err());
}
