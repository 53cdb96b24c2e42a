use integrable_core::numerics::{
    eigenvalues, integrate, project_to_constraints, sym_eigen, sym_sqrt_psd, FnConstraint, FnSystem, IntegratorConfig,
    SquareMatrix, SymMatrix,
};
use proptest::prelude::*;

fn sym_strategy(max_n: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| SymMatrix::from_fn(n, |i, j| v[i.min(j) * n + i.max(j)]))
    })
}

/// Orthogonal matrix from a product of plane rotations.
fn rotation(n: usize, angles: &[f64]) -> SquareMatrix {
    let mut q = SquareMatrix::identity(n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let (s, c) = angles[k % angles.len()].sin_cos();
            k += 1;
            let g = SquareMatrix::from_fn(n, |a, b| match (a, b) {
                _ if a == i && b == i || a == j && b == j => c,
                _ if a == i && b == j => -s,
                _ if a == j && b == i => s,
                _ if a == b => 1.0,
                _ => 0.0,
            });
            q = &q * &g;
        }
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigen_reconstructs_and_is_orthogonal(s in sym_strategy(8)) {
        let e = sym_eigen(&s).unwrap();
        let scale = 1.0 + s.as_matrix().max_abs();
        prop_assert!((e.reconstruct().as_matrix() - s.as_matrix()).max_abs() <= 1e-12 * scale * 10.0);
        prop_assert!(e.vectors.orthogonality_defect() <= 1e-12);
    }

    #[test]
    fn eigenvalues_invariant_under_conjugation(s in sym_strategy(6), angles in prop::collection::vec(-3.0f64..3.0, 1..8)) {
        let n = s.dim();
        let q = rotation(n, &angles);
        let t = s.as_matrix().conjugate_by(&q).symmetric_part();
        let a = sym_eigen(&s).unwrap().values;
        let b = sym_eigen(&t).unwrap().values;
        let scale = 1.0 + s.as_matrix().max_abs();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn sqrt_of_positive_definite_squares_back(v in prop::collection::vec(-1.0f64..1.0, 64), n in 1usize..=8) {
        let a = SquareMatrix::from_fn(n, |i, j| v[i * 8 + j]);
        let pd = (&(&a * &a.transpose()) + &SquareMatrix::identity(n).scale(0.1)).symmetric_part();
        let r = sym_sqrt_psd(&pd).unwrap();
        let back = r.square();
        prop_assert!((back.as_matrix() - pd.as_matrix()).max_abs() <= 1e-12 * (1.0 + pd.as_matrix().max_abs()) * 10.0);
    }

    #[test]
    fn general_eigenvalues_match_symmetric_ones(s in sym_strategy(6)) {
        let mut a: Vec<f64> = eigenvalues(s.as_matrix()).unwrap().iter().map(|z| z.re).collect();
        a.sort_by(f64::total_cmp);
        let mut b = sym_eigen(&s).unwrap().values;
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + s.as_matrix().max_abs()));
        }
    }

    #[test]
    fn projection_is_idempotent(x in prop::collection::vec(-2.0f64..2.0, 3)) {
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 0.1);
        let b = [1.0, 0.5, 2.0];
        let c = FnConstraint {
            value: |y: &[f64]| y.iter().zip(&b).map(|(v, w)| w * v * v).sum::<f64>() - 1.0,
            gradient: |y: &[f64], g: &mut [f64]| g.iter_mut().zip(y).zip(&b).for_each(|((g, v), w)| *g = 2.0 * w * v),
        };
        // Start from the radial rescaling so Newton is in its basin.
        let r = x.iter().zip(&b).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
        let start: Vec<f64> = x.iter().map(|v| v / r * 1.01).collect();
        let p = project_to_constraints(&start, &[&c]).unwrap();
        let p2 = project_to_constraints(&p, &[&c]).unwrap();
        prop_assert!(p.iter().zip(&p2).all(|(a, b)| (a - b).abs() <= 1e-12));
    }
}

#[test]
fn rotation_flow_returns_after_hundred_periods() {
    let sys = FnSystem::new(2, |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = -y[1];
        dy[1] = y[0];
    });
    let t_end = 100.0 * std::f64::consts::TAU;
    let traj = integrate(&sys, &[1.0, 0.0], (0.0, t_end), &IntegratorConfig::adaptive(1e-12)).unwrap();
    let (t, y) = traj.last().unwrap();
    assert_eq!(t, t_end);
    assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8, "{y:?}");
}

#[test]
fn rk4_converges_at_fourth_order() {
    let sys = FnSystem::new(1, |t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = t.cos());
    let err = |dt: f64| {
        let traj = integrate(&sys, &[0.0], (0.0, 2.0), &IntegratorConfig::fixed(dt)).unwrap();
        (traj.last().unwrap().1[0] - 2f64.sin()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..20.0).contains(&ratio), "{ratio}");
}
