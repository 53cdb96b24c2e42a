use integrable_core::euler_top::{
    characteristic_polynomial, euler_rhs, hamiltonian, modulated_flow, modulated_samples, solve_omega,
    spectral_invariants, InertiaSpec, RigidBodyState,
};
use integrable_core::modulation::ModulationProfile;
use integrable_core::numerics::{IntegratorConfig, SkewMatrix, SquareMatrix, SymMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hat(m: [f64; 3]) -> SkewMatrix {
    SkewMatrix::from_upper(3, &[-m[2], m[1], -m[0]]).unwrap()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn leibniz_det(a: &SquareMatrix) -> f64 {
    let n = a.dim();
    permutations(n)
        .into_iter()
        .map(|p| {
            let inversions = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            sign * (0..n).map(|i| a[(i, p[i])]).product::<f64>()
        })
        .sum()
}

fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> SkewMatrix {
    SkewMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let a = SquareMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    (&(&a * &a.transpose()) + &SquareMatrix::identity(n)).symmetric_part()
}

#[test]
fn three_dimensional_top_is_the_classical_euler_equation() {
    let (j1, j2, j3) = (1.0, 2.0, 3.5);
    let inertia = InertiaSpec::fixed(SymMatrix::diagonal(&[j1, j2, j3])).unwrap();
    let m = [0.3, -0.7, 1.1];
    let (dm, _) = euler_rhs(&RigidBodyState::new(hat(m)), &inertia).unwrap();
    // Principal moments of the body are sums of pairs of the j's.
    let omega = [m[0] / (j2 + j3), m[1] / (j1 + j3), m[2] / (j1 + j2)];
    let expected = hat(cross(m, omega));
    assert!((dm.as_matrix() - expected.as_matrix()).max_abs() < 1e-15);
}

#[test]
fn omega_solves_the_anticommutator_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 2..=5 {
        let m = random_skew(&mut rng, n);
        let j = random_spd(&mut rng, n);
        let w = solve_omega(&m, &j).unwrap();
        let lhs = &(w.as_matrix() * j.as_matrix()) + &(j.as_matrix() * w.as_matrix());
        assert!((&lhs - m.as_matrix()).max_abs() < 1e-12, "n = {n}");
    }
}

#[test]
fn char_poly_matches_leibniz_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in 2..=4 {
        let m = random_skew(&mut rng, n);
        let s = random_spd(&mut rng, n);
        let p = characteristic_polynomial(&m, &s).unwrap();
        for _ in 0..10 {
            let (l, mu) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let a = SquareMatrix::from_fn(n, |i, j| m.as_matrix()[(i, j)] + l * s[(i, j)] - if i == j { mu } else { 0.0 });
            let det = leibniz_det(&a);
            assert!((p.eval(l, mu) - det).abs() < 1e-10 * (1.0 + det.abs()), "n = {n}");
        }
    }
}

#[test]
fn three_dimensional_invariants_are_casimir_and_energy_like() {
    // For N = 3, det(M + λJ₀² − μ) has μ¹ coefficient −|m|² at λ = 0.
    let m = [0.3, -0.7, 1.1];
    let inv = spectral_invariants(&hat(m), &SymMatrix::diagonal(&[1.0, 2.0, 3.0])).unwrap();
    let casimir = m.iter().map(|v| v * v).sum::<f64>();
    assert!((inv.get(0, 1).unwrap() + casimir).abs() < 1e-12);
}

#[test]
fn principal_rotation_is_an_equilibrium_under_modulation() {
    let inertia = InertiaSpec::new(SymMatrix::diagonal(&[1.0, 2.0, 3.0, 4.0]), Some(ModulationProfile::sinusoidal(0.0, 0.3, 1.0))).unwrap();
    let mut upper = vec![0.0; 6];
    upper[0] = 0.8;
    let m0 = SkewMatrix::from_upper(4, &upper).unwrap();
    let run = modulated_flow(&RigidBodyState::new(m0.clone()), &inertia, 5.0, &IntegratorConfig::adaptive(1e-10)).unwrap();
    for s in &run.states {
        assert!((s.m.as_matrix() - m0.as_matrix()).max_abs() < 1e-13);
    }
}

#[test]
fn unmodulated_energy_is_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let j0 = random_spd(&mut rng, 4);
    let inertia = InertiaSpec::fixed(j0.clone()).unwrap();
    let m0 = random_skew(&mut rng, 4);
    let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.4).collect();
    let run = modulated_samples(&RigidBodyState::new(m0.clone()), &inertia, &times, &IntegratorConfig::adaptive(1e-11)).unwrap();
    let h0 = hamiltonian(&m0, &j0).unwrap();
    for s in &run.states {
        assert!((hamiltonian(&s.m, &j0).unwrap() - h0).abs() < 1e-9 * h0.abs().max(1.0));
    }
    assert!(run.report.max_coefficient_drift() < 1e-8);
}

#[test]
fn frame_stays_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let inertia = InertiaSpec::new(SymMatrix::diagonal(&[1.0, 2.0, 3.0]), Some(ModulationProfile::sinusoidal(0.0, 0.3, 1.0))).unwrap();
    let s0 = RigidBodyState::new(random_skew(&mut rng, 3)).with_frame(SquareMatrix::identity(3));
    let run = modulated_flow(&s0, &inertia, 10.0, &IntegratorConfig::adaptive(1e-10)).unwrap();
    assert!(run.report.orthogonality.unwrap() < 1e-8);
    assert!(run.report.skewness < 1e-12);
}

#[test]
fn negative_moments_are_rejected() {
    let inertia = InertiaSpec::new(SymMatrix::diagonal(&[1.0, 2.0]), Some(ModulationProfile::sinusoidal(0.0, 3.0, 1.0))).unwrap();
    assert!(inertia.validate_over(0.0, 1.0, 64).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parity_coefficients_vanish(seed in 0u64..1000, n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inv = spectral_invariants(&random_skew(&mut rng, n), &random_spd(&mut rng, n)).unwrap();
        prop_assert!(inv.parity_residual < 1e-9);
    }
}
