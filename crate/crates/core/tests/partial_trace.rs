mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use spinbath::hilbert::partial_trace_env;
use spinbath::{Complex64, StateVector};

/// `ρ_S = Σ_p (⟨p| ⊗ I) |ψ⟩⟨ψ| (|p⟩ ⊗ I)` with dense Kronecker projectors.
fn brute_force(psi: &StateVector, n_s: usize) -> DMatrix<Complex64> {
    let n_env = psi.n_spins() - n_s;
    let v = DVector::from_column_slice(psi.amplitudes());
    let full = &v * v.adjoint();
    let id = DMatrix::<Complex64>::identity(1 << n_s, 1 << n_s);
    let mut rho = DMatrix::<Complex64>::zeros(1 << n_s, 1 << n_s);
    for p in 0..1usize << n_env {
        let mut bra = DMatrix::<Complex64>::zeros(1, 1 << n_env);
        bra[(0, p)] = Complex64::new(1.0, 0.0);
        let proj = bra.kronecker(&id);
        rho += &proj * &full * proj.adjoint();
    }
    rho
}

#[test]
fn matches_brute_force_oracle() {
    for seed in 0..20 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n = 3 + (seed as usize % 5);
        let n_s = 1 + seed as usize % 3;
        let psi = StateVector::random(n, &mut rng);
        let rho = partial_trace_env(&psi, n_s).unwrap();
        assert!(
            (&rho.matrix - brute_force(&psi, n_s)).norm() < 1e-13,
            "seed {seed}"
        );
    }
}

#[test]
fn product_state_gives_pure_factor() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let sys = StateVector::random(2, &mut rng);
    let env = StateVector::random(4, &mut rng);
    let rho = partial_trace_env(&StateVector::product(&sys, &env), 2).unwrap();
    let pure = spinbath::ReducedDensityMatrix::pure(&sys);
    assert!((rho.matrix - pure.matrix).norm() < 1e-14);
}

#[test]
fn large_register_uses_chunked_path() {
    // more than one chunk of environment blocks
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let psi = StateVector::random(15, &mut rng);
    let rho = partial_trace_env(&psi, 2).unwrap();
    let a = psi.amplitudes();
    for r in 0..4 {
        for c in 0..4 {
            let want: Complex64 = (0..1usize << 13)
                .map(|p| a[(p << 2) | r] * a[(p << 2) | c].conj())
                .sum();
            assert!((rho.matrix[(r, c)] - want).norm() < 1e-13);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduced_state_is_a_density_matrix(seed in any::<u64>(), n in 2usize..9, keep in 1usize..4) {
        let n_s = keep.min(n);
        let psi = StateVector::random(n, &mut ChaCha20Rng::seed_from_u64(seed));
        let rho = partial_trace_env(&psi, n_s).unwrap();
        prop_assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(rho.hermiticity_error() < 1e-14);
        prop_assert!(rho.eigenvalues().iter().all(|&l| l > -1e-12));
    }
}
