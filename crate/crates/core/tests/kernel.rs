mod common;

use common::*;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use spinbath::hilbert::dense_hamiltonian;
use spinbath::propagate::{operator_bounds, spectral_bounds, BoundsMethod};
use spinbath::{Complex64, SpinOperator, StateVector, TopologyKind};

fn sampled_spec(seed: u64) -> spinbath::HamiltonianSpec {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    let n_s = rng.random_range(2..=3);
    let n_env = rng.random_range(0..=5);
    let pick = |rng: &mut ChaCha20Rng| FAMILIES[rng.random_range(0..FAMILIES.len())];
    let env_topo = [
        TopologyKind::Ring,
        TopologyKind::SpinGlass,
        TopologyKind::None,
    ][rng.random_range(0..3)];
    let env_topo = if n_env < 3 && env_topo == TopologyKind::Ring {
        TopologyKind::SpinGlass
    } else {
        env_topo
    };
    let (fs, fe, fi) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
    let (j, o, d) = (
        rng.random_range(-2.0..2.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-0.5..0.5),
    );
    random_spec(
        seed,
        (TopologyKind::Ring, n_s, fs, j),
        (env_topo, n_env, fe, o),
        (fi, d),
    )
}

#[test]
fn matvec_matches_kronecker_oracle() {
    for seed in 0..120 {
        let spec = sampled_spec(seed);
        let n = spec.n_total();
        let op = SpinOperator::from_spec(&spec).unwrap();
        let oracle = kron_hamiltonian(n, spec.terms());
        let psi = StateVector::random(n, &mut ChaCha20Rng::seed_from_u64(seed));
        let mut out = vec![Complex64::default(); psi.dim()];
        op.apply(psi.amplitudes(), &mut out).unwrap();
        let want = &oracle * to_dvector(&psi);
        let err = (DVector::from_column_slice(&out) - want).norm();
        assert!(err < 1e-12, "seed {seed}: deviation {err}");
    }
}

#[test]
fn dense_builder_matches_kronecker_oracle() {
    for seed in 0..30 {
        let spec = sampled_spec(seed);
        let n = spec.n_total();
        let dense = dense_hamiltonian(n, spec.terms()).map(|x| Complex64::new(x, 0.0));
        let oracle = kron_hamiltonian(n, spec.terms());
        assert!((dense - &oracle).norm() < 1e-12, "seed {seed}");
        // real symmetric in the up/down basis
        assert!(oracle.iter().all(|z| z.im.abs() < 1e-15));
        assert!((&oracle - oracle.adjoint()).norm() < 1e-14);
    }
}

#[test]
fn real_and_complex_kernels_agree() {
    let spec = sampled_spec(7);
    let op = SpinOperator::from_spec(&spec).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut y = vec![0.0; op.dim()];
    let mut yc = vec![Complex64::default(); op.dim()];
    op.apply(&x, &mut y).unwrap();
    op.apply(&xc, &mut yc).unwrap();
    assert!(y
        .iter()
        .zip(&yc)
        .all(|(a, b)| (a - b.re).abs() == 0.0 && b.im == 0.0));
}

#[test]
fn kernel_is_hermitian() {
    for seed in 0..20 {
        let spec = sampled_spec(seed + 500);
        let op = SpinOperator::from_spec(&spec).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = StateVector::random(spec.n_total(), &mut rng);
        let y = StateVector::random(spec.n_total(), &mut rng);
        let mut hx = vec![Complex64::default(); x.dim()];
        let mut hy = vec![Complex64::default(); x.dim()];
        op.apply(x.amplitudes(), &mut hx).unwrap();
        op.apply(y.amplitudes(), &mut hy).unwrap();
        let a: Complex64 = x
            .amplitudes()
            .iter()
            .zip(&hy)
            .map(|(u, v)| u.conj() * v)
            .sum();
        let b: Complex64 = hx
            .iter()
            .zip(y.amplitudes())
            .map(|(u, v)| u.conj() * v)
            .sum();
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn bounds_enclose_dense_spectrum_of_eight_spin_specs() {
    for seed in 0..10 {
        let fam = FAMILIES[seed as usize % 6];
        let spec = random_spec(
            seed,
            (TopologyKind::Ring, 2, fam, -1.3),
            (
                TopologyKind::SpinGlass,
                6,
                FAMILIES[(seed as usize + 2) % 6],
                0.9,
            ),
            (FAMILIES[(seed as usize + 4) % 6], 0.4),
        );
        let eig = kron_hamiltonian(8, spec.terms()).symmetric_eigenvalues();
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| {
                (a.min(e), b.max(e))
            });
        let g = spectral_bounds(&spec).unwrap();
        assert!(g.e_min <= lo && hi <= g.e_max, "gershgorin seed {seed}");
        let op = SpinOperator::from_spec(&spec).unwrap();
        let l = operator_bounds(
            &op,
            BoundsMethod::Lanczos,
            &mut ChaCha20Rng::seed_from_u64(seed),
        )
        .unwrap();
        assert!(l.e_min <= lo && hi <= l.e_max, "lanczos seed {seed}");
        assert!(l.e_max - l.e_min <= g.e_max - g.e_min + 1e-12);
    }
}
