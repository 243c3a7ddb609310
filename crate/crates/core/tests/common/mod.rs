//! Independent dense constructions used as oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use spinbath::model::{assemble, Part};
use spinbath::{
    Axis, Complex64, CouplingFamily, FamilyKind, HamiltonianSpec, RngStreams, StateVector, Term,
    TopologyKind,
};

pub const FAMILIES: [FamilyKind; 6] = [
    FamilyKind::XY,
    FamilyKind::Heisenberg,
    FamilyKind::HeisenbergType,
    FamilyKind::Ising,
    FamilyKind::IsingType,
    FamilyKind::IsingPM,
];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Spin-1/2 matrix in the (up, down) basis.
pub fn spin_matrix(axis: Axis) -> DMatrix<Complex64> {
    let m = match axis {
        Axis::X => [c(0.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
        Axis::Y => [c(0.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.0, 0.0)],
        Axis::Z => [c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)],
    };
    DMatrix::from_row_slice(2, 2, &m)
}

/// `S^α_k` on `n` spins; spin `k` is bit `k`, so the highest spin is the
/// leftmost Kronecker factor.
pub fn site_operator(n: usize, k: usize, axis: Axis) -> DMatrix<Complex64> {
    let left = DMatrix::<Complex64>::identity(1 << (n - k - 1), 1 << (n - k - 1));
    let right = DMatrix::<Complex64>::identity(1 << k, 1 << k);
    left.kronecker(&spin_matrix(axis)).kronecker(&right)
}

/// Kronecker product over all sites with `ops[k]` on spin `k` (identity where absent).
pub fn kron_chain(n: usize, ops: &[(usize, Axis)]) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::identity(1, 1);
    for k in (0..n).rev() {
        let factor = ops
            .iter()
            .filter(|(site, _)| *site == k)
            .fold(DMatrix::<Complex64>::identity(2, 2), |acc, &(_, a)| {
                acc * spin_matrix(a)
            });
        m = m.kronecker(&factor);
    }
    m
}

pub fn kron_hamiltonian<'a>(
    n: usize,
    terms: impl IntoIterator<Item = &'a Term>,
) -> DMatrix<Complex64> {
    let mut h = DMatrix::<Complex64>::zeros(1 << n, 1 << n);
    for t in terms {
        h -= kron_chain(n, &[(t.i, t.axis), (t.j, t.axis)]) * c(t.coupling, 0.0);
    }
    h
}

pub fn to_dvector(psi: &StateVector) -> DVector<Complex64> {
    DVector::from_column_slice(psi.amplitudes())
}

/// `exp(-iHt) ψ` through a complex Hermitian eigendecomposition.
pub fn kron_evolve(h: &DMatrix<Complex64>, psi: &StateVector, t: f64) -> DVector<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = DVector::from_iterator(
        v.ncols(),
        eig.eigenvalues
            .iter()
            .map(|e| Complex64::from_polar(1.0, -e * t)),
    );
    let coeffs = v.adjoint() * to_dvector(psi);
    v * coeffs.component_mul(&phases)
}

pub fn random_spec(
    seed: u64,
    system: (TopologyKind, usize, FamilyKind, f64),
    environment: (TopologyKind, usize, FamilyKind, f64),
    interaction: (FamilyKind, f64),
) -> HamiltonianSpec {
    assemble(
        Part {
            topology: system.0,
            n: system.1,
            family: CouplingFamily::new(system.2, system.3),
        },
        Part {
            topology: environment.0,
            n: environment.1,
            family: CouplingFamily::new(environment.2, environment.3),
        },
        CouplingFamily::new(interaction.0, interaction.1),
        &RngStreams::new(seed),
    )
    .unwrap()
}
