//! Diagnostics of the reduced density matrix.
//!
//! Inside a degenerate level of `H_S` the eigenvectors are only fixed up to a
//! rotation. All level-sensitive quantities (σ, γ, b, δ and the reported
//! populations) are therefore evaluated in the eigenbasis that additionally
//! diagonalizes ρ within each level: populations of a level are the
//! eigenvalues of its ρ block, sorted in descending order, and σ collects the
//! coherences between different levels. This makes every metric independent
//! of how a degenerate level happens to be spanned.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{dense_hamiltonian, dense_spin_product, BasisTag, ReducedDensityMatrix};
use crate::linalg::{hermitian_eigenvalues, jacobi_eigh};
use crate::model::{Axis, HamiltonianSpec};

/// Largest system register for dense diagonalization of `H_S`.
pub const SYSTEM_MAX_SPINS: usize = 8;
pub const DEGENERACY_REL_TOL: f64 = 1e-9;
pub const DEFAULT_FLOOR: f64 = 1e-12;
const JACOBI_OFF_TOL: f64 = 1e-12;

/// Eigen-decomposition of `H_S` with degenerate levels grouped.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Orthonormal eigenvectors as columns; largest-magnitude entry positive.
    pub vectors: DMatrix<f64>,
    /// Index lists of degenerate levels, in ascending energy.
    pub clusters: Vec<Vec<usize>>,
    pub cluster_of: Vec<usize>,
}

impl EigenBasis {
    pub fn from_hamiltonian(h: &DMatrix<f64>) -> Self {
        let (energies, mut vectors) = jacobi_eigh(h, JACOBI_OFF_TOL);
        for mut col in vectors.column_iter_mut() {
            let max = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let lead = col.iter().position(|v| v.abs() >= max - 1e-10).unwrap_or(0);
            if col[lead] < 0.0 {
                col.neg_mut();
            }
        }
        let scale = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let tol = DEGENERACY_REL_TOL * scale;
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut cluster_of = vec![0; energies.len()];
        for (i, &e) in energies.iter().enumerate() {
            let new_level = match clusters.last() {
                Some(c) => e - energies[*c.last().unwrap()] > tol,
                None => true,
            };
            if new_level {
                clusters.push(Vec::new());
            }
            clusters.last_mut().unwrap().push(i);
            cluster_of[i] = clusters.len() - 1;
        }
        Self {
            energies,
            vectors,
            clusters,
            cluster_of,
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Mean energy of each level.
    pub fn level_energies(&self) -> Vec<f64> {
        self.clusters
            .iter()
            .map(|c| c.iter().map(|&i| self.energies[i]).sum::<f64>() / c.len() as f64)
            .collect()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }
}

/// Dense diagonalization of the system Hamiltonian.
pub fn eigendecompose_system(spec: &HamiltonianSpec) -> Result<EigenBasis> {
    if spec.n_s > SYSTEM_MAX_SPINS {
        return Err(Error::Budget(format!(
            "system eigenbasis supports at most {SYSTEM_MAX_SPINS} spins, got {}",
            spec.n_s
        )));
    }
    Ok(EigenBasis::from_hamiltonian(&dense_hamiltonian(
        spec.n_s,
        &spec.sys_terms,
    )))
}

/// `ρ' = Vᵀ ρ V`.
pub fn to_energy_basis(
    rho: &ReducedDensityMatrix,
    basis: &EigenBasis,
) -> Result<ReducedDensityMatrix> {
    if rho.basis != BasisTag::UpDown {
        return Err(Error::InvalidInput(
            "density matrix is already in the energy basis".into(),
        ));
    }
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: rho.dim(),
        });
    }
    let v = basis.vectors.map(|x| Complex64::new(x, 0.0));
    let matrix = v.transpose() * &rho.matrix * v;
    Ok(ReducedDensityMatrix {
        n_spins: rho.n_spins,
        matrix,
        basis: BasisTag::Energy,
    })
}

fn check_energy(rho: &ReducedDensityMatrix, basis: &EigenBasis) -> Result<()> {
    if rho.basis != BasisTag::Energy {
        return Err(Error::InvalidInput(
            "metric needs the energy-basis density matrix".into(),
        ));
    }
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: rho.dim(),
        });
    }
    Ok(())
}

/// Populations in the level-diagonalizing frame, indexed like `basis.energies`.
pub fn populations(rho: &ReducedDensityMatrix, basis: &EigenBasis) -> Result<Vec<f64>> {
    check_energy(rho, basis)?;
    let mut pops = vec![0.0; basis.dim()];
    for c in &basis.clusters {
        if c.len() == 1 {
            pops[c[0]] = rho.matrix[(c[0], c[0])].re;
            continue;
        }
        let block = DMatrix::from_fn(c.len(), c.len(), |r, s| rho.matrix[(c[r], c[s])]);
        let mut vals = hermitian_eigenvalues(&block);
        vals.reverse();
        for (&i, v) in c.iter().zip(vals) {
            pops[i] = v;
        }
    }
    Ok(pops)
}

/// Size of the coherences between different energy levels.
pub fn sigma(rho: &ReducedDensityMatrix, basis: &EigenBasis) -> Result<f64> {
    check_energy(rho, basis)?;
    let d = basis.dim();
    let mut s = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            if basis.cluster_of[i] != basis.cluster_of[j] {
                s += rho.matrix[(i, j)].norm_sqr();
            }
        }
    }
    Ok(s.sqrt())
}

/// Spread of the populations within each degenerate level.
pub fn gamma(rho: &ReducedDensityMatrix, basis: &EigenBasis) -> Result<f64> {
    Ok(gamma_of(&populations(rho, basis)?, basis))
}

fn gamma_of(pops: &[f64], basis: &EigenBasis) -> f64 {
    let mut s = 0.0;
    for c in &basis.clusters {
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                s += (pops[i] - pops[j]).powi(2);
            }
        }
    }
    s.sqrt()
}

/// Mean of `(ln p_i - ln p_j) / (E_j - E_i)` over pairs from different
/// levels with both populations above `floor`; equals β for `p ∝ exp(-βE)`.
/// `None` when no pair qualifies.
pub fn effective_beta(
    rho: &ReducedDensityMatrix,
    basis: &EigenBasis,
    floor: f64,
) -> Result<Option<f64>> {
    Ok(beta_of(&populations(rho, basis)?, basis, floor))
}

fn beta_of(pops: &[f64], basis: &EigenBasis, floor: f64) -> Option<f64> {
    let e = &basis.energies;
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            if basis.cluster_of[i] == basis.cluster_of[j] || pops[i] <= floor || pops[j] <= floor {
                continue;
            }
            sum += (pops[i].ln() - pops[j].ln()) / (e[j] - e[i]);
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Distance of the populations from `exp(-bE)/Z`.
pub fn delta(rho: &ReducedDensityMatrix, basis: &EigenBasis, b: f64) -> Result<f64> {
    Ok(delta_of(&populations(rho, basis)?, basis, b))
}

fn boltzmann(energies: &[f64], b: f64) -> Vec<f64> {
    // shift by the ground energy (or top, for b < 0) to keep the exponentials finite
    let pivot = if b >= 0.0 {
        energies[0]
    } else {
        energies[energies.len() - 1]
    };
    let w: Vec<f64> = energies.iter().map(|&e| (-b * (e - pivot)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn delta_of(pops: &[f64], basis: &EigenBasis, b: f64) -> f64 {
    boltzmann(&basis.energies, b)
        .iter()
        .zip(pops)
        .map(|(q, p)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `1 - Tr ρ²`.
pub fn quadratic_entropy(rho: &ReducedDensityMatrix) -> f64 {
    1.0 - rho.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// `Re Tr(ρ ρ₀)`.
pub fn loschmidt_echo(rho: &ReducedDensityMatrix, rho0: &ReducedDensityMatrix) -> Result<f64> {
    if rho.dim() != rho0.dim() || rho.basis != rho0.basis {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: rho0.dim(),
        });
    }
    // Tr(AB) = Σ_ij A_ij B_ji
    let d = rho.dim();
    let mut s = Complex64::default();
    for i in 0..d {
        for j in 0..d {
            s += rho.matrix[(i, j)] * rho0.matrix[(j, i)];
        }
    }
    Ok(s.re)
}

/// `Σ_i p_i E_i = Tr(ρ H_S)`.
pub fn system_energy(rho: &ReducedDensityMatrix, basis: &EigenBasis) -> Result<f64> {
    check_energy(rho, basis)?;
    Ok((0..basis.dim())
        .map(|i| rho.matrix[(i, i)].re * basis.energies[i])
        .sum())
}

fn two_spin(rho: &ReducedDensityMatrix) -> Result<()> {
    if rho.dim() != 4 || rho.basis != BasisTag::UpDown {
        return Err(Error::InvalidInput(
            "two-spin up/down density matrix required".into(),
        ));
    }
    Ok(())
}

/// Wootters concurrence of a two-spin density matrix in the up/down basis.
pub fn concurrence(rho: &ReducedDensityMatrix) -> Result<f64> {
    two_spin(rho)?;
    let neg = rho.eigenvalues().first().copied().unwrap_or(0.0);
    if neg < -1e-8 {
        return Err(Error::InvalidInput(format!(
            "density matrix not positive (eigenvalue {neg})"
        )));
    }
    let yy = dense_spin_product(2, &[(0, Axis::Y), (1, Axis::Y)]) * Complex64::new(4.0, 0.0);
    let tilde = &yy * rho.matrix.conjugate() * &yy;
    let r = &rho.matrix * tilde;
    let eig = r
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::InvalidInput("eigenvalues of ρρ̃ not available".into()))?;
    let mut lam: Vec<f64> = eig.iter().map(|z| z.re.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

/// `Tr(ρ Π S^α_k)` over the given factors.
pub fn correlator(rho: &ReducedDensityMatrix, factors: &[(usize, Axis)]) -> Result<f64> {
    if rho.basis != BasisTag::UpDown {
        return Err(Error::InvalidInput(
            "correlators need the up/down density matrix".into(),
        ));
    }
    Ok(rho.expect(&dense_spin_product(rho.n_spins, factors)).re)
}

/// Two-spin expectation values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlators {
    pub s1_dot_s2: f64,
    pub szsz: f64,
    pub sxsx: f64,
    /// `⟨S^z_1 + S^z_2⟩`.
    pub magnetization: f64,
    pub sx1: f64,
    pub sz1: f64,
}

pub fn two_spin_correlators(rho: &ReducedDensityMatrix) -> Result<Correlators> {
    two_spin(rho)?;
    let pair = |a| correlator(rho, &[(0, a), (1, a)]);
    let (xx, yy, zz) = (pair(Axis::X)?, pair(Axis::Y)?, pair(Axis::Z)?);
    let sz1 = correlator(rho, &[(0, Axis::Z)])?;
    Ok(Correlators {
        s1_dot_s2: xx + yy + zz,
        szsz: zz,
        sxsx: xx,
        magnetization: sz1 + correlator(rho, &[(1, Axis::Z)])?,
        sx1: correlator(rho, &[(0, Axis::X)])?,
        sz1,
    })
}

/// `⟨S|ρ|T₀⟩` between the singlet `(|↑↓⟩ - |↓↑⟩)/√2` and the `M = 0` triplet
/// `(|↑↓⟩ + |↓↑⟩)/√2` (spin 0 written first).
pub fn singlet_triplet_coherence(rho: &ReducedDensityMatrix) -> Result<Complex64> {
    two_spin(rho)?;
    // |↑↓⟩ = index 0b10 (spin 1 down), |↓↑⟩ = index 0b01
    let (ud, du) = (2, 1);
    let m = &rho.matrix;
    Ok(0.5 * (m[(ud, ud)] + m[(ud, du)] - m[(du, ud)] - m[(du, du)]))
}

/// Singlet population `⟨S|ρ|S⟩`.
pub fn singlet_weight(rho: &ReducedDensityMatrix) -> Result<f64> {
    two_spin(rho)?;
    let (ud, du) = (2, 1);
    let m = &rho.matrix;
    Ok(0.5 * (m[(ud, ud)] - m[(ud, du)] - m[(du, ud)] + m[(du, du)]).re)
}

/// One row of the metric time series.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub t: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub delta: Option<f64>,
    pub b: Option<f64>,
    pub s_quad: f64,
    pub echo: Option<f64>,
    pub e_s: f64,
    /// Populations in the level-diagonalizing frame.
    pub rho_diag: Vec<f64>,
    pub correlators: Option<Correlators>,
    pub concurrence: Option<f64>,
}

impl MetricSample {
    /// All metrics from the up/down reduced density matrix. `reference` is the
    /// uncoupled system trajectory used for the echo; two-spin extras are
    /// computed when `two_spin_extras` is set.
    pub fn compute(
        t: f64,
        rho: &ReducedDensityMatrix,
        basis: &EigenBasis,
        reference: Option<&ReducedDensityMatrix>,
        floor: f64,
        two_spin_extras: bool,
    ) -> Result<Self> {
        let rho_e = to_energy_basis(rho, basis)?;
        let pops = populations(&rho_e, basis)?;
        let b = beta_of(&pops, basis, floor);
        let (correlators, concurrence) = if two_spin_extras {
            (Some(two_spin_correlators(rho)?), Some(concurrence(rho)?))
        } else {
            (None, None)
        };
        Ok(Self {
            t,
            sigma: sigma(&rho_e, basis)?,
            gamma: gamma_of(&pops, basis),
            delta: b.map(|b| delta_of(&pops, basis, b)),
            b,
            s_quad: quadratic_entropy(rho),
            echo: reference.map(|r0| loschmidt_echo(rho, r0)).transpose()?,
            e_s: system_energy(&rho_e, basis)?,
            rho_diag: pops,
            correlators,
            concurrence,
        })
    }
}
