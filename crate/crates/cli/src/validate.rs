//! Oracle comparisons for small models.

use nalgebra::DMatrix;
use spinbath::hilbert::{dense_hamiltonian, partial_trace_env};
use spinbath::propagate::{ExactPropagator, PropagatorPlan, EXACT_MAX_SPINS};
use spinbath::{
    ChebyshevPropagator, Complex64, RngStreams, SpectralBounds, SpinOperator, StateVector, Stream,
    Term,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::run::prepare;

/// Deviations above this fail validation.
pub const VALIDATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub n_spins: usize,
    pub t: f64,
    /// `‖ψ_cheb(t) − ψ_exact(t)‖`.
    pub chebyshev_vs_exact: f64,
    /// Largest entry of `(H_kernel − H_dense) ψ`.
    pub matvec_vs_dense: f64,
    /// Largest entry difference of the reduced density matrix.
    pub partial_trace_vs_dense: f64,
    /// `max_v ‖[A, B] v‖` over random unit vectors.
    pub commutator_s_se: f64,
    pub commutator_s_e: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.chebyshev_vs_exact < VALIDATION_TOL
            && self.matvec_vs_dense < VALIDATION_TOL
            && self.partial_trace_vs_dense < VALIDATION_TOL
    }

    pub fn render(&self) -> String {
        let verdict = |x: f64| if x < VALIDATION_TOL { "ok" } else { "FAIL" };
        format!(
            "spins: {}\nt: {}\nchebyshev_vs_exact: {:e} {}\nmatvec_vs_dense: {:e} {}\npartial_trace_vs_dense: {:e} {}\n\
             commutator [H_S, H_SE]: {:e}\ncommutator [H_S, H_E]: {:e}\n",
            self.n_spins,
            self.t,
            self.chebyshev_vs_exact,
            verdict(self.chebyshev_vs_exact),
            self.matvec_vs_dense,
            verdict(self.matvec_vs_dense),
            self.partial_trace_vs_dense,
            verdict(self.partial_trace_vs_dense),
            self.commutator_s_se,
            self.commutator_s_e,
        )
    }
}

/// Reduced density matrix from the reshaped amplitude matrix `M_{p,i}`:
/// `ρ = Mᵀ M*`.
fn dense_partial_trace(psi: &StateVector, n_s: usize) -> DMatrix<Complex64> {
    let d = 1usize << n_s;
    let blocks = psi.dim() / d;
    let m = DMatrix::from_fn(blocks, d, |p, i| psi.amplitudes()[i + p * d]);
    m.transpose() * m.conjugate()
}

fn commutator_norm(
    n: usize,
    a: &[Term],
    b: &[Term],
    probes: &[StateVector],
) -> Result<f64, CliError> {
    let a = SpinOperator::from_terms(n, a)?;
    let b = SpinOperator::from_terms(n, b)?;
    let dim = 1usize << n;
    let zero = Complex64::default();
    let mut worst = 0.0f64;
    for v in probes {
        let (mut av, mut bv, mut abv, mut bav) = (
            vec![zero; dim],
            vec![zero; dim],
            vec![zero; dim],
            vec![zero; dim],
        );
        a.apply(v.amplitudes(), &mut av)?;
        b.apply(v.amplitudes(), &mut bv)?;
        a.apply(&bv, &mut abv)?;
        b.apply(&av, &mut bav)?;
        let n2: f64 = abv.iter().zip(&bav).map(|(x, y)| (x - y).norm_sqr()).sum();
        worst = worst.max(n2.sqrt());
    }
    Ok(worst)
}

/// Runs the oracle comparisons at `t = n_steps τ`. With `corrupt_bounds` the
/// Chebyshev plan gets an interval a hundredth of the bounded width, which the
/// propagator has to reject.
pub fn validate(
    cfg: &RunConfig,
    seed: u64,
    corrupt_bounds: bool,
) -> Result<ValidationReport, CliError> {
    let n = cfg.n_total();
    if n > EXACT_MAX_SPINS {
        return Err(CliError::Budget(format!(
            "validation supports at most {EXACT_MAX_SPINS} spins, got {n}"
        )));
    }
    let prepared = prepare(cfg, seed)?;
    let spec = &prepared.spec;
    let bounds = if corrupt_bounds {
        let b = prepared.bounds;
        let (c, h) = (b.center(), 0.01 * b.half_width());
        SpectralBounds {
            e_min: c - h,
            e_max: c + h,
            margin: 1.0,
        }
    } else {
        prepared.bounds
    };
    let plan = PropagatorPlan::new(cfg.run.tau, bounds, cfg.run.truncation_tol)?;
    let mut prop = ChebyshevPropagator::new(prepared.operator.clone(), plan);
    let mut psi = prepared.psi0.clone();
    prop.evolve(&mut psi, cfg.run.n_steps)?;
    let t = cfg.run.n_steps as f64 * cfg.run.tau;
    let exact = ExactPropagator::new(spec)?.evolve(&prepared.psi0, t)?;
    let chebyshev_vs_exact = psi
        .amplitudes()
        .iter()
        .zip(exact.amplitudes())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();

    let h = dense_hamiltonian(n, spec.terms()).map(|x| Complex64::new(x, 0.0));
    let probe = nalgebra::DVector::from_column_slice(psi.amplitudes());
    let dense_hv = &h * &probe;
    let mut kernel_hv = vec![Complex64::default(); psi.dim()];
    prepared.operator.apply(psi.amplitudes(), &mut kernel_hv)?;
    let matvec_vs_dense = kernel_hv
        .iter()
        .zip(dense_hv.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    let rho = partial_trace_env(&psi, spec.n_s)?;
    let oracle = dense_partial_trace(&psi, spec.n_s);
    let partial_trace_vs_dense = (&rho.matrix - oracle)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);

    let mut rng = RngStreams::new(seed).stream(Stream::Krylov);
    let probes: Vec<StateVector> = (0..3).map(|_| StateVector::random(n, &mut rng)).collect();
    Ok(ValidationReport {
        n_spins: n,
        t,
        chebyshev_vs_exact,
        matvec_vs_dense,
        partial_trace_vs_dense,
        commutator_s_se: commutator_norm(n, &spec.sys_terms, &spec.int_terms, &probes)?,
        commutator_s_e: commutator_norm(n, &spec.sys_terms, &spec.env_terms, &probes)?,
    })
}
