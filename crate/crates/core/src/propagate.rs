//! Time evolution `ψ(t + τ) = exp(-iHτ) ψ(t)`.
//!
//! [`ChebyshevPropagator`] is the production path: `H` is rescaled onto
//! `[-1, 1]` and the exponential is expanded in Chebyshev polynomials with
//! Bessel-function coefficients. [`ExactPropagator`] diagonalizes `H` densely
//! and serves as the reference on small instances.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{dense_hamiltonian, SpinOperator, StateVector};
use crate::linalg;
use crate::model::HamiltonianSpec;
use crate::par;

pub const DEFAULT_TAU: f64 = PI / 10.0;
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-14;
pub const BOUNDS_MARGIN: f64 = 1.05;
/// Largest register the dense reference propagator accepts.
pub const EXACT_MAX_SPINS: usize = 12;

/// Half-width used when the Hamiltonian has (numerically) no spread.
const GUARD_HALF_WIDTH: f64 = 1e-3;
/// A per-step norm change beyond this means the bounds did not enclose the
/// spectrum (outside `[-1, 1]` the truncated series is no longer unitary).
const NORM_DRIFT_LIMIT: f64 = 1e-8;
const LANCZOS_BOUND_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub e_min: f64,
    pub e_max: f64,
    pub margin: f64,
}

impl SpectralBounds {
    /// Encloses `[lo, hi]`, widened by `margin` about its center.
    pub fn enclosing(lo: f64, hi: f64, margin: f64) -> Self {
        let center = 0.5 * (lo + hi);
        let half = (0.5 * (hi - lo)).max(GUARD_HALF_WIDTH) * margin;
        Self {
            e_min: center - half,
            e_max: center + half,
            margin,
        }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.e_max + self.e_min)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.e_max - self.e_min)
    }

    pub fn contains(&self, e: f64) -> bool {
        self.e_min <= e && e <= self.e_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundsMethod {
    #[default]
    Gershgorin,
    /// Gershgorin, tightened by extremal Lanczos Ritz values.
    Lanczos,
}

/// Gershgorin bounds of the full Hamiltonian.
pub fn spectral_bounds(spec: &HamiltonianSpec) -> Result<SpectralBounds> {
    let op = SpinOperator::from_spec(spec)?;
    let (lo, hi) = op.gershgorin();
    Ok(SpectralBounds::enclosing(lo, hi, BOUNDS_MARGIN))
}

/// Bounds of `op` by the requested method. The Lanczos start vector is drawn
/// from `rng`.
pub fn operator_bounds<R: Rng + ?Sized>(
    op: &SpinOperator,
    method: BoundsMethod,
    rng: &mut R,
) -> Result<SpectralBounds> {
    let (g_lo, g_hi) = op.gershgorin();
    if method == BoundsMethod::Gershgorin || op.is_zero() {
        return Ok(SpectralBounds::enclosing(g_lo, g_hi, BOUNDS_MARGIN));
    }
    let start: Vec<f64> = (0..op.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let (l_lo, l_hi) = linalg::extremal_ritz_bounds(op, &start, LANCZOS_BOUND_STEPS)?;
    Ok(SpectralBounds::enclosing(
        l_lo.max(g_lo),
        l_hi.min(g_hi),
        BOUNDS_MARGIN,
    ))
}

/// `J_0(x) ..= J_{n-1}(x)` for `x ≥ 0` by Miller's downward recurrence,
/// normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    assert!(
        x >= 0.0 && x.is_finite(),
        "bessel argument must be finite and non-negative"
    );
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = n.max(x.ceil() as usize + 1);
    let mut m = top + (160.0 * top as f64).sqrt() as usize + 20;
    m += m % 2;
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for k in (0..=m).rev() {
        // cur = J_k (unnormalized), next = J_{k+1}
        if k < n {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Expansion of `exp(-iHτ)` for a fixed step and spectral enclosure.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorPlan {
    pub tau: f64,
    pub bounds: SpectralBounds,
    pub truncation_tol: f64,
    /// `c_k = (2 - δ_k0) (-i)^k J_k(aτ)`, already truncated.
    pub coefficients: Vec<Complex64>,
    /// `exp(-i b̄ τ)` from shifting the spectrum to center on zero.
    pub phase: Complex64,
}

impl PropagatorPlan {
    pub fn new(tau: f64, bounds: SpectralBounds, truncation_tol: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "time step must be finite and >= 0, got {tau}"
            )));
        }
        if !(truncation_tol > 0.0) {
            return Err(Error::InvalidInput(
                "truncation tolerance must be positive".into(),
            ));
        }
        if !(bounds.e_min < bounds.e_max) {
            return Err(Error::InvalidInput(format!(
                "empty spectral interval [{}, {}]",
                bounds.e_min, bounds.e_max
            )));
        }
        let x = bounds.half_width() * tau;
        let mut len = (1.5 * x) as usize + 64;
        let order = loop {
            let j = bessel_j_sequence(x, len);
            let cut = (x.floor() as usize + 1..len - 1)
                .find(|&k| j[k].abs() < truncation_tol && j[k + 1].abs() < truncation_tol);
            if let Some(k) = cut {
                break k;
            }
            len *= 2;
        };
        let j = bessel_j_sequence(x, order);
        let minus_i_pow = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ];
        let coefficients = j
            .iter()
            .enumerate()
            .map(|(k, &jk)| minus_i_pow[k % 4] * if k == 0 { jk } else { 2.0 * jk })
            .collect();
        let phase = Complex64::from_polar(1.0, -bounds.center() * tau);
        Ok(Self {
            tau,
            bounds,
            truncation_tol,
            coefficients,
            phase,
        })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }
}

/// Reusable Chebyshev stepper owning its operator and work vectors.
#[derive(Debug, Clone)]
pub struct ChebyshevPropagator {
    op: SpinOperator,
    plan: PropagatorPlan,
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
    acc: Vec<Complex64>,
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    par::chunked_sum(v.len(), 0.0, |r| v[r].iter().map(|z| z.norm_sqr()).sum())
}

impl ChebyshevPropagator {
    pub fn new(op: SpinOperator, plan: PropagatorPlan) -> Self {
        let dim = op.dim();
        let zero = Complex64::default();
        Self {
            op,
            plan,
            prev: vec![zero; dim],
            cur: vec![zero; dim],
            acc: vec![zero; dim],
        }
    }

    /// Propagator for the full Hamiltonian of `spec` with Gershgorin bounds.
    pub fn for_spec(spec: &HamiltonianSpec, tau: f64, truncation_tol: f64) -> Result<Self> {
        let op = SpinOperator::from_spec(spec)?;
        let (lo, hi) = op.gershgorin();
        let plan = PropagatorPlan::new(
            tau,
            SpectralBounds::enclosing(lo, hi, BOUNDS_MARGIN),
            truncation_tol,
        )?;
        Ok(Self::new(op, plan))
    }

    pub fn plan(&self) -> &PropagatorPlan {
        &self.plan
    }

    pub fn operator(&self) -> &SpinOperator {
        &self.op
    }

    /// Advances `psi` by one step `τ` in place.
    pub fn step(&mut self, psi: &mut StateVector) -> Result<()> {
        let dim = self.op.dim();
        if psi.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: psi.dim(),
            });
        }
        let c = &self.plan.coefficients;
        let a = self.plan.bounds.half_width();
        let shift = self.plan.bounds.center();
        let before = norm_sqr(psi.amplitudes());

        // T_0 ψ and T_1 ψ = (H - b̄)/a ψ
        self.prev.copy_from_slice(psi.amplitudes());
        let zero = Complex64::default();
        self.cur.iter_mut().for_each(|v| *v = zero);
        self.op
            .recurrence(&self.prev, &mut self.cur, 1.0 / a, shift)?;
        let (c0, c1) = (c[0], c.get(1).copied().unwrap_or(zero));
        {
            let (prev, cur) = (&self.prev, &self.cur);
            par::for_each_chunk_mut(&mut self.acc, |offset, chunk| {
                for (k, out) in chunk.iter_mut().enumerate() {
                    *out = c0 * prev[offset + k] + c1 * cur[offset + k];
                }
            });
        }
        for &ck in c.iter().skip(2) {
            // prev <- 2 H̃ cur - prev holds T_k ψ, then becomes the newest term
            self.op.recurrence_accumulate(
                &self.cur,
                &mut self.prev,
                2.0 / a,
                shift,
                ck,
                &mut self.acc,
            )?;
            std::mem::swap(&mut self.prev, &mut self.cur);
        }
        let phase = self.plan.phase;
        let out = psi.amplitudes_mut();
        par::for_each_chunk_mut(out, |offset, chunk| {
            for (o, v) in chunk.iter_mut().zip(&self.acc[offset..]) {
                *o = phase * v;
            }
        });
        let after = norm_sqr(psi.amplitudes());
        let ratio = (after / before).sqrt();
        if !((ratio - 1.0).abs() <= NORM_DRIFT_LIMIT) {
            return Err(Error::SpectralBounds {
                norm: ratio,
                e_min: self.plan.bounds.e_min,
                e_max: self.plan.bounds.e_max,
            });
        }
        Ok(())
    }

    pub fn evolve(&mut self, psi: &mut StateVector, n_steps: usize) -> Result<()> {
        for _ in 0..n_steps {
            self.step(psi)?;
        }
        Ok(())
    }
}

/// One Chebyshev step of the full Hamiltonian of `spec`.
pub fn chebyshev_step(
    spec: &HamiltonianSpec,
    plan: &PropagatorPlan,
    psi: &StateVector,
) -> Result<StateVector> {
    let mut prop = ChebyshevPropagator::new(SpinOperator::from_spec(spec)?, plan.clone());
    let mut out = psi.clone();
    prop.step(&mut out)?;
    Ok(out)
}

/// Dense eigendecomposition of the full Hamiltonian, reusable for any `t`.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    n_spins: usize,
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl ExactPropagator {
    pub fn new(spec: &HamiltonianSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_total();
        if n > EXACT_MAX_SPINS {
            return Err(Error::Budget(format!(
                "dense propagation supports at most {EXACT_MAX_SPINS} spins, got {n}"
            )));
        }
        let h = dense_hamiltonian(n, spec.terms());
        let (energies, vectors) = linalg::dense_symmetric_eigen(h);
        Ok(Self {
            n_spins: n,
            energies,
            vectors,
        })
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// `V exp(-iΛt) Vᵀ ψ`.
    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        if psi.n_spins() != self.n_spins {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.n_spins,
                actual: psi.dim(),
            });
        }
        let v = &self.vectors;
        let x = psi.amplitudes();
        let d = x.len();
        let mut coeffs = vec![Complex64::default(); d];
        for (k, ck) in coeffs.iter_mut().enumerate() {
            let col = v.column(k);
            let s: Complex64 = col.iter().zip(x).map(|(a, b)| b * *a).sum();
            *ck = s * Complex64::from_polar(1.0, -self.energies[k] * t);
        }
        let mut out = vec![Complex64::default(); d];
        for (k, ck) in coeffs.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(v.column(k).iter()) {
                *o += ck * *a;
            }
        }
        StateVector::from_amplitudes(self.n_spins, out)
    }
}

/// Reference `exp(-iHt) ψ` by dense diagonalization.
pub fn propagate_exact(spec: &HamiltonianSpec, psi: &StateVector, t: f64) -> Result<StateVector> {
    ExactPropagator::new(spec)?.evolve(psi, t)
}
