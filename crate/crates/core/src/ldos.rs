//! Local density of states of an initial state from its survival amplitude.
//!
//! With `a(t) = ⟨Ψ₀|exp(-iHt)|Ψ₀⟩ = Σ_k p_k exp(-iE_k t)` the windowed
//! transform
//!
//! `D(E) = (τ/2π) [1 + 2 Σ_{m≥1} Re(exp(iE t_m) a(t_m)) exp(-w² t_m² / 2)]`
//!
//! replaces every `δ(E - E_k)` by a normalized Gaussian of width `w`.
//! Negative times follow from `a(-t) = a(t)*`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{SpinOperator, StateVector};
use crate::model::HamiltonianSpec;
use crate::propagate::{
    ChebyshevPropagator, PropagatorPlan, SpectralBounds, DEFAULT_TRUNCATION_TOL,
};

/// Window width as a fraction of the spectral range.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.01;
/// Gaussian tails kept on either side of the spectrum, in window widths.
const TAIL_WIDTHS: f64 = 8.0;

/// Time and energy discretization for one LDOS evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LdosSampling {
    pub window_width: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub grid: Vec<f64>,
}

impl LdosSampling {
    /// Window of `fraction` times the range, `t_max = 6/w`, a step that
    /// resolves the range plus tails without aliasing, and a grid of spacing
    /// `w/4` covering the range plus tails.
    pub fn for_bounds(bounds: &SpectralBounds, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "window fraction {fraction} outside (0, 1]"
            )));
        }
        let range = bounds.e_max - bounds.e_min;
        let w = fraction * range;
        let t_max = 6.0 / w;
        let tau_max = 2.0 * PI / (range + 2.0 * TAIL_WIDTHS * w);
        let n_steps = (t_max / (0.9 * tau_max)).ceil() as usize;
        let tau = t_max / n_steps as f64;
        let lo = bounds.e_min - TAIL_WIDTHS * w;
        let hi = bounds.e_max + TAIL_WIDTHS * w;
        let n_grid = ((hi - lo) / (0.25 * w)).ceil() as usize + 1;
        let de = (hi - lo) / (n_grid - 1) as f64;
        let grid = (0..n_grid).map(|k| lo + k as f64 * de).collect();
        Ok(Self {
            window_width: w,
            tau,
            n_steps,
            grid,
        })
    }
}

/// `a(t_m)` for `m = 0..=n_steps`, stepping with `prop`.
pub fn survival_series(
    prop: &mut ChebyshevPropagator,
    psi0: &StateVector,
    n_steps: usize,
) -> Result<Vec<Complex64>> {
    let mut psi = psi0.clone();
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(psi0.inner(&psi)?);
    for _ in 0..n_steps {
        prop.step(&mut psi)?;
        out.push(psi0.inner(&psi)?);
    }
    Ok(out)
}

/// Survival amplitudes of `psi0` under the full Hamiltonian of `spec`.
pub fn survival_amplitudes(
    spec: &HamiltonianSpec,
    psi0: &StateVector,
    tau: f64,
    n_steps: usize,
    bounds: SpectralBounds,
) -> Result<Vec<Complex64>> {
    let plan = PropagatorPlan::new(tau, bounds, DEFAULT_TRUNCATION_TOL)?;
    let mut prop = ChebyshevPropagator::new(SpinOperator::from_spec(spec)?, plan);
    survival_series(&mut prop, psi0, n_steps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdosSpectrum {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
    pub window_width: f64,
    pub t_max: f64,
    pub tau: f64,
}

impl LdosSpectrum {
    fn spacing(&self) -> f64 {
        if self.energies.len() < 2 {
            return 0.0;
        }
        (self.energies[self.energies.len() - 1] - self.energies[0])
            / (self.energies.len() - 1) as f64
    }

    fn moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        let de = self.spacing();
        self.energies
            .iter()
            .zip(&self.weights)
            .map(|(&e, &w)| f(e) * w)
            .sum::<f64>()
            * de
    }

    /// `Σ D(E) ΔE`.
    pub fn normalization(&self) -> f64 {
        self.moment(|_| 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.moment(|e| e) / self.normalization()
    }

    pub fn second_moment(&self) -> f64 {
        self.moment(|e| e * e) / self.normalization()
    }

    pub fn variance(&self) -> f64 {
        self.second_moment() - self.mean().powi(2)
    }
}

/// Windowed transform of uniformly sampled survival amplitudes onto `grid`.
/// When `bounds` is given the grid must cover it.
pub fn ldos_spectrum(
    amplitudes: &[Complex64],
    tau: f64,
    window_width: f64,
    grid: &[f64],
    bounds: Option<&SpectralBounds>,
) -> Result<LdosSpectrum> {
    if amplitudes.is_empty() || !(tau > 0.0) || !(window_width > 0.0) {
        return Err(Error::InvalidInput(
            "LDOS needs samples, τ > 0 and a positive window".into(),
        ));
    }
    if grid.len() < 2 || grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidInput(
            "LDOS grid must be increasing with at least two points".into(),
        ));
    }
    if let Some(b) = bounds {
        if grid[0] > b.e_min || grid[grid.len() - 1] < b.e_max {
            return Err(Error::InvalidInput(format!(
                "energy grid [{}, {}] does not cover the spectral bounds [{}, {}]",
                grid[0],
                grid[grid.len() - 1],
                b.e_min,
                b.e_max
            )));
        }
    }
    let damp: Vec<f64> = (0..amplitudes.len())
        .map(|m| {
            let t = m as f64 * tau;
            (-0.5 * window_width * window_width * t * t).exp()
        })
        .collect();
    let weights = grid
        .iter()
        .map(|&e| {
            let mut s = amplitudes[0].re;
            for (m, (a, d)) in amplitudes.iter().zip(&damp).enumerate().skip(1) {
                s += 2.0 * (Complex64::from_polar(1.0, e * m as f64 * tau) * a).re * d;
            }
            tau / (2.0 * PI) * s
        })
        .collect();
    Ok(LdosSpectrum {
        energies: grid.to_vec(),
        weights,
        window_width,
        t_max: (amplitudes.len() - 1) as f64 * tau,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(levels: &[(f64, f64)], tau: f64, n: usize) -> Vec<Complex64> {
        (0..=n)
            .map(|m| {
                levels
                    .iter()
                    .map(|&(p, e)| Complex64::from_polar(p, -e * m as f64 * tau))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn single_level_is_one_gaussian() {
        let bounds = SpectralBounds {
            e_min: -2.0,
            e_max: 2.0,
            margin: 1.0,
        };
        let s = LdosSampling::for_bounds(&bounds, DEFAULT_WINDOW_FRACTION).unwrap();
        let a = synthetic(&[(1.0, 0.7)], s.tau, s.n_steps);
        let spec = ldos_spectrum(&a, s.tau, s.window_width, &s.grid, Some(&bounds)).unwrap();
        assert!((spec.normalization() - 1.0).abs() < 1e-3);
        assert!((spec.mean() - 0.7).abs() < 1e-6);
        assert!((spec.variance() - s.window_width.powi(2)).abs() < 1e-6);
        let peak = spec.energies[spec
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0];
        assert!((peak - 0.7).abs() <= 0.25 * s.window_width + 1e-12);
    }

    #[test]
    fn two_levels_split_weight() {
        let bounds = SpectralBounds {
            e_min: -1.0,
            e_max: 1.0,
            margin: 1.0,
        };
        let s = LdosSampling::for_bounds(&bounds, DEFAULT_WINDOW_FRACTION).unwrap();
        let a = synthetic(&[(0.5, -0.5), (0.5, 0.5)], s.tau, s.n_steps);
        let spec = ldos_spectrum(&a, s.tau, s.window_width, &s.grid, Some(&bounds)).unwrap();
        let de = spec.spacing();
        let left: f64 = spec
            .energies
            .iter()
            .zip(&spec.weights)
            .filter(|(e, _)| **e < 0.0)
            .map(|(_, w)| w * de)
            .sum();
        assert!((left - 0.5).abs() < 1e-3);
    }

    #[test]
    fn grid_must_cover_bounds() {
        let bounds = SpectralBounds {
            e_min: -1.0,
            e_max: 1.0,
            margin: 1.0,
        };
        let a = vec![Complex64::new(1.0, 0.0); 4];
        let grid = [-0.5, 0.0, 0.5];
        assert!(ldos_spectrum(&a, 0.1, 0.05, &grid, Some(&bounds)).is_err());
    }
}
