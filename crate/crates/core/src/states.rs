//! Named initial states for the system and environment registers.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{SpinOperator, StateVector};
use crate::linalg::{self, LanczosOptions};

pub const DEFAULT_NEAR_UD_EPSILON: f64 = 0.2;
pub const DEFAULT_NEAR_GROUND_EPSILON: f64 = 0.05;
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateKind {
    #[serde(rename = "GROUND")]
    Ground,
    #[serde(rename = "NEAR_GROUND")]
    NearGround,
    #[serde(rename = "UU")]
    Uu,
    #[serde(rename = "UD")]
    Ud,
    #[serde(rename = "NEAR_UD")]
    NearUd,
    #[serde(rename = "RR")]
    Rr,
    #[serde(rename = "RANDOM")]
    Random,
}

impl StateKind {
    pub const ALL: [StateKind; 7] = [
        StateKind::Ground,
        StateKind::NearGround,
        StateKind::Uu,
        StateKind::Ud,
        StateKind::NearUd,
        StateKind::Rr,
        StateKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StateKind::Ground => "GROUND",
            StateKind::NearGround => "NEAR_GROUND",
            StateKind::Uu => "UU",
            StateKind::Ud => "UD",
            StateKind::NearUd => "NEAR_UD",
            StateKind::Rr => "RR",
            StateKind::Random => "RANDOM",
        }
    }

    pub fn needs_hamiltonian(self) -> bool {
        matches!(self, StateKind::Ground | StateKind::NearGround)
    }

    pub fn default_epsilon(self) -> Option<f64> {
        match self {
            StateKind::NearUd => Some(DEFAULT_NEAR_UD_EPSILON),
            StateKind::NearGround => Some(DEFAULT_NEAR_GROUND_EPSILON),
            _ => None,
        }
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StateKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown initial state `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    System,
    Environment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateLabel {
    pub kind: StateKind,
    pub target: Target,
    /// Perturbation strength for the `NEAR_*` kinds, in `(0, 1)`.
    pub epsilon: Option<f64>,
}

impl StateLabel {
    pub fn new(kind: StateKind, target: Target) -> Self {
        Self {
            kind,
            target,
            epsilon: kind.default_epsilon(),
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    fn epsilon(&self) -> Result<f64> {
        let eps = self.epsilon.or(self.kind.default_epsilon()).unwrap_or(0.0);
        if self.kind.default_epsilon().is_some() && !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidInput(format!(
                "{} needs epsilon in (0, 1), got {eps}",
                self.kind
            )));
        }
        Ok(eps)
    }
}

fn single_spin(theta: f64, phi: f64) -> [Complex64; 2] {
    [
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    ]
}

/// Product of single-spin states; `spins[k]` is `(up, down)` amplitude of spin `k`.
fn product_of_spins(spins: &[[Complex64; 2]]) -> StateVector {
    let n = spins.len();
    let amps = (0..1usize << n)
        .map(|idx| {
            spins
                .iter()
                .enumerate()
                .map(|(k, s)| s[(idx >> k) & 1])
                .product()
        })
        .collect();
    StateVector::from_amplitudes(n, amps).expect("dimension matches by construction")
}

fn alternating_index(n: usize) -> usize {
    (0..n).filter(|k| k % 2 == 1).map(|k| 1 << k).sum()
}

fn gaussian_start<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Builds the labelled state on an `n_spins` register. `hamiltonian` is the
/// sub-Hamiltonian the GROUND kinds refer to.
pub fn make_state<R: Rng + ?Sized>(
    label: &StateLabel,
    n_spins: usize,
    hamiltonian: Option<&SpinOperator>,
    rng: &mut R,
) -> Result<StateVector> {
    let eps = label.epsilon()?;
    match label.kind {
        StateKind::Uu => Ok(StateVector::basis(n_spins, 0)),
        StateKind::Ud => Ok(StateVector::basis(n_spins, alternating_index(n_spins))),
        StateKind::NearUd => {
            if n_spins == 0 {
                return Ok(StateVector::basis(0, 0));
            }
            // spin 0 tilted about y so that ⟨S^z_0 S^z_1⟩ = -(1 - ε)/4
            let theta = (1.0 - eps).acos();
            let mut spins: Vec<[Complex64; 2]> = (0..n_spins)
                .map(|k| {
                    if k % 2 == 0 {
                        single_spin(0.0, 0.0)
                    } else {
                        single_spin(PI, 0.0)
                    }
                })
                .collect();
            spins[0] = single_spin(theta, 0.0);
            Ok(product_of_spins(&spins))
        }
        StateKind::Rr => {
            let spins: Vec<[Complex64; 2]> = (0..n_spins)
                .map(|_| {
                    let cos_theta: f64 = rng.random_range(-1.0..=1.0);
                    let phi: f64 = rng.random_range(0.0..2.0 * PI);
                    single_spin(cos_theta.acos(), phi)
                })
                .collect();
            Ok(product_of_spins(&spins))
        }
        StateKind::Random => Ok(StateVector::random(n_spins, rng)),
        StateKind::Ground | StateKind::NearGround => {
            let op = hamiltonian.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{} needs a Hamiltonian for its register",
                    label.kind
                ))
            })?;
            if op.n_spins() != n_spins {
                return Err(Error::DimensionMismatch {
                    expected: 1 << n_spins,
                    actual: op.dim(),
                });
            }
            let dim = op.dim();
            let low = linalg::low_spectrum(
                op,
                || gaussian_start(dim, rng),
                DEGENERACY_TOL,
                LanczosOptions::default(),
            )?;
            // random complex combination of the (possibly degenerate) ground level
            let weights: Vec<Complex64> = low
                .ground
                .iter()
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let mut amps = vec![Complex64::default(); dim];
            for (w, pair) in weights.iter().zip(&low.ground) {
                for (a, v) in amps.iter_mut().zip(&pair.vector) {
                    *a += w * v;
                }
            }
            let mut ground = StateVector::from_amplitudes(n_spins, amps)?;
            ground.normalize();
            if label.kind == StateKind::Ground {
                return Ok(ground);
            }
            let excited = low.excited.ok_or_else(|| {
                Error::InvalidInput("NEAR_GROUND needs a level above the ground level".into())
            })?;
            let (a, b) = ((1.0 - eps).sqrt(), eps.sqrt());
            let amps = ground
                .amplitudes()
                .iter()
                .zip(&excited.vector)
                .map(|(g, e)| g * a + b * e)
                .collect();
            let mut out = StateVector::from_amplitudes(n_spins, amps)?;
            out.normalize();
            Ok(out)
        }
    }
}

/// `c(i, p) = c_S(i) c_E(p)` over the joint register.
pub fn product_state(system: &StateVector, environment: &StateVector) -> StateVector {
    StateVector::product(system, environment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{dot_product_terms, expectation, partial_trace_env};
    use crate::model::{Axis, Term};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sz_sz(i: usize, j: usize) -> Vec<Term> {
        // +S^z_i S^z_j
        vec![Term {
            i,
            j,
            axis: Axis::Z,
            coupling: -1.0,
        }]
    }

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(11)
    }

    #[test]
    fn ud_two_spins() {
        let s = make_state(
            &StateLabel::new(StateKind::Ud, Target::System),
            2,
            None,
            &mut rng(),
        )
        .unwrap();
        assert_eq!(s, StateVector::basis(2, 0b10));
        assert!((expectation(&sz_sz(0, 1), &s).unwrap() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn uu_has_full_magnetization() {
        let s = make_state(
            &StateLabel::new(StateKind::Uu, Target::System),
            4,
            None,
            &mut rng(),
        )
        .unwrap();
        let m: f64 = (0..4)
            .map(|k| {
                expectation(
                    &[Term {
                        i: k,
                        j: (k + 1) % 4,
                        axis: Axis::Z,
                        coupling: -1.0,
                    }],
                    &s,
                )
                .unwrap()
            })
            .sum();
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        // all pairs aligned and up
        assert!((m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn near_ud_correlation() {
        let s = make_state(
            &StateLabel::new(StateKind::NearUd, Target::System),
            4,
            None,
            &mut rng(),
        )
        .unwrap();
        assert!((expectation(&sz_sz(0, 1), &s).unwrap() + 0.2).abs() < 1e-14);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ground_of_antiferro_pair_is_singlet() {
        // H = -J S1·S2 with J = -1, i.e. +S1·S2
        let terms = dot_product_terms(0, 1);
        let op = SpinOperator::from_terms(2, &terms).unwrap();
        let s = make_state(
            &StateLabel::new(StateKind::Ground, Target::System),
            2,
            Some(&op),
            &mut rng(),
        )
        .unwrap();
        assert!((expectation(&terms, &s).unwrap() + 0.75).abs() < 1e-10);
    }

    #[test]
    fn near_ground_mixes_first_excited() {
        let terms = dot_product_terms(0, 1);
        let op = SpinOperator::from_terms(2, &terms).unwrap();
        let s = make_state(
            &StateLabel::new(StateKind::NearGround, Target::System),
            2,
            Some(&op),
            &mut rng(),
        )
        .unwrap();
        // 0.95 * (-3/4) + 0.05 * (1/4)
        assert!((op.expectation(&s).unwrap() - (-0.75 * 0.95 + 0.25 * 0.05)).abs() < 1e-9);
    }

    #[test]
    fn ground_requires_hamiltonian() {
        let r = make_state(
            &StateLabel::new(StateKind::Ground, Target::Environment),
            2,
            None,
            &mut rng(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn epsilon_out_of_range() {
        let label = StateLabel::new(StateKind::NearUd, Target::System).with_epsilon(1.5);
        assert!(make_state(&label, 2, None, &mut rng()).is_err());
    }

    #[test]
    fn rr_is_product_and_normalized() {
        let s = make_state(
            &StateLabel::new(StateKind::Rr, Target::Environment),
            5,
            None,
            &mut rng(),
        )
        .unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        let rho = partial_trace_env(&s, 2).unwrap();
        let purity = (&rho.matrix * &rho.matrix).trace().re;
        assert!((purity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_places_system_in_low_bits() {
        let sys = StateVector::basis(2, 0b10);
        let env = StateVector::basis(2, 0b00);
        let p = product_state(&sys, &env);
        assert_eq!(p.amplitudes()[0b0010], Complex64::new(1.0, 0.0));
        assert!((p.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn state_names_round_trip() {
        for k in StateKind::ALL {
            assert_eq!(k.name().parse::<StateKind>().unwrap(), k);
        }
    }
}
