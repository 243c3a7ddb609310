//! Exact Schrödinger dynamics of small spin-1/2 systems embedded in spin-bath
//! environments.
//!
//! The whole system (system spins plus bath spins) is kept as a pure state
//! over the full `2^N` tensor-product space and propagated with a Chebyshev
//! expansion of `exp(-iHt)`. Decoherence and thermalization are read off the
//! reduced density matrix of the system in the eigenbasis of `H_S`.
//!
//! Basis convention used everywhere: spin `k` is bit `k` of a basis index,
//! bit value 0 is spin-up (`S^z = +1/2`), 1 is spin-down. System spins occupy
//! the low bits `0..n_S`, environment spins the bits above them.

pub mod error;
pub mod fitting;
pub mod hilbert;
pub mod ldos;
pub mod linalg;
pub mod model;
pub mod observables;
mod par;
pub mod propagate;
pub mod rng;
pub mod states;

pub use error::{Error, Result};
pub use hilbert::{ReducedDensityMatrix, SpinOperator, StateVector};
pub use model::{Axis, CouplingFamily, FamilyKind, HamiltonianSpec, Term, Topology, TopologyKind};
pub use num_complex::Complex64;
pub use observables::{EigenBasis, MetricSample};
pub use propagate::{ChebyshevPropagator, PropagatorPlan, SpectralBounds};
pub use rng::{RngStreams, Stream};
pub use states::{StateKind, StateLabel};
