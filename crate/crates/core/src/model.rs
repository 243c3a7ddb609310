//! Spin topologies, coupling families and the three-part Hamiltonian
//! `H = H_S + H_E + H_SE`.
//!
//! Every term is stored as `(i, j, α, c)` and contributes `-c S^α_i S^α_j`
//! to `H`, with global spin indices (environment spin `j` lives at
//! `n_s + j`). A positive coupling is ferromagnetic.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::{RngStreams, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "x")]
    X,
    #[serde(rename = "y")]
    Y,
    #[serde(rename = "z")]
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    SquareLattice,
    TriangularLattice,
    SpinGlass,
    None,
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Self::Ring),
            "square_lattice" => Ok(Self::SquareLattice),
            "triangular_lattice" => Ok(Self::TriangularLattice),
            "spin_glass" => Ok(Self::SpinGlass),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidInput(format!("unknown topology `{other}`"))),
        }
    }
}

/// Bond graph of a set of spins, indices local to that set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub kind: TopologyKind,
    pub n: usize,
    /// Unordered pairs with `i < j`, no duplicates.
    pub edges: Vec<(usize, usize)>,
}

impl Topology {
    pub fn degree(&self, site: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(i, j)| i == site || j == site)
            .count()
    }
}

/// Periodic `rows × cols` shape for `n` sites, as close to square as possible.
fn lattice_shape(n: usize) -> Option<(usize, usize)> {
    (3..=n)
        .take_while(|r| r * r <= n)
        .filter(|r| n % r == 0 && n / r >= 3)
        .last()
        .map(|r| (r, n / r))
}

pub fn build_topology(kind: TopologyKind, n: usize) -> Result<Topology> {
    if n == 0 {
        return Err(Error::Shape("topology needs at least one spin".into()));
    }
    let mut edges = Vec::new();
    let mut push = |a: usize, b: usize| {
        let e = (a.min(b), a.max(b));
        if a != b && !edges.contains(&e) {
            edges.push(e);
        }
    };
    match kind {
        TopologyKind::None => {}
        TopologyKind::Ring => {
            for i in 0..n {
                push(i, (i + 1) % n);
            }
        }
        TopologyKind::SpinGlass => {
            for i in 0..n {
                for j in i + 1..n {
                    push(i, j);
                }
            }
        }
        TopologyKind::SquareLattice | TopologyKind::TriangularLattice => {
            let (rows, cols) = lattice_shape(n).ok_or_else(|| {
                Error::Shape(format!(
                    "{n} spins cannot form a periodic lattice with both sides >= 3"
                ))
            })?;
            let site = |r: usize, c: usize| (r % rows) * cols + (c % cols);
            for r in 0..rows {
                for c in 0..cols {
                    push(site(r, c), site(r, c + 1));
                    push(site(r, c), site(r + 1, c));
                    if kind == TopologyKind::TriangularLattice {
                        // rhombic cell: third bond along the (1, -1) diagonal
                        push(site(r, c), site(r + 1, c + cols - 1));
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    Ok(Topology { kind, n, edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    XY,
    Heisenberg,
    HeisenbergType,
    Ising,
    IsingType,
    IsingPM,
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "XY" => Ok(Self::XY),
            "Heisenberg" => Ok(Self::Heisenberg),
            "HeisenbergType" => Ok(Self::HeisenbergType),
            "Ising" => Ok(Self::Ising),
            "IsingType" => Ok(Self::IsingType),
            "IsingPM" => Ok(Self::IsingPM),
            other => Err(Error::InvalidInput(format!(
                "unknown coupling family `{other}`"
            ))),
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingFamily {
    pub kind: FamilyKind,
    pub scale: f64,
}

impl CouplingFamily {
    pub fn new(kind: FamilyKind, scale: f64) -> Self {
        Self { kind, scale }
    }

    /// True when the family consumes random numbers.
    pub fn is_random(&self) -> bool {
        matches!(
            self.kind,
            FamilyKind::HeisenbergType | FamilyKind::IsingType | FamilyKind::IsingPM
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub i: usize,
    pub j: usize,
    pub axis: Axis,
    pub coupling: f64,
}

/// Draws the coupling table of `family` over `edges`.
///
/// Edges are visited in order and, within an edge, axes in x, y, z order; the
/// random families draw one number per emitted term in that order.
pub fn sample_couplings<R: Rng + ?Sized>(
    family: CouplingFamily,
    edges: &[(usize, usize)],
    rng: &mut R,
) -> Result<Vec<Term>> {
    if !family.scale.is_finite() {
        return Err(Error::InvalidInput(format!(
            "coupling scale must be finite, got {}",
            family.scale
        )));
    }
    let s = family.scale;
    let a = s.abs();
    let mut terms = Vec::with_capacity(edges.len() * 3);
    for &(i, j) in edges {
        if i == j {
            return Err(Error::InvalidInput(format!("self-bond on spin {i}")));
        }
        let mut push = |axis, coupling| {
            terms.push(Term {
                i,
                j,
                axis,
                coupling,
            })
        };
        match family.kind {
            FamilyKind::XY => {
                push(Axis::X, s);
                push(Axis::Y, s);
            }
            FamilyKind::Heisenberg => {
                for axis in Axis::ALL {
                    push(axis, s);
                }
            }
            FamilyKind::HeisenbergType => {
                for axis in Axis::ALL {
                    push(axis, uniform_symmetric(rng, a));
                }
            }
            FamilyKind::Ising => push(Axis::Z, s),
            FamilyKind::IsingType => push(Axis::Z, uniform_symmetric(rng, a)),
            FamilyKind::IsingPM => {
                let c = if rng.random::<bool>() { a } else { -a };
                push(Axis::Z, c);
            }
        }
    }
    Ok(terms)
}

fn uniform_symmetric<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.random_range(-half_width..=half_width)
    }
}

/// Complete coupling tables of `H = H_S + H_E + H_SE` in global indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub n_s: usize,
    pub n_env: usize,
    #[serde(default)]
    pub sys_terms: Vec<Term>,
    #[serde(default)]
    pub env_terms: Vec<Term>,
    #[serde(default)]
    pub int_terms: Vec<Term>,
}

impl HamiltonianSpec {
    pub fn n_total(&self) -> usize {
        self.n_s + self.n_env
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_total()
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.sys_terms
            .iter()
            .chain(&self.env_terms)
            .chain(&self.int_terms)
    }

    /// The same model with `H_SE` removed.
    pub fn without_interaction(&self) -> Self {
        Self {
            int_terms: Vec::new(),
            ..self.clone()
        }
    }

    /// `H_S` alone, as a spec over the system register only.
    pub fn system_only(&self) -> Self {
        Self {
            n_s: self.n_s,
            n_env: 0,
            sys_terms: self.sys_terms.clone(),
            env_terms: Vec::new(),
            int_terms: Vec::new(),
        }
    }

    /// `H_E` alone, re-indexed onto the environment register.
    pub fn environment_only(&self) -> Self {
        let shift = |t: &Term| Term {
            i: t.i - self.n_s,
            j: t.j - self.n_s,
            ..*t
        };
        Self {
            n_s: self.n_env,
            n_env: 0,
            sys_terms: self.env_terms.iter().map(shift).collect(),
            env_terms: Vec::new(),
            int_terms: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_total();
        if n == 0 || n > 62 {
            return Err(Error::InvalidInput(format!("unsupported spin count {n}")));
        }
        let in_sys = |k: usize| k < self.n_s;
        let in_env = |k: usize| k >= self.n_s && k < n;
        let check = |terms: &[Term], ok: &dyn Fn(&Term) -> bool, what: &str| -> Result<()> {
            for t in terms {
                if !t.coupling.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite {what} coupling {t:?}"
                    )));
                }
                if t.i == t.j || !ok(t) {
                    return Err(Error::InvalidInput(format!("bad {what} indices in {t:?}")));
                }
            }
            Ok(())
        };
        check(&self.sys_terms, &|t| in_sys(t.i) && in_sys(t.j), "system")?;
        check(
            &self.env_terms,
            &|t| in_env(t.i) && in_env(t.j),
            "environment",
        )?;
        check(
            &self.int_terms,
            &|t| in_sys(t.i) && in_env(t.j),
            "interaction",
        )?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// One side (system or environment) of the model.
#[derive(Debug, Clone, Copy)]
pub struct Part {
    pub topology: TopologyKind,
    pub n: usize,
    pub family: CouplingFamily,
}

/// Builds the full coupling tables. Randomness is drawn from the
/// `Couplings*` streams of `streams`.
pub fn assemble(
    system: Part,
    environment: Part,
    interaction: CouplingFamily,
    streams: &RngStreams,
) -> Result<HamiltonianSpec> {
    let n_s = system.n;
    let sys_topo = build_topology(system.topology, n_s)?;
    let sys_terms = sample_couplings(
        system.family,
        &sys_topo.edges,
        &mut streams.stream(Stream::CouplingsSystem),
    )?;

    let (env_terms, int_terms) = if environment.n == 0 {
        (Vec::new(), Vec::new())
    } else {
        let env_topo = build_topology(environment.topology, environment.n)?;
        let env_edges: Vec<_> = env_topo
            .edges
            .iter()
            .map(|&(i, j)| (i + n_s, j + n_s))
            .collect();
        let env_terms = sample_couplings(
            environment.family,
            &env_edges,
            &mut streams.stream(Stream::CouplingsEnvironment),
        )?;
        let int_edges: Vec<_> = (0..n_s)
            .flat_map(|i| (0..environment.n).map(move |j| (i, n_s + j)))
            .collect();
        let int_terms = sample_couplings(
            interaction,
            &int_edges,
            &mut streams.stream(Stream::CouplingsInteraction),
        )?;
        (env_terms, int_terms)
    };

    let spec = HamiltonianSpec {
        n_s,
        n_env: environment.n,
        sys_terms,
        env_terms,
        int_terms,
    };
    spec.validate()?;
    Ok(spec)
}
