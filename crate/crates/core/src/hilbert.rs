//! State vectors over the full tensor-product space, the matrix-free
//! Hamiltonian kernel and the partial trace over the environment.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::collections::HashMap;
use std::ops::{Add, AddAssign, Mul, Sub};

use crate::error::{Error, Result};
use crate::model::{Axis, HamiltonianSpec, Term};
use crate::par;

/// Scalar types the Hamiltonian kernel runs on. The Hamiltonian is real in the
/// up/down basis, so Lanczos can work on `f64` vectors while time evolution
/// uses complex amplitudes.
pub trait Amplitude:
    Copy
    + Default
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + AddAssign
    + Mul<f64, Output = Self>
{
}

impl Amplitude for f64 {}
impl Amplitude for Complex64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_spins: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn basis(n_spins: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_spins];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { n_spins, amps }
    }

    pub fn from_amplitudes(n_spins: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n_spins {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_spins,
                actual: amps.len(),
            });
        }
        Ok(Self { n_spins, amps })
    }

    /// Haar-random state: i.i.d. complex Gaussian amplitudes, normalized.
    pub fn random<R: Rng + ?Sized>(n_spins: usize, rng: &mut R) -> Self {
        let amps = (0..1usize << n_spins)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut s = Self { n_spins, amps };
        s.normalize();
        s
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        let a = &self.amps;
        par::chunked_sum(a.len(), 0.0, |r| a[r].iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amps.iter_mut().for_each(|z| *z *= inv);
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let (a, b) = (&self.amps, &other.amps);
        Ok(par::chunked_sum(a.len(), Complex64::new(0.0, 0.0), |r| {
            a[r.clone()]
                .iter()
                .zip(&b[r])
                .map(|(x, y)| x.conj() * y)
                .sum()
        }))
    }

    /// `c(i, p) = c_S(i) c_E(p)`: system spins in the low bits.
    pub fn product(system: &StateVector, environment: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(system.dim() * environment.dim());
        for e in &environment.amps {
            amps.extend(system.amps.iter().map(|s| s * e));
        }
        StateVector {
            n_spins: system.n_spins + environment.n_spins,
            amps,
        }
    }
}

const KERNEL_BLOCK: usize = 1 << 10;

#[derive(Debug, Clone, Copy)]
struct FlipBond {
    mask: usize,
    si: u32,
    sj: u32,
    /// Matrix element for anti-aligned pairs (flip-flop channel).
    anti: f64,
    /// Matrix element for aligned pairs (double-flip channel, `c^x ≠ c^y`).
    aligned: f64,
}

impl FlipBond {
    #[inline(always)]
    fn coef(&self, k: usize) -> f64 {
        if ((k >> self.si) ^ (k >> self.sj)) & 1 == 0 {
            self.aligned
        } else {
            self.anti
        }
    }

    /// `acc[k] += coef(g) x[g ^ mask]` for `g = offset + k`. `acc` is a
    /// power-of-two block aligned to its length and `si < sj`.
    ///
    /// Within a run of `2^si` indices both bits are constant, so the partner
    /// indices are contiguous and the coefficient is fixed.
    #[inline]
    fn accumulate<T: Amplitude>(&self, x: &[T], offset: usize, acc: &mut [T]) {
        let len = acc.len();
        let run = 1usize << self.si;
        if run >= len {
            let c = self.coef(offset);
            let p = offset ^ self.mask;
            for (a, &xv) in acc.iter_mut().zip(&x[p..p + len]) {
                *a += xv * c;
            }
            return;
        }
        // regions with constant bit sj: fixed partner offset and coefficients
        let flip_j = 1usize << self.sj;
        let region = flip_j.min(len);
        for (r, out) in acc.chunks_exact_mut(region).enumerate() {
            let g = offset + r * region;
            // lower halves of the 2^(si+1) blocks have bit si = 0 and are
            // aligned iff bit sj = 0
            let (c_low, c_high) = if g & flip_j == 0 {
                (self.aligned, self.anti)
            } else {
                (self.anti, self.aligned)
            };
            let p = g ^ flip_j;
            let xr = &x[p..p + region];
            match run {
                1 => {
                    for (o, xp) in out.chunks_exact_mut(2).zip(xr.chunks_exact(2)) {
                        o[0] += xp[1] * c_low;
                        o[1] += xp[0] * c_high;
                    }
                }
                2 => {
                    for (o, xp) in out.chunks_exact_mut(4).zip(xr.chunks_exact(4)) {
                        o[0] += xp[2] * c_low;
                        o[1] += xp[3] * c_low;
                        o[2] += xp[0] * c_high;
                        o[3] += xp[1] * c_high;
                    }
                }
                _ => {
                    for (o, xp) in out.chunks_exact_mut(2 * run).zip(xr.chunks_exact(2 * run)) {
                        let (lo, hi) = o.split_at_mut(run);
                        for (a, &xv) in lo.iter_mut().zip(&xp[run..]) {
                            *a += xv * c_low;
                        }
                        for (a, &xv) in hi.iter_mut().zip(&xp[..run]) {
                            *a += xv * c_high;
                        }
                    }
                }
            }
        }
    }
}

/// Matrix-free form of `-Σ c S^α_i S^α_j` over `n_spins` spins.
///
/// `zz` terms are folded into a precomputed diagonal. For each bond the `xx`
/// and `yy` couplings combine into a single spin-flip of both bits with
/// element `-(c^x + c^y)/4` on anti-aligned pairs and `-(c^x - c^y)/4` on
/// aligned pairs.
#[derive(Debug, Clone)]
pub struct SpinOperator {
    n_spins: usize,
    diag: Vec<f64>,
    bonds: Vec<FlipBond>,
}

impl SpinOperator {
    pub fn from_terms<'a, I>(n_spins: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Term>,
    {
        let dim = 1usize << n_spins;
        let mut zz: Vec<(u32, u32, f64)> = Vec::new();
        // (i, j) -> (c^x, c^y), in order of first appearance
        let mut order: Vec<(usize, usize)> = Vec::new();
        let mut flips: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
        for t in terms {
            if t.i >= n_spins || t.j >= n_spins || t.i == t.j {
                return Err(Error::InvalidInput(format!(
                    "term {t:?} does not fit {n_spins} spins"
                )));
            }
            let key = (t.i.min(t.j), t.i.max(t.j));
            match t.axis {
                Axis::Z => zz.push((t.i as u32, t.j as u32, t.coupling)),
                Axis::X | Axis::Y => {
                    let e = flips.entry(key).or_insert_with(|| {
                        order.push(key);
                        (0.0, 0.0)
                    });
                    if t.axis == Axis::X {
                        e.0 += t.coupling;
                    } else {
                        e.1 += t.coupling;
                    }
                }
            }
        }
        let mut diag = vec![0.0; dim];
        par::for_each_chunk_mut(&mut diag, |offset, chunk| {
            for (k, d) in chunk.iter_mut().enumerate() {
                let g = offset + k;
                for &(i, j, c) in &zz {
                    let aligned = ((g >> i) ^ (g >> j)) & 1 == 0;
                    *d += if aligned { -0.25 * c } else { 0.25 * c };
                }
            }
        });
        let bonds = order
            .into_iter()
            .filter_map(|(i, j)| {
                let (cx, cy) = flips[&(i, j)];
                let anti = -0.25 * (cx + cy);
                let aligned = -0.25 * (cx - cy);
                (anti != 0.0 || aligned != 0.0).then_some(FlipBond {
                    mask: (1 << i) | (1 << j),
                    si: i as u32,
                    sj: j as u32,
                    anti,
                    aligned,
                })
            })
            .collect::<Vec<FlipBond>>();
        // bonds sharing the high bit read the same partner block back to back
        let mut bonds = bonds;
        bonds.sort_by_key(|b| (b.sj, b.si));
        Ok(Self {
            n_spins,
            diag,
            bonds,
        })
    }

    /// Full `H = H_S + H_E + H_SE`.
    pub fn from_spec(spec: &HamiltonianSpec) -> Result<Self> {
        spec.validate()?;
        Self::from_terms(spec.n_total(), spec.terms())
    }

    /// `H_S` on the system register alone.
    pub fn system(spec: &HamiltonianSpec) -> Result<Self> {
        Self::from_terms(spec.n_s, &spec.sys_terms)
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn is_zero(&self) -> bool {
        self.bonds.is_empty() && self.diag.iter().all(|&d| d == 0.0)
    }

    /// Accumulates `(diag - shift) x + offdiag x` for indices `offset..offset+acc.len()`.
    #[inline]
    fn accumulate<T: Amplitude>(&self, x: &[T], offset: usize, shift: f64, acc: &mut [T]) {
        let diag = &self.diag[offset..offset + acc.len()];
        for ((a, &d), &xv) in acc.iter_mut().zip(diag).zip(&x[offset..]) {
            *a = xv * (d - shift);
        }
        // sub-blocks small enough for the accumulator to stay in L1
        for (s, block) in acc.chunks_mut(KERNEL_BLOCK).enumerate() {
            let start = offset + s * KERNEL_BLOCK;
            for b in &self.bonds {
                b.accumulate(x, start, block);
            }
        }
    }

    /// `out = H x`.
    pub fn apply<T: Amplitude>(&self, x: &[T], out: &mut [T]) -> Result<()> {
        self.check_dim(x.len())?;
        self.check_dim(out.len())?;
        par::for_each_chunk_mut(out, |offset, chunk| self.accumulate(x, offset, 0.0, chunk));
        Ok(())
    }

    /// Chebyshev recurrence step on the rescaled operator:
    /// `prev <- alpha (H - shift) cur - prev`.
    pub fn recurrence<T: Amplitude>(
        &self,
        cur: &[T],
        prev: &mut [T],
        alpha: f64,
        shift: f64,
    ) -> Result<()> {
        self.check_dim(cur.len())?;
        self.check_dim(prev.len())?;
        par::for_each_chunk_mut(prev, |offset, chunk| {
            let mut acc = vec![T::default(); chunk.len()];
            self.accumulate(cur, offset, shift, &mut acc);
            for (p, a) in chunk.iter_mut().zip(acc) {
                *p = a * alpha - *p;
            }
        });
        Ok(())
    }

    /// Fused Chebyshev term: `prev <- alpha (H - shift) cur - prev`, then
    /// `acc += c · prev`.
    pub fn recurrence_accumulate(
        &self,
        cur: &[Complex64],
        prev: &mut [Complex64],
        alpha: f64,
        shift: f64,
        c: Complex64,
        acc: &mut [Complex64],
    ) -> Result<()> {
        self.check_dim(cur.len())?;
        self.check_dim(prev.len())?;
        self.check_dim(acc.len())?;
        par::for_each_chunk_mut2(prev, acc, |offset, chunk, acc_chunk| {
            let mut h = vec![Complex64::default(); chunk.len()];
            self.accumulate(cur, offset, shift, &mut h);
            for ((p, hv), a) in chunk.iter_mut().zip(h).zip(acc_chunk.iter_mut()) {
                *p = hv * alpha - *p;
                *a += c * *p;
            }
        });
        Ok(())
    }

    /// Gershgorin enclosure `(min_k (H_kk - R_k), max_k (H_kk + R_k))` of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let rows = par::map_ordered(self.dim().div_ceil(par::CHUNK), |c| {
            let lo = c * par::CHUNK;
            let hi = (lo + par::CHUNK).min(self.dim());
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for k in lo..hi {
                let r: f64 = self.bonds.iter().map(|b| b.coef(k).abs()).sum();
                min = min.min(self.diag[k] - r);
                max = max.max(self.diag[k] + r);
            }
            (min, max)
        });
        rows.into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| {
                (a.min(c), b.max(d))
            })
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }

    /// `⟨ψ|H|ψ⟩`, real for Hermitian `H`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        let mut h_psi = vec![Complex64::default(); psi.dim()];
        self.apply(psi.amplitudes(), &mut h_psi)?;
        let a = psi.amplitudes();
        let v = par::chunked_sum(a.len(), Complex64::default(), |r| {
            a[r.clone()]
                .iter()
                .zip(&h_psi[r])
                .map(|(x, y)| x.conj() * y)
                .sum()
        });
        debug_assert!(v.im.abs() <= 1e-12 * (1.0 + v.re.abs()) * (1.0 + psi.norm_sqr()));
        Ok(v.re)
    }
}

/// `φ = H ψ` for the full model.
pub fn apply_hamiltonian(spec: &HamiltonianSpec, psi: &StateVector) -> Result<StateVector> {
    if psi.n_spins() != spec.n_total() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            actual: psi.dim(),
        });
    }
    let op = SpinOperator::from_spec(spec)?;
    let mut out = vec![Complex64::default(); psi.dim()];
    op.apply(psi.amplitudes(), &mut out)?;
    StateVector::from_amplitudes(psi.n_spins(), out)
}

/// `⟨ψ| -Σ c S^α_i S^α_j |ψ⟩` for an arbitrary term list.
pub fn expectation(terms: &[Term], psi: &StateVector) -> Result<f64> {
    SpinOperator::from_terms(psi.n_spins(), terms)?.expectation(psi)
}

/// Terms whose operator is `+S_i · S_j` (note the sign of the stored coupling).
pub fn dot_product_terms(i: usize, j: usize) -> Vec<Term> {
    Axis::ALL
        .iter()
        .map(|&axis| Term {
            i,
            j,
            axis,
            coupling: -1.0,
        })
        .collect()
}

/// Single-spin operator `S^α` acting on a one-bit value; returns
/// `(coefficient, new bit)`.
fn spin_action(axis: Axis, bit: usize) -> (Complex64, usize) {
    match (axis, bit) {
        (Axis::X, b) => (Complex64::new(0.5, 0.0), b ^ 1),
        (Axis::Y, 0) => (Complex64::new(0.0, 0.5), 1),
        (Axis::Y, _) => (Complex64::new(0.0, -0.5), 0),
        (Axis::Z, 0) => (Complex64::new(0.5, 0.0), 0),
        (Axis::Z, _) => (Complex64::new(-0.5, 0.0), 1),
    }
}

/// Dense matrix of the product `Π S^α_k` over `factors` on `n_spins` spins,
/// built column by column from single-spin actions.
pub fn dense_spin_product(n_spins: usize, factors: &[(usize, Axis)]) -> DMatrix<Complex64> {
    let dim = 1usize << n_spins;
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut row = col;
        let mut coef = Complex64::new(1.0, 0.0);
        for &(site, axis) in factors.iter().rev() {
            let (c, nb) = spin_action(axis, (row >> site) & 1);
            coef *= c;
            row = (row & !(1 << site)) | (nb << site);
        }
        m[(row, col)] += coef;
    }
    m
}

/// Dense real matrix of `-Σ c S^α_i S^α_j`, assembled term by term from
/// single-spin actions (independent of the fused bond kernel).
pub fn dense_hamiltonian<'a, I>(n_spins: usize, terms: I) -> DMatrix<f64>
where
    I: IntoIterator<Item = &'a Term>,
{
    let dim = 1usize << n_spins;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for t in terms {
        for col in 0..dim {
            let (ci, bi) = spin_action(t.axis, (col >> t.i) & 1);
            let row = (col & !(1 << t.i)) | (bi << t.i);
            let (cj, bj) = spin_action(t.axis, (row >> t.j) & 1);
            let row = (row & !(1 << t.j)) | (bj << t.j);
            let v = -t.coupling * ci * cj;
            debug_assert!(v.im.abs() < 1e-15);
            h[(row, col)] += v.re;
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisTag {
    UpDown,
    Energy,
}

/// Density matrix of the system register, `ρ_ab = ⟨a|ρ|b⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensityMatrix {
    pub n_spins: usize,
    pub matrix: DMatrix<Complex64>,
    pub basis: BasisTag,
}

impl ReducedDensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        let matrix = DMatrix::from_fn(a.len(), a.len(), |r, c| a[r] * a[c].conj());
        Self {
            n_spins: psi.n_spins(),
            matrix,
            basis: BasisTag::UpDown,
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        (m - m.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `Tr(ρ A)`.
    pub fn expect(&self, op: &DMatrix<Complex64>) -> Complex64 {
        (&self.matrix * op).trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        crate::linalg::hermitian_eigenvalues(&self.matrix)
    }
}

/// `ρ_ab = Σ_p c(a, p) c*(b, p)` with the system in the low `n_s` bits.
pub fn partial_trace_env(psi: &StateVector, n_s: usize) -> Result<ReducedDensityMatrix> {
    if n_s > psi.n_spins() {
        return Err(Error::InvalidInput(format!(
            "cannot keep {n_s} spins of a {}-spin state",
            psi.n_spins()
        )));
    }
    let d = 1usize << n_s;
    let blocks = psi.dim() / d;
    let a = psi.amplitudes();
    let per_chunk = (par::CHUNK / d).max(1);
    let n_chunks = blocks.div_ceil(per_chunk);
    let partials = par::map_ordered(n_chunks, |c| {
        let mut acc = vec![Complex64::default(); d * d];
        for p in c * per_chunk..((c + 1) * per_chunk).min(blocks) {
            let v = &a[p * d..(p + 1) * d];
            for (r, x) in v.iter().enumerate() {
                if *x == Complex64::default() {
                    continue;
                }
                let row = &mut acc[r * d..(r + 1) * d];
                for (slot, y) in row.iter_mut().zip(v) {
                    *slot += x * y.conj();
                }
            }
        }
        acc
    });
    let mut total = vec![Complex64::default(); d * d];
    for part in partials {
        total.iter_mut().zip(part).for_each(|(t, p)| *t += p);
    }
    Ok(ReducedDensityMatrix {
        n_spins: n_s,
        matrix: DMatrix::from_row_slice(d, d, &total),
        basis: BasisTag::UpDown,
    })
}
