//! Truncated Fock-space oracle.
//!
//! Everything here is brute force on purpose: states are explicit matrices
//! in the number basis, the beam splitter and two-mode squeezer are obtained
//! by exponentiating their truncated generators, and detection is the
//! diagonal click POVM applied to the second mode. The phase-space engine is
//! validated against these results, so the module favours transparency over
//! speed and refuses to truncate silently.
//!
//! Two-mode states are stored as ensembles of weighted kets rather than as
//! dense `(d_A d_B)²` tensors: every state the protocols need (products with
//! vacuum, phase-diffused pair states) has an ensemble of at most `d_A`
//! members, and unitaries act on kets block by block.

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::{ProcessOutcome, Scalable};
use crate::povm::DetectorConfig;
use crate::scalar::Real;

/// Default tolerance on the probability mass allowed outside a truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

/// Pivots below this multiple of the largest diagonal entry end the
/// ensemble factorization.
const EIGEN_DROP: f64 = 1e-17;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Beam splitter with real transmissivity `t` and reflectivity `r = √(1−t²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterConfig<T = f64> {
    t: T,
}

impl<T: Real> BeamSplitterConfig<T> {
    pub fn new(t: T) -> Result<Self> {
        if !(t > T::zero() && t < T::one()) {
            return Err(Error::domain(format!("transmissivity {t} outside (0, 1)")));
        }
        Ok(Self { t })
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn r(&self) -> T {
        (T::one() - self.t * self.t).sqrt()
    }

    /// Mixing angle with `t = cos θ`.
    pub fn theta(&self) -> T {
        self.t.acos()
    }
}

/// Two-mode squeezer `exp(ξ(a†b† − ab))` with `μ = cosh ξ`, `ν = sinh ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezerConfig<T = f64> {
    xi: T,
}

impl<T: Real> SqueezerConfig<T> {
    pub fn new(xi: T) -> Result<Self> {
        if !(xi >= T::zero() && xi.is_finite()) {
            return Err(Error::domain(format!("squeezing parameter {xi} must be finite and non-negative")));
        }
        Ok(Self { xi })
    }

    pub fn from_mu(mu: T) -> Result<Self> {
        if !(mu >= T::one() && mu.is_finite()) {
            return Err(Error::domain(format!("gain μ = {mu} must be at least 1")));
        }
        Ok(Self { xi: mu.acosh() })
    }

    pub fn xi(&self) -> T {
        self.xi
    }

    pub fn mu(&self) -> T {
        self.xi.cosh()
    }

    pub fn nu(&self) -> T {
        self.xi.sinh()
    }

    /// `ν²` computed without cancellation.
    pub fn nu2(&self) -> T {
        let nu = self.nu();
        nu * nu
    }
}

/// Single-mode (possibly unnormalized) state on `|0⟩ … |d−1⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_matrix(rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
            return Err(Error::domain(format!("density matrix must be square and non-empty, got {}×{}", rho.nrows(), rho.ncols())));
        }
        Ok(Self { rho })
    }

    pub fn from_ket(ket: &DVector<Complex64>) -> Self {
        Self { rho: ket * ket.adjoint() }
    }

    pub fn from_diagonal(probs: &[f64]) -> Self {
        let d = probs.len().max(1);
        let mut rho = DMatrix::zeros(d, d);
        for (n, &p) in probs.iter().enumerate() {
            rho[(n, n)] = Complex64::new(p, 0.0);
        }
        Self { rho }
    }

    pub fn cutoff(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn entry(&self, p: usize, q: usize) -> Complex64 {
        self.rho[(p, q)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.cutoff()).map(|n| self.rho[(n, n)].re).sum()
    }

    /// Checks hermiticity, positivity and the trace bound.
    pub fn validate(&self) -> Result<()> {
        let d = self.cutoff();
        let scale = self.rho.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for p in 0..d {
            for q in 0..p {
                let asym = (self.rho[(p, q)] - self.rho[(q, p)].conj()).norm();
                if asym > 1e-12 * scale.max(1.0) {
                    return Err(Error::domain(format!("density matrix not Hermitian at ({p},{q}): {asym:e}")));
                }
            }
        }
        self.ensemble()?;
        let tr = self.trace();
        if !(tr > 0.0 && tr <= 1.0 + 1e-12) {
            return Err(Error::domain(format!("trace {tr} outside (0, 1]")));
        }
        Ok(())
    }

    fn hermitian_part(&self) -> DMatrix<Complex64> {
        (&self.rho + self.rho.adjoint()).scale(0.5)
    }

    /// Decomposition `ρ = Σ w_i |ψ_i⟩⟨ψ_i|` with unit (not necessarily
    /// orthogonal) kets, from a diagonally pivoted Cholesky factorization.
    /// Pivoting stops once the remaining diagonal is negligible; a
    /// remainder that is clearly indefinite means `ρ` is not positive.
    ///
    /// Unlike an eigendecomposition this is insensitive to the enormous
    /// dynamic range of truncated coherent or thermal states.
    pub fn ensemble(&self) -> Result<Vec<(f64, DVector<Complex64>)>> {
        let d = self.cutoff();
        let mut a = self.hermitian_part();
        let scale = (0..d).map(|i| a[(i, i)].re).fold(0.0, f64::max);
        let mut active: Vec<bool> = vec![true; d];
        let mut out = Vec::new();
        if scale > 0.0 {
            loop {
                let pivot = (0..d)
                    .filter(|&i| active[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if a[(b, b)].re >= a[(i, i)].re => Some(b),
                        _ => Some(i),
                    });
                let Some(p) = pivot else { break };
                let app = a[(p, p)].re;
                if app <= EIGEN_DROP * scale {
                    break;
                }
                let root = app.sqrt();
                let mut l = DVector::from_element(d, ZERO);
                for i in 0..d {
                    if active[i] {
                        l[i] = a[(i, p)] / root;
                    }
                }
                for j in 0..d {
                    if !active[j] || l[j] == ZERO {
                        continue;
                    }
                    let lj = l[j].conj();
                    for i in 0..d {
                        if active[i] {
                            a[(i, j)] -= l[i] * lj;
                        }
                    }
                }
                active[p] = false;
                let w = l.norm_squared();
                out.push((w, l.unscale(w.sqrt())));
            }
        }
        let tol = 1e-10 * scale.max(1e-300);
        for i in (0..d).filter(|&i| active[i]) {
            for j in (0..d).filter(|&j| active[j]) {
                let v = a[(i, j)];
                if (i == j && v.re < -tol) || (i != j && v.norm() > tol) {
                    return Err(Error::domain(format!("state is not positive (remainder {v} at ({i},{j}))")));
                }
            }
        }
        Ok(out)
    }

    /// `⟨ψ|ρ|ψ⟩ / tr ρ` for a unit ket `ψ`.
    pub fn fidelity_with_ket(&self, ket: &DVector<Complex64>) -> Result<f64> {
        if ket.len() != self.cutoff() {
            return Err(Error::CutoffMismatch(ket.len(), self.cutoff()));
        }
        let v = (ket.adjoint() * &self.rho * ket)[(0, 0)];
        Ok(v.re / self.trace())
    }
}

impl Scalable<f64> for DensityMatrix {
    fn scaled(&self, factor: f64) -> Self {
        Self { rho: self.rho.scale(factor) }
    }
}

/// `p_n = ⟨n|ρ|n⟩`.
pub fn photon_distribution(state: &DensityMatrix) -> Vec<f64> {
    (0..state.cutoff()).map(|n| state.rho[(n, n)].re).collect()
}

/// Two-mode state `Σ w_i |ψ_i⟩⟨ψ_i|` with kets indexed `p·d_B + r` for
/// mode-A number `p` and mode-B number `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeDensityMatrix {
    dims: (usize, usize),
    components: Vec<(f64, DVector<Complex64>)>,
}

impl TwoModeDensityMatrix {
    pub fn from_components(dims: (usize, usize), components: Vec<(f64, DVector<Complex64>)>) -> Result<Self> {
        let len = dims.0 * dims.1;
        if len == 0 {
            return Err(Error::domain("two-mode cutoffs must be positive"));
        }
        for (w, ket) in &components {
            if ket.len() != len {
                return Err(Error::CutoffMismatch(ket.len(), len));
            }
            if !(*w >= 0.0) {
                return Err(Error::domain(format!("ensemble weight {w} is negative")));
            }
        }
        Ok(Self { dims, components })
    }

    /// `ρ_A ⊗ ρ_B`.
    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> Result<Self> {
        let (ea, eb) = (a.ensemble()?, b.ensemble()?);
        let dims = (a.cutoff(), b.cutoff());
        let mut components = Vec::with_capacity(ea.len() * eb.len());
        for (wa, ka) in &ea {
            for (wb, kb) in &eb {
                components.push((wa * wb, ka.kronecker(kb)));
            }
        }
        Ok(Self { dims, components })
    }

    /// `ρ_A ⊗ |0⟩⟨0|` with mode B truncated at `d_b`.
    pub fn with_vacuum(a: &DensityMatrix, d_b: usize) -> Result<Self> {
        let dims = (a.cutoff(), d_b.max(1));
        let components = a
            .ensemble()?
            .into_iter()
            .map(|(w, ka)| {
                let mut ket = DVector::from_element(dims.0 * dims.1, ZERO);
                for p in 0..dims.0 {
                    ket[p * dims.1] = ka[p];
                }
                (w, ket)
            })
            .collect();
        Ok(Self { dims, components })
    }

    pub fn cutoffs(&self) -> (usize, usize) {
        self.dims
    }

    pub fn components(&self) -> &[(f64, DVector<Complex64>)] {
        &self.components
    }

    fn index(&self, p: usize, r: usize) -> usize {
        p * self.dims.1 + r
    }

    /// `ρ_{p,q,r,s} = ⟨p, r|ρ|q, s⟩`.
    pub fn entry(&self, p: usize, q: usize, r: usize, s: usize) -> Complex64 {
        let (i, j) = (self.index(p, r), self.index(q, s));
        self.components.iter().map(|(w, k)| k[i] * k[j].conj() * *w).sum()
    }

    pub fn trace(&self) -> f64 {
        self.components.iter().map(|(w, k)| w * k.norm_squared()).sum()
    }

    pub fn reduced_a(&self) -> DensityMatrix {
        let (da, db) = self.dims;
        let mut rho = DMatrix::zeros(da, da);
        for (w, k) in &self.components {
            let m = DMatrix::from_fn(da, db, |p, r| k[p * db + r]);
            rho += (&m * m.adjoint()).scale(*w);
        }
        DensityMatrix { rho }
    }

    pub fn reduced_b(&self) -> DensityMatrix {
        let (da, db) = self.dims;
        let mut rho = DMatrix::zeros(db, db);
        for (w, k) in &self.components {
            let m = DMatrix::from_fn(db, da, |r, p| k[p * db + r]);
            rho += (&m * m.adjoint()).scale(*w);
        }
        DensityMatrix { rho }
    }

    /// Weight on the outermost retained number state of either mode; a
    /// proxy for what a truncated evolution may have pushed out.
    pub fn boundary_weight(&self) -> f64 {
        let (da, db) = self.dims;
        let mut total = 0.0;
        for (w, k) in &self.components {
            let mut s = 0.0;
            for p in 0..da {
                for r in 0..db {
                    if p + 1 == da || r + 1 == db {
                        s += k[p * db + r].norm_sqr();
                    }
                }
            }
            total += w * s;
        }
        total
    }

    /// Blocks `B_m[p, q] = ρ_{p,q,m,m}`, one per mode-B number `m`.
    pub fn diagonal_blocks(&self) -> Vec<DMatrix<Complex64>> {
        let (da, db) = self.dims;
        let nc = self.components.len();
        (0..db)
            .into_par_iter()
            .map(|m| {
                let psi = DMatrix::from_fn(da, nc, |p, c| {
                    let (w, k) = &self.components[c];
                    k[p * db + m] * w.sqrt()
                });
                &psi * psi.adjoint()
            })
            .collect()
    }
}

/// Input states the oracle can prepare.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Vacuum,
    Coherent { alpha: Complex64 },
    Thermal { nbar: f64 },
    DisplacedThermal { alpha: Complex64, nbar: f64 },
    Fock { n: usize },
    PhaseDiffusedTmsv { omega: f64 },
}

impl StateSpec {
    fn check(&self) -> Result<()> {
        match *self {
            StateSpec::Thermal { nbar } | StateSpec::DisplacedThermal { nbar, .. } if !(nbar >= 0.0 && nbar.is_finite()) => {
                Err(Error::domain(format!("mean photon number {nbar} must be finite and non-negative")))
            }
            StateSpec::PhaseDiffusedTmsv { omega } if !(omega > 0.0 && omega < 1.0) => {
                Err(Error::domain(format!("pair parameter ω = {omega} outside (0, 1)")))
            }
            StateSpec::Coherent { alpha } | StateSpec::DisplacedThermal { alpha, .. } if !alpha.is_finite() => {
                Err(Error::domain("amplitude must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Mean photon number (per mode for the pair state).
    pub fn mean_photons(&self) -> f64 {
        match *self {
            StateSpec::Vacuum => 0.0,
            StateSpec::Coherent { alpha } => alpha.norm_sqr(),
            StateSpec::Thermal { nbar } => nbar,
            StateSpec::DisplacedThermal { alpha, nbar } => alpha.norm_sqr() + nbar,
            StateSpec::Fock { n } => n as f64,
            StateSpec::PhaseDiffusedTmsv { omega } => omega / (1.0 - omega),
        }
    }
}

fn check_captured(cutoff: usize, captured: f64, tail_tol: f64) -> Result<()> {
    if captured < 1.0 - tail_tol {
        return Err(Error::CutoffTooSmall { cutoff, captured, tail_tol });
    }
    Ok(())
}

/// Coherent-state amplitudes `e^{−|α|²/2} αⁿ/√n!` for `n < d`.
pub fn coherent_ket(alpha: Complex64, d: usize) -> DVector<Complex64> {
    let mut ket = DVector::from_element(d, ZERO);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..d {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        ket[n] = c;
    }
    ket
}

pub fn fock_ket(n: usize, d: usize) -> DVector<Complex64> {
    let mut ket = DVector::from_element(d, ZERO);
    if n < d {
        ket[n] = Complex64::new(1.0, 0.0);
    }
    ket
}

fn thermal_weights(nbar: f64, d: usize) -> Vec<f64> {
    let ratio = nbar / (nbar + 1.0);
    let mut w = 1.0 / (nbar + 1.0);
    (0..d)
        .map(|_| {
            let out = w;
            w *= ratio;
            out
        })
        .collect()
}

/// Displaced number states `D(α)|n⟩` for `n < count`, each truncated to
/// `d` entries. Built by `D(α)|n⟩ = (a† − α*) D(α)|n−1⟩ / √n` in a padded
/// working space so the truncation of `a†` never touches retained entries.
fn displaced_fock_kets(alpha: Complex64, count: usize, d: usize) -> Vec<DVector<Complex64>> {
    let a = alpha.norm();
    let reach = d.max(count) as f64;
    let pad = (2.0 * a * a + 10.0 * a * reach.sqrt() + 20.0).ceil() as usize;
    let w = d.max(count) + pad;
    let mut phi = coherent_ket(alpha, w);
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        if n > 0 {
            let mut next = DVector::from_element(w, ZERO);
            for j in 0..w {
                let mut v = -alpha.conj() * phi[j];
                if j > 0 {
                    v += phi[j - 1] * (j as f64).sqrt();
                }
                next[j] = v / (n as f64).sqrt();
            }
            phi = next;
        }
        out.push(phi.rows(0, d).into_owned());
    }
    out
}

/// Prepares a single-mode state truncated at `cutoff`.
pub fn make_state(spec: &StateSpec, cutoff: usize) -> Result<DensityMatrix> {
    make_state_with_tol(spec, cutoff, DEFAULT_TAIL_TOL)
}

pub fn make_state_with_tol(spec: &StateSpec, cutoff: usize, tail_tol: f64) -> Result<DensityMatrix> {
    spec.check()?;
    if cutoff == 0 {
        return Err(Error::domain("cutoff must be positive"));
    }
    let state = match *spec {
        StateSpec::Vacuum => DensityMatrix::from_ket(&fock_ket(0, cutoff)),
        StateSpec::Fock { n } => DensityMatrix::from_ket(&fock_ket(n, cutoff)),
        StateSpec::Coherent { alpha } => DensityMatrix::from_ket(&coherent_ket(alpha, cutoff)),
        StateSpec::Thermal { nbar } => DensityMatrix::from_diagonal(&thermal_weights(nbar, cutoff)),
        StateSpec::DisplacedThermal { alpha, nbar } => {
            // thermal populations beyond this index carry < tail_tol²
            let weights = thermal_weights(nbar, cutoff);
            let kets = displaced_fock_kets(alpha, cutoff, cutoff);
            let mut rho = DMatrix::zeros(cutoff, cutoff);
            for (w, k) in weights.iter().zip(&kets) {
                if *w < 1e-300 {
                    break;
                }
                rho += (k * k.adjoint()).scale(*w);
            }
            DensityMatrix { rho }
        }
        StateSpec::PhaseDiffusedTmsv { .. } => {
            return Err(Error::Unsupported("the pair state is a two-mode state; use make_two_mode_state".into()))
        }
    };
    check_captured(cutoff, state.trace(), tail_tol)?;
    Ok(state)
}

/// Prepares a two-mode state: the pair state directly, any single-mode
/// state as `ρ ⊗ |0⟩⟨0|`.
pub fn make_two_mode_state(spec: &StateSpec, cutoffs: (usize, usize)) -> Result<TwoModeDensityMatrix> {
    spec.check()?;
    match *spec {
        StateSpec::PhaseDiffusedTmsv { omega } => {
            let (da, db) = cutoffs;
            let d = da.min(db);
            if d == 0 {
                return Err(Error::domain("cutoffs must be positive"));
            }
            let mut components = Vec::with_capacity(d);
            let mut w = 1.0 - omega;
            for n in 0..d {
                let mut ket = DVector::from_element(da * db, ZERO);
                ket[n * db + n] = Complex64::new(1.0, 0.0);
                components.push((w, ket));
                w *= omega;
            }
            let state = TwoModeDensityMatrix { dims: cutoffs, components };
            check_captured(d, state.trace(), DEFAULT_TAIL_TOL)?;
            Ok(state)
        }
        _ => TwoModeDensityMatrix::with_vacuum(&make_state(spec, cutoffs.0)?, cutoffs.1),
    }
}

/// Smallest cutoff whose truncation keeps `1 − tail_tol` of the state.
pub fn suggest_cutoff(spec: &StateSpec, tail_tol: f64) -> Result<usize> {
    spec.check()?;
    let estimate = match *spec {
        StateSpec::Vacuum => return Ok(1),
        StateSpec::Fock { n } => return Ok(n + 1),
        StateSpec::Thermal { nbar } if nbar == 0.0 => return Ok(1),
        StateSpec::Thermal { nbar } => {
            // Σ_{n≥d} p_n = (n̄/(n̄+1))^d
            let d = (tail_tol.ln() / (nbar / (nbar + 1.0)).ln()).ceil();
            return Ok((d.max(1.0) as usize).max(1));
        }
        StateSpec::PhaseDiffusedTmsv { omega } => {
            let d = (tail_tol.ln() / omega.ln()).ceil();
            return Ok((d.max(1.0) as usize).max(1));
        }
        StateSpec::Coherent { alpha } => {
            let p = coherent_ket(alpha, 1).norm_squared();
            let x = alpha.norm_sqr();
            let (mut n, mut term, mut acc) = (0usize, p, p);
            while acc < 1.0 - tail_tol && n < 100_000 {
                n += 1;
                term *= x / n as f64;
                acc += term;
            }
            return Ok(n + 1);
        }
        StateSpec::DisplacedThermal { alpha, nbar } => {
            let x = alpha.norm_sqr();
            let sd = (nbar * (nbar + 1.0) + x * (2.0 * nbar + 1.0)).sqrt();
            (x + nbar + 4.0 * sd).ceil() as usize + 4
        }
    };
    // Grow from a moment-based estimate until the captured trace suffices,
    // then shrink back to the smallest such cutoff.
    let mut d = estimate.max(2);
    loop {
        if make_state_with_tol(spec, d, tail_tol).is_ok() {
            break;
        }
        d += d / 4 + 1;
    }
    let diag = photon_distribution(&make_state_with_tol(spec, d, 1.0)?);
    let mut acc = 0.0;
    for (n, p) in diag.iter().enumerate() {
        acc += p;
        if acc >= 1.0 - tail_tol {
            return Ok(n + 1);
        }
    }
    Ok(d)
}

/// Unitary acting independently on invariant blocks of the two-mode basis.
struct BlockUnitary {
    blocks: Vec<(Vec<usize>, DMatrix<f64>)>,
}

impl BlockUnitary {
    /// Each block is given by its basis `(p, r)` pairs and the matrix of a
    /// real antisymmetric generator on it; the block unitary is its exponential.
    fn from_generators(db: usize, blocks: Vec<(Vec<(usize, usize)>, DMatrix<f64>)>) -> Self {
        let blocks = blocks
            .into_par_iter()
            .map(|(basis, g)| (basis.iter().map(|&(p, r)| p * db + r).collect(), g.exp()))
            .collect();
        Self { blocks }
    }

    fn apply(&self, ket: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::from_element(ket.len(), ZERO);
        for (idx, u) in &self.blocks {
            for (row, &i) in idx.iter().enumerate() {
                let mut acc = ZERO;
                for (col, &j) in idx.iter().enumerate() {
                    acc += ket[j] * u[(row, col)];
                }
                out[i] = acc;
            }
        }
        out
    }

    fn apply_state(&self, state: &TwoModeDensityMatrix) -> TwoModeDensityMatrix {
        let components = state.components.par_iter().map(|(w, k)| (*w, self.apply(k))).collect();
        TwoModeDensityMatrix { dims: state.dims, components }
    }
}

fn beam_splitter_unitary(dims: (usize, usize), theta: f64) -> BlockUnitary {
    let (da, db) = dims;
    // θ(a b† − a† b) conserves p + r.
    let blocks = (0..da + db - 1)
        .map(|n| {
            let lo = n.saturating_sub(db - 1);
            let hi = n.min(da - 1);
            let basis: Vec<(usize, usize)> = (lo..=hi).map(|p| (p, n - p)).collect();
            let len = basis.len();
            let mut g = DMatrix::zeros(len, len);
            for (col, &(p, r)) in basis.iter().enumerate() {
                // a b†|p,r⟩ = √p √(r+1) |p−1, r+1⟩
                if p > lo {
                    g[(col - 1, col)] += theta * ((p * (r + 1)) as f64).sqrt();
                }
                // −a† b|p,r⟩ = −√(p+1) √r |p+1, r−1⟩
                if p < hi {
                    g[(col + 1, col)] -= theta * (((p + 1) * r) as f64).sqrt();
                }
            }
            (basis, g)
        })
        .collect();
    BlockUnitary::from_generators(db, blocks)
}

fn squeezer_unitary(dims: (usize, usize), xi: f64) -> BlockUnitary {
    let (da, db) = dims;
    // ξ(a†b† − ab) conserves p − r.
    let blocks = (-(db as isize - 1)..=(da as isize - 1))
        .map(|delta| {
            let r0 = (-delta).max(0) as usize;
            let basis: Vec<(usize, usize)> = (r0..)
                .map(|r| ((r as isize + delta) as usize, r))
                .take_while(|&(p, r)| p < da && r < db)
                .collect();
            let len = basis.len();
            let mut g = DMatrix::zeros(len, len);
            for (col, &(p, r)) in basis.iter().enumerate() {
                if col + 1 < len {
                    g[(col + 1, col)] += xi * (((p + 1) * (r + 1)) as f64).sqrt();
                }
                if col > 0 {
                    g[(col - 1, col)] -= xi * ((p * r) as f64).sqrt();
                }
            }
            (basis, g)
        })
        .collect();
    BlockUnitary::from_generators(db, blocks)
}

fn check_boundary(state: &TwoModeDensityMatrix, tail_tol: f64) -> Result<()> {
    let edge = state.boundary_weight();
    let tr = state.trace();
    if edge > tail_tol * tr {
        return Err(Error::CutoffTooSmall {
            cutoff: state.dims.0.min(state.dims.1),
            captured: 1.0 - edge / tr,
            tail_tol,
        });
    }
    Ok(())
}

/// `|α, 0⟩ ↦ |tα, rα⟩`. Mode-wise cutoffs may differ; the result is
/// rejected when the evolved state reaches the truncation boundary.
pub fn apply_beam_splitter(state: &TwoModeDensityMatrix, bs: &BeamSplitterConfig<f64>) -> Result<TwoModeDensityMatrix> {
    let out = beam_splitter_unitary(state.dims, bs.theta()).apply_state(state);
    check_boundary(&out, DEFAULT_TAIL_TOL)?;
    Ok(out)
}

/// `exp(ξ(a†b† − ab))`, so `|0,0⟩ ↦ μ⁻¹ Σ (ν/μ)^m |m,m⟩`.
pub fn apply_two_mode_squeezer(state: &TwoModeDensityMatrix, sq: &SqueezerConfig<f64>) -> Result<TwoModeDensityMatrix> {
    if sq.xi() == 0.0 {
        return Ok(state.clone());
    }
    let out = squeezer_unitary(state.dims, sq.xi()).apply_state(state);
    check_boundary(&out, DEFAULT_TAIL_TOL)?;
    Ok(out)
}

/// Conditional mode-A state after `k` clicks on mode B:
/// `Σ_{p,q} [Σ_m D^{1−η,η}_{k,m} ρ_{p,q,m,m}] |p⟩⟨q|`, unnormalized.
pub fn condition_on_clicks(
    state: &TwoModeDensityMatrix,
    det: &DetectorConfig<f64>,
    k: usize,
) -> Result<ProcessOutcome<DensityMatrix>> {
    det.check_clicks(k)?;
    let blocks = state.diagonal_blocks();
    condition_blocks(&blocks, state.dims, det, k)
}

/// All `N+1` conditional states, sharing one pass over the input.
pub fn condition_on_all_clicks(
    state: &TwoModeDensityMatrix,
    det: &DetectorConfig<f64>,
) -> Result<Vec<ProcessOutcome<DensityMatrix>>> {
    let blocks = state.diagonal_blocks();
    (0..=det.n()).map(|k| condition_blocks(&blocks, state.dims, det, k)).collect()
}

fn condition_blocks(
    blocks: &[DMatrix<Complex64>],
    dims: (usize, usize),
    det: &DetectorConfig<f64>,
    k: usize,
) -> Result<ProcessOutcome<DensityMatrix>> {
    let table = det.table(k, dims.1)?;
    let row = table.row(k);
    let mut rho = DMatrix::zeros(dims.0, dims.0);
    for (m, block) in blocks.iter().enumerate() {
        let d = row[m];
        if d != 0.0 {
            rho += block.scale(d);
        }
    }
    let state = DensityMatrix { rho };
    let probability = state.trace();
    Ok(ProcessOutcome { state, probability })
}

/// `tr(ρ a†^p a^q)` together with the magnitude of the contributions from
/// the outermost four retained diagonals, a convergence indicator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalMoment {
    pub value: Complex64,
    pub tail: f64,
}

pub fn normally_ordered_moment(state: &DensityMatrix, p: usize, q: usize) -> NormalMoment {
    let d = state.cutoff();
    let top = p.max(q);
    let mut value = ZERO;
    let mut tail = 0.0;
    // tr(ρ a†^p a^q) = Σ_j ρ_{j+q, j+p} √((j+p)!/j!) √((j+q)!/j!)
    for j in 0..d.saturating_sub(top) {
        let mut f = 1.0;
        for i in 1..=p {
            f *= ((j + i) as f64).sqrt();
        }
        for i in 1..=q {
            f *= ((j + i) as f64).sqrt();
        }
        let term = state.rho[(j + q, j + p)] * f;
        value += term;
        if j + top + 4 >= d {
            tail += term.norm();
        }
    }
    if tail > 1e-8 * value.norm() && value.norm() > 0.0 {
        warn!("moment ({p},{q}) at cutoff {d}: truncation tail {tail:e} relative to {:e}", value.norm());
    }
    NormalMoment { value, tail }
}
