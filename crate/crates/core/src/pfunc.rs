//! Glauber–Sudarshan P functions as finite mixtures of isotropic Gaussians
//! and point masses.
//!
//! A Gaussian term `(c, z, a)` stands for `c·exp(−a|α − z|²)`, a delta term
//! `(c, z)` for `c·δ²(α − z)`. Attenuation, phase-insensitive amplification
//! noise and multiplication by a click-detection factor all map such terms
//! to such terms, so every conditional state of the protocols stays exact.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::Scalable;
use crate::scalar::{binomial, CompensatedSum, Real};

/// Highest total order `p + q` served by [`PhaseSpaceMixture::moment`].
pub const MAX_MOMENT_ORDER: usize = 6;

/// Relative weight below which [`PhaseSpaceMixture::prune`] drops terms by default.
pub const DEFAULT_PRUNE_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm<T = f64> {
    pub c: T,
    pub z: Complex<T>,
    pub a: T,
}

impl<T: Real> GaussianTerm<T> {
    pub fn value(&self, alpha: Complex<T>) -> T {
        self.c * (-self.a * (alpha - self.z).norm_sqr()).exp()
    }

    pub fn integral(&self) -> T {
        self.c * T::PI() / self.a
    }

    /// `∫ c e^{−a|α−z|²} α*^p α^q d²α`
    fn moment(&self, p: usize, q: usize) -> Complex<T> {
        let zc = self.z.conj();
        let mut acc = Complex::new(T::zero(), T::zero());
        let mut fact = T::one();
        for i in 0..=p.min(q) {
            if i > 0 {
                fact = fact * T::from_count(i);
            }
            let weight = binomial::<T>(p, i) * binomial::<T>(q, i) * T::PI() * fact / self.a.powi(i as i32 + 1);
            acc = acc + zc.powu((p - i) as u32) * self.z.powu((q - i) as u32) * weight;
        }
        acc * self.c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaTerm<T = f64> {
    pub c: T,
    pub z: Complex<T>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceMixture<T = f64> {
    pub gaussians: Vec<GaussianTerm<T>>,
    pub deltas: Vec<DeltaTerm<T>>,
}

/// Rectangular grid of cell centers in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_re == 0 || self.n_im == 0 {
            return Err(Error::domain("grid has no cells"));
        }
        let bounds = [self.re_min, self.re_max, self.im_min, self.im_max];
        if bounds.iter().any(|b| !b.is_finite()) || self.re_min > self.re_max || self.im_min > self.im_max {
            return Err(Error::domain("grid bounds must be finite and ordered"));
        }
        Ok(())
    }

    pub fn re_at(&self, i: usize) -> f64 {
        self.re_min + (i as f64 + 0.5) * (self.re_max - self.re_min) / self.n_re as f64
    }

    pub fn im_at(&self, j: usize) -> f64 {
        self.im_min + (j as f64 + 0.5) * (self.im_max - self.im_min) / self.n_im as f64
    }
}

/// Grid values, row-major with one row per imaginary coordinate:
/// `values[j * n_re + i]` is the value at `(re_at(i), im_at(j))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridValues<T = f64> {
    pub spec: GridSpec,
    pub values: Vec<T>,
}

impl<T: Real> GridValues<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[j * self.spec.n_re + i]
    }
}

/// The function `α ↦ ⟨α|ρ|α⟩` of a state given by a P-function mixture.
/// Normally ordered click factors on the pump-partner mode of an amplifier
/// act multiplicatively on this symbol rather than on the P function.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalSymbol<T = f64>(pub PhaseSpaceMixture<T>);

impl<T: Real> PhaseSpaceMixture<T> {
    pub fn new() -> Self {
        Self { gaussians: Vec::new(), deltas: Vec::new() }
    }

    pub fn coherent(beta: Complex<T>) -> Self {
        Self { gaussians: Vec::new(), deltas: vec![DeltaTerm { c: T::one(), z: beta }] }
    }

    pub fn thermal(nbar: T) -> Result<Self> {
        Self::displaced_thermal(Complex::new(T::zero(), T::zero()), nbar)
    }

    /// `exp(−|α−α₀|²/n̄)/(πn̄)`, collapsing to a delta at `n̄ = 0`.
    pub fn displaced_thermal(alpha0: Complex<T>, nbar: T) -> Result<Self> {
        if !(nbar >= T::zero() && nbar.is_finite()) {
            return Err(Error::domain(format!("mean photon number {nbar} must be finite and non-negative")));
        }
        if nbar == T::zero() {
            return Ok(Self::coherent(alpha0));
        }
        Ok(Self {
            gaussians: vec![GaussianTerm { c: (T::PI() * nbar).recip(), z: alpha0, a: nbar.recip() }],
            deltas: Vec::new(),
        })
    }

    pub fn term_count(&self) -> usize {
        self.gaussians.len() + self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.term_count() == 0
    }

    /// Value of the regular (Gaussian) part; deltas are not point-evaluable.
    pub fn evaluate(&self, alpha: Complex<T>) -> T {
        let mut s = CompensatedSum::new();
        for g in &self.gaussians {
            s.add(g.value(alpha));
        }
        s.value()
    }

    pub fn evaluate_grid(&self, grid: &GridSpec) -> Result<GridValues<T>> {
        grid.validate()?;
        let values = (0..grid.n_im)
            .into_par_iter()
            .flat_map_iter(|j| {
                let im = T::lit(grid.im_at(j));
                (0..grid.n_re).map(move |i| self.evaluate(Complex::new(T::lit(grid.re_at(i)), im)))
            })
            .collect();
        Ok(GridValues { spec: *grid, values })
    }

    /// `∫ P d²α = Σ cπ/a + Σ c`, the trace of the represented operator.
    pub fn integral(&self) -> T {
        let mut s = CompensatedSum::new();
        for g in &self.gaussians {
            s.add(g.integral());
        }
        for d in &self.deltas {
            s.add(d.c);
        }
        s.value()
    }

    /// `∫ |P| d²α` bound used for relative pruning.
    pub fn absolute_weight(&self) -> T {
        let mut s = CompensatedSum::new();
        for g in &self.gaussians {
            s.add(g.integral().abs());
        }
        for d in &self.deltas {
            s.add(d.c.abs());
        }
        s.value()
    }

    /// Normally ordered moment `⟨a†^p a^q⟩ = ∫ P(α) α*^p α^q d²α`.
    pub fn moment(&self, p: usize, q: usize) -> Result<Complex<T>> {
        if p + q > MAX_MOMENT_ORDER {
            return Err(Error::Unsupported(format!("moment of order {} exceeds {MAX_MOMENT_ORDER}", p + q)));
        }
        let (mut re, mut im) = (CompensatedSum::new(), CompensatedSum::new());
        for g in &self.gaussians {
            let m = g.moment(p, q);
            re.add(m.re);
            im.add(m.im);
        }
        for d in &self.deltas {
            let m = d.z.conj().powu(p as u32) * d.z.powu(q as u32) * d.c;
            re.add(m.re);
            im.add(m.im);
        }
        Ok(Complex::new(re.value(), im.value()))
    }

    /// Drops terms whose absolute weight is below `rel_tol` times the
    /// mixture's total absolute weight; returns the pruned mixture and the
    /// summed absolute weight that was removed.
    pub fn prune(&self, rel_tol: T) -> (Self, T) {
        let threshold = rel_tol * self.absolute_weight();
        let mut dropped = CompensatedSum::new();
        let gaussians = self
            .gaussians
            .iter()
            .filter(|g| {
                let w = g.integral().abs();
                let keep = w >= threshold;
                if !keep {
                    dropped.add(w);
                }
                keep
            })
            .copied()
            .collect();
        let deltas = self
            .deltas
            .iter()
            .filter(|d| {
                let keep = d.c.abs() >= threshold;
                if !keep {
                    dropped.add(d.c.abs());
                }
                keep
            })
            .copied()
            .collect();
        (Self { gaussians, deltas }, dropped.value())
    }

    /// Beam-splitter loss: `P ↦ t⁻² P(α/t)`.
    pub fn scale_loss(&self, t: T) -> Result<Self> {
        if !(t > T::zero() && t <= T::one()) {
            return Err(Error::domain(format!("transmissivity {t} outside (0, 1]")));
        }
        let t2 = t * t;
        Ok(Self {
            gaussians: self.gaussians.iter().map(|g| GaussianTerm { c: g.c / t2, z: g.z * t, a: g.a / t2 }).collect(),
            deltas: self.deltas.iter().map(|d| DeltaTerm { c: d.c, z: d.z * t }).collect(),
        })
    }

    /// Amplifier noise: amplitudes scale by `μ` and the P function is
    /// convolved with a thermal kernel of mean `μ² − 1`.
    pub fn convolve_noise(&self, mu: T) -> Result<Self> {
        if !(mu >= T::one() && mu.is_finite()) {
            return Err(Error::domain(format!("gain μ = {mu} must be at least 1")));
        }
        if mu == T::one() {
            log::warn!("noise convolution with μ = 1 is the identity");
            return Ok(self.clone());
        }
        let mu2 = mu * mu;
        let noise = mu2 - T::one();
        let mut gaussians: Vec<GaussianTerm<T>> = self
            .gaussians
            .iter()
            .map(|g| {
                let w = mu2 / g.a + noise;
                GaussianTerm { c: g.c / (g.a * w), z: g.z * mu, a: w.recip() }
            })
            .collect();
        gaussians.extend(
            self.deltas.iter().map(|d| GaussianTerm { c: d.c / (T::PI() * noise), z: d.z * mu, a: noise.recip() }),
        );
        Ok(Self { gaussians, deltas: Vec::new() })
    }

    /// Pointwise product with the `k`-click factor
    /// `C(N,k) e^{−η(N−k)|α|²/N} (1 − e^{−η|α|²/N})^k`.
    pub fn multiply_click_factor(&self, eta_eff: T, n: usize, k: usize) -> Result<Self> {
        if !(eta_eff >= T::zero() && eta_eff.is_finite()) {
            return Err(Error::domain(format!("effective efficiency {eta_eff} must be finite and non-negative")));
        }
        if n == 0 || k > n {
            return Err(Error::domain(format!("{k} clicks impossible with {n} diodes")));
        }
        if eta_eff == T::zero() {
            return Ok(if k == 0 { self.clone() } else { Self::new() });
        }
        let outer = binomial::<T>(n, k);
        let nn = T::from_count(n);
        let mut gaussians = Vec::with_capacity(self.gaussians.len() * (k + 1));
        for g in &self.gaussians {
            for j in 0..=k {
                let sign = if (k - j) % 2 == 0 { T::one() } else { -T::one() };
                let coef = sign * outer * binomial::<T>(k, j);
                let lambda = eta_eff * (T::one() - T::from_count(j) / nn);
                let a = g.a + lambda;
                gaussians.push(GaussianTerm {
                    c: g.c * coef * (-g.a * lambda * g.z.norm_sqr() / a).exp(),
                    z: g.z * (g.a / a),
                    a,
                });
            }
        }
        let deltas = self
            .deltas
            .iter()
            .map(|d| DeltaTerm { c: d.c * click_factor(eta_eff, n, k, d.z.norm_sqr()), z: d.z })
            .collect();
        Ok(Self { gaussians, deltas })
    }

    /// `⟨α|ρ|α⟩ = ∫ P(β) e^{−|α−β|²} d²β`.
    pub fn to_normal_symbol(&self) -> NormalSymbol<T> {
        let mut gaussians: Vec<GaussianTerm<T>> = self
            .gaussians
            .iter()
            .map(|g| {
                let v = g.a.recip();
                GaussianTerm { c: g.c * T::PI() * v / (v + T::one()), z: g.z, a: (v + T::one()).recip() }
            })
            .collect();
        gaussians.extend(self.deltas.iter().map(|d| GaussianTerm { c: d.c, z: d.z, a: T::one() }));
        NormalSymbol(Self { gaussians, deltas: Vec::new() })
    }
}

impl<T: Real> NormalSymbol<T> {
    pub fn multiply_click_factor(&self, eta_eff: T, n: usize, k: usize) -> Result<Self> {
        Ok(Self(self.0.multiply_click_factor(eta_eff, n, k)?))
    }

    /// Inverse of [`PhaseSpaceMixture::to_normal_symbol`]. A term narrower
    /// than a coherent state has no regular P function and is rejected;
    /// one exactly as narrow becomes a point mass.
    pub fn to_p_function(&self) -> Result<PhaseSpaceMixture<T>> {
        let tol = T::lit(64.0) * T::epsilon();
        let mut out = PhaseSpaceMixture::new();
        for g in &self.0.gaussians {
            let w = g.a.recip();
            let excess = w - T::one();
            if excess.abs() <= tol {
                out.deltas.push(DeltaTerm { c: g.c, z: g.z });
            } else if excess < T::zero() {
                return Err(Error::Singular(format!(
                    "symbol term of width {w} is narrower than a coherent state; its P function is not regular"
                )));
            } else {
                out.gaussians.push(GaussianTerm { c: g.c * w / (T::PI() * excess), z: g.z, a: excess.recip() });
            }
        }
        if !self.0.deltas.is_empty() {
            return Err(Error::Singular("point masses have no P-function preimage".into()));
        }
        Ok(out)
    }
}

/// `C(N,k) e^{−η(N−k)x/N} (1 − e^{−ηx/N})^k` at `x = |α|²`, free of the
/// cancellation of the expanded sum.
pub fn click_factor<T: Real>(eta_eff: T, n: usize, k: usize, x: T) -> T {
    let nn = T::from_count(n);
    let per = eta_eff * x / nn;
    binomial::<T>(n, k) * (-per * T::from_count(n - k)).exp() * (-(-per).exp_m1()).powi(k as i32)
}

impl<T: Real> Scalable<T> for PhaseSpaceMixture<T> {
    fn scaled(&self, factor: T) -> Self {
        Self {
            gaussians: self.gaussians.iter().map(|g| GaussianTerm { c: g.c * factor, ..*g }).collect(),
            deltas: self.deltas.iter().map(|d| DeltaTerm { c: d.c * factor, ..*d }).collect(),
        }
    }
}
