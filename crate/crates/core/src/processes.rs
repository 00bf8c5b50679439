//! Heralding, photon subtraction, photon addition and their composition.
//!
//! Each protocol exists twice: as an exact map on P-function mixtures and as
//! a brute-force pipeline through the truncated Fock space. Outcomes are
//! unnormalized; their trace is the probability of the click event.

use nalgebra::DMatrix;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    apply_beam_splitter, apply_two_mode_squeezer, condition_on_all_clicks, condition_on_clicks, BeamSplitterConfig,
    DensityMatrix, SqueezerConfig, TwoModeDensityMatrix,
};
use crate::outcome::ProcessOutcome;
use crate::pfunc::{GaussianTerm, PhaseSpaceMixture};
use crate::povm::DetectorConfig;
use crate::scalar::{binomial, CompensatedSum, Real};

/// Photon subtraction: a beam splitter taps the signal and the reflected
/// part is counted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtractionSpec<T = f64> {
    pub bs: BeamSplitterConfig<T>,
    pub det: DetectorConfig<T>,
    pub k: usize,
}

impl<T: Real> SubtractionSpec<T> {
    pub fn new(bs: BeamSplitterConfig<T>, det: DetectorConfig<T>, k: usize) -> Result<Self> {
        det.check_clicks(k)?;
        Ok(Self { bs, det, k })
    }

    /// `η′ = η r²/t²`, the efficiency seen by the attenuated P function.
    pub fn eta_eff(&self) -> T {
        let t = self.bs.t();
        self.det.eta() * (T::one() - t * t) / (t * t)
    }

    pub fn with_clicks(&self, k: usize) -> Result<Self> {
        Self::new(self.bs, self.det, k)
    }
}

/// Photon addition: a two-mode squeezer acts on signal and vacuum idler,
/// and the idler is counted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditionSpec<T = f64> {
    pub sq: SqueezerConfig<T>,
    pub det: DetectorConfig<T>,
    pub k: usize,
}

impl<T: Real> AdditionSpec<T> {
    pub fn new(sq: SqueezerConfig<T>, det: DetectorConfig<T>, k: usize) -> Result<Self> {
        det.check_clicks(k)?;
        if sq.xi() == T::zero() {
            return Err(Error::domain("addition needs ξ > 0: without squeezing no pairs are generated"));
        }
        Ok(Self { sq, det, k })
    }

    /// `η′ = η ν²/μ²`.
    pub fn eta_eff(&self) -> T {
        let mu = self.sq.mu();
        self.det.eta() * self.sq.nu2() / (mu * mu)
    }

    pub fn with_clicks(&self, k: usize) -> Result<Self> {
        Self::new(self.sq, self.det, k)
    }
}

/// Addition with `k₁` clicks followed by subtraction with `k₂` clicks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplifySpec<T = f64> {
    pub add: AdditionSpec<T>,
    pub sub: SubtractionSpec<T>,
}

impl<T: Real> AmplifySpec<T> {
    pub fn new(add: AdditionSpec<T>, sub: SubtractionSpec<T>) -> Result<Self> {
        if add.det.eta() == T::one() {
            return Err(Error::Singular(
                "an ideal addition detector (η₁ = 1) conditions coherent inputs onto states whose P function \
                 contains δ-shaped contributions; use η₁ < 1"
                    .into(),
            ));
        }
        Ok(Self { add, sub })
    }

    pub fn with_clicks(&self, k1: usize, k2: usize) -> Result<Self> {
        Self::new(self.add.with_clicks(k1)?, self.sub.with_clicks(k2)?)
    }
}

fn outcome<T: Real>(state: PhaseSpaceMixture<T>) -> ProcessOutcome<PhaseSpaceMixture<T>, T> {
    let probability = state.integral();
    ProcessOutcome { state, probability }
}

/// Heralds mode A on `k` clicks of the detector watching mode B.
pub fn herald(input: &TwoModeDensityMatrix, det: &DetectorConfig<f64>, k: usize) -> Result<ProcessOutcome<DensityMatrix>> {
    condition_on_clicks(input, det, k)
}

/// Photon-number distribution heralded from a phase-diffused pair state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeraldedDistribution<T = f64> {
    /// `(1−ω) ωⁿ D^{1−η,η}_{k,n}`
    pub unnormalized: Vec<T>,
    /// The same, divided by the click probability (all zeros if it vanishes).
    pub normalized: Vec<T>,
    pub probability: T,
}

/// Heralded distribution for `(1−ω) Σ ωⁿ |n,n⟩⟨n,n|`, truncated where the
/// remaining weight is below `1e−18` of the first possible contribution.
pub fn herald_tmsv_distribution<T: Real>(omega: T, det: &DetectorConfig<T>, k: usize) -> Result<HeraldedDistribution<T>> {
    if !(omega > T::zero() && omega < T::one()) {
        return Err(Error::domain(format!("pair parameter ω = {omega} outside (0, 1)")));
    }
    det.check_clicks(k)?;
    let span = (T::lit(1e-18).ln() / omega.ln()).ceil().to_usize().unwrap_or(0);
    let cutoff = k + span + 1;
    let table = det.table(k, cutoff)?;
    let mut w = T::one() - omega;
    let mut unnormalized = Vec::with_capacity(cutoff);
    for n in 0..cutoff {
        unnormalized.push(w * table.row(k)[n]);
        w = w * omega;
    }
    let probability = unnormalized.iter().copied().collect::<CompensatedSum<T>>().value();
    let normalized = if probability > T::zero() {
        unnormalized.iter().map(|&p| p / probability).collect()
    } else {
        vec![T::zero(); cutoff]
    };
    Ok(HeraldedDistribution { unnormalized, normalized, probability })
}

/// Conditional P function after `k` subtraction clicks:
/// click factor with `η′ = ηr²/t²` applied to the attenuated input.
pub fn subtract<T: Real>(p_in: &PhaseSpaceMixture<T>, spec: &SubtractionSpec<T>) -> Result<ProcessOutcome<PhaseSpaceMixture<T>, T>> {
    let lost = p_in.scale_loss(spec.bs.t())?;
    Ok(outcome(lost.multiply_click_factor(spec.eta_eff(), spec.det.n(), spec.k)?))
}

/// Conditional P function after `k` addition clicks: the input is
/// convolved with the amplifier noise, and the click factor with
/// `η′ = ην²/μ²` multiplies its normally ordered symbol.
pub fn add<T: Real>(p_in: &PhaseSpaceMixture<T>, spec: &AdditionSpec<T>) -> Result<ProcessOutcome<PhaseSpaceMixture<T>, T>> {
    let noisy = p_in.convolve_noise(spec.sq.mu())?;
    let symbol = noisy.to_normal_symbol().multiply_click_factor(spec.eta_eff(), spec.det.n(), spec.k)?;
    Ok(outcome(symbol.to_p_function()?))
}

/// `(k₁, k₂)`-conditioned output: addition, then subtraction.
pub fn amplify<T: Real>(p_in: &PhaseSpaceMixture<T>, spec: &AmplifySpec<T>) -> Result<ProcessOutcome<PhaseSpaceMixture<T>, T>> {
    let added = add(p_in, &spec.add)?;
    subtract(&added.state, &spec.sub)
}

/// Closed-form output for a coherent input `|β⟩`: one Gaussian per
/// `(j₁, j₂)` with
///
/// ```text
/// ε  = η₁(1 − j₁/N₁)
/// f  = C(N₁,k₁)C(N₂,k₂)C(k₁,j₁)C(k₂,j₂)(−1)^{k₁−j₁+k₂−j₂} / (t²ν²(1−ε))
/// λ₂ = (1 + εν²)/(t²ν²(1−ε)) + η₂r²(1 − j₂/N₂)/t²
/// λ₁ = μ/(tν²(1−ε))
/// λ₀ = 1 + 1/(ν²(1−ε))
/// P(α) = Σ (f/π) exp(−λ₂|α|² + 2λ₁Re(β*α) − λ₀|β|²)
/// ```
///
/// Completing the square gives centers `λ₁β/λ₂`.
pub fn amplify_coherent_closed_form<T: Real>(beta: Complex<T>, spec: &AmplifySpec<T>) -> Result<ProcessOutcome<PhaseSpaceMixture<T>, T>> {
    let (add, sub) = (&spec.add, &spec.sub);
    let (n1, k1, eta1) = (add.det.n(), add.k, add.det.eta());
    let (n2, k2, eta2) = (sub.det.n(), sub.k, sub.det.eta());
    let (mu, nu2) = (add.sq.mu(), add.sq.nu2());
    let (t, r) = (sub.bs.t(), sub.bs.r());
    let (t2, r2) = (t * t, r * r);
    let b2 = beta.norm_sqr();
    let outer = binomial::<T>(n1, k1) * binomial::<T>(n2, k2);
    let mut gaussians = Vec::with_capacity((k1 + 1) * (k2 + 1));
    for j1 in 0..=k1 {
        let eps = eta1 * (T::one() - T::from_count(j1) / T::from_count(n1));
        let keep = T::one() - eps;
        for j2 in 0..=k2 {
            let sign = if (k1 - j1 + k2 - j2) % 2 == 0 { T::one() } else { -T::one() };
            let f = sign * outer * binomial::<T>(k1, j1) * binomial::<T>(k2, j2) / (t2 * nu2 * keep);
            let lambda2 = (T::one() + eps * nu2) / (t2 * nu2 * keep)
                + eta2 * r2 * (T::one() - T::from_count(j2) / T::from_count(n2)) / t2;
            let lambda1 = mu / (t * nu2 * keep);
            let lambda0 = T::one() + (nu2 * keep).recip();
            gaussians.push(GaussianTerm {
                c: f / T::PI() * ((lambda1 * lambda1 / lambda2 - lambda0) * b2).exp(),
                z: beta * (lambda1 / lambda2),
                a: lambda2,
            });
        }
    }
    Ok(outcome(PhaseSpaceMixture { gaussians, deltas: Vec::new() }))
}

/// `(N₁+1)×(N₂+1)` table of `(k₁, k₂)` probabilities for a coherent input;
/// the click numbers in `template` are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable<T = f64> {
    /// `rows[k₁][k₂]`
    pub rows: Vec<Vec<T>>,
}

impl<T: Real> ProbabilityTable<T> {
    pub fn total(&self) -> T {
        self.rows.iter().flatten().copied().collect::<CompensatedSum<T>>().value()
    }
}

pub fn probability_table<T: Real>(template: &AmplifySpec<T>, beta: Complex<T>) -> Result<ProbabilityTable<T>> {
    let (n1, n2) = (template.add.det.n(), template.sub.det.n());
    let p_in = PhaseSpaceMixture::coherent(beta);
    let rows = (0..=n1)
        .into_par_iter()
        .map(|k1| {
            (0..=n2)
                .map(|k2| Ok(amplify(&p_in, &template.with_clicks(k1, k2)?)?.probability))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilityTable { rows })
}

fn check_nbar<T: Real>(nbar: T) -> Result<()> {
    if !(nbar >= T::zero() && nbar.is_finite()) {
        return Err(Error::domain(format!("mean photon number {nbar} must be finite and non-negative")));
    }
    Ok(())
}

// C(N,k) Σ_j C(k,j)(−1)^{k−j} γ_j⁻¹ exp(−κ_j|α₀|²/γ_j) with
// γ_j = 1 + κ_j·s and κ_j = g(1 − j/N).
fn displaced_thermal_probability<T: Real>(alpha0: Complex<T>, n: usize, k: usize, g: T, s: T) -> T {
    let x = alpha0.norm_sqr();
    let outer = binomial::<T>(n, k);
    let mut sum = CompensatedSum::new();
    for j in 0..=k {
        let sign = if (k - j) % 2 == 0 { T::one() } else { -T::one() };
        let kappa = g * (T::one() - T::from_count(j) / T::from_count(n));
        let gamma = T::one() + kappa * s;
        sum.add(sign * binomial::<T>(k, j) / gamma * (-kappa * x / gamma).exp());
    }
    outer * sum.value()
}

/// Probability of `k` subtraction clicks for a displaced thermal input,
/// with `γ_j = 1 + ηr²n̄(1 − j/N)`. Written so that `n̄ = 0` (coherent
/// input) needs no limit: the exponent is `−ηr²(1−j/N)|α₀|²/γ_j`.
pub fn probability_subtraction_displaced_thermal<T: Real>(alpha0: Complex<T>, nbar: T, spec: &SubtractionSpec<T>) -> Result<T> {
    check_nbar(nbar)?;
    let r = spec.bs.r();
    let g = spec.det.eta() * r * r;
    Ok(displaced_thermal_probability(alpha0, spec.det.n(), spec.k, g, nbar))
}

/// Probability of `k` addition clicks for a displaced thermal input,
/// with `γ_j = 1 + ην²(n̄+1)(1 − j/N)` and exponent `−ην²(1−j/N)|α₀|²/γ_j`.
pub fn probability_addition_displaced_thermal<T: Real>(alpha0: Complex<T>, nbar: T, spec: &AdditionSpec<T>) -> Result<T> {
    check_nbar(nbar)?;
    let g = spec.det.eta() * spec.sq.nu2();
    Ok(displaced_thermal_probability(alpha0, spec.det.n(), spec.k, g, nbar + T::one()))
}

/// `σ² = ν²(1−η)/(1+ην²)`, the thermal variance left after a no-click
/// addition event on a coherent input.
pub fn effective_sigma2<T: Real>(sq: &SqueezerConfig<T>, eta: T) -> Result<T> {
    if !(eta >= T::zero() && eta <= T::one()) {
        return Err(Error::domain(format!("efficiency {eta} outside [0, 1]")));
    }
    let nu2 = sq.nu2();
    Ok(nu2 * (T::one() - eta) / (T::one() + eta * nu2))
}

/// Squeezer producing a given `σ²` at efficiency `η`:
/// `ν² = σ²/(1 − η − ησ²)`.
pub fn squeezer_for_sigma2<T: Real>(sigma2: T, eta: T) -> Result<SqueezerConfig<T>> {
    if !(eta >= T::zero() && eta <= T::one()) || !(sigma2 >= T::zero()) {
        return Err(Error::domain("need 0 ≤ η ≤ 1 and σ² ≥ 0"));
    }
    let denom = T::one() - eta - eta * sigma2;
    if !(denom > T::zero()) {
        return Err(Error::domain(format!("σ² = {sigma2} is unreachable at η = {eta}")));
    }
    SqueezerConfig::new((sigma2 / denom).sqrt().asinh())
}

/// Fock-space subtraction for every click number, with the reflected mode
/// truncated at `d_b`.
pub fn subtract_fock(
    rho: &DensityMatrix,
    bs: &BeamSplitterConfig<f64>,
    det: &DetectorConfig<f64>,
    d_b: usize,
) -> Result<Vec<ProcessOutcome<DensityMatrix>>> {
    let joint = apply_beam_splitter(&TwoModeDensityMatrix::with_vacuum(rho, d_b)?, bs)?;
    condition_on_all_clicks(&joint, det)
}

/// Fock-space addition for every click number, with the idler truncated
/// at `d_b`.
pub fn add_fock(
    rho: &DensityMatrix,
    sq: &SqueezerConfig<f64>,
    det: &DetectorConfig<f64>,
    d_b: usize,
) -> Result<Vec<ProcessOutcome<DensityMatrix>>> {
    let joint = apply_two_mode_squeezer(&TwoModeDensityMatrix::with_vacuum(rho, d_b)?, sq)?;
    condition_on_all_clicks(&joint, det)
}

/// Fock-space `(k₁, k₂)` amplification of `rho`. The signal cutoff is that
/// of `rho`; idlers are truncated at `d_idlers`.
pub fn amplify_fock(rho: &DensityMatrix, spec: &AmplifySpec<f64>, d_idlers: (usize, usize)) -> Result<ProcessOutcome<DensityMatrix>> {
    let joint = apply_two_mode_squeezer(&TwoModeDensityMatrix::with_vacuum(rho, d_idlers.0)?, &spec.add.sq)?;
    let added = condition_on_clicks(&joint, &spec.add.det, spec.add.k)?;
    if added.probability <= 0.0 {
        let d = rho.cutoff();
        return Ok(ProcessOutcome { state: DensityMatrix::from_matrix(DMatrix::zeros(d, d))?, probability: 0.0 });
    }
    let joint = apply_beam_splitter(&TwoModeDensityMatrix::with_vacuum(&added.state, d_idlers.1)?, &spec.sub.bs)?;
    condition_on_clicks(&joint, &spec.sub.det, spec.sub.k)
}
