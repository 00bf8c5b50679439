//! Click-counting POVM elements and the photoelectric comparison measure.

use serde::{Deserialize, Serialize};

use crate::dsymbol::{d_recursive, DSymbolParams, DSymbolTable};
use crate::error::{Error, Result};
use crate::scalar::{binomial, CompensatedSum, Real};

/// A system of `n` equally illuminated on-off diodes with efficiency `eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig<T = f64> {
    n: usize,
    eta: T,
}

impl<T: Real> DetectorConfig<T> {
    pub fn new(n: usize, eta: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("detector needs at least one diode"));
        }
        if !(eta >= T::zero() && eta <= T::one()) {
            return Err(Error::domain(format!("efficiency {eta} outside [0, 1]")));
        }
        Ok(Self { n, eta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn check_clicks(&self, k: usize) -> Result<()> {
        if k > self.n {
            return Err(Error::domain(format!("{k} clicks impossible with {} diodes", self.n)));
        }
        Ok(())
    }

    /// Kernel table `D^{1-η,η}_{k,m}` for all `k ≤ kmax`, `m < cutoff`.
    pub fn table(&self, kmax: usize, cutoff: usize) -> Result<DSymbolTable<T>> {
        let params = DSymbolParams::click(self.n, self.eta)?;
        d_recursive(&params, kmax.min(self.n), cutoff.saturating_sub(1))
    }
}

/// Probabilities `c_k` of `k = 0..=N` clicks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickDistribution<T = f64> {
    pub probs: Vec<T>,
}

impl<T: Real> ClickDistribution<T> {
    pub fn total(&self) -> T {
        self.probs.iter().copied().collect::<CompensatedSum<T>>().value()
    }

    pub fn mean(&self) -> T {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| T::from_count(k) * p)
            .collect::<CompensatedSum<T>>()
            .value()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Click,
    Photoelectric,
}

/// Diagonal of a POVM element in the Fock basis, `weights[m] = ⟨m|Π|m⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalPovmElement<T = f64> {
    pub weights: Vec<T>,
    pub kind: ElementKind,
    pub k: usize,
    pub eta: T,
    /// Diode count; absent for photoelectric elements.
    pub n: Option<usize>,
}

impl<T: Real> DiagonalPovmElement<T> {
    /// `tr(ρ Π)` for a photon-number distribution.
    pub fn expectation(&self, photon_dist: &[T]) -> T {
        self.weights
            .iter()
            .zip(photon_dist)
            .map(|(&w, &p)| w * p)
            .collect::<CompensatedSum<T>>()
            .value()
    }
}

pub fn click_povm_element<T: Real>(
    det: &DetectorConfig<T>,
    k: usize,
    cutoff: usize,
) -> Result<DiagonalPovmElement<T>> {
    det.check_clicks(k)?;
    let table = det.table(k, cutoff.max(1))?;
    let weights = table.row(k)[..cutoff].to_vec();
    Ok(DiagonalPovmElement { weights, kind: ElementKind::Click, k, eta: det.eta, n: Some(det.n) })
}

/// All `N+1` click elements sharing one kernel table.
pub fn click_povm<T: Real>(det: &DetectorConfig<T>, cutoff: usize) -> Result<Vec<DiagonalPovmElement<T>>> {
    let table = det.table(det.n, cutoff.max(1))?;
    Ok((0..=det.n)
        .map(|k| DiagonalPovmElement {
            weights: table.row(k)[..cutoff].to_vec(),
            kind: ElementKind::Click,
            k,
            eta: det.eta,
            n: Some(det.n),
        })
        .collect())
}

/// Click counting statistics `c_k = Σ_m D^{1-η,η}_{k,m} p_m`.
pub fn click_statistics<T: Real>(photon_dist: &[T], det: &DetectorConfig<T>) -> Result<ClickDistribution<T>> {
    if let Some(bad) = photon_dist.iter().find(|p| !(**p >= T::zero())) {
        return Err(Error::domain(format!("photon probability {bad} is negative or NaN")));
    }
    let total = photon_dist.iter().copied().collect::<CompensatedSum<T>>().value();
    if total > T::one() + T::lit(1e-10) {
        return Err(Error::domain(format!("photon distribution sums to {total} > 1")));
    }
    let table = det.table(det.n, photon_dist.len().max(1))?;
    let probs = (0..=det.n)
        .map(|k| {
            table
                .row(k)
                .iter()
                .zip(photon_dist)
                .map(|(&d, &p)| d * p)
                .collect::<CompensatedSum<T>>()
                .value()
        })
        .collect();
    Ok(ClickDistribution { probs })
}

/// Poissonian (photoelectric) element, `weights[m] = C(m,k) η^k (1-η)^{m-k}`.
pub fn photoelectric_element<T: Real>(eta: T, k: usize, cutoff: usize) -> Result<DiagonalPovmElement<T>> {
    if !(eta >= T::zero() && eta <= T::one()) {
        return Err(Error::domain(format!("efficiency {eta} outside [0, 1]")));
    }
    let weights = photoelectric_weights(eta, k, cutoff);
    Ok(DiagonalPovmElement { weights, kind: ElementKind::Photoelectric, k, eta, n: None })
}

// Built by the ratio w_{m+1}/w_m = (m+1)(1-η)/(m+1-k), so η = 1 gives an
// exact projector and no factorials overflow.
fn photoelectric_weights<T: Real>(eta: T, k: usize, cutoff: usize) -> Vec<T> {
    let mut weights = vec![T::zero(); cutoff];
    if k >= cutoff {
        return weights;
    }
    let loss = T::one() - eta;
    let mut w = eta.powi(k as i32);
    weights[k] = w;
    for m in k + 1..cutoff {
        w = w * loss * T::from_count(m) / T::from_count(m - k);
        weights[m] = w;
    }
    weights
}

/// Operator-norm distance between click and photoelectric elements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormDistance<T = f64> {
    /// Supremum over the scanned range `m < cutoff`.
    pub scanned: T,
    /// Photon number attaining the scanned supremum.
    pub argmax: usize,
    /// Analytic bound on the deviation for every `m ≥ cutoff`.
    pub tail_bound: T,
    /// `max(scanned, tail_bound)`, a certified upper bound on the norm
    /// that equals it whenever the tail bound is the smaller of the two.
    pub value: T,
}

/// `‖P_k − Π_k‖_op = sup_m |C(m,k)η^k(1−η)^{m−k} − D^{1−η,η}_{k,m}|`.
///
/// Both elements are diagonal, so the norm is a supremum over photon
/// numbers. The scan covers `m < cutoff`; beyond it both weights are
/// bounded analytically: the Poissonian weight is unimodal and the click
/// weight is at most `C(N,k) (1 − η(1 − k/N))^m` (all clicks inside one
/// fixed set of `k` diodes). For `k = N` the latter does not decay, which
/// is correct: `Π_N → 1` while `P_N → 0`.
pub fn operator_norm_distance<T: Real>(det: &DetectorConfig<T>, k: usize, cutoff: usize) -> Result<NormDistance<T>> {
    det.check_clicks(k)?;
    let zero = NormDistance { scanned: T::zero(), argmax: 0, tail_bound: T::zero(), value: T::zero() };
    // k = 0: both elements are (1-η)^m; η = 0 with k ≥ 1: both vanish.
    if k == 0 || (det.eta == T::zero()) {
        return Ok(zero);
    }
    let cutoff = cutoff.max(k + 1);
    let click = det.table(k, cutoff)?;
    let photo = photoelectric_weights(det.eta, k, cutoff);
    let (mut scanned, mut argmax) = (T::zero(), 0);
    for (m, (&d, &p)) in click.row(k).iter().zip(&photo).enumerate() {
        let diff = (p - d).abs();
        if diff > scanned {
            scanned = diff;
            argmax = m;
        }
    }

    let eta = det.eta;
    let tail_start = cutoff;
    // Poissonian weight decreases once m + 1 ≥ k/η.
    let mode = (T::from_count(k) / eta - T::one()).ceil().to_usize().unwrap_or(usize::MAX);
    let photo_tail = if tail_start >= mode {
        photoelectric_weights(eta, k, tail_start + 1)[tail_start]
    } else {
        photoelectric_weights(eta, k, mode + 1)[mode]
    };
    let ratio = T::one() - eta * (T::one() - T::from_count(k) / T::from_count(det.n));
    let click_tail =
        (binomial::<T>(det.n, k) * ratio.powi(tail_start.min(i32::MAX as usize) as i32)).min(T::one());
    let tail_bound = photo_tail.max(click_tail);
    Ok(NormDistance { scanned, argmax, tail_bound, value: scanned.max(tail_bound) })
}
