//! The combinatorial kernel `D^{τ,σ}_{k,m}` of click counting.
//!
//! For `N` equally illuminated on-off diodes the kernel is
//!
//! ```text
//! D_{k,m} = C(N,k) Σ_{j=0}^{k} C(k,j) (-1)^{k-j} (τ + σ j / N)^m
//! ```
//!
//! With `τ = 1-η` and `σ = η` it is the probability of `k` clicks given `m`
//! incident photons. The alternating sum cancels catastrophically for large
//! `m`, so production code uses the two-term recursion
//!
//! ```text
//! D_{k,m} = (τ + σ k/N) D_{k,m-1} + σ (N-k+1)/N D_{k-1,m-1}
//! ```
//!
//! which only mixes non-negative terms in the probability regime. The direct
//! sum is kept for validation, evaluated in double-double arithmetic
//! ([`d_direct`]) or exactly over the rationals ([`d_exact`]).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{binomial, Field, Real};

/// Detector size `N` together with the two real parameters of the kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct DSymbolParams<T> {
    n: usize,
    tau: T,
    sigma: T,
}

impl<T: Field> DSymbolParams<T> {
    pub fn new(n: usize, tau: T, sigma: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("D-symbol needs at least one diode"));
        }
        Ok(Self { n, tau, sigma })
    }

    /// Click-probability parameters `τ = 1-η`, `σ = η`.
    pub fn click(n: usize, eta: T) -> Result<Self> {
        Self::new(n, T::one() - eta.clone(), eta)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> &T {
        &self.tau
    }

    pub fn sigma(&self) -> &T {
        &self.sigma
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k > self.n {
            return Err(Error::domain(format!("click number {k} exceeds N = {}", self.n)));
        }
        Ok(())
    }

}

impl<T: Real> DSymbolParams<T> {
    fn check_finite(&self) -> Result<()> {
        if !self.tau.is_finite() || !self.sigma.is_finite() {
            return Err(Error::domain("tau and sigma must be finite"));
        }
        Ok(())
    }
}

impl DSymbolParams<BigRational> {
    /// Exact rational image of floating point parameters.
    pub fn exact_from<T: Real>(p: &DSymbolParams<T>) -> Result<Self> {
        let conv = |x: &T| {
            BigRational::from_float(x.as_f64()).ok_or_else(|| Error::domain("non-finite parameter"))
        };
        Ok(DSymbolParams { n: p.n, tau: conv(&p.tau)?, sigma: conv(&p.sigma)? })
    }
}

/// The alternating direct sum evaluated with the arithmetic of `T`.
///
/// Exact for rationals; for plain floats this is the cancellation-prone
/// textbook evaluation and is only trustworthy for small `m`.
pub fn d_direct_sum<T: Field>(params: &DSymbolParams<T>, k: usize, m: usize) -> Result<T> {
    params.check_k(k)?;
    let n = T::from_count(params.n);
    let mut acc = T::zero();
    for j in 0..=k {
        let base = params.tau.clone() + params.sigma.clone() * T::from_count(j) / n.clone();
        let term = binomial::<T>(k, j) * num_traits::pow(base, m);
        if (k - j) % 2 == 0 {
            acc = acc + term;
        } else {
            acc = acc - term;
        }
    }
    Ok(binomial::<T>(params.n, k) * acc)
}

/// Direct sum with error-free (double-double) accumulation.
///
/// Every base `τ + σj/N`, every power and every partial sum carries about
/// 106 significant bits, so the result stays accurate to working precision
/// as long as the cancellation ratio `Σ|terms| / |D|` is below ~1e21.
/// Only additions and multiplications are performed in double-double
/// arithmetic; `1/N` is split by hand with a fused multiply-add.
pub fn d_direct<T: Real>(params: &DSymbolParams<T>, k: usize, m: usize) -> Result<T> {
    params.check_finite()?;
    params.check_k(k)?;
    let n = params.n as f64;
    let inv_n = DoubleDouble::recip(n);
    let tau = DoubleDouble::from(params.tau.as_f64());
    let sigma = DoubleDouble::from(params.sigma.as_f64());

    let inner = pascal_row(k);
    let mut acc = DoubleDouble::from(0.0);
    for (j, c) in inner.iter().enumerate() {
        let base = tau + sigma * (DoubleDouble::from(j as f64) * inv_n);
        let term = *c * base.powu(m);
        if (k - j) % 2 == 0 {
            acc = acc + term;
        } else {
            acc = acc + (-term);
        }
    }
    let value = pascal_row(params.n)[k] * acc;
    Ok(T::lit(value.to_f64()))
}

// Row n of Pascal's triangle by additions only; exact below 2^106.
fn pascal_row(n: usize) -> Vec<DoubleDouble> {
    let mut row = vec![DoubleDouble::from(1.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(DoubleDouble::from(1.0));
        next.extend(row.windows(2).map(|w| w[0] + w[1]));
        next.push(DoubleDouble::from(1.0));
        row = next;
    }
    row
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        (s, b - (s - a))
    }

    /// `1/x` to double-double accuracy: the residual `1 - x·hi` is exact
    /// under a fused multiply-add.
    fn recip(x: f64) -> Self {
        let hi = 1.0 / x;
        let lo = (-hi).mul_add(x, 1.0) / x;
        let (hi, lo) = Self::quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    fn powu(self, mut e: usize) -> Self {
        let mut result = Self::from(1.0);
        let mut base = self;
        while e > 0 {
            if e & 1 == 1 {
                result = result * base;
            }
            base = base * base;
            e >>= 1;
        }
        result
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl From<f64> for DoubleDouble {
    fn from(hi: f64) -> Self {
        Self { hi, lo: 0.0 }
    }
}

impl std::ops::Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl std::ops::Add for DoubleDouble {
    type Output = Self;
    // IEEE-style addition: stays accurate under cancellation.
    fn add(self, rhs: Self) -> Self {
        let (s1, s2) = Self::two_sum(self.hi, rhs.hi);
        let (t1, t2) = Self::two_sum(self.lo, rhs.lo);
        let (s1, s2) = Self::quick_two_sum(s1, s2 + t1);
        let (hi, lo) = Self::quick_two_sum(s1, s2 + t2);
        Self { hi, lo }
    }
}

impl std::ops::Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let p = self.hi * rhs.hi;
        let e = self.hi.mul_add(rhs.hi, -p);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = Self::quick_two_sum(p, e);
        Self { hi, lo }
    }
}

/// Exact rational evaluation of the direct sum.
pub fn d_exact(params: &DSymbolParams<BigRational>, k: usize, m: usize) -> Result<BigRational> {
    params.check_k(k)?;
    let (numerators, denominator) = integer_bases(params, k);
    let mut acc = BigInt::zero();
    for (j, e) in numerators.iter().enumerate() {
        let term = binomial::<BigRational>(k, j).to_integer() * num_traits::pow(e.clone(), m);
        if (k - j) % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    let scale = binomial::<BigRational>(params.n, k);
    Ok(scale * BigRational::new(acc, num_traits::pow(denominator, m)))
}

// Writes τ + σj/N = e_j / Q over a common integer denominator.
fn integer_bases(params: &DSymbolParams<BigRational>, k: usize) -> (Vec<BigInt>, BigInt) {
    let n = BigInt::from(params.n);
    let (a, b) = (params.tau.numer(), params.tau.denom());
    let (c, d) = (params.sigma.numer(), params.sigma.denom());
    let q = b * d * &n;
    let bases = (0..=k).map(|j| a * d * &n + c * b * BigInt::from(j)).collect();
    (bases, q)
}

/// Dense, immutable table of `D_{k,m}` for `0 ≤ k ≤ kmax`, `0 ≤ m ≤ mmax`.
#[derive(Clone, Debug)]
pub struct DSymbolTable<T> {
    params: DSymbolParams<T>,
    kmax: usize,
    mmax: usize,
    values: Vec<T>,
}

impl<T: Field> DSymbolTable<T> {
    pub fn params(&self) -> &DSymbolParams<T> {
        &self.params
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn mmax(&self) -> usize {
        self.mmax
    }

    /// `D_{k,m}`; zero for `k > m` even outside the stored range, `None` if
    /// the entry was not tabulated.
    pub fn get(&self, k: usize, m: usize) -> Option<T> {
        if k > m || k > self.params.n {
            return Some(T::zero());
        }
        if k > self.kmax || m > self.mmax {
            return None;
        }
        Some(self.values[k * (self.mmax + 1) + m].clone())
    }

    /// Row `k` as a slice over `m = 0..=mmax`.
    pub fn row(&self, k: usize) -> &[T] {
        let w = self.mmax + 1;
        &self.values[k * w..(k + 1) * w]
    }
}

/// Fills a table by the two-term recursion from the initial values
/// `D_{0,0}=1`, `D_{k,0}=0` (k>0), `D_{0,m}=τ^m`.
pub fn d_recursive<T: Field>(
    params: &DSymbolParams<T>,
    kmax: usize,
    mmax: usize,
) -> Result<DSymbolTable<T>> {
    params.check_k(kmax)?;
    let w = mmax + 1;
    let n = T::from_count(params.n);
    let mut values = vec![T::zero(); (kmax + 1) * w];
    values[0] = T::one();
    for m in 1..=mmax {
        values[m] = values[m - 1].clone() * params.tau.clone();
    }
    for k in 1..=kmax {
        let stay = params.tau.clone() + params.sigma.clone() * T::from_count(k) / n.clone();
        let enter = params.sigma.clone() * T::from_count(params.n - k + 1) / n.clone();
        // D_{k,m} vanishes for m < k, so the loop starts on the diagonal.
        for m in k..=mmax {
            let prev_same = values[k * w + m - 1].clone();
            let prev_lower = values[(k - 1) * w + m - 1].clone();
            values[k * w + m] = stay.clone() * prev_same + enter.clone() * prev_lower;
        }
    }
    Ok(DSymbolTable { params: params.clone(), kmax, mmax, values })
}

/// Exact table built from the direct sum, for validating [`d_recursive`].
pub fn d_exact_table(
    params: &DSymbolParams<BigRational>,
    kmax: usize,
    mmax: usize,
) -> Result<DSymbolTable<BigRational>> {
    params.check_k(kmax)?;
    let w = mmax + 1;
    let mut values = vec![BigRational::zero(); (kmax + 1) * w];
    for k in 0..=kmax {
        let (bases, q) = integer_bases(params, k);
        let coeffs: Vec<BigInt> =
            (0..=k).map(|j| binomial::<BigRational>(k, j).to_integer()).collect();
        let scale = binomial::<BigRational>(params.n, k);
        let mut powers = vec![BigInt::one(); k + 1];
        let mut qpow = BigInt::one();
        for m in 0..=mmax {
            if m > 0 {
                for (p, e) in powers.iter_mut().zip(&bases) {
                    *p *= e;
                }
                qpow *= &q;
            }
            let mut acc = BigInt::zero();
            for (j, (c, p)) in coeffs.iter().zip(&powers).enumerate() {
                if (k - j) % 2 == 0 {
                    acc += c * p;
                } else {
                    acc -= c * p;
                }
            }
            values[k * w + m] = &scale * BigRational::new(acc, qpow.clone());
        }
    }
    Ok(DSymbolTable { params: params.clone(), kmax, mmax, values })
}

/// Deviation of `value` from `exact`, measured relative to
/// `max(|exact|, floor)`. With `floor = abs_tol / rel_tol` a result below
/// `rel_tol` means "relatively close, or absolutely close near zero".
pub fn relative_deviation(value: f64, exact: &BigRational, floor: f64) -> f64 {
    let reference = rational_to_f64(exact);
    (value - reference).abs() / reference.abs().max(floor)
}

/// Rational to `f64` with correct scaling for huge numerators and
/// denominators (underflows to zero below the subnormal range).
pub fn rational_to_f64(x: &BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap_or(f64::NAN)
}
