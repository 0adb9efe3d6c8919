//! Exponential sums: rational approximation and arcs, geometric and
//! Vinogradov-type sums, prime exponential sums and their fourth moment,
//! correlations of λ in short ranges, and the ternary convolution.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::arith::{liouville_values, PrimeList};
use crate::error::{Error, Result};
use crate::intervals::{window_l1, WindowKind, WindowSpec};
use crate::numerics::{dist_to_int, e, ComplexKahan, KahanSum};

pub use crate::characters::{
    additive_to_multiplicative, characters_mod, CharacterTable, Decomposition, DecompositionBlock,
};

/// `a/q` with `|α − a/q| ≤ 1/(qQ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalApprox {
    pub a: i64,
    pub q: u64,
    pub alpha: f64,
    pub big_q: f64,
}

impl RationalApprox {
    /// Checks the defining inequality in exact rational arithmetic.
    pub fn satisfies(&self) -> bool {
        let (Some(alpha), Some(big_q)) = (BigRational::from_float(self.alpha), BigRational::from_float(self.big_q))
        else {
            return false;
        };
        let approx = BigRational::new(BigInt::from(self.a), BigInt::from(self.q));
        (alpha - approx).abs() * BigInt::from(self.q) * big_q <= BigRational::one()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    Major,
    Minor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcLabel {
    pub kind: ArcKind,
    pub threshold: f64,
}

/// Major iff the denominator is at most `r`.
pub fn classify(approx: &RationalApprox, r: f64) -> ArcLabel {
    let kind = if approx.q as f64 <= r { ArcKind::Major } else { ArcKind::Minor };
    ArcLabel { kind, threshold: r }
}

/// First continued-fraction convergent `a/q` of the exact binary value of
/// `alpha` with `|α − a/q| ≤ 1/(qQ)`.
pub fn dirichlet_approx(alpha: f64, big_q: f64) -> Result<RationalApprox> {
    if !(big_q >= 1.0) || !big_q.is_finite() {
        return Err(Error::invalid(format!("Q must be a finite number >= 1, got {big_q}")));
    }
    let Some(exact) = BigRational::from_float(alpha) else {
        return Err(Error::invalid(format!("alpha must be finite, got {alpha}")));
    };
    let q_exact = BigRational::from_float(big_q).expect("finite");
    let one = BigRational::one();
    let (mut h1, mut h2) = (BigInt::one(), BigInt::zero());
    let (mut k1, mut k2) = (BigInt::zero(), BigInt::one());
    let mut x = exact.clone();
    loop {
        let a_i = x.floor().to_integer();
        let h = &a_i * &h1 + &h2;
        let k = &a_i * &k1 + &k2;
        let err = (&exact - BigRational::new(h.clone(), k.clone())).abs();
        if err * BigRational::from_integer(k.clone()) * &q_exact <= one {
            let a = h
                .to_i64()
                .ok_or_else(|| Error::Overflow(format!("numerator of approximation to {alpha} exceeds i64")))?;
            let q = k.to_u64().expect("denominators stay below Q");
            return Ok(RationalApprox { a, q, alpha, big_q });
        }
        let frac = &x - BigRational::from_integer(a_i);
        // A terminating expansion reproduces α exactly, which always satisfies.
        debug_assert!(!frac.is_zero());
        x = frac.recip();
        h2 = std::mem::replace(&mut h1, h);
        k2 = std::mem::replace(&mut k1, k);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricCheck {
    pub value: Complex64,
    pub bound: f64,
    pub integral: bool,
}

impl GeometricCheck {
    /// `|value| ≤ bound` up to a relative 10⁻¹² for rounding in the closed form.
    pub fn holds(&self) -> bool {
        self.value.norm() <= self.bound * (1.0 + 1e-12)
    }
}

/// `Σ_{m0≤m≤m1} e(βm)` in closed form, with the bound `min(len, (2/π)/d(β,ℤ))`.
pub fn geometric_sum_check(beta: f64, m0: i64, m1: i64) -> Result<GeometricCheck> {
    if m1 < m0 {
        return Err(Error::invalid(format!("empty range [{m0}, {m1}]")));
    }
    if !beta.is_finite() {
        return Err(Error::invalid("beta must be finite"));
    }
    let len = (m1 - m0 + 1) as f64;
    let d = dist_to_int(beta);
    if d == 0.0 {
        return Ok(GeometricCheck {
            value: Complex64::new(len, 0.0),
            bound: len,
            integral: true,
        });
    }
    let b = beta - beta.round();
    let phase = |m: i64| e((b * m as f64).rem_euclid(1.0));
    let value = (phase(m1 + 1) - phase(m0)) / (e(b) - Complex64::new(1.0, 0.0));
    Ok(GeometricCheck {
        value,
        bound: len.min(std::f64::consts::FRAC_2_PI / d),
        integral: false,
    })
}

/// Slack constant on the Vinogradov bound.
pub const VINOGRADOV_SLACK: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct VinogradovReport {
    pub value: f64,
    pub approx: RationalApprox,
    /// `C (N/q + 1)(X + q log q)`.
    pub bound: f64,
}

impl VinogradovReport {
    pub fn holds(&self) -> bool {
        self.value <= self.bound
    }
}

/// `Σ_{|n|≤N} min(X, 1/d(nα,ℤ))`, with q taken from the Dirichlet
/// approximation at `Q = max(N, X, 1)`.
pub fn vinogradov_sum(alpha: f64, n: u64, x_cap: f64) -> Result<VinogradovReport> {
    if !(x_cap > 0.0) || !x_cap.is_finite() {
        return Err(Error::invalid(format!("Xcap must be positive, got {x_cap}")));
    }
    let frac = alpha - alpha.floor();
    let term = |m: u64| {
        let d = dist_to_int(frac * m as f64);
        if d == 0.0 {
            x_cap
        } else {
            x_cap.min(1.0 / d)
        }
    };
    let mut acc = KahanSum::new();
    acc.add(x_cap);
    for m in 1..=n {
        acc.add(2.0 * term(m));
    }
    let approx = dirichlet_approx(alpha, (n as f64).max(x_cap).max(1.0))?;
    let q = approx.q as f64;
    let bound = VINOGRADOV_SLACK * (n as f64 / q + 1.0) * (x_cap + q * q.ln());
    Ok(VinogradovReport {
        value: acc.value(),
        approx,
        bound,
    })
}

/// `(1/(hX)) Σ_{X<x≤2X} |Σ_{x<n≤x+h} λ(n) e(αn)|`.
pub fn exp_sum_avg(x_cap: u64, h: u64, alpha: f64) -> Result<f64> {
    let spec = WindowSpec::new(WindowKind::Additive, x_cap, h as f64)?;
    let (lo, hi) = spec.value_range();
    let lam = liouville_values(lo, hi)?;
    let frac = alpha - alpha.floor();
    let vals: Vec<Complex64> = lam
        .par_iter()
        .enumerate()
        .map(|(i, &l)| e((frac * (lo + i as u64) as f64).fract()) * l as f64)
        .collect();
    window_l1(&spec, &vals, lo)
}

/// `P_h(α) = Σ_{p≤h} e(pα)`.
pub fn prime_exp_sum(h: u64, alpha: f64) -> Result<Complex64> {
    if h < 2 {
        return Err(Error::invalid(format!("h must be at least 2, got {h}")));
    }
    let primes = PrimeList::new(h)?;
    let frac = alpha - alpha.floor();
    let mut acc = ComplexKahan::new();
    for &p in primes.primes() {
        acc.add(e((frac * p as f64).fract()));
    }
    Ok(acc.value())
}

/// `P_h(k/m)` for `k = 0..m`, via one inverse FFT.
pub fn prime_sum_samples(h: u64, m: usize) -> Result<Vec<Complex64>> {
    if m == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let primes = PrimeList::new(h.max(2))?;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for &p in primes.primes() {
        buf[(p % m as u64) as usize] += 1.0;
    }
    FftPlanner::<f64>::new().plan_fft_inverse(m).process(&mut buf);
    Ok(buf)
}

/// Exact `∫_0^1 |P_h(α)|⁴ dα = Σ_j r(j)²`, with r(j) the number of prime
/// pairs p, p' ≤ h with p' − p = j.
pub fn fourth_moment_primes(h: u64) -> Result<u128> {
    if h < 2 {
        return Err(Error::invalid(format!("h must be at least 2, got {h}")));
    }
    let primes = PrimeList::new(h)?;
    let ps = primes.primes();
    let r: Vec<u64> = (0..ps.len())
        .into_par_iter()
        .fold(
            || vec![0u64; h as usize + 1],
            |mut acc, i| {
                for &q in &ps[i + 1..] {
                    acc[(q - ps[i]) as usize] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; h as usize + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let r0 = ps.len() as u128;
    let off: u128 = r.iter().skip(1).map(|&c| (c as u128) * (c as u128)).sum();
    Ok(r0 * r0 + 2 * off)
}

/// Trapezoid (equispaced mean) of `|P_h|⁴` over `m ≥ 4h+4` points.
pub fn fourth_moment_by_sampling(h: u64, m: usize) -> Result<f64> {
    if (m as u64) < 4 * h + 4 {
        return Err(Error::invalid(format!("need at least 4h+4 = {} samples", 4 * h + 4)));
    }
    let s = prime_sum_samples(h, m)?;
    Ok(kahan_mean(s.iter().map(|z| z.norm_sqr().powi(2))))
}

fn kahan_mean(it: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = it.len();
    let mut acc = KahanSum::new();
    for v in it {
        acc.add(v);
    }
    acc.value() / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcMeasureReport {
    pub h: u64,
    pub epsilon: f64,
    /// `ε h / log h`.
    pub threshold: f64,
    pub grid_points: usize,
    pub cells: usize,
    pub measure: f64,
    /// Chebyshev bound `∫|P_h|⁴ / threshold⁴` on the true measure.
    pub chebyshev_bound: f64,
}

/// Grid measure of `{α ∈ [0,1) : |P_h(α)| > ε h / log h}`. A cell is kept
/// when the largest of its endpoint and midpoint samples is above the
/// threshold less the Bernstein bound on the variation within half a cell.
pub fn major_arc_measure(h: u64, epsilon: f64, grid_points: usize) -> Result<ArcMeasureReport> {
    if grid_points < 1000 {
        return Err(Error::invalid(format!("grid_points must be >= 1000, got {grid_points}")));
    }
    if h < 3 || !(epsilon > 0.0) {
        return Err(Error::invalid("major_arc_measure needs h >= 3 and epsilon > 0"));
    }
    let m = 2 * grid_points;
    let samples: Vec<f64> = prime_sum_samples(h, m)?.iter().map(|z| z.norm()).collect();
    let pi_h = samples[0];
    let threshold = epsilon * h as f64 / (h as f64).ln();
    let margin = std::f64::consts::TAU * h as f64 * pi_h / (2.0 * m as f64);
    let cut = threshold - margin;
    let cells = (0..grid_points)
        .into_par_iter()
        .filter(|&k| {
            let a = samples[2 * k];
            let b = samples[2 * k + 1];
            let c = samples[(2 * k + 2) % m];
            a.max(b).max(c) > cut
        })
        .count();
    let fourth = fourth_moment_primes(h)? as f64;
    Ok(ArcMeasureReport {
        h,
        epsilon,
        threshold,
        grid_points,
        cells,
        measure: cells as f64 / grid_points as f64,
        chebyshev_bound: fourth / threshold.powi(4),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusParseval {
    /// Mean of `|Σ a_j e(jα)|²` over the sample points.
    pub sampled: f64,
    /// `Σ|a_j|²`.
    pub exact: f64,
    pub points: usize,
}

impl TorusParseval {
    pub fn relative_error(&self) -> f64 {
        (self.sampled - self.exact).abs() / self.exact.max(f64::MIN_POSITIVE)
    }
}

/// Samples `|Σ_{j=0}^{J} a_j e(jα)|²` at 2J+2 equispaced points.
pub fn torus_parseval_check(coeffs: &[Complex64]) -> Result<TorusParseval> {
    if coeffs.is_empty() {
        return Err(Error::invalid("need at least one coefficient"));
    }
    let m = 2 * coeffs.len();
    let mut buf = coeffs.to_vec();
    buf.resize(m, Complex64::new(0.0, 0.0));
    FftPlanner::<f64>::new().plan_fft_inverse(m).process(&mut buf);
    Ok(parseval_from_samples(&buf, coeffs))
}

fn parseval_from_samples(samples: &[Complex64], coeffs: &[Complex64]) -> TorusParseval {
    TorusParseval {
        sampled: kahan_mean(samples.iter().map(|z| z.norm_sqr())),
        exact: kahan_mean(coeffs.iter().map(|z| z.norm_sqr())) * coeffs.len() as f64,
        points: samples.len(),
    }
}

/// Relative tolerance of the Parseval check inside the Fourier path.
pub const FFT_PARSEVAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationTable {
    pub x_cap: u64,
    pub h: u64,
    /// `c_j = Σ_{X<n, n+j≤2X} λ(n)λ(n+j)` for `0 ≤ j ≤ h`.
    pub values: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChowlaMethod {
    Naive,
    Fourier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChowlaReport {
    pub table: CorrelationTable,
    /// `(1/(hX²)) Σ_{1≤j≤h/2} c_j²`.
    pub stat: f64,
}

fn autocorrelation_naive(s: &[i8], h: usize) -> Vec<i64> {
    (0..=h)
        .into_par_iter()
        .map(|j| {
            if j >= s.len() {
                return 0;
            }
            s[..s.len() - j]
                .chunks(1 << 16)
                .zip(s[j..].chunks(1 << 16))
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x * y) as i32).sum::<i32>() as i64)
                .sum()
        })
        .collect()
}

fn autocorrelation_fourier(s: &[i8], h: usize) -> Result<Vec<i64>> {
    let m = (2 * s.len()).next_power_of_two();
    let mut buf: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    buf.resize(m, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(m).process(&mut buf);
    let coeffs: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    let check = parseval_from_samples(&buf, &coeffs);
    if check.relative_error() > FFT_PARSEVAL_TOLERANCE {
        return Err(Error::Precondition(format!(
            "spectrum fails Parseval: relative error {:.3e}",
            check.relative_error()
        )));
    }
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_forward(m).process(&mut buf);
    (0..=h)
        .map(|j| {
            let v = buf[j % m].re / m as f64;
            let r = v.round();
            if (v - r).abs() > 0.25 {
                return Err(Error::Precondition(format!("correlation c_{j} = {v} is not near an integer")));
            }
            Ok(if j < s.len() { r as i64 } else { 0 })
        })
        .collect()
}

/// Correlations of λ over (X, 2X] at shifts 0..=h and the averaged
/// second moment over 1 ≤ j ≤ h/2.
pub fn chowla_avg(x_cap: u64, h: u64, method: ChowlaMethod) -> Result<ChowlaReport> {
    if h < 1 || h > x_cap {
        return Err(Error::invalid(format!("chowla_avg needs 1 <= h <= X, got h = {h}, X = {x_cap}")));
    }
    let s = liouville_values(x_cap + 1, 2 * x_cap + 1)?;
    let values = match method {
        ChowlaMethod::Naive => autocorrelation_naive(&s, h as usize),
        ChowlaMethod::Fourier => autocorrelation_fourier(&s, h as usize)?,
    };
    let mut acc = KahanSum::new();
    for &c in &values[1..=(h / 2) as usize] {
        acc.add((c as f64) * (c as f64));
    }
    let x = x_cap as f64;
    Ok(ChowlaReport {
        table: CorrelationTable { x_cap, h, values },
        stat: acc.value() / (h as f64 * x * x),
    })
}

/// `Σ_{n≤N} λ(n)λ(n+j)`.
pub fn liouville_shift_sum(n: u64, j: u64) -> Result<i64> {
    let lam = liouville_values(1, n + j + 1)?;
    Ok(lam[..n as usize]
        .par_iter()
        .zip(lam[j as usize..].par_iter())
        .map(|(&a, &b)| (a * b) as i64)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimeShiftReport {
    pub value: i64,
    /// `value · log h / (hX)`.
    pub normalized: f64,
}

/// `Σ_{p≤h} Σ_{X<n≤2X} λ(n)λ(n+p)`.
pub fn prime_shift_correlation(x_cap: u64, h: u64) -> Result<PrimeShiftReport> {
    if h < 2 || h > x_cap {
        return Err(Error::invalid(format!("need 2 <= h <= X, got h = {h}, X = {x_cap}")));
    }
    let lam = liouville_values(x_cap + 1, 2 * x_cap + h + 1)?;
    let primes = PrimeList::new(h)?;
    let n = x_cap as usize;
    let value: i64 = primes
        .primes()
        .par_iter()
        .map(|&p| {
            lam[..n]
                .iter()
                .zip(&lam[p as usize..p as usize + n])
                .map(|(&a, &b)| (a * b) as i64)
                .sum::<i64>()
        })
        .sum();
    Ok(PrimeShiftReport {
        value,
        normalized: value as f64 * (h as f64).ln() / (h as f64 * x_cap as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl CauchyCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12)
    }
}

/// `Σ_n f(n+k) w(n)` for f, w supported on `[1, X]` (slice index n − 1).
fn shifted_product(f: &[Complex64], w: &[Complex64], k: i64) -> Complex64 {
    let x = f.len() as i64;
    let (start, end) = ((1 - k).max(1), (x - k).min(x));
    let mut acc = ComplexKahan::new();
    for n in start..=end {
        acc.add(f[(n + k - 1) as usize] * w[(n - 1) as usize]);
    }
    acc.value()
}

/// Both sides of the short-shift Cauchy–Schwarz inequality for f, g on [1, X].
pub fn cauchy_short_check(f: &[Complex64], g: &[Complex64], big_h: u64) -> Result<CauchyCheck> {
    let x = f.len();
    if x == 0 || g.len() != x {
        return Err(Error::invalid("f and g must be non-empty and of equal length"));
    }
    if big_h < 1 || big_h as usize > x {
        return Err(Error::invalid(format!("need 1 <= H <= X, got H = {big_h}")));
    }
    if f.iter().chain(g).any(|z| z.norm() > 1.0 + 1e-12) {
        return Err(Error::invalid("values must satisfy |f|, |g| <= 1"));
    }
    let hh = big_h as i64;
    let norm = big_h as f64 * (x as f64).powi(2);
    let fbar: Vec<Complex64> = f.iter().map(|z| z.conj()).collect();
    let lhs: f64 = (1..=hh).into_par_iter().map(|k| shifted_product(f, g, k).norm_sqr()).sum::<f64>() / norm;
    let rhs: f64 = (-hh..=hh).into_par_iter().map(|k| shifted_product(f, &fbar, k).norm_sqr()).sum::<f64>() / norm;
    Ok(CauchyCheck { lhs, rhs: rhs.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TernaryWeight {
    Unit,
    Liouville,
}

/// Largest N for the quadratic ternary path.
pub const TERNARY_MAX: u64 = 100_000;

/// `Σ_{a+b+c=N, a,b,c≥1} w(a)w(b)w(c)`.
pub fn ternary_sum(n: u64, weight: TernaryWeight) -> Result<i64> {
    if n > TERNARY_MAX {
        return Err(Error::Budget {
            what: "ternary sum N",
            requested: n as u128,
            limit: TERNARY_MAX as u128,
        });
    }
    if n < 3 {
        return Ok(0);
    }
    // w[i] = w(i) for i in 0..n, with w(0) = 0.
    let mut w = vec![0i8; n as usize];
    match weight {
        TernaryWeight::Unit => w[1..].fill(1),
        TernaryWeight::Liouville => w[1..].copy_from_slice(&liouville_values(1, n)?),
    }
    // T2(M) = Σ_{a+b=M} w(a)w(b), needed for M = N − c.
    let t2 = |m: usize| -> i64 {
        let a = &w[1..m];
        a.iter().zip(w[1..m].iter().rev()).map(|(&x, &y)| (x * y) as i64).sum()
    };
    Ok((1..=(n - 2) as usize)
        .into_par_iter()
        .map(|c| w[c] as i64 * t2(n as usize - c))
        .sum())
}
