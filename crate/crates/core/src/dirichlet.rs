//! Dirichlet polynomials `Σ a_n n^{-it}`: evaluation, mean values over
//! vertical segments and subsets, prime polynomials, convolution powers and
//! large-value / typical-point sets.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith::{liouville_values, primes_in_range};
use crate::error::{Error, Result};
use crate::numerics::{refined_trapezoid, ComplexKahan, KahanSum};

/// Finitely supported coefficients on `(support_lo, support_hi]`, stored
/// sparsely in increasing `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSeq {
    support_lo: u64,
    support_hi: u64,
    terms: Vec<(u64, Complex64)>,
    max_abs: f64,
}

impl CoeffSeq {
    /// Builds a sequence from `(n, a_n)` pairs. Zero coefficients are dropped,
    /// repeated `n` are summed.
    pub fn from_pairs(
        support_lo: u64,
        support_hi: u64,
        pairs: impl IntoIterator<Item = (u64, Complex64)>,
    ) -> Result<Self> {
        if support_hi <= support_lo {
            return Err(Error::invalid(format!(
                "empty support ({support_lo}, {support_hi}]"
            )));
        }
        let mut map: BTreeMap<u64, Complex64> = BTreeMap::new();
        for (n, a) in pairs {
            if n <= support_lo || n > support_hi {
                return Err(Error::invalid(format!(
                    "index {n} outside support ({support_lo}, {support_hi}]"
                )));
            }
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::invalid(format!("non-finite coefficient at {n}")));
            }
            *map.entry(n).or_default() += a;
        }
        let terms: Vec<(u64, Complex64)> = map.into_iter().filter(|(_, a)| a.norm() != 0.0).collect();
        let max_abs = terms.iter().map(|(_, a)| a.norm()).fold(0.0, f64::max);
        Ok(Self {
            support_lo,
            support_hi,
            terms,
            max_abs,
        })
    }

    /// `a_n = values[n - 1]` for `n = 1..=values.len()`.
    pub fn from_dense(values: &[Complex64]) -> Result<Self> {
        Self::from_pairs(
            0,
            values.len() as u64,
            values.iter().enumerate().map(|(i, &a)| (i as u64 + 1, a)),
        )
    }

    pub fn support_lo(&self) -> u64 {
        self.support_lo
    }

    pub fn support_hi(&self) -> u64 {
        self.support_hi
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    pub fn terms(&self) -> &[(u64, Complex64)] {
        &self.terms
    }

    pub fn coeff(&self, n: u64) -> Complex64 {
        self.terms
            .binary_search_by_key(&n, |&(m, _)| m)
            .map_or(Complex64::new(0.0, 0.0), |i| self.terms[i].1)
    }

    /// `Σ |a_n|²`.
    pub fn l2_squared(&self) -> f64 {
        self.terms.iter().map(|(_, a)| a.norm_sqr()).collect::<KahanSum>().value()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let terms: Vec<_> = self.terms.iter().map(|&(n, a)| (n, a * c)).collect();
        Self {
            support_lo: self.support_lo,
            support_hi: self.support_hi,
            max_abs: self.max_abs * c.norm(),
            terms,
        }
    }

    /// Default quadrature step `min(0.05, π / (4 log support_hi))`.
    pub fn default_step(&self) -> f64 {
        default_step(self.support_hi)
    }
}

pub(crate) fn default_step(support_hi: u64) -> f64 {
    let l = (support_hi.max(2) as f64).ln();
    0.05f64.min(PI / (4.0 * l))
}

/// `Σ a_n n^{-it}`.
pub fn evaluate(coeffs: &CoeffSeq, t: f64) -> Complex64 {
    coeffs
        .terms
        .iter()
        .map(|&(n, a)| a * Complex64::from_polar(1.0, -t * (n as f64).ln()))
        .collect::<ComplexKahan>()
        .value()
}

/// A uniform grid of cells `[t0 + k step, t0 + (k+1) step] ∩ [t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TGrid {
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
}

impl TGrid {
    pub fn new(t0: f64, t1: f64, step: f64) -> Result<Self> {
        if !(t0 < t1) || !(step > 0.0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::invalid(format!("bad grid [{t0}, {t1}] step {step}")));
        }
        Ok(Self { t0, t1, step })
    }

    /// Grid over `[t0, t1]` at the default step for `coeffs`.
    pub fn for_coeffs(t0: f64, t1: f64, coeffs: &CoeffSeq) -> Result<Self> {
        Self::new(t0, t1, coeffs.default_step())
    }

    pub fn cells(&self) -> usize {
        ((self.t1 - self.t0) / self.step).ceil().max(1.0) as usize
    }

    pub fn cell(&self, k: usize) -> (f64, f64) {
        let a = self.t0 + k as f64 * self.step;
        (a, (a + self.step).min(self.t1))
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        let (a, b) = self.cell(k);
        0.5 * (a + b)
    }
}

/// Disjoint closed intervals; `measure` is their total length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TSubset {
    intervals: Vec<(f64, f64)>,
}

impl TSubset {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if !(a <= b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::invalid(format!("bad interval [{a}, {b}]")));
            }
        }
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in intervals.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::invalid(format!(
                    "intervals [{}, {}] and [{}, {}] overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// The union of the listed grid cells.
    pub fn from_cells(grid: &TGrid, cells: &[usize]) -> Result<Self> {
        let mut cells = cells.to_vec();
        cells.sort_unstable();
        cells.dedup();
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        let mut prev: Option<usize> = None;
        for k in cells {
            if k >= grid.cells() {
                return Err(Error::invalid(format!("cell {k} outside grid")));
            }
            let (a, b) = grid.cell(k);
            match (prev, intervals.last_mut()) {
                (Some(p), Some(last)) if p + 1 == k => last.1 = b,
                _ => intervals.push((a, b)),
            }
            prev = Some(k);
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).collect::<KahanSum>().value()
    }
}

/// A certified quadrature of `|Σ a_n n^{it}|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanValueReport {
    pub value: f64,
    pub halving_delta: f64,
    pub step: f64,
    /// `Σ |a_n|²`.
    pub l2_squared: f64,
    /// `N = support_hi`.
    pub n: u64,
    pub t_max: f64,
}

impl MeanValueReport {
    /// `(value − T Σ|a|²) / (N Σ|a|²)`.
    pub fn ratio(&self) -> f64 {
        (self.value - self.t_max * self.l2_squared) / (self.n as f64 * self.l2_squared)
    }
}

/// Relative step-halving tolerance for the mean-value quadratures.
pub const MEAN_VALUE_TOLERANCE: f64 = 1e-3;

pub(crate) fn square_integral(coeffs: &CoeffSeq, a: f64, b: f64, step: f64) -> Result<(f64, f64, f64)> {
    if b <= a || coeffs.terms.is_empty() {
        return Ok((0.0, 0.0, step));
    }
    let logs: Vec<f64> = coeffs.terms.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let amps: Vec<Complex64> = coeffs.terms.iter().map(|&(_, a)| a).collect();
    let floor = coeffs.l2_squared() * (b - a).min(1.0);
    let cert = refined_trapezoid(
        "mean value integral",
        a,
        b,
        step,
        MEAN_VALUE_TOLERANCE,
        floor,
        6,
        |a0, h, first, len| {
            let t0 = a0 + first as f64 * h;
            let mut phase: Vec<Complex64> = logs
                .iter()
                .zip(&amps)
                .map(|(&l, &c)| c * Complex64::from_polar(1.0, l * t0))
                .collect();
            let rot: Vec<Complex64> = logs.iter().map(|&l| Complex64::from_polar(1.0, l * h)).collect();
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let s: ComplexKahan = phase.iter().copied().collect();
                out.push(s.value().norm_sqr());
                for (p, r) in phase.iter_mut().zip(&rot) {
                    *p *= r;
                }
            }
            out
        },
    )?;
    Ok((cert.value, cert.halving_delta(), cert.step))
}

/// `∫_0^T |Σ a_n n^{it}|² dt`, certified by step halving.
pub fn mean_value_integral(coeffs: &CoeffSeq, t_max: f64) -> Result<MeanValueReport> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::invalid(format!("mean_value_integral needs T > 0, got {t_max}")));
    }
    let (value, halving_delta, step) = square_integral(coeffs, 0.0, t_max, coeffs.default_step())?;
    Ok(MeanValueReport {
        value,
        halving_delta,
        step,
        l2_squared: coeffs.l2_squared(),
        n: coeffs.support_hi,
        t_max,
    })
}

/// `∫_𝒯 |Σ a_n n^{it}|² dt` with the large-sieve bound for comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalaszReport {
    pub value: f64,
    pub halving_delta: f64,
    /// `(N + |𝒯| √T log T) Σ|a|²`.
    pub bound: f64,
}

impl HalaszReport {
    pub fn ratio(&self) -> f64 {
        if self.bound == 0.0 {
            0.0
        } else {
            self.value / self.bound
        }
    }
}

pub fn halasz_subset_integral(coeffs: &CoeffSeq, subset: &TSubset, t_max: f64) -> Result<HalaszReport> {
    if !(t_max >= 2.0) {
        return Err(Error::invalid(format!("halasz_subset_integral needs T >= 2, got {t_max}")));
    }
    if let (Some(first), Some(last)) = (subset.intervals.first(), subset.intervals.last()) {
        if first.0 < -t_max || last.1 > t_max {
            return Err(Error::invalid("subset must lie in [-T, T]"));
        }
    }
    let step = coeffs.default_step();
    let mut value = KahanSum::new();
    let mut delta = 0.0;
    for &(a, b) in &subset.intervals {
        let (v, d, _) = square_integral(coeffs, a, b, step)?;
        value.add(v);
        delta += d;
    }
    let n = coeffs.support_hi as f64;
    let bound = (n + subset.measure() * t_max.sqrt() * t_max.ln()) * coeffs.l2_squared();
    Ok(HalaszReport {
        value: value.value(),
        halving_delta: delta,
        bound,
    })
}

/// Upper end `⌊(1+δ)Q⌋` of a prime band `(Q, (1+δ)Q]`.
fn band_top(q: u64, delta: f64) -> u64 {
    ((1.0 + delta) * q as f64).floor() as u64
}

/// `Σ_{Q < p ≤ (1+δ)Q} p^{-1-it}`.
pub fn prime_dirichlet_sum(q: u64, delta: f64, t: f64) -> Result<Complex64> {
    if q < 2 || !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("prime_dirichlet_sum needs Q >= 2, 0 < δ <= 1 (Q = {q}, δ = {delta})")));
    }
    let primes = primes_in_range(q + 1, band_top(q, delta) + 1)?;
    Ok(primes
        .iter()
        .map(|&p| {
            let l = (p as f64).ln();
            Complex64::from_polar(1.0 / p as f64, -t * l)
        })
        .collect::<ComplexKahan>()
        .value())
}

/// The coefficient sequence of `p ↦ w(p)` over primes in `(lo, hi]`.
pub fn prime_coeffs(lo: u64, hi: u64, mut weight: impl FnMut(u64) -> Complex64) -> Result<CoeffSeq> {
    let primes = primes_in_range(lo + 1, hi + 1)?;
    CoeffSeq::from_pairs(lo, hi, primes.into_iter().map(|p| (p, weight(p))))
}

/// Largest exponent accepted by [`raise_power`].
pub const MAX_POWER: u32 = 12;

/// Coefficients of the ℓ-fold Dirichlet convolution of `coeffs` with itself.
pub fn raise_power(coeffs: &CoeffSeq, ell: u32) -> Result<CoeffSeq> {
    if ell == 0 || ell > MAX_POWER {
        return Err(Error::invalid(format!("power {ell} not in 1..={MAX_POWER}")));
    }
    let limit = 1u64 << 63;
    let hi = coeffs
        .support_hi
        .checked_pow(ell)
        .filter(|&v| v < limit)
        .ok_or_else(|| Error::Overflow(format!("support bound {}^{ell} reaches 2^63", coeffs.support_hi)))?;
    let lo = coeffs.support_lo.pow(ell);
    let mut acc: BTreeMap<u64, Complex64> = coeffs.terms.iter().copied().collect();
    for _ in 1..ell {
        let mut next: BTreeMap<u64, Complex64> = BTreeMap::new();
        for (&m, &a) in &acc {
            for &(n, b) in &coeffs.terms {
                *next.entry(m * n).or_default() += a * b;
            }
        }
        acc = next;
    }
    CoeffSeq::from_pairs(lo, hi, acc)
}

/// Grid measure of large values of a prime polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeValueReport {
    pub measure: f64,
    pub cells: usize,
    pub threshold: f64,
    /// Largest modulus seen on the grid; a lower bound for the supremum.
    pub grid_max: f64,
    /// Whether `(log T)^9 < Q < T^{1/3}` holds.
    pub in_regime: bool,
}

/// `|{t ∈ [0, T] : |Σ a_n n^{-it}| > Q^{-γ}}|` with `Q = support_lo`,
/// counting a grid cell when its midpoint or either endpoint exceeds the
/// threshold. The coefficients carry their `1/n` weights already.
pub fn large_value_measure(coeffs: &CoeffSeq, t_max: f64, gamma: f64) -> Result<LargeValueReport> {
    if !(t_max > 0.0) {
        return Err(Error::invalid("large_value_measure needs T > 0"));
    }
    let q = coeffs.support_lo.max(1) as f64;
    let threshold = q.powf(-gamma);
    let in_regime = t_max.ln().powi(9) < q && q < t_max.cbrt();
    let grid = TGrid::for_coeffs(0.0, t_max, coeffs)?;
    let cells = grid.cells();
    let chunk = 1024;
    let partial: Vec<(usize, f64, f64)> = (0..cells.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut count = 0usize;
            let mut meas = KahanSum::new();
            let mut max = 0.0f64;
            for k in c * chunk..((c + 1) * chunk).min(cells) {
                let (a, b) = grid.cell(k);
                let vals = [evaluate(coeffs, a), evaluate(coeffs, 0.5 * (a + b)), evaluate(coeffs, b)];
                let top = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
                max = max.max(top);
                if top > threshold {
                    count += 1;
                    meas.add(b - a);
                }
            }
            (count, meas.value(), max)
        })
        .collect();
    let mut measure = KahanSum::new();
    let mut count = 0;
    let mut grid_max = 0.0f64;
    for (c, m, mx) in partial {
        count += c;
        measure.add(m);
        grid_max = grid_max.max(mx);
    }
    Ok(LargeValueReport {
        measure: measure.value(),
        cells: count,
        threshold,
        grid_max,
        in_regime,
    })
}

/// Points `1 + it` of a grid at which every short prime polynomial of λ is
/// small: `|Σ_{Q<p≤(1+δ)Q} λ(p) p^{-1-it}| ≤ Q^{-γ}` for all integers
/// `Q ∈ [A^α, A]`. Membership is decided at cell midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalSet {
    pub a: u64,
    pub gamma: f64,
    pub alpha: f64,
    pub delta: f64,
    pub grid: TGrid,
    pub mask: Vec<bool>,
    /// Largest `Σ 1/p` over the bands; when below the threshold, every point
    /// is typical.
    pub max_band_mass: f64,
}

impl TypicalSet {
    pub fn q_range(&self) -> (u64, u64) {
        q_range(self.a, self.alpha)
    }

    /// Total length of the non-typical cells.
    pub fn complement_measure(&self) -> f64 {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| !m)
            .map(|(k, _)| {
                let (a, b) = self.grid.cell(k);
                b - a
            })
            .collect::<KahanSum>()
            .value()
    }

    /// Recomputes membership of cell `k` from [`prime_dirichlet_sum`].
    pub fn recompute(&self, k: usize) -> Result<bool> {
        let t = self.grid.midpoint(k);
        let (q_lo, q_hi) = self.q_range();
        for q in q_lo..=q_hi {
            // λ(p) = -1, so the polynomial is minus the plain prime sum.
            let z = -prime_dirichlet_sum(q, self.delta, t)?;
            if z.norm() > (q as f64).powf(-self.gamma) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn q_range(a: u64, alpha: f64) -> (u64, u64) {
    let lo = ((a as f64).powf(alpha) - 1e-9).ceil().max(2.0) as u64;
    (lo, a)
}

pub fn typical_set(a: u64, gamma: f64, alpha: f64, delta: f64, grid: TGrid) -> Result<TypicalSet> {
    if a < 4 {
        return Err(Error::invalid(format!("typical_set needs A >= 4, got {a}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma = {gamma} must lie in [0, 1)")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("delta = {delta} must lie in (0, 1]")));
    }
    let (q_lo, q_hi) = q_range(a, alpha);
    let top = band_top(q_hi, delta);
    let primes = primes_in_range(q_lo + 1, top + 1)?;
    let logs: Vec<f64> = primes.iter().map(|&p| (p as f64).ln()).collect();
    // Band for Q is primes[lo_idx[Q]..hi_idx[Q]].
    let bands: Vec<(usize, usize, f64)> = (q_lo..=q_hi)
        .map(|q| {
            let i = primes.partition_point(|&p| p <= q);
            let j = primes.partition_point(|&p| p <= band_top(q, delta));
            (i, j, (q as f64).powf(-gamma))
        })
        .collect();
    let max_band_mass = bands
        .iter()
        .map(|&(i, j, _)| primes[i..j].iter().map(|&p| 1.0 / p as f64).sum::<f64>())
        .fold(0.0, f64::max);
    let mask: Vec<bool> = (0..grid.cells())
        .into_par_iter()
        .map(|k| {
            let t = grid.midpoint(k);
            let mut prefix = Vec::with_capacity(primes.len() + 1);
            let mut acc = Complex64::new(0.0, 0.0);
            prefix.push(acc);
            for (&p, &l) in primes.iter().zip(&logs) {
                acc -= Complex64::from_polar(1.0 / p as f64, -t * l);
                prefix.push(acc);
            }
            bands
                .iter()
                .all(|&(i, j, thr)| (prefix[j] - prefix[i]).norm() <= thr)
        })
        .collect();
    Ok(TypicalSet {
        a,
        gamma,
        alpha,
        delta,
        grid,
        mask,
        max_band_mass,
    })
}

/// Weight of the smoothed exponential sum: 1 on (0, 1], 2 − u on (1, 2].
fn kernel_weight(u: f64) -> f64 {
    if u <= 1.0 {
        1.0
    } else if u <= 2.0 {
        2.0 - u
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Smooth,
    Sharp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCheck {
    pub value: Complex64,
    pub bound: f64,
}

impl KernelCheck {
    pub fn holds(&self) -> bool {
        self.value.norm() <= self.bound
    }
}

/// Default constant in front of the exponential-sum envelopes.
pub const KERNEL_SLACK: f64 = 10.0;

/// `Σ f(n/x) n^{it}` (smooth) or `Σ_{n≤x} n^{it}` (sharp), with the envelope
/// `C (x/(1+|t|)^k + √|t| log(1+|t|))`, k = 2 smooth and k = 1 sharp.
pub fn kernel_sum_bound_check(x: f64, t: f64, kind: KernelKind, slack: f64) -> Result<KernelCheck> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(Error::invalid(format!("kernel sum needs x >= 1, got {x}")));
    }
    let top = match kind {
        KernelKind::Smooth => (2.0 * x).floor() as u64,
        KernelKind::Sharp => x.floor() as u64,
    };
    const CHUNK: u64 = 4096;
    let parts: Vec<ComplexKahan> = (0..top.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = ComplexKahan::new();
            for n in c * CHUNK + 1..=((c + 1) * CHUNK).min(top) {
                let w = match kind {
                    KernelKind::Smooth => kernel_weight(n as f64 / x),
                    KernelKind::Sharp => 1.0,
                };
                acc.add(Complex64::from_polar(w, t * (n as f64).ln()));
            }
            acc
        })
        .collect();
    let mut total = ComplexKahan::new();
    for p in &parts {
        total.merge(p);
    }
    let value = total.value();
    let at = t.abs();
    let head = match kind {
        KernelKind::Smooth => x / (1.0 + at).powi(2),
        KernelKind::Sharp => x / (1.0 + at),
    };
    let bound = slack * (head + at.sqrt() * (1.0 + at).ln());
    Ok(KernelCheck { value, bound })
}

/// λ restricted to `(lo, hi]`, as a coefficient sequence with weights `w(n)`.
pub fn liouville_coeffs(lo: u64, hi: u64, weight: impl Fn(u64) -> f64) -> Result<CoeffSeq> {
    let lambda = liouville_values(lo + 1, hi + 1)?;
    CoeffSeq::from_pairs(
        lo,
        hi,
        lambda
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let n = lo + 1 + i as u64;
                (n, Complex64::new(l as f64 * weight(n), 0.0))
            }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_seq(seed: u64, n: usize) -> CoeffSeq {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        CoeffSeq::from_dense(&v).unwrap()
    }

    /// `∫_a^b |Σ a_n n^{it}|² dt` in closed form.
    fn exact_square_integral(s: &CoeffSeq, a: f64, b: f64) -> f64 {
        let mut acc = KahanSum::new();
        for &(m, am) in s.terms() {
            for &(n, an) in s.terms() {
                let w = (m as f64 / n as f64).ln();
                let integral = if m == n {
                    c(b - a, 0.0)
                } else {
                    (Complex64::from_polar(1.0, w * b) - Complex64::from_polar(1.0, w * a)) / c(0.0, w)
                };
                acc.add((am * an.conj() * integral).re);
            }
        }
        acc.value()
    }

    #[test]
    fn evaluate_examples() {
        let one = CoeffSeq::from_dense(&[c(1.0, 0.0)]).unwrap();
        assert_eq!(evaluate(&one, 17.3), c(1.0, 0.0));
        let two = CoeffSeq::from_dense(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let v = evaluate(&two, 2.0 * PI / 2f64.ln());
        assert!((v - c(2.0, 0.0)).norm() < 1e-12);
        let s = random_seq(1, 100);
        let total: Complex64 = s.terms().iter().map(|(_, a)| *a).sum();
        assert!((evaluate(&s, 0.0) - total).norm() < 1e-12);
    }

    #[test]
    fn mean_value_examples() {
        let one = CoeffSeq::from_dense(&[c(1.0, 0.0)]).unwrap();
        assert_eq!(mean_value_integral(&one, 50.0).unwrap().value, 50.0);
        let two = CoeffSeq::from_dense(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let r = mean_value_integral(&two, 10.0).unwrap();
        let l2 = 2f64.ln();
        let exact = 20.0 + 2.0 * (10.0 * l2).sin() / l2;
        assert!((r.value - exact).abs() < 1e-3 * exact, "{} vs {exact}", r.value);
        assert!((exact - 21.742).abs() < 1e-3);
    }

    #[test]
    fn mean_value_matches_closed_form() {
        let s = random_seq(7, 40);
        let r = mean_value_integral(&s, 200.0).unwrap();
        let exact = exact_square_integral(&s, 0.0, 200.0);
        assert!((r.value - exact).abs() < 1e-4 * exact);
        assert!(r.ratio().abs() <= 8.0);
    }

    #[test]
    fn halasz_examples() {
        let s = random_seq(3, 200);
        let full = TSubset::new(vec![(0.0, 100.0)]).unwrap();
        let h = halasz_subset_integral(&s, &full, 100.0).unwrap();
        let m = mean_value_integral(&s, 100.0).unwrap();
        assert!((h.value - m.value).abs() <= 1e-3 * m.value);
        let e = halasz_subset_integral(&s, &TSubset::empty(), 100.0).unwrap();
        assert_eq!(e.value, 0.0);

        let grid = TGrid::new(-1000.0, 1000.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cells: Vec<usize> = (0..10).map(|_| rng.gen_range(0..grid.cells())).collect();
        let sub = TSubset::from_cells(&grid, &cells).unwrap();
        let h = halasz_subset_integral(&s, &sub, 1000.0).unwrap();
        assert!(h.value <= 10.0 * h.bound);
        let exact: f64 = sub.intervals().iter().map(|&(a, b)| exact_square_integral(&s, a, b)).sum();
        assert!((h.value - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn prime_sum_examples() {
        let v = prime_dirichlet_sum(10, 1.0, 0.0).unwrap();
        let expect = 1.0 / 11.0 + 1.0 / 13.0 + 1.0 / 17.0 + 1.0 / 19.0;
        assert!((v.re - expect).abs() < 1e-15 && v.im == 0.0);
        assert_eq!(prime_dirichlet_sum(13, 0.05, 3.0).unwrap(), c(0.0, 0.0));
        let at0 = prime_dirichlet_sum(100_000, 0.5, 0.0).unwrap().norm();
        let at = prime_dirichlet_sum(100_000, 0.5, 1000.0).unwrap().norm();
        assert!(at <= at0 && at < 0.5 * at0);
    }

    #[test]
    fn power_examples() {
        let p = prime_coeffs(1, 3, |_| c(1.0, 0.0)).unwrap();
        assert_eq!(raise_power(&p, 1).unwrap(), p);
        let sq = raise_power(&p, 2).unwrap();
        assert_eq!(sq.terms(), &[(4, c(1.0, 0.0)), (6, c(2.0, 0.0)), (9, c(1.0, 0.0))]);
        assert!(raise_power(&p, 0).is_err());
        let big = prime_coeffs(1_000_000, 2_000_000, |_| c(1.0, 0.0)).unwrap();
        assert!(matches!(raise_power(&big, 4), Err(Error::Overflow(_))));
    }

    #[test]
    fn power_bounds() {
        let p = prime_coeffs(20, 40, |_| c(1.0, 0.0)).unwrap();
        let cube = raise_power(&p, 3).unwrap();
        assert!(cube.max_abs() <= 6.0);
        assert_eq!((cube.support_lo(), cube.support_hi()), (8_000, 64_000));
    }

    #[test]
    fn large_value_examples() {
        let zero = CoeffSeq::from_pairs(100, 200, std::iter::empty()).unwrap();
        assert_eq!(large_value_measure(&zero, 100.0, 0.1).unwrap().measure, 0.0);
        let p = prime_coeffs(100, 200, |p| c(1.0 / p as f64, 0.0)).unwrap();
        let r = large_value_measure(&p, 10_000.0, 1.0 / 9.0).unwrap();
        assert!(r.measure <= 50.0 * 10_000f64.powf(4.0 / 9.0));
        let r = large_value_measure(&p, 1_000.0, -10.0).unwrap();
        assert_eq!(r.measure, 0.0);
        // Unit weights with a low threshold: everything near t = 0 is large.
        let u = prime_coeffs(100, 200, |_| c(1.0, 0.0)).unwrap();
        let r = large_value_measure(&u, 10.0, 0.0).unwrap();
        assert!(r.measure > 0.0 && r.grid_max > 20.0);
    }

    #[test]
    fn typical_examples() {
        let grid = TGrid::new(0.0, 1000.0, 0.05).unwrap();
        let all = typical_set(100, 0.0, 0.5, 0.1, grid).unwrap();
        assert!(all.max_band_mass < 1.0);
        assert!(all.mask.iter().all(|&m| m));
        assert!(typical_set(100, 0.1, 1.5, 0.1, grid).is_err());

        let ts = typical_set(100, 1.0 / 9.0, 0.5, 0.1, grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let members: Vec<usize> = (0..ts.mask.len()).filter(|&k| ts.mask[k]).collect();
        let non: Vec<usize> = (0..ts.mask.len()).filter(|&k| !ts.mask[k]).collect();
        for _ in 0..100 {
            let k = members[rng.gen_range(0..members.len())];
            assert!(ts.recompute(k).unwrap());
        }
        for &k in non.iter().take(20) {
            assert!(!ts.recompute(k).unwrap());
        }
    }

    #[test]
    fn kernel_examples() {
        let r = kernel_sum_bound_check(100.5, 0.0, KernelKind::Sharp, 1.0).unwrap();
        assert_eq!(r.value, c(100.0, 0.0));
        assert!(r.holds());
        let r = kernel_sum_bound_check(1e4, 50.0, KernelKind::Smooth, KERNEL_SLACK).unwrap();
        assert!(r.holds(), "{} > {}", r.value.norm(), r.bound);
        let r = kernel_sum_bound_check(1e3, 1e5, KernelKind::Sharp, KERNEL_SLACK).unwrap();
        assert!(r.holds());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn unimodular_invariance(seed in 0u64..1000, theta in 0.0f64..6.28) {
            let s = random_seq(seed, 30);
            let a = mean_value_integral(&s, 60.0).unwrap().value;
            let b = mean_value_integral(&s.scaled(Complex64::from_polar(1.0, theta)), 60.0).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-3 * a);
        }

        #[test]
        fn halasz_monotone(seed in 0u64..1000, cells in proptest::collection::vec(0usize..200, 1..8), extra in 0usize..200) {
            let s = random_seq(seed, 25);
            let grid = TGrid::new(-100.0, 100.0, 1.0).unwrap();
            let small = TSubset::from_cells(&grid, &cells).unwrap();
            let mut more = cells.clone();
            more.push(extra);
            let big = TSubset::from_cells(&grid, &more).unwrap();
            let a = halasz_subset_integral(&s, &small, 100.0).unwrap();
            let b = halasz_subset_integral(&s, &big, 100.0).unwrap();
            prop_assert!(a.value <= b.value + a.halving_delta + b.halving_delta + 1e-9);
        }

        #[test]
        fn powers_compose(a in 1u32..4, b in 1u32..3, t in -50.0f64..50.0, seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = prime_coeffs(10, 20, |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap();
            let lhs = evaluate(&raise_power(&p, a + b).unwrap(), t);
            let rhs = evaluate(&raise_power(&p, a).unwrap(), t) * evaluate(&raise_power(&p, b).unwrap(), t);
            prop_assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm().max(1.0));
            let sq = evaluate(&raise_power(&p, 2).unwrap(), t);
            let base = evaluate(&p, t);
            prop_assert!((sq - base * base).norm() <= 1e-10 * sq.norm().max(1.0));
        }
    }
}
