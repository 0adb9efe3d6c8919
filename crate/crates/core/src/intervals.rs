//! Short-interval sums and the variance of short-interval means of λ and
//! its relatives, with additive windows (x, x+h] and multiplicative windows
//! ((1 − h/X)x, x].

use std::collections::BTreeMap;
use std::ops::{AddAssign, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith::{build_sieve, liouville_values, mobius_values};
use crate::characters::CharacterTable;
use crate::dirichlet::{square_integral, CoeffSeq};
use crate::error::{Error, Result};
use crate::numerics::{ComplexKahan, KahanSum};

/// x-values handled per sliding chunk.
const X_CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone)]
pub enum ArithFn {
    Unit,
    Liouville,
    Mobius,
    /// λ(n)χ(n) for character `index` of `table`.
    LiouvilleTimesCharacter {
        table: Arc<CharacterTable>,
        index: usize,
    },
    /// Λ(n) − 1.
    VonMangoldtMinusOne,
}

/// Values of an arithmetic function on a range of consecutive integers.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Int(Vec<i8>),
    Complex(Vec<Complex64>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Int(v) => v.len(),
            Values::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Complex64 {
        match self {
            Values::Int(v) => Complex64::new(v[i] as f64, 0.0),
            Values::Complex(v) => v[i],
        }
    }
}

impl ArithFn {
    /// Upper bound for |f(n)| with n < `hi`.
    pub fn sup_norm(&self, hi: u64) -> f64 {
        match self {
            ArithFn::VonMangoldtMinusOne => ((hi.max(3)) as f64).ln().max(1.0),
            _ => 1.0,
        }
    }

    /// f(n) for n in [lo, hi), lo ≥ 1.
    pub fn values(&self, lo: u64, hi: u64) -> Result<Values> {
        if lo == 0 || hi < lo {
            return Err(Error::invalid(format!("bad value range [{lo}, {hi})")));
        }
        if hi == lo {
            return Ok(Values::Int(Vec::new()));
        }
        Ok(match self {
            ArithFn::Unit => Values::Int(vec![1; (hi - lo) as usize]),
            ArithFn::Liouville => Values::Int(liouville_values(lo, hi)?),
            ArithFn::Mobius => Values::Int(mobius_values(lo, hi)?),
            ArithFn::LiouvilleTimesCharacter { table, index } => {
                if *index >= table.len() {
                    return Err(Error::invalid(format!(
                        "character index {index} out of range for modulus {}",
                        table.modulus()
                    )));
                }
                let row = table.row(*index);
                let q = table.modulus();
                let lam = liouville_values(lo, hi)?;
                Values::Complex(
                    lam.iter()
                        .zip(lo..hi)
                        .map(|(&l, n)| row[(n % q) as usize] * l as f64)
                        .collect(),
                )
            }
            ArithFn::VonMangoldtMinusOne => {
                let table = build_sieve(lo, hi)?;
                Values::Complex(
                    (lo..hi)
                        .map(|n| Complex64::new(von_mangoldt(&table, n) - 1.0, 0.0))
                        .collect(),
                )
            }
        })
    }
}

fn von_mangoldt(table: &crate::arith::FactorTable, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let p = table.spf(n);
    let mut m = n;
    while m % p == 0 {
        m /= p;
    }
    if m == 1 {
        (p as f64).ln()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub x_cap: u64,
    pub h: f64,
}

impl WindowSpec {
    pub fn new(kind: WindowKind, x_cap: u64, h: f64) -> Result<Self> {
        if x_cap == 0 || !(h >= 1.0) || h > x_cap as f64 {
            return Err(Error::invalid(format!("window needs 1 <= h <= X, got h = {h}, X = {x_cap}")));
        }
        if x_cap > 1 << 40 {
            return Err(Error::Budget {
                what: "window scale X",
                requested: x_cap as u128,
                limit: 1 << 40,
            });
        }
        Ok(WindowSpec { kind, x_cap, h })
    }

    /// The window at `x` as integers in (lo, hi].
    pub fn bounds(&self, x: u64) -> (u64, u64) {
        match self.kind {
            WindowKind::Additive => (x, x + self.h.floor() as u64),
            WindowKind::Multiplicative => {
                // ⌊x − hx/X⌋ = x − ⌈hx/X⌉.
                let shift = if self.h.fract() == 0.0 {
                    let num = self.h as u128 * x as u128;
                    num.div_ceil(self.x_cap as u128) as u64
                } else {
                    (self.h * x as f64 / self.x_cap as f64).ceil() as u64
                };
                (x.saturating_sub(shift), x)
            }
        }
    }

    /// Range [lo, hi) of n touched by the windows at x ∈ (X, 2X].
    pub fn value_range(&self) -> (u64, u64) {
        let (lo, _) = self.bounds(self.x_cap + 1);
        let (_, hi) = self.bounds(2 * self.x_cap);
        (lo + 1, hi + 1)
    }
}

/// Σ f(n) over the integers of the window at `x`.
pub fn short_sum(f: &ArithFn, spec: &WindowSpec, x: u64) -> Result<Complex64> {
    let (lo, hi) = spec.bounds(x);
    if hi <= lo {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let vals = f.values(lo + 1, hi + 1)?;
    let mut acc = ComplexKahan::new();
    for i in 0..vals.len() {
        acc.add(vals.get(i));
    }
    Ok(acc.value())
}

/// Sliding-window scan over x ∈ (X, 2X] in fixed chunks. `visit` receives
/// the window sum and integer count for each x.
fn scan<T, A, R, L, I, V>(spec: &WindowSpec, values: &[T], base: u64, lift: L, init: I, visit: V) -> Vec<R>
where
    T: Copy + Sync,
    A: Copy + Default + AddAssign + SubAssign,
    R: Send,
    L: Fn(T) -> A + Sync,
    I: Fn() -> R + Sync,
    V: Fn(&mut R, u64, A, u64) + Sync,
{
    let x0 = spec.x_cap + 1;
    let x1 = 2 * spec.x_cap;
    let chunks = (x1 - x0) / X_CHUNK + 1;
    let at = |n: u64| lift(values[(n - base) as usize]);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = x0 + c * X_CHUNK;
            let end = (start + X_CHUNK - 1).min(x1);
            let mut out = init();
            let (mut lo, mut hi) = spec.bounds(start);
            let mut s = A::default();
            for n in lo + 1..=hi {
                s += at(n);
            }
            for x in start..=end {
                let (nlo, nhi) = spec.bounds(x);
                for n in hi + 1..=nhi {
                    s += at(n);
                }
                for n in lo + 1..=nlo {
                    s -= at(n);
                }
                lo = nlo;
                hi = nhi;
                visit(&mut out, x, s, hi.saturating_sub(lo));
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub spec: WindowSpec,
    pub sample_count: u64,
    pub mean_square: f64,
    /// |window mean| for every sampled x, sorted ascending.
    abs_means: Vec<f64>,
}

impl VarianceReport {
    /// Fraction of x with |window mean| ≥ `threshold`.
    pub fn exceptional_fraction(&self, threshold: f64) -> Result<f64> {
        exceptional_fraction(self, threshold)
    }

    pub fn abs_means(&self) -> &[f64] {
        &self.abs_means
    }
}

/// Mean over integer x ∈ (X, 2X] of |mean of f over the window at x|².
pub fn variance(f: &ArithFn, spec: &WindowSpec) -> Result<VarianceReport> {
    let (lo, hi) = spec.value_range();
    let vals = f.values(lo, hi)?;
    variance_of_values(spec, &vals, lo)
}

/// Same as [`variance`] on precomputed values of f on [base, ..).
pub fn variance_of_values(spec: &WindowSpec, vals: &Values, base: u64) -> Result<VarianceReport> {
    let (lo, hi) = spec.value_range();
    if base > lo || base + (vals.len() as u64) < hi {
        return Err(Error::invalid("values do not cover the window range"));
    }
    let sample_count = spec.x_cap;
    let (mean_square, mut abs_means) = match vals {
        Values::Int(v) => {
            let parts = scan(
                spec,
                v,
                base,
                |a: i8| a as i64,
                || (BTreeMap::<u64, i128>::new(), Vec::new()),
                |(groups, means), _x, s, c| {
                    if c > 0 {
                        *groups.entry(c).or_insert(0) += (s as i128) * (s as i128);
                        means.push(s.unsigned_abs() as f64 / c as f64);
                    } else {
                        means.push(0.0);
                    }
                },
            );
            let mut groups = BTreeMap::<u64, i128>::new();
            let mut means = Vec::with_capacity(sample_count as usize);
            for (g, m) in parts {
                for (c, s2) in g {
                    *groups.entry(c).or_insert(0) += s2;
                }
                means.extend(m);
            }
            (grouped_mean_square(&groups, sample_count), means)
        }
        Values::Complex(v) => {
            let parts = scan(
                spec,
                v,
                base,
                |a: Complex64| a,
                || (KahanSum::new(), Vec::new()),
                |(acc, means), _x, s, c| {
                    let m = if c > 0 { s.norm() / c as f64 } else { 0.0 };
                    acc.add(m * m);
                    means.push(m);
                },
            );
            let mut acc = KahanSum::new();
            let mut means = Vec::with_capacity(sample_count as usize);
            for (k, m) in parts {
                acc.merge(&k);
                means.extend(m);
            }
            (acc.value() / sample_count as f64, means)
        }
    };
    abs_means.sort_unstable_by(f64::total_cmp);
    Ok(VarianceReport {
        spec: *spec,
        sample_count,
        mean_square,
        abs_means,
    })
}

/// `(1/count) Σ_c S_c / c²` from exact per-count sums of squares S_c.
pub fn grouped_mean_square(groups: &BTreeMap<u64, i128>, count: u64) -> f64 {
    let mut acc = KahanSum::new();
    for (&c, &s2) in groups {
        acc.add(s2 as f64 / (c as f64 * c as f64));
    }
    acc.value() / count as f64
}

pub fn exceptional_fraction(report: &VarianceReport, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {threshold}")));
    }
    let below = report.abs_means.partition_point(|&m| m < threshold);
    Ok((report.abs_means.len() - below) as f64 / report.sample_count as f64)
}

/// `(1/(hX)) Σ_{x∈(X,2X]} |Σ_{window at x} v(n)|` for complex values on [base, ..).
pub fn window_l1(spec: &WindowSpec, vals: &[Complex64], base: u64) -> Result<f64> {
    let (lo, hi) = spec.value_range();
    if base > lo || base + (vals.len() as u64) < hi {
        return Err(Error::invalid("values do not cover the window range"));
    }
    let parts = scan(spec, vals, base, |a| a, KahanSum::new, |acc, _x, s, _c| acc.add(s.norm()));
    let mut acc = KahanSum::new();
    for k in &parts {
        acc.merge(k);
    }
    Ok(acc.value() / (spec.h * spec.x_cap as f64))
}

/// Slack constant on the Parseval link.
pub const PARSEVAL_SLACK: f64 = 50.0;

/// Work limit (terms × nodes) for the Parseval-link integral.
pub const PARSEVAL_WORK_LIMIT: u128 = 40_000_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsevalLink {
    /// Multiplicative-window variance of λ.
    pub lhs: f64,
    /// `∫_{|t|≤T} |Z(1+it)|² dt + δ`.
    pub rhs: f64,
    pub integral: f64,
    pub t_max: f64,
    pub halving_delta: f64,
    pub step: f64,
}

impl ParsevalLink {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= slack * self.rhs
    }
}

/// Compares the short multiplicative-window variance of λ with the mean
/// square of `Z(s) = Σ_{X<n≤2X} λ(n) n^{-s}` on `Re s = 1`, `|t| ≤ X/(hδ²)`.
pub fn parseval_link(x_cap: u64, h: f64, delta: f64) -> Result<ParsevalLink> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    let spec = WindowSpec::new(WindowKind::Multiplicative, x_cap, h)?;
    let lhs = variance(&ArithFn::Liouville, &spec)?.mean_square;
    let lam = liouville_values(x_cap + 1, 2 * x_cap + 1)?;
    let pairs: Vec<(u64, Complex64)> = lam
        .iter()
        .zip(x_cap + 1..)
        .map(|(&l, n)| (n, Complex64::new(l as f64 / n as f64, 0.0)))
        .collect();
    let coeffs = CoeffSeq::from_pairs(x_cap, 2 * x_cap, pairs)?;
    parseval_link_with(lhs, &coeffs, x_cap as f64 / (h * delta * delta), delta)
}

/// The right side for arbitrary coefficients; `lhs` is passed through.
pub fn parseval_link_with(lhs: f64, coeffs: &CoeffSeq, t_max: f64, delta: f64) -> Result<ParsevalLink> {
    let step = coeffs.default_step();
    let work = (coeffs.terms().len() as u128) * ((2.0 * t_max / step).ceil() as u128 + 1);
    if work > PARSEVAL_WORK_LIMIT {
        return Err(Error::Budget {
            what: "Parseval-link quadrature work",
            requested: work,
            limit: PARSEVAL_WORK_LIMIT,
        });
    }
    // Real coefficients: |Z(1+it)| is even in t.
    let real = coeffs.terms().iter().all(|(_, a)| a.im == 0.0);
    let (integral, halving_delta, step) = if real {
        let (v, d, s) = square_integral(coeffs, 0.0, t_max, step)?;
        (2.0 * v, 2.0 * d, s)
    } else {
        square_integral(coeffs, -t_max, t_max, step)?
    };
    Ok(ParsevalLink {
        lhs,
        rhs: integral + delta,
        integral,
        t_max,
        halving_delta,
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::trial_record;
    use crate::characters::characters_mod;

    fn lambda(n: u64) -> i64 {
        trial_record(n).lambda as i64
    }

    /// Window membership straight from the definition.
    fn in_window(spec: &WindowSpec, x: u64, n: u64) -> bool {
        match spec.kind {
            WindowKind::Additive => n > x && (n as f64) <= x as f64 + spec.h,
            WindowKind::Multiplicative => {
                let h = spec.h as u128;
                let xc = spec.x_cap as u128;
                // n > (1 − h/X)x  ⇔  nX > (X − h)x
                n <= x && (n as u128) * xc > (xc - h) * x as u128
            }
        }
    }

    fn naive_variance(spec: &WindowSpec, f: impl Fn(u64) -> i64) -> (BTreeMap<u64, i128>, f64) {
        let mut groups = BTreeMap::new();
        let reach = 2 * spec.h as u64 + 2;
        for x in spec.x_cap + 1..=2 * spec.x_cap {
            let mut s = 0i64;
            let mut c = 0u64;
            for n in x.saturating_sub(reach).max(1)..=x + reach {
                if in_window(spec, x, n) {
                    s += f(n);
                    c += 1;
                }
            }
            if c > 0 {
                *groups.entry(c).or_insert(0i128) += (s as i128) * (s as i128);
            }
        }
        let ms = grouped_mean_square(&groups, spec.x_cap);
        (groups, ms)
    }

    #[test]
    fn lambda_over_ten_to_twenty() {
        let spec = WindowSpec::new(WindowKind::Additive, 10, 10.0).unwrap();
        let s = short_sum(&ArithFn::Liouville, &spec, 10).unwrap();
        let direct: i64 = (11..=20).map(lambda).sum();
        // λ(12) = λ(18) = λ(20) = −1.
        assert_eq!(direct, -4);
        assert_eq!(s, Complex64::new(-4.0, 0.0));
    }

    #[test]
    fn trivial_character_twist_is_plain_lambda() {
        let t = Arc::new(characters_mod(1).unwrap());
        let f = ArithFn::LiouvilleTimesCharacter { table: t, index: 0 };
        let spec = WindowSpec::new(WindowKind::Additive, 1000, 37.0).unwrap();
        for x in [1000, 1234, 1999] {
            let a = short_sum(&f, &spec, x).unwrap();
            let b = short_sum(&ArithFn::Liouville, &spec, x).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn multiplicative_window_counts() {
        let spec = WindowSpec::new(WindowKind::Multiplicative, 100, 10.0).unwrap();
        // ((1 − 1/10)·150, 150] = (135, 150].
        assert_eq!(spec.bounds(150), (135, 150));
        // ((0.9)·101, 101] = (90.9, 101] → 91..=101.
        assert_eq!(spec.bounds(101), (90, 101));
        let full = WindowSpec::new(WindowKind::Multiplicative, 100, 100.0).unwrap();
        assert_eq!(full.bounds(150), (0, 150));
    }

    #[test]
    fn unit_function_mean_square() {
        for kind in [WindowKind::Additive, WindowKind::Multiplicative] {
            for h in [1.0, 3.0, 50.0] {
                let spec = WindowSpec::new(kind, 1000, h).unwrap();
                let r = variance(&ArithFn::Unit, &spec).unwrap();
                assert!((r.mean_square - 1.0).abs() < 1e-12);
                assert!(r.mean_square <= (1.0 + 2.0 / h).powi(2));
            }
        }
    }

    #[test]
    fn variance_matches_naive_double_loop() {
        for (kind, h) in [
            (WindowKind::Multiplicative, 10.0),
            (WindowKind::Multiplicative, 100.0),
            (WindowKind::Multiplicative, 10_000.0),
            (WindowKind::Additive, 100.0),
        ] {
            let spec = WindowSpec::new(kind, 10_000, h).unwrap();
            let r = variance(&ArithFn::Liouville, &spec).unwrap();
            let (_, naive) = naive_variance(&spec, lambda);
            assert_eq!(r.mean_square, naive, "{kind:?} h = {h}");
        }
        let spec = WindowSpec::new(WindowKind::Multiplicative, 10_000, 30.0).unwrap();
        let r = variance(&ArithFn::Mobius, &spec).unwrap();
        let (_, naive) = naive_variance(&spec, |n| trial_record(n).mu as i64);
        assert_eq!(r.mean_square, naive);
    }

    #[test]
    fn full_window_equals_summatory_difference() {
        // h = X: the window at x is [1, x], its mean is L(x)/x.
        let spec = WindowSpec::new(WindowKind::Multiplicative, 10_000, 10_000.0).unwrap();
        let r = variance(&ArithFn::Liouville, &spec).unwrap();
        let mut l = 0i64;
        let mut acc = KahanSum::new();
        for n in 1..=20_000u64 {
            l += lambda(n);
            if n > 10_000 {
                let m = l as f64 / n as f64;
                acc.add(m * m);
            }
        }
        let direct = acc.value() / 10_000.0;
        assert!((r.mean_square - direct).abs() <= 1e-12 * direct.max(1e-300));
    }

    #[test]
    fn complex_path_matches_integer_path() {
        let spec = WindowSpec::new(WindowKind::Multiplicative, 20_000, 64.0).unwrap();
        let r = variance(&ArithFn::Liouville, &spec).unwrap();
        let (lo, hi) = spec.value_range();
        let vals = match ArithFn::Liouville.values(lo, hi).unwrap() {
            Values::Int(v) => Values::Complex(v.iter().map(|&a| Complex64::new(a as f64, 0.0)).collect()),
            _ => unreachable!(),
        };
        let c = variance_of_values(&spec, &vals, lo).unwrap();
        assert!((r.mean_square - c.mean_square).abs() < 1e-12 * r.mean_square);
    }

    #[test]
    fn twisted_and_von_mangoldt_bounds() {
        let table = Arc::new(characters_mod(7).unwrap());
        let spec = WindowSpec::new(WindowKind::Multiplicative, 10_000, 50.0).unwrap();
        for index in 0..table.len() {
            let f = ArithFn::LiouvilleTimesCharacter {
                table: table.clone(),
                index,
            };
            let r = variance(&f, &spec).unwrap();
            assert!(r.mean_square >= 0.0 && r.mean_square <= 1.0);
        }
        let f = ArithFn::VonMangoldtMinusOne;
        let r = variance(&f, &spec).unwrap();
        assert!(r.mean_square <= f.sup_norm(20_001).powi(2));
        // Λ(n) − 1 has mean close to 0 on long windows by the prime number theorem.
        assert!(r.mean_square < 0.2, "{}", r.mean_square);
    }

    #[test]
    fn exceptional_fraction_chebyshev() {
        let spec = WindowSpec::new(WindowKind::Multiplicative, 1_000_000, 1_000.0).unwrap();
        let r = variance(&ArithFn::Liouville, &spec).unwrap();
        let frac = r.exceptional_fraction(0.3).unwrap();
        assert!(frac <= r.mean_square / 0.09);
        assert_eq!(r.exceptional_fraction(1.5).unwrap(), 0.0);
        assert_eq!(r.exceptional_fraction(1e-12).unwrap(), r.abs_means().iter().filter(|&&m| m > 0.0).count() as f64 / 1e6);
        assert!(r.exceptional_fraction(0.0).is_err());
        let mut last = 1.0;
        for k in 1..40 {
            let tau = k as f64 * 0.025;
            let f = r.exceptional_fraction(tau).unwrap();
            assert!(f <= last);
            assert!(f <= r.mean_square / (tau * tau) + 1e-15);
            last = f;
        }
    }

    #[test]
    fn shift_consistency() {
        let x = 100_000u64;
        let h: f64 = 1_000.0;
        let delta = 1.0 / h.sqrt();
        let additive = variance(&ArithFn::Liouville, &WindowSpec::new(WindowKind::Additive, x, h).unwrap())
            .unwrap()
            .mean_square;
        let max_mult = [x, 3 * x / 2, 2 * x, 5 * x / 2, 3 * x]
            .iter()
            .map(|&xp| {
                variance(&ArithFn::Liouville, &WindowSpec::new(WindowKind::Multiplicative, xp, h).unwrap())
                    .unwrap()
                    .mean_square
            })
            .fold(0.0, f64::max);
        assert!(additive <= 40.0 * 4.0 * (delta + max_mult / delta));
    }

    #[test]
    fn window_l1_unit() {
        let spec = WindowSpec::new(WindowKind::Additive, 500, 7.0).unwrap();
        let vals = vec![Complex64::new(1.0, 0.0); 1100];
        assert!((window_l1(&spec, &vals, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parseval_single_term() {
        // Z(1+it) = −½·2^{−it}, so ∫_{|t|≤T}|Z|² = T/2.
        let coeffs = CoeffSeq::from_pairs(1, 2, vec![(2, Complex64::new(-0.5, 0.0))]).unwrap();
        let link = parseval_link_with(0.0, &coeffs, 40.0, 0.1).unwrap();
        assert!((link.integral - 20.0).abs() < 1e-9);
        assert!((link.rhs - 20.1).abs() < 1e-9);
        assert!(link.holds(1.0));
    }

    #[test]
    fn parseval_link_example() {
        let link = parseval_link(10_000, 100.0, 0.1).unwrap();
        assert!(link.holds(PARSEVAL_SLACK), "{link:?}");
        assert!(link.halving_delta <= 0.01 * link.rhs);
    }
}
