//! Compensated accumulation and uniform-grid quadrature shared by the
//! analytic modules.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated complex sum (independent compensation per component).
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexKahan {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexKahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn merge(&mut self, other: &ComplexKahan) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

impl FromIterator<Complex64> for ComplexKahan {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut acc = ComplexKahan::new();
        for z in iter {
            acc.add(z);
        }
        acc
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Number of consecutive nodes handled by one parallel work item. Fixed so
/// that reductions do not depend on the thread count.
pub(crate) const NODE_CHUNK: usize = 1024;

/// Result of a certified trapezoid integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certified<T> {
    pub value: T,
    /// Value at twice the step; `value - coarse` is the halving delta.
    pub coarse: T,
    pub step: f64,
    pub nodes: usize,
}

impl Certified<f64> {
    pub fn halving_delta(&self) -> f64 {
        (self.value - self.coarse).abs()
    }
}

impl Certified<Complex64> {
    pub fn halving_delta(&self) -> f64 {
        (self.value - self.coarse).norm()
    }
}

/// Trapezoid sums of `f` over `[a, b]` at step `<= max_step` and at twice
/// that step. `f` receives a batch of consecutive nodes `a + k*h` for
/// `k in first..first+len` and must return one value per node, letting the
/// caller exploit phase recurrences across a batch.
pub(crate) fn trapezoid_pair<F>(a: f64, b: f64, max_step: f64, f: F) -> (f64, f64, f64, usize)
where
    F: Fn(f64, f64, usize, usize) -> Vec<f64> + Sync,
{
    if b <= a {
        return (0.0, 0.0, max_step, 0);
    }
    // An even number of panels so that the coarse rule reuses every other node.
    let mut panels = ((b - a) / max_step).ceil() as usize;
    panels = panels.max(2);
    if panels % 2 == 1 {
        panels += 1;
    }
    let h = (b - a) / panels as f64;
    let n_nodes = panels + 1;
    let chunks: Vec<(KahanSum, KahanSum)> = (0..n_nodes.div_ceil(NODE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let first = c * NODE_CHUNK;
            let len = NODE_CHUNK.min(n_nodes - first);
            let vals = f(a, h, first, len);
            let mut fine = KahanSum::new();
            let mut coarse = KahanSum::new();
            for (i, v) in vals.into_iter().enumerate() {
                let k = first + i;
                let end = k == 0 || k == panels;
                let w = if end { 0.5 } else { 1.0 };
                fine.add(w * v);
                if k % 2 == 0 {
                    coarse.add(w * v);
                }
            }
            (fine, coarse)
        })
        .collect();
    let mut fine = KahanSum::new();
    let mut coarse = KahanSum::new();
    for (fc, cc) in &chunks {
        fine.merge(fc);
        coarse.merge(cc);
    }
    (fine.value() * h, coarse.value() * 2.0 * h, h, n_nodes)
}

/// Certified trapezoid integral of a real integrand; fails when halving the
/// step changes the result by more than `rel_tol * max(|value|, floor)`.
pub(crate) fn certified_trapezoid<F>(
    what: &'static str,
    a: f64,
    b: f64,
    max_step: f64,
    rel_tol: f64,
    floor: f64,
    f: F,
) -> Result<Certified<f64>>
where
    F: Fn(f64, f64, usize, usize) -> Vec<f64> + Sync,
{
    let (value, coarse, step, nodes) = trapezoid_pair(a, b, max_step, f);
    let cert = Certified {
        value,
        coarse,
        step,
        nodes,
    };
    let tolerance = rel_tol * value.abs().max(floor);
    if cert.halving_delta() > tolerance {
        return Err(Error::Quadrature {
            what,
            delta: cert.halving_delta(),
            tolerance,
        });
    }
    Ok(cert)
}

/// Like [`certified_trapezoid`], but halves the starting step up to
/// `refinements` times before giving up.
pub(crate) fn refined_trapezoid<F>(
    what: &'static str,
    a: f64,
    b: f64,
    max_step: f64,
    rel_tol: f64,
    floor: f64,
    refinements: u32,
    f: F,
) -> Result<Certified<f64>>
where
    F: Fn(f64, f64, usize, usize) -> Vec<f64> + Sync,
{
    let mut step = max_step;
    let mut last = None;
    for _ in 0..=refinements {
        match certified_trapezoid(what, a, b, step, rel_tol, floor, &f) {
            Ok(c) => return Ok(c),
            Err(e) => last = Some(e),
        }
        step *= 0.5;
    }
    Err(last.expect("at least one attempt"))
}

/// Distance from `x` to the nearest integer; values within `1e-15` of an
/// integer are treated as integral.
#[inline]
pub fn dist_to_int(x: f64) -> f64 {
    let d = (x - x.round()).abs();
    if d <= 1e-15 {
        0.0
    } else {
        d
    }
}

/// `e(x) = exp(2 pi i x)`, reducing `x` mod 1 first to keep the phase small.
#[inline]
pub fn e(x: f64) -> Complex64 {
    let frac = x - x.floor();
    let (s, c) = (std::f64::consts::TAU * frac).sin_cos();
    Complex64::new(c, s)
}

/// `h(p) = -p log p - (1-p) log(1-p)`, binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Formats `x` with 12 significant digits, trimming trailing zeros.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        // Rounding can carry into a new leading digit (9.99.. -> 10.0); that
        // only drops a digit, never adds one.
        s
    } else {
        let s = format!("{:.*e}", (DIGITS - 1) as usize, x);
        match s.split_once('e') {
            Some((mant, ex)) => {
                let mant = if mant.contains('.') {
                    mant.trim_end_matches('0').trim_end_matches('.')
                } else {
                    mant
                };
                format!("{mant}e{ex}")
            }
            None => s,
        }
    }
}

/// Rounds to 12 significant digits (the precision used in reports).
pub fn round_sig(x: f64) -> f64 {
    fmt_sig(x).parse().unwrap_or(x)
}
