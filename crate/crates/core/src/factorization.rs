//! The factorisation weight u_X: a convolution of a short prime band with a
//! rough cofactor, averaged over dQ/Q, that agrees with 1_{(X,2X]} outside
//! a small exceptional set.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::arith::{build_sieve, trial_factorize, FactorTable};
use crate::error::{Error, Result};
use crate::numerics::{ComplexKahan, KahanSum};

/// Parameters `(X, δ, P₀, Q₀)` of the weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamareWeight {
    pub x: u64,
    pub delta: f64,
    pub p0: u64,
    pub q0: u64,
}

/// Which constraint produced an end of the admissible Q-interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edge {
    BandLow,
    BandHigh,
    Other,
}

impl RamareWeight {
    pub fn new(x: u64, delta: f64, p0: u64, q0: u64) -> Result<Self> {
        if x == 0 {
            return Err(Error::invalid("X must be positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta = {delta} not in (0, 1)")));
        }
        if !(2 <= p0 && p0 < q0) {
            return Err(Error::invalid(format!("need 2 <= P0 < Q0, got P0 = {p0}, Q0 = {q0}")));
        }
        Ok(Self { x, delta, p0, q0 })
    }

    /// `α = log P₀ / log Q₀`.
    pub fn alpha(&self) -> f64 {
        (self.p0 as f64).ln() / (self.q0 as f64).ln()
    }

    /// Largest integer `n` with `n <= 2(1+δ)X`.
    pub fn support_top(&self) -> u64 {
        (2.0 * (1.0 + self.delta) * self.x as f64).floor() as u64
    }

    fn indicator(&self, n: u64) -> f64 {
        if n > self.x && n <= 2 * self.x {
            1.0
        } else {
            0.0
        }
    }

    /// u_X(n) from the factorisation `[(p, e)]` of `n`, in increasing `p`.
    ///
    /// For a prime `p | n` with cofactor `m = n/p`, the admissible Q form the
    /// interval
    /// `[max(P₀, p/(1+δ), X/m), min(Q₀, p, 2X/m, r/(1+δ))]`,
    /// `r` being the least prime factor of `m` that is `≥ P₀`.
    pub fn eval_factored(&self, n: u64, factors: &[(u64, u32)]) -> f64 {
        let l = (1.0 + self.delta).ln();
        let band_top = (1.0 + self.delta) * self.q0 as f64;
        let mut total = KahanSum::new();
        for (i, &(p, e)) in factors.iter().enumerate() {
            if p <= self.p0 || p as f64 > band_top {
                continue;
            }
            let m = n / p;
            // Least prime factor of m that is >= P0.
            let r = factors
                .iter()
                .enumerate()
                .filter(|&(j, &(q, _))| q >= self.p0 && (j != i || e > 1))
                .map(|(_, &(q, _))| q)
                .next();
            let lp = (p as f64).ln();
            let lows = [
                ((self.p0 as f64).ln(), Edge::Other),
                (lp - l, Edge::BandLow),
                ((self.x as f64).ln() - (m as f64).ln(), Edge::Other),
            ];
            let mut highs = vec![
                ((self.q0 as f64).ln(), Edge::Other),
                (lp, Edge::BandHigh),
                ((2.0 * self.x as f64).ln() - (m as f64).ln(), Edge::Other),
            ];
            if let Some(r) = r {
                highs.push(((r as f64).ln() - l, Edge::Other));
            }
            let lo = pick(&lows, |a, b| a > b);
            let hi = pick(&highs, |a, b| a < b);
            if hi.0 <= lo.0 {
                continue;
            }
            if lo.1 == Edge::BandLow && hi.1 == Edge::BandHigh {
                total.add(1.0);
            } else {
                total.add((hi.0 - lo.0) / l);
            }
        }
        total.value()
    }
}

/// The extreme entry under `better`, preferring band edges on ties.
fn pick(cands: &[(f64, Edge)], better: impl Fn(f64, f64) -> bool) -> (f64, Edge) {
    let mut best = cands[0];
    for &c in &cands[1..] {
        if better(c.0, best.0) || (c.0 == best.0 && c.1 != Edge::Other) {
            best = c;
        }
    }
    best
}

/// u_X(n), factoring `n` by trial division.
pub fn ramare_weight(w: &RamareWeight, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("ramare_weight needs n >= 1"));
    }
    Ok(w.eval_factored(n, &trial_factorize(n)))
}

/// Tolerance for `u_X(n) = 1_{(X,2X]}(n)`.
pub const EQUALITY_TOLERANCE: f64 = 1e-12;
/// Mismatches at most this large are listed as near misses.
pub const NEAR_MISS: f64 = 1e-6;

/// The exceptional set `{n ∈ (X, 2(1+δ)X] : u_X(n) ≠ 1_{(X,2X]}(n)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrReport {
    pub members: Vec<u64>,
    /// `(n, u_X(n) − 1_{(X,2X]}(n))` with `0 < |difference| ≤ 10⁻⁶`.
    pub near_misses: Vec<(u64, f64)>,
    /// `|Err| / X`.
    pub density: f64,
    pub min_weight: f64,
    pub max_weight: f64,
}

fn factor_table(w: &RamareWeight) -> Result<FactorTable> {
    let top = w
        .support_top()
        .checked_add(1)
        .ok_or_else(|| Error::Overflow("support bound".into()))?;
    build_sieve(1, top)
}

/// All `u_X(n)` for `n ∈ (X, 2(1+δ)X]`, in order.
pub fn weights_on_support(w: &RamareWeight) -> Result<Vec<(u64, f64)>> {
    let table = factor_table(w)?;
    Ok((w.x + 1..=w.support_top())
        .into_par_iter()
        .map(|n| (n, w.eval_factored(n, &table.factorize(n))))
        .collect())
}

pub fn err_set(w: &RamareWeight) -> Result<ErrReport> {
    let weights = weights_on_support(w)?;
    let mut members = Vec::new();
    let mut near_misses = Vec::new();
    let mut min_weight = f64::INFINITY;
    let mut max_weight = f64::NEG_INFINITY;
    for &(n, u) in &weights {
        min_weight = min_weight.min(u);
        max_weight = max_weight.max(u);
        let diff = u - w.indicator(n);
        if diff.abs() > EQUALITY_TOLERANCE {
            members.push(n);
        }
        if diff != 0.0 && diff.abs() <= NEAR_MISS {
            near_misses.push((n, diff));
        }
    }
    Ok(ErrReport {
        density: members.len() as f64 / w.x as f64,
        members,
        near_misses,
        min_weight,
        max_weight,
    })
}

/// Quadrature residual of the factorised Dirichlet series at s = 1 + it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    pub residual: f64,
    /// `Σ 1/n` over `(X, 2(1+δ)X]`, the natural scale of the series.
    pub scale: f64,
    pub q_nodes: usize,
}

/// `|Z_{λ1_{(X,2X]}}(s) − Z_err(s) − (1/log(1+δ)) ∫_{P₀}^{Q₀} Z₁ Z₂ dQ/Q|` with
/// the Q-integral evaluated by the midpoint rule in `log Q` with about
/// `q_nodes` panels (the reported count includes the extra panels created by
/// splitting at prime breakpoints).
pub fn factorization_identity_residual(w: &RamareWeight, t: f64, q_nodes: usize) -> Result<IdentityResidual> {
    if q_nodes < 16 {
        return Err(Error::invalid(format!("q_nodes = {q_nodes} must be at least 16")));
    }
    if !t.is_finite() {
        return Err(Error::invalid("t must be finite"));
    }
    let table = factor_table(w)?;
    let top = w.support_top();
    let s = Complex64::new(1.0, t);
    let term = |n: u64| (-s * (n as f64).ln()).exp() * table.lambda(n) as f64;

    let mut lhs = ComplexKahan::new();
    for n in w.x + 1..=2 * w.x {
        lhs.add(term(n));
    }
    let mut err = ComplexKahan::new();
    let mut scale = KahanSum::new();
    for n in w.x + 1..=top {
        let u = w.eval_factored(n, &table.factorize(n));
        let e = w.indicator(n) - u;
        if e != 0.0 {
            err.add(term(n) * e);
        }
        scale.add(1.0 / n as f64);
    }

    // Cofactor data: m ranges up to 2X/P0.
    let m_top = (2 * w.x) / w.p0 + 1;
    let rough: Vec<f64> = (0..=m_top)
        .map(|m| {
            if m == 0 {
                return 0.0;
            }
            table
                .factorize(m)
                .iter()
                .map(|&(q, _)| q)
                .find(|&q| q >= w.p0)
                .map_or(f64::INFINITY, |q| q as f64)
        })
        .collect();
    let m_terms: Vec<Complex64> = (0..=m_top).map(|m| if m == 0 { Complex64::new(0.0, 0.0) } else { term(m) }).collect();
    let band_top = ((1.0 + w.delta) * w.q0 as f64).floor() as u64 + 1;
    let primes: Vec<u64> = (w.p0 + 1..=band_top).filter(|&n| table.is_prime(n)).collect();
    let p_terms: Vec<Complex64> = primes.iter().map(|&p| term(p)).collect();

    // Z1 and the roughness condition only change where Q, Q(1+δ) cross a
    // prime; the panels are laid out between those breakpoints so that the
    // midpoint rule only sees the jumps of the m-window (X/Q, 2X/Q].
    let (a, b) = ((w.p0 as f64).ln(), (w.q0 as f64).ln());
    let l = (1.0 + w.delta).ln();
    let mut cuts = vec![a, b];
    for &p in &primes {
        let lp = (p as f64).ln();
        cuts.extend([lp, lp - l]);
    }
    cuts.retain(|&c| c >= a && c <= b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    for pair in cuts.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi <= lo {
            continue;
        }
        let panels = ((q_nodes as f64 * (hi - lo) / (b - a)).round() as usize).max(1);
        let h = (hi - lo) / panels as f64;
        nodes.extend((0..panels).map(|k| (lo + (k as f64 + 0.5) * h, h)));
    }
    let x = w.x as f64;
    let partial: Vec<ComplexKahan> = nodes
        .par_iter()
        .map(|&(u, h)| {
            let q = u.exp();
            let mut z1 = ComplexKahan::new();
            let band = (1.0 + w.delta) * q;
            let i = primes.partition_point(|&p| (p as f64) <= q);
            for (j, &p) in primes.iter().enumerate().skip(i) {
                if p as f64 > band {
                    break;
                }
                z1.add(p_terms[j]);
            }
            let mut z2 = ComplexKahan::new();
            let m_lo = (x / q).floor() as u64 + 1;
            let m_hi = ((2.0 * x / q).floor() as u64).min(m_top);
            for m in m_lo..=m_hi {
                if rough[m as usize] >= band {
                    z2.add(m_terms[m as usize]);
                }
            }
            let mut out = ComplexKahan::new();
            out.add(z1.value() * z2.value() * h);
            out
        })
        .collect();
    let mut integral = ComplexKahan::new();
    for p in &partial {
        integral.merge(p);
    }
    let q_nodes = nodes.len();
    let rhs = err.value() + integral.value() / l;
    Ok(IdentityResidual {
        residual: (lhs.value() - rhs).norm(),
        scale: scale.value(),
        q_nodes,
    })
}

/// Residuals along `q_nodes = start, 2·start, ...` (`levels` entries). The
/// integrand is piecewise constant in Q, so single doublings need not halve
/// the residual; [`ladder_slope`] measures the order over the whole ladder.
pub fn identity_ladder(w: &RamareWeight, t: f64, start: usize, levels: u32) -> Result<Vec<IdentityResidual>> {
    (0..levels)
        .map(|k| factorization_identity_residual(w, t, start << k))
        .collect()
}

/// Least-squares slope of `log residual` against `log q_nodes`.
pub fn ladder_slope(ladder: &[IdentityResidual]) -> f64 {
    let pts: Vec<(f64, f64)> = ladder
        .iter()
        .map(|r| ((r.q_nodes as f64).ln(), r.residual.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}
