//! The log-weighted random integer N on (x/w, x], the sign pattern
//! X_H = (λ(N+1), …, λ(N+H)) and residues Y_H = (N mod p)_{K0<p≤K1}, their
//! exact joint law and entropies, the functional F, and the identities
//! linking them to logarithmic two-point correlations of λ.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arith::{liouville_values, PrimeList};
use crate::error::{Error, Result};
use crate::numerics::{binary_entropy, KahanSum};

/// n-values per enumeration chunk.
const N_CHUNK: u64 = 1 << 16;

/// Largest `|Ω|·2^H` accepted by [`build_joint`].
pub const JOINT_CELL_LIMIT: u128 = 1 << 27;

/// Tolerance for the entropy identities.
pub const ENTROPY_TOLERANCE: f64 = 1e-10;

/// Slack constants on the residual envelopes.
pub const SUMA_ESPERANZA_SLACK: f64 = 20.0;
pub const DIVISIBILITY_SLACK: f64 = 5.0;
pub const Y_UNIFORM_SLACK: f64 = 10.0;

/// Lower end `⌊x/w⌋` of the support (x/w, x].
fn lower_end(x: u64, w: f64) -> u64 {
    if w.fract() == 0.0 {
        x / w as u64
    } else {
        (x as f64 / w).floor() as u64
    }
}

/// `P(N = n) = (1/n)/L` on the integers of (x/w, x].
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightedModel {
    pub x: u64,
    pub w: f64,
    /// ⌊x/w⌋; the support is lo < n ≤ x.
    pub lo: u64,
    /// `L = Σ 1/n` over the support.
    pub l: f64,
}

impl LogWeightedModel {
    pub fn new(x: u64, w: f64) -> Result<Self> {
        if !(w >= 1.0) || w > x as f64 {
            return Err(Error::invalid(format!("need 1 <= w <= x, got w = {w}, x = {x}")));
        }
        let lo = lower_end(x, w);
        Ok(LogWeightedModel {
            x,
            w,
            lo,
            l: harmonic(lo + 1, x),
        })
    }

    pub fn support_len(&self) -> u64 {
        self.x - self.lo
    }

    pub fn probability(&self, n: u64) -> f64 {
        if n > self.lo && n <= self.x {
            1.0 / (n as f64 * self.l)
        } else {
            0.0
        }
    }
}

/// `Σ_{a≤n≤b} 1/n`, compensated, in fixed chunk order.
fn harmonic(a: u64, b: u64) -> f64 {
    if b < a {
        return 0.0;
    }
    let parts: Vec<KahanSum> = chunk_starts(a, b)
        .into_par_iter()
        .map(|s| {
            let mut k = KahanSum::new();
            for n in s..=(s + N_CHUNK - 1).min(b) {
                k.add(1.0 / n as f64);
            }
            k
        })
        .collect();
    merge_all(&parts)
}

fn chunk_starts(a: u64, b: u64) -> Vec<u64> {
    if b < a {
        return Vec::new();
    }
    (0..=(b - a) / N_CHUNK).map(|c| a + c * N_CHUNK).collect()
}

fn merge_all(parts: &[KahanSum]) -> f64 {
    let mut k = KahanSum::new();
    for p in parts {
        k.merge(p);
    }
    k.value()
}

/// `(λ(N+1), …, λ(N+H))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignVector(pub Vec<i8>);

impl SignVector {
    pub fn new(v: Vec<i8>) -> Result<Self> {
        if v.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid("sign vector entries must be ±1"));
        }
        Ok(SignVector(v))
    }

    /// Bit j−1 is set when the j-th sign is −1.
    pub fn pack(&self) -> u64 {
        self.0.iter().enumerate().fold(0, |acc, (i, &s)| if s < 0 { acc | 1 << i } else { acc })
    }

    pub fn unpack(bits: u64, len: usize) -> Self {
        SignVector((0..len).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One residue per prime of the band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueVector {
    pub primes: Vec<u64>,
    pub residues: Vec<u64>,
}

impl ResidueVector {
    pub fn new(primes: Vec<u64>, residues: Vec<u64>) -> Result<Self> {
        if primes.len() != residues.len() || primes.iter().zip(&residues).any(|(p, r)| r >= p) {
            return Err(Error::invalid("each residue must lie in [0, p)"));
        }
        Ok(ResidueVector { primes, residues })
    }

    pub fn of(n: u64, primes: &[u64]) -> Self {
        ResidueVector {
            primes: primes.to_vec(),
            residues: primes.iter().map(|p| n % p).collect(),
        }
    }

    /// Mixed-radix index in Ω (first prime least significant).
    pub fn index(&self) -> u64 {
        self.primes
            .iter()
            .zip(&self.residues)
            .rev()
            .fold(0, |acc, (p, r)| acc * p + r)
    }

    pub fn from_index(mut idx: u64, primes: &[u64]) -> Self {
        let residues = primes
            .iter()
            .map(|p| {
                let r = idx % p;
                idx /= p;
                r
            })
            .collect();
        ResidueVector {
            primes: primes.to_vec(),
            residues,
        }
    }
}

/// Primes p with `εH/2 < p ≤ εH`.
pub fn prime_band(h: usize, epsilon: f64) -> Result<Vec<u64>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let k1 = epsilon * h as f64;
    let k0 = k1 / 2.0;
    let primes = PrimeList::new((k1.floor() as u64).max(2))?;
    Ok(primes.primes().iter().copied().filter(|&p| p as f64 > k0 && p as f64 <= k1).collect())
}

/// Finite joint law of (X, Y) with integer-coded outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    /// Length H of the sign vector (0 for joints built from raw masses).
    pub h: usize,
    /// Prime band defining Y (empty for raw joints).
    pub primes: Vec<u64>,
    masses: BTreeMap<(u64, u64), f64>,
    x_marginal: BTreeMap<u64, f64>,
    y_marginal: BTreeMap<u64, f64>,
}

impl JointDistribution {
    /// Builds a joint from explicit `((x, y), mass)` entries.
    pub fn from_masses(entries: impl IntoIterator<Item = ((u64, u64), f64)>) -> Result<Self> {
        let mut masses = BTreeMap::new();
        for (k, m) in entries {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::invalid(format!("mass {m} is not a nonnegative number")));
            }
            *masses.entry(k).or_insert(0.0) += m;
        }
        let total: f64 = masses.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Self::with_masses(0, Vec::new(), masses))
    }

    fn with_masses(h: usize, primes: Vec<u64>, masses: BTreeMap<(u64, u64), f64>) -> Self {
        let mut xk: BTreeMap<u64, KahanSum> = BTreeMap::new();
        let mut yk: BTreeMap<u64, KahanSum> = BTreeMap::new();
        for (&(x, y), &m) in &masses {
            xk.entry(x).or_default().add(m);
            yk.entry(y).or_default().add(m);
        }
        JointDistribution {
            h,
            primes,
            masses,
            x_marginal: xk.into_iter().map(|(k, v)| (k, v.value())).collect(),
            y_marginal: yk.into_iter().map(|(k, v)| (k, v.value())).collect(),
        }
    }

    pub fn masses(&self) -> &BTreeMap<(u64, u64), f64> {
        &self.masses
    }

    pub fn x_marginal(&self) -> &BTreeMap<u64, f64> {
        &self.x_marginal
    }

    pub fn y_marginal(&self) -> &BTreeMap<u64, f64> {
        &self.y_marginal
    }

    pub fn total_mass(&self) -> f64 {
        let mut k = KahanSum::new();
        for &m in self.masses.values() {
            k.add(m);
        }
        k.value()
    }

    /// `|Ω| = Π p` over the band.
    pub fn omega_size(&self) -> u64 {
        self.primes.iter().product()
    }

    /// `max_y |P(Y = y) − 1/|Ω||` over all of Ω, including unseen residues.
    pub fn y_uniform_deviation(&self) -> f64 {
        let size = self.omega_size();
        let u = 1.0 / size as f64;
        let seen = self.y_marginal.values().map(|&p| (p - u).abs()).fold(0.0, f64::max);
        if (self.y_marginal.len() as u64) < size {
            seen.max(u)
        } else {
            seen
        }
    }
}

fn entropy_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut k = KahanSum::new();
    for p in values {
        if p > 0.0 {
            k.add(-p * p.ln());
        }
    }
    k.value()
}

/// `−Σ p log p` in nats.
pub fn entropy(masses: &[f64]) -> Result<f64> {
    if masses.iter().any(|&m| !(m >= 0.0)) {
        return Err(Error::invalid("masses must be nonnegative"));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("masses sum to {total}, not 1")));
    }
    Ok(entropy_of(masses.iter().copied()))
}

pub fn joint_entropy(joint: &JointDistribution) -> f64 {
    entropy_of(joint.masses.values().copied())
}

pub fn x_entropy(joint: &JointDistribution) -> f64 {
    entropy_of(joint.x_marginal.values().copied())
}

pub fn y_entropy(joint: &JointDistribution) -> f64 {
    entropy_of(joint.y_marginal.values().copied())
}

/// `H(X|Y) = Σ_y P(Y=y) H(X|Y=y)` straight from the conditional laws.
pub fn conditional_entropy(joint: &JointDistribution) -> f64 {
    let mut by_y: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (&(_, y), &m) in &joint.masses {
        by_y.entry(y).or_default().push(m);
    }
    conditional_from_groups(by_y, &joint.y_marginal)
}

/// `H(Y|X)`, likewise.
pub fn conditional_entropy_y(joint: &JointDistribution) -> f64 {
    let mut by_x: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (&(x, _), &m) in &joint.masses {
        by_x.entry(x).or_default().push(m);
    }
    conditional_from_groups(by_x, &joint.x_marginal)
}

fn conditional_from_groups(groups: BTreeMap<u64, Vec<f64>>, marginal: &BTreeMap<u64, f64>) -> f64 {
    let mut k = KahanSum::new();
    for (key, ms) in groups {
        let py = marginal[&key];
        if py > 0.0 {
            k.add(py * entropy_of(ms.iter().map(|m| m / py)));
        }
    }
    k.value()
}

/// `I(X,Y) = H(X) + H(Y) − H(X,Y)`.
pub fn mutual_information(joint: &JointDistribution) -> f64 {
    x_entropy(joint) + y_entropy(joint) - joint_entropy(joint)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProperties {
    pub h_x: f64,
    pub h_y: f64,
    pub h_xy: f64,
    pub h_x_given_y: f64,
    pub h_y_given_x: f64,
    pub mutual: f64,
    /// Largest violation among the chain rules and `H(X|Y) = H(X) − I`.
    pub chain_residual: f64,
    /// `H(X,Y) − H(X) − H(Y)`, nonpositive by subadditivity.
    pub subadditivity_excess: f64,
    /// `log` of the number of possible X and Y values.
    pub log_x_values: f64,
    pub log_y_values: f64,
}

impl EntropyProperties {
    /// The five basic properties and the chain identities, to `tol`.
    pub fn hold(&self, tol: f64) -> bool {
        self.h_x >= -tol
            && self.h_y >= -tol
            && self.h_x_given_y >= -tol
            && self.h_y_given_x >= -tol
            && self.mutual >= -tol
            && self.chain_residual <= tol
            && self.h_x_given_y <= self.h_x + tol
            && self.subadditivity_excess <= tol
            && self.h_x <= self.log_x_values + tol
            && self.h_y <= self.log_y_values + tol
    }
}

pub fn entropy_properties(joint: &JointDistribution) -> EntropyProperties {
    let h_x = x_entropy(joint);
    let h_y = y_entropy(joint);
    let h_xy = joint_entropy(joint);
    let h_x_given_y = conditional_entropy(joint);
    let h_y_given_x = conditional_entropy_y(joint);
    let mutual = h_x + h_y - h_xy;
    let chain_residual = [
        (h_xy - h_x_given_y - h_y).abs(),
        (h_xy - h_y_given_x - h_x).abs(),
        (h_x_given_y - (h_x - mutual)).abs(),
        (h_y_given_x - (h_y - mutual)).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let (log_x_values, log_y_values) = if joint.h > 0 {
        (joint.h as f64 * std::f64::consts::LN_2, (joint.omega_size() as f64).ln())
    } else {
        ((joint.x_marginal.len() as f64).ln(), (joint.y_marginal.len() as f64).ln())
    };
    EntropyProperties {
        h_x,
        h_y,
        h_xy,
        h_x_given_y,
        h_y_given_x,
        mutual,
        chain_residual,
        subadditivity_excess: h_xy - h_x - h_y,
        log_x_values,
        log_y_values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Forward,
    Reverse,
}

fn check_joint_budget(h: usize, primes: &[u64]) -> Result<()> {
    let omega: u128 = primes.iter().map(|&p| p as u128).product();
    let cells = if h >= 64 { u128::MAX } else { omega.saturating_mul(1u128 << h) };
    if h > 63 || cells > JOINT_CELL_LIMIT {
        return Err(Error::Budget {
            what: "joint distribution cells |Ω|·2^H",
            requested: cells,
            limit: JOINT_CELL_LIMIT,
        });
    }
    Ok(())
}

/// Exact joint law of `(X_{H1,H1+H2}, (N mod p)_p)` with signs
/// `λ(N+H1+1), …, λ(N+H1+H2)`.
fn build_window_joint(model: &LogWeightedModel, offset: usize, h: usize, primes: &[u64], order: Order) -> Result<JointDistribution> {
    check_joint_budget(h, primes)?;
    let a = model.lo + 1;
    let b = model.x;
    let lam = liouville_values(a, b + (offset + h) as u64 + 1)?;
    let mut starts = chunk_starts(a, b);
    if order == Order::Reverse {
        starts.reverse();
    }
    let parts: Vec<HashMap<(u64, u64), KahanSum>> = starts
        .into_par_iter()
        .map(|s| {
            let e = (s + N_CHUNK - 1).min(b);
            let mut map: HashMap<(u64, u64), KahanSum> = HashMap::new();
            let mut visit = |n: u64| {
                let i = (n - a) as usize + offset;
                let bits = lam[i + 1..=i + h]
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (j, &l)| if l < 0 { acc | 1 << j } else { acc });
                let y = primes.iter().rev().fold(0u64, |acc, &p| acc * p + n % p);
                map.entry((bits, y)).or_default().add(1.0 / n as f64);
            };
            match order {
                Order::Forward => (s..=e).for_each(&mut visit),
                Order::Reverse => (s..=e).rev().for_each(&mut visit),
            }
            map
        })
        .collect();
    let mut merged: HashMap<(u64, u64), KahanSum> = HashMap::new();
    for part in parts {
        for (k, v) in part {
            merged.entry(k).or_default().merge(&v);
        }
    }
    let masses = merged.into_iter().map(|(k, v)| (k, v.value() / model.l)).collect();
    Ok(JointDistribution::with_masses(h, primes.to_vec(), masses))
}

/// Exact joint law of `(X_H, Y_H)` under the log-weighted model with the
/// band `εH/2 < p ≤ εH`.
pub fn build_joint(model: &LogWeightedModel, h: usize, epsilon: f64) -> Result<JointDistribution> {
    build_joint_ordered(model, h, epsilon, Order::Forward)
}

pub fn build_joint_ordered(model: &LogWeightedModel, h: usize, epsilon: f64, order: Order) -> Result<JointDistribution> {
    if h == 0 {
        return Err(Error::invalid("H must be positive"));
    }
    let primes = prime_band(h, epsilon)?;
    build_window_joint(model, 0, h, &primes, order)
}

/// `H(X_{H1,H1+H2})`, the entropy of `λ(N+H1+1), …, λ(N+H1+H2)`.
pub fn window_entropy(model: &LogWeightedModel, offset: usize, len: usize) -> Result<f64> {
    Ok(x_entropy(&build_window_joint(model, offset, len, &[], Order::Forward)?))
}

/// `F_p(x, t) = Σ_{j≤H−p, j≡−t (p)} x_j x_{j+p}` (x indexed from 1).
pub fn f_component(xvec: &[i8], p: u64, t: u64) -> i64 {
    let h = xvec.len() as u64;
    if p >= h {
        return 0;
    }
    // Smallest j ≥ 1 with j ≡ −t (mod p).
    let first = match (p - t % p) % p {
        0 => p,
        r => r,
    };
    (first..=h - p)
        .step_by(p as usize)
        .map(|j| (xvec[(j - 1) as usize] * xvec[(j + p - 1) as usize]) as i64)
        .sum()
}

/// `F(x, y) = Σ_p F_p(x, y_p)`.
pub fn f_value(xvec: &SignVector, yvec: &ResidueVector) -> i64 {
    yvec.primes
        .iter()
        .zip(&yvec.residues)
        .map(|(&p, &t)| f_component(&xvec.0, p, t))
        .sum()
}

/// `Σ_p (⌊(H−p)/p⌋ + 1)`, the largest possible |F|.
pub fn f_sup_bound(h: usize, primes: &[u64]) -> i64 {
    primes
        .iter()
        .filter(|&&p| (p as usize) < h)
        .map(|&p| ((h as u64 - p) / p + 1) as i64)
        .sum()
}

/// `E F(X_H, Y_H)`.
pub fn expectation_f(joint: &JointDistribution) -> f64 {
    let mut k = KahanSum::new();
    for (&(bits, y), &m) in &joint.masses {
        let x = SignVector::unpack(bits, joint.h);
        let r = ResidueVector::from_index(y, &joint.primes);
        k.add(m * f_value(&x, &r) as f64);
    }
    k.value()
}

/// `E F(X_H, Y*)` with Y* uniform on Ω and independent of X_H, through
/// `G(x) = Σ_p (1/p) Σ_{j≤H−p} x_j x_{j+p}`.
pub fn expectation_f_independent(joint: &JointDistribution) -> f64 {
    let mut k = KahanSum::new();
    for (&bits, &m) in &joint.x_marginal {
        let x = SignVector::unpack(bits, joint.h);
        let g: f64 = joint
            .primes
            .iter()
            .filter(|&&p| (p as usize) < joint.h)
            .map(|&p| {
                let p = p as usize;
                let s: i64 = (0..joint.h - p).map(|j| (x.0[j] * x.0[j + p]) as i64).sum();
                s as f64 / p as f64
            })
            .sum();
        k.add(m * g);
    }
    k.value()
}

/// The same expectation by averaging F over every y ∈ Ω.
pub fn expectation_f_uniform_average(joint: &JointDistribution) -> f64 {
    let size = joint.omega_size();
    let mut k = KahanSum::new();
    for (&bits, &m) in &joint.x_marginal {
        let x = SignVector::unpack(bits, joint.h);
        let mut s = 0i64;
        for y in 0..size {
            s += f_value(&x, &ResidueVector::from_index(y, &joint.primes));
        }
        k.add(m * s as f64 / size as f64);
    }
    k.value()
}

/// `Σ_{x/w<n≤x} λ(n)λ(n+1)/n`.
pub fn log_chowla_sum(x: u64, w: f64) -> Result<f64> {
    if !(w >= 1.0) || w > x as f64 {
        return Err(Error::invalid(format!("need 1 <= w <= x, got w = {w}")));
    }
    let lo = lower_end(x, w);
    shifted_log_sum(lo, x, 1, 1, Order::Forward)
}

/// `Σ_{lo<n≤x, d|n} λ(n)λ(n+shift)/n`.
fn shifted_log_sum(lo: u64, x: u64, d: u64, shift: u64, order: Order) -> Result<f64> {
    let first = (lo / d + 1) * d;
    if first > x {
        return Ok(0.0);
    }
    let lam = liouville_values(first, x + shift + 1)?;
    let count = (x - first) / d + 1;
    let mut starts = chunk_starts(0, count - 1);
    if order == Order::Reverse {
        starts.reverse();
    }
    let parts: Vec<KahanSum> = starts
        .into_par_iter()
        .map(|s| {
            let e = (s + N_CHUNK - 1).min(count - 1);
            let mut k = KahanSum::new();
            let mut visit = |i: u64| {
                let n = first + i * d;
                let off = (n - first) as usize;
                k.add((lam[off] * lam[off + shift as usize]) as f64 / n as f64);
            };
            match order {
                Order::Forward => (s..=e).for_each(&mut visit),
                Order::Reverse => (s..=e).rev().for_each(&mut visit),
            }
            k
        })
        .collect();
    Ok(merge_all(&parts))
}

/// `Σ_{K0<p≤K1} Σ_{x/w<n≤x, p|n} λ(n)λ(n+p)/n` over the given primes.
fn prime_divisible_sum(lo: u64, x: u64, primes: &[u64], order: Order) -> Result<f64> {
    let mut k = KahanSum::new();
    let mut ps = primes.to_vec();
    if order == Order::Reverse {
        ps.reverse();
    }
    for p in ps {
        k.add(shifted_log_sum(lo, x, p, p, order)?);
    }
    Ok(k.value())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub bound: f64,
}

impl ResidualReport {
    pub fn ratio(&self) -> f64 {
        self.residual / self.bound
    }

    pub fn holds(&self) -> bool {
        self.residual <= self.bound
    }
}

/// Compares the logarithmic correlation at shift 1 with its average over
/// shifts p ∈ (K0, K1] restricted to p | n, weighted by `1/ℓ`.
pub fn divisibility_trick_residual(x: u64, w: f64, k0: u64, k1: u64) -> Result<ResidualReport> {
    let model = LogWeightedModel::new(x, w)?;
    if k0 < 1 || k1 < k0 || k1 as f64 >= x as f64 / w {
        return Err(Error::invalid(format!("need 1 <= K0 <= K1 < x/w, got ({k0}, {k1})")));
    }
    let primes: Vec<u64> = PrimeList::new(k1.max(2))?.primes().iter().copied().filter(|&p| p > k0).collect();
    let ell: f64 = primes.iter().map(|&p| 1.0 / p as f64).sum();
    if ell == 0.0 {
        return Err(Error::Precondition(format!("no prime in ({k0}, {k1}]")));
    }
    let lhs = log_chowla_sum(x, w)?;
    let rhs = prime_divisible_sum(model.lo, x, &primes, Order::Forward)? / ell;
    Ok(ResidualReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        bound: DIVISIBILITY_SLACK * (k1 as f64).ln() / ell,
    })
}

/// `|Σ_p Σ_{p|n} λ(n)λ(n+p)/n − (L/H) E F(X_H, Y_H)|` against
/// `20 ε log w / log H`.
pub fn suma_esperanza_residual(x: u64, w: f64, h: usize, epsilon: f64) -> Result<ResidualReport> {
    suma_esperanza_residual_ordered(x, w, h, epsilon, Order::Forward)
}

pub fn suma_esperanza_residual_ordered(x: u64, w: f64, h: usize, epsilon: f64, order: Order) -> Result<ResidualReport> {
    let model = LogWeightedModel::new(x, w)?;
    if h < 2 || h as f64 > x as f64 / w {
        return Err(Error::invalid(format!("need 2 <= H <= x/w, got H = {h}")));
    }
    let floor = (1.0 / w.ln()).max(1.0 / (h as f64).sqrt());
    if !(epsilon >= floor && epsilon <= 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in [{floor}, 1], got {epsilon}")));
    }
    let joint = build_joint_ordered(&model, h, epsilon, order)?;
    let lhs = prime_divisible_sum(model.lo, x, &joint.primes, order)?;
    let rhs = model.l / h as f64 * expectation_f(&joint);
    Ok(ResidualReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        bound: SUMA_ESPERANZA_SLACK * epsilon * w.ln() / (h as f64).ln(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingReport {
    pub empirical: f64,
    /// `2 exp(−s²/(2C²n))`.
    pub bound: f64,
    /// `3 √(bound/trials)`.
    pub slack: f64,
    pub trials: u64,
}

impl HoeffdingReport {
    pub fn holds(&self) -> bool {
        self.empirical <= self.bound + self.slack
    }
}

/// Trials per seeded stream.
const TRIAL_CHUNK: u64 = 1024;

/// Empirical `P(|S − E S| ≥ s)` for a sum of n i.i.d. uniform [−C, C]
/// variables. Chunk k of trials draws from stream k of the seeded generator.
pub fn hoeffding_tail_check(n: u64, c: f64, s: f64, trials: u64, seed: u64) -> Result<HoeffdingReport> {
    if trials < 1000 || n == 0 || !(c > 0.0) || !(s >= 0.0) {
        return Err(Error::invalid("need n >= 1, C > 0, s >= 0 and at least 1000 trials"));
    }
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let count = TRIAL_CHUNK.min(trials - k * TRIAL_CHUNK);
            (0..count)
                .filter(|_| {
                    let sum: f64 = (0..n).map(|_| rng.gen_range(-c..=c)).sum();
                    sum.abs() >= s
                })
                .count() as u64
        })
        .sum();
    let bound = 2.0 * (-s * s / (2.0 * c * c * n as f64)).exp();
    Ok(HoeffdingReport {
        empirical: hits as f64 / trials as f64,
        bound,
        slack: 3.0 * (bound / trials as f64).sqrt(),
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    /// Smallest admissible δ: `max(1 − H(Y)/log|Ω|, 1/log|Ω|)`.
    pub delta: f64,
    pub probability: f64,
    /// `2/M`.
    pub bound: f64,
    pub holds: bool,
}

/// Checks `P(Y ∈ E) ≤ 2/M` for a high-entropy law on Ω (given as a mass
/// vector) and `|E| ≤ |Ω|^{1−Mδ}`. Violated hypotheses are reported as
/// [`Error::Precondition`].
pub fn concentration_check(dist: &[f64], e: &[usize], m: f64) -> Result<ConcentrationReport> {
    if dist.len() < 2 {
        return Err(Error::invalid("Ω needs at least two points"));
    }
    if !(m > 0.0) {
        return Err(Error::invalid(format!("M must be positive, got {m}")));
    }
    let h = entropy(dist)?;
    let log_omega = (dist.len() as f64).ln();
    let delta = (1.0 - h / log_omega).max(1.0 / log_omega);
    if delta >= 1.0 {
        return Err(Error::Precondition(format!("entropy {h} too small: δ = {delta} >= 1")));
    }
    let mut members = e.to_vec();
    members.sort_unstable();
    members.dedup();
    if members.iter().any(|&i| i >= dist.len()) {
        return Err(Error::invalid("E contains an index outside Ω"));
    }
    let allowed = (dist.len() as f64).powf(1.0 - m * delta);
    if members.len() as f64 > allowed * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "|E| = {} exceeds |Ω|^(1−Mδ) = {allowed}",
            members.len()
        )));
    }
    let mut k = KahanSum::new();
    for &i in &members {
        k.add(dist[i]);
    }
    let probability = k.value();
    let bound = 2.0 / m;
    Ok(ConcentrationReport {
        delta,
        probability,
        bound,
        holds: probability <= bound,
    })
}

/// Total variation `½ Σ|p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `(|H(p) − H(q)|, TV·log(k−1) + h(TV))` for laws on the same k points.
pub fn entropy_continuity(p: &[f64], q: &[f64]) -> Result<(f64, f64)> {
    if p.len() != q.len() || p.len() < 2 {
        return Err(Error::invalid("distributions must share a support of at least two points"));
    }
    let tv = total_variation(p, q).min(1.0);
    let diff = (entropy(p)? - entropy(q)?).abs();
    Ok((diff, tv * ((p.len() - 1) as f64).ln() + binary_entropy(tv)))
}

/// `log log log h` when it is positive, that is for h > e^e.
pub fn log3_positive(h: f64) -> Option<f64> {
    let l3 = h.ln().ln().ln();
    (l3.is_finite() && l3 > 0.0).then_some(l3)
}

/// `k = ⌊4 log h log₃ h⌋`, raised to 2 where the formula gives less
/// (including every h ≤ e^e, where log₃ h ≤ 0).
pub fn growth_factor(log_h: f64) -> u64 {
    let l3 = log_h.ln().ln();
    let k = 4.0 * log_h * l3;
    if k.is_finite() && k >= 2.0 {
        k.floor() as u64
    } else {
        2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub h: usize,
    pub entropy_rate: f64,
    pub information_rate: f64,
    pub x_entropy: f64,
    /// `1/(log h log₃ h)` where defined.
    pub threshold: Option<f64>,
}

impl TraceStep {
    pub fn is_witness(&self) -> bool {
        self.threshold.is_some_and(|t| self.information_rate <= t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecrementTrace {
    pub steps: Vec<TraceStep>,
    /// Index of the first step with `I/h ≤ 1/(log h log₃ h)`.
    pub first_witness: Option<usize>,
    /// Why the trace stopped before `max_steps`, if it did.
    pub stopped: Option<String>,
}

impl DecrementTrace {
    /// `H(X_{h_{j+1}}) ≤ k_j H(X_{h_j}) + tol` at each consecutive pair.
    pub fn subadditive(&self, tol: f64) -> bool {
        self.steps.windows(2).all(|w| {
            let k = (w[1].h / w[0].h) as f64;
            w[1].x_entropy <= k * w[0].x_entropy + tol
        })
    }
}

/// Entropy and information rates along `h_{j+1} = k_j h_j`, stopping at
/// `max_steps` or when the joint no longer fits the budget.
pub fn decrement_trace(x: u64, w: f64, epsilon: f64, h0: usize, max_steps: usize) -> Result<DecrementTrace> {
    if h0 < 1 {
        return Err(Error::invalid("H0 must be positive"));
    }
    let model = LogWeightedModel::new(x, w)?;
    let mut steps = Vec::new();
    let mut stopped = None;
    let mut h = h0;
    for _ in 0..max_steps {
        let joint = match build_joint(&model, h, epsilon) {
            Ok(j) => j,
            Err(e) if e.is_resource() => {
                stopped = Some(format!("h = {h}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let hx = x_entropy(&joint);
        let info = mutual_information(&joint);
        let lh = (h as f64).ln();
        steps.push(TraceStep {
            h,
            entropy_rate: hx / h as f64,
            information_rate: info / h as f64,
            x_entropy: hx,
            threshold: log3_positive(h as f64).map(|l3| 1.0 / (lh * l3)),
        });
        h = h
            .checked_mul(growth_factor(lh) as usize)
            .ok_or_else(|| Error::Overflow("trace scale".into()))?;
    }
    let first_witness = steps.iter().position(TraceStep::is_witness);
    Ok(DecrementTrace {
        steps,
        first_witness,
        stopped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub j: usize,
    pub partial_sums: Vec<f64>,
    pub log_h: Vec<f64>,
    /// `log J ≤ 10 (log log h1)²`.
    pub bound_holds: bool,
}

fn big_ln(h: &BigUint) -> f64 {
    let bits = h.bits();
    if bits <= 1000 {
        h.to_f64().expect("fits").ln()
    } else {
        let top = (h >> (bits - 64)).to_f64().expect("64 bits");
        top.ln() + (bits - 64) as f64 * std::f64::consts::LN_2
    }
}

/// Smallest J with `Σ_{j≤J} 1/(log h_j log₃ h_j) ≥ target`. Terms with
/// h_j ≤ e^e, where log₃ h_j ≤ 0, contribute nothing.
pub fn divergence_sequence(h1: u64, target: f64, max_steps: usize) -> Result<DivergenceReport> {
    if h1 < 15 {
        return Err(Error::invalid(format!("h1 must be at least 15, got {h1}")));
    }
    if !(target > 0.0) {
        return Err(Error::invalid("target must be positive"));
    }
    let mut h = BigUint::from(h1);
    let mut sum = 0.0;
    let mut partial_sums = Vec::new();
    let mut log_h = Vec::new();
    for _ in 0..max_steps {
        debug_assert!(!h.is_zero());
        let lh = big_ln(&h);
        if let Some(l3) = log3_positive_from_log(lh) {
            sum += 1.0 / (lh * l3);
        }
        partial_sums.push(sum);
        log_h.push(lh);
        if sum >= target {
            let j = partial_sums.len();
            let l2 = (h1 as f64).ln().ln();
            return Ok(DivergenceReport {
                j,
                partial_sums,
                log_h,
                bound_holds: (j as f64).ln() <= 10.0 * l2 * l2,
            });
        }
        h *= growth_factor(lh);
    }
    Err(Error::NotReached(format!("target {target} not reached in {max_steps} steps (sum {sum})")))
}

fn log3_positive_from_log(log_h: f64) -> Option<f64> {
    let l3 = log_h.ln().ln();
    (l3.is_finite() && l3 > 0.0).then_some(l3)
}
