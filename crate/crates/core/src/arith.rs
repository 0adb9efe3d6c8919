//! Segmented sieves and exact arithmetic functions (λ, μ, Ω, smallest prime
//! factor, prime lists, and the summatory counts built from them).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::KahanSum;

/// Sieve sizing. `segment_len` bounds the working set of the streaming scans;
/// `max_table_len` bounds the length of a materialised [`FactorTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SieveConfig {
    pub segment_len: usize,
    pub max_table_len: usize,
}

impl Default for SieveConfig {
    fn default() -> Self {
        Self {
            segment_len: 1 << 20,
            max_table_len: 1 << 26,
        }
    }
}

/// Block size for parallel work inside one segment. Results never depend on it.
const BLOCK: usize = 1 << 15;

const NON_SQUAREFREE: u8 = 0x80;
const OMEGA_MASK: u8 = 0x7f;

pub fn isqrt(n: u64) -> u64 {
    if n < 2 {
        return n;
    }
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).map_or(true, |sq| sq > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

/// Primes `p <= n` by a plain sieve of Eratosthenes; used for base primes.
fn small_primes(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn first_multiple_at_least(p: u64, lo: u64) -> u64 {
    lo.div_ceil(p) * p
}

/// Per-integer data for `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorTable {
    lo: u64,
    hi: u64,
    /// Smallest prime factor when it is below 2³², else 0 (then `n` is prime).
    /// `n = 1` stores 1.
    spf: Vec<u32>,
    /// Low 7 bits: Ω(n). High bit: `n` is not square-free.
    flags: Vec<u8>,
}

/// One row of a [`FactorTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorRecord {
    pub spf: u64,
    pub lambda: i8,
    pub mu: i8,
    pub big_omega: u32,
}

/// Fills `spf`/`flags` for the integers `lo, lo+1, ...` (one entry each).
/// `base` must contain every prime up to `isqrt(lo + len - 1)`.
fn sieve_block(lo: u64, base: &[u64], spf: &mut [u32], flags: &mut [u8]) {
    let len = flags.len();
    let hi = lo + len as u64;
    // `prod[i]` accumulates the part of `lo + i` made of base primes.
    let mut prod = vec![1u64; len];
    for &p in base {
        if p >= hi {
            break;
        }
        let mut pk = p;
        let mut k = 1u32;
        loop {
            let mut m = first_multiple_at_least(pk, lo);
            while m < hi {
                let i = (m - lo) as usize;
                prod[i] *= p;
                flags[i] += 1;
                if k == 1 && spf[i] == 0 {
                    spf[i] = p as u32;
                }
                if k == 2 {
                    flags[i] |= NON_SQUAREFREE;
                }
                m += pk;
            }
            match pk.checked_mul(p) {
                Some(next) if next < hi => {
                    pk = next;
                    k += 1;
                }
                _ => break,
            }
        }
    }
    for i in 0..len {
        let n = lo + i as u64;
        if n == 1 {
            spf[i] = 1;
            continue;
        }
        if prod[i] != n {
            // What remains is a single prime above the base-prime bound.
            flags[i] += 1;
        }
        if spf[i] == 0 && n < 1 << 32 {
            spf[i] = n as u32;
        }
    }
}

fn check_range(lo: u64, hi: u64) -> Result<()> {
    if lo == 0 || lo >= hi {
        return Err(Error::invalid(format!(
            "sieve range [{lo}, {hi}) must satisfy 1 <= lo < hi"
        )));
    }
    if hi > 1 << 63 {
        return Err(Error::Overflow(format!("sieve bound {hi} exceeds 2^63")));
    }
    Ok(())
}

/// Builds the table for `[lo, hi)` with the default configuration.
pub fn build_sieve(lo: u64, hi: u64) -> Result<FactorTable> {
    build_sieve_with(lo, hi, &SieveConfig::default())
}

pub fn build_sieve_with(lo: u64, hi: u64, config: &SieveConfig) -> Result<FactorTable> {
    check_range(lo, hi)?;
    let len = hi - lo;
    if len > config.max_table_len as u64 {
        return Err(Error::Budget {
            what: "factor table length",
            requested: len as u128,
            limit: config.max_table_len as u128,
        });
    }
    let base = small_primes(isqrt(hi - 1));
    let len = len as usize;
    let mut spf = vec![0u32; len];
    let mut flags = vec![0u8; len];
    let block = BLOCK.min(config.segment_len.max(1));
    spf.par_chunks_mut(block)
        .zip(flags.par_chunks_mut(block))
        .enumerate()
        .for_each(|(b, (s, f))| sieve_block(lo + (b * block) as u64, &base, s, f));
    Ok(FactorTable { lo, hi, spf, flags })
}

impl FactorTable {
    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        (self.lo..self.hi).contains(&n)
    }

    #[inline]
    fn idx(&self, n: u64) -> usize {
        assert!(
            self.contains(n),
            "{n} outside table range [{}, {})",
            self.lo,
            self.hi
        );
        (n - self.lo) as usize
    }

    /// Smallest prime factor; `spf(1) = 1`.
    #[inline]
    pub fn spf(&self, n: u64) -> u64 {
        match self.spf[self.idx(n)] {
            0 => n,
            p => p as u64,
        }
    }

    #[inline]
    pub fn big_omega(&self, n: u64) -> u32 {
        (self.flags[self.idx(n)] & OMEGA_MASK) as u32
    }

    #[inline]
    pub fn lambda(&self, n: u64) -> i8 {
        if self.flags[self.idx(n)] & 1 == 0 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn is_squarefree(&self, n: u64) -> bool {
        self.flags[self.idx(n)] & NON_SQUAREFREE == 0
    }

    #[inline]
    pub fn mu(&self, n: u64) -> i8 {
        if self.is_squarefree(n) {
            self.lambda(n)
        } else {
            0
        }
    }

    #[inline]
    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && self.spf(n) == n
    }

    pub fn record(&self, n: u64) -> FactorRecord {
        FactorRecord {
            spf: self.spf(n),
            lambda: self.lambda(n),
            mu: self.mu(n),
            big_omega: self.big_omega(n),
        }
    }

    /// Prime factorisation `[(p, e)]` of `n` by repeated spf lookups; every
    /// cofactor `n / p` must also lie in the table, which holds when
    /// `lo == 1`. Otherwise only the smallest prime is read from the table
    /// and the cofactor is finished by trial division.
    pub fn factorize(&self, n: u64) -> Vec<(u64, u32)> {
        let mut out: Vec<(u64, u32)> = Vec::new();
        let mut m = n;
        while m > 1 {
            let p = if self.contains(m) {
                self.spf(m)
            } else {
                smallest_prime_factor(m)
            };
            match out.last_mut() {
                Some((q, e)) if *q == p => *e += 1,
                _ => out.push((p, 1)),
            }
            m /= p;
        }
        out
    }

    /// λ over the whole table, as `i8` signs.
    pub fn lambda_values(&self) -> Vec<i8> {
        self.flags
            .iter()
            .map(|f| if f & 1 == 0 { 1 } else { -1 })
            .collect()
    }
}

/// Streams `[lo, hi)` segment by segment, handing each segment's start and
/// flag bytes to `visit`. Segments are visited in increasing order.
fn stream_flags<F>(lo: u64, hi: u64, config: &SieveConfig, mut visit: F) -> Result<()>
where
    F: FnMut(u64, &[u8]),
{
    check_range(lo, hi)?;
    let seg = config.segment_len.max(1) as u64;
    let base = small_primes(isqrt(hi - 1));
    let mut start = lo;
    let mut spf = vec![0u32; seg as usize];
    let mut flags = vec![0u8; seg as usize];
    while start < hi {
        let len = seg.min(hi - start) as usize;
        let (s, f) = (&mut spf[..len], &mut flags[..len]);
        s.fill(0);
        f.fill(0);
        let block = BLOCK.min(len);
        s.par_chunks_mut(block)
            .zip(f.par_chunks_mut(block))
            .enumerate()
            .for_each(|(b, (s, f))| sieve_block(start + (b * block) as u64, &base, s, f));
        visit(start, f);
        start += len as u64;
    }
    Ok(())
}

/// λ(n) for `n in [lo, hi)`, computed segment by segment.
pub fn liouville_values(lo: u64, hi: u64) -> Result<Vec<i8>> {
    liouville_values_with(lo, hi, &SieveConfig::default())
}

pub fn liouville_values_with(lo: u64, hi: u64, config: &SieveConfig) -> Result<Vec<i8>> {
    check_range(lo, hi)?;
    let mut out = Vec::with_capacity((hi - lo) as usize);
    stream_flags(lo, hi, config, |_, f| {
        out.extend(f.iter().map(|b| if b & 1 == 0 { 1i8 } else { -1 }))
    })?;
    Ok(out)
}

/// μ(n) for `n in [lo, hi)`, computed segment by segment.
pub fn mobius_values(lo: u64, hi: u64) -> Result<Vec<i8>> {
    let mut out = Vec::with_capacity(hi.saturating_sub(lo) as usize);
    stream_flags(lo, hi, &SieveConfig::default(), |_, f| {
        out.extend(f.iter().map(|b| {
            if b & NON_SQUAREFREE != 0 {
                0i8
            } else if b & 1 == 0 {
                1
            } else {
                -1
            }
        }))
    })?;
    Ok(out)
}

/// Exact `Σ_{n ≤ x} λ(n)`.
pub fn summatory_lambda(x: u64) -> Result<i64> {
    summatory_lambda_with(x, &SieveConfig::default())
}

pub fn summatory_lambda_with(x: u64, config: &SieveConfig) -> Result<i64> {
    if x == 0 {
        return Err(Error::invalid("summatory_lambda needs x >= 1"));
    }
    let hi = x
        .checked_add(1)
        .ok_or_else(|| Error::Overflow("x + 1".into()))?;
    let mut total = 0i64;
    stream_flags(1, hi, config, |_, f| {
        let odd = f.iter().filter(|b| *b & 1 == 1).count() as i64;
        total += f.len() as i64 - 2 * odd;
    })?;
    Ok(total)
}

/// The primes up to `bound`, in increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeList {
    bound: u64,
    primes: Vec<u64>,
}

impl PrimeList {
    pub fn new(bound: u64) -> Result<Self> {
        let primes = if bound < 2 {
            Vec::new()
        } else {
            primes_in_range(2, bound.checked_add(1).ok_or_else(|| Error::Overflow("bound + 1".into()))?)?
        };
        Ok(Self { bound, primes })
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        self.primes.binary_search(&n).is_ok()
    }

    /// Primes in the half-open interval `(a, b]`.
    pub fn between(&self, a: u64, b: u64) -> &[u64] {
        let i = self.primes.partition_point(|&p| p <= a);
        let j = self.primes.partition_point(|&p| p <= b);
        &self.primes[i..j.max(i)]
    }
}

/// Primes in `[lo, hi)` by a segmented sieve of Eratosthenes.
pub fn primes_in_range(lo: u64, hi: u64) -> Result<Vec<u64>> {
    if hi <= lo {
        return Ok(Vec::new());
    }
    if hi > 1 << 63 {
        return Err(Error::Overflow(format!("prime bound {hi} exceeds 2^63")));
    }
    let lo = lo.max(2);
    if hi <= lo {
        return Ok(Vec::new());
    }
    let base = small_primes(isqrt(hi - 1));
    let seg = SieveConfig::default().segment_len as u64;
    let mut out = Vec::new();
    let mut composite = vec![false; seg as usize];
    let mut start = lo;
    while start < hi {
        let len = seg.min(hi - start);
        let c = &mut composite[..len as usize];
        c.fill(false);
        let end = start + len;
        for &p in &base {
            if p * p >= end {
                break;
            }
            let mut m = first_multiple_at_least(p, start).max(p * p);
            while m < end {
                c[(m - start) as usize] = true;
                m += p;
            }
        }
        out.extend(
            c.iter()
                .enumerate()
                .filter(|(_, &is_c)| !is_c)
                .map(|(i, _)| start + i as u64),
        );
        start = end;
    }
    Ok(out)
}

/// `ψ(x) = Σ_{n ≤ x} Λ(n)`.
pub fn chebyshev_psi(x: u64) -> Result<f64> {
    if x == 0 {
        return Err(Error::invalid("chebyshev_psi needs x >= 1"));
    }
    let primes = PrimeList::new(x)?;
    let mut acc = KahanSum::new();
    for &p in primes.primes() {
        let logp = (p as f64).ln();
        let mut pk = p;
        loop {
            acc.add(logp);
            match pk.checked_mul(p) {
                Some(next) if next <= x => pk = next,
                _ => break,
            }
        }
    }
    Ok(acc.value())
}

/// `Σ_{p ≤ x} 1/p`.
pub fn prime_reciprocal_sum(x: u64) -> Result<f64> {
    if x < 2 {
        return Err(Error::invalid("prime_reciprocal_sum needs x >= 2"));
    }
    let primes = PrimeList::new(x)?;
    Ok(primes.primes().iter().map(|&p| 1.0 / p as f64).collect::<KahanSum>().value())
}

/// `#{1 <= n < x : no prime factor of n lies in [p_lo, p_hi]}`.
pub fn count_excluding_prime_band(x: u64, p_lo: u64, p_hi: u64) -> Result<u64> {
    if !(2 <= p_lo && p_lo <= p_hi && p_hi <= x) {
        return Err(Error::invalid(format!(
            "band [{p_lo}, {p_hi}] must satisfy 2 <= p_lo <= p_hi <= x = {x}"
        )));
    }
    let band = primes_in_range(p_lo, p_hi + 1)?;
    let seg = SieveConfig::default().segment_len as u64;
    let mut hit = vec![false; seg as usize];
    let mut count = 0u64;
    let mut start = 1u64;
    while start < x {
        let len = seg.min(x - start);
        let end = start + len;
        let h = &mut hit[..len as usize];
        h.fill(false);
        for &p in &band {
            if p >= end {
                break;
            }
            let mut m = first_multiple_at_least(p, start);
            while m < end {
                h[(m - start) as usize] = true;
                m += p;
            }
        }
        count += h.iter().filter(|&&b| !b).count() as u64;
        start = end;
    }
    Ok(count)
}

/// `#{p <= x : p and p + k both prime}`.
pub fn prime_pair_count(x: u64, k: u64) -> Result<u64> {
    if x < 3 || k == 0 {
        return Err(Error::invalid("prime_pair_count needs x >= 3 and k >= 1"));
    }
    let top = x
        .checked_add(k)
        .ok_or_else(|| Error::Overflow("x + k".into()))?;
    let primes = PrimeList::new(top)?;
    Ok(primes
        .primes()
        .iter()
        .take_while(|&&p| p <= x)
        .filter(|&&p| primes.contains(p + k))
        .count() as u64)
}

/// Exact count of square-free `n <= x` via `Σ_{d ≤ √x} μ(d) ⌊x/d²⌋`.
pub fn squarefree_count(x: u64) -> Result<u64> {
    if x == 0 {
        return Err(Error::invalid("squarefree_count needs x >= 1"));
    }
    let r = isqrt(x);
    let mu = mobius_values(1, r + 1)?;
    let mut total = 0i128;
    for (i, &m) in mu.iter().enumerate() {
        let d = (i + 1) as u64;
        total += m as i128 * (x / (d * d)) as i128;
    }
    Ok(total as u64)
}

/// Smallest prime factor by trial division (`n >= 2`).
pub fn smallest_prime_factor(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut d = 3u64;
    while d <= n / d {
        if n % d == 0 {
            return d;
        }
        d += 2;
    }
    n
}

/// Prime factorisation by trial division.
pub fn trial_factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d <= n / d {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// `(spf, λ, μ, Ω)` of `n` by trial division.
pub fn trial_record(n: u64) -> FactorRecord {
    let f = trial_factorize(n);
    let omega: u32 = f.iter().map(|&(_, e)| e).sum();
    let lambda = if omega % 2 == 0 { 1 } else { -1 };
    let squarefree = f.iter().all(|&(_, e)| e == 1);
    FactorRecord {
        spf: f.first().map_or(1, |&(p, _)| p),
        lambda,
        mu: if squarefree { lambda } else { 0 },
        big_omega: omega,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn multiplicativity_table() -> &'static FactorTable {
        static T: OnceLock<FactorTable> = OnceLock::new();
        T.get_or_init(|| build_sieve(1, 1_000_000).unwrap())
    }

    #[test]
    fn small_examples() {
        let t = build_sieve(1, 13).unwrap();
        assert_eq!(t.lambda(12), -1);
        assert_eq!(t.big_omega(12), 3);
        let t = build_sieve(1, 2).unwrap();
        assert_eq!(t.record(1), FactorRecord { spf: 1, lambda: 1, mu: 1, big_omega: 0 });
        assert_eq!(build_sieve(1, 5).unwrap().mu(4), 0);
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(build_sieve(5, 5).is_err());
        assert!(build_sieve(0, 5).is_err());
        let cfg = SieveConfig { segment_len: 16, max_table_len: 100 };
        assert!(matches!(build_sieve_with(1, 1000, &cfg), Err(Error::Budget { .. })));
    }

    #[test]
    fn agrees_with_trial_division() {
        let t = build_sieve(1, 20_000).unwrap();
        for n in 1..20_000 {
            assert_eq!(t.record(n), trial_record(n), "n = {n}");
        }
        let lo = 1_000_000_000u64;
        let t = build_sieve(lo, lo + 5_000).unwrap();
        for n in lo..lo + 5_000 {
            assert_eq!(t.record(n), trial_record(n), "n = {n}");
        }
    }

    #[test]
    fn summatory_examples() {
        assert_eq!(summatory_lambda(1).unwrap(), 1);
        assert_eq!(summatory_lambda(10).unwrap(), 0);
        let cfg = SieveConfig { segment_len: 1 << 10, ..SieveConfig::default() };
        assert_eq!(summatory_lambda(100_000).unwrap(), summatory_lambda_with(100_000, &cfg).unwrap());
    }

    #[test]
    fn chebyshev_and_reciprocals() {
        assert_eq!(chebyshev_psi(1).unwrap(), 0.0);
        let expect = 3.0 * 2f64.ln() + 2.0 * 3f64.ln() + 5f64.ln() + 7f64.ln();
        assert!((chebyshev_psi(10).unwrap() - expect).abs() < 1e-12);
        assert_eq!(prime_reciprocal_sum(2).unwrap(), 0.5);
        let expect = 0.5 + 1.0 / 3.0 + 0.2 + 1.0 / 7.0;
        assert!((prime_reciprocal_sum(10).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn band_counts() {
        assert_eq!(count_excluding_prime_band(10, 2, 10).unwrap(), 1);
        assert_eq!(count_excluding_prime_band(100, 2, 3).unwrap(), 33);
        assert!(count_excluding_prime_band(10, 5, 3).is_err());
        let x = 20_000u64;
        let brute = (1..x)
            .filter(|&n| trial_factorize(n).iter().all(|&(p, _)| !(10..=100).contains(&p)))
            .count() as u64;
        assert_eq!(count_excluding_prime_band(x, 10, 100).unwrap(), brute);
    }

    #[test]
    fn pair_and_squarefree_counts() {
        assert_eq!(prime_pair_count(100, 2).unwrap(), 8);
        assert_eq!(prime_pair_count(10, 1).unwrap(), 1);
        assert_eq!(squarefree_count(1).unwrap(), 1);
        assert_eq!(squarefree_count(10).unwrap(), 7);
        let t = build_sieve(1, 50_001).unwrap();
        let direct = (1..=50_000).filter(|&n| t.is_squarefree(n)).count() as u64;
        assert_eq!(squarefree_count(50_000).unwrap(), direct);
    }

    #[test]
    fn prime_list() {
        let p = PrimeList::new(30).unwrap();
        assert_eq!(p.primes(), &[2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(p.between(5, 13), &[7, 11, 13]);
        assert!(PrimeList::new(1).unwrap().is_empty());
        let big = PrimeList::new(3_000_000).unwrap();
        assert_eq!(big.len(), 216_816);
    }

    #[test]
    fn table_factorize() {
        let t = build_sieve(1, 10_000).unwrap();
        assert_eq!(t.factorize(9_000), vec![(2, 3), (3, 2), (5, 3)]);
        assert_eq!(t.factorize(9_973), vec![(9_973, 1)]);
        assert_eq!(t.factorize(1), vec![]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn segment_independence(a in 1u64..5_000, w1 in 1u64..3_000, w2 in 1u64..3_000) {
            let b = a + w1;
            let c = b + w2;
            let whole = build_sieve(a, c).unwrap();
            let left = build_sieve(a, b).unwrap();
            let right = build_sieve(b, c).unwrap();
            for n in a..c {
                let part = if n < b { left.record(n) } else { right.record(n) };
                prop_assert_eq!(whole.record(n), part);
            }
        }

        #[test]
        fn complete_multiplicativity(m in 1u64..1_000, n in 1u64..1_000) {
            let t = multiplicativity_table();
            prop_assert_eq!(t.lambda(m * n), t.lambda(m) * t.lambda(n));
        }

        #[test]
        fn summatory_increments(x in 2u64..200_000) {
            let t = build_sieve(x, x + 1).unwrap();
            let step = summatory_lambda(x).unwrap() - summatory_lambda(x - 1).unwrap();
            prop_assert_eq!(step, t.lambda(x) as i64);
        }

        #[test]
        fn table_invariants(lo in 1u64..1_000_000, w in 1u64..500) {
            let t = build_sieve(lo, lo + w).unwrap();
            for n in lo..lo + w {
                let r = t.record(n);
                prop_assert_eq!(r.lambda, if r.big_omega % 2 == 0 { 1 } else { -1 });
                if n >= 2 {
                    prop_assert_eq!(n % r.spf, 0);
                    prop_assert_eq!(smallest_prime_factor(n), r.spf);
                }
            }
        }
    }
}
