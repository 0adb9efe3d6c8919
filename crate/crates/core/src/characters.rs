//! Dirichlet characters built from the cyclic decomposition of
//! (ℤ/qℤ)^×, and the decomposition of additive characters e(an/q) into
//! multiplicative ones.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use num_integer::Integer;

use crate::arith::trial_factorize;
use crate::error::{Error, Result};
use crate::numerics::e;

/// Largest modulus accepted by [`characters_mod`].
pub const MAX_MODULUS: u64 = 10_000;

/// One cyclic factor of the unit group: residues are read modulo
/// `prime_power`, `log[r]` is the discrete log of `r` to the factor's
/// generator (or `u32::MAX` for non-units), and the factor has `order`
/// elements.
#[derive(Debug, Clone, PartialEq)]
struct CyclicFactor {
    prime_power: u64,
    order: u32,
    log: Vec<u32>,
}

/// All φ(q) characters modulo `q`. Character `index` is the mixed-radix
/// integer of its exponents on the cyclic factors; index 0 is trivial.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacterTable {
    modulus: u64,
    factors: Vec<CyclicFactor>,
    /// Group exponent L: every value is an L-th root of unity.
    exponent: u32,
    roots: Vec<Complex64>,
    even: bool,
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

/// A generator of (ℤ/p^e ℤ)^× for odd `p`.
fn primitive_root(p: u64, e: u32) -> u64 {
    let phi_p = p - 1;
    let divisors: Vec<u64> = trial_factorize(phi_p).iter().map(|&(r, _)| r).collect();
    let mut g = 2;
    loop {
        if divisors.iter().all(|&r| pow_mod(g, phi_p / r, p) != 1) {
            break;
        }
        g += 1;
    }
    if e >= 2 && pow_mod(g, p - 1, p * p) == 1 {
        g += p;
    }
    g
}

/// The cyclic subgroup generated by `g` modulo `m`, as a discrete-log table.
fn cyclic(m: u64, g: u64, order: u32) -> CyclicFactor {
    let mut log = vec![u32::MAX; m as usize];
    let mut x = 1 % m;
    for k in 0..order {
        log[x as usize] = k;
        x = x * g % m;
    }
    CyclicFactor {
        prime_power: m,
        order,
        log,
    }
}

fn two_power_factors(e: u32) -> Vec<CyclicFactor> {
    let m = 1u64 << e;
    match e {
        1 => Vec::new(),
        2 => vec![cyclic(4, 3, 2)],
        _ => {
            // (ℤ/2^e)^× = {±1} × <5>.
            let order5 = 1u32 << (e - 2);
            let mut sign = vec![u32::MAX; m as usize];
            let mut five = vec![u32::MAX; m as usize];
            let mut x = 1u64;
            for k in 0..order5 {
                sign[x as usize] = 0;
                five[x as usize] = k;
                let y = m - x;
                sign[y as usize] = 1;
                five[y as usize] = k;
                x = x * 5 % m;
            }
            vec![
                CyclicFactor {
                    prime_power: m,
                    order: 2,
                    log: sign,
                },
                CyclicFactor {
                    prime_power: m,
                    order: order5,
                    log: five,
                },
            ]
        }
    }
}

/// Character table modulo `q` (`1 <= q <= 10⁴`; q = 1 gives the single
/// trivial character).
pub fn characters_mod(q: u64) -> Result<CharacterTable> {
    if q == 0 || q > MAX_MODULUS {
        return Err(Error::invalid(format!("modulus {q} not in 1..={MAX_MODULUS}")));
    }
    let mut factors = Vec::new();
    for (p, e) in trial_factorize(q) {
        if p == 2 {
            factors.extend(two_power_factors(e));
        } else {
            let m = p.pow(e);
            let order = (p - 1) * p.pow(e - 1);
            factors.push(cyclic(m, primitive_root(p, e), order as u32));
        }
    }
    let exponent = factors
        .iter()
        .fold(1u32, |acc, f| acc.lcm(&f.order));
    let roots = (0..exponent)
        .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / exponent as f64))
        .collect();
    Ok(CharacterTable {
        modulus: q,
        factors,
        exponent,
        roots,
        even: q % 2 == 0,
    })
}

impl CharacterTable {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// φ(q), the number of characters.
    pub fn len(&self) -> usize {
        self.factors.iter().map(|f| f.order as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn trivial_index(&self) -> usize {
        0
    }

    /// Orders of the cyclic factors of the unit group.
    pub fn structure(&self) -> Vec<u32> {
        self.factors.iter().map(|f| f.order).collect()
    }

    fn digits(&self, index: usize) -> Vec<u32> {
        let mut rest = index;
        self.factors
            .iter()
            .map(|f| {
                let d = (rest % f.order as usize) as u32;
                rest /= f.order as usize;
                d
            })
            .collect()
    }

    /// Exponent `k` with `χ(n) = exp(2πi k / L)`, or `None` off the units.
    fn phase(&self, digits: &[u32], n: u64) -> Option<u64> {
        if self.even && n % 2 == 0 {
            return None;
        }
        let mut k = 0u64;
        for (f, &j) in self.factors.iter().zip(digits) {
            let l = f.log[(n % f.prime_power) as usize];
            if l == u32::MAX {
                return None;
            }
            let scale = (self.exponent / f.order) as u64;
            k = (k + j as u64 * l as u64 % f.order as u64 * scale) % self.exponent as u64;
        }
        Some(k)
    }

    /// χ_index(n), zero when gcd(n, q) > 1.
    pub fn value(&self, index: usize, n: u64) -> Complex64 {
        assert!(index < self.len(), "character index {index} out of range");
        if self.modulus == 1 {
            return Complex64::new(1.0, 0.0);
        }
        let digits = self.digits(index);
        match self.phase(&digits, n) {
            Some(k) => self.roots[k as usize],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// χ_index(r) for r = 0..q.
    pub fn row(&self, index: usize) -> Vec<Complex64> {
        assert!(index < self.len(), "character index {index} out of range");
        if self.modulus == 1 {
            return vec![Complex64::new(1.0, 0.0)];
        }
        let digits = self.digits(index);
        (0..self.modulus)
            .map(|r| match self.phase(&digits, r) {
                Some(k) => self.roots[k as usize],
                None => Complex64::new(0.0, 0.0),
            })
            .collect()
    }

    /// Whether every value of character `index` is real.
    pub fn is_real(&self, index: usize) -> bool {
        self.digits(index)
            .iter()
            .zip(&self.factors)
            .all(|(&j, f)| (2 * j as u64) % f.order as u64 == 0)
    }
}

/// One block of the decomposition: characters modulo `q/d`, applied to n/d
/// when d | n.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionBlock {
    pub d: u64,
    pub table: Arc<CharacterTable>,
    /// Coefficient a_χ for every character index of `table`.
    pub coefficients: Vec<Complex64>,
}

/// `e(an/q) = Σ_{d|q} Σ_{χ mod q/d} a_χ 1_{d|n} χ(n/d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub a: i64,
    pub q: u64,
    pub blocks: Vec<DecompositionBlock>,
}

impl Decomposition {
    pub fn eval(&self, n: u64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for b in &self.blocks {
            if n % b.d != 0 {
                continue;
            }
            let m = n / b.d;
            for (idx, c) in b.coefficients.iter().enumerate() {
                acc += c * b.table.value(idx, m);
            }
        }
        acc
    }

    pub fn max_coefficient(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.coefficients.iter().map(|c| c.norm()))
            .fold(0.0, f64::max)
    }
}

fn divisors(q: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (1..=q).take_while(|d| d * d <= q).filter(|d| q % d == 0).flat_map(|d| [d, q / d]).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Writes the additive character `n ↦ e(an/q)` through multiplicative
/// characters of the moduli `q/d`, d | q.
pub fn additive_to_multiplicative(a: i64, q: u64) -> Result<Decomposition> {
    if q == 0 || q > MAX_MODULUS {
        return Err(Error::invalid(format!("modulus {q} not in 1..={MAX_MODULUS}")));
    }
    let a_red = a.rem_euclid(q as i64) as u64;
    let mut blocks = Vec::new();
    for d in divisors(q) {
        let r = q / d;
        let table = Arc::new(characters_mod(r)?);
        let units: Vec<u64> = (0..r).filter(|&m| m.gcd(&r) == 1).collect();
        let phi = units.len() as f64;
        // f_d(m) = e(a m d / q) = e(a m / r).
        let f: Vec<Complex64> = units.iter().map(|&m| e((a_red * m % r) as f64 / r as f64)).collect();
        let coefficients = (0..table.len())
            .map(|idx| {
                let s: Complex64 = units
                    .iter()
                    .zip(&f)
                    .map(|(&m, &fm)| table.value(idx, m).conj() * fm)
                    .sum();
                s / phi
            })
            .collect();
        blocks.push(DecompositionBlock {
            d,
            table,
            coefficients,
        });
    }
    Ok(Decomposition {
        a,
        q,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inner(t: &CharacterTable, i: usize, j: usize) -> Complex64 {
        let q = t.modulus();
        let units: Vec<u64> = (0..q).filter(|&m| m.gcd(&q) == 1).collect();
        let s: Complex64 = units.iter().map(|&m| t.value(i, m).conj() * t.value(j, m)).sum();
        s / units.len() as f64
    }

    #[test]
    fn modulus_three() {
        let t = characters_mod(3).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.value(0, 2), Complex64::new(1.0, 0.0));
        assert!((t.value(1, 2) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(t.value(1, 3), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn modulus_five() {
        let t = characters_mod(5).unwrap();
        assert_eq!(t.len(), 4);
        for i in 0..4 {
            for n in 1..5 {
                let v = t.value(i, n);
                assert!((v.powu(4) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((inner(&t, i, j) - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
        // The character sending the generator 2 to i has order 4.
        assert!((0..4).any(|i| (t.value(i, 2) - Complex64::new(0.0, 1.0)).norm() < 1e-12));
    }

    #[test]
    fn modulus_eight_is_real() {
        let t = characters_mod(8).unwrap();
        assert_eq!(t.structure(), vec![2, 2]);
        for i in 0..t.len() {
            assert!(t.is_real(i));
            for n in 0..8 {
                assert!(t.value(i, n).im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn multiplicative_on_units() {
        for q in [7u64, 9, 12, 16, 20, 27, 32, 45, 49, 100] {
            let t = characters_mod(q).unwrap();
            for i in 0..t.len() {
                for m in 1..q {
                    for n in 1..q {
                        let lhs = t.value(i, m * n % q);
                        let rhs = t.value(i, m) * t.value(i, n);
                        assert!((lhs - rhs).norm() < 1e-12, "q = {q}");
                    }
                }
            }
        }
    }

    #[test]
    fn orthonormal_up_to_fifty() {
        for q in 1..=50u64 {
            let t = characters_mod(q).unwrap();
            let phi = (1..=q).filter(|&m| m.gcd(&q) == 1).count();
            assert_eq!(t.len(), phi);
            for i in 0..t.len() {
                for j in 0..t.len() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((inner(&t, i, j) - Complex64::new(expect, 0.0)).norm() < 1e-12, "q = {q}");
                }
            }
        }
    }

    #[test]
    fn decomposition_examples() {
        let d = additive_to_multiplicative(0, 1).unwrap();
        assert_eq!(d.blocks.len(), 1);
        assert!((d.eval(5) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let d = additive_to_multiplicative(1, 2).unwrap();
        for n in 1..=6u64 {
            let expect = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((d.eval(n) - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
        let d = additive_to_multiplicative(4, 15).unwrap();
        for n in 1..=45u64 {
            assert!((d.eval(n) - e(4.0 * n as f64 / 15.0)).norm() < 1e-10);
        }
        assert!(d.max_coefficient() <= 1.0 + 1e-12);
    }
}
