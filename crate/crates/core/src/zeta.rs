//! ζ(s) on Re s > 0, the ramp cutoff ψ_δ with its Mellin transform, and the
//! truncated Perron reconstruction of smoothed sums.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::arith::liouville_values;
use crate::error::{Error, Result};
use crate::numerics::{certified_trapezoid, ComplexKahan, KahanSum};

/// A point `s = sigma + i t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPoint {
    pub sigma: f64,
    pub t: f64,
}

impl ComplexPoint {
    pub fn new(sigma: f64, t: f64) -> Result<Self> {
        if !sigma.is_finite() || !t.is_finite() {
            return Err(Error::invalid(format!("non-finite point {sigma} + {t}i")));
        }
        Ok(Self { sigma, t })
    }

    pub fn real(sigma: f64) -> Result<Self> {
        Self::new(sigma, 0.0)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.sigma, self.t)
    }
}

impl From<ComplexPoint> for Complex64 {
    fn from(p: ComplexPoint) -> Self {
        p.to_complex()
    }
}

/// Width `δ ∈ (0, 1/2)` of the linear ramp in ψ_δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothCutoff {
    delta: f64,
}

impl SmoothCutoff {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::invalid(format!("cutoff width {delta} not in (0, 1/2)")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let d = self.delta;
        if x < 1.0 - d {
            1.0
        } else if x <= 1.0 {
            (1.0 - x) / d
        } else {
            0.0
        }
    }
}

/// ψ_δ(x): 1 on (0, 1−δ), the ramp (1−x)/δ on [1−δ, 1], 0 beyond.
pub fn psi_delta(x: f64, cutoff: SmoothCutoff) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("psi_delta needs x > 0, got {x}")));
    }
    Ok(cutoff.eval(x))
}

/// Mψ_δ(s) = (1 − (1−δ)^{s+1}) / (δ s (s+1)).
pub fn mellin_psi(s: ComplexPoint, cutoff: SmoothCutoff) -> Result<Complex64> {
    let z = s.to_complex();
    if z == Complex64::new(0.0, 0.0) || z == Complex64::new(-1.0, 0.0) {
        return Err(Error::invalid("Mellin transform of psi_delta has poles at 0 and -1"));
    }
    Ok(mellin_psi_unchecked(z, cutoff.delta))
}

#[inline]
fn mellin_psi_unchecked(z: Complex64, delta: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let power = ((z + one) * (1.0 - delta).ln()).exp();
    (one - power) / (delta * z * (z + one))
}

/// ζ(s) together with an estimate of its truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaValue {
    pub value: Complex64,
    pub error_estimate: f64,
}

/// `B_{2k} / (2k)!` for k = 1..=7.
const BERNOULLI_OVER_FACTORIAL: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
];

/// Default number of explicit terms at height `t`.
pub fn default_zeta_terms(t: f64) -> u64 {
    (8.0 * t.abs()).ceil().max(1000.0) as u64
}

/// ζ(s) for Re s > 0, s ≠ 1: `terms − 1` explicit terms, the pole term
/// N^{1−s}/(s−1), and Euler–Maclaurin corrections at N = `terms`. The error
/// estimate is the modulus of the first omitted correction.
pub fn zeta_strip(s: ComplexPoint, terms: u64) -> Result<ZetaValue> {
    if !(s.sigma > 0.0) {
        return Err(Error::invalid(format!("zeta_strip needs Re s > 0, got {}", s.sigma)));
    }
    if s.sigma == 1.0 && s.t == 0.0 {
        return Err(Error::invalid("zeta has a pole at s = 1"));
    }
    if terms < 10 {
        return Err(Error::invalid(format!("zeta_strip needs terms >= 10, got {terms}")));
    }
    let z = s.to_complex();
    let one = Complex64::new(1.0, 0.0);
    let mut acc = ComplexKahan::new();
    for n in 1..terms {
        acc.add((-z * (n as f64).ln()).exp());
    }
    let big_n = terms as f64;
    let log_n = big_n.ln();
    let n_pow = (-z * log_n).exp(); // N^{-s}
    acc.add(n_pow * big_n / (z - one));
    acc.add(n_pow * 0.5);
    // Rising factorial s(s+1)...(s+2k-2) times N^{-s-2k+1}.
    let mut rising = z;
    let mut term_pow = n_pow / big_n;
    let last = BERNOULLI_OVER_FACTORIAL.len() - 1;
    let mut error_estimate = 0.0;
    for (k, &b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = rising * term_pow * b;
        if k == last {
            error_estimate = term.norm();
            break;
        }
        acc.add(term);
        let m = (2 * k + 1) as f64;
        rising *= (z + m) * (z + m + 1.0);
        term_pow /= big_n * big_n;
    }
    Ok(ZetaValue {
        value: acc.value(),
        error_estimate,
    })
}

/// ζ(s) at the default number of terms.
pub fn zeta(s: ComplexPoint) -> Result<ZetaValue> {
    zeta_strip(s, default_zeta_terms(s.t))
}

/// `|Σ_{n ≤ N} λ(n) n^{−s} − ζ(2s)/ζ(s)|` for Re s > 1.
pub fn z_lambda_residual(s: ComplexPoint, n_max: u64) -> Result<f64> {
    if !(s.sigma > 1.0) {
        return Err(Error::invalid(format!("z_lambda_residual needs Re s > 1, got {}", s.sigma)));
    }
    if n_max == 0 {
        return Err(Error::invalid("z_lambda_residual needs N >= 1"));
    }
    let z = s.to_complex();
    let lambda = liouville_values(1, n_max + 1)?;
    let partial: ComplexKahan = lambda
        .iter()
        .enumerate()
        .map(|(i, &l)| (-z * ((i + 1) as f64).ln()).exp() * l as f64)
        .collect();
    let double = ComplexPoint::new(2.0 * s.sigma, 2.0 * s.t)?;
    let quotient = zeta(double)?.value / zeta(s)?.value;
    Ok((partial.value() - quotient).norm())
}

/// Coefficient family for [`perron_truncated`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerronKind {
    Unit,
    Liouville,
}

/// Outcome of a truncated Perron reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerronReport {
    /// `(1/2πi) ∫_{σ−iT}^{σ+iT} x^s Mψ_δ(s) Z_f(s) ds` with σ = 1 + 1/log x.
    pub integral: Complex64,
    /// `Σ_n f(n) ψ_δ(n/x)`, computed directly.
    pub smoothed_sum: f64,
    /// `δ x log x`, the scale of the error term.
    pub scale: f64,
    pub halving_delta: f64,
    pub nodes: usize,
}

impl PerronReport {
    pub fn error(&self) -> f64 {
        (self.integral - Complex64::new(self.smoothed_sum, 0.0)).norm()
    }

    /// `|error| / (δ x log x)`.
    pub fn ratio(&self) -> f64 {
        self.error() / self.scale
    }

    pub fn within(&self, slack: f64) -> bool {
        self.error() <= slack * self.scale
    }
}

/// Default slack on the δ x log x envelope.
pub const PERRON_SLACK: f64 = 20.0;

/// Truncated Perron integral on Re s = 1 + 1/log x, |t| ≤ T. Z_f is the
/// Dirichlet series truncated at n ≤ x, the only terms ψ_δ(n/x) can see.
pub fn perron_truncated(
    kind: PerronKind,
    x: f64,
    cutoff: SmoothCutoff,
    t_max: f64,
) -> Result<PerronReport> {
    if !(x >= 2.0) || !x.is_finite() {
        return Err(Error::invalid(format!("perron_truncated needs x >= 2, got {x}")));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::invalid(format!("perron_truncated needs T > 0, got {t_max}")));
    }
    let n_max = x.floor() as u64;
    let coeffs: Vec<f64> = match kind {
        PerronKind::Unit => vec![1.0; n_max as usize],
        PerronKind::Liouville => liouville_values(1, n_max + 1)?
            .into_iter()
            .map(f64::from)
            .collect(),
    };
    let delta = cutoff.delta();
    let smoothed_sum = coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| c * cutoff.eval((i + 1) as f64 / x))
        .collect::<KahanSum>()
        .value();

    let log_x = x.ln();
    let sigma = 1.0 + 1.0 / log_x;
    // Weights f(n) n^{-σ}, then x^s Z_f(s) = Σ w_n (x/n)^{it} x^σ.
    let logs: Vec<f64> = (1..=n_max).map(|n| (x / n as f64).ln()).collect();
    let weights: Vec<f64> = coeffs
        .iter()
        .zip(&logs)
        .map(|(&c, &l)| c * (-sigma * (x.ln() - l)).exp())
        .collect();
    let x_sigma = x.powf(sigma);
    let max_step = 0.05f64.min(PI / (4.0 * log_x));

    let integrand = |re: bool| {
        let logs = &logs;
        let weights = &weights;
        move |a: f64, h: f64, first: usize, len: usize| -> Vec<f64> {
            let t0 = a + first as f64 * h;
            let mut phase: Vec<Complex64> = logs
                .iter()
                .zip(weights)
                .map(|(&l, &w)| Complex64::from_polar(w, l * t0))
                .collect();
            let rot: Vec<Complex64> = logs.iter().map(|&l| Complex64::from_polar(1.0, l * h)).collect();
            let mut out = Vec::with_capacity(len);
            for k in 0..len {
                let t = t0 + k as f64 * h;
                let mut zsum = ComplexKahan::new();
                for p in &phase {
                    zsum.add(*p);
                }
                let s = Complex64::new(sigma, t);
                let v = zsum.value() * x_sigma * mellin_psi_unchecked(s, delta) / (2.0 * PI);
                // ds = i dt, so (1/2πi) ds = dt / 2π.
                out.push(if re { v.re } else { v.im });
                for (p, r) in phase.iter_mut().zip(&rot) {
                    *p *= r;
                }
            }
            out
        }
    };
    let scale_floor = smoothed_sum.abs().max(1.0);
    let re = certified_trapezoid("perron integral", -t_max, t_max, max_step, 1e-4, scale_floor, integrand(true))?;
    let im = certified_trapezoid("perron integral", -t_max, t_max, max_step, 1e-4, scale_floor, integrand(false))?;
    Ok(PerronReport {
        integral: Complex64::new(re.value, im.value),
        smoothed_sum,
        scale: delta * x * log_x,
        halving_delta: re.halving_delta().hypot(im.halving_delta()),
        nodes: re.nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cut(d: f64) -> SmoothCutoff {
        SmoothCutoff::new(d).unwrap()
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi_delta(0.5, cut(0.25)).unwrap(), 1.0);
        assert_eq!(psi_delta(2.0, cut(0.25)).unwrap(), 0.0);
        assert_eq!(psi_delta(0.875, cut(0.25)).unwrap(), 0.5);
        assert!(psi_delta(0.0, cut(0.25)).is_err());
        assert!(SmoothCutoff::new(0.5).is_err());
    }

    #[test]
    fn mellin_examples() {
        let m = mellin_psi(ComplexPoint::real(1.0).unwrap(), cut(0.49)).unwrap();
        assert!((m.re - (1.0 - 0.49 / 2.0)).abs() < 1e-14);
        // δ = 0.5 is outside the open range; evaluate the closed form directly.
        let m = mellin_psi_unchecked(Complex64::new(1.0, 0.0), 0.5);
        assert!((m.re - 0.75).abs() < 1e-15);
        let m = mellin_psi_unchecked(Complex64::new(2.0, 0.0), 0.5);
        assert!((m.re - (1.0 / 6.0) * (1.0 - 0.125) / 0.5).abs() < 1e-15);
        let s = ComplexPoint::new(1.0, 100.0).unwrap();
        let m = mellin_psi(s, cut(0.1)).unwrap();
        let z = s.to_complex();
        assert!(m.norm() <= 2.0 / (0.1 * (z * (z + 1.0)).norm()));
        assert!(mellin_psi(ComplexPoint::real(0.0).unwrap(), cut(0.1)).is_err());
        assert!(mellin_psi(ComplexPoint::real(-1.0).unwrap(), cut(0.1)).is_err());
    }

    #[test]
    fn zeta_values() {
        let z2 = zeta(ComplexPoint::real(2.0).unwrap()).unwrap();
        assert!((z2.value.re - PI * PI / 6.0).abs() < 1e-13);
        let z3 = zeta(ComplexPoint::real(3.0).unwrap()).unwrap();
        assert!((z3.value.re - 1.202_056_903_159_594_3).abs() < 1e-13);
        let s = ComplexPoint::new(0.5, 14.13).unwrap();
        let a = zeta_strip(s, 500).unwrap().value;
        let b = zeta_strip(s, 1000).unwrap().value;
        let c = zeta_strip(s, 2000).unwrap().value;
        assert!(b.norm() < 0.01);
        assert!((a - b).norm() < 1e-6 && (c - b).norm() < 1e-6);
        assert!(zeta_strip(ComplexPoint::real(1.0).unwrap(), 100).is_err());
        assert!(zeta_strip(ComplexPoint::real(-0.5).unwrap(), 100).is_err());
        assert!(zeta_strip(ComplexPoint::real(2.0).unwrap(), 9).is_err());
    }

    #[test]
    fn zeta_half_line_reference() {
        // ζ(1/2) = -1.4603545088095868...
        let z = zeta(ComplexPoint::real(0.5).unwrap()).unwrap().value;
        assert!((z.re + 1.460_354_508_809_586_8).abs() < 1e-12);
        assert!(z.im.abs() < 1e-15);
    }

    #[test]
    fn z_lambda_examples() {
        let r = z_lambda_residual(ComplexPoint::real(2.0).unwrap(), 100_000).unwrap();
        assert!(r <= 1e-3);
        let r = z_lambda_residual(ComplexPoint::real(3.0).unwrap(), 1_000).unwrap();
        assert!(r <= 1e-5);
        assert!(z_lambda_residual(ComplexPoint::real(1.0).unwrap(), 10).is_err());
    }

    #[test]
    fn perron_tiny_x() {
        let r = perron_truncated(PerronKind::Unit, 2.0, cut(0.1), 10.0).unwrap();
        assert_eq!(r.smoothed_sum, 1.0);
    }

    #[test]
    fn perron_unit_example() {
        let r = perron_truncated(PerronKind::Unit, 100.0, cut(0.1), 100.0).unwrap();
        let direct: f64 = (1..=100).map(|n| psi_delta(n as f64 / 100.0, cut(0.1)).unwrap()).sum();
        assert!((r.smoothed_sum - direct).abs() < 1e-12);
        assert!(r.within(0.05), "ratio {}", r.ratio());
    }

    #[test]
    fn perron_liouville_example() {
        let r = perron_truncated(PerronKind::Liouville, 1000.0, cut(0.1), 1000.0).unwrap();
        assert!(r.within(0.05), "ratio {}", r.ratio());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn zeta_real_and_decreasing(a in 1.01f64..6.0, gap in 0.01f64..1.0) {
            let za = zeta(ComplexPoint::real(a).unwrap()).unwrap().value;
            let zb = zeta(ComplexPoint::real(a + gap).unwrap()).unwrap().value;
            prop_assert!(za.im.abs() < 1e-14 && zb.im.abs() < 1e-14);
            prop_assert!(zb.re < za.re);
        }

        #[test]
        fn zeta_real_below_one(a in 0.05f64..0.99) {
            let z = zeta(ComplexPoint::real(a).unwrap()).unwrap().value;
            prop_assert!(z.im.abs() < 1e-14);
            prop_assert!(z.re < 0.0);
        }

        #[test]
        fn mellin_bounds(sigma in 0.05f64..4.0, t in -200.0f64..200.0, d in 0.01f64..0.49) {
            let s = ComplexPoint::new(sigma, t).unwrap();
            let m = mellin_psi(s, cut(d)).unwrap().norm();
            let z = s.to_complex();
            let bound = (2.0 / (d * (z * (z + 1.0)).norm())).min(4.0 / z.norm());
            prop_assert!(m <= bound * (1.0 + 1e-12));
        }
    }

    /// `∫_0^∞ ψ_δ(u) u^{s−1} du` by quadrature: the flat part through
    /// u = (1−δ)e^{−y} and the ramp by composite Simpson.
    fn mellin_by_quadrature(s: Complex64, d: f64) -> Complex64 {
        let a = 1.0 - d;
        let simpson = |f: &dyn Fn(f64) -> Complex64, lo: f64, hi: f64, n: usize| {
            let h = (hi - lo) / n as f64;
            let mut acc = f(lo) + f(hi);
            for k in 1..n {
                acc += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        let flat_scale = (s * a.ln()).exp();
        let y_max = 45.0 / s.re;
        let flat = simpson(&|y: f64| (-s * y).exp(), 0.0, y_max, 200_000) * flat_scale;
        let ramp = simpson(&|u: f64| ((s - 1.0) * u.ln()).exp() * ((1.0 - u) / d), a, 1.0, 20_000);
        flat + ramp
    }

    #[test]
    fn mellin_matches_quadrature_grid() {
        let sigmas = [0.5, 1.0, 1.75, 2.5, 3.0];
        let ts = [-20.0, -3.0, 0.0, 7.5];
        let deltas = [0.05, 0.2, 0.3, 0.45];
        for (i, &sigma) in sigmas.iter().enumerate() {
            for (j, &t) in ts.iter().enumerate() {
                let d = deltas[(i + j) % deltas.len()];
                let s = ComplexPoint::new(sigma, t).unwrap();
                let closed = mellin_psi(s, cut(d)).unwrap();
                let numeric = mellin_by_quadrature(s.to_complex(), d);
                assert!((closed - numeric).norm() < 1e-8, "s = {sigma}+{t}i, d = {d}: {closed} vs {numeric}");
            }
        }
    }
}
