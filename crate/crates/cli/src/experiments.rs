use std::fmt;

use liouville_core::arith::{
    build_sieve, chebyshev_psi, prime_pair_count, prime_reciprocal_sum, squarefree_count, summatory_lambda,
    trial_record,
};
use liouville_core::characters::{additive_to_multiplicative, characters_mod};
use liouville_core::dirichlet::{
    halasz_subset_integral, large_value_measure, mean_value_integral, prime_coeffs, typical_set, CoeffSeq, TGrid,
    TSubset, MEAN_VALUE_TOLERANCE,
};
use liouville_core::entropy::{
    build_joint, decrement_trace, divergence_sequence, divisibility_trick_residual, entropy_properties,
    expectation_f, expectation_f_independent, hoeffding_tail_check, log_chowla_sum, suma_esperanza_residual,
    LogWeightedModel, ENTROPY_TOLERANCE, Y_UNIFORM_SLACK,
};
use liouville_core::expsum::{
    chowla_avg, exp_sum_avg, fourth_moment_primes, liouville_shift_sum, major_arc_measure, prime_shift_correlation,
    ternary_sum, torus_parseval_check, vinogradov_sum, ChowlaMethod, TernaryWeight, FFT_PARSEVAL_TOLERANCE,
};
use liouville_core::factorization::{err_set, identity_ladder, ladder_slope, RamareWeight};
use liouville_core::intervals::{parseval_link, variance, ArithFn, WindowKind, WindowSpec, PARSEVAL_SLACK};
use liouville_core::numerics::e;
use liouville_core::zeta::{perron_truncated, z_lambda_residual, zeta, ComplexPoint, PerronKind, SmoothCutoff};
use liouville_core::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Params, UsageError};
use crate::report::ResultRow;

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Usage(String),
    Resource(String),
    /// A computation that could not certify its own result.
    Failed(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Usage(m) => write!(f, "usage error: {m}"),
            RunError::Resource(m) => write!(f, "resource limit: {m}"),
            RunError::Failed(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Budget { .. } | Error::Overflow(_) => RunError::Resource(e.to_string()),
            Error::InvalidInput(_) | Error::Precondition(_) => RunError::Usage(e.to_string()),
            Error::Quadrature { .. } | Error::NotReached(_) => RunError::Failed(e.to_string()),
        }
    }
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e.0)
    }
}

type Run = fn(&Ctx) -> Result<Vec<ResultRow>, RunError>;

pub struct Experiment {
    pub name: &'static str,
    pub anchor: &'static str,
    pub defaults: &'static [(&'static str, &'static str)],
    pub run: Run,
}

/// Parameters and row builders for one run.
pub struct Ctx {
    pub name: &'static str,
    pub params: Params,
    pub seed: u64,
}

impl Ctx {
    fn row(&self, quantity: &str, value: f64, bound: Option<f64>, ratio: Option<f64>, passed: Option<bool>) -> ResultRow {
        ResultRow {
            experiment: self.name.to_string(),
            quantity: quantity.to_string(),
            parameters: self.params.describe(),
            value,
            bound,
            ratio,
            passed,
            seed: self.seed,
            wall_time_s: None,
        }
    }

    /// Passes when `value ≤ bound`.
    fn at_most(&self, quantity: &str, value: f64, bound: f64) -> ResultRow {
        let ratio = if bound > 0.0 {
            value / bound
        } else if value <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        self.row(quantity, value, Some(bound), Some(ratio), Some(value <= bound))
    }

    /// Passes when `value < bound`.
    fn below(&self, quantity: &str, value: f64, bound: f64) -> ResultRow {
        let mut r = self.at_most(quantity, value, bound);
        r.passed = Some(value < bound);
        r
    }

    fn info(&self, quantity: &str, value: f64) -> ResultRow {
        self.row(quantity, value, None, None, None)
    }

    fn p(&self) -> &Params {
        &self.params
    }
}

pub const CATALOG: &[Experiment] = &[
    Experiment {
        name: "sieve-check",
        anchor: "segmented sieve against trial division for λ, μ, Ω and the least prime factor",
        defaults: &[("n", "1e6"), ("base", "1e9"), ("span", "1e6"), ("samples", "1e5")],
        run: sieve_check,
    },
    Experiment {
        name: "squarefree",
        anchor: "density 1/ζ(2) of square-free integers",
        defaults: &[("x", "1e7")],
        run: squarefree,
    },
    Experiment {
        name: "tnp",
        anchor: "prime number theorem for λ: summatory function, Chebyshev ψ, Mertens sums, ζ(2s)/ζ(s), truncated Perron formula",
        defaults: &[
            ("x", "1e6"),
            ("mertens_lo", "1e3"),
            ("pairs_x", "1e5"),
            ("perron_x", "1000"),
            ("perron_t", "1000"),
            ("delta", "0.1"),
            ("zeta_n", "1e5"),
        ],
        run: tnp,
    },
    Experiment {
        name: "mean-value",
        anchor: "mean-value theorem for Dirichlet polynomials",
        defaults: &[("n", "500"), ("t", "100,5000"), ("vectors", "20")],
        run: mean_value,
    },
    Experiment {
        name: "halasz",
        anchor: "Halász–Montgomery large-sieve bound on subsets of [−T, T]",
        defaults: &[("n", "200"), ("t", "1000"), ("cells", "10")],
        run: halasz,
    },
    Experiment {
        name: "large-values",
        anchor: "measure of large values of prime Dirichlet polynomials and typical sets",
        defaults: &[("q", "100"), ("t", "1e4"), ("gamma", "0.1111111111111111"), ("a", "100"), ("alpha", "0.5"), ("delta", "0.1"), ("typical_t", "1000"), ("samples", "100")],
        run: large_values,
    },
    Experiment {
        name: "factorization",
        anchor: "Ramaré-type factorization weight u_X and its exceptional set",
        defaults: &[("x", "1e4"), ("delta", "0.1"), ("p0", "10"), ("q0", "100"), ("t", "0"), ("levels", "9")],
        run: factorization,
    },
    Experiment {
        name: "variance",
        anchor: "variance of λ in short multiplicative intervals",
        defaults: &[("x", "1e7"), ("h", "1e2,1e3,1e4,1e5"), ("threshold", "0.01")],
        run: variance_decay,
    },
    Experiment {
        name: "parseval-link",
        anchor: "Parseval bound of short-interval variance by a mean value of Z_f on Re s = 1",
        defaults: &[("x", "1e4"), ("h", "100"), ("delta", "0.1")],
        run: parseval,
    },
    Experiment {
        name: "expsum",
        anchor: "Vinogradov bound on Σ min(X, 1/‖αn‖) and short sums of λ(n)e(αn)",
        defaults: &[("x", "1e6"), ("h", "1e3"), ("alpha", "1.4142135623730951"), ("cases", "100"), ("degree", "256")],
        run: expsum,
    },
    Experiment {
        name: "arcs",
        anchor: "fourth moment of prime exponential sums and the measure of major arcs",
        defaults: &[("h", "1e4"), ("epsilon", "0.5"), ("grid", "1e6")],
        run: arcs,
    },
    Experiment {
        name: "characters",
        anchor: "Dirichlet characters and decomposition of e(an/q) into characters",
        defaults: &[("q", "50"), ("decomposition_q", "30")],
        run: characters,
    },
    Experiment {
        name: "chowla-avg",
        anchor: "two-point Chowla on average over shifts",
        defaults: &[("x", "1e6"), ("h", "100"), ("check_x", "1e4")],
        run: chowla,
    },
    Experiment {
        name: "prime-shift",
        anchor: "Liouville correlations averaged over prime shifts",
        defaults: &[("x", "1e6"), ("h", "1e3")],
        run: prime_shift,
    },
    Experiment {
        name: "goldbach",
        anchor: "ternary Goldbach-type sums with unit and λ weights",
        defaults: &[("n", "1e4")],
        run: goldbach,
    },
    Experiment {
        name: "entropy",
        anchor: "entropy of sign patterns of λ and residues of a log-weighted integer",
        defaults: &[("x", "1e6"), ("w", "1e3"), ("h", "10"), ("epsilon", "1"), ("hoeffding_n", "100"), ("s", "10,20,30"), ("trials", "1e5")],
        run: entropy,
    },
    Experiment {
        name: "log-chowla",
        anchor: "logarithmic two-point Chowla, divisibility trick and sum-as-expectation identity",
        defaults: &[
            ("x", "1e7"),
            ("w", "1e3"),
            ("div_w", "100"),
            ("k0", "10"),
            ("k1", "100"),
            ("sum_x", "1e6"),
            ("sum_w", "100"),
            ("h", "10"),
            ("epsilon", "1"),
        ],
        run: log_chowla,
    },
    Experiment {
        name: "decrement-trace",
        anchor: "entropy decrement along growing scales and the divergent sequence h_j",
        defaults: &[("x", "1e6"), ("w", "1e3"), ("epsilon", "1"), ("h0", "8"), ("steps", "2"), ("h1", "1000"), ("target", "1")],
        run: decrement,
    },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    CATALOG.iter().find(|e| e.name == name)
}

fn sieve_check(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let n = c.p().u64("n")?;
    let base = c.p().u64("base")?;
    let span = c.p().u64("span")?;
    let samples = c.p().u64("samples")?;
    let table = build_sieve(1, n + 1)?;
    let prefix = (1..=n).filter(|&k| table.record(k) != trial_record(k)).count();
    let table = build_sieve(base, base + span + 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let random = (0..samples)
        .filter(|_| {
            let k = rng.gen_range(base..=base + span);
            table.record(k) != trial_record(k)
        })
        .count();
    Ok(vec![
        c.at_most("mismatches for n <= N", prefix as f64, 0.0),
        c.at_most("mismatches at random n in [base, base+span]", random as f64, 0.0),
    ])
}

fn squarefree(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let x = c.p().u64("x")?;
    let d = squarefree_count(x)? as f64 / x as f64;
    let tol = 5e-4;
    let dev = (d - 0.6079).abs();
    Ok(vec![c.row("Q(x)/x", d, Some(tol), Some(dev / tol), Some(dev <= tol))])
}

fn tnp(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let x = c.p().u64("x")?;
    let lo = c.p().u64("mertens_lo")?;
    let px = c.p().u64("pairs_x")?;
    let xf = x as f64;
    let l = summatory_lambda(x)? as f64;
    let psi = chebyshev_psi(x)?;
    let inc = prime_reciprocal_sum(x)? - prime_reciprocal_sum(lo)?;
    let mertens = inc - (xf.ln().ln() - (lo as f64).ln().ln());
    let pairs = prime_pair_count(px, 2)? as f64 * (px as f64).ln().powi(2) / px as f64;
    let cutoff = SmoothCutoff::new(c.p().f64("delta")?)?;
    let perron_x = c.p().f64("perron_x")?;
    let perron_t = c.p().f64("perron_t")?;
    let mut rows = vec![
        c.at_most("|L(x)|/x", l.abs() / xf, 1e-2),
        c.at_most("|psi(x) - x|/x", (psi - xf).abs() / xf, 0.02),
        c.at_most("|Mertens increment - loglog increment|", mertens.abs(), 0.01),
        c.at_most("twin prime pairs * (log X)^2 / X", pairs, 10.0),
    ];
    let two = ComplexPoint::real(2.0)?;
    rows.push(c.at_most("|sum lambda(n)/n^2 - zeta(4)/zeta(2)|", z_lambda_residual(two, c.p().u64("zeta_n")?)?, 1e-3));
    rows.push(c.info("zeta(2)", zeta(two)?.value.re));
    for (kind, label) in [(PerronKind::Unit, "unit"), (PerronKind::Liouville, "liouville")] {
        let r = perron_truncated(kind, perron_x, cutoff, perron_t)?;
        rows.push(c.at_most(&format!("Perron error / (delta x log x), {label}"), r.ratio(), 0.05));
    }
    Ok(rows)
}

fn random_coeffs(rng: &mut ChaCha8Rng, n: u64) -> Result<CoeffSeq, RunError> {
    let pairs: Vec<(u64, Complex64)> =
        (1..=n).map(|k| (k, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))).collect();
    Ok(CoeffSeq::from_pairs(0, n, pairs)?)
}

fn mean_value(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let n = c.p().u64("n")?;
    let ts = c.p().f64_list("t")?;
    let vectors = c.p().u64("vectors")?;
    let mut rows = Vec::new();
    for &t in &ts {
        let mut worst = 0f64;
        let mut worst_delta = 0f64;
        for v in 0..vectors {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed.wrapping_add(v));
            let coeffs = random_coeffs(&mut rng, n)?;
            let r = mean_value_integral(&coeffs, t)?;
            worst = worst.max(r.ratio().abs());
            worst_delta = worst_delta.max(r.halving_delta / r.value);
        }
        rows.push(c.at_most(&format!("max |I - T sum|/(N sum), T={t}"), worst, 8.0));
        rows.push(c.below(&format!("max relative halving change, T={t}"), worst_delta, MEAN_VALUE_TOLERANCE));
    }
    Ok(rows)
}

fn halasz(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let n = c.p().u64("n")?;
    let t = c.p().f64("t")?;
    let cells = c.p().usize("cells")?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let coeffs = random_coeffs(&mut rng, n)?;
    let grid = TGrid::new(-t, t, 1.0)?;
    let picks: Vec<usize> = (0..cells).map(|_| rng.gen_range(0..grid.cells())).collect();
    let subset = TSubset::from_cells(&grid, &picks)?;
    let r = halasz_subset_integral(&coeffs, &subset, t)?;
    Ok(vec![c.at_most("subset integral / (N + |S| sqrt(T) log T) sum", r.ratio(), 10.0)])
}

fn large_values(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let q = c.p().u64("q")?;
    let t = c.p().f64("t")?;
    let gamma = c.p().f64("gamma")?;
    let coeffs = prime_coeffs(q, 2 * q, |p| Complex64::new(1.0 / p as f64, 0.0))?;
    let r = large_value_measure(&coeffs, t, gamma)?;
    let grid = TGrid::new(0.0, c.p().f64("typical_t")?, 0.05)?;
    let ts = typical_set(c.p().u64("a")?, gamma, c.p().f64("alpha")?, c.p().f64("delta")?, grid)?;
    let members: Vec<usize> = ts.mask.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| k).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut disagreements = 0;
    if !members.is_empty() {
        for _ in 0..c.p().u64("samples")? {
            let k = members[rng.gen_range(0..members.len())];
            if !ts.recompute(k)? {
                disagreements += 1;
            }
        }
    }
    Ok(vec![
        c.at_most("large-value measure / T^(4/9)", r.measure / t.powf(4.0 / 9.0), 50.0),
        c.info("typical-set complement measure", ts.complement_measure()),
        c.at_most("typical-set membership disagreements", disagreements as f64, 0.0),
    ])
}

fn factorization(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let w = RamareWeight::new(c.p().u64("x")?, c.p().f64("delta")?, c.p().u64("p0")?, c.p().u64("q0")?)?;
    let err = err_set(&w)?;
    let ladder = identity_ladder(&w, c.p().f64("t")?, 16, c.p().u64("levels")? as u32)?;
    let slope = ladder_slope(&ladder);
    Ok(vec![
        c.at_most("-min u_X", -err.min_weight, 0.0),
        c.at_most("max u_X", err.max_weight, 1.0),
        c.at_most("|Err|/X", err.density, 3.0 * (w.alpha() + w.delta)),
        c.at_most("identity residual order in q_nodes", slope, -1.0),
    ])
}

fn variance_decay(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let x = c.p().u64("x")?;
    let hs = c.p().f64_list("h")?;
    let threshold = c.p().f64("threshold")?;
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    for (i, &h) in hs.iter().enumerate() {
        let spec = WindowSpec::new(WindowKind::Multiplicative, x, h)?;
        let v = variance(&ArithFn::Liouville, &spec)?.mean_square;
        let quantity = format!("variance, h={h}");
        let mut bound = prev;
        if i + 1 == hs.len() {
            bound = Some(bound.map_or(threshold, |b| b.min(threshold)));
        }
        rows.push(match bound {
            Some(b) => c.below(&quantity, v, b),
            None => c.info(&quantity, v),
        });
        prev = Some(v);
    }
    Ok(rows)
}

fn parseval(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let r = parseval_link(c.p().u64("x")?, c.p().f64("h")?, c.p().f64("delta")?)?;
    Ok(vec![c.at_most("variance / (integral + delta)", r.lhs / r.rhs, PARSEVAL_SLACK)])
}

fn expsum(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let x = c.p().u64("x")?;
    let h = c.p().u64("h")?;
    let alpha = c.p().f64("alpha")?;
    let avg = exp_sum_avg(x, h, alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut worst = 0f64;
    let mut inexact = 0;
    for _ in 0..c.p().u64("cases")? {
        let a: f64 = rng.gen_range(0.0..1.0);
        let n = rng.gen_range(1..=10_000u64);
        let big_x = rng.gen_range(1..=1000u64) as f64;
        let r = vinogradov_sum(a, n, big_x)?;
        if !r.approx.satisfies() {
            inexact += 1;
        }
        worst = worst.max(r.value / r.bound);
    }
    let degree = c.p().usize("degree")?;
    let coeffs: Vec<Complex64> =
        (0..=degree).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let parseval = torus_parseval_check(&coeffs)?;
    Ok(vec![
        c.below("mean |sum lambda(n) e(alpha n)| / h", avg, 0.2),
        c.at_most("max Vinogradov sum / bound", worst, 1.0),
        c.at_most("approximations failing the exact check", inexact as f64, 0.0),
        c.at_most("torus Parseval relative error", parseval.relative_error(), FFT_PARSEVAL_TOLERANCE),
    ])
}

fn arcs(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let h = c.p().u64("h")?;
    let eps = c.p().f64("epsilon")?;
    let fourth = fourth_moment_primes(h)? as f64;
    let hf = h as f64;
    let r = major_arc_measure(h, eps, c.p().usize("grid")?)?;
    Ok(vec![
        c.at_most("fourth moment * (log h)^4 / h^3", fourth * hf.ln().powi(4) / hf.powi(3), 40.0),
        c.at_most("major arc measure", r.measure, 20.0 / (eps.powi(4) * hf)),
    ])
}

fn characters(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let mut worst = 0f64;
    for q in 1..=c.p().u64("q")? {
        let table = characters_mod(q)?;
        let rows: Vec<Vec<Complex64>> = (0..table.len()).map(|i| table.row(i)).collect();
        let phi = table.len() as f64;
        for (i, a) in rows.iter().enumerate() {
            if i != table.trivial_index() {
                worst = worst.max(a.iter().sum::<Complex64>().norm());
            }
            for (j, b) in rows.iter().enumerate() {
                let ip = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>() / phi;
                worst = worst.max((ip - if i == j { 1.0 } else { 0.0 }).norm());
            }
        }
    }
    let mut recon = 0f64;
    for q in 1..=c.p().u64("decomposition_q")? {
        for a in 0..q as i64 {
            let d = additive_to_multiplicative(a, q)?;
            for n in 0..q {
                recon = recon.max((d.eval(n) - e(a as f64 * n as f64 / q as f64)).norm());
            }
        }
    }
    Ok(vec![
        c.at_most("orthonormality and character sum error", worst, 1e-12),
        c.at_most("reconstruction error of e(an/q)", recon, 1e-10),
    ])
}

fn chowla(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let x = c.p().u64("x")?;
    let h = c.p().u64("h")?;
    let r = chowla_avg(x, h, ChowlaMethod::Fourier)?;
    let single = liouville_shift_sum(x, 1)?.unsigned_abs() as f64 / x as f64;
    let cx = c.p().u64("check_x")?;
    let fast = chowla_avg(cx, h.min(cx), ChowlaMethod::Fourier)?;
    let naive = chowla_avg(cx, h.min(cx), ChowlaMethod::Naive)?;
    let differing = fast.table.values.iter().zip(&naive.table.values).filter(|(a, b)| a != b).count();
    Ok(vec![
        c.below("averaged correlation statistic", r.stat, 0.05),
        c.below("|sum lambda(n) lambda(n+1)| / x", single, 0.01),
        c.at_most("Fourier and naive correlations differing", differing as f64, 0.0),
    ])
}

fn prime_shift(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let r = prime_shift_correlation(c.p().u64("x")?, c.p().u64("h")?)?;
    Ok(vec![c.below("|normalized prime-shift correlation|", r.normalized.abs(), 0.2)])
}

fn goldbach(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let n = c.p().u64("n")?;
    let half = (n as f64).powi(2) / 2.0;
    let unit = ternary_sum(n, TernaryWeight::Unit)? as f64;
    let lam = ternary_sum(n, TernaryWeight::Liouville)? as f64;
    Ok(vec![
        c.at_most("|T_N / (N^2/2) - 1|", (unit / half - 1.0).abs(), 0.01),
        c.info("S_N / (N^2/2)", lam / half),
    ])
}

fn entropy(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let x = c.p().u64("x")?;
    let w = c.p().f64("w")?;
    let model = LogWeightedModel::new(x, w)?;
    let joint = build_joint(&model, c.p().usize("h")?, c.p().f64("epsilon")?)?;
    let p = entropy_properties(&joint);
    let ef = expectation_f(&joint);
    let ef_ind = expectation_f_independent(&joint);
    let mut rows = vec![
        c.info("H(X)", p.h_x),
        c.info("I(X,Y)", p.mutual),
        c.at_most("-I(X,Y)", -p.mutual, ENTROPY_TOLERANCE),
        c.at_most("chain rule residual", p.chain_residual, ENTROPY_TOLERANCE),
        c.at_most("H(X,Y) - H(X) - H(Y)", p.subadditivity_excess, ENTROPY_TOLERANCE),
        c.at_most("max |P(Y=y) - 1/|Omega||", joint.y_uniform_deviation(), Y_UNIFORM_SLACK * w / x as f64),
        c.at_most("|E F(X,Y) - E F(X,Y*)|", (ef - ef_ind).abs(), 1.0),
    ];
    let n = c.p().u64("hoeffding_n")?;
    let trials = c.p().u64("trials")?;
    for s in c.p().f64_list("s")? {
        let r = hoeffding_tail_check(n, 1.0, s, trials, c.seed)?;
        rows.push(c.at_most(&format!("Hoeffding empirical tail, s={s}"), r.empirical, r.bound + r.slack));
    }
    Ok(rows)
}

fn log_chowla(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let x = c.p().u64("x")?;
    let w = c.p().f64("w")?;
    let s = log_chowla_sum(x, w)?;
    let d = divisibility_trick_residual(x, c.p().f64("div_w")?, c.p().u64("k0")?, c.p().u64("k1")?)?;
    let e = suma_esperanza_residual(c.p().u64("sum_x")?, c.p().f64("sum_w")?, c.p().usize("h")?, c.p().f64("epsilon")?)?;
    Ok(vec![
        c.at_most("|sum lambda(n) lambda(n+1)/n|", s.abs(), 0.1 * w.ln()),
        c.at_most("divisibility trick residual", d.residual, d.bound),
        c.at_most("sum-as-expectation residual", e.residual, e.bound),
    ])
}

fn decrement(c: &Ctx) -> Result<Vec<ResultRow>, RunError> {
    let t = decrement_trace(
        c.p().u64("x")?,
        c.p().f64("w")?,
        c.p().f64("epsilon")?,
        c.p().usize("h0")?,
        c.p().usize("steps")?,
    )?;
    let mut rows = Vec::new();
    for s in &t.steps {
        rows.push(c.info(&format!("entropy rate H(X_h)/h, h={}", s.h), s.entropy_rate));
        rows.push(c.at_most(&format!("-I(X_h,Y_h)/h, h={}", s.h), -s.information_rate, ENTROPY_TOLERANCE));
    }
    let excess = t
        .steps
        .windows(2)
        .map(|w| w[1].x_entropy - (w[1].h / w[0].h) as f64 * w[0].x_entropy)
        .fold(f64::NEG_INFINITY, f64::max);
    if excess.is_finite() {
        rows.push(c.at_most("max H(X_kh) - k H(X_h)", excess, 1e-9));
    }
    rows.push(c.info("trace steps completed", t.steps.len() as f64));
    let h1 = c.p().u64("h1")?;
    let d = divergence_sequence(h1, c.p().f64("target")?, 10_000)?;
    let l2 = (h1 as f64).ln().ln();
    rows.push(c.at_most("log J / (log log h1)^2", (d.j as f64).ln() / (l2 * l2), 10.0));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_complete() {
        assert!(CATALOG.len() >= 15);
        let mut names: Vec<&str> = CATALOG.iter().map(|e| e.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), CATALOG.len());
        assert!(CATALOG.iter().all(|e| !e.anchor.is_empty()));
    }

    #[test]
    fn error_classes() {
        let budget = Error::Budget { what: "x", requested: 2, limit: 1 };
        assert!(matches!(RunError::from(budget), RunError::Resource(_)));
        assert!(matches!(RunError::from(Error::Precondition("p".into())), RunError::Usage(_)));
        assert!(matches!(RunError::from(Error::NotReached("n".into())), RunError::Failed(_)));
    }
}
