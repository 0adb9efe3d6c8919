//! Numerical laboratory for the Liouville function in short intervals:
//! sieves, Mellin/Perron smoothing, Dirichlet polynomials, the
//! Matomäki–Radziwiłł factorisation, circle-method exponential sums and the
//! entropy-decrement argument for logarithmic Chowla.

pub mod arith;
pub mod characters;
pub mod dirichlet;
pub mod entropy;
pub mod error;
pub mod expsum;
pub mod factorization;
pub mod intervals;
pub mod numerics;
pub mod zeta;

pub use arith::{build_sieve, FactorRecord, FactorTable, PrimeList, SieveConfig};
pub use error::{Error, Result};
