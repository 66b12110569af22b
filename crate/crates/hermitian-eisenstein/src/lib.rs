//! Exact arithmetic for Hermitian modular forms on U(n,n) over an imaginary
//! quadratic field of class number 1: Fourier coefficients of Siegel- and
//! Klingen-type Eisenstein series, local Siegel series, Hecke coset data,
//! critical L-value constants, and congruence-criterion reports.

pub mod arith;
pub mod bigfloat;
pub mod quadfield;
pub mod modform;
pub mod lattice;
pub mod siegel;
pub mod lfunc;
pub mod pullback;
pub mod hecke;
pub mod congruence;
