//! Fourier coefficients of cuspidal newforms at arbitrary cusps of Γ₀(N).
//!
//! Two independent routes are provided: a numerical Fourier-integral oracle
//! ([`cusp_oracle`]) and the local Whittaker product formula ([`whittaker`]).
//! [`voronoi`] checks additively twisted Voronoi summation against both.

pub mod arith;
pub mod cusp_oracle;
pub mod cusps;
pub mod json;
pub mod modform;
pub mod quadrature;
pub mod special;
pub mod voronoi;
pub mod whittaker;
