//! Exact formulas and stochastic simulations for q-TASEP, the q-Boson
//! process, the semi-discrete stochastic heat equation and the narrow-wedge
//! KPZ one-point distribution.
//!
//! The crate is organised so that every exact formula has at least one
//! independent way of being checked:
//!
//! - [`specfn`]: q-Pochhammer symbols, q-exponentials, complex gamma,
//!   polygamma, Airy and heat kernels.
//! - [`procsim`]: q-TASEP, q-Boson, semi-discrete SHE and O'Connell-Yor
//!   simulations, generators and Monte Carlo moment estimators.
//! - [`contour`]: trapezoid and Gauss-Legendre contour quadrature, nested
//!   contour moment formulas and the partition (unnested) expansion.
//! - [`fredholm`]: Fredholm determinants on contours and on rays, the
//!   q-Laplace transform and its inversion, Tracy-Widom and the KPZ
//!   crossover distribution.
//! - [`bethe`]: Bethe eigenfunctions and the spectral transforms.
//! - [`asym`]: Laplace's method and Lyapunov exponents.
//! - [`chaos`]: chaos-series variances and Dirichlet integrals.
//!
//! ```
//! use kpz_exact::specfn::{q_factorial, QParam};
//! let q = QParam::new(0.5).unwrap();
//! assert!((q_factorial(3, q) - 2.625).abs() < 1e-15);
//! ```

pub mod asym;
pub mod bethe;
pub mod chaos;
pub mod contour;
pub mod error;
pub mod fredholm;
pub mod linalg;
pub mod mc;
pub mod procsim;
pub mod quad;
pub mod specfn;
pub mod tol;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// A value together with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
}

impl<T> Estimate<T> {
    pub fn new(value: T, error: f64) -> Self {
        Estimate { value, error }
    }
}

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/q_series.md")]
    pub mod q_series {}
    #[doc = include_str!("../../../book/src/duality.md")]
    pub mod duality {}
    #[doc = include_str!("../../../book/src/nested_contours.md")]
    pub mod nested_contours {}
    #[doc = include_str!("../../../book/src/fredholm.md")]
    pub mod fredholm {}
    #[doc = include_str!("../../../book/src/bethe.md")]
    pub mod bethe {}
    #[doc = include_str!("../../../book/src/lyapunov.md")]
    pub mod lyapunov {}
    #[doc = include_str!("../../../book/src/chaos.md")]
    pub mod chaos {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
