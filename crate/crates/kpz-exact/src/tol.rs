//! Tolerances shared by the library checks, the CLI defaults and the
//! acceptance suite.

/// Duality residual over random states.
pub const DUALITY: f64 = 1e-13;
/// Nested contour vs partition expansion, relative.
pub const CONTOUR_VS_UNNESTED: f64 = 1e-8;
/// Left/right sides of the unnesting identity, relative.
pub const UNNESTING: f64 = 1e-8;
/// Monte Carlo agreement in standard errors.
pub const MC_SIGMAS: f64 = 3.0;
/// G(zeta) series vs the Fredholm determinant.
pub const G_VS_DET: f64 = 1e-6;
/// Summed vs Mellin-Barnes kernel.
pub const KERNEL_FORMS: f64 = 1e-8;
/// Inverted pmf total mass.
pub const PMF_MASS: f64 = 1e-6;
/// Inverted pmf negativity allowance.
pub const PMF_NEGATIVITY: f64 = 1e-8;
/// Fredholm vs Painleve representations of F_2.
pub const TW_METHODS: f64 = 1e-6;
/// F_2(8) distance from 1.
pub const TW_RIGHT_TAIL: f64 = 1e-10;
/// Crossover values above 1.
pub const CROSSOVER_RANGE: f64 = 1e-8;
/// gamma_1(1) distance from 0.
pub const GAMMA1_AT_ONE: f64 = 1e-12;
/// k=2 critical point vs closed form.
pub const CRITICAL_POINT: f64 = 1e-10;
/// Minimal gap in the intermittency chain.
pub const INTERMITTENCY_GAP: f64 = 1e-6;
/// Relative distance of log|lambda=(2) term|/tau from H_2(z_c).
pub const LYAPUNOV_GROWTH_REL: f64 = 0.02;
/// Eigenrelation and boundary residuals.
pub const EIGEN: f64 = 1e-10;
/// J F = Id residual.
pub const PLANCHEREL: f64 = 1e-7;
/// Biorthogonality residual.
pub const BIORTHOGONALITY: f64 = 1e-7;
/// Scaling-law slope.
pub const SCALING_SLOPE: f64 = 1e-10;
/// Iterated quadrature vs closed-form chaos variance.
pub const CHAOS_ITERATED: f64 = 1e-6;
/// Stirling and Airy asymptotic ratios.
pub const ASYMPTOTIC_RATIO: f64 = 0.01;
/// Probability clipping window.
pub const PROBABILITY_CLIP: f64 = 1e-8;
