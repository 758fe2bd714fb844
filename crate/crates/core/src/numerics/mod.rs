//! Small numerical kernels shared by the physics modules: Gauss-Legendre
//! quadrature, bracketed scalar root finding and minimisation, an adaptive
//! explicit ODE integrator and a couple of special functions.

pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod special;

pub use ode::{integrate_adaptive, OdeError, OdeOptions, OdeStats};
pub use quadrature::{GaussLegendre, QuadratureEstimate};
pub use roots::{brent_root, expand_bracket_up, golden_min, RootError};
pub use special::{binomial, ln_gamma, sphere_area};
