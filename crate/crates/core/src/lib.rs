//! Inelastic hard-sphere collisions, direct simulation, moment analytics and
//! Orlicz-space estimates for the spatially homogeneous granular Boltzmann
//! equation.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`.

pub mod collision;
pub mod dsmc;
pub mod geometry;
pub mod moments;
pub mod numerics;
pub mod orlicz;
pub mod scalar;

pub use scalar::Real;

pub type KernelSpec64 = collision::KernelSpec<f64>;
pub type Restitution64 = collision::Restitution<f64>;
pub type Intensity64 = collision::Intensity<f64>;
pub type Ensemble64 = dsmc::Ensemble<f64>;
pub type SimConfig64 = dsmc::SimConfig<f64>;
pub type Simulation64 = dsmc::Simulation<f64>;
pub type InitialDistribution64 = dsmc::InitialDistribution<f64>;
pub type MomentVector64 = moments::MomentVector<f64>;
pub type MomentOdeSystem64 = moments::MomentOdeSystem<f64>;
pub type YoungFunction64 = orlicz::YoungFunction<f64>;
pub type DensityGrid64 = orlicz::DensityGrid<f64>;
