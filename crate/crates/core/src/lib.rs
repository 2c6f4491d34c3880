//! Nonlocal approximations of the horizontal gradient on Carnot groups.
//!
//! The crate is organised bottom-up:
//!
//! * [`group`]: step-1 and step-2 Carnot groups in exponential coordinates
//!   (group law, dilations, horizontal frame).
//! * [`gauge`]: homogeneous norms and their horizontal gradients.
//! * [`mollifier`]: radial mollifier profiles and the kernel `K_eps`.
//! * [`quad`]: box grids, Monte Carlo, the polar (sphere x radius) rules and
//!   ball / sphere measures.
//! * [`testfn`]: compactly supported test fields with exact gradients.
//! * [`nonlocal`]: the nonlocal gradient `V_eps`, the energies, the Taylor
//!   remainder and the limit constants.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the experiment
//! runner uses.

pub mod error;
pub mod gauge;
pub mod group;
pub mod mollifier;
pub mod nonlocal;
pub mod quad;
pub mod scalar;
pub mod testfn;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use gauge::{HomogeneousNorm, Norm};
pub use group::{Aabb, CarnotGroup, HorizontalVec, Point};
pub use mollifier::{MollifierFamily, Profile};
pub use nonlocal::NonlocalContext;
pub use quad::{Estimate, QuadBudget, RadialRule, SphereRule};
pub use testfn::ScalarField;

pub type Group64 = CarnotGroup<f64>;
pub type Group32 = CarnotGroup<f32>;
pub type Point64 = Point<f64>;
pub type HorizontalVec64 = HorizontalVec<f64>;
pub type Aabb64 = Aabb<f64>;
pub type Norm64 = Norm<f64>;
pub type Profile64 = Profile<f64>;
pub type SphereRule64 = SphereRule<f64>;
pub type RadialRule64 = RadialRule<f64>;
pub type Estimate64 = Estimate<f64>;
