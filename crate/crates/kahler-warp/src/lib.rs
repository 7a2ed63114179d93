//! Curvature certification, soliton profiles, gluing, cone lifts and a reduced Ricci flow for
//! `U(n-1)`-invariant Kähler metrics on `ℂP^{n-1}`.
//!
//! The pointwise algebra, closed-form profiles, quadrature and ODE kernels are generic over
//! [`Real`]; the pipelines work in `f64`, and the aliases below fix the scalar for callers.

pub mod cone_lift;
pub mod error;
pub mod glue;
pub mod numerics;
pub mod ricci_flow;
pub mod scalar;
pub mod soliton_ode;
pub mod warp_core;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Jet = warp_core::Jet<f64>;
pub type FrameData = warp_core::CurvatureFrameData<f64>;
pub type ModelHk = warp_core::ModelHk<f64>;
pub type FlatCone = warp_core::FlatCone<f64>;
pub type SampledProfile = warp_core::SampledProfile<f64>;
pub use warp_core::{HalfFubiniStudy, LambdaCertificate, WarpProfile};
