//! Warped profiles, their curvature coefficients and the `lambda` certificate.

pub mod frame;
pub mod lambda;
pub mod measure;
pub mod profile;
pub mod tensor;

pub use frame::CurvatureFrameData;
pub use lambda::{certify, LAMBDA_TOL, condition_margins, conditions_hold, lambda_at, lambda_from_jet, CertifyOptions, LambdaCertificate};
pub use measure::{
    check_kahler, check_smooth_closure, closure_residuals, gh_upper_bound, hessian, ricci_components, Hessian, RicciComponents, sectional, volume,
    volume_by_quadrature, volume_constant,
};
pub use profile::{FlatCone, HalfFubiniStudy, Jet, ModelHk, SampledProfile, Scaled, WarpProfile};
pub use tensor::CurvatureTensor;
