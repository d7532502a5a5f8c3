//! Closed-form densities and characteristic functions.

mod cf;
mod density;

pub(crate) use cf::cf_closed_complex;
pub use cf::{
    cf_closed, cf_determinant, cf_reduced, cf_triple, cf_triple_determinant, clt_covariance, clt_limit_density, CfQuery,
};
pub(crate) use density::check_sample_size;
pub use density::{
    density_general, density_n1, density_n2, density_n3, density_n3_reduced, density_n4, diff_density,
    marginal_density, DensityQuery, JointDensity,
};
pub use num_complex::Complex64;
