//! Sobol' points, their randomization, and the map from uniforms to normals.

mod normal;
mod scramble;
mod sobol;

pub(crate) use normal::probit;
pub use normal::{inv_normal_cdf, norm_cdf, norm_pdf};
pub use scramble::{
    derive_seed, mix64, randomize, LinearScramble, RandomizationSeed, ScrambledSobol,
};
pub use sobol::{
    generate_sobol, generate_sobol_with, is_dyadic_stratified, DirectionNumbers, PointSet,
    SobolIter, BITS, MAX_DIMENSION,
};
