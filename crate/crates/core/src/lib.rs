//! Numerical laboratory for the Ericksen–Leslie equations of nematic
//! liquid crystals with general Oseen–Frank energy and a static magnetic
//! field.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the command-line tool uses.

pub mod control;
pub mod energy;
pub mod fields;
pub mod material;
pub mod relative_energy;
pub mod scalar;
pub mod scheme;
pub mod tensor;

pub use scalar::Real;

pub type Vec3 = tensor::Vec3<f64>;
pub type Mat3 = tensor::Mat3<f64>;
pub type Grid = fields::Grid<f64>;
pub type ScalarField = fields::ScalarField<f64>;
pub type VectorField = fields::VectorField<f64>;
pub type MatrixField = fields::MatrixField<f64>;
pub type MaterialParams = material::MaterialParams<f64>;
pub type MaterialInputs = material::MaterialInputs<f64>;
pub type FieldState = scheme::FieldState<f64>;
pub type SchemeConfig = scheme::SchemeConfig<f64>;
pub type SimulationTrace = scheme::SimulationTrace<f64>;
pub type ControlProblem = control::ControlProblem<f64>;
pub type ControlResult = control::ControlResult<f64>;
