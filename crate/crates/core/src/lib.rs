//! Design and simulation toolkit for a hybrid reconfigurable intelligent
//! surface: a panel of switch-tuned reflecting cells interleaved with two
//! cross-polarized sensing sub-arrays.
//!
//! The numeric modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the file formats and
//! the command-line tool use.

pub mod controller;
pub mod fields;
pub mod geometry;
pub mod retrieval;
pub mod scalar;
pub mod sensing;
pub mod touchstone;
pub mod unitcell;

pub use scalar::{Real, SPEED_OF_LIGHT};

pub type Complex64 = num_complex::Complex<f64>;

pub type SParamRecord64 = touchstone::SParamRecord<f64>;
pub type SParamTable64 = touchstone::SParamTable<f64>;
pub type EffectiveParams64 = retrieval::EffectiveParams<f64>;
pub type MaterialModel64 = retrieval::MaterialModel<f64>;
pub type UnitCellSpec64 = geometry::UnitCellSpec<f64>;
pub type PanelLayout64 = geometry::PanelLayout<f64>;
pub type LoadBank64 = unitcell::LoadBank<f64>;
pub type HybridCellModel64 = unitcell::HybridCellModel<f64>;
pub type Direction64 = fields::Direction<f64>;
pub type Surface64 = fields::Surface<f64>;
pub type FarFieldPattern64 = fields::FarFieldPattern<f64>;
pub type Scene64 = sensing::Scene<f64>;
pub type CalibrationTable64 = controller::CalibrationTable<f64>;
pub type EpisodeLog64 = controller::EpisodeLog<f64>;

pub type PanelLayout32 = geometry::PanelLayout<f32>;
pub type Surface32 = fields::Surface<f32>;
pub type Direction32 = fields::Direction<f32>;
