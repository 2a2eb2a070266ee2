//! Blue-green infrastructure placement: design storms, a raster flood
//! engine, building damage and life-cycle costing, coupled to a binary
//! NSGA-II and Pareto-front metrics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod catchment;
pub mod config;
pub mod economics;
pub mod error;
pub mod fixtures;
pub mod flood;
pub mod genome;
pub mod geometry;
pub mod io;
pub mod grid;
pub mod metrics;
pub mod nsga2;
pub mod pipeline;
pub mod risk;
pub mod storm;

pub use catchment::{Building, BuildingCategory, Catchment, LandClass, Zone};
pub use config::RunConfig;
pub use economics::{CostParams, DdcByPeriod};
pub use error::{Error, Result};
pub use flood::{DepthField, FloodModel, FloodParams};
pub use genome::Genome;
pub use grid::{Grid, Raster};
pub use metrics::{FrontCurve, RiskRange};
pub use nsga2::{Evaluation, Evaluator, GaConfig, Objectives, ParetoFront};
pub use risk::{DamageCurve, DamageCurves, RiskModel};
pub use storm::{ClimateUplift, DdfDescriptors, DesignStorm, ProfileParams};
