//! Random dynamics of circle homeomorphisms: iterated function systems on
//! `S¹ = R/Z`, their stationary measures, preserved distances, and the
//! synchronization / factorization / invariance classification.

pub mod analysis;
pub mod circle;
pub mod error;
mod grid;
pub mod homeo;
pub mod ifs;
pub mod measure;
pub mod preserved;

pub use analysis::{AnalysisConfig, ConjugatedSystem, FiberMeasure, SynchronizationReport, TrichotomyLabel, TrichotomyResult};
pub use circle::{dist, dist_add, rotate, wrap01, Arc, CircleDistance, CirclePoint};
pub use error::{Error, Result};
pub use homeo::{
    CdfMap, CircleMap, ConjugationDirection, HomeoDescriptor, Homeomorphism, Orientation,
};
pub use ifs::{IfsDescriptor, IfsWithProbabilities, SymbolStream, Trajectory};
pub use measure::{EmpiricalMeasure, GridFunction, GridMeasure};
pub use preserved::{Metric, PreservedDistanceReport, PreservedSet};
