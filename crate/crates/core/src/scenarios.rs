//! The three bundled benchmark instances.

use crate::error::Result;
use crate::io::ProblemFile;
use crate::model::{CostVariant, SignalingProblem};

pub const SCENARIO_1: &str = include_str!("../data/scenario1.json");
pub const SCENARIO_2: &str = include_str!("../data/scenario2.json");
pub const SCENARIO_3: &str = include_str!("../data/scenario3.json");

/// Raw JSON of scenario `index` (1-based).
pub fn source(index: usize) -> Option<&'static str> {
    match index {
        1 => Some(SCENARIO_1),
        2 => Some(SCENARIO_2),
        3 => Some(SCENARIO_3),
        _ => None,
    }
}

pub fn file(index: usize) -> Result<ProblemFile> {
    let text = source(index).ok_or_else(|| {
        crate::Error::InvalidArgument(format!("scenario {index} does not exist; choose 1, 2 or 3"))
    })?;
    ProblemFile::parse(text)
}

pub fn problem(index: usize, variant: CostVariant) -> Result<SignalingProblem> {
    file(index)?.problem(Some(variant), None)
}
