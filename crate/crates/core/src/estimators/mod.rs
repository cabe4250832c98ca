//! Grid-search localization under the unit-amplitude model and joint
//! localization with amplitude calibration.

pub mod aml;
pub mod amml;
pub mod grids;
pub mod jacobi;

use serde::{Deserialize, Serialize};

use crate::geometry::{SphericalCoords, Vec3};
use crate::ris_model::RisAmplitudeParams;
use crate::signal::ChannelGain;

pub use aml::{aml, AmlConfig, AmlEstimator, AmlOutcome, BetaUpdate, Calibration, CalibrationModel};
pub use amml::{amml, exhaustive_mml, AmmlConfig, AmmlEstimator};
pub use grids::SearchGrids;
pub use jacobi::{JacobiBasis, JacobiTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Jacobi,
    Alternating,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Jacobi => "jacobi",
            Branch::Alternating => "alternating",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimationResult {
    pub position: Vec3,
    pub gain: ChannelGain,
    pub spherical: SphericalCoords,
    pub calibrated_zeta: Option<RisAmplitudeParams>,
    /// Near-field objective after each update.
    pub objective_trace: Vec<f64>,
    pub branch: Branch,
}
