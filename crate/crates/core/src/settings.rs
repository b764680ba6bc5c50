use serde::{Deserialize, Serialize};

use crate::normalize::McConfig;

/// Shared knobs for operations that restate, fuse or reduce components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Largest angle between tangent points that may share a chart, degrees.
    pub max_chart_angle_deg: f64,
    /// Mixture components lighter than this are discarded after fusion.
    pub weight_floor: f64,
    pub mc: McConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_chart_angle_deg: 15.0,
            weight_floor: 1e-12,
            mc: McConfig::default(),
        }
    }
}

impl Settings {
    pub fn with_mc(mc: McConfig) -> Self {
        Settings {
            mc,
            ..Default::default()
        }
    }

    pub fn max_chart_angle(&self) -> f64 {
        self.max_chart_angle_deg.to_radians()
    }
}
