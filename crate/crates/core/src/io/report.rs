use serde::{Deserialize, Serialize};

use crate::extraction::{Diagnostics, DispersionEstimate, SlopeEstimate};
use crate::synthesis::CoherenceCheck;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpResult {
    pub pump_nm: f64,
    pub lambda_deg_nm: f64,
    /// Absent when the FUT length is zero.
    pub estimate: Option<DispersionEstimate>,
    /// `D ± σ` in the `16.69(5)` notation.
    pub d_display: Option<String>,
    /// rad·ps²
    pub delta_c2: f64,
    pub sigma_delta_c2: f64,
    /// rad·ps⁴
    pub delta_c4: f64,
    pub diagnostics: Diagnostics,
    pub coherence: Option<CoherenceCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripSummary {
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub provenance: Provenance,
    pub pumps: Vec<PumpResult>,
    pub slope: Option<SlopeEstimate>,
    pub slope_display: Option<String>,
    pub warnings: Vec<String>,
    pub roundtrip: Option<RoundtripSummary>,
}

impl Report {
    /// Pretty JSON. Floats are written in their shortest exact form, so
    /// parsing the text gives back identical values.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Parse {
            source_name: "report".into(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}
