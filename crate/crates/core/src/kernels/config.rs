use serde::{Deserialize, Serialize};

use super::{KernelSpec, MeanSpec};

/// JSON model document:
///
/// ```json
/// {"kernel": {"family": "squared_exponential", "variance": 1.0, "lengthscales": [1.0]},
///  "mean": {"type": "constant_unknown"},
///  "noise_variance": 0.0}
/// ```
///
/// `variant` (one of `sk`, `ok`, `uk`, `gpr`, `gpr-basis`) and `max_jitter`
/// are optional and only read by the command-line front end.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kernel: KernelSpec,
    pub mean: MeanSpec,
    #[serde(default)]
    pub noise_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_jitter: Option<f64>,
}
