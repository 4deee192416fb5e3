//! Experiment configuration, parsed strictly from TOML.

use serde::{Deserialize, Serialize};

pub const EXPERIMENTS: [&str; 8] = [
    "scalar_resolvent",
    "cp_check",
    "resolvent",
    "convolve",
    "covariance",
    "verify_ito",
    "verify_volterra",
    "yosida",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub code_version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_quadrature: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mus: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_id: Option<u64>,
    pub kernel: KernelConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorConfig>,
    pub grid: GridConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Fractional {
        alpha: f64,
    },
    Exponential {
        #[serde(default = "one")]
        scale: f64,
        rate: f64,
    },
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    Linear,
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    /// Number of modes of cylindrical noise (`q_k = 1`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cylindrical: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// `B = scale · I` when no matrix is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "scalar_resolvent"
mu = 1.0
[kernel]
variant = "constant"
[grid]
T = 1.0
N = 16
"#;

    #[test]
    fn parses_minimal() {
        let c = Config::parse(MINIMAL).unwrap();
        assert_eq!(c.kernel, KernelConfig::Constant { value: 1.0 });
        assert_eq!(c.grid.steps, 16);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(Config::parse(&format!("{MINIMAL}\nbogus = 1")).is_err());
        assert!(
            Config::parse(&MINIMAL.replace("variant = \"constant\"", "variant = \"constant\"\nalpha = 0.5")).is_err()
        );
        assert!(Config::parse(&MINIMAL.replace("N = 16", "N = 16\ndt = 0.1")).is_err());
    }

    #[test]
    fn round_trips() {
        let c = Config::parse(MINIMAL).unwrap();
        assert_eq!(Config::parse(&c.to_toml()).unwrap(), c);
    }
}
