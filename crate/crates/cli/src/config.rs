//! TOML run configuration. Unknown keys are rejected.
//!
//! `fit` and `test` accept:
//!
//! ```toml
//! model = "gpd-l234"          # gpd-l234 | weibull-l234 | orderstat3
//! divergence = "chi2"         # chi2 | kl | klm | power:<gamma>
//! plugin = "parametric"       # parametric | empirical
//!
//! [options.dual]              # inner Newton solver
//! max_iter = 200
//! grad_tol = 1e-9
//!
//! [options.outer]             # Nelder-Mead over θ
//! max_evals = 4000
//! x_tol = 1e-9
//! ```
//!
//! `simulate` accepts:
//!
//! ```toml
//! [scenario]
//! scenario = 1                # 1..=4
//! n = 100
//! replicates = 500
//! seed = 42
//! estimators = ["chi2", "klm", "lmom", "moment", "mle"]
//!
//! [output]
//! dir = "sim-out"
//! plot_points = 200
//!
//! [options]                   # as for fit
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use splq_core::divergence::Divergence;
use splq_core::estimator::{FitOptions, Plugin};
use splq_core::models::ModelKind;
use splq_core::sim::ScenarioConfig;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub model: Option<ModelKind>,
    pub divergence: Option<Divergence>,
    pub plugin: Option<Plugin>,
    #[serde(default)]
    pub options: FitOptions,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub options: FitOptions,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plot_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("sim-out"),
            plot_points: 200,
        }
    }
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, toml::de::Error> {
    toml::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_config_roundtrip() {
        let c: FitConfig = parse(
            "model = \"orderstat3\"\ndivergence = \"power:0.5\"\n[options.outer]\nmax_evals = 10\n",
        )
        .unwrap();
        assert_eq!(c.model, Some(ModelKind::OrderStat3));
        assert_eq!(c.divergence, Some(Divergence::Power(0.5)));
        assert_eq!(c.options.outer.max_evals, 10);
        assert_eq!(c.options.dual, FitOptions::default().dual);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse::<FitConfig>("modle = \"gpd-l234\"\n").is_err());
        assert!(parse::<FitConfig>("[options.outer]\nmax_eval = 3\n").is_err());
        assert!(parse::<SimulateConfig>("[scenario]\nscenario = 1\nn = 30\nextra = 1\n").is_err());
        assert!(parse::<SimulateConfig>("[scenario]\nscenario = 1\nn = 30\n[output]\nfile = \"x\"\n").is_err());
    }

    #[test]
    fn simulate_defaults() {
        let c: SimulateConfig = parse("[scenario]\nscenario = 2\nn = 30\n").unwrap();
        assert_eq!(c.scenario.replicates, 500);
        assert_eq!(c.scenario.estimators.len(), 5);
        assert_eq!(c.output.plot_points, 200);
    }
}
