//! Flat `key = value` configuration files with a versioned header line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kcq::dynamics::QoISpec;
use kcq::measurement::MeasurementModel;
use kcq::pipeline::{RunConfig, SystemSelector};
use kcq::{Error, Result};

pub const CONFIG_HEADER: &str = "kcq-config 1";

/// Parsed key/value pairs after override application.
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    /// Parses the file, checks the header line, and applies `--set`
    /// overrides (each `key=value`).
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some(h) if h == CONFIG_HEADER => {}
            Some(h) => {
                return Err(Error::Config(format!(
                    "unsupported config header '{h}', expected '{CONFIG_HEADER}'"
                )))
            }
            None => return Err(Error::Config("empty config file".into())),
        }
        let mut values = BTreeMap::new();
        for line in lines {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed config line '{line}'")))?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        for set in overrides {
            let (k, v) = set
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed override '{set}'")))?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("missing config key '{key}'")))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.require(key)?
            .parse()
            .map_err(|_| Error::Config(format!("config key '{key}' has an invalid value")))
    }

    fn parsed_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("config key '{key}' has an invalid value"))),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<String>> {
        Ok(self
            .require(key)?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect())
    }

    fn float_list(&self, key: &str) -> Result<Vec<f64>> {
        self.list(key)?
            .iter()
            .map(|s| {
                s.parse().map_err(|_| {
                    Error::Config(format!("config key '{key}' has a non-numeric entry '{s}'"))
                })
            })
            .collect()
    }

    /// Assembles the run configuration; `out_dir` comes from the CLI, not
    /// the file.
    pub fn to_run_config(&self, out_dir: Option<PathBuf>) -> Result<RunConfig> {
        let qois: Vec<QoISpec> = self
            .list("qois")?
            .iter()
            .map(|l| QoISpec::parse(l))
            .collect::<Result<_>>()?;
        let sensor_specs: Vec<QoISpec> = self
            .list("sensors")?
            .iter()
            .map(|l| QoISpec::parse(l))
            .collect::<Result<_>>()?;
        let noise_sd = self.float_list("noise_sd")?;
        let noise_mean = match self.values.get("noise_mean") {
            Some(_) => self.float_list("noise_mean")?,
            None => vec![0.0; sensor_specs.len()],
        };
        let sensors = MeasurementModel::new(sensor_specs, noise_mean, noise_sd)?;
        let n: usize = self.parsed("n")?;
        let config = RunConfig {
            system: SystemSelector::parse(self.require("system")?)?,
            n,
            halton_seed: self.parsed("halton_seed")?,
            probe_seed: self.parsed("probe_seed")?,
            n_probe: self.parsed_or("n_probe", 100 * n)?,
            dt: self.parsed("dt")?,
            n_steps: self.parsed("n_steps")?,
            tol: self.parsed_or("tol", kcq::dynamics::DEFAULT_TOL)?,
            max_iter: self.parsed_or("max_iter", kcq::dynamics::DEFAULT_MAX_ITER)?,
            qois,
            sensors,
            n_k: self.parsed("n_k")?,
            grid_points: self.parsed_or("grid_points", 400)?,
            max_failure_fraction: self.parsed_or("max_failure_fraction", 0.001)?,
            out_dir,
        };
        config.validate()?;
        Ok(config)
    }
}
