use serde::{Deserialize, Serialize};
use thiserror::Error;

use kepap::compat::PrioPolicy;
use kepap::datagen::PopulationModel;

/// Arrival rates (mean days between arrivals) on the default grid.
pub const ARRIVAL_RATES: [f64; 5] = [1.0, 2.0, 4.0, 7.0, 14.0];
/// Match-run intervals in days on the default grid.
pub const MATCH_RUN_INTERVALS: [f64; 8] = [1.0, 2.0, 4.0, 7.0, 14.0, 30.0, 60.0, 120.0];
pub const DEPARTURE_RATES: [f64; 3] = [400.0, 800.0, 1200.0];
pub const REFUSAL_PCTS: [f64; 5] = [0.0, 10.0, 20.0, 30.0, 40.0];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{name} = {value} is outside its allowed values {allowed:?}")]
    OffGrid {
        name: &'static str,
        value: f64,
        allowed: Vec<f64>,
    },
    #[error("invalid {name}: {msg}")]
    Invalid { name: &'static str, msg: String },
}

/// Which solver a match run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Maximum-weight cycle packing.
    Conventional,
    /// The greedy selection run by the secure protocol.
    Greedy,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::Conventional => "conventional",
            Model::Greedy => "greedy",
        })
    }
}

/// Distribution of a waiting time with a given mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDistribution {
    #[default]
    Exponential,
    /// Always exactly the mean.
    Fixed,
}

/// Days a match run takes, as a function of the pool size. Results are
/// applied once the run finishes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RuntimeModel {
    #[default]
    Instant,
    /// Piecewise-linear interpolation through `(pool size, days)` points,
    /// constant beyond the ends.
    Table { points: Vec<(usize, f64)> },
}

impl RuntimeModel {
    pub fn days(&self, pool: usize) -> f64 {
        match self {
            RuntimeModel::Instant => 0.0,
            RuntimeModel::Table { points } => {
                let Some(first) = points.first() else {
                    return 0.0;
                };
                if pool <= first.0 {
                    return first.1;
                }
                for w in points.windows(2) {
                    let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                    if pool <= x1 {
                        let t = (pool - x0) as f64 / (x1 - x0).max(1) as f64;
                        return y0 + t * (y1 - y0);
                    }
                }
                points.last().map(|p| p.1).unwrap_or(0.0)
            }
        }
    }
}

/// Parameters of one simulated platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Mean days between arrivals; infinite for none.
    pub arrival_rate_days: f64,
    pub match_run_interval_days: f64,
    /// Mean days a pair stays registered before leaving unmatched.
    pub departure_rate_days: f64,
    /// Percent chance that a pair refuses an offered match.
    pub match_refusal_pct: f64,
    pub crossmatch_fail_high: f64,
    pub crossmatch_fail_other: f64,
    /// cpra at or above which a patient counts as highly sensitized.
    pub sensitized_cpra: u8,
    pub reentry_fail_days: f64,
    pub reentry_refusal_days: f64,
    pub horizon_days: f64,
    pub repetitions: usize,
    pub kappa: usize,
    pub seed: u64,
    pub interarrival: TimeDistribution,
    pub residence: TimeDistribution,
    pub runtime: RuntimeModel,
    /// Reject rates and intervals outside the standard value sets.
    pub strict_domains: bool,
    pub population: PopulationModel,
    pub policy: PrioPolicy,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            arrival_rate_days: 1.0,
            match_run_interval_days: 7.0,
            departure_rate_days: 400.0,
            match_refusal_pct: 20.0,
            crossmatch_fail_high: 0.35,
            crossmatch_fail_other: 0.10,
            sensitized_cpra: 80,
            reentry_fail_days: 7.0,
            reentry_refusal_days: 2.0,
            horizon_days: 1825.0,
            repetitions: 50,
            kappa: 3,
            seed: 0,
            interarrival: TimeDistribution::Exponential,
            residence: TimeDistribution::Exponential,
            runtime: RuntimeModel::Instant,
            strict_domains: true,
            population: PopulationModel::default(),
            policy: PrioPolicy::default(),
        }
    }
}

fn on_grid(name: &'static str, value: f64, allowed: &[f64]) -> Result<(), ConfigError> {
    if allowed.contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::OffGrid {
            name,
            value,
            allowed: allowed.to_vec(),
        })
    }
}

fn invalid(name: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        name,
        msg: msg.into(),
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.strict_domains {
            on_grid("arrival_rate_days", self.arrival_rate_days, &ARRIVAL_RATES)?;
            on_grid(
                "match_run_interval_days",
                self.match_run_interval_days,
                &MATCH_RUN_INTERVALS,
            )?;
            on_grid("departure_rate_days", self.departure_rate_days, &DEPARTURE_RATES)?;
            on_grid("match_refusal_pct", self.match_refusal_pct, &REFUSAL_PCTS)?;
        }
        let positive = |name, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("arrival_rate_days", self.arrival_rate_days)?;
        positive("match_run_interval_days", self.match_run_interval_days)?;
        positive("departure_rate_days", self.departure_rate_days)?;
        if !(0.0..=100.0).contains(&self.match_refusal_pct) {
            return Err(invalid("match_refusal_pct", "must lie in [0, 100]"));
        }
        for (name, p) in [
            ("crossmatch_fail_high", self.crossmatch_fail_high),
            ("crossmatch_fail_other", self.crossmatch_fail_other),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(name, "must lie in [0, 1]"));
            }
        }
        for (name, d) in [
            ("reentry_fail_days", self.reentry_fail_days),
            ("reentry_refusal_days", self.reentry_refusal_days),
            ("horizon_days", self.horizon_days),
        ] {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(invalid(name, "must be finite and non-negative"));
            }
        }
        if self.kappa != 2 && self.kappa != 3 {
            return Err(invalid("kappa", "must be 2 or 3"));
        }
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "must be at least 1"));
        }
        self.population
            .check()
            .map_err(|e| invalid("population", e.to_string()))?;
        self.policy
            .check(kepap::compat::DEFAULT_W_MAX)
            .map_err(|e| invalid("policy", e.to_string()))?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let c: SimConfig = toml::from_str(text).map_err(|e| invalid("config", e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// A grid of arrival rates and match-run intervals over a base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub arrival_rates: Vec<f64>,
    pub match_run_intervals: Vec<f64>,
    pub base: SimConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            arrival_rates: ARRIVAL_RATES.to_vec(),
            match_run_intervals: MATCH_RUN_INTERVALS.to_vec(),
            base: SimConfig::default(),
        }
    }
}

impl GridConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let g: GridConfig = toml::from_str(text).map_err(|e| invalid("config", e.to_string()))?;
        for cell in g.cells() {
            cell.validate()?;
        }
        if g.arrival_rates.is_empty() || g.match_run_intervals.is_empty() {
            return Err(invalid("grid", "needs at least one rate and one interval"));
        }
        Ok(g)
    }

    /// One config per (arrival rate, interval), rates outermost.
    pub fn cells(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &a in &self.arrival_rates {
            for &i in &self.match_run_intervals {
                out.push(SimConfig {
                    arrival_rate_days: a,
                    match_run_interval_days: i,
                    ..self.base.clone()
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_on_grid() {
        SimConfig::default().validate().unwrap();
        assert_eq!(GridConfig::default().cells().len(), 40);
    }

    #[test]
    fn off_grid_values_need_relaxed_domains() {
        let mut c = SimConfig {
            match_run_interval_days: 3.0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(ConfigError::OffGrid { .. })));
        c.strict_domains = false;
        c.validate().unwrap();
        c.kappa = 4;
        assert!(c.validate().is_err());
    }

    #[test]
    fn runtime_table_interpolates() {
        let r = RuntimeModel::Table {
            points: vec![(10, 1.0), (20, 3.0)],
        };
        assert_eq!(r.days(5), 1.0);
        assert_eq!(r.days(15), 2.0);
        assert_eq!(r.days(50), 3.0);
        assert_eq!(RuntimeModel::Instant.days(100), 0.0);
    }

    #[test]
    fn parses_toml_with_table_names() {
        let c = SimConfig::parse(
            "arrival_rate_days = 4.0\nmatch_run_interval_days = 30.0\nrepetitions = 3\n",
        )
        .unwrap();
        assert_eq!(c.arrival_rate_days, 4.0);
        assert_eq!(c.departure_rate_days, 400.0);
        assert!(SimConfig::parse("arrival_rate_days = 3.0\n").is_err());
        assert!(SimConfig::parse("unknown = 1\n").is_err());
    }
}
