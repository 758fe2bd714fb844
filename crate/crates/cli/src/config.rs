//! Flat TOML experiment configuration.

use std::path::Path;

use anyhow::{Context, Result, anyhow, bail};
use granular_core::collision::{Angular, Intensity, KernelSpec, PairSumOptions, Restitution};
use granular_core::dsmc::{DiagnosticsSchedule, InitialDistribution, SimConfig};
use granular_core::moments::TailClass;
use granular_core::orlicz::YoungFunction;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "GRANULAR_SEED";

const BUNDLED: &[(&str, &str)] = &[
    ("elastic-maxwellian", include_str!("../scenarios/elastic-maxwellian.toml")),
    ("haff-e09", include_str!("../scenarios/haff-e09.toml")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub dim: usize,
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: Option<u64>,

    /// `constant` or `power` (α = c E^k).
    pub intensity: String,
    pub intensity_c: f64,
    pub intensity_k: f64,
    /// `constant`, `visco-elastic`, `energy-dependent` or `sticky`.
    pub restitution: String,
    pub restitution_e: f64,
    pub restitution_c: f64,
    pub restitution_p: f64,
    /// `isotropic` or `linear`.
    pub angular: String,
    pub angular_slope: f64,

    /// `maxwellian`, `uniform-ball`, `two-beam` or `stretched-exponential`.
    pub initial: String,
    pub initial_energy: f64,
    pub initial_radius: f64,
    pub initial_a: f64,
    pub initial_eta: f64,

    pub energy_floor: f64,
    pub refresh_interval: usize,
    pub stop_at_cooling: bool,

    pub record_interval: f64,
    pub dissipation_every: usize,
    pub pair_sum_exact_limit: usize,
    pub pair_sum_subsample: usize,

    pub moment_p_max: f64,
    pub moment_scale: f64,
    pub gamma_scale: f64,

    /// `t-log-t`, `power` or `built` (from the initial histogram).
    pub orlicz_young: String,
    pub orlicz_power: f64,
    pub orlicz_resolution: usize,
    /// Histogram every this many records; `0` disables the Gronwall check.
    pub orlicz_every: usize,
    pub c_k: Option<f64>,
    pub gronwall_band: f64,

    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "custom".into(),
            dim: 3,
            n: 10_000,
            dt: 0.05,
            horizon: 10.0,
            seed: None,
            intensity: "constant".into(),
            intensity_c: 1.0,
            intensity_k: 0.0,
            restitution: "constant".into(),
            restitution_e: 1.0,
            restitution_c: 0.0,
            restitution_p: 1.0,
            angular: "isotropic".into(),
            angular_slope: 0.0,
            initial: "maxwellian".into(),
            initial_energy: 1.0,
            initial_radius: 1.0,
            initial_a: 1.0,
            initial_eta: 1.0,
            energy_floor: 1e-6,
            refresh_interval: 16,
            stop_at_cooling: true,
            record_interval: 0.5,
            dissipation_every: 1,
            pair_sum_exact_limit: 20_000,
            pair_sum_subsample: 200_000,
            moment_p_max: 5.0,
            moment_scale: 1.0,
            gamma_scale: 0.9,
            orlicz_young: "t-log-t".into(),
            orlicz_power: 2.0,
            orlicz_resolution: 64,
            orlicz_every: 0,
            c_k: None,
            gronwall_band: 2.0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let text = bundled(name).ok_or_else(|| {
            anyhow!("unknown scenario {name:?}; bundled: {}", bundled_names().collect::<Vec<_>>().join(", "))
        })?;
        Self::from_toml(text)
    }

    /// CLI flag, then `GRANULAR_SEED`, then the config file, then the default.
    pub fn resolve_seed(&mut self, cli: Option<u64>, env: Option<&str>) -> Result<u64> {
        let env_seed = match env.map(str::trim).filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse::<u64>().with_context(|| format!("{SEED_ENV}={s:?} is not an unsigned integer"))?),
            None => None,
        };
        let seed = cli.or(env_seed).or(self.seed).unwrap_or(DEFAULT_SEED);
        self.seed = Some(seed);
        Ok(seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            bail!("key `n`: need at least 2 particles, got {}", self.n);
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bail!("key `dt`: must be positive, got {}", self.dt);
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            bail!("key `horizon`: must be finite and nonnegative, got {}", self.horizon);
        }
        if !(self.record_interval > 0.0) {
            bail!("key `record_interval`: must be positive");
        }
        if !(self.moment_p_max >= 1.5) {
            bail!("key `moment_p_max`: must be at least 1.5");
        }
        if self.orlicz_resolution == 0 {
            bail!("key `orlicz_resolution`: must be positive");
        }
        self.kernel()?.validate().map_err(|e| anyhow!("kernel: {e}"))?;
        self.initial_distribution()?;
        self.young()?;
        Ok(())
    }

    pub fn kernel(&self) -> Result<KernelSpec<f64>> {
        let intensity = match self.intensity.as_str() {
            "constant" => Intensity::Constant(self.intensity_c),
            "power" => Intensity::Power { c: self.intensity_c, k: self.intensity_k },
            other => bail!("key `intensity`: unknown value {other:?} (constant, power)"),
        };
        let restitution = match self.restitution.as_str() {
            "constant" => Restitution::Constant(self.restitution_e),
            "visco-elastic" => Restitution::ViscoElastic { c: self.restitution_c, p: self.restitution_p },
            "energy-dependent" => Restitution::EnergyDependent { c: self.restitution_c, p: self.restitution_p },
            "sticky" => Restitution::Sticky,
            other => bail!("key `restitution`: unknown value {other:?} (constant, visco-elastic, energy-dependent, sticky)"),
        };
        let angular = match self.angular.as_str() {
            "isotropic" => Angular::Isotropic,
            "linear" => Angular::Linear { slope: self.angular_slope },
            other => bail!("key `angular`: unknown value {other:?} (isotropic, linear)"),
        };
        KernelSpec::new(self.dim, intensity, restitution, angular).map_err(|e| anyhow!("kernel: {e}"))
    }

    pub fn initial_distribution(&self) -> Result<InitialDistribution<f64>> {
        Ok(match self.initial.as_str() {
            "maxwellian" => InitialDistribution::Maxwellian { temperature: 1.0 },
            "uniform-ball" => InitialDistribution::UniformBall { radius: self.initial_radius },
            "two-beam" => {
                let mut w = vec![0.0; self.dim];
                w[0] = 1.0;
                InitialDistribution::TwoBeam { w }
            }
            "stretched-exponential" => InitialDistribution::StretchedExponential { a: self.initial_a, eta: self.initial_eta },
            other => bail!("key `initial`: unknown value {other:?} (maxwellian, uniform-ball, two-beam, stretched-exponential)"),
        })
    }

    /// Tail class of the initial datum, for the cooling classifier.
    pub fn tail(&self) -> TailClass<f64> {
        match self.initial.as_str() {
            "maxwellian" | "uniform-ball" | "two-beam" => TailClass::Gaussian,
            "stretched-exponential" if self.initial_eta <= 2.0 => TailClass::StretchedExponential { eta: self.initial_eta },
            "stretched-exponential" => TailClass::Gaussian,
            _ => TailClass::Unknown,
        }
    }

    pub fn young(&self) -> Result<Option<YoungFunction<f64>>> {
        match self.orlicz_young.as_str() {
            "t-log-t" => Ok(Some(YoungFunction::t_log_t())),
            "power" => Ok(Some(YoungFunction::power(self.orlicz_power).map_err(|e| anyhow!("key `orlicz_power`: {e}"))?)),
            "built" => Ok(None),
            other => bail!("key `orlicz_young`: unknown value {other:?} (t-log-t, power, built)"),
        }
    }

    pub fn sim_config(&self, seed: u64) -> Result<SimConfig<f64>> {
        let mut cfg = SimConfig::new(self.kernel()?, self.dt, self.horizon, seed);
        cfg.energy_floor = self.energy_floor;
        cfg.refresh_interval = self.refresh_interval;
        cfg.stop_at_cooling = self.stop_at_cooling;
        Ok(cfg)
    }

    pub fn pair_sum(&self, seed: u64) -> PairSumOptions {
        PairSumOptions {
            exact_limit: self.pair_sum_exact_limit,
            subsample_pairs: self.pair_sum_subsample,
            seed,
            ..PairSumOptions::default()
        }
    }

    pub fn schedule(&self, seed: u64) -> DiagnosticsSchedule {
        DiagnosticsSchedule {
            record_interval: self.record_interval,
            dissipation_every: self.dissipation_every,
            pair_sum: self.pair_sum(seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        for name in bundled_names() {
            let cfg = ExperimentConfig::bundled(name).unwrap();
            assert_eq!(cfg.scenario, name);
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::from_toml("n = 10\nbogus = 1\n").unwrap_err();
        assert!(format!("{err:#}").contains("bogus"));
    }

    #[test]
    fn seed_precedence() {
        let mut cfg = ExperimentConfig { seed: Some(5), ..Default::default() };
        assert_eq!(cfg.resolve_seed(Some(9), Some("7")).unwrap(), 9);
        cfg.seed = Some(5);
        assert_eq!(cfg.resolve_seed(None, Some("7")).unwrap(), 7);
        cfg.seed = Some(5);
        assert_eq!(cfg.resolve_seed(None, None).unwrap(), 5);
        cfg.seed = None;
        assert_eq!(cfg.resolve_seed(None, Some("")).unwrap(), DEFAULT_SEED);
        assert!(cfg.resolve_seed(None, Some("x")).is_err());
    }

    #[test]
    fn bad_value_names_the_key() {
        let err = ExperimentConfig::from_toml("restitution = \"bouncy\"\n").unwrap_err();
        assert!(format!("{err:#}").contains("restitution"));
    }
}
