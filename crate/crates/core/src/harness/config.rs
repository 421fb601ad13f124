//! TOML run configuration.
//!
//! ```toml
//! [scenario]
//! n_tx = 4
//! m_ris = 16
//! k_users = 3
//! p_dbm = 30.0
//!
//! [hi]
//! kappa_t = 0.01
//! kappa_r = 0.01
//! phase_noise = "uniform"
//!
//! [algo]
//! name = "bcd-mm"
//! trials = 50
//! seed = 1
//!
//! [sweep]
//! key = "m_ris"
//! values = [8, 16, 32]
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scenario::{dbm_to_watts, noise_power_watts, PhaseNoise, Point, SystemConfig, UserPlacement};

use super::experiment::{Algorithm, ExperimentSpec, Quantization, Sweep};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub hi: HiSection,
    #[serde(default)]
    pub algo: AlgoSection,
    #[serde(default)]
    pub ccp: CcpSection,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub n_tx: Option<usize>,
    pub m_ris: Option<usize>,
    pub k_users: Option<usize>,
    pub p_dbm: Option<f64>,
    pub noise_dbm_hz: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub rician_k: Option<f64>,
    pub bs: Option<Point>,
    pub ris: Option<Point>,
    pub eve: Option<Point>,
    pub user_center: Option<Point>,
    pub user_side: Option<f64>,
    /// Fixed user positions; when set, users are not redrawn per trial.
    pub user_positions: Option<Vec<Point>>,
    pub pathloss_bs_ris: Option<f64>,
    pub pathloss_ris_user: Option<f64>,
    pub pathloss_ris_eve: Option<f64>,
    pub pathloss_bs_user: Option<f64>,
    pub pathloss_bs_eve: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiSection {
    pub kappa_t: Option<f64>,
    pub kappa_r: Option<f64>,
    /// `"uniform"` or `"absent"`.
    pub phase_noise: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoSection {
    pub name: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub zeta_init: Option<f64>,
    pub zeta_growth: Option<f64>,
    pub zeta_max: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iter: Option<usize>,
    pub quantization_bits: Option<u32>,
    pub refit_after_quantization: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcpSection {
    pub lambda_init: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda_max: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub t_max: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub key: String,
    pub values: Vec<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parameter(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parameter(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))
    }

    /// System configuration with defaults for unset keys.
    pub fn system_config(&self) -> Result<SystemConfig> {
        let mut c = SystemConfig::default();
        let s = &self.scenario;
        set(&mut c.n_tx, s.n_tx);
        set(&mut c.m_ris, s.m_ris);
        if let Some(k) = s.k_users {
            c.k_users = k;
            c.weights = vec![1.0; k];
        }
        if let Some(p) = s.p_dbm {
            c.p_max = dbm_to_watts(p);
        }
        if s.noise_dbm_hz.is_some() || s.bandwidth_hz.is_some() {
            let n = noise_power_watts(s.noise_dbm_hz.unwrap_or(-174.0), s.bandwidth_hz.unwrap_or(10e6));
            c.noise_user = n;
            c.noise_eve = n;
        }
        if let Some(w) = &s.weights {
            c.weights = w.clone();
        }
        set(&mut c.rician_k, s.rician_k);
        set(&mut c.geometry.bs, s.bs);
        set(&mut c.geometry.ris, s.ris);
        set(&mut c.geometry.eve, s.eve);
        if let UserPlacement::Square { center, side } = &mut c.geometry.users {
            set(center, s.user_center);
            set(side, s.user_side);
        }
        if let Some(p) = &s.user_positions {
            c.geometry.users = UserPlacement::Fixed(p.clone());
        }
        set(&mut c.pathloss.bs_ris, s.pathloss_bs_ris);
        set(&mut c.pathloss.ris_user, s.pathloss_ris_user);
        set(&mut c.pathloss.ris_eve, s.pathloss_ris_eve);
        set(&mut c.pathloss.bs_user, s.pathloss_bs_user);
        set(&mut c.pathloss.bs_eve, s.pathloss_bs_eve);

        set(&mut c.kappa_t, self.hi.kappa_t);
        set(&mut c.kappa_r, self.hi.kappa_r);
        if let Some(pn) = &self.hi.phase_noise {
            c.phase_noise = match pn.as_str() {
                "uniform" => PhaseNoise::Uniform,
                "absent" => PhaseNoise::Absent,
                other => return Err(Error::Parameter(format!("unknown phase_noise {other:?}"))),
            };
        }

        let a = &self.algo;
        set(&mut c.mm.zeta_init, a.zeta_init);
        set(&mut c.mm.zeta_growth, a.zeta_growth);
        set(&mut c.mm.zeta_max, a.zeta_max);
        set(&mut c.mm.tolerance, a.tolerance);
        set(&mut c.mm.max_iter, a.max_iter);

        let p = &self.ccp;
        set(&mut c.ccp.lambda_init, p.lambda_init);
        set(&mut c.ccp.gamma, p.gamma);
        set(&mut c.ccp.lambda_max, p.lambda_max);
        set(&mut c.ccp.eps1, p.eps1);
        set(&mut c.ccp.eps2, p.eps2);
        set(&mut c.ccp.t_max, p.t_max);
        c.validate()?;
        Ok(c)
    }

    /// Experiment description with defaults for unset keys.
    pub fn experiment_spec(&self, config: &SystemConfig) -> Result<ExperimentSpec> {
        let a = &self.algo;
        let algorithm = match &a.name {
            Some(n) => n.parse::<Algorithm>()?,
            None => Algorithm::BcdMm,
        };
        let sweep = match &self.sweep {
            Some(s) => Sweep {
                key: s.key.clone(),
                values: s.values.clone(),
            },
            None => Sweep::single(config),
        };
        let mut quantization = Quantization::default();
        set(&mut quantization.bits, a.quantization_bits);
        set(&mut quantization.refit, a.refit_after_quantization);
        let spec = ExperimentSpec {
            algorithm,
            sweep,
            trials: a.trials.unwrap_or(1),
            seed_base: a.seed.unwrap_or(0),
            quantization,
        };
        spec.validate(config)?;
        Ok(spec)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
