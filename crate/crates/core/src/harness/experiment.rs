//! Baselines, initialization and the Monte-Carlo runner.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::himodel::EffectiveLinks;
use crate::linalg::{CMat, CVec, C64};
use crate::mm::bcd_mm_with;
use crate::rate::{wmsr, BeamState};
use crate::rng::{Sampler, STREAM_INIT};
use crate::scenario::{dbm_to_watts, generate_channels, ChannelSet, SystemConfig};
use crate::socp::bcd_socp;
use crate::trace::{RunOptions, RunStatus, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    BcdMm,
    BcdSocp,
    NonRobust,
    BcdMmRand,
    BcdMmNoRis,
    BcdMm2Bit,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::BcdMm,
        Algorithm::BcdSocp,
        Algorithm::NonRobust,
        Algorithm::BcdMmRand,
        Algorithm::BcdMmNoRis,
        Algorithm::BcdMm2Bit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::BcdMm => "bcd-mm",
            Algorithm::BcdSocp => "bcd-socp",
            Algorithm::NonRobust => "non-robust",
            Algorithm::BcdMmRand => "bcd-mm-rand",
            Algorithm::BcdMmNoRis => "bcd-mm-no-ris",
            Algorithm::BcdMm2Bit => "bcd-mm-2bit",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::Parameter(format!("unknown algorithm {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Parameter swept across the experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

pub const SWEEP_KEYS: [&str; 8] = ["p_dbm", "m_ris", "n_tx", "k_users", "kappa", "kappa_t", "kappa_r", "rician_k"];

impl Sweep {
    /// One-point sweep at the configured transmit power.
    pub fn single(config: &SystemConfig) -> Self {
        Self {
            key: "p_dbm".into(),
            values: vec![config.p_dbm()],
        }
    }

    /// Parse `key=v1,v2,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let (key, vals) = text
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("sweep {text:?} is not of the form key=v1,v2,...")))?;
        let values = vals
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parameter(format!("sweep value {v:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            key: key.trim().to_string(),
            values,
        })
    }

    /// Configuration with the sweep parameter set to `value`.
    pub fn apply(&self, config: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut c = config.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Parameter(format!("sweep {} needs whole numbers, got {v}", self.key)))
            }
        };
        match self.key.as_str() {
            "p_dbm" => c.p_max = dbm_to_watts(value),
            "m_ris" => c.m_ris = count(value)?,
            "n_tx" => c.n_tx = count(value)?,
            "k_users" => {
                c.k_users = count(value)?;
                if c.weights.len() != c.k_users {
                    c.weights = vec![1.0; c.k_users];
                }
            }
            "kappa" => {
                c.kappa_t = value;
                c.kappa_r = value;
            }
            "kappa_t" => c.kappa_t = value,
            "kappa_r" => c.kappa_r = value,
            "rician_k" => c.rician_k = value,
            other => {
                return Err(Error::Parameter(format!(
                    "unknown sweep key {other:?}; expected one of {}",
                    SWEEP_KEYS.join(", ")
                )))
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Phase quantization used by the discrete-phase baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quantization {
    pub bits: u32,
    /// Re-optimize the precoder after quantizing.
    pub refit: bool,
}

impl Default for Quantization {
    fn default() -> Self {
        Self { bits: 2, refit: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub algorithm: Algorithm,
    pub sweep: Sweep,
    pub trials: usize,
    pub seed_base: u64,
    pub quantization: Quantization,
}

impl ExperimentSpec {
    pub fn new(algorithm: Algorithm, config: &SystemConfig, trials: usize, seed_base: u64) -> Self {
        Self {
            algorithm,
            sweep: Sweep::single(config),
            trials,
            seed_base,
            quantization: Quantization::default(),
        }
    }

    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Parameter("sweep needs at least one value".into()));
        }
        if !(1..=4).contains(&self.quantization.bits) {
            return Err(Error::Parameter(format!(
                "quantization bits must be 1..=4, got {}",
                self.quantization.bits
            )));
        }
        for v in &self.sweep.values {
            self.sweep.apply(config, *v)?;
        }
        Ok(())
    }
}

/// Feasible starting point: precoder columns along each user's mean effective
/// channel, scaled to full power, and reflection phases uniform on the circle.
pub fn initialize_state(config: &SystemConfig, channels: &ChannelSet, seed: u64) -> Result<BeamState> {
    let mut s = Sampler::new(seed, STREAM_INIT);
    let phi = CVec::from_fn(channels.m_ris(), |_, _| s.unit_phase());
    let links = EffectiveLinks::new(&phi, channels, config.phase_noise)?;
    let n = channels.n_tx();
    let k_users = channels.k_users();
    let mut w = CMat::zeros(n, k_users);
    for k in 0..k_users {
        w.set_column(k, &links.users[k].h_hat);
    }
    let norm = w.norm();
    if norm > 0.0 && norm.is_finite() {
        w *= C64::new(config.p_max.sqrt() / norm, 0.0);
    } else {
        w = CMat::from_element(n, k_users, C64::new((config.p_max / (n * k_users) as f64).sqrt(), 0.0));
    }
    Ok(BeamState::new(w, phi))
}

/// Snap every phase to the nearest point of a uniform `2^bits` grid, ties to the smaller angle.
pub fn quantize_phases(phi: &CVec, bits: u32) -> Result<CVec> {
    if !(1..=4).contains(&bits) {
        return Err(Error::Parameter(format!("quantization bits must be 1..=4, got {bits}")));
    }
    crate::himodel::check_unit_modulus(phi)?;
    let levels = 1u32 << bits;
    let step = TAU / levels as f64;
    Ok(phi.map(|z| {
        let mut a = z.arg();
        if a < 0.0 {
            a += TAU;
        }
        let q = a / step;
        let lo = q.floor();
        let idx = if q - lo > 0.5 { lo + 1.0 } else { lo } as u32 % levels;
        C64::from_polar(1.0, idx as f64 * step)
    }))
}

/// Run one algorithm on one realization. The returned state is in the
/// dimensions of `config` (the no-RIS baseline returns an empty reflection vector).
pub fn run_baseline(
    spec: &ExperimentSpec,
    config: &SystemConfig,
    channels: &ChannelSet,
    seed: u64,
) -> Result<(BeamState, RunTrace)> {
    let plain = RunOptions::default();
    match spec.algorithm {
        Algorithm::BcdMm => {
            let init = initialize_state(config, channels, seed)?;
            bcd_mm_with(config, channels, &init, &plain)
        }
        Algorithm::BcdSocp => {
            let init = initialize_state(config, channels, seed)?;
            bcd_socp(config, channels, &init)
        }
        Algorithm::NonRobust => {
            let ideal = config.ideal_hardware();
            let init = initialize_state(&ideal, channels, seed)?;
            let opts = RunOptions {
                freeze_phi: false,
                evaluation: Some(config.clone()),
            };
            bcd_mm_with(&ideal, channels, &init, &opts)
        }
        Algorithm::BcdMmRand => {
            let init = initialize_state(config, channels, seed)?;
            let opts = RunOptions {
                freeze_phi: true,
                evaluation: None,
            };
            bcd_mm_with(config, channels, &init, &opts)
        }
        Algorithm::BcdMmNoRis => {
            let cfg = config.without_ris();
            let ch = channels.without_ris();
            let init = initialize_state(&cfg, &ch, seed)?;
            bcd_mm_with(&cfg, &ch, &init, &plain)
        }
        Algorithm::BcdMm2Bit => {
            let init = initialize_state(config, channels, seed)?;
            let (state, mut trace) = bcd_mm_with(config, channels, &init, &plain)?;
            let quantized = state.with_phi(quantize_phases(state.phi(), spec.quantization.bits)?);
            if !spec.quantization.refit {
                return Ok((quantized, trace));
            }
            let last_zeta = trace.rows.last().and_then(|r| r.zeta).unwrap_or(config.mm.zeta_init);
            let mut refit_cfg = config.clone();
            refit_cfg.mm.zeta_init = last_zeta.powf(config.mm.zeta_growth).min(config.mm.zeta_max);
            refit_cfg.mm.zeta_max = refit_cfg.mm.zeta_max.max(refit_cfg.mm.zeta_init);
            let opts = RunOptions {
                freeze_phi: true,
                evaluation: None,
            };
            let (refit, extra) = bcd_mm_with(&refit_cfg, channels, &quantized, &opts)?;
            let offset = trace.iterations;
            let elapsed = trace.total_ms;
            trace.rows.extend(extra.rows.into_iter().map(|mut r| {
                r.iteration += offset;
                r.wall_ms += elapsed;
                r
            }));
            trace.iterations += extra.iterations;
            trace.total_ms += extra.total_ms;
            trace.warnings.extend(extra.warnings);
            trace.status = extra.status;
            let keep_refit = wmsr(&refit, channels, config)? >= wmsr(&quantized, channels, config)?;
            Ok((if keep_refit { refit } else { quantized }, trace))
        }
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub seed: u64,
    pub trial: usize,
    pub algorithm: Algorithm,
    pub sweep_key: String,
    pub sweep_value: f64,
    pub n_tx: usize,
    pub m_ris: usize,
    pub k_users: usize,
    pub p_dbm: f64,
    pub kappa_t: f64,
    pub kappa_r: f64,
    pub iterations: usize,
    /// Clamped WMSR under the true hardware model; `None` when the trial failed.
    pub final_wmsr: Option<f64>,
    pub wall_ms: f64,
    pub converged: bool,
    pub error: Option<String>,
    pub trace: Option<RunTrace>,
}

/// Mean and standard error of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub count: usize,
    pub failed: usize,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

pub const CSV_HEADER: &str =
    "seed,trial,algorithm,sweep_key,sweep_value,N,M,K,p_dbm,kappa_t,kappa_r,iterations,final_wmsr_nats,wall_ms";

/// Seed of trial `trial`; shared by every sweep value.
pub fn trial_seed(seed_base: u64, trial: usize) -> u64 {
    seed_base.wrapping_add(trial as u64)
}

fn run_trial(spec: &ExperimentSpec, config: &SystemConfig, sweep_value: f64, trial: usize) -> ResultRow {
    let seed = trial_seed(spec.seed_base, trial);
    let start = Instant::now();
    let outcome = (|| -> Result<(f64, RunTrace)> {
        let channels = generate_channels(config, seed)?;
        let (state, trace) = run_baseline(spec, config, &channels, seed)?;
        let eval = if spec.algorithm == Algorithm::BcdMmNoRis {
            wmsr(&state, &channels.without_ris(), &config.without_ris())?
        } else {
            wmsr(&state, &channels, config)?
        };
        Ok((eval, trace))
    })();
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = ResultRow {
        seed,
        trial,
        algorithm: spec.algorithm,
        sweep_key: spec.sweep.key.clone(),
        sweep_value,
        n_tx: config.n_tx,
        m_ris: config.m_ris,
        k_users: config.k_users,
        p_dbm: config.p_dbm(),
        kappa_t: config.kappa_t,
        kappa_r: config.kappa_r,
        iterations: 0,
        final_wmsr: None,
        wall_ms,
        converged: false,
        error: None,
        trace: None,
    };
    match outcome {
        Ok((v, trace)) => {
            row.iterations = trace.iterations;
            row.final_wmsr = Some(v);
            row.converged = trace.status == RunStatus::Converged;
            row.trace = Some(trace);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Run every (sweep value, trial) pair on the current rayon pool.
///
/// Rows are ordered by sweep index, then trial index.
pub fn run_experiment(spec: &ExperimentSpec, config: &SystemConfig) -> Result<ExperimentResult> {
    spec.validate(config)?;
    let configs = spec
        .sweep
        .values
        .iter()
        .map(|v| spec.sweep.apply(config, *v))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|s| (0..spec.trials).map(move |t| (s, t)))
        .collect();
    let rows: Vec<ResultRow> = jobs
        .par_iter()
        .map(|&(s, t)| run_trial(spec, &configs[s], spec.sweep.values[s], t))
        .collect();
    let summary = spec
        .sweep
        .values
        .iter()
        .enumerate()
        .map(|(s, v)| summarize(*v, &rows[s * spec.trials..(s + 1) * spec.trials]))
        .collect();
    Ok(ExperimentResult { rows, summary })
}

fn summarize(sweep_value: f64, rows: &[ResultRow]) -> SummaryRow {
    let vals: Vec<f64> = rows.iter().filter_map(|r| r.final_wmsr).collect();
    let n = vals.len();
    let mean = if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { f64::NAN };
    let std_error = if n > 1 {
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::NAN
    };
    SummaryRow {
        sweep_value,
        count: n,
        failed: rows.len() - n,
        mean,
        std_error,
    }
}

/// Write the result rows. With `timing = false` the time column is written as 0.
pub fn write_results<W: Write>(rows: &[ResultRow], out: W, timing: bool) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.trial.to_string(),
            r.algorithm.name().to_string(),
            r.sweep_key.clone(),
            r.sweep_value.to_string(),
            r.n_tx.to_string(),
            r.m_ris.to_string(),
            r.k_users.to_string(),
            r.p_dbm.to_string(),
            r.kappa_t.to_string(),
            r.kappa_r.to_string(),
            r.iterations.to_string(),
            r.final_wmsr.map(|v| v.to_string()).unwrap_or_default(),
            if timing { r.wall_ms.to_string() } else { "0".into() },
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::himodel::UNIT_MODULUS_TOL;
    use crate::rng::stream;
    use rand::Rng;

    fn small() -> SystemConfig {
        SystemConfig {
            n_tx: 2,
            m_ris: 4,
            k_users: 2,
            weights: vec![1.0; 2],
            ..SystemConfig::default()
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("sdr".parse::<Algorithm>().is_err());
    }

    #[test]
    fn init_is_feasible_and_seeded() {
        let cfg = SystemConfig::default();
        let ch = generate_channels(&cfg, 5).unwrap();
        let a = initialize_state(&cfg, &ch, 5).unwrap();
        assert!((a.power() - cfg.p_max).abs() <= 1e-12 * cfg.p_max);
        assert!(a.phi().iter().all(|z| (z.norm() - 1.0).abs() < UNIT_MODULUS_TOL));
        assert_eq!(a, initialize_state(&cfg, &ch, 5).unwrap());
        assert_ne!(a, initialize_state(&cfg, &ch, 6).unwrap());
    }

    #[test]
    fn init_without_ris_is_mrt() {
        let cfg = SystemConfig {
            m_ris: 0,
            k_users: 1,
            weights: vec![1.0],
            ..SystemConfig::default()
        };
        let ch = generate_channels(&cfg, 9).unwrap();
        let s = initialize_state(&cfg, &ch, 9).unwrap();
        let h = &ch.h_bu[0];
        let expect = h * C64::new(cfg.p_max.sqrt() / h.norm(), 0.0);
        assert!((s.w_mat().column(0) - expect).norm() < 1e-12);
    }

    #[test]
    fn quantization_grid() {
        let q = quantize_phases(&CVec::from_element(1, C64::from_polar(1.0, 0.1)), 2).unwrap();
        assert!((q[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        let grid = CVec::from_fn(4, |i, _| C64::from_polar(1.0, i as f64 * TAU / 4.0));
        assert_eq!(quantize_phases(&grid, 2).unwrap(), grid);
        let tie = CVec::from_element(1, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4));
        let t = quantize_phases(&tie, 2).unwrap();
        assert!(t[0].arg().abs() < 1e-12 || (t[0].arg() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let mut rng = stream(3, 0);
        let phi = CVec::from_fn(10_000, |_, _| C64::from_polar(1.0, rng.gen::<f64>() * TAU));
        let q = quantize_phases(&phi, 2).unwrap();
        for (a, b) in phi.iter().zip(q.iter()) {
            assert!((a / b).arg().abs() <= std::f64::consts::FRAC_PI_4 + 1e-12);
            assert!((b.norm() - 1.0).abs() < 1e-15);
        }
        assert!(quantize_phases(&phi, 0).is_err());
        assert!(quantize_phases(&phi, 5).is_err());
    }

    #[test]
    fn sweep_parsing_and_application() {
        let s = Sweep::parse("m_ris=8,16").unwrap();
        assert_eq!(s.values, vec![8.0, 16.0]);
        assert_eq!(s.apply(&small(), 8.0).unwrap().m_ris, 8);
        assert!(s.apply(&small(), 8.5).is_err());
        assert!(Sweep::parse("m_ris").is_err());
        assert!(Sweep::parse("m_ris=a").is_err());
        let k = Sweep::parse("kappa=0.05").unwrap().apply(&small(), 0.05).unwrap();
        assert_eq!((k.kappa_t, k.kappa_r), (0.05, 0.05));
        assert!(Sweep::parse("bogus=1").unwrap().apply(&small(), 1.0).is_err());
    }

    #[test]
    fn two_bit_output_on_grid() {
        let mut cfg = small();
        cfg.mm.max_iter = 5;
        let spec = ExperimentSpec::new(Algorithm::BcdMm2Bit, &cfg, 1, 0);
        let ch = generate_channels(&cfg, 1).unwrap();
        let (s, _) = run_baseline(&spec, &cfg, &ch, 1).unwrap();
        for z in s.phi().iter() {
            let k = (z.arg().rem_euclid(TAU) / (TAU / 4.0)).round();
            assert!((z - C64::from_polar(1.0, k * TAU / 4.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn no_ris_baseline_matches_plain_run_without_ris() {
        let mut cfg = small();
        cfg.m_ris = 0;
        cfg.mm.max_iter = 10;
        let ch = generate_channels(&cfg, 2).unwrap();
        let a = run_baseline(&ExperimentSpec::new(Algorithm::BcdMmNoRis, &cfg, 1, 0), &cfg, &ch, 2).unwrap();
        let b = run_baseline(&ExperimentSpec::new(Algorithm::BcdMm, &cfg, 1, 0), &cfg, &ch, 2).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn one_trial_one_row() {
        let mut cfg = small();
        cfg.mm.max_iter = 3;
        let spec = ExperimentSpec::new(Algorithm::BcdMm, &cfg, 1, 7);
        let r = run_experiment(&spec, &cfg).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.summary.len(), 1);
        assert!(r.rows[0].final_wmsr.unwrap() >= 0.0);
        let mut buf = Vec::new();
        write_results(&r.rows, &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 2);
    }
}
