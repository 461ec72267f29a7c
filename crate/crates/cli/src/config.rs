//! Run configuration read from TOML.
//!
//! ```toml
//! [system]
//! kappa = 0.001
//! gamma_a = 1.0
//! gamma_b = 2.0
//! epsilon_b = 200.0        # or [re, im]
//!
//! [drive]
//! epsilon_a = 5.0
//! t_off = 15.0             # omit to keep the signal on
//!
//! [initial]
//! alpha = 0.0
//! beta = 0.0
//!
//! [ensemble]
//! n_traj = 100000
//! t_final = 30.0
//! dt = 0.001
//! sample_stride = 1000
//! # seed = 7             # default: derived from the config hash
//!
//! [scan]
//! parameter = "epsilon_b"  # epsilon_b | epsilon_a | initial_amplitude
//! start = 60.0
//! stop = 200.0
//! steps = 15
//! ```
//!
//! Optional tables: `[semiclassical]`, `[spectrum]`, `[mcwf]`, `[kappa]`, `[output]`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tdc_core::mcwf::{FockConfig, McwfInitial};
use tdc_core::positivep::DEFAULT_RATIO_THRESHOLD;
use tdc_core::{DriveSchedule, EnsembleConfig, InitialDistribution, PhaseSpacePoint, SystemParams};

/// Largest seed a TOML integer can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// Complex numbers as a bare real or a `[re, im]` pair; always written as a pair.
pub mod complex_value {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Real(x) => Complex64::new(x, 0.0),
            Repr::Pair([re, im]) => Complex64::new(re, im),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub kappa: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    #[serde(with = "complex_value")]
    pub epsilon_b: Complex64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            kappa: 0.001,
            gamma_a: 1.0,
            gamma_b: 2.0,
            epsilon_b: Complex64::new(200.0, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    #[serde(with = "complex_value")]
    pub epsilon_a: Complex64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_off: Option<f64>,
}

/// Starting point of every phase-space trajectory; `alpha+ = alpha*`, `beta+ = beta*`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    #[serde(with = "complex_value")]
    pub alpha: Complex64,
    #[serde(with = "complex_value")]
    pub beta: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_traj: u64,
    pub t_final: f64,
    pub dt: f64,
    pub sample_stride: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence_bound: Option<f64>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let d = EnsembleConfig::default();
        Self {
            n_traj: d.n_traj,
            t_final: d.t_final,
            dt: d.dt,
            sample_stride: d.sample_stride,
            seed: None,
            divergence_bound: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemiclassicalSection {
    /// Also write the mean-field trajectory next to the ensemble output.
    pub trace: bool,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for SemiclassicalSection {
    fn default() -> Self {
        Self {
            trace: false,
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub omega_max: f64,
    pub points: usize,
    /// Trajectories used to decide whether a non-trivial fixed point lies
    /// in the transition region.
    pub validity_trajectories: u64,
    pub validity_time: f64,
    pub ratio_threshold: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            omega_max: 20.0,
            points: 400,
            validity_trajectories: 1000,
            validity_time: 10.0,
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McwfSection {
    #[serde(flatten)]
    pub fock: FockConfig,
    pub t_final: f64,
    pub initial: McwfInitial,
    /// High-mode loss used on the wave-function side only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_b_override: Option<f64>,
}

impl Default for McwfSection {
    fn default() -> Self {
        Self {
            fock: FockConfig::default(),
            t_final: 5.0,
            initial: McwfInitial::Vacuum,
            gamma_b_override: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaSection {
    pub chi3: f64,
    pub omega_a: f64,
    pub eps_a_rel: f64,
    pub eps_b_rel: f64,
    pub length: f64,
    /// Modal overlap in 1/m^2; required unless `profile` is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Mode-profile file, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<PathBuf>,
    pub m_a: u64,
    pub m_b: u64,
    /// Physical low-mode loss rate in 1/s, for the `kappa / gamma_a` ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_a_si: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    EpsilonB,
    EpsilonA,
    InitialAmplitude,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub parameter: ScanParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl ScanSection {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|k| self.start + (self.stop - self.start) * k as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub drive: DriveSection,
    pub initial: InitialSection,
    pub ensemble: EnsembleSection,
    pub semiclassical: SemiclassicalSection,
    pub spectrum: SpectrumSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcwf: Option<McwfSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing run configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        if let (Some(k), Some(dir)) = (cfg.kappa.as_mut(), path.parent()) {
            if let Some(p) = k.profile.as_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing run configuration")
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.schedule().validate()?;
        self.ensemble_config(0).validate()?;
        if let Some(m) = &self.mcwf {
            m.fock.validate()?;
            if !(m.t_final > 0.0) {
                bail!("mcwf.t_final must be positive");
            }
        }
        if self.ensemble.seed.is_some_and(|s| s > MAX_SEED) {
            bail!("ensemble.seed must be below 2^63");
        }
        if let Some(s) = &self.scan {
            if s.steps == 0 || !s.start.is_finite() || !s.stop.is_finite() {
                bail!("scan needs finite bounds and at least one step");
            }
        }
        if let Some(k) = &self.kappa {
            if k.sigma.is_none() && k.profile.is_none() {
                bail!("kappa needs either sigma or a mode profile");
            }
        }
        let sp = &self.spectrum;
        if !(sp.omega_max > 1.0) || sp.points < 4 {
            bail!("spectrum grid needs omega_max > 1 and at least 4 points");
        }
        Ok(())
    }

    /// System parameters. `kappa = 0` is accepted for uncoupled reference
    /// runs; commands that need a nonlinearity reject it themselves.
    pub fn params(&self) -> Result<SystemParams> {
        let s = &self.system;
        if s.kappa == 0.0 {
            SystemParams::new(1.0, s.gamma_a, s.gamma_b, s.epsilon_b)?;
            return Ok(SystemParams {
                kappa: 0.0,
                gamma_a: s.gamma_a,
                gamma_b: s.gamma_b,
                epsilon_b: s.epsilon_b,
            });
        }
        Ok(SystemParams::new(s.kappa, s.gamma_a, s.gamma_b, s.epsilon_b)?)
    }

    pub fn schedule(&self) -> DriveSchedule {
        DriveSchedule {
            epsilon_a: self.drive.epsilon_a,
            t_off: self.drive.t_off,
        }
    }

    pub fn initial_distribution(&self) -> InitialDistribution {
        InitialDistribution::Delta(PhaseSpacePoint::coherent(self.initial.alpha, self.initial.beta))
    }

    /// Seed given in the config, or one derived from the hash of the
    /// config with the seed field cleared.
    pub fn master_seed(&self) -> Result<u64> {
        if let Some(s) = self.ensemble.seed {
            return Ok(s);
        }
        let mut unseeded = self.clone();
        unseeded.ensemble.seed = None;
        if let Some(m) = unseeded.mcwf.as_mut() {
            m.fock.master_seed = 0;
        }
        let digest = Sha256::digest(unseeded.to_toml()?.as_bytes());
        Ok(u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes")) & MAX_SEED)
    }

    pub fn ensemble_config(&self, master_seed: u64) -> EnsembleConfig {
        let e = &self.ensemble;
        EnsembleConfig {
            n_traj: e.n_traj,
            t_final: e.t_final,
            dt: e.dt,
            sample_stride: e.sample_stride,
            master_seed,
            divergence_bound: e.divergence_bound,
        }
    }

    /// Raises ensemble sizes to the full-scale runs.
    pub fn apply_full_scale(&mut self) {
        self.ensemble.n_traj = 1_000_000;
    }
}
