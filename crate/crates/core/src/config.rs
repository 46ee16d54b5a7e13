//! Experiment configuration: a TOML document describing one run.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bath::{correlation_expansion, BathExpansion, CouplingChannel, SpectralDensity};
use crate::dmd::AmplitudeMethod;
use crate::error::{Error, Result};
use crate::kernels::ProjectorKind;
use crate::numerics::RankPolicy;
use crate::propagator::{EtHamiltonian, DEFAULT_ENTRY_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Kernels,
    FloquetKernels,
    Population,
    Gme,
    DmdFit,
    Compare,
}

impl Experiment {
    fn needs_physics(&self) -> bool {
        !matches!(self, Experiment::DmdFit | Experiment::Compare)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemMode {
    Explicit,
    EtParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub mode: SystemMode,
    /// Real part of an explicit `H_S`, rows in the (D, A) basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_re: Option<[[f64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_im: Option<[[f64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Mean bridge coupling; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_VBAR: f64 = 1.0;
pub const DEFAULT_MATSUBARA: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Drude,
    Brownian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub density: DensityKind,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    pub coupling: CouplingChannel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_matsubara: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    pub depth: usize,
    /// Repeat the kernel extraction at `depth + 2` and report the deviation.
    pub check_depth: bool,
    /// Length of the leading kernel window compared by the depth check; whole window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_t_end: Option<f64>,
    pub entry_cap: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            depth: 6,
            check_depth: true,
            check_t_end: None,
            entry_cap: DEFAULT_ENTRY_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dt: f64,
    pub t_end: f64,
    /// End of the snapshot window `[0, t_snap)`.
    pub t_snap: f64,
    pub snapshots: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 6.0,
            t_snap: 1.5,
            snapshots: 150,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmdConfig {
    pub rank: RankPolicy,
    pub delay: usize,
    pub amp_method: AmplitudeMethod,
}

impl Default for DmdConfig {
    fn default() -> Self {
        Self {
            rank: RankPolicy::default(),
            delay: 25,
            amp_method: AmplitudeMethod::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloquetConfig {
    pub n_max: usize,
    pub n_phase: usize,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        Self { n_max: 3, n_phase: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub projector: ProjectorKind,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            projector: ProjectorKind::Population,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Series to fit (`dmd_fit`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<PathBuf>,
    /// Files to compare (`compare`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub baths: Vec<BathConfig>,
    #[serde(default)]
    pub hierarchy: HierarchyConfig,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub kernels: KernelConfig,
    #[serde(default)]
    pub dmd: DmdConfig,
    #[serde(default)]
    pub floquet: FloquetConfig,
    #[serde(default)]
    pub inputs: InputConfig,
    pub output: OutputConfig,
    /// Implicit values filled in during loading, by field path.
    #[serde(skip)]
    pub defaults_applied: Vec<(String, f64)>,
}

fn positive(errs: &mut Vec<String>, field: &str, v: Option<f64>) {
    match v {
        None => errs.push(format!("{field}: required")),
        Some(x) if !(x > 0.0 && x.is_finite()) => errs.push(format!("{field}: must be positive and finite (got {x})")),
        _ => {}
    }
}

fn finite(errs: &mut Vec<String>, field: &str, v: Option<f64>, required: bool) {
    match v {
        None if required => errs.push(format!("{field}: required")),
        Some(x) if !x.is_finite() => errs.push(format!("{field}: must be finite (got {x})")),
        _ => {}
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
        cfg.validate()?;
        cfg.fill_defaults();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Writes every defaulted optional field explicitly, so the echo re-runs identically.
    fn fill_defaults(&mut self) {
        let mut applied = Vec::new();
        if let Some(sys) = &mut self.system {
            if sys.mode == SystemMode::EtParams {
                if sys.vbar.is_none() {
                    applied.push(("system.vbar".to_string(), DEFAULT_VBAR));
                }
                sys.vbar.get_or_insert(DEFAULT_VBAR);
                sys.eps.get_or_insert(0.0);
                sys.omega.get_or_insert(0.0);
            }
        }
        for (i, b) in self.baths.iter_mut().enumerate() {
            if b.beta.is_none() {
                applied.push((format!("baths[{i}].beta"), DEFAULT_BETA));
            }
            if b.n_matsubara.is_none() {
                applied.push((format!("baths[{i}].n_matsubara"), DEFAULT_MATSUBARA as f64));
            }
            b.beta.get_or_insert(DEFAULT_BETA);
            b.n_matsubara.get_or_insert(DEFAULT_MATSUBARA);
        }
        self.defaults_applied = applied;
    }

    /// Every violation at once, each prefixed with its field path.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let g = &self.grids;
        if !(g.dt > 0.0 && g.dt.is_finite()) {
            errs.push(format!("grids.dt: must be positive (got {})", g.dt));
        }
        if !(g.t_end > 0.0 && g.t_end.is_finite()) {
            errs.push(format!("grids.t_end: must be positive (got {})", g.t_end));
        }
        if !(g.t_snap > 0.0) {
            errs.push(format!("grids.t_snap: must be positive (got {})", g.t_snap));
        }
        if g.t_snap > g.t_end {
            errs.push(format!("grids.t_snap: {} exceeds grids.t_end = {}", g.t_snap, g.t_end));
        }
        if g.snapshots < 2 {
            errs.push(format!("grids.snapshots: need at least 2 (got {})", g.snapshots));
        } else if g.dt > 0.0 && (g.snapshots as f64 * g.dt - g.t_snap).abs() > 0.5 * g.dt {
            errs.push(format!(
                "grids.snapshots: {} samples at dt = {} span {}, not grids.t_snap = {}",
                g.snapshots,
                g.dt,
                g.snapshots as f64 * g.dt,
                g.t_snap
            ));
        }
        if let Err(e) = self.dmd.rank.validate() {
            errs.push(format!("dmd.rank: {e}"));
        }
        if self.dmd.delay == 0 {
            errs.push("dmd.delay: must be >= 1".into());
        } else if g.snapshots < self.dmd.delay + 2 {
            errs.push(format!(
                "dmd.delay: {} leaves fewer than 2 embedded snapshots from {}",
                self.dmd.delay, g.snapshots
            ));
        }
        if self.hierarchy.depth == 0 {
            errs.push("hierarchy.depth: must be >= 1".into());
        }
        if let Some(c) = self.hierarchy.check_t_end {
            if !(c > 0.0 && c <= g.t_end) {
                errs.push(format!("hierarchy.check_t_end: must lie in (0, grids.t_end] (got {c})"));
            }
        }

        if self.experiment.needs_physics() {
            self.validate_physics(&mut errs);
        }
        match self.experiment {
            Experiment::FloquetKernels => {
                let f = &self.floquet;
                if f.n_phase < 2 * f.n_max + 1 {
                    errs.push(format!(
                        "floquet.n_phase: {} cannot resolve harmonics up to floquet.n_max = {} (need >= {})",
                        f.n_phase,
                        f.n_max,
                        2 * f.n_max + 1
                    ));
                }
                let driven = self.system.as_ref().is_some_and(|s| {
                    s.mode == SystemMode::EtParams && s.eps.unwrap_or(0.0) != 0.0 && s.omega.unwrap_or(0.0) > 0.0
                });
                if !driven {
                    errs.push("system: floquet_kernels needs mode = \"et_params\" with eps != 0 and omega > 0".into());
                }
            }
            Experiment::Kernels | Experiment::Population | Experiment::Gme => {
                if let Some(s) = &self.system {
                    if s.mode == SystemMode::EtParams && s.eps.unwrap_or(0.0) != 0.0 {
                        errs.push("system.eps: driven systems need experiment = \"floquet_kernels\"".into());
                    }
                }
            }
            Experiment::DmdFit => {
                if self.inputs.series.is_none() {
                    errs.push("inputs.series: required for dmd_fit".into());
                }
            }
            Experiment::Compare => {
                if self.inputs.a.is_none() {
                    errs.push("inputs.a: required for compare".into());
                }
                if self.inputs.b.is_none() {
                    errs.push("inputs.b: required for compare".into());
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn validate_physics(&self, errs: &mut Vec<String>) {
        match &self.system {
            None => errs.push("system: required".into()),
            Some(s) => match s.mode {
                SystemMode::Explicit => {
                    if s.h_re.is_none() {
                        errs.push("system.h_re: required for mode = \"explicit\"".into());
                    }
                    for f in ["e0", "lambda", "vbar", "eps", "omega"] {
                        let set = match f {
                            "e0" => s.e0.is_some(),
                            "lambda" => s.lambda.is_some(),
                            "vbar" => s.vbar.is_some(),
                            "eps" => s.eps.is_some(),
                            _ => s.omega.is_some(),
                        };
                        if set {
                            errs.push(format!("system.{f}: only valid for mode = \"et_params\""));
                        }
                    }
                    if s.h_re.is_some() {
                        if let Err(e) = EtHamiltonian::explicit(explicit_block(s)) {
                            errs.push(format!("system.h_re: {e}"));
                        }
                    }
                }
                SystemMode::EtParams => {
                    finite(errs, "system.e0", s.e0, true);
                    finite(errs, "system.lambda", s.lambda, true);
                    finite(errs, "system.vbar", s.vbar, false);
                    finite(errs, "system.eps", s.eps, false);
                    if s.h_re.is_some() || s.h_im.is_some() {
                        errs.push("system.h_re: only valid for mode = \"explicit\"".into());
                    }
                    if s.eps.unwrap_or(0.0) != 0.0 {
                        positive(errs, "system.omega", s.omega);
                    }
                }
            },
        }
        if self.baths.is_empty() {
            errs.push("baths: at least one bath is required".into());
        }
        for (i, b) in self.baths.iter().enumerate() {
            let p = format!("baths[{i}]");
            positive(errs, &format!("{p}.lambda"), Some(b.lambda));
            match b.density {
                DensityKind::Drude => {
                    positive(errs, &format!("{p}.gamma"), b.gamma);
                    for (f, v) in [("omega0", b.omega0), ("zeta", b.zeta)] {
                        if v.is_some() {
                            errs.push(format!("{p}.{f}: only valid for density = \"brownian\""));
                        }
                    }
                }
                DensityKind::Brownian => {
                    positive(errs, &format!("{p}.omega0"), b.omega0);
                    positive(errs, &format!("{p}.zeta"), b.zeta);
                    if b.gamma.is_some() {
                        errs.push(format!("{p}.gamma: only valid for density = \"drude\""));
                    }
                    if let (Some(w), Some(z)) = (b.omega0, b.zeta) {
                        if z >= 2.0 * w {
                            errs.push(format!("{p}.zeta: overdamped (zeta >= 2 omega0) is not supported"));
                        }
                    }
                }
            }
            if let Some(beta) = b.beta {
                if !(beta > 0.0 && beta.is_finite()) {
                    errs.push(format!("{p}.beta: must be positive (got {beta})"));
                }
            }
        }
    }

    /// The system Hamiltonian (after validation).
    pub fn hamiltonian(&self) -> Result<EtHamiltonian> {
        let s = self.system.as_ref().ok_or_else(|| Error::Config(vec!["system: required".into()]))?;
        let h = match s.mode {
            SystemMode::Explicit => EtHamiltonian::Explicit { h: explicit_block(s) },
            SystemMode::EtParams => EtHamiltonian::EtParams {
                e0: s.e0.unwrap_or(0.0),
                lambda: s.lambda.unwrap_or(0.0),
                vbar: s.vbar.unwrap_or(DEFAULT_VBAR),
                eps: s.eps.unwrap_or(0.0),
                omega: s.omega.unwrap_or(0.0),
            },
        };
        h.validate()?;
        Ok(h)
    }

    pub fn spectral_density(b: &BathConfig) -> SpectralDensity {
        match b.density {
            DensityKind::Drude => SpectralDensity::Drude {
                lambda: b.lambda,
                gamma: b.gamma.unwrap_or(0.0),
            },
            DensityKind::Brownian => SpectralDensity::Brownian {
                lambda: b.lambda,
                omega0: b.omega0.unwrap_or(0.0),
                zeta: b.zeta.unwrap_or(0.0),
            },
        }
    }

    pub fn expansions(&self) -> Result<Vec<BathExpansion>> {
        self.baths
            .iter()
            .map(|b| {
                correlation_expansion(
                    Self::spectral_density(b),
                    b.beta.unwrap_or(DEFAULT_BETA),
                    b.n_matsubara.unwrap_or(DEFAULT_MATSUBARA),
                    b.coupling,
                )
            })
            .collect()
    }
}

fn explicit_block(s: &SystemConfig) -> [C64; 4] {
    let re = s.h_re.unwrap_or([[0.0; 2]; 2]);
    let im = s.h_im.unwrap_or([[0.0; 2]; 2]);
    [
        C64::new(re[0][0], im[0][0]),
        C64::new(re[0][1], im[0][1]),
        C64::new(re[1][0], im[1][0]),
        C64::new(re[1][1], im[1][1]),
    ]
}
