//! Experiment configuration, read from TOML.
//!
//! Every key has a default, so an empty file (or no file) is a valid config.
//!
//! ```toml
//! [datum]
//! eps = 0.25
//! p = 5.0
//! amplitude = "paper"   # "paper", "unit" or a number
//!
//! [grid]
//! dims = [64, 64, 64]   # default: smallest grid resolving the datum
//!
//! [run]
//! mode = "oracle"
//! dt = 1e-3
//! t_end = 2.0
//! ```

use crate::error::{Error, Result};
use crate::grid::{VectorSpectralField, WaveGrid};
use crate::initial_data::{build_a0, datum_box, datum_dims, Amplitude, ProfileParams};
use crate::linear_system::ForcingForm;
use crate::rng::FieldRng;
use crate::solver::{Eta, ExperimentInit, Mode, Scheme, SolverConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Environment variable overriding the output root.
pub const OUT_ENV: &str = "MPS_OUT";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datum: DatumSection,
    pub grid: GridSection,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatumSection {
    pub eps: f64,
    pub p: f64,
    pub amplitude: String,
    /// Constant in the exponential factor of the smallness condition.
    pub gronwall_c: f64,
}

impl Default for DatumSection {
    fn default() -> Self {
        Self {
            eps: 0.25,
            p: 5.0,
            amplitude: "paper".into(),
            gronwall_c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dims: Option<[usize; 3]>,
    #[serde(rename = "box")]
    pub lengths: Option<[f64; 3]>,
    pub dealias: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dims: None,
            lengths: None,
            dealias: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: String,
    pub scheme: String,
    pub forcing_form: String,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    /// Threshold as a multiple of the initial monitor norm.
    pub eta_mult: f64,
    /// Absolute threshold; overrides `eta_mult`.
    pub eta: Option<f64>,
    /// Scale of the random perturbation `(v0, c0)`; zero for none.
    pub perturbation_amplitude: f64,
    pub perturbation_max_mode: usize,
    pub seed: u64,
    /// Coarser steps used to calibrate the oracle envelope; empty to skip.
    pub calibration_dts: Vec<f64>,
    pub oracle_margin: f64,
    /// Write the final state as snapshot files.
    pub snapshots: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: "perturbation".into(),
            scheme: Scheme::StrangExactLinear.to_string(),
            forcing_form: "direct".into(),
            dt: 1e-2,
            t_end: 1.0,
            stride: 10,
            eta_mult: 10.0,
            eta: None,
            perturbation_amplitude: 2e-4,
            perturbation_max_mode: 4,
            seed: 1,
            calibration_dts: Vec::new(),
            oracle_margin: 2.0,
            snapshots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    /// Midpoint cells per unit interval in the Fourier-side quadrature.
    pub quadrature_resolution: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            eps: (3..=7).map(|k| 0.5f64.powi(k)).collect(),
            quadrature_resolution: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("mps-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.profile_params()?;
        for &eps in &self.sweep.eps {
            if !(eps > 0.0 && eps <= 0.25) {
                return Err(Error::Config(format!("sweep eps {eps} outside (0, 1/4]")));
            }
        }
        self.mode()?;
        self.solver_config()?;
        if let Some(dims) = self.grid.dims {
            WaveGrid::new(dims, self.box_lengths())?;
        }
        if self.run.calibration_dts.iter().any(|&dt| !(dt > self.run.dt)) {
            return Err(Error::Config("calibration steps must exceed run.dt".into()));
        }
        if !(self.run.perturbation_amplitude >= 0.0 && self.run.perturbation_amplitude.is_finite()) {
            return Err(Error::Config("perturbation_amplitude must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn profile_params(&self) -> Result<ProfileParams> {
        let amplitude: Amplitude = self.datum.amplitude.parse()?;
        let params = ProfileParams::new(self.datum.eps, self.datum.p)?
            .with_amplitude(amplitude)
            .with_gronwall_c(self.datum.gronwall_c);
        params.validate()?;
        Ok(params)
    }

    pub fn mode(&self) -> Result<Mode> {
        self.run.mode.parse()
    }

    pub fn box_lengths(&self) -> [f64; 3] {
        self.grid.lengths.unwrap_or_else(|| datum_box(self.datum.eps))
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid
            .dims
            .unwrap_or_else(|| datum_dims(self.datum.eps, self.grid.dealias))
    }

    pub fn build_grid(&self) -> Result<Arc<WaveGrid>> {
        WaveGrid::new(self.dims(), self.box_lengths())
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let run = &self.run;
        let mut config = SolverConfig::new(run.dt, run.t_end, self.datum.p)?;
        config.scheme = run.scheme.parse::<Scheme>()?;
        config.forcing_form = run.forcing_form.parse::<ForcingForm>()?;
        config.dealias = self.grid.dealias;
        config.stride = run.stride;
        config.eta = match run.eta {
            Some(eta) => Eta::Absolute(eta),
            None => Eta::InitialMultiple(run.eta_mult),
        };
        if !(run.eta_mult > 0.0) || run.eta.is_some_and(|e| !(e > 0.0)) {
            return Err(Error::Config("eta must be positive".into()));
        }
        config.validate()?;
        Ok(config)
    }

    /// Datum plus the seeded random perturbation on `grid`.
    pub fn initial_data(&self, grid: &Arc<WaveGrid>) -> Result<ExperimentInit> {
        let a0 = build_a0(&self.profile_params()?, grid)?;
        let (v0, c0) = seeded_perturbation(
            grid,
            self.run.seed,
            self.run.perturbation_max_mode,
            self.run.perturbation_amplitude,
        );
        ExperimentInit::new(a0, v0, c0)
    }

    /// Output directory: the explicit flag, then `MPS_OUT`, then the config.
    pub fn output_dir(&self, flag: Option<&Path>) -> Result<PathBuf> {
        let dir = match (flag, std::env::var_os(OUT_ENV)) {
            (Some(f), _) => f.to_path_buf(),
            (None, Some(env)) => PathBuf::from(env),
            (None, None) => self.output.dir.clone(),
        };
        std::fs::create_dir_all(&dir).map_err(|e| Error::Config(format!("output dir {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

/// Random solenoidal `v0` and random `c0` with modes `|n_i| <= max_mode`,
/// scaled by `amplitude`. Streams 0 and 1 of the seed.
pub fn seeded_perturbation(
    grid: &Arc<WaveGrid>,
    seed: u64,
    max_mode: usize,
    amplitude: f64,
) -> (VectorSpectralField, VectorSpectralField) {
    if amplitude == 0.0 {
        let z = VectorSpectralField::zeros(grid);
        return (z.clone(), z);
    }
    let v0 = FieldRng::new(seed, 0).solenoidal(grid, max_mode).scale(amplitude);
    let c0 = FieldRng::new(seed, 1).vector(grid, max_mode, true).scale(amplitude);
    (v0, c0)
}
