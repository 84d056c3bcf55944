//! Flat TOML run configuration: top-level `key = value` pairs only.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vskimg_core::dataio::{channels_from_widths, geometric_radii, sample_circles, EnergyChannel, Phantom};
use vskimg_core::freq_domain::{build_mask, DomainShape, FrequencyDomain, Grid, Taper, WindowConfig};
use vskimg_core::kernels::{KernelConfig, KernelFamily};
use vskimg_core::landweber::{LandweberConfig, StopTolerance};
use vskimg_core::parametric::{NoiseSpec, ParametricModel};
use vskimg_core::vsk_interp::NodeSet;
use vskimg_core::ImageFormat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Grid size `N` (even).
    pub grid_size: usize,
    /// Outer circle radius divided by the grid half-width `U`.
    pub fill: f64,
    /// `annuli` (rings around each circle) or `disk`.
    pub domain: String,
    /// Disk radius; defaults to the outer circle radius.
    pub domain_radius: Option<f64>,
    /// Half width of each ring for `annuli`.
    pub ring_half_width: f64,

    pub circle_counts: Vec<usize>,
    pub inner_radius: f64,
    pub outer_radius: f64,

    /// `gaussian`, `inverse_multiquadric` or `matern_c2`.
    pub kernel: String,
    pub gamma: f64,

    pub tau: f64,
    /// Relative stopping tolerance, used when `delta` is absent.
    pub delta_rel: f64,
    /// Absolute stopping tolerance.
    pub delta: Option<f64>,
    pub k_max: usize,

    /// Upper edge of the first channel in keV.
    pub channel_top: f64,
    /// Channel widths in keV, from high to low energy.
    pub channel_widths: Vec<f64>,

    pub phantom_flux: f64,
    /// `[flux fraction, width px, x px, y px]` per component.
    pub phantom: Vec<[f64; 4]>,

    /// Power-law index of the signal model.
    pub signal_index: f64,
    pub b_max: f64,
    pub quad_points: usize,

    pub seed: u64,
    /// Noise sigma as a fraction of each channel's largest |V|.
    pub noise_sigma: f64,
    pub add_noise: bool,

    /// `png` or `pgm`; CSV is always written.
    pub raster: String,
    /// `truth` or a path to an image CSV.
    pub trigger: Option<String>,
    pub plain_kernel: bool,

    /// Synthetic instances for `diagnose`.
    pub instances: usize,
    /// Outside constant of the window extension, relative to the largest |P| on D.
    pub window_c_rel: f64,
    /// Taper width in grid cells.
    pub window_width_cells: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid_size: 128,
            fill: 0.75,
            domain: "annuli".into(),
            domain_radius: None,
            ring_half_width: 50.0,
            circle_counts: vec![34, 34, 36, 36, 36, 36, 36],
            inner_radius: 100.0,
            outer_radius: 1000.0,
            kernel: "gaussian".into(),
            gamma: 0.02,
            tau: 0.2,
            delta_rel: 1e-3,
            delta: None,
            k_max: 5000,
            channel_top: 28.0,
            channel_widths: vec![3.0, 3.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0],
            phantom_flux: 2e5,
            phantom: vskimg_core::dataio::DEFAULT_PHANTOM_PX
                .iter()
                .map(|&(f, w, c)| [f, w, c[0], c[1]])
                .collect(),
            signal_index: 3.0,
            b_max: 100.0,
            quad_points: 64,
            seed: 1,
            noise_sigma: 0.03,
            add_noise: true,
            raster: "png".into(),
            trigger: None,
            plain_kernel: false,
            instances: 10,
            window_c_rel: 1e-3,
            window_width_cells: 2.0,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub plain_kernel: bool,
    pub trigger: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str::<RunConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = overrides.seed {
            cfg.seed = v;
        }
        if let Some(v) = overrides.tau {
            cfg.tau = v;
        }
        if let Some(v) = overrides.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = overrides.delta {
            cfg.delta = Some(v);
        }
        if overrides.plain_kernel {
            cfg.plain_kernel = true;
        }
        if let Some(t) = &overrides.trigger {
            cfg.trigger = Some(t.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds every sub-configuration once so errors surface before any work.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.domain()?;
        self.nodes()?;
        self.kernel()?;
        self.landweber()?;
        self.channels()?;
        self.phantom()?;
        self.model()?;
        self.noise()?;
        self.raster_format()?;
        self.window()?;
        if self.instances == 0 {
            bail!("instances must be at least 1");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        if !(self.fill > 0.0 && self.fill <= 1.0) {
            bail!("fill must lie in (0, 1], got {}", self.fill);
        }
        Ok(Grid::for_outer_radius(self.grid_size, self.outer_radius, self.fill)?)
    }

    pub fn radii(&self) -> Result<Vec<f64>> {
        if self.circle_counts.len() == 1 {
            return Ok(vec![self.outer_radius]);
        }
        Ok(geometric_radii(
            self.inner_radius,
            self.outer_radius,
            self.circle_counts.len(),
        )?)
    }

    pub fn domain(&self) -> Result<FrequencyDomain> {
        let grid = self.grid()?;
        let shape = match self.domain.as_str() {
            "disk" => DomainShape::Disk {
                radius: self.domain_radius.unwrap_or(self.outer_radius),
            },
            "annuli" => DomainShape::rings_around(&self.radii()?, self.ring_half_width)?,
            other => bail!("unknown domain `{other}` (expected disk or annuli)"),
        };
        Ok(build_mask(shape, grid)?)
    }

    pub fn nodes(&self) -> Result<NodeSet> {
        if self.circle_counts.is_empty() {
            bail!("circle_counts must not be empty");
        }
        Ok(sample_circles(
            self.circle_counts.len(),
            &self.circle_counts,
            &self.radii()?,
        )?)
    }

    pub fn kernel(&self) -> Result<KernelConfig> {
        let family: KernelFamily = self.kernel.parse()?;
        Ok(KernelConfig::new(family, self.gamma)?)
    }

    pub fn landweber(&self) -> Result<LandweberConfig> {
        let tol = match self.delta {
            Some(d) => StopTolerance::Absolute(d),
            None => StopTolerance::Relative(self.delta_rel),
        };
        Ok(LandweberConfig::new(self.tau, tol, self.k_max)?)
    }

    pub fn channels(&self) -> Result<Vec<EnergyChannel>> {
        if self.channel_widths.is_empty() {
            bail!("channel_widths must not be empty");
        }
        Ok(channels_from_widths(self.channel_top, &self.channel_widths)?)
    }

    pub fn phantom(&self) -> Result<Phantom> {
        let spec: Vec<(f64, f64, [f64; 2])> = self.phantom.iter().map(|c| (c[0], c[1], [c[2], c[3]])).collect();
        Ok(Phantom::from_pixel_units(&spec, &self.grid()?, self.phantom_flux)?)
    }

    pub fn model(&self) -> Result<ParametricModel> {
        use std::sync::Arc;
        use vskimg_core::parametric::{ExpCutoff, PowerLawSignal, UNIT_PREFACTOR_DISTANCE};
        if !(self.signal_index > 0.0) {
            bail!("signal_index must be positive");
        }
        Ok(ParametricModel::new(
            Arc::new(PowerLawSignal {
                index: self.signal_index,
            }),
            Arc::new(ExpCutoff { rate: 1.0 }),
            UNIT_PREFACTOR_DISTANCE,
            self.b_max,
            self.quad_points,
        )?)
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            bail!("noise_sigma must be positive, got {}", self.noise_sigma);
        }
        Ok(NoiseSpec {
            relative_sigma: self.noise_sigma,
            seed: self.seed,
            enabled: self.add_noise,
        })
    }

    pub fn raster_format(&self) -> Result<ImageFormat> {
        match self.raster.as_str() {
            "png" => Ok(ImageFormat::Png),
            "pgm" => Ok(ImageFormat::Pgm),
            other => bail!("unknown raster format `{other}` (expected png or pgm)"),
        }
    }

    /// Window extension for the stability report, scaled by `max_abs`.
    pub fn window(&self) -> Result<WindowConfig> {
        self.window_scaled(1.0)
    }

    pub fn window_scaled(&self, max_abs: f64) -> Result<WindowConfig> {
        let grid = self.grid()?;
        let c = (self.window_c_rel * max_abs).max(f64::MIN_POSITIVE);
        Ok(WindowConfig::new(
            c,
            Taper::Gaussian,
            self.window_width_cells * grid.cell_size(),
        )?)
    }

    /// TOML echo for manifests.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Output file for channel `index` (1-based).
pub fn channel_file(dir: &Path, prefix: &str, index: usize, ext: &str) -> PathBuf {
    dir.join(format!("{prefix}_ch{index:02}.{ext}"))
}
