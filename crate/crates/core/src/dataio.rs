//! Visibility sets, synthetic Gaussian phantoms, circle sampling, seeded
//! noise, and file formats for visibilities and images.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::freq_domain::{FrequencyDomain, Grid};
use crate::landweber::ImageGrid;
use crate::vsk_interp::{close_point_groups, NodeSet, DEFAULT_MIN_SEPARATION};

/// Samples per circle of the default sampling pattern (248 in total).
pub const DEFAULT_CIRCLE_COUNTS: [usize; 7] = [34, 34, 36, 36, 36, 36, 36];
/// Radius of the innermost default circle, in frequency units.
pub const DEFAULT_INNER_RADIUS: f64 = 100.0;
/// Radius of the outermost default circle, in frequency units.
pub const DEFAULT_OUTER_RADIUS: f64 = 1000.0;

/// Energy band `[low, high]` in keV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyChannel {
    low: f64,
    high: f64,
}

impl EnergyChannel {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low >= 0.0 && low < high) {
            return Err(Error::Config(format!("invalid energy channel [{low}, {high}]")));
        }
        Ok(Self { low, high })
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }
}

/// Two 3-keV channels from 28 keV down to 22 keV, then nine 2-keV channels
/// down to 4 keV, ordered from high to low energy.
pub fn default_channels() -> Vec<EnergyChannel> {
    let mut out = vec![
        EnergyChannel { low: 25.0, high: 28.0 },
        EnergyChannel { low: 22.0, high: 25.0 },
    ];
    let mut high = 22.0;
    while high > 4.0 + 1e-9 {
        out.push(EnergyChannel { low: high - 2.0, high });
        high -= 2.0;
    }
    out
}

/// Channels from a list of widths, stacked downward from `top`.
pub fn channels_from_widths(top: f64, widths: &[f64]) -> Result<Vec<EnergyChannel>> {
    let mut high = top;
    widths
        .iter()
        .map(|&w| {
            let c = EnergyChannel::new(high - w, high)?;
            high -= w;
            Ok(c)
        })
        .collect()
}

/// Complex samples of an image's Fourier transform at scattered nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilitySet {
    nodes: NodeSet,
    re: Vec<f64>,
    im: Vec<f64>,
    sigma: Vec<f64>,
    channel: Option<EnergyChannel>,
}

impl VisibilitySet {
    pub fn new(
        nodes: NodeSet,
        re: Vec<f64>,
        im: Vec<f64>,
        sigma: Vec<f64>,
        channel: Option<EnergyChannel>,
    ) -> Result<Self> {
        if nodes.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: nodes.dim(),
            });
        }
        let n = nodes.len();
        for len in [re.len(), im.len(), sigma.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if let Some(i) = sigma.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Domain(format!("sigma at sample {i} must be positive")));
        }
        if let Some(i) = re.iter().chain(&im).position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "visibility value {} is not finite",
                i % n.max(1)
            )));
        }
        Ok(Self {
            nodes,
            re,
            im,
            sigma,
            channel,
        })
    }

    /// Builds a set from raw samples, merging nodes closer than
    /// `min_separation` by averaging their values.
    pub fn from_samples(
        points: &[[f64; 2]],
        values: &[Complex64],
        sigma: &[f64],
        channel: Option<EnergyChannel>,
        min_separation: f64,
    ) -> Result<Self> {
        let n = points.len();
        for len in [values.len(), sigma.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        let groups = close_point_groups(points, min_separation);
        if groups.len() < n {
            log::warn!("merged {} visibilities at coincident nodes", n - groups.len());
        }
        let mut coords = Vec::with_capacity(2 * groups.len());
        let (mut re, mut im, mut sg) = (Vec::new(), Vec::new(), Vec::new());
        for g in &groups {
            let k = g.len() as f64;
            let mean = |f: &dyn Fn(usize) -> f64| g.iter().map(|&i| f(i)).sum::<f64>() / k;
            coords.push(mean(&|i| points[i][0]));
            coords.push(mean(&|i| points[i][1]));
            re.push(mean(&|i| values[i].re));
            im.push(mean(&|i| values[i].im));
            sg.push(g.iter().map(|&i| sigma[i] * sigma[i]).sum::<f64>().sqrt() / k);
        }
        let nodes = NodeSet::new(2, coords, 0.0)?;
        Self::new(nodes, re, im, sg, channel)
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn channel(&self) -> Option<EnergyChannel> {
        self.channel
    }

    pub fn value(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.len()).map(|i| self.value(i).norm()).fold(0.0, f64::max)
    }

    pub fn with_channel(mut self, channel: EnergyChannel) -> Self {
        self.channel = Some(channel);
        self
    }

    /// Same nodes with a uniform noise level.
    pub fn with_uniform_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        self.sigma = vec![sigma; self.len()];
        Ok(self)
    }

    /// Every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.re.iter_mut().chain(out.im.iter_mut()).for_each(|v| *v *= factor);
        out
    }

    /// Errors on the first node outside `domain` (closed containment).
    pub fn check_in_domain(&self, domain: &FrequencyDomain) -> Result<()> {
        for i in 0..self.len() {
            let p = self.nodes.point2(i);
            if !domain.contains_point(p) {
                return Err(Error::Domain(format!(
                    "visibility {i} at ({}, {}) lies outside the frequency support",
                    p[0], p[1]
                )));
            }
        }
        Ok(())
    }
}

/// One elliptical Gaussian; `amplitude` is its total flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    amplitude: f64,
    center: [f64; 2],
    widths: [f64; 2],
    rotation: f64,
}

impl GaussianComponent {
    pub fn new(amplitude: f64, center: [f64; 2], widths: [f64; 2], rotation: f64) -> Result<Self> {
        let finite = center.iter().chain(&widths).all(|v| v.is_finite()) && rotation.is_finite();
        if !(finite && amplitude.is_finite() && amplitude > 0.0 && widths.iter().all(|w| *w > 0.0)) {
            return Err(Error::Config(
                "phantom component needs positive amplitude and widths and finite geometry".into(),
            ));
        }
        Ok(Self {
            amplitude,
            center,
            widths,
            rotation,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Coordinates rotated into the component's principal axes.
    fn principal(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        [c * p[0] + s * p[1], -s * p[0] + c * p[1]]
    }

    pub fn value_at(&self, x: [f64; 2]) -> f64 {
        let r = self.principal([x[0] - self.center[0], x[1] - self.center[1]]);
        let [sx, sy] = self.widths;
        let norm = self.amplitude / (2.0 * std::f64::consts::PI * sx * sy);
        norm * (-0.5 * ((r[0] / sx).powi(2) + (r[1] / sy).powi(2))).exp()
    }

    /// `A exp(−2π²(σx² u'x² + σy² u'y²)) e^{2πi x₀·u}`
    pub fn transform_at(&self, u: [f64; 2]) -> Complex64 {
        use std::f64::consts::PI;
        let r = self.principal(u);
        let [sx, sy] = self.widths;
        let mag = self.amplitude * (-2.0 * PI * PI * ((sx * r[0]).powi(2) + (sy * r[1]).powi(2))).exp();
        let phase = 2.0 * PI * (self.center[0] * u[0] + self.center[1] * u[1]);
        Complex64::from_polar(mag, phase)
    }
}

/// Sum of positive elliptical Gaussians in image units.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Phantom {
    components: Vec<GaussianComponent>,
}

impl Phantom {
    pub fn new(components: Vec<GaussianComponent>) -> Self {
        Self { components }
    }

    /// Components given as `(flux fraction, width px, center px)` on `grid`,
    /// scaled to `total_flux`.
    pub fn from_pixel_units(spec: &[(f64, f64, [f64; 2])], grid: &Grid, total_flux: f64) -> Result<Self> {
        let dx = grid.pixel_size();
        let total: f64 = spec.iter().map(|c| c.0).sum();
        if !(total > 0.0) {
            return Err(Error::Config(
                "phantom flux fractions must sum to a positive value".into(),
            ));
        }
        let components = spec
            .iter()
            .map(|&(frac, width, c)| {
                GaussianComponent::new(total_flux * frac / total, [c[0] * dx, c[1] * dx], [width * dx; 2], 0.0)
            })
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    /// Three components with seeded flux fractions in `[0.3, 1]`, widths in
    /// `[1.5, 3.5]` px and centres within 12 px of the origin.
    pub fn random_on(grid: &Grid, total_flux: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec: Vec<(f64, f64, [f64; 2])> = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.3..=1.0),
                    rng.random_range(1.5..=3.5),
                    [rng.random_range(-12.0..=12.0), rng.random_range(-12.0..=12.0)],
                )
            })
            .collect();
        Self::from_pixel_units(&spec, grid, total_flux)
    }

    /// Three-source default: flux fractions 1, 0.6, 0.4 with widths of 3, 2
    /// and 1.5 pixels.
    pub fn default_on(grid: &Grid, total_flux: f64) -> Result<Self> {
        Self::from_pixel_units(&DEFAULT_PHANTOM_PX, grid, total_flux)
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn total_flux(&self) -> f64 {
        self.components.iter().map(|c| c.amplitude).sum()
    }

    pub fn value_at(&self, x: [f64; 2]) -> f64 {
        self.components.iter().map(|c| c.value_at(x)).sum()
    }

    pub fn transform_at(&self, u: [f64; 2]) -> Complex64 {
        self.components.iter().map(|c| c.transform_at(u)).sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| GaussianComponent::new(c.amplitude * factor, c.center, c.widths, c.rotation))
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }
}

/// `(flux fraction, width px, center px)` of the default phantom.
pub const DEFAULT_PHANTOM_PX: [(f64, f64, [f64; 2]); 3] =
    [(1.0, 3.0, [4.0, -2.0]), (0.6, 2.0, [-8.0, 5.0]), (0.4, 1.5, [6.0, 9.0])];

/// Nodes at equally spaced angles on concentric circles.
pub fn sample_circles(n_circles: usize, points_per_circle: &[usize], radii: &[f64]) -> Result<NodeSet> {
    if points_per_circle.len() != n_circles || radii.len() != n_circles {
        return Err(Error::Config(format!(
            "{n_circles} circles need {n_circles} counts and radii, got {} and {}",
            points_per_circle.len(),
            radii.len()
        )));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "circle radii must be positive and strictly increasing".into(),
        ));
    }
    let mut coords = Vec::new();
    for (&m, &r) in points_per_circle.iter().zip(radii) {
        for k in 0..m {
            let t = std::f64::consts::TAU * k as f64 / m as f64;
            let (s, c) = t.sin_cos();
            coords.push(r * c);
            coords.push(r * s);
        }
    }
    NodeSet::new(2, coords, DEFAULT_MIN_SEPARATION)
}

/// `n` radii in geometric progression from `inner` to `outer`.
pub fn geometric_radii(inner: f64, outer: f64, n: usize) -> Result<Vec<f64>> {
    if !(inner > 0.0 && outer > inner) || n < 2 {
        return Err(Error::Config(
            "geometric radii need 0 < inner < outer and at least two circles".into(),
        ));
    }
    let ratio = (outer / inner).ln() / (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            if k + 1 == n {
                outer
            } else {
                inner * (ratio * k as f64).exp()
            }
        })
        .collect())
}

/// Seven circles, 248 nodes, radii from 100 to 1000.
pub fn default_nodes() -> NodeSet {
    let radii = geometric_radii(DEFAULT_INNER_RADIUS, DEFAULT_OUTER_RADIUS, 7).expect("valid default radii");
    sample_circles(7, &DEFAULT_CIRCLE_COUNTS, &radii).expect("valid default sampling")
}

/// Phantom intensity at pixel centres.
pub fn phantom_to_image(phantom: &Phantom, grid: &Grid) -> ImageGrid {
    let values = Array2::from_shape_fn(grid.dim(), |(i, j)| {
        Complex64::new(phantom.value_at([grid.image_coord(i), grid.image_coord(j)]), 0.0)
    });
    ImageGrid::new(values, grid.clone()).expect("shape built from grid")
}

/// Exact transform of the phantom at `nodes` with uniform `sigma`.
pub fn phantom_visibilities(
    phantom: &Phantom,
    nodes: &NodeSet,
    channel: Option<EnergyChannel>,
    sigma: f64,
) -> Result<VisibilitySet> {
    let values: Vec<Complex64> = (0..nodes.len())
        .map(|i| phantom.transform_at(nodes.point2(i)))
        .collect();
    VisibilitySet::new(
        nodes.clone(),
        values.iter().map(|z| z.re).collect(),
        values.iter().map(|z| z.im).collect(),
        vec![sigma; nodes.len()],
        channel,
    )
}

/// Index of the node at `−u` for every node, if present.
fn conjugate_partners(nodes: &NodeSet) -> Vec<Option<usize>> {
    let pts: Vec<[f64; 2]> = (0..nodes.len()).map(|i| nodes.point2(i)).collect();
    pts.iter()
        .map(|p| {
            let tol = 1e-9 * p[0].hypot(p[1]).max(1.0);
            pts.iter()
                .position(|q| (q[0] + p[0]).abs() <= tol && (q[1] + p[1]).abs() <= tol)
        })
        .collect()
}

/// Adds zero-mean Gaussian noise with the per-sample sigma to both parts.
/// Nodes at `u` and `−u` receive conjugate perturbations and a node at the
/// origin gets a real perturbation, so Hermitian data stay Hermitian.
pub fn add_noise(vis: &VisibilitySet, seed: u64) -> VisibilitySet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let partners = conjugate_partners(&vis.nodes);
    let mut noise: Vec<Option<(f64, f64)>> = vec![None; vis.len()];
    let mut out = vis.clone();
    for i in 0..vis.len() {
        let s = vis.sigma[i];
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        let (nr, ni) = match partners[i] {
            Some(p) if p == i => (s * a, 0.0),
            Some(p) if p < i => {
                let (pr, pi) = noise[p].expect("partner drawn earlier");
                (pr * s / vis.sigma[p], -pi * s / vis.sigma[p])
            }
            _ => (s * a, s * b),
        };
        noise[i] = Some((nr, ni));
        out.re[i] += nr;
        out.im[i] += ni;
    }
    out
}

const VIS_HEADER: [&str; 7] = ["u", "v", "re", "im", "sigma", "e_low", "e_high"];

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `u,v,re,im,sigma,e_low,e_high` with 17 significant digits. A set
/// without a channel writes empty energy cells.
pub fn write_visibility_csv(vis: &VisibilitySet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(VIS_HEADER).map_err(csv_err)?;
    let (lo, hi) = match vis.channel {
        Some(c) => (fmt17(c.low), fmt17(c.high)),
        None => (String::new(), String::new()),
    };
    for i in 0..vis.len() {
        let p = vis.nodes.point2(i);
        w.write_record([
            fmt17(p[0]),
            fmt17(p[1]),
            fmt17(vis.re[i]),
            fmt17(vis.im[i]),
            fmt17(vis.sigma[i]),
            lo.clone(),
            hi.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the format written by [`write_visibility_csv`]; columns may appear
/// in any order. Row numbers in errors count data rows from 1.
pub fn read_visibility_csv(path: &Path) -> Result<VisibilitySet> {
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
    let mut cols = [0usize; 7];
    for (slot, name) in cols.iter_mut().zip(VIS_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(0, format!("missing column `{name}`")))?;
    }
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut sigma = Vec::new();
    let mut channel: Option<Option<EnergyChannel>> = None;
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        let field = |c: usize| -> Result<f64> {
            let name = VIS_HEADER[c];
            let cell = record
                .get(cols[c])
                .ok_or_else(|| parse_err(row, format!("missing cell `{name}`")))?;
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(row, format!("`{name}` is not a finite number: `{cell}`")))
        };
        let s = field(4)?;
        if s <= 0.0 {
            return Err(parse_err(row, format!("sigma must be positive, got {s}")));
        }
        let blank = |c: usize| record.get(cols[c]).is_some_and(str::is_empty);
        let this = if blank(5) && blank(6) {
            None
        } else {
            Some(EnergyChannel::new(field(5)?, field(6)?).map_err(|e| parse_err(row, e.to_string()))?)
        };
        match channel {
            None => channel = Some(this),
            Some(c) if c != this => {
                return Err(parse_err(row, "all rows must belong to the same energy channel".into()));
            }
            _ => {}
        }
        points.push([field(0)?, field(1)?]);
        values.push(Complex64::new(field(2)?, field(3)?));
        sigma.push(s);
    }
    VisibilitySet::from_samples(&points, &values, &sigma, channel.flatten(), DEFAULT_MIN_SEPARATION)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Csv,
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Csv => "csv",
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

/// Path of the raster scaling sidecar, `<stem>.scale.txt`.
pub fn scale_sidecar_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.scale.txt"))
}

/// Linear map of `[min, max]` onto `[0, 65535]`; a flat image maps to 0.
fn quantize(values: &Array2<f64>) -> (Vec<u16>, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let q = values
        .iter()
        .map(|v| {
            if span > 0.0 {
                ((v - min) / span * 65535.0).round() as u16
            } else {
                0
            }
        })
        .collect();
    (q, min, max)
}

/// Writes the real part of `image`: CSV rows follow the first array index;
/// rasters are 16-bit grayscale with a `.scale.txt` sidecar.
pub fn export_image(image: &ImageGrid, path: &Path, format: ImageFormat) -> Result<()> {
    export_field(&image.real_part(), path, format)
}

/// [`export_image`] for any real field.
pub fn export_field(values: &Array2<f64>, path: &Path, format: ImageFormat) -> Result<()> {
    let io = |e: std::io::Error| Error::io(path, e);
    let (rows, cols) = values.dim();
    match format {
        ImageFormat::Csv => {
            let mut w = BufWriter::new(File::create(path).map_err(io)?);
            for row in values.rows() {
                let line: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
                writeln!(w, "{}", line.join(",")).map_err(io)?;
            }
            w.flush().map_err(io)
        }
        ImageFormat::Pgm | ImageFormat::Png => {
            let (q, min, max) = quantize(values);
            let bytes: Vec<u8> = q.iter().flat_map(|v| v.to_be_bytes()).collect();
            let file = File::create(path).map_err(io)?;
            let mut w = BufWriter::new(file);
            if format == ImageFormat::Pgm {
                write!(w, "P5\n{cols} {rows}\n65535\n").map_err(io)?;
                w.write_all(&bytes).map_err(io)?;
                w.flush().map_err(io)?;
            } else {
                let png_err = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
                let mut enc = png::Encoder::new(w, cols as u32, rows as u32);
                enc.set_color(png::ColorType::Grayscale);
                enc.set_depth(png::BitDepth::Sixteen);
                let mut writer = enc.write_header().map_err(png_err)?;
                writer.write_image_data(&bytes).map_err(png_err)?;
                writer.finish().map_err(png_err)?;
            }
            let side = scale_sidecar_path(path);
            std::fs::write(&side, format!("min {}\nmax {}\n", fmt17(min), fmt17(max))).map_err(|e| Error::io(&side, e))
        }
    }
}

/// Reads a field written by [`export_image`] in CSV form.
pub fn read_image_csv(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    let mut cols = None;
    for (k, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                row: k + 1,
                message: e.to_string(),
            })?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: k + 1,
                message: "ragged row".into(),
            });
        }
        data.extend(row);
    }
    let cols = cols.unwrap_or(0);
    let rows = data.len().checked_div(cols).unwrap_or(0);
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        row: 0,
        message: e.to_string(),
    })
}
