//! Projected Landweber iteration with a frequency-support consistency step,
//! plus the per-iteration diagnostics and the two-run stability ledger.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::SpectralTransform;
use crate::freq_domain::{l2_norm, FrequencyDomain, Grid, Region};

/// Tolerance for the successive-difference stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopTolerance {
    /// `δ` in image L₂ units.
    Absolute(f64),
    /// `δ = factor · ‖f̄_nb‖`.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandweberConfig {
    tau: f64,
    tolerance: StopTolerance,
    k_max: usize,
}

impl Default for LandweberConfig {
    fn default() -> Self {
        Self {
            tau: 0.2,
            tolerance: StopTolerance::Relative(1e-3),
            k_max: 5000,
        }
    }
}

impl LandweberConfig {
    pub fn new(tau: f64, tolerance: StopTolerance, k_max: usize) -> Result<Self> {
        if !(tau > 0.0 && tau < 2.0) {
            return Err(Error::Config(format!("relaxation tau must lie in (0, 2), got {tau}")));
        }
        let t = match tolerance {
            StopTolerance::Absolute(t) | StopTolerance::Relative(t) => t,
        };
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Config(format!("stopping tolerance must be positive, got {t}")));
        }
        if k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        Ok(Self { tau, tolerance, k_max })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn tolerance(&self) -> StopTolerance {
        self.tolerance
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Absolute `δ` for an initialization of norm `init_norm`. A relative
    /// tolerance on a zero initialization falls back to the factor itself.
    pub fn delta_for(&self, init_norm: f64) -> f64 {
        match self.tolerance {
            StopTolerance::Absolute(d) => d,
            StopTolerance::Relative(r) if init_norm > 0.0 => r * init_norm,
            StopTolerance::Relative(r) => r,
        }
    }
}

/// Complex image on the pixel grid paired with a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    values: Array2<Complex64>,
    grid: Grid,
}

impl ImageGrid {
    pub fn new(values: Array2<Complex64>, grid: Grid) -> Result<Self> {
        grid.check_shape(values.dim())?;
        Ok(Self { values, grid })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: Array2::zeros(grid.dim()),
            grid,
        }
    }

    pub fn from_real(values: &Array2<f64>, grid: Grid) -> Result<Self> {
        Self::new(values.mapv(|v| Complex64::new(v, 0.0)), grid)
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn pixel_size(&self) -> f64 {
        self.grid.pixel_size()
    }

    pub fn real_part(&self) -> Array2<f64> {
        self.values.mapv(|z| z.re)
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }

    /// `‖f‖_{L₂}` with pixel-area weights.
    pub fn norm(&self) -> f64 {
        image_norm(&self.values, &self.grid)
    }

    /// `‖self − other‖_{L₂}`.
    pub fn distance(&self, other: &ImageGrid) -> Result<f64> {
        self.grid.check_shape(other.values.dim())?;
        Ok(diff_norm(&self.values, &other.values, &self.grid))
    }
}

fn image_norm(f: &Array2<Complex64>, grid: &Grid) -> f64 {
    (f.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.pixel_area()).sqrt()
}

fn diff_norm(a: &Array2<Complex64>, b: &Array2<Complex64>, grid: &Grid) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    (s * grid.pixel_area()).sqrt()
}

/// `𝒫₊`: zero every pixel whose real part is negative.
pub fn project_plus(f: &Array2<Complex64>) -> Array2<Complex64> {
    f.mapv(|z| if z.re < 0.0 { Complex64::default() } else { z })
}

/// `𝒫₋`: keep only the pixels whose real part is negative.
pub fn project_minus(f: &Array2<Complex64>) -> Array2<Complex64> {
    f.mapv(|z| if z.re < 0.0 { z } else { Complex64::default() })
}

/// Band-limited initialization `f̄_nb` with its spectrum on `D`.
#[derive(Debug, Clone)]
pub struct BandLimited {
    image: ImageGrid,
    spectrum: Array2<Complex64>,
}

impl BandLimited {
    /// Wraps an image whose spectrum is already supported in `D`; the stored
    /// spectrum is the masked forward transform.
    pub fn from_image(image: ImageGrid, domain: &FrequencyDomain) -> Result<Self> {
        domain.check_shape(image.values.dim())?;
        let t = SpectralTransform::new(domain.grid().clone());
        let spectrum = domain.apply_mask(&t.forward(&image.values)?);
        Ok(Self { image, spectrum })
    }

    pub fn image(&self) -> &ImageGrid {
        &self.image
    }

    /// Spectrum on `D`, exactly zero outside.
    pub fn spectrum(&self) -> &Array2<Complex64> {
        &self.spectrum
    }
}

/// `f̄_nb = ℱ⁻¹(χ_D · field)`.
pub fn band_limited_init(field: &Array2<Complex64>, domain: &FrequencyDomain) -> Result<BandLimited> {
    domain.check_shape(field.dim())?;
    let spectrum = domain.apply_mask(field);
    let t = SpectralTransform::new(domain.grid().clone());
    let image = ImageGrid::new(t.inverse(&spectrum)?, domain.grid().clone())?;
    Ok(BandLimited { image, spectrum })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ToleranceMet,
    CapReached,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::ToleranceMet => "tolerance_met",
            StopReason::CapReached => "cap_reached",
        }
    }
}

/// Diagnostics of step `k`, which maps `f̃^(k)` to `f̃^(k+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    /// `‖f̃^(k+1) − f̃^(k)‖_{L₂}`
    pub diff_norm: f64,
    /// `‖ℱf̄_nb − ℱf̃^(k)‖_{L₂(D)}`
    pub d_residual: f64,
    /// `‖𝒫₋ f^(k+1)‖_{L₂}`
    pub neg_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandweberTrace {
    pub records: Vec<TraceRecord>,
    pub stop_iteration: usize,
    pub stop_reason: StopReason,
    pub tau: f64,
    pub delta: f64,
}

impl LandweberTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn stop_record(&self) -> &TraceRecord {
        &self.records[self.stop_iteration]
    }

    /// Writes `k,diff_norm,d_residual,neg_norm`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("k,diff_norm,d_residual,neg_norm\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                r.k, r.diff_norm, r.d_residual, r.neg_norm
            ));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Result of [`iterate`].
#[derive(Debug, Clone)]
pub struct LandweberRun {
    pub image: ImageGrid,
    pub trace: LandweberTrace,
}

/// Output of one step beyond the trace record.
struct Step {
    record: TraceRecord,
    /// `f^(k+1)` before projection.
    raw: Array2<Complex64>,
}

/// Single-run state `f̃^(k)`.
struct Stepper<'a> {
    init: &'a BandLimited,
    domain: &'a FrequencyDomain,
    transform: &'a SpectralTransform,
    /// `1 − τχ_D`
    weight: Array2<f64>,
    tau_init: Array2<Complex64>,
    current: Array2<Complex64>,
    k: usize,
}

impl<'a> Stepper<'a> {
    fn new(tau: f64, init: &'a BandLimited, domain: &'a FrequencyDomain, transform: &'a SpectralTransform) -> Self {
        let weight = domain.mask().mapv(|inside| if inside { 1.0 - tau } else { 1.0 });
        Self {
            init,
            domain,
            transform,
            weight,
            tau_init: init.image.values.mapv(|z| z * tau),
            current: Array2::zeros(domain.grid().dim()),
            k: 0,
        }
    }

    /// `f^(k+1) = τ f̄_nb + ℱ⁻¹((1 − τχ_D) ℱ f̃^(k))`, then `f̃^(k+1) = 𝒫₊ f^(k+1)`.
    fn step(&mut self) -> Result<Step> {
        let k = self.k;
        let spec = self.transform.forward(&self.current)?;
        let residual = Zip::from(&self.init.spectrum).and(&spec).map_collect(|v, s| v - s);
        let d_residual = l2_norm(&residual, Region::Domain, self.domain)?;
        let damped = Zip::from(&spec).and(&self.weight).map_collect(|s, w| s * w);
        let mut raw = self.transform.inverse(&damped)?;
        raw.zip_mut_with(&self.tau_init, |r, t| *r += t);
        if raw.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericalFailure {
                iteration: k,
                field: "image iterate",
            });
        }
        let grid = self.domain.grid();
        let neg_norm = image_norm(&project_minus(&raw), grid);
        let next = project_plus(&raw);
        let diff = diff_norm(&next, &self.current, grid);
        self.current = next;
        self.k += 1;
        Ok(Step {
            record: TraceRecord {
                k,
                diff_norm: diff,
                d_residual,
                neg_norm,
            },
            raw,
        })
    }
}

/// Runs from `f̃^(0) = 0` until `diff_norm ≤ δ` or `k_max` steps.
pub fn iterate(config: &LandweberConfig, init: &BandLimited, domain: &FrequencyDomain) -> Result<LandweberRun> {
    domain.check_shape(init.image.values.dim())?;
    let transform = SpectralTransform::new(domain.grid().clone());
    let delta = config.delta_for(init.image.norm());
    let mut stepper = Stepper::new(config.tau, init, domain, &transform);
    let mut records = Vec::new();
    let mut reason = StopReason::CapReached;
    while records.len() < config.k_max {
        let step = stepper.step()?;
        records.push(step.record);
        if step.record.diff_norm <= delta {
            reason = StopReason::ToleranceMet;
            break;
        }
    }
    if reason == StopReason::CapReached {
        log::warn!("Landweber iteration reached the cap of {} steps", config.k_max);
    }
    let stop_iteration = records.len() - 1;
    Ok(LandweberRun {
        image: ImageGrid::new(stepper.current, domain.grid().clone())?,
        trace: LandweberTrace {
            records,
            stop_iteration,
            stop_reason: reason,
            tau: config.tau,
            delta,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Holds,
    Violated,
    /// The run hit the iteration cap; nothing is asserted.
    Inconclusive,
}

impl CheckStatus {
    pub fn name(self) -> &'static str {
        match self {
            CheckStatus::Holds => "holds",
            CheckStatus::Violated => "violated",
            CheckStatus::Inconclusive => "inconclusive",
        }
    }
}

/// `|τ·d_residual(k) − neg_norm(k)| ≤ δ` at the stopping step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem2Record {
    pub status: CheckStatus,
    pub lhs: f64,
    pub delta: f64,
    /// `δ − lhs`
    pub slack: f64,
    pub k: usize,
}

pub fn theorem2_check(trace: &LandweberTrace) -> Theorem2Record {
    let r = trace.stop_record();
    let lhs = (trace.tau * r.d_residual - r.neg_norm).abs();
    let status = match trace.stop_reason {
        StopReason::CapReached => CheckStatus::Inconclusive,
        StopReason::ToleranceMet if lhs <= trace.delta + 1e-10 => CheckStatus::Holds,
        StopReason::ToleranceMet => CheckStatus::Violated,
    };
    Theorem2Record {
        status,
        lhs,
        delta: trace.delta,
        slack: trace.delta - lhs,
        k: r.k,
    }
}

/// Ledger row for the iterate `f̃^(m)` of two runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop2Row {
    pub m: usize,
    /// `‖f̃₂^(m) − f̃₁^(m)‖_{L₂}`
    pub lhs: f64,
    /// `‖ℱf₂^(m) − ℱf₁^(m)‖_{L₂(ℝᵈ∖D)}`
    pub complement: f64,
    /// `τ Σ_{l<m} |1−τ|^l · ‖ℱf̄_nb,₂ − ℱf̄_nb,₁‖_{L₂(D)}`
    pub geometric: f64,
    /// `Σ_{l<m} |1−τ|^{l+1} · ‖ℱ𝒫₋f₂^(m−1−l) − ℱ𝒫₋f₁^(m−1−l)‖_{L₂(D)}`
    pub p_minus_sum: f64,
}

impl Prop2Row {
    pub fn rhs(&self) -> f64 {
        self.complement + self.geometric + self.p_minus_sum
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs() * (1.0 + 1e-8)
    }
}

/// Stability ledger between two runs with the same configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop2Ledger {
    pub rows: Vec<Prop2Row>,
    /// Number of replayed steps, `max(stop₁, stop₂) + 1`.
    pub common_steps: usize,
    /// Smaller of the two final projected-map norms.
    pub map_norm: f64,
}

impl Prop2Ledger {
    pub fn final_row(&self) -> &Prop2Row {
        self.rows.last().expect("ledger has at least one row")
    }

    pub fn holds(&self) -> bool {
        self.rows.iter().all(Prop2Row::holds)
    }

    /// `p_minus_sum / map_norm` at the final row.
    pub fn p_minus_ratio(&self) -> f64 {
        let p = self.final_row().p_minus_sum;
        if self.map_norm > 0.0 {
            p / self.map_norm
        } else if p == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("m,lhs,complement,geometric,p_minus_sum,rhs,holds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                r.m,
                r.lhs,
                r.complement,
                r.geometric,
                r.p_minus_sum,
                r.rhs(),
                r.holds()
            ));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Replays both runs in lockstep for `max(stop₁, stop₂) + 1` steps; the run
/// that stopped first keeps iterating so every row compares true iterates.
pub fn prop2_ledger(
    config: &LandweberConfig,
    init_1: &BandLimited,
    trace_1: &LandweberTrace,
    init_2: &BandLimited,
    trace_2: &LandweberTrace,
    domain: &FrequencyDomain,
) -> Result<Prop2Ledger> {
    for init in [init_1, init_2] {
        if init.image.grid != *domain.grid() {
            return Err(Error::Config("ledger runs must share the domain grid".into()));
        }
    }
    if trace_1.tau != config.tau || trace_2.tau != config.tau {
        return Err(Error::Config("ledger runs must share the relaxation parameter".into()));
    }
    let transform = SpectralTransform::new(domain.grid().clone());
    let grid = domain.grid();
    let tau = config.tau;
    let q = (1.0 - tau).abs();
    let init_gap = {
        let d = Zip::from(&init_2.spectrum)
            .and(&init_1.spectrum)
            .map_collect(|a, b| a - b);
        l2_norm(&d, Region::Domain, domain)?
    };
    let steps = trace_1.stop_iteration.max(trace_2.stop_iteration) + 1;
    let mut s1 = Stepper::new(tau, init_1, domain, &transform);
    let mut s2 = Stepper::new(tau, init_2, domain, &transform);
    // a_m for the previous raw iterates; f^(0) = 0.
    let mut prev_neg_gap = 0.0;
    let mut geometric = 0.0;
    let mut p_minus_sum = 0.0;
    let mut rows = Vec::with_capacity(steps);
    for m in 1..=steps {
        let st1 = s1.step()?;
        let st2 = s2.step()?;
        geometric = tau * init_gap + q * geometric;
        p_minus_sum = q * (p_minus_sum + prev_neg_gap);
        let raw_gap = Zip::from(&st2.raw).and(&st1.raw).map_collect(|a, b| a - b);
        let complement = l2_norm(&transform.forward(&raw_gap)?, Region::Complement, domain)?;
        let neg_gap = project_minus(&st2.raw) - project_minus(&st1.raw);
        prev_neg_gap = l2_norm(&transform.forward(&neg_gap)?, Region::Domain, domain)?;
        rows.push(Prop2Row {
            m,
            lhs: diff_norm(&s2.current, &s1.current, grid),
            complement,
            geometric,
            p_minus_sum,
        });
    }
    let map_norm = image_norm(&s1.current, grid).min(image_norm(&s2.current, grid));
    Ok(Prop2Ledger {
        rows,
        common_steps: steps,
        map_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq_domain::{build_mask, DomainShape};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_spectrum(grid: &Grid, flux: f64, sigma: f64, x0: [f64; 2]) -> Array2<Complex64> {
        Array2::from_shape_fn(grid.dim(), |(i, j)| {
            let u = grid.cell_center(i, j);
            let amp = flux * (-2.0 * std::f64::consts::PI.powi(2) * sigma * sigma * (u[0] * u[0] + u[1] * u[1])).exp();
            amp * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (x0[0] * u[0] + x0[1] * u[1]))
        })
    }

    fn disk_instance(n: usize) -> (FrequencyDomain, BandLimited) {
        let grid = Grid::new(n, 1000.0).unwrap();
        let domain = build_mask(DomainShape::Disk { radius: 600.0 }, grid.clone()).unwrap();
        let dx = grid.pixel_size();
        let spec = gaussian_spectrum(&grid, 100.0, 1.5 * dx, [3.0 * dx, -2.0 * dx])
            + gaussian_spectrum(&grid, 50.0, 1.0 * dx, [-6.0 * dx, 4.0 * dx]);
        let init = band_limited_init(&spec, &domain).unwrap();
        (domain, init)
    }

    #[test]
    fn config_validation() {
        assert!(LandweberConfig::new(0.0, StopTolerance::Absolute(1.0), 10).is_err());
        assert!(LandweberConfig::new(2.0, StopTolerance::Absolute(1.0), 10).is_err());
        assert!(LandweberConfig::new(1.0, StopTolerance::Absolute(0.0), 10).is_err());
        assert!(LandweberConfig::new(1.0, StopTolerance::Relative(-1.0), 10).is_err());
        assert!(LandweberConfig::new(1.0, StopTolerance::Absolute(1.0), 0).is_err());
        let c = LandweberConfig::default();
        assert_eq!((c.tau(), c.k_max()), (0.2, 5000));
        assert_eq!(c.delta_for(2.0), 2e-3);
    }

    #[test]
    fn zero_field_gives_zero_image() {
        let grid = Grid::new(16, 10.0).unwrap();
        let domain = FrequencyDomain::full(grid.clone());
        let init = band_limited_init(&Array2::zeros((16, 16)), &domain).unwrap();
        assert!(init.image().values().iter().all(|z| *z == Complex64::default()));
        let cfg = LandweberConfig::new(0.5, StopTolerance::Absolute(1e-12), 10).unwrap();
        let run = iterate(&cfg, &init, &domain).unwrap();
        assert_eq!(run.trace.len(), 1);
        assert_eq!(run.trace.stop_reason, StopReason::ToleranceMet);
        assert!(run.image.values().iter().all(|z| *z == Complex64::default()));
        let t2 = theorem2_check(&run.trace);
        assert_eq!((t2.status, t2.lhs), (CheckStatus::Holds, 0.0));
    }

    #[test]
    fn origin_delta_gives_constant_image() {
        let grid = Grid::new(16, 10.0).unwrap();
        let domain = build_mask(DomainShape::Disk { radius: 5.0 }, grid.clone()).unwrap();
        let mut field = Array2::zeros((16, 16));
        field[(8, 8)] = Complex64::new(3.0, 0.0);
        let init = band_limited_init(&field, &domain).unwrap();
        let expect = 3.0 * grid.cell_area();
        for z in init.image().values() {
            assert!((z.re - expect).abs() < 1e-14 && z.im.abs() < 1e-14);
        }
        assert_eq!(init.spectrum(), &field);
    }

    #[test]
    fn init_matches_direct_inverse_sum() {
        let grid = Grid::new(16, 8.0).unwrap();
        let domain = build_mask(DomainShape::Disk { radius: 6.0 }, grid.clone()).unwrap();
        let dx = grid.pixel_size();
        let spec = gaussian_spectrum(&grid, 1.0, 2.0 * dx, [dx, -3.0 * dx]);
        let init = band_limited_init(&spec, &domain).unwrap();
        let du2 = grid.cell_area();
        for ((i, j), z) in init.image().values().indexed_iter() {
            let x = [grid.image_coord(i), grid.image_coord(j)];
            let mut acc = Complex64::default();
            for (k, l) in domain.inside_cells() {
                let u = grid.cell_center(k, l);
                let phase = -2.0 * std::f64::consts::PI * (x[0] * u[0] + x[1] * u[1]);
                acc += spec[(k, l)] * Complex64::from_polar(1.0, phase);
            }
            assert!((z - acc * du2).norm() < 1e-12);
        }
    }

    #[test]
    fn projections() {
        let pos = Array2::from_elem((4, 4), Complex64::new(1.5, 0.0));
        assert_eq!(project_plus(&pos), pos);
        assert!(project_minus(&pos).iter().all(|z| *z == Complex64::default()));
        let neg = Array2::from_elem((4, 4), Complex64::new(-1.0, 0.0));
        assert!(project_plus(&neg).iter().all(|z| *z == Complex64::default()));
        assert_eq!(project_minus(&neg), neg);
    }

    #[test]
    fn fixed_point_full_domain() {
        let grid = Grid::new(32, 50.0).unwrap();
        let domain = FrequencyDomain::full(grid.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = Array2::from_shape_fn(grid.dim(), |_| rng.random_range(0.0..10.0));
        let init = BandLimited::from_image(ImageGrid::from_real(&img, grid).unwrap(), &domain).unwrap();
        let cfg = LandweberConfig::new(1.0, StopTolerance::Relative(1e-6), 100).unwrap();
        let run = iterate(&cfg, &init, &domain).unwrap();
        assert_eq!(run.image.values(), init.image().values());
        assert_eq!(run.trace.len(), 2);
        assert_eq!(run.trace.records[1].diff_norm, 0.0);
        assert_eq!(run.trace.stop_reason, StopReason::ToleranceMet);
    }

    #[test]
    fn cap_is_reported_and_inconclusive() {
        let (domain, init) = disk_instance(32);
        let cfg = LandweberConfig::new(0.2, StopTolerance::Absolute(1e-30), 3).unwrap();
        let run = iterate(&cfg, &init, &domain).unwrap();
        assert_eq!(run.trace.len(), 3);
        assert_eq!(run.trace.stop_reason, StopReason::CapReached);
        assert_eq!(theorem2_check(&run.trace).status, CheckStatus::Inconclusive);
    }

    #[test]
    fn relaxed_run_is_nonnegative_and_satisfies_theorem2() {
        let (domain, init) = disk_instance(64);
        let cfg = LandweberConfig::new(0.2, StopTolerance::Relative(1e-3), 5000).unwrap();
        let run = iterate(&cfg, &init, &domain).unwrap();
        assert_eq!(run.trace.stop_reason, StopReason::ToleranceMet);
        assert!(run.image.min_real() >= 0.0);
        let t2 = theorem2_check(&run.trace);
        assert_eq!(t2.status, CheckStatus::Holds, "{t2:?}");
    }

    #[test]
    fn neg_norm_agrees_with_spectral_norm() {
        let (domain, init) = disk_instance(32);
        let t = SpectralTransform::new(domain.grid().clone());
        let mut s = Stepper::new(0.7, &init, &domain, &t);
        for _ in 0..5 {
            let st = s.step().unwrap();
            let spec = t.forward(&project_minus(&st.raw)).unwrap();
            let spectral = l2_norm(&spec, Region::All, &domain).unwrap();
            let scale = st.record.neg_norm.max(1e-300);
            assert!((spectral - st.record.neg_norm).abs() <= 1e-10 * scale.max(spectral));
        }
    }

    #[test]
    fn ledger_of_identical_runs_is_zero() {
        let (domain, init) = disk_instance(32);
        let cfg = LandweberConfig::new(0.2, StopTolerance::Relative(1e-3), 5000).unwrap();
        let run = iterate(&cfg, &init, &domain).unwrap();
        let ledger = prop2_ledger(&cfg, &init, &run.trace, &init, &run.trace, &domain).unwrap();
        for r in &ledger.rows {
            assert_eq!((r.lhs, r.complement, r.geometric, r.p_minus_sum), (0.0, 0.0, 0.0, 0.0));
        }
        assert!(ledger.holds());
    }

    #[test]
    fn ledger_at_unit_relaxation_has_no_negative_part_weight() {
        let (domain, a) = disk_instance(32);
        let b = band_limited_init(&a.spectrum().mapv(|z| z * 1.3), &domain).unwrap();
        let cfg = LandweberConfig::new(1.0, StopTolerance::Relative(1e-3), 500).unwrap();
        let ra = iterate(&cfg, &a, &domain).unwrap();
        let rb = iterate(&cfg, &b, &domain).unwrap();
        let ledger = prop2_ledger(&cfg, &a, &ra.trace, &b, &rb.trace, &domain).unwrap();
        let gap = l2_norm(&(b.spectrum() - a.spectrum()), Region::Domain, &domain).unwrap();
        for r in &ledger.rows {
            assert_eq!(r.p_minus_sum, 0.0);
            assert_eq!(r.geometric, gap);
        }
        assert!(ledger.holds());
    }

    #[test]
    fn ledger_rejects_foreign_grid() {
        let (domain, a) = disk_instance(32);
        let (_, b) = disk_instance(16);
        let cfg = LandweberConfig::default();
        let ra = iterate(&cfg, &a, &domain).unwrap();
        assert!(matches!(
            prop2_ledger(&cfg, &a, &ra.trace, &b, &ra.trace, &domain),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn trace_csv_has_expected_layout() {
        let (domain, init) = disk_instance(16);
        let cfg = LandweberConfig::new(0.5, StopTolerance::Relative(1e-2), 50).unwrap();
        let run = iterate(&cfg, &init, &domain).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        run.trace.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,diff_norm,d_residual,neg_norm"));
        assert_eq!(lines.count(), run.trace.len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projections_are_complementary(values in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 36)) {
            let f = Array2::from_shape_vec((6, 6), values.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let sum = project_plus(&f) + project_minus(&f);
            prop_assert_eq!(sum, f.clone());
            prop_assert!(project_plus(&f).iter().all(|z| z.re >= 0.0));
        }

        #[test]
        fn ledger_inequality_holds(scale in 0.5f64..2.0, shift in -4.0f64..4.0, tau in 0.1f64..1.9) {
            let grid = Grid::new(32, 1000.0).unwrap();
            let domain = build_mask(DomainShape::Disk { radius: 600.0 }, grid.clone()).unwrap();
            let dx = grid.pixel_size();
            let a = band_limited_init(&gaussian_spectrum(&grid, 100.0, 1.5 * dx, [0.0, 0.0]), &domain).unwrap();
            let b = band_limited_init(&gaussian_spectrum(&grid, 100.0 * scale, 1.5 * dx, [shift * dx, 0.0]), &domain).unwrap();
            let cfg = LandweberConfig::new(tau, StopTolerance::Relative(1e-3), 400).unwrap();
            let ra = iterate(&cfg, &a, &domain).unwrap();
            let rb = iterate(&cfg, &b, &domain).unwrap();
            prop_assert!(ra.image.min_real() >= 0.0 && rb.image.min_real() >= 0.0);
            let ledger = prop2_ledger(&cfg, &a, &ra.trace, &b, &rb.trace, &domain).unwrap();
            for r in &ledger.rows {
                prop_assert!(r.holds(), "{:?}", r);
            }
        }
    }
}
