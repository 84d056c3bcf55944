//! Parameter-dependent forward model, continuity diagnostics, and channel
//! chaining where each reconstruction defines the kernel scaling of the next.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::{add_noise, phantom_to_image, phantom_visibilities, EnergyChannel, Phantom, VisibilitySet};
use crate::error::{Error, Result};
use crate::fourier::SpectralTransform;
use crate::freq_domain::{
    theorem1_terms, window_extend_complex, FrequencyDomain, Grid, Taper, Theorem1Terms, WindowConfig,
};
use crate::kernels::{KernelConfig, ScalingSamples};
use crate::landweber::{
    band_limited_init, iterate, prop2_ledger, BandLimited, ImageGrid, LandweberConfig, LandweberRun, Prop2Ledger,
};
use crate::vsk_interp::{
    assemble_gram, cardinal_weights, evaluate_on_grid, interp_bound_terms, BoundTerms, ComplexInterpolant,
    ComplexScaling, Interpolant, NodeSet,
};

/// Signal density `w(u, b)`.
pub trait ElectronSignal: Send + Sync + std::fmt::Debug {
    fn eval(&self, u: [f64; 2], b: f64) -> f64;
}

/// Kernel `η(β, b)`, zero for `b < β`.
pub trait CrossSection: Send + Sync + std::fmt::Debug {
    fn eval(&self, beta: f64, b: f64) -> f64;
    /// Declared bound on `|η|`.
    fn bound(&self) -> f64;
}

/// `w(u, b) = e^{−b}`
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpSignal;

impl ElectronSignal for ExpSignal {
    fn eval(&self, _u: [f64; 2], b: f64) -> f64 {
        (-b).exp()
    }
}

/// `w(u, b) = (1 + b)^{−index}`, independent of `u`.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawSignal {
    pub index: f64,
}

impl ElectronSignal for PowerLawSignal {
    fn eval(&self, _u: [f64; 2], b: f64) -> f64 {
        (1.0 + b).powf(-self.index)
    }
}

/// Signal given by a closure.
pub struct FnSignal<F>(pub F);

impl<F> std::fmt::Debug for FnSignal<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FnSignal")
    }
}

impl<F: Fn([f64; 2], f64) -> f64 + Send + Sync> ElectronSignal for FnSignal<F> {
    fn eval(&self, u: [f64; 2], b: f64) -> f64 {
        (self.0)(u, b)
    }
}

/// `η(β, b) = 𝟙[b ≥ β]`
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitStep;

impl CrossSection for UnitStep {
    fn eval(&self, beta: f64, b: f64) -> f64 {
        if b >= beta {
            1.0
        } else {
            0.0
        }
    }

    fn bound(&self) -> f64 {
        1.0
    }
}

/// `η(β, b) = e^{−rate (b − β)} 𝟙[b ≥ β]`
#[derive(Debug, Clone, Copy)]
pub struct ExpCutoff {
    pub rate: f64,
}

impl CrossSection for ExpCutoff {
    fn eval(&self, beta: f64, b: f64) -> f64 {
        if b >= beta {
            (-self.rate * (b - beta)).exp()
        } else {
            0.0
        }
    }

    fn bound(&self) -> f64 {
        1.0
    }
}

/// Cross-section given by a closure and a declared bound; the closure must
/// vanish for `b < β`.
pub struct FnCrossSection<F>(pub F, pub f64);

impl<F> std::fmt::Debug for FnCrossSection<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("FnCrossSection").field(&self.1).finish()
    }
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> CrossSection for FnCrossSection<F> {
    fn eval(&self, beta: f64, b: f64) -> f64 {
        if b < beta {
            0.0
        } else {
            (self.0)(beta, b)
        }
    }

    fn bound(&self) -> f64 {
        self.1
    }
}

/// Distance scale for which the `1/(4πR²)` prefactor equals one.
pub const UNIT_PREFACTOR_DISTANCE: f64 = 0.282_094_791_773_878_14;

/// `g(u, β) = 1/(4πR²) ∫_β^{b_max} w(u, b) η(β, b) db`
#[derive(Debug, Clone)]
pub struct ParametricModel {
    signal: Arc<dyn ElectronSignal>,
    eta: Arc<dyn CrossSection>,
    r: f64,
    b_min: f64,
    b_max: f64,
    quad_points: usize,
}

impl ParametricModel {
    pub fn new(
        signal: Arc<dyn ElectronSignal>,
        eta: Arc<dyn CrossSection>,
        r: f64,
        b_max: f64,
        quad_points: usize,
    ) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!("distance scale must be positive, got {r}")));
        }
        if !(b_max.is_finite() && b_max > 0.0) {
            return Err(Error::Config(format!("b_max must be positive and finite, got {b_max}")));
        }
        if quad_points == 0 {
            return Err(Error::Config("quad_points must be at least 1".into()));
        }
        Ok(Self {
            signal,
            eta,
            r,
            b_min: 0.0,
            b_max,
            quad_points,
        })
    }

    /// Power-law signal of index 3 with an exponential cutoff kernel, unit
    /// prefactor, `b_max = 100`, 64 panels.
    pub fn default_surrogate() -> Self {
        Self::new(
            Arc::new(PowerLawSignal { index: 3.0 }),
            Arc::new(ExpCutoff { rate: 1.0 }),
            UNIT_PREFACTOR_DISTANCE,
            100.0,
            64,
        )
        .expect("valid default model")
    }

    /// Lower end of the integration range; the effective limit is
    /// `max(b_min, β)`.
    pub fn with_b_min(mut self, b_min: f64) -> Self {
        self.b_min = b_min;
        self
    }

    pub fn prefactor(&self) -> f64 {
        1.0 / (4.0 * std::f64::consts::PI * self.r * self.r)
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    pub fn signal(&self) -> &dyn ElectronSignal {
        self.signal.as_ref()
    }

    pub fn eta(&self) -> &dyn CrossSection {
        self.eta.as_ref()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const PANEL_ORDER: usize = 8;

/// Composite Gauss–Legendre quadrature with `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a || panels == 0 {
        return 0.0;
    }
    let (x, w) = gauss_legendre(PANEL_ORDER);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + 0.5 * h * xi)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// Result of [`forward_channel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelValue {
    pub value: f64,
    /// Relative change against twice as many panels.
    pub refinement_change: f64,
    pub converged: bool,
    /// Estimate of the neglected integral beyond `b_max`.
    pub tail_estimate: f64,
}

/// Tail `∫_{b_max}^∞ |w| η` from the local log-log decay rate of `w`.
fn tail_estimate(model: &ParametricModel, u: [f64; 2]) -> f64 {
    let b = model.b_max;
    let h = 1e-3;
    let w1 = model.signal.eval(u, b).abs();
    let w0 = model.signal.eval(u, b * (1.0 - h)).abs();
    if w1 == 0.0 {
        return 0.0;
    }
    let slope = -(w1.ln() - w0.ln()) / (1.0 / (1.0 - h)).ln();
    let tail = if slope > 1.0 {
        w1 * b / (slope - 1.0)
    } else {
        f64::INFINITY
    };
    model.prefactor() * model.eta.bound() * tail
}

/// Channel value `g(u, β)`.
pub fn forward_channel(model: &ParametricModel, u: [f64; 2], beta: f64) -> Result<ChannelValue> {
    if !(beta.is_finite() && beta < model.b_max) {
        return Err(Error::Domain(format!(
            "beta {beta} must be below b_max {}",
            model.b_max
        )));
    }
    let lo = beta.max(model.b_min);
    let integrand = |b: f64| model.signal.eval(u, b) * model.eta.eval(beta, b);
    let coarse = model.prefactor() * integrate(integrand, lo, model.b_max, model.quad_points);
    let fine = model.prefactor() * integrate(integrand, lo, model.b_max, 2 * model.quad_points);
    let change = if fine != 0.0 {
        ((fine - coarse) / fine).abs()
    } else {
        coarse.abs()
    };
    let converged = change <= 1e-6;
    if !converged {
        log::warn!("channel quadrature at beta = {beta} changed by {change:.2e} under refinement");
    }
    Ok(ChannelValue {
        value: coarse,
        refinement_change: change,
        converged,
        tail_estimate: tail_estimate(model, u),
    })
}

/// Continuity gap between two parameter values and its bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityRecord {
    pub gap: f64,
    pub bound: f64,
    /// Sampled `sup |η(β₁, b)|` over `[β₁, β₂]`.
    pub sup_eta: f64,
    /// Sampled Lipschitz constant of `η` in `β` over `[β₂, b_max]`.
    pub lipschitz: f64,
}

impl ContinuityRecord {
    pub fn holds(&self) -> bool {
        self.gap <= self.bound * (1.0 + 1e-6) + 1e-300
    }
}

const SUP_SAMPLES: usize = 2001;

/// `gap = |g(u, β₁) − g(u, β₂)|` against
/// `prefactor · (sup|η(β₁,·)| ∫_{β₁}^{β₂}|w| + L|β₁ − β₂| ∫_{β₂}^{b_max}|w|)`.
pub fn continuity_gap(model: &ParametricModel, u: [f64; 2], beta1: f64, beta2: f64) -> Result<ContinuityRecord> {
    let (b1, b2) = if beta1 <= beta2 { (beta1, beta2) } else { (beta2, beta1) };
    let g1 = forward_channel(model, u, b1)?.value;
    let g2 = forward_channel(model, u, b2)?.value;
    let gap = (g1 - g2).abs();
    if b1 == b2 {
        return Ok(ContinuityRecord {
            gap,
            bound: 0.0,
            sup_eta: 0.0,
            lipschitz: 0.0,
        });
    }
    let sample = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
        (0..SUP_SAMPLES)
            .map(|k| f(a + (b - a) * k as f64 / (SUP_SAMPLES - 1) as f64))
            .fold(0.0, f64::max)
    };
    let sup_eta = sample(b1, b2, &|b| model.eta.eval(b1, b).abs());
    let lipschitz = sample(b2, model.b_max, &|b| {
        (model.eta.eval(b1, b) - model.eta.eval(b2, b)).abs() / (b2 - b1)
    });
    let abs_w = |b: f64| model.signal.eval(u, b).abs();
    let panels = model.quad_points;
    let near = integrate(abs_w, b1, b2, panels);
    let far = integrate(abs_w, b2, model.b_max, panels);
    let bound = model.prefactor() * (sup_eta * near + lipschitz * (b2 - b1) * far);
    Ok(ContinuityRecord {
        gap,
        bound,
        sup_eta,
        lipschitz,
    })
}

/// Spectral value at `u` by bilinear interpolation of a centred field.
pub fn sample_bilinear(field: &Array2<Complex64>, grid: &Grid, u: [f64; 2], index: usize) -> Result<Complex64> {
    let n = grid.n();
    let fi = grid.fractional_index(u[0]);
    let fj = grid.fractional_index(u[1]);
    let outside = || Error::NodeOutsideGrid {
        index,
        u: u[0],
        v: u[1],
    };
    if !(fi >= 0.0 && fj >= 0.0 && fi <= (n - 1) as f64 && fj <= (n - 1) as f64) {
        return Err(outside());
    }
    let i0 = (fi.floor() as usize).min(n - 2);
    let j0 = (fj.floor() as usize).min(n - 2);
    let (ti, tj) = (fi - i0 as f64, fj - j0 as f64);
    Ok(field[(i0, j0)] * ((1.0 - ti) * (1.0 - tj))
        + field[(i0 + 1, j0)] * (ti * (1.0 - tj))
        + field[(i0, j0 + 1)] * ((1.0 - ti) * tj)
        + field[(i0 + 1, j0 + 1)] * (ti * tj))
}

/// Real and imaginary scaling from the transform of `image`.
pub fn scaling_from_image(image: &ImageGrid, nodes: &NodeSet, domain: &FrequencyDomain) -> Result<ComplexScaling> {
    domain.check_shape(image.values().dim())?;
    let grid = domain.grid();
    let spectrum = SpectralTransform::new(grid.clone()).forward(image.values())?;
    let nodal = (0..nodes.len())
        .map(|i| sample_bilinear(&spectrum, grid, nodes.point2(i), i))
        .collect::<Result<Vec<_>>>()?;
    let re =
        ScalingSamples::new(nodal.iter().map(|z| z.re).collect())?.with_grid_field(spectrum.mapv(|z| z.re), domain)?;
    let im =
        ScalingSamples::new(nodal.iter().map(|z| z.im).collect())?.with_grid_field(spectrum.mapv(|z| z.im), domain)?;
    Ok(ComplexScaling { re, im })
}

/// Channels ordered from high to low energy with their data and the image
/// that seeds the first scaling.
#[derive(Debug, Clone)]
pub struct ChannelSequence {
    channels: Vec<EnergyChannel>,
    visibilities: Vec<VisibilitySet>,
    trigger: ImageGrid,
}

impl ChannelSequence {
    pub fn new(channels: Vec<EnergyChannel>, visibilities: Vec<VisibilitySet>, trigger: ImageGrid) -> Result<Self> {
        if channels.is_empty() || channels.len() != visibilities.len() {
            return Err(Error::Config(format!(
                "need one visibility set per channel, got {} channels and {} sets",
                channels.len(),
                visibilities.len()
            )));
        }
        if channels
            .windows(2)
            .any(|w| !(w[1].low() < w[0].low() && w[1].high() < w[0].high()))
        {
            return Err(Error::Config("channels must be strictly decreasing in energy".into()));
        }
        for (i, (c, v)) in channels.iter().zip(&visibilities).enumerate() {
            if v.channel().is_some_and(|vc| vc != *c) {
                return Err(Error::Config(format!(
                    "visibility set {i} is labelled with another channel"
                )));
            }
        }
        Ok(Self {
            channels,
            visibilities,
            trigger,
        })
    }

    pub fn channels(&self) -> &[EnergyChannel] {
        &self.channels
    }

    pub fn visibilities(&self) -> &[VisibilitySet] {
        &self.visibilities
    }

    pub fn trigger(&self) -> &ImageGrid {
        &self.trigger
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

/// Interpolant, initialization and Landweber run for one data set.
#[derive(Debug, Clone)]
pub struct ChannelReconstruction {
    pub interpolant: ComplexInterpolant,
    pub init: BandLimited,
    pub run: LandweberRun,
}

/// Interpolate, initialize on `D`, and iterate.
pub fn reconstruct_channel(
    vis: &VisibilitySet,
    scaling: &ComplexScaling,
    kernel: &KernelConfig,
    lw: &LandweberConfig,
    domain: &FrequencyDomain,
) -> Result<ChannelReconstruction> {
    vis.check_in_domain(domain)?;
    let interpolant = ComplexInterpolant::fit(vis.nodes(), scaling, kernel, vis.re(), vis.im())?;
    let field = interpolant.evaluate_on_grid(domain)?;
    let init = band_limited_init(&field, domain)?;
    let run = iterate(lw, &init, domain)?;
    Ok(ChannelReconstruction { interpolant, init, run })
}

/// Source of each channel's kernel scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingStrategy {
    /// Transform of the previous channel's image.
    Chained,
    /// Constant scaling: the plain radial kernel.
    Constant(f64),
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub channel: EnergyChannel,
    pub image: ImageGrid,
    /// `None` for the first channel, which passes the trigger through.
    pub reconstruction: Option<ChannelReconstruction>,
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub outputs: Vec<ChainOutput>,
    /// First channel's data reconstructed with the trigger's scaling; pairs
    /// with the second channel in the stability ledger.
    pub anchor: Option<ChannelReconstruction>,
}

impl ChainResult {
    pub fn images(&self) -> Vec<&ImageGrid> {
        self.outputs.iter().map(|o| &o.image).collect()
    }
}

fn scaling_for(
    strategy: ScalingStrategy,
    previous: &ImageGrid,
    nodes: &NodeSet,
    domain: &FrequencyDomain,
) -> Result<ComplexScaling> {
    match strategy {
        ScalingStrategy::Chained => scaling_from_image(previous, nodes, domain),
        ScalingStrategy::Constant(c) => Ok(ComplexScaling::constant(nodes.len(), c, domain)),
    }
}

/// Runs the chain from high to low energy. Errors carry the 1-based channel
/// index; the anchor run reports index 1.
pub fn chain_reconstruct(
    seq: &ChannelSequence,
    kernel: &KernelConfig,
    lw: &LandweberConfig,
    domain: &FrequencyDomain,
    strategy: ScalingStrategy,
) -> Result<ChainResult> {
    domain.check_shape(seq.trigger.values().dim())?;
    let mut outputs = vec![ChainOutput {
        channel: seq.channels[0],
        image: seq.trigger.clone(),
        reconstruction: None,
    }];
    if seq.len() == 1 {
        return Ok(ChainResult { outputs, anchor: None });
    }
    let first = &seq.visibilities[0];
    let anchor = scaling_for(strategy, &seq.trigger, first.nodes(), domain)
        .and_then(|s| reconstruct_channel(first, &s, kernel, lw, domain))
        .map_err(|e| e.in_channel(1))?;
    for l in 1..seq.len() {
        let vis = &seq.visibilities[l];
        let previous = &outputs[l - 1].image;
        let rec = scaling_for(strategy, previous, vis.nodes(), domain)
            .and_then(|s| reconstruct_channel(vis, &s, kernel, lw, domain))
            .map_err(|e| e.in_channel(l + 1))?;
        log::info!(
            "channel {}: {} steps ({}), interpolation residual {:.2e}",
            l + 1,
            rec.run.trace.len(),
            rec.run.trace.stop_reason.name(),
            rec.interpolant.residual()
        );
        outputs.push(ChainOutput {
            channel: seq.channels[l],
            image: rec.run.image.clone(),
            reconstruction: Some(rec),
        });
    }
    Ok(ChainResult {
        outputs,
        anchor: Some(anchor),
    })
}

/// Stability ledgers for every consecutive channel pair.
pub fn chain_ledgers(result: &ChainResult, lw: &LandweberConfig, domain: &FrequencyDomain) -> Result<Vec<Prop2Ledger>> {
    let Some(anchor) = &result.anchor else {
        return Ok(Vec::new());
    };
    let runs: Vec<&ChannelReconstruction> = std::iter::once(anchor)
        .chain(result.outputs.iter().skip(1).filter_map(|o| o.reconstruction.as_ref()))
        .collect();
    runs.windows(2)
        .enumerate()
        .map(|(l, w)| {
            prop2_ledger(lw, &w[0].init, &w[0].run.trace, &w[1].init, &w[1].run.trace, domain)
                .map_err(|e| e.in_channel(l + 2))
        })
        .collect()
}

/// Mean L₂ distance between consecutive images.
pub fn mean_cross_channel_variation(images: &[&ImageGrid]) -> Result<f64> {
    if images.len() < 2 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for w in images.windows(2) {
        total += w[1].distance(w[0])?;
    }
    Ok(total / (images.len() - 1) as f64)
}

/// Interpolation and stability bound terms for one synthetic instance.
#[derive(Debug, Clone)]
pub struct BoundReport {
    /// Bound terms for the real and imaginary parts.
    pub parts: [BoundTerms; 2],
    pub theorem1: Theorem1Terms,
    /// Largest relative nodal residual of the two interpolants.
    pub residual: f64,
}

impl BoundReport {
    pub fn interpolation_holds(&self) -> bool {
        self.parts.iter().all(BoundTerms::holds)
    }

    pub fn min_interpolation_slack(&self) -> f64 {
        self.parts[0].min_slack.min(self.parts[1].min_slack)
    }

    pub fn holds(&self) -> bool {
        self.interpolation_holds() && self.theorem1.holds()
    }
}

/// Interpolates the exact transform of `current` at `nodes` with the scaling
/// taken from `previous`, then evaluates the pointwise interpolation bound on
/// `D` and the image-space stability terms for the window-extended field.
/// The window constant is `window_c_rel` times the largest |P| on `D`.
pub fn bound_report(
    previous: &ImageGrid,
    current: &Phantom,
    nodes: &NodeSet,
    kernel: &KernelConfig,
    domain: &FrequencyDomain,
    window_c_rel: f64,
    window_width: f64,
) -> Result<BoundReport> {
    let grid = domain.grid();
    let scaling = scaling_from_image(previous, nodes, domain)?;
    let nodal: Vec<Complex64> = (0..nodes.len())
        .map(|i| current.transform_at(nodes.point2(i)))
        .collect();
    let g = Array2::from_shape_fn(grid.dim(), |(i, j)| current.transform_at(grid.cell_center(i, j)));
    let mut parts = Vec::with_capacity(2);
    let mut fields = Vec::with_capacity(2);
    let mut residual: f64 = 0.0;
    for (samples, pick) in [(&scaling.re, 0usize), (&scaling.im, 1usize)] {
        let part = |z: &Complex64| if pick == 0 { z.re } else { z.im };
        let data: Vec<f64> = nodal.iter().map(part).collect();
        let g_part = g.map(part);
        let field = samples
            .grid_field()
            .ok_or_else(|| Error::Unsupported("scaling has no grid field".into()))?;
        let interp = Interpolant::fit(nodes, samples, kernel, &data)?;
        let cards = cardinal_weights(&assemble_gram(nodes, samples, kernel)?)?;
        parts.push(interp_bound_terms(Some(&g_part), field, &interp, &cards, domain)?);
        fields.push(evaluate_on_grid(&interp, domain, field)?);
        residual = residual.max(interp.residual());
    }
    let p = Array2::from_shape_fn(grid.dim(), |ix| Complex64::new(fields[0][ix], fields[1][ix]));
    let max_abs = domain
        .inside_cells()
        .into_iter()
        .map(|ix| p[ix].norm())
        .fold(0.0, f64::max);
    let window = WindowConfig::new(
        (window_c_rel * max_abs).max(f64::MIN_POSITIVE),
        Taper::Gaussian,
        window_width,
    )?;
    let extended = window_extend_complex(&p, domain, &window)?;
    let theorem1 = theorem1_terms(Some(&g), &extended, domain, &SpectralTransform::new(grid.clone()))?;
    let parts: [BoundTerms; 2] = parts.try_into().expect("two parts");
    Ok(BoundReport {
        parts,
        theorem1,
        residual,
    })
}

/// Noise settings for a synthetic sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Per-channel sigma as a fraction of the channel's largest |V|.
    pub relative_sigma: f64,
    pub seed: u64,
    /// When false, sigma is recorded but the data stay exact.
    pub enabled: bool,
}

/// Data and ground truth for every channel of a synthetic sequence.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub channels: Vec<EnergyChannel>,
    pub weights: Vec<f64>,
    pub visibilities: Vec<VisibilitySet>,
    pub truth: Vec<ImageGrid>,
}

/// Channel `ℓ` carries the phantom scaled by `g(0, β_ℓ)` with `β_ℓ` the
/// channel midpoint. Channel noise seeds are drawn from `noise.seed`.
pub fn synthetic_sequence(
    phantom: &Phantom,
    nodes: &NodeSet,
    channels: &[EnergyChannel],
    model: &ParametricModel,
    grid: &Grid,
    noise: NoiseSpec,
) -> Result<SyntheticSequence> {
    if !(noise.relative_sigma.is_finite() && noise.relative_sigma > 0.0) {
        return Err(Error::Config(format!(
            "relative noise sigma must be positive, got {}",
            noise.relative_sigma
        )));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut out = SyntheticSequence {
        channels: channels.to_vec(),
        weights: Vec::new(),
        visibilities: Vec::new(),
        truth: Vec::new(),
    };
    for (l, ch) in channels.iter().enumerate() {
        let weight = forward_channel(model, [0.0, 0.0], ch.midpoint())
            .map_err(|e| e.in_channel(l + 1))?
            .value;
        let scaled = phantom.scaled(weight).map_err(|e| e.in_channel(l + 1))?;
        let clean = phantom_visibilities(&scaled, nodes, Some(*ch), 1.0)?;
        let level = noise.relative_sigma * clean.max_abs();
        let clean = clean.with_uniform_sigma(level.max(f64::MIN_POSITIVE))?;
        let sub_seed: u64 = seeds.random();
        let vis = if noise.enabled {
            add_noise(&clean, sub_seed)
        } else {
            clean
        };
        out.weights.push(weight);
        out.visibilities.push(vis);
        out.truth.push(phantom_to_image(&scaled, grid));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{default_channels, default_nodes};
    use crate::freq_domain::{build_mask, DomainShape};
    use crate::landweber::StopTolerance;
    use proptest::prelude::*;

    fn analytic_model(b_max: f64) -> ParametricModel {
        ParametricModel::new(
            Arc::new(ExpSignal),
            Arc::new(UnitStep),
            UNIT_PREFACTOR_DISTANCE,
            b_max,
            64,
        )
        .unwrap()
    }

    #[test]
    fn unit_prefactor_distance() {
        assert!((analytic_model(60.0).prefactor() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_rules() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15 && (w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(8);
        // exact for degree 15
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_cross_section_gives_zero() {
        let m = ParametricModel::new(
            Arc::new(ExpSignal),
            Arc::new(FnCrossSection(|_, _| 0.0, 0.0)),
            1.0,
            10.0,
            8,
        )
        .unwrap();
        assert_eq!(forward_channel(&m, [0.0, 0.0], 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn analytic_channel_value() {
        let m = analytic_model(60.0);
        for beta in [0.0, 0.5, 3.0, 12.0] {
            let v = forward_channel(&m, [1.0, 2.0], beta).unwrap();
            assert!((v.value - (-beta).exp()).abs() < 1e-10, "{beta}: {}", v.value);
            assert!(v.converged);
            assert!(v.tail_estimate < 1e-20);
        }
        assert!(forward_channel(&m, [0.0, 0.0], 60.0).is_err());
    }

    #[test]
    fn default_model_matches_fine_trapezoid() {
        let m = ParametricModel::default_surrogate();
        for beta in [5.0, 13.0, 26.5] {
            let v = forward_channel(&m, [0.0, 0.0], beta).unwrap();
            let n = 10 * 64 * PANEL_ORDER * 100;
            let h = (m.b_max() - beta) / n as f64;
            let f = |b: f64| (1.0 + b).powi(-3) * (-(b - beta)).exp();
            let trap = h * (0.5 * f(beta) + (1..n).map(|k| f(beta + k as f64 * h)).sum::<f64>() + 0.5 * f(m.b_max()));
            assert!((v.value - trap).abs() <= 1e-8 * trap, "{beta}: {} vs {trap}", v.value);
        }
    }

    #[test]
    fn lowering_b_min_below_beta_changes_nothing() {
        let m = ParametricModel::default_surrogate();
        let base = forward_channel(&m, [0.0, 0.0], 9.0).unwrap().value;
        for b_min in [4.5, 2.25, 0.0] {
            let v = forward_channel(&m.clone().with_b_min(b_min), [0.0, 0.0], 9.0)
                .unwrap()
                .value;
            assert_eq!(v, base);
        }
    }

    #[test]
    fn continuity_of_analytic_model() {
        let m = analytic_model(60.0);
        let same = continuity_gap(&m, [0.0, 0.0], 2.0, 2.0).unwrap();
        assert_eq!((same.gap, same.bound), (0.0, 0.0));
        for (b1, b2) in [(1.0, 1.5), (3.0, 2.0), (0.1, 7.0)] {
            let r = continuity_gap(&m, [0.0, 0.0], b1, b2).unwrap();
            let exact = (f64::exp(-b1) - f64::exp(-b2)).abs();
            assert!((r.gap - exact).abs() < 1e-10);
            assert!(r.gap <= (b1 - b2).abs());
            assert!(r.holds(), "{r:?}");
        }
    }

    fn slope(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).unzip();
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        cov / var
    }

    #[test]
    fn surrogate_gap_decays_linearly() {
        let m = ParametricModel::default_surrogate();
        let spacings: Vec<f64> = (1..=10).map(|k| 2f64.powi(-k)).collect();
        let gaps: Vec<f64> = spacings
            .iter()
            .map(|d| {
                let r = continuity_gap(&m, [0.0, 0.0], 10.0, 10.0 + d).unwrap();
                assert!(r.holds(), "{r:?}");
                r.gap
            })
            .collect();
        assert!(slope(&spacings, &gaps) >= 0.9);
    }

    fn default_setup() -> (Grid, FrequencyDomain) {
        let grid = Grid::new(128, 1000.0 / 0.75).unwrap();
        let domain = build_mask(DomainShape::Disk { radius: 1000.0 }, grid.clone()).unwrap();
        (grid, domain)
    }

    #[test]
    fn scaling_of_trivial_images() {
        let (grid, domain) = default_setup();
        let nodes = default_nodes();
        let zero = scaling_from_image(&ImageGrid::zeros(grid.clone()), &nodes, &domain).unwrap();
        assert!(zero
            .re
            .nodal_values()
            .iter()
            .chain(zero.im.nodal_values())
            .all(|v| *v == 0.0));
        let one = ImageGrid::from_real(&Array2::from_elem(grid.dim(), 1.0), grid.clone()).unwrap();
        let s = scaling_from_image(&one, &nodes, &domain).unwrap();
        let dc = (grid.n() * grid.n()) as f64 * grid.pixel_area();
        assert!(s.re.nodal_values().iter().all(|v| v.abs() < 1e-12 * dc));
        let at_origin = NodeSet::from_points(&[[0.0, 0.0]]).unwrap();
        let s0 = scaling_from_image(&one, &at_origin, &domain).unwrap();
        assert!((s0.re.nodal_values()[0] - dc).abs() < 1e-12 * dc);
        let field = s.re.grid_field().unwrap();
        for ((i, j), v) in field.indexed_iter() {
            if !domain.inside(i, j) {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn scaling_matches_analytic_transform_on_inner_circles() {
        let (grid, domain) = default_setup();
        let phantom = Phantom::from_pixel_units(&[(1.0, 1.0, [0.0, 0.0])], &grid, 1.0).unwrap();
        let nodes = default_nodes();
        let s = scaling_from_image(&phantom_to_image(&phantom, &grid), &nodes, &domain).unwrap();
        for i in 0..68 {
            let exact = phantom.transform_at(nodes.point2(i));
            let got = Complex64::new(s.re.nodal_values()[i], s.im.nodal_values()[i]);
            assert!(
                (got - exact).norm() <= 1e-3 * exact.norm(),
                "node {i}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn nodes_off_the_grid_are_rejected() {
        let (grid, domain) = default_setup();
        let far = NodeSet::from_points(&[[0.0, 0.0], [2000.0, 0.0]]).unwrap();
        assert!(matches!(
            scaling_from_image(&ImageGrid::zeros(grid), &far, &domain),
            Err(Error::NodeOutsideGrid { index: 1, .. })
        ));
    }

    fn small_sequence(n_channels: usize, flux: f64) -> (Grid, FrequencyDomain, SyntheticSequence) {
        let (grid, domain) = default_setup();
        let phantom = Phantom::default_on(&grid, flux).unwrap();
        let channels = default_channels()[..n_channels].to_vec();
        let seq = synthetic_sequence(
            &phantom,
            &default_nodes(),
            &channels,
            &ParametricModel::default_surrogate(),
            &grid,
            NoiseSpec {
                relative_sigma: 0.03,
                seed: 5,
                enabled: true,
            },
        )
        .unwrap();
        (grid, domain, seq)
    }

    #[test]
    fn sequence_validation() {
        let (grid, _, s) = small_sequence(2, 1e3);
        let trig = ImageGrid::zeros(grid);
        let rev: Vec<_> = s.channels.iter().rev().copied().collect();
        assert!(ChannelSequence::new(rev, s.visibilities.clone(), trig.clone()).is_err());
        assert!(ChannelSequence::new(s.channels.clone(), s.visibilities[..1].to_vec(), trig.clone()).is_err());
        assert!(ChannelSequence::new(s.channels.clone(), s.visibilities.clone(), trig).is_ok());
    }

    #[test]
    fn single_channel_chain_passes_trigger_through() {
        let (_, domain, s) = small_sequence(1, 1e3);
        let seq = ChannelSequence::new(s.channels.clone(), s.visibilities.clone(), s.truth[0].clone()).unwrap();
        let out = chain_reconstruct(
            &seq,
            &KernelConfig::gaussian(0.02).unwrap(),
            &LandweberConfig::default(),
            &domain,
            ScalingStrategy::Chained,
        )
        .unwrap();
        assert_eq!(out.outputs.len(), 1);
        assert_eq!(out.outputs[0].image, s.truth[0]);
        assert!(out.anchor.is_none());
        assert!(chain_ledgers(&out, &LandweberConfig::default(), &domain)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn constant_scaling_chain_equals_independent_runs() {
        let (_, domain, s) = small_sequence(3, 2e5);
        let seq = ChannelSequence::new(s.channels.clone(), s.visibilities.clone(), s.truth[0].clone()).unwrap();
        let kernel = KernelConfig::gaussian(0.02).unwrap();
        let lw = LandweberConfig::default();
        let chain = chain_reconstruct(&seq, &kernel, &lw, &domain, ScalingStrategy::Constant(0.0)).unwrap();
        for l in 1..3 {
            let alone = reconstruct_channel(
                &s.visibilities[l],
                &ComplexScaling::plain(248, &domain),
                &kernel,
                &lw,
                &domain,
            )
            .unwrap();
            assert_eq!(chain.outputs[l].image, alone.run.image);
            assert!(chain.outputs[l].image.min_real() >= 0.0);
        }
    }

    #[test]
    fn chained_ledgers_hold() {
        let (_, domain, s) = small_sequence(3, 2e5);
        let seq = ChannelSequence::new(s.channels.clone(), s.visibilities.clone(), s.truth[0].clone()).unwrap();
        let kernel = KernelConfig::gaussian(0.02).unwrap();
        let lw = LandweberConfig::new(0.2, StopTolerance::Relative(1e-3), 5000).unwrap();
        let chain = chain_reconstruct(&seq, &kernel, &lw, &domain, ScalingStrategy::Chained).unwrap();
        let ledgers = chain_ledgers(&chain, &lw, &domain).unwrap();
        assert_eq!(ledgers.len(), 2);
        for l in &ledgers {
            assert!(l.holds());
        }
        for o in &chain.outputs {
            assert!(o.image.min_real() >= 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn surrogate_continuity_bound_holds(b1 in 0.0f64..40.0, d in 1e-4f64..20.0, ux in -500.0f64..500.0) {
            let m = ParametricModel::default_surrogate();
            let r = continuity_gap(&m, [ux, 0.0], b1, b1 + d).unwrap();
            prop_assert!(r.holds(), "{:?}", r);
        }

        #[test]
        fn analytic_gap_is_exact(b1 in 0.0f64..20.0, d in 0.0f64..10.0) {
            let r = continuity_gap(&analytic_model(60.0), [0.0, 0.0], b1, b1 + d).unwrap();
            prop_assert!((r.gap - (f64::exp(-b1) - f64::exp(-b1 - d)).abs()).abs() < 1e-10);
        }
    }
}
