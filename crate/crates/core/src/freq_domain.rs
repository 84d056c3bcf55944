//! Frequency-plane geometry: the evaluation grid, the compact support `D`
//! with its indicator mask, the windowed extension outside `D`, and
//! region-restricted L₂ norms.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::SpectralTransform;

/// Square `N×N` grid of frequency cells of side `Δu = 2U/N`.
///
/// Cell `k` on either axis is centred at `(k − N/2)·Δu`, so the origin is a
/// cell centre and the centres span `[−U, U − Δu]`. The paired image grid
/// has pixel size `Δx = 1/(2U)` with pixel `j` centred at `(j − N/2)·Δx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::Config(format!("grid size must be even and at least 2, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Config(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self { n, half_width })
    }

    /// Grid whose half-width puts `outer_radius` at `fill · U`.
    pub fn for_outer_radius(n: usize, outer_radius: f64, fill: f64) -> Result<Self> {
        if !(fill > 0.0 && fill <= 1.0) {
            return Err(Error::Config(format!("fill fraction must lie in (0, 1], got {fill}")));
        }
        Self::new(n, outer_radius / fill)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.n, self.n)
    }

    /// `U`
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// `Δu`
    pub fn cell_size(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        let du = self.cell_size();
        du * du
    }

    /// `Δx = 1/(2U)`
    pub fn pixel_size(&self) -> f64 {
        0.5 / self.half_width
    }

    pub fn pixel_area(&self) -> f64 {
        let dx = self.pixel_size();
        dx * dx
    }

    /// Frequency coordinate of cell index `k`.
    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.cell_size()
    }

    /// Image coordinate of pixel index `j`.
    #[inline]
    pub fn image_coord(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.pixel_size()
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    /// Fractional cell index of a frequency coordinate.
    #[inline]
    pub fn fractional_index(&self, u: f64) -> f64 {
        u / self.cell_size() + (self.n / 2) as f64
    }

    pub fn check_shape(&self, found: (usize, usize)) -> Result<()> {
        if found != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

/// Shape of the compact frequency support.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainShape {
    Disk {
        radius: f64,
    },
    /// Union of rings `(r_inner, r_outer)`.
    Annuli(Vec<(f64, f64)>),
    /// Convex hull; vertices are stored counter-clockwise.
    Hull(Vec<[f64; 2]>),
}

impl DomainShape {
    /// Rings of half-width `half_width` centred on each radius, overlapping
    /// rings merged.
    pub fn rings_around(radii: &[f64], half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::Config("ring half-width must be positive".into()));
        }
        let mut rings: Vec<(f64, f64)> = radii
            .iter()
            .map(|&r| ((r - half_width).max(0.0), r + half_width))
            .collect();
        rings.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(rings.len());
        for ring in rings {
            match merged.last_mut() {
                Some(last) if ring.0 <= last.1 => last.1 = last.1.max(ring.1),
                _ => merged.push(ring),
            }
        }
        Ok(DomainShape::Annuli(merged))
    }

    /// Convex hull of a point set.
    pub fn hull_of(points: &[[f64; 2]]) -> Result<Self> {
        let hull = convex_hull(points);
        if hull.len() < 3 {
            return Err(Error::Config("convex hull of the point set has empty interior".into()));
        }
        Ok(DomainShape::Hull(hull))
    }

    fn validate(&self) -> Result<()> {
        match self {
            DomainShape::Disk { radius } if !(*radius >= 0.0 && radius.is_finite()) => {
                Err(Error::Config(format!("disk radius must be nonnegative, got {radius}")))
            }
            DomainShape::Annuli(rings) => {
                for &(a, b) in rings {
                    if !(a >= 0.0 && b > a && b.is_finite()) {
                        return Err(Error::Config(format!("invalid annulus ({a}, {b})")));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Largest radius reached by the shape (`u_max`).
    pub fn max_radius(&self) -> f64 {
        match self {
            DomainShape::Disk { radius } => *radius,
            DomainShape::Annuli(rings) => rings.iter().map(|r| r.1).fold(0.0, f64::max),
            DomainShape::Hull(v) => v.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max),
        }
    }

    /// Open-set membership used for grid cells: a cell belongs to `D` iff its
    /// centre lies strictly inside the shape.
    pub fn contains_strict(&self, u: [f64; 2]) -> bool {
        match self {
            DomainShape::Disk { radius } => u[0].hypot(u[1]) < *radius,
            DomainShape::Annuli(rings) => {
                let rho = u[0].hypot(u[1]);
                rings.iter().any(|&(a, b)| rho > a && rho < b)
            }
            DomainShape::Hull(v) => edges(v).all(|(p, q)| cross(p, q, u) > 0.0),
        }
    }

    /// Closed-set membership with a relative tolerance, used for nodes.
    pub fn contains_closed(&self, u: [f64; 2]) -> bool {
        let scale = self.max_radius().max(f64::MIN_POSITIVE);
        self.distance(u) <= 1e-12 * scale
    }

    /// Euclidean distance from `u` to the shape (zero inside).
    pub fn distance(&self, u: [f64; 2]) -> f64 {
        match self {
            DomainShape::Disk { radius } => (u[0].hypot(u[1]) - radius).max(0.0),
            DomainShape::Annuli(rings) => {
                let rho = u[0].hypot(u[1]);
                rings
                    .iter()
                    .map(|&(a, b)| (a - rho).max(rho - b).max(0.0))
                    .fold(f64::INFINITY, f64::min)
            }
            DomainShape::Hull(v) => {
                if edges(v).all(|(p, q)| cross(p, q, u) >= 0.0) {
                    0.0
                } else {
                    edges(v)
                        .map(|(p, q)| segment_distance(p, q, u))
                        .fold(f64::INFINITY, f64::min)
                }
            }
        }
    }
}

fn edges(v: &[[f64; 2]]) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    (0..v.len()).map(move |i| (v[i], v[(i + 1) % v.len()]))
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segment_distance(p: [f64; 2], q: [f64; 2], u: [f64; 2]) -> f64 {
    let d = [q[0] - p[0], q[1] - p[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((u[0] - p[0]) * d[0] + (u[1] - p[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (u[0] - p[0] - t * d[0]).hypot(u[1] - p[1] - t * d[1])
}

/// Andrew's monotone chain; returns counter-clockwise vertices without
/// collinear points.
fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// The compact support `D` discretized on a grid.
#[derive(Debug, Clone)]
pub struct FrequencyDomain {
    shape: DomainShape,
    grid: Grid,
    mask: Array2<bool>,
}

/// Builds the indicator mask `χ_D` of `shape` on `grid`.
pub fn build_mask(shape: DomainShape, grid: Grid) -> Result<FrequencyDomain> {
    shape.validate()?;
    let u_max = shape.max_radius();
    if grid.half_width() < u_max {
        return Err(Error::Config(format!(
            "grid half-width {} is smaller than the support radius {u_max}",
            grid.half_width()
        )));
    }
    let mask = Array2::from_shape_fn(grid.dim(), |(i, j)| shape.contains_strict(grid.cell_center(i, j)));
    Ok(FrequencyDomain { shape, grid, mask })
}

impl FrequencyDomain {
    /// Support covering the whole grid.
    pub fn full(grid: Grid) -> Self {
        let mask = Array2::from_elem(grid.dim(), true);
        let u = grid.half_width();
        let shape = DomainShape::Hull(vec![[-u, -u], [u, -u], [u, u], [-u, u]]);
        FrequencyDomain { shape, grid, mask }
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    #[inline]
    pub fn inside(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)]
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `μ(D)` by cell counting.
    pub fn measure(&self) -> f64 {
        self.grid.cell_area() * self.cell_count() as f64
    }

    pub fn contains_point(&self, u: [f64; 2]) -> bool {
        self.shape.contains_closed(u)
    }

    pub fn check_shape(&self, found: (usize, usize)) -> Result<()> {
        self.grid.check_shape(found)
    }

    /// `field · χ_D`
    pub fn apply_mask<T: Clone + Default>(&self, field: &Array2<T>) -> Array2<T> {
        let mut out = field.clone();
        Zip::from(&mut out).and(&self.mask).for_each(|v, &m| {
            if !m {
                *v = T::default();
            }
        });
        out
    }

    /// Cell centres inside `D`, row-major.
    pub fn inside_cells(&self) -> Vec<(usize, usize)> {
        self.mask
            .indexed_iter()
            .filter_map(|(ix, &m)| m.then_some(ix))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Taper {
    #[default]
    Gaussian,
    Cosine,
}

/// Extension outside `D`: a positive constant times a taper that decays with
/// the distance to `∂D` and equals one on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    c_outside: f64,
    taper: Taper,
    width: f64,
}

impl WindowConfig {
    pub fn new(c_outside: f64, taper: Taper, width: f64) -> Result<Self> {
        if !(c_outside > 0.0 && c_outside.is_finite()) {
            return Err(Error::Config(format!(
                "outside constant must be positive, got {c_outside}"
            )));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Config(format!("taper width must be positive, got {width}")));
        }
        Ok(Self {
            c_outside,
            taper,
            width,
        })
    }

    pub fn c_outside(&self) -> f64 {
        self.c_outside
    }

    /// Taper value at distance `d ≥ 0` from the support.
    pub fn taper(&self, d: f64) -> f64 {
        let t = d / self.width;
        match self.taper {
            Taper::Gaussian => (-0.5 * t * t).exp(),
            Taper::Cosine if t < 1.0 => 0.5 * (1.0 + (std::f64::consts::PI * t).cos()),
            Taper::Cosine => 0.0,
        }
    }
}

/// Keeps `field` on `D` and replaces it by `c · φ₁(dist(u, D))` elsewhere.
pub fn window_extend(field: &Array2<f64>, domain: &FrequencyDomain, window: &WindowConfig) -> Result<Array2<f64>> {
    domain.check_shape(field.dim())?;
    let grid = domain.grid();
    Ok(Array2::from_shape_fn(grid.dim(), |(i, j)| {
        if domain.inside(i, j) {
            field[(i, j)]
        } else {
            window.c_outside * window.taper(domain.shape.distance(grid.cell_center(i, j)))
        }
    }))
}

/// Complex version: the real part takes the positive outside constant, the
/// imaginary part is tapered from zero (i.e. stays zero outside).
pub fn window_extend_complex(
    field: &Array2<Complex64>,
    domain: &FrequencyDomain,
    window: &WindowConfig,
) -> Result<Array2<Complex64>> {
    let re = window_extend(&field.mapv(|z| z.re), domain, window)?;
    Ok(Array2::from_shape_fn(field.dim(), |(i, j)| {
        let im = if domain.inside(i, j) { field[(i, j)].im } else { 0.0 };
        Complex64::new(re[(i, j)], im)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Domain,
    Complement,
    All,
}

pub trait SquaredMagnitude: Copy {
    fn squared_magnitude(self) -> f64;
}

impl SquaredMagnitude for f64 {
    #[inline]
    fn squared_magnitude(self) -> f64 {
        self * self
    }
}

impl SquaredMagnitude for Complex64 {
    #[inline]
    fn squared_magnitude(self) -> f64 {
        self.norm_sqr()
    }
}

/// `sqrt(Δu² Σ_{cells in region} |field|²)`
pub fn l2_norm<T: SquaredMagnitude>(field: &Array2<T>, region: Region, domain: &FrequencyDomain) -> Result<f64> {
    domain.check_shape(field.dim())?;
    let mut acc = 0.0;
    Zip::from(field).and(domain.mask()).for_each(|&v, &m| {
        let take = match region {
            Region::Domain => m,
            Region::Complement => !m,
            Region::All => true,
        };
        if take {
            acc += v.squared_magnitude();
        }
    });
    Ok((domain.grid().cell_area() * acc).sqrt())
}

/// Terms of the image-space stability estimate, measured on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Terms {
    /// `sup |g − P| · sqrt(μ(D))`
    pub nu: f64,
    /// `‖g − P‖` over the complement of `D`.
    pub tail: f64,
    /// `‖f − f̄‖` computed in image space.
    pub lhs_proxy: f64,
    /// `‖g − P‖` over `D`.
    pub domain_term: f64,
}

impl Theorem1Terms {
    pub fn slack(&self) -> f64 {
        self.nu + self.tail - self.lhs_proxy
    }

    pub fn holds(&self) -> bool {
        self.lhs_proxy <= self.nu + self.tail + 1e-10
    }
}

/// Compares a ground-truth spectrum `g` with an extended interpolant field.
pub fn theorem1_terms(
    g_field: Option<&Array2<Complex64>>,
    interpolant_field: &Array2<Complex64>,
    domain: &FrequencyDomain,
    transform: &SpectralTransform,
) -> Result<Theorem1Terms> {
    let g = g_field.ok_or_else(|| Error::Unsupported("stability terms need a ground-truth spectrum".into()))?;
    domain.check_shape(g.dim())?;
    domain.check_shape(interpolant_field.dim())?;
    let diff = g - interpolant_field;
    let sup = diff.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let nu = sup * domain.measure().sqrt();
    let tail = l2_norm(&diff, Region::Complement, domain)?;
    let domain_term = l2_norm(&diff, Region::Domain, domain)?;
    let f = transform.inverse(g)?;
    let f_bar = transform.inverse(interpolant_field)?;
    let grid = domain.grid();
    let lhs_proxy = ((&f - &f_bar).iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.pixel_area()).sqrt();
    Ok(Theorem1Terms {
        nu,
        tail,
        lhs_proxy,
        domain_term,
    })
}
