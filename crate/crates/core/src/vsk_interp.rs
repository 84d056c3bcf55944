//! Variably scaled kernel interpolation: Gram assembly, the regularized
//! symmetric solve, evaluation, cardinal functions and Lebesgue functions,
//! and the pointwise interpolation error bound.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::freq_domain::FrequencyDomain;
use crate::kernels::{squared_distance, KernelConfig, ScalingSamples};

/// Default minimum separation between nodes, in frequency units.
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-9;

/// Diagonal shifts tried, as multiples of the mean diagonal, when the plain
/// factorization fails.
pub const REGULARIZATION_LADDER: [f64; 3] = [1e-12, 1e-10, 1e-8];

/// Scattered interpolation nodes in `ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    dim: usize,
    coords: Vec<f64>,
}

impl NodeSet {
    /// Builds a node set from row-major coordinates; rejects pairs closer
    /// than `min_separation`.
    pub fn new(dim: usize, coords: Vec<f64>, min_separation: f64) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("node coordinates must be finite".into()));
        }
        let set = Self { dim, coords };
        if let Some((i, j)) = set.closest_violation(min_separation) {
            return Err(Error::Domain(format!(
                "nodes {i} and {j} are closer than the minimum separation {min_separation:e}"
            )));
        }
        Ok(set)
    }

    pub fn from_points(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(2, points.iter().flatten().copied().collect(), DEFAULT_MIN_SEPARATION)
    }

    fn closest_violation(&self, min_separation: f64) -> Option<(usize, usize)> {
        let limit = min_separation * min_separation;
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .find(|&(i, j)| squared_distance(self.point(i), self.point(j)) < limit)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Planar view; panics if the set is not two-dimensional.
    pub fn point2(&self, i: usize) -> [f64; 2] {
        assert_eq!(self.dim, 2, "planar access to a {}-dimensional node set", self.dim);
        [self.coords[2 * i], self.coords[2 * i + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// Groups of indices whose points lie within `min_separation` of each other
/// (single linkage), in order of first appearance.
pub fn close_point_groups(points: &[[f64; 2]], min_separation: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let limit = min_separation * min_separation;
    for i in 0..n {
        for j in i + 1..n {
            if squared_distance(&points[i], &points[j]) < limit {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Symmetric kernel matrix at the augmented nodes.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    matrix: DMatrix<f64>,
    /// Pairs of nodes whose augmented points coincide; the matrix is then
    /// singular.
    coincident: Vec<(usize, usize)>,
}

impl GramMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        Ok(Self {
            matrix,
            coincident: Vec::new(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn coincident_pairs(&self) -> &[(usize, usize)] {
        &self.coincident
    }

    pub fn is_singular_suspect(&self) -> bool {
        !self.coincident.is_empty()
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

fn check_scaling(nodes: &NodeSet, scaling: &[f64]) -> Result<()> {
    if scaling.len() != nodes.len() {
        return Err(Error::DimensionMismatch {
            expected: nodes.len(),
            found: scaling.len(),
        });
    }
    Ok(())
}

/// `K_ij = κ((u_i, s_i), (u_j, s_j))`
pub fn assemble_gram(nodes: &NodeSet, scaling: &ScalingSamples, kernel: &KernelConfig) -> Result<GramMatrix> {
    let s = scaling.nodal_values();
    check_scaling(nodes, s)?;
    let n = nodes.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let ds = s[i] - s[j];
                    kernel.profile_sq(squared_distance(nodes.point(i), nodes.point(j)) + ds * ds)
                })
                .collect()
        })
        .collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let mut coincident = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let ds = s[i] - s[j];
            if squared_distance(nodes.point(i), nodes.point(j)) + ds * ds == 0.0 {
                coincident.push((i, j));
            }
        }
    }
    if !coincident.is_empty() {
        log::warn!(
            "{} coincident augmented node pairs; Gram matrix is singular",
            coincident.len()
        );
    }
    Ok(GramMatrix { matrix, coincident })
}

/// Gram matrix of the plain radial kernel, `K_ij = φ(‖u_i − u_j‖)`.
pub fn assemble_radial_gram(nodes: &NodeSet, kernel: &KernelConfig) -> DMatrix<f64> {
    let n = nodes.len();
    DMatrix::from_fn(n, n, |i, j| {
        kernel.profile(squared_distance(nodes.point(i), nodes.point(j)).sqrt())
    })
}

/// Cholesky factor of a Gram matrix, possibly after a diagonal shift.
#[derive(Clone)]
pub struct GramFactor {
    cholesky: Cholesky<f64, Dyn>,
    regularization: Option<f64>,
}

impl std::fmt::Debug for GramFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GramFactor")
            .field("n", &self.cholesky.l_dirty().nrows())
            .field("regularization", &self.regularization)
            .finish()
    }
}

impl GramFactor {
    /// Multiplier `λ` of the mean diagonal that was added, if any.
    pub fn regularization(&self) -> Option<f64> {
        self.regularization
    }

    pub fn solve(&self, rhs: &[f64]) -> DVector<f64> {
        self.cholesky.solve(&DVector::from_column_slice(rhs))
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.cholesky.inverse()
    }
}

/// Factorizes `gram`, walking the regularization ladder on failure.
pub fn factorize(gram: &GramMatrix) -> Result<GramFactor> {
    let k = gram.matrix();
    if let Some(cholesky) = Cholesky::new(k.clone()) {
        return Ok(GramFactor {
            cholesky,
            regularization: None,
        });
    }
    let n = k.nrows().max(1);
    let mean_diag = k.trace() / n as f64;
    for lambda in REGULARIZATION_LADDER {
        let mut shifted = k.clone();
        for i in 0..k.nrows() {
            shifted[(i, i)] += lambda * mean_diag;
        }
        if let Some(cholesky) = Cholesky::new(shifted) {
            log::warn!("Gram factorization needed diagonal regularization λ = {lambda:e}");
            return Ok(GramFactor {
                cholesky,
                regularization: Some(lambda),
            });
        }
    }
    let eig = k.clone().symmetric_eigenvalues();
    let max = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min = eig.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    Err(Error::IllConditioned {
        condition: if min > 0.0 { max / min } else { f64::INFINITY },
    })
}

/// Interpolation coefficients with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub coefficients: Vec<f64>,
    /// `‖Kc − g‖₂ / ‖g‖₂` against the unshifted matrix.
    pub residual: f64,
    pub regularization: Option<f64>,
}

fn relative_residual(k: &DMatrix<f64>, c: &DVector<f64>, data: &[f64]) -> f64 {
    let g = DVector::from_column_slice(data);
    let r = (k * c - &g).norm();
    let scale = g.norm();
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

fn solve_with(gram: &GramMatrix, factor: &GramFactor, data: &[f64]) -> Result<Solution> {
    if data.len() != gram.len() {
        return Err(Error::DimensionMismatch {
            expected: gram.len(),
            found: data.len(),
        });
    }
    let c = factor.solve(data);
    Ok(Solution {
        residual: relative_residual(gram.matrix(), &c, data),
        coefficients: c.as_slice().to_vec(),
        regularization: factor.regularization(),
    })
}

/// Solves `K c = g`.
pub fn solve_coefficients(gram: &GramMatrix, data: &[f64]) -> Result<Solution> {
    if data.len() != gram.len() {
        return Err(Error::DimensionMismatch {
            expected: gram.len(),
            found: data.len(),
        });
    }
    solve_with(gram, &factorize(gram)?, data)
}

/// A fitted real-valued VSK interpolant `P_g^s`.
#[derive(Debug, Clone)]
pub struct Interpolant {
    nodes: NodeSet,
    kernel: KernelConfig,
    scaling: Vec<f64>,
    data: Vec<f64>,
    solution: Solution,
}

impl Interpolant {
    pub fn fit(nodes: &NodeSet, scaling: &ScalingSamples, kernel: &KernelConfig, data: &[f64]) -> Result<Self> {
        let gram = assemble_gram(nodes, scaling, kernel)?;
        let solution = solve_coefficients(&gram, data)?;
        Ok(Self {
            nodes: nodes.clone(),
            kernel: *kernel,
            scaling: scaling.nodal_values().to_vec(),
            data: data.to_vec(),
            solution,
        })
    }

    /// Same nodes, kernel and scaling, new data.
    pub fn refit(&self, data: &[f64]) -> Result<Self> {
        let scaling = ScalingSamples::new(self.scaling.clone())?;
        Self::fit(&self.nodes, &scaling, &self.kernel, data)
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn nodal_scaling(&self) -> &[f64] {
        &self.scaling
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.solution.coefficients
    }

    pub fn residual(&self) -> f64 {
        self.solution.residual
    }

    pub fn regularization(&self) -> Option<f64> {
        self.solution.regularization
    }

    /// Kernel column `κ((u_i, s_i), (u, s_u))` for every node.
    fn kernel_column(&self, u: &[f64], s_u: f64) -> impl Iterator<Item = f64> + '_ {
        let u = u.to_vec();
        (0..self.nodes.len()).map(move |i| {
            let ds = self.scaling[i] - s_u;
            self.kernel
                .profile_sq(squared_distance(self.nodes.point(i), &u) + ds * ds)
        })
    }

    #[inline]
    fn eval_unchecked(&self, u: &[f64], s_u: f64) -> f64 {
        self.kernel_column(u, s_u)
            .zip(&self.solution.coefficients)
            .map(|(k, c)| c * k)
            .sum()
    }
}

/// `P(u) = Σ_i c_i κ((u_i, s_i), (u, s(u)))`; the caller supplies `s(u)`.
pub fn evaluate(interp: &Interpolant, u: &[f64], scaling_value_at_u: f64) -> Result<f64> {
    if u.len() != interp.nodes.dim() {
        return Err(Error::DimensionMismatch {
            expected: interp.nodes.dim(),
            found: u.len(),
        });
    }
    Ok(interp.eval_unchecked(u, scaling_value_at_u))
}

/// Evaluates on every grid cell inside `D`; zero elsewhere.
pub fn evaluate_on_grid(
    interp: &Interpolant,
    domain: &FrequencyDomain,
    scaling_field: &Array2<f64>,
) -> Result<Array2<f64>> {
    domain.check_shape(scaling_field.dim())?;
    if interp.nodes.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: interp.nodes.dim(),
        });
    }
    let grid = domain.grid();
    let cells = domain.inside_cells();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| interp.eval_unchecked(&grid.cell_center(i, j), scaling_field[(i, j)]))
        .collect();
    let mut out = Array2::zeros(grid.dim());
    for (&ix, v) in cells.iter().zip(values) {
        out[ix] = v;
    }
    Ok(out)
}

/// Coefficients of the cardinal (Lagrange) functions: column `j` solves
/// `K w = e_j`.
#[derive(Debug, Clone)]
pub struct CardinalSet {
    weights: DMatrix<f64>,
    regularization: Option<f64>,
}

impl CardinalSet {
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn regularization(&self) -> Option<f64> {
        self.regularization
    }

    pub fn len(&self) -> usize {
        self.weights.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.ncols() == 0
    }

    /// `φ_j(u)` for all `j`, given the kernel column at `u`.
    fn values_from_column(&self, column: &DVector<f64>) -> DVector<f64> {
        self.weights.tr_mul(column)
    }

    /// Cardinal function values at `u` for the interpolant's nodes and
    /// scaling.
    pub fn values_at(&self, interp: &Interpolant, u: &[f64], s_u: f64) -> Result<Vec<f64>> {
        if self.len() != interp.nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: interp.nodes.len(),
                found: self.len(),
            });
        }
        if u.len() != interp.nodes.dim() {
            return Err(Error::DimensionMismatch {
                expected: interp.nodes.dim(),
                found: u.len(),
            });
        }
        let col = DVector::from_iterator(self.len(), interp.kernel_column(u, s_u));
        Ok(self.values_from_column(&col).as_slice().to_vec())
    }
}

pub fn cardinal_weights(gram: &GramMatrix) -> Result<CardinalSet> {
    let factor = factorize(gram)?;
    Ok(CardinalSet {
        weights: factor.inverse(),
        regularization: factor.regularization(),
    })
}

/// `λ(u) = Σ_j |φ_j(u)|` at a single point.
pub fn lebesgue_at(cards: &CardinalSet, interp: &Interpolant, u: &[f64], s_u: f64) -> Result<f64> {
    Ok(cards.values_at(interp, u, s_u)?.iter().map(|v| v.abs()).sum())
}

/// Lebesgue function on every grid cell inside `D`; zero elsewhere.
pub fn lebesgue_function(
    cards: &CardinalSet,
    interp: &Interpolant,
    domain: &FrequencyDomain,
    scaling_field: &Array2<f64>,
) -> Result<Array2<f64>> {
    domain.check_shape(scaling_field.dim())?;
    if cards.len() != interp.nodes.len() {
        return Err(Error::DimensionMismatch {
            expected: interp.nodes.len(),
            found: cards.len(),
        });
    }
    let grid = domain.grid();
    let cells = domain.inside_cells();
    let n = cards.len();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let col = DVector::from_iterator(n, interp.kernel_column(&grid.cell_center(i, j), scaling_field[(i, j)]));
            cards.values_from_column(&col).iter().map(|v| v.abs()).sum()
        })
        .collect();
    let mut out = Array2::zeros(grid.dim());
    for (&ix, v) in cells.iter().zip(values) {
        out[ix] = v;
    }
    Ok(out)
}

/// Terms of the pointwise bound
/// `|g − P_g^s|(u) ≤ ‖g − P_s^s‖_∞ + ‖s − g‖_∞ λ(u)` on the grid.
#[derive(Debug, Clone)]
pub struct BoundTerms {
    /// `‖g − P_s^s‖_∞` over grid cells in `D`.
    pub sup_term: f64,
    /// `max_i |s_i − g_i|` over the nodes.
    pub nodal_inf_norm: f64,
    pub lambda_field: Array2<f64>,
    pub rhs_field: Array2<f64>,
    /// `|g − P_g^s|` on `D`.
    pub lhs_field: Array2<f64>,
    /// Smallest `rhs − lhs` over cells in `D`.
    pub min_slack: f64,
    /// Largest value of `λ` on the grid.
    pub lebesgue_constant: f64,
}

impl BoundTerms {
    pub fn holds(&self) -> bool {
        self.min_slack >= -1e-10
    }
}

/// Evaluates the bound for `interp` (which interpolates `g` with scaling `s`)
/// against a ground truth `g` known on the grid.
pub fn interp_bound_terms(
    g_field: Option<&Array2<f64>>,
    scaling_field: &Array2<f64>,
    interp: &Interpolant,
    cards: &CardinalSet,
    domain: &FrequencyDomain,
) -> Result<BoundTerms> {
    let g = g_field.ok_or_else(|| Error::Unsupported("interpolation bound needs a ground-truth field".into()))?;
    domain.check_shape(g.dim())?;
    let self_interp = interp.refit(interp.nodal_scaling())?;
    let p_self = evaluate_on_grid(&self_interp, domain, scaling_field)?;
    let p = evaluate_on_grid(interp, domain, scaling_field)?;
    let lambda_field = lebesgue_function(cards, interp, domain, scaling_field)?;

    let nodal_inf_norm = interp
        .nodal_scaling()
        .iter()
        .zip(interp.data())
        .map(|(s, g)| (s - g).abs())
        .fold(0.0, f64::max);
    let mut sup_term: f64 = 0.0;
    let mut lebesgue_constant: f64 = 0.0;
    for (i, j) in domain.inside_cells() {
        sup_term = sup_term.max((g[(i, j)] - p_self[(i, j)]).abs());
        lebesgue_constant = lebesgue_constant.max(lambda_field[(i, j)]);
    }
    let dim = domain.grid().dim();
    let mut rhs_field = Array2::zeros(dim);
    let mut lhs_field = Array2::zeros(dim);
    let mut min_slack = f64::INFINITY;
    for (i, j) in domain.inside_cells() {
        let rhs = sup_term + nodal_inf_norm * lambda_field[(i, j)];
        let lhs = (g[(i, j)] - p[(i, j)]).abs();
        rhs_field[(i, j)] = rhs;
        lhs_field[(i, j)] = lhs;
        min_slack = min_slack.min(rhs - lhs);
    }
    Ok(BoundTerms {
        sup_term,
        nodal_inf_norm,
        lambda_field,
        rhs_field,
        lhs_field,
        min_slack,
        lebesgue_constant,
    })
}

/// Scaling for complex data: one real scaling per part.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexScaling {
    pub re: ScalingSamples,
    pub im: ScalingSamples,
}

impl ComplexScaling {
    /// Constant (zero) scaling on both parts: the plain radial kernel.
    pub fn plain(n: usize, domain: &FrequencyDomain) -> Self {
        let s = ScalingSamples::constant_on(n, 0.0, domain);
        Self { re: s.clone(), im: s }
    }

    /// Same constant on both parts; identical to [`ComplexScaling::plain`]
    /// up to the cancelled augmented coordinate.
    pub fn constant(n: usize, value: f64, domain: &FrequencyDomain) -> Self {
        let s = ScalingSamples::constant_on(n, value, domain);
        Self { re: s.clone(), im: s }
    }
}

/// Complex data interpolated as independent real and imaginary problems.
#[derive(Debug, Clone)]
pub struct ComplexInterpolant {
    pub re: Interpolant,
    pub im: Interpolant,
    scaling: ComplexScaling,
}

impl ComplexInterpolant {
    pub fn fit(
        nodes: &NodeSet,
        scaling: &ComplexScaling,
        kernel: &KernelConfig,
        re: &[f64],
        im: &[f64],
    ) -> Result<Self> {
        Ok(Self {
            re: Interpolant::fit(nodes, &scaling.re, kernel, re)?,
            im: Interpolant::fit(nodes, &scaling.im, kernel, im)?,
            scaling: scaling.clone(),
        })
    }

    pub fn scaling(&self) -> &ComplexScaling {
        &self.scaling
    }

    /// Largest relative residual of the two solves.
    pub fn residual(&self) -> f64 {
        self.re.residual().max(self.im.residual())
    }

    /// `P · χ_D` as a complex spectral field.
    pub fn evaluate_on_grid(&self, domain: &FrequencyDomain) -> Result<Array2<Complex64>> {
        let missing = || Error::Unsupported("scaling has no grid field".into());
        let re = evaluate_on_grid(&self.re, domain, self.scaling.re.grid_field().ok_or_else(missing)?)?;
        let im = evaluate_on_grid(&self.im, domain, self.scaling.im.grid_field().ok_or_else(missing)?)?;
        Ok(ndarray::Zip::from(&re)
            .and(&im)
            .map_collect(|&a, &b| Complex64::new(a, b)))
    }
}
