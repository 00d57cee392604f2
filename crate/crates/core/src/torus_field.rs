//! Fields and spectral calculus on the periodic torus.
//!
//! Everything downstream (energies, stresses, relative-energy identities)
//! relies on two discrete facts that Fourier collocation gives us for free:
//! derivatives of resolved modes are exact, and `integrate(divergence(v)) == 0`
//! to machine precision, so all the integrations by parts in the continuous
//! identities survive discretization.
//!
//! Grids are uniform and axis-isotropic: `n` points per axis, period `length`
//! per axis, `dim` in 1..=3. Fields are immutable after construction and all
//! operators are pure functions returning new fields.

use once_cell::sync::Lazy;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

pub mod snapshot;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("value array has length {got}, grid needs {want}")]
    BadLength { got: usize, want: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, FieldError>;

/// Uniform periodic grid, `n` points per axis with period `length`.
///
/// Wavenumbers per axis are k_j = 2π j / L for j in {−n/2+1, …, n/2};
/// the Nyquist mode j = n/2 is zeroed in every odd-order derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    length: f64,
    dealias: bool,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize, length: f64, dealias: bool) -> Result<Arc<Self>> {
        if !(1..=3).contains(&dim) {
            return Err(FieldError::InvalidGrid(format!("dim must be 1..=3, got {dim}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(FieldError::InvalidGrid(format!("n must be even and >= 8, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(FieldError::InvalidGrid(format!("period must be positive, got {length}")));
        }
        Ok(Arc::new(TorusGrid { dim, n, length, dealias }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn points_per_axis(&self) -> usize {
        self.n
    }
    pub fn period(&self) -> f64 {
        self.length
    }
    pub fn dealias(&self) -> bool {
        self.dealias
    }
    /// Total number of grid points, n^dim.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }
    /// Quadrature weight dx^dim.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }
    /// |T^d| = L^dim.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Signed integer mode index for array position `i` along one axis:
    /// 0,1,…,n/2,−n/2+1,…,−1.
    fn mode_index(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Wavenumber 2π j / L for array position `i`.
    fn wavenumber(&self, i: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.mode_index(i) as f64 / self.length
    }

    /// Wavenumber with the Nyquist mode zeroed (odd-derivative convention).
    fn wavenumber_odd(&self, i: usize) -> f64 {
        if self.mode_index(i) == (self.n / 2) as i64 {
            0.0
        } else {
            self.wavenumber(i)
        }
    }

    /// Grid coordinates of flattened index `idx` (row-major, last axis fastest).
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut rem = idx;
        for a in (0..self.dim).rev() {
            out[a] = (rem % self.n) as f64 * self.dx();
            rem /= self.n;
        }
        out
    }

    /// Largest retained |mode| under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n as i64) / 3
    }

    pub fn same_as(&self, other: &TorusGrid) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

fn check_grids(a: &TorusGrid, b: &TorusGrid) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(FieldError::GridMismatch)
    }
}

/// Real scalar samples on a torus grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<TorusGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: Arc<TorusGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FieldError::BadLength { got: values.len(), want: grid.len() });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Arc<TorusGrid>, c: f64) -> Result<Self> {
        Self::from_values(grid.clone(), vec![c; grid.len()])
    }

    /// Sample a function of the coordinates.
    pub fn from_fn(grid: Arc<TorusGrid>, f: impl Fn(&[f64; 3]) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map; rejects non-finite results.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_grids(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(self.grid.clone(), values)
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        self.map(|v| s * v)
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.zip(other, |a, b| a * b)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Real vector field: `dim` scalar components.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<TorusGrid>,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(grid: Arc<TorusGrid>, components: Vec<ScalarField>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(FieldError::BadLength { got: components.len(), want: grid.dim() });
        }
        for c in &components {
            check_grids(&grid, c.grid())?;
        }
        Ok(VectorField { grid, components })
    }

    pub fn zero(grid: Arc<TorusGrid>) -> Result<Self> {
        let comps = (0..grid.dim())
            .map(|_| ScalarField::constant(grid.clone(), 0.0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, comps)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }
    pub fn component(&self, a: usize) -> &ScalarField {
        &self.components[a]
    }
    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField) -> Result<ScalarField>) -> Result<Self> {
        let comps = self.components.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), comps)
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        let comps = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), comps)
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        let comps = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), comps)
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        self.map_components(|c| c.scale(s))
    }

    /// Pointwise squared magnitude |v|².
    pub fn magnitude_squared(&self) -> Result<ScalarField> {
        let mut acc = vec![0.0; self.grid.len()];
        for c in &self.components {
            for (a, &v) in acc.iter_mut().zip(c.values()) {
                *a += v * v;
            }
        }
        ScalarField::from_values(self.grid.clone(), acc)
    }

    /// Pointwise dot product v·w.
    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        check_grids(&self.grid, other.grid())?;
        let mut acc = vec![0.0; self.grid.len()];
        for (c, d) in self.components.iter().zip(&other.components) {
            for ((a, &v), &w) in acc.iter_mut().zip(c.values()).zip(d.values()) {
                *a += v * w;
            }
        }
        ScalarField::from_values(self.grid.clone(), acc)
    }
}

/// Real dim×dim tensor field, components stored row-major: comp(i,j) = comps[i*dim+j].
#[derive(Debug, Clone)]
pub struct TensorField {
    grid: Arc<TorusGrid>,
    comps: Vec<ScalarField>,
}

impl TensorField {
    pub fn new(grid: Arc<TorusGrid>, comps: Vec<ScalarField>) -> Result<Self> {
        let d = grid.dim();
        if comps.len() != d * d {
            return Err(FieldError::BadLength { got: comps.len(), want: d * d });
        }
        for c in &comps {
            check_grids(&grid, c.grid())?;
        }
        Ok(TensorField { grid, comps })
    }

    pub fn zero(grid: Arc<TorusGrid>) -> Result<Self> {
        let d = grid.dim();
        let comps = (0..d * d)
            .map(|_| ScalarField::constant(grid.clone(), 0.0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, comps)
    }

    /// Diagonal tensor s·I.
    pub fn isotropic(s: &ScalarField) -> Result<Self> {
        let grid = s.grid().clone();
        let d = grid.dim();
        let zero = ScalarField::constant(grid.clone(), 0.0)?;
        let mut comps = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                comps.push(if i == j { s.clone() } else { zero.clone() });
            }
        }
        Self::new(grid, comps)
    }

    /// Outer product a⊗b.
    pub fn outer(a: &VectorField, b: &VectorField) -> Result<Self> {
        check_grids(a.grid(), b.grid())?;
        let grid = a.grid().clone();
        let d = grid.dim();
        let mut comps = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                comps.push(a.component(i).mul(b.component(j))?);
            }
        }
        Self::new(grid, comps)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }
    pub fn component(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[i * self.dim() + j]
    }

    pub fn add(&self, other: &TensorField) -> Result<Self> {
        check_grids(&self.grid, &other.grid)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), comps)
    }

    pub fn sub(&self, other: &TensorField) -> Result<Self> {
        check_grids(&self.grid, &other.grid)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), comps)
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        let comps = self.comps.iter().map(|c| c.scale(s)).collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), comps)
    }

    /// Full contraction A:B = Σ_ij A_ij B_ij, pointwise.
    pub fn contract(&self, other: &TensorField) -> Result<ScalarField> {
        check_grids(&self.grid, &other.grid)?;
        let mut acc = vec![0.0; self.grid.len()];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((s, &x), &y) in acc.iter_mut().zip(a.values()).zip(b.values()) {
                *s += x * y;
            }
        }
        ScalarField::from_values(self.grid.clone(), acc)
    }

    /// Matrix-vector product (T v)_i = Σ_j T_ij v_j, pointwise.
    pub fn apply(&self, v: &VectorField) -> Result<VectorField> {
        check_grids(&self.grid, v.grid())?;
        let d = self.dim();
        let mut comps = Vec::with_capacity(d);
        for i in 0..d {
            let mut acc = vec![0.0; self.grid.len()];
            for j in 0..d {
                for ((s, &t), &w) in acc
                    .iter_mut()
                    .zip(self.component(i, j).values())
                    .zip(v.component(j).values())
                {
                    *s += t * w;
                }
            }
            comps.push(ScalarField::from_values(self.grid.clone(), acc)?);
        }
        VectorField::new(self.grid.clone(), comps)
    }

    /// Largest pointwise |T_ij − T_ji|, zero for symmetric tensors.
    pub fn symmetry_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                for (&a, &b) in self.component(i, j).values().iter().zip(self.component(j, i).values()) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// Spectral engine
// ---------------------------------------------------------------------------

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

static PLAN_CACHE: Lazy<Mutex<HashMap<usize, Arc<Plans>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plans_for(n: usize) -> Arc<Plans> {
    let mut cache = PLAN_CACHE.lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Complex spectral coefficients of a scalar field (unnormalized forward DFT).
pub struct Spectrum {
    grid: Arc<TorusGrid>,
    coeffs: Vec<Complex64>,
}

fn fft_all_axes(grid: &TorusGrid, data: &mut [Complex64], forward: bool) {
    let n = grid.points_per_axis();
    let plans = plans_for(n);
    let fft = if forward { &plans.forward } else { &plans.inverse };
    let total = grid.len();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    // stride of axis a in the row-major layout (last axis fastest)
    for a in 0..grid.dim() {
        let stride = n.pow((grid.dim() - 1 - a) as u32);
        let lines = total / n;
        for l in 0..lines {
            // base index of the l-th line along axis a
            let block = stride * n;
            let outer = (l / stride) * block;
            let inner = l % stride;
            let base = outer + inner;
            for (k, item) in line.iter_mut().enumerate() {
                *item = data[base + k * stride];
            }
            fft.process(&mut line);
            for (k, item) in line.iter().enumerate() {
                data[base + k * stride] = *item;
            }
        }
    }
    if !forward {
        let scale = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

impl Spectrum {
    pub fn forward(f: &ScalarField) -> Self {
        let grid = f.grid().clone();
        let mut coeffs: Vec<Complex64> =
            f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_all_axes(&grid, &mut coeffs, true);
        Spectrum { grid, coeffs }
    }

    pub fn inverse(mut self) -> Result<ScalarField> {
        fft_all_axes(&self.grid.clone(), &mut self.coeffs, false);
        let values = self.coeffs.iter().map(|c| c.re).collect();
        ScalarField::from_values(self.grid, values)
    }

    /// Multiply each coefficient by a function of the per-axis mode indices.
    /// `modes[a]` is the signed integer mode along axis a (zero beyond `dim`).
    pub fn apply(mut self, f: impl Fn(&ModeInfo) -> Complex64) -> Self {
        let grid = self.grid.clone();
        let n = grid.points_per_axis();
        let d = grid.dim();
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            let mut rem = idx;
            let mut info = ModeInfo::default();
            for a in (0..d).rev() {
                let i = rem % n;
                rem /= n;
                info.modes[a] = grid.mode_index(i);
                info.k[a] = grid.wavenumber(i);
                info.k_odd[a] = grid.wavenumber_odd(i);
            }
            info.k_sq = info.k.iter().map(|k| k * k).sum();
            *c *= f(&info);
        }
        self
    }
}

/// Per-mode data handed to spectral multipliers.
#[derive(Default)]
pub struct ModeInfo {
    /// Signed integer mode index per axis.
    pub modes: [i64; 3],
    /// Wavenumbers 2π j / L per axis.
    pub k: [f64; 3],
    /// Wavenumbers with Nyquist zeroed (odd-derivative convention).
    pub k_odd: [f64; 3],
    /// |k|² including Nyquist.
    pub k_sq: f64,
}

fn real_one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// ∂f/∂x_a, spectral, Nyquist zeroed.
pub fn derivative_axis(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    if axis >= f.grid().dim() {
        return Err(FieldError::InvalidParameter(format!("axis {axis} out of range")));
    }
    Spectrum::forward(f)
        .apply(|m| Complex64::new(0.0, m.k_odd[axis]))
        .inverse()
}

/// Spectral gradient ∇f.
pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    let comps = (0..f.grid().dim())
        .map(|a| derivative_axis(f, a))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(f.grid().clone(), comps)
}

/// Spectral divergence ∇·v.
pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    let mut acc = ScalarField::constant(v.grid().clone(), 0.0)?;
    for a in 0..v.dim() {
        acc = acc.add(&derivative_axis(v.component(a), a)?)?;
    }
    Ok(acc)
}

/// Spectral Laplacian Δf (full |k|², Nyquist retained).
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    Spectrum::forward(f)
        .apply(|m| Complex64::new(-m.k_sq, 0.0))
        .inverse()
}

/// ∇(∇·v) in one spectral pass; mixed second derivatives use the
/// odd-derivative (Nyquist-zeroed) wavenumbers in each factor.
pub fn grad_div(v: &VectorField) -> Result<VectorField> {
    let grid = v.grid().clone();
    let d = grid.dim();
    let spectra: Vec<Spectrum> = v.components().iter().map(Spectrum::forward).collect();
    let mut out = Vec::with_capacity(d);
    for a in 0..d {
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (b, sp) in spectra.iter().enumerate() {
            let n = grid.points_per_axis();
            for (idx, c) in sp.coeffs.iter().enumerate() {
                // recompute k_odd for axes a and b at this index
                let mut rem = idx;
                let (mut ka, mut kb) = (0.0, 0.0);
                for ax in (0..d).rev() {
                    let i = rem % n;
                    rem /= n;
                    if ax == a {
                        ka = grid.wavenumber_odd(i);
                    }
                    if ax == b {
                        kb = grid.wavenumber_odd(i);
                    }
                }
                acc[idx] += c * Complex64::new(-ka * kb, 0.0);
            }
        }
        let sp = Spectrum { grid: grid.clone(), coeffs: acc };
        out.push(sp.inverse()?);
    }
    VectorField::new(grid, out)
}

/// ∇Δf in one spectral pass (odd overall: Nyquist zeroed in the gradient factor).
pub fn grad_laplacian(f: &ScalarField) -> Result<VectorField> {
    let grid = f.grid().clone();
    let comps = (0..grid.dim())
        .map(|a| {
            Spectrum::forward(f)
                .apply(|m| Complex64::new(0.0, -m.k_sq * m.k_odd[a]))
                .inverse()
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(grid, comps)
}

/// Divergence of a tensor, (∇·T)_i = Σ_j ∂_j T_ij.
pub fn tensor_divergence(t: &TensorField) -> Result<VectorField> {
    let grid = t.grid().clone();
    let d = grid.dim();
    let mut comps = Vec::with_capacity(d);
    for i in 0..d {
        let mut acc = ScalarField::constant(grid.clone(), 0.0)?;
        for j in 0..d {
            acc = acc.add(&derivative_axis(t.component(i, j), j)?)?;
        }
        comps.push(acc);
    }
    VectorField::new(grid, comps)
}

/// Jacobian tensor (∇v)_ij = ∂v_i/∂x_j.
pub fn vector_gradient(v: &VectorField) -> Result<TensorField> {
    let grid = v.grid().clone();
    let d = grid.dim();
    let mut comps = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            comps.push(derivative_axis(v.component(i), j)?);
        }
    }
    TensorField::new(grid, comps)
}

/// G_α[f]: the unique periodic solution of c − (1/α)Δc = f.
///
/// Diagonal in Fourier space with multiplier 1/(1 + |k|²/α); commutes with
/// differentiation and contracts the L² norm.
pub fn helmholtz_inverse(f: &ScalarField, alpha: f64) -> Result<ScalarField> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(FieldError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    Spectrum::forward(f)
        .apply(|m| Complex64::new(1.0 / (1.0 + m.k_sq / alpha), 0.0))
        .inverse()
}

/// Solve −Δc + βc = ρ − mean(ρ) on the torus; for β = 0 the free constant is
/// fixed by mean(c) = 0. (For β > 0 the solution automatically has zero mean.)
pub fn screened_poisson_mean_free(rho: &ScalarField, beta: f64) -> Result<ScalarField> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(FieldError::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    Spectrum::forward(rho)
        .apply(|m| {
            if m.modes[..3].iter().all(|&j| j == 0) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0 / (m.k_sq + beta), 0.0)
            }
        })
        .inverse()
}

/// 2/3-rule spectral truncation.
pub fn dealias(f: &ScalarField) -> Result<ScalarField> {
    let cutoff = f.grid().dealias_cutoff();
    Spectrum::forward(f)
        .apply(|m| {
            if m.modes.iter().any(|j| j.abs() > cutoff) {
                Complex64::new(0.0, 0.0)
            } else {
                real_one()
            }
        })
        .inverse()
}

pub fn dealias_vector(v: &VectorField) -> Result<VectorField> {
    v.map_components(dealias)
}

// ---------------------------------------------------------------------------
// Quadrature and norms
// ---------------------------------------------------------------------------

/// ∫ f dx with weight dx^dim.
pub fn integrate(f: &ScalarField) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().cell_volume()
}

/// Grid mean of f.
pub fn mean(f: &ScalarField) -> f64 {
    f.values().iter().sum::<f64>() / f.len() as f64
}

/// L² inner product ∫ f g dx.
pub fn l2_inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    check_grids(f.grid(), g.grid())?;
    let s: f64 = f.values().iter().zip(g.values()).map(|(&a, &b)| a * b).sum();
    Ok(s * f.grid().cell_volume())
}

/// ‖f‖_{L²}.
pub fn l2_norm(f: &ScalarField) -> f64 {
    (f.values().iter().map(|&v| v * v).sum::<f64>() * f.grid().cell_volume()).sqrt()
}

/// H¹ seminorm ‖∇f‖_{L²}, spectral gradient.
pub fn h1_seminorm(f: &ScalarField) -> Result<f64> {
    let g = gradient(f)?;
    Ok(l2_norm_vector(&g))
}

/// H² seminorm ‖Δf‖_{L²}.
pub fn h2_seminorm(f: &ScalarField) -> Result<f64> {
    Ok(l2_norm(&laplacian(f)?))
}

/// ‖f‖_{L∞}.
pub fn linf_norm(f: &ScalarField) -> f64 {
    f.values().iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

pub fn l2_norm_vector(v: &VectorField) -> f64 {
    let s: f64 = v
        .components()
        .iter()
        .map(|c| c.values().iter().map(|&x| x * x).sum::<f64>())
        .sum();
    (s * v.grid().cell_volume()).sqrt()
}

pub fn linf_norm_vector(v: &VectorField) -> f64 {
    v.components().iter().map(linf_norm).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Random band-limited fields
// ---------------------------------------------------------------------------

/// Mean-free random field with spectral support |mode| ≤ max_mode per axis,
/// normalized to unit L∞ then scaled by `amplitude`. Deterministic in `rng`.
pub fn random_band_limited(
    grid: &Arc<TorusGrid>,
    max_mode: usize,
    amplitude: f64,
    rng: &mut impl rand::Rng,
) -> Result<ScalarField> {
    use std::f64::consts::PI;
    let d = grid.dim();
    let mut terms: Vec<([i64; 3], f64, f64)> = Vec::new();
    let m = max_mode as i64;
    let push = |modes: [i64; 3], rng: &mut dyn rand::RngCore| {
        if modes.iter().all(|&j| j == 0) {
            return None;
        }
        Some((
            modes,
            rand::Rng::gen_range(rng, -1.0..1.0),
            rand::Rng::gen_range(rng, 0.0..2.0 * PI),
        ))
    };
    match d {
        1 => {
            for j0 in 1..=m {
                if let Some(t) = push([j0, 0, 0], rng) {
                    terms.push(t);
                }
            }
        }
        2 => {
            for j0 in -m..=m {
                for j1 in 0..=m {
                    if j1 == 0 && j0 <= 0 {
                        continue;
                    }
                    if let Some(t) = push([j0, j1, 0], rng) {
                        terms.push(t);
                    }
                }
            }
        }
        _ => {
            for j0 in -m..=m {
                for j1 in -m..=m {
                    for j2 in 0..=m {
                        if j2 == 0 && (j1 < 0 || (j1 == 0 && j0 <= 0)) {
                            continue;
                        }
                        if let Some(t) = push([j0, j1, j2], rng) {
                            terms.push(t);
                        }
                    }
                }
            }
        }
    }
    let two_pi_over_l = 2.0 * PI / grid.period();
    let raw = ScalarField::from_fn(grid.clone(), |x| {
        terms
            .iter()
            .map(|(modes, amp, phase)| {
                let arg: f64 = (0..d).map(|a| modes[a] as f64 * x[a]).sum::<f64>() * two_pi_over_l
                    + phase;
                amp * arg.cos()
            })
            .sum()
    })?;
    let peak = linf_norm(&raw).max(f64::MIN_POSITIVE);
    raw.scale(amplitude / peak)
}
