//! Fourier-side fields on the periodic grid and the multiplier calculus used
//! throughout the crate.
//!
//! A [`SpectralField`] stores the coefficients `c_k` of
//! `f(α) = Σ_k c_k e^{2πikα/L}` for `k ∈ {-N/2, …, N/2-1}`, in FFT order
//! (index `j` holds `k = j` for `j < N/2` and `k = j - N` otherwise). With this
//! normalization Parseval reads `∫|f|² dα = L · Σ_k |c_k|²`.
//!
//! Holomorphic functions (boundary values of functions holomorphic in the
//! lower half plane) have Fourier support in `k ≤ 0`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, WaveError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on positive-frequency coefficients accepted by [`HoloField::new`].
pub const HOLOMORPHY_TOL: f64 = 1e-12;

struct GridInner {
    n: usize,
    period: f64,
    band: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

/// Uniform periodic collocation grid with cached transform plans.
///
/// Cloning is cheap; clones share the plans.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl Grid {
    /// Grid with `n_modes` nodes on `[0, period)` and 2/3-rule band limit.
    pub fn new(n_modes: usize, period: f64) -> Result<Self> {
        Self::with_dealiasing(n_modes, period, true)
    }

    /// Grid with the 2/3-rule band `|k| ≤ N/3` when `dealias` is set, or the
    /// full band `|k| < N/2` otherwise.
    pub fn with_dealiasing(n_modes: usize, period: f64, dealias: bool) -> Result<Self> {
        if n_modes < 4 || !n_modes.is_power_of_two() {
            return Err(WaveError::InvalidGrid(format!(
                "n_modes must be a power of two >= 4, got {n_modes}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(WaveError::InvalidGrid(format!(
                "period must be positive and finite, got {period}"
            )));
        }
        let mut planner = FftPlanner::new();
        let band = if dealias { n_modes / 3 } else { n_modes / 2 - 1 };
        Ok(Grid(Arc::new(GridInner {
            n: n_modes,
            period,
            band,
            fwd: planner.plan_fft_forward(n_modes),
            inv: planner.plan_fft_inverse(n_modes),
            fwd_pad: planner.plan_fft_forward(2 * n_modes),
            inv_pad: planner.plan_fft_inverse(2 * n_modes),
        })))
    }

    pub fn n_modes(&self) -> usize {
        self.0.n
    }

    pub fn period(&self) -> f64 {
        self.0.period
    }

    /// Largest `|k|` retained by dealiased operations.
    pub fn band(&self) -> usize {
        self.0.band
    }

    pub fn is_dealiased(&self) -> bool {
        self.0.band < self.0.n / 2 - 1
    }

    /// Collocation nodes `α_j = j L / N`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.0.n).map(|j| j as f64 * h).collect()
    }

    pub fn spacing(&self) -> f64 {
        self.0.period / self.0.n as f64
    }

    /// Integer frequency stored at FFT index `j`.
    #[inline]
    pub fn freq(&self, j: usize) -> i64 {
        let n = self.0.n;
        if j < n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    /// FFT index of integer frequency `k`; `None` outside `[-N/2, N/2)`.
    pub fn index(&self, k: i64) -> Option<usize> {
        let half = (self.0.n / 2) as i64;
        if k < -half || k >= half {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.0.n as i64) as usize)
        }
    }

    /// Physical wavenumber `2πk/L`.
    #[inline]
    pub fn wavenumber(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.0.period
    }

    /// Number of dyadic Littlewood-Paley blocks covering `|k| ≤ N/2`.
    pub fn num_lp_blocks(&self) -> usize {
        (self.0.n / 2).trailing_zeros() as usize + 1
    }

    fn same(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self == other
    }

    fn check(&self, other: &Grid) -> Result<()> {
        if self.same(other) {
            Ok(())
        } else {
            Err(WaveError::GridMismatch)
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.0.n == other.0.n && self.0.period == other.0.period && self.0.band == other.0.band
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_modes", &self.0.n)
            .field("period", &self.0.period)
            .field("band", &self.0.band)
            .finish()
    }
}

/// Dyadic block index of integer frequency `k`: block 0 holds `|k| ≤ 1`,
/// block `b ≥ 1` holds `2^{b-1} < |k| ≤ 2^b`.
pub fn lp_block_index(k: i64) -> usize {
    let m = k.unsigned_abs();
    if m <= 1 {
        0
    } else {
        (64 - (m - 1).leading_zeros()) as usize
    }
}

/// A complex field on the torus stored as Fourier coefficients.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![ZERO; grid.n_modes()],
        }
    }

    pub fn constant(grid: &Grid, c: Complex64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = c;
        f
    }

    /// Field with the given `(k, c_k)` coefficients; frequencies outside the
    /// representable range are rejected.
    pub fn from_modes(grid: &Grid, modes: &[(i64, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(grid);
        for &(k, c) in modes {
            let j = grid.index(k).ok_or_else(|| {
                WaveError::InvalidGrid(format!(
                    "frequency {k} not representable with {} modes",
                    grid.n_modes()
                ))
            })?;
            f.coeffs[j] += c;
        }
        Ok(f)
    }

    /// Wraps coefficients given in FFT order.
    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n_modes() {
            return Err(WaveError::LengthMismatch {
                expected: grid.n_modes(),
                got: coeffs.len(),
            });
        }
        Ok(SpectralField {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Samples `f` on the nodes and transforms.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let values: Vec<Complex64> = grid.nodes().into_iter().map(f).collect();
        Self::from_physical(grid, &values).expect("node count matches grid")
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn from_physical(grid: &Grid, values: &[Complex64]) -> Result<Self> {
        let n = grid.n_modes();
        if values.len() != n {
            return Err(WaveError::LengthMismatch {
                expected: n,
                got: values.len(),
            });
        }
        let mut buf = values.to_vec();
        grid.0.fwd.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        Ok(SpectralField {
            grid: grid.clone(),
            coeffs: buf,
        })
    }

    pub fn to_physical(&self) -> Vec<Complex64> {
        let mut buf = self.coeffs.clone();
        self.grid.0.inv.process(&mut buf);
        buf
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Coefficients in FFT order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of `e^{2πikα/L}`; zero outside the representable range.
    pub fn coeff(&self, k: i64) -> Complex64 {
        self.grid.index(k).map_or(ZERO, |j| self.coeffs[j])
    }

    /// Iterator over `(k, c_k)` in FFT order.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(j, &c)| (self.grid.freq(j), c))
    }

    /// Zero mode, which equals the spatial average.
    pub fn mean(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// Applies a Fourier multiplier given as a function of the integer frequency.
    pub fn multiplier(&self, symbol: impl Fn(i64) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| c * symbol(self.grid.freq(j)))
            .collect();
        SpectralField {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    fn real_multiplier(&self, symbol: impl Fn(i64) -> f64) -> Self {
        self.multiplier(|k| Complex64::new(symbol(k), 0.0))
    }

    /// Hilbert transform, `H e^{ikα} = -i sgn(k) e^{ikα}`.
    pub fn hilbert(&self) -> Self {
        self.multiplier(|k| -I * (k.signum() as f64))
    }

    /// `P = (I - iH)/2`: keeps `k < 0`, halves `k = 0`.
    pub fn project_p(&self) -> Self {
        self.real_multiplier(|k| match k.signum() {
            -1 => 1.0,
            0 => 0.5,
            _ => 0.0,
        })
    }

    /// `P̄ = I - P`.
    pub fn project_pbar(&self) -> Self {
        self.real_multiplier(|k| match k.signum() {
            1 => 1.0,
            0 => 0.5,
            _ => 0.0,
        })
    }

    /// Projection onto the zero mode.
    pub fn project_p0(&self) -> Self {
        SpectralField::constant(&self.grid, self.coeffs[0])
    }

    /// `P♯ = P - P₀/2`: strictly negative frequencies.
    pub fn project_psharp(&self) -> Self {
        self.real_multiplier(|k| if k < 0 { 1.0 } else { 0.0 })
    }

    /// `P̄♯ = P̄ - P₀/2`: strictly positive frequencies.
    pub fn project_pbar_sharp(&self) -> Self {
        self.real_multiplier(|k| if k > 0 { 1.0 } else { 0.0 })
    }

    /// `Pʳ = P♯ + Re P₀`.
    pub fn project_pr(&self) -> Self {
        let mut out = self.project_psharp();
        out.coeffs[0] = Complex64::new(self.coeffs[0].re, 0.0);
        out
    }

    /// `Pⁱ = P♯ + i Im P₀`.
    pub fn project_pi(&self) -> Self {
        let mut out = self.project_psharp();
        out.coeffs[0] = Complex64::new(0.0, self.coeffs[0].im);
        out
    }

    /// `P̄ʳ = P̄♯ + Re P₀`.
    pub fn project_pbar_r(&self) -> Self {
        let mut out = self.project_pbar_sharp();
        out.coeffs[0] = Complex64::new(self.coeffs[0].re, 0.0);
        out
    }

    /// `P̄ⁱ = P̄♯ + i Im P₀`.
    pub fn project_pbar_i(&self) -> Self {
        let mut out = self.project_pbar_sharp();
        out.coeffs[0] = Complex64::new(0.0, self.coeffs[0].im);
        out
    }

    /// `∂_α^order`, symbol `(iκ)^order` with `κ = 2πk/L`.
    pub fn deriv(&self, order: u32) -> Self {
        let g = self.grid.clone();
        self.multiplier(|k| (I * g.wavenumber(k)).powu(order))
    }

    /// `|D|^s`, symbol `|κ|^s`; the zero mode is annihilated for `s > 0`.
    pub fn frac_deriv(&self, s: f64) -> Self {
        let g = self.grid.clone();
        self.real_multiplier(|k| {
            if k == 0 {
                if s == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                g.wavenumber(k).abs().powf(s)
            }
        })
    }

    /// Complex conjugate of the represented function.
    pub fn conj(&self) -> Self {
        let n = self.grid.n_modes();
        let coeffs = (0..n).map(|j| self.coeffs[(n - j) % n].conj()).collect();
        SpectralField {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    /// Real part as a (real-valued) field.
    pub fn re(&self) -> Self {
        (self + &self.conj()) * 0.5
    }

    /// Imaginary part as a (real-valued) field.
    pub fn im(&self) -> Self {
        (self - &self.conj()) * Complex64::new(0.0, -0.5)
    }

    pub fn mul_i(&self) -> Self {
        self * I
    }

    /// Zeroes coefficients with `|k|` above the grid band.
    pub fn dealias(&self) -> Self {
        let band = self.grid.band() as i64;
        self.real_multiplier(|k| if k.abs() <= band { 1.0 } else { 0.0 })
    }

    /// Dealiased product: both factors truncated to the band, multiplied on
    /// the nodes, result truncated again.
    pub fn product(&self, other: &SpectralField) -> Result<Self> {
        self.grid.check(&other.grid)?;
        let a = self.dealias().to_physical();
        let b = other.dealias().to_physical();
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Ok(SpectralField::from_physical(&self.grid, &prod)?.dealias())
    }

    /// Sharp dyadic block `b` (see [`lp_block_index`]).
    pub fn lp_block(&self, block: usize) -> Self {
        self.real_multiplier(|k| if lp_block_index(k) == block { 1.0 } else { 0.0 })
    }

    /// All dyadic blocks, `Σ blocks = f` exactly.
    pub fn lp_decompose(&self) -> Vec<SpectralField> {
        let mut blocks = vec![SpectralField::zeros(&self.grid); self.grid.num_lp_blocks()];
        for (j, &c) in self.coeffs.iter().enumerate() {
            let b = lp_block_index(self.grid.freq(j));
            blocks[b].coeffs[j] = c;
        }
        blocks
    }

    /// Sum of blocks `0..block` (frequencies `|k| ≤ 2^{block-1}`).
    pub fn lp_low(&self, block: usize) -> Self {
        self.real_multiplier(|k| if lp_block_index(k) < block { 1.0 } else { 0.0 })
    }

    /// `‖f‖_{L²}` via Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.period() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Max modulus over the collocation nodes.
    pub fn sup_norm(&self) -> f64 {
        self.to_physical()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest modulus among coefficients with `k > 0`.
    pub fn positive_leakage(&self) -> f64 {
        self.modes()
            .filter(|(k, _)| *k > 0)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Samples on the 2× padded grid, for evaluating nonlinear expressions
    /// without aliasing into the retained band.
    pub fn padded(&self) -> Samples {
        let n = self.grid.n_modes();
        let m = 2 * n;
        let mut buf = vec![ZERO; m];
        for (j, &c) in self.coeffs.iter().enumerate() {
            let k = self.grid.freq(j);
            buf[k.rem_euclid(m as i64) as usize] = c;
        }
        self.grid.0.inv_pad.process(&mut buf);
        Samples {
            grid: self.grid.clone(),
            values: buf,
        }
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn eval(&self, x: f64) -> Complex64 {
        let theta = 2.0 * PI * x / self.grid.period();
        self.modes()
            .map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * theta))
            .sum()
    }

    /// `∫ f dα`.
    pub fn integral(&self) -> Complex64 {
        self.coeffs[0] * self.grid.period()
    }

    /// `∫ f ḡ dα` via Parseval.
    pub fn inner(&self, other: &SpectralField) -> Complex64 {
        let s: Complex64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum();
        s * self.grid.period()
    }
}

/// Field checked (and kept) to have Fourier support in `k ≤ 0`.
#[derive(Clone, Debug)]
pub struct HoloField(SpectralField);

impl HoloField {
    /// Accepts `f` if every positive-frequency coefficient is below
    /// [`HOLOMORPHY_TOL`]; the residual leakage is removed.
    pub fn new(f: SpectralField) -> Result<Self> {
        let leak = f.positive_leakage();
        if leak > HOLOMORPHY_TOL {
            return Err(WaveError::NotHolomorphic { leak });
        }
        Ok(Self::project(&f))
    }

    /// Holomorphic part keeping the full zero mode (`P♯ + P₀`).
    pub fn project(f: &SpectralField) -> Self {
        HoloField(f.real_multiplier(|k| if k <= 0 { 1.0 } else { 0.0 }))
    }

    /// Wraps without checking; used where holomorphy holds by construction.
    pub(crate) fn new_unchecked(f: SpectralField) -> Self {
        HoloField(f)
    }

    pub fn zeros(grid: &Grid) -> Self {
        HoloField(SpectralField::zeros(grid))
    }

    pub fn as_field(&self) -> &SpectralField {
        &self.0
    }

    pub fn into_inner(self) -> SpectralField {
        self.0
    }
}

impl std::ops::Deref for HoloField {
    type Target = SpectralField;
    fn deref(&self) -> &SpectralField {
        &self.0
    }
}

/// Physical-space samples on the padded grid (`2N` points).
#[derive(Clone, Debug)]
pub struct Samples {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Samples {
    pub fn constant(grid: &Grid, c: Complex64) -> Self {
        Samples {
            grid: grid.clone(),
            values: vec![c; 2 * grid.n_modes()],
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Back to coefficients, truncated to the grid band.
    pub fn to_field(&self) -> SpectralField {
        let m = self.values.len();
        let mut buf = self.values.clone();
        self.grid.0.fwd_pad.process(&mut buf);
        let scale = 1.0 / m as f64;
        let band = self.grid.band() as i64;
        let mut out = SpectralField::zeros(&self.grid);
        for j in 0..self.grid.n_modes() {
            let k = self.grid.freq(j);
            if k.abs() <= band {
                out.coeffs[j] = buf[k.rem_euclid(m as i64) as usize] * scale;
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Samples {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Samples, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        debug_assert!(self.grid.same(&other.grid));
        Samples {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn re(&self) -> Self {
        self.map(|z| Complex64::new(z.re, 0.0))
    }

    pub fn norm_sqr(&self) -> Self {
        self.map(|z| Complex64::new(z.norm_sqr(), 0.0))
    }

    pub fn recip(&self) -> Self {
        self.map(|z| z.inv())
    }

    pub fn min_abs(&self) -> f64 {
        self.values
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `∫` by the trapezoid rule on the padded nodes (exact for integrands of
    /// degree below `2N`).
    pub fn integral(&self) -> Complex64 {
        let s: Complex64 = self.values.iter().sum();
        s * (self.grid.period() / self.values.len() as f64)
    }
}

macro_rules! field_binop {
    ($ty:ident, $field:ident, $trait:ident, $method:ident, $op:tt, $check:expr) => {
        impl $trait<&$ty> for &$ty {
            type Output = $ty;
            fn $method(self, rhs: &$ty) -> $ty {
                $check(&self.grid, &rhs.grid);
                $ty {
                    grid: self.grid.clone(),
                    $field: self.$field.iter().zip(&rhs.$field).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $trait<$ty> for $ty {
            type Output = $ty;
            fn $method(self, rhs: $ty) -> $ty {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&$ty> for $ty {
            type Output = $ty;
            fn $method(self, rhs: &$ty) -> $ty {
                (&self).$method(rhs)
            }
        }
        impl $trait<$ty> for &$ty {
            type Output = $ty;
            fn $method(self, rhs: $ty) -> $ty {
                self.$method(&rhs)
            }
        }
    };
}

macro_rules! scalar_ops {
    ($ty:ident, $field:ident) => {
        impl Mul<f64> for &$ty {
            type Output = $ty;
            fn mul(self, s: f64) -> $ty {
                $ty {
                    grid: self.grid.clone(),
                    $field: self.$field.iter().map(|a| a * s).collect(),
                }
            }
        }
        impl Mul<f64> for $ty {
            type Output = $ty;
            fn mul(mut self, s: f64) -> $ty {
                self.$field.iter_mut().for_each(|a| *a *= s);
                self
            }
        }
        impl Mul<Complex64> for &$ty {
            type Output = $ty;
            fn mul(self, s: Complex64) -> $ty {
                $ty {
                    grid: self.grid.clone(),
                    $field: self.$field.iter().map(|a| a * s).collect(),
                }
            }
        }
        impl Mul<Complex64> for $ty {
            type Output = $ty;
            fn mul(mut self, s: Complex64) -> $ty {
                self.$field.iter_mut().for_each(|a| *a *= s);
                self
            }
        }
        impl Neg for &$ty {
            type Output = $ty;
            fn neg(self) -> $ty {
                self * -1.0
            }
        }
        impl Neg for $ty {
            type Output = $ty;
            fn neg(self) -> $ty {
                self * -1.0
            }
        }
        impl AddAssign<&$ty> for $ty {
            fn add_assign(&mut self, rhs: &$ty) {
                self.$field.iter_mut().zip(&rhs.$field).for_each(|(a, b)| *a += b);
            }
        }
    };
}

fn assert_same_grid(a: &Grid, b: &Grid) {
    assert!(a.same(b), "fields live on different grids: {a:?} vs {b:?}");
}

field_binop!(SpectralField, coeffs, Add, add, +, assert_same_grid);
field_binop!(SpectralField, coeffs, Sub, sub, -, assert_same_grid);
scalar_ops!(SpectralField, coeffs);

field_binop!(Samples, values, Add, add, +, assert_same_grid);
field_binop!(Samples, values, Sub, sub, -, assert_same_grid);
field_binop!(Samples, values, Mul, mul, *, assert_same_grid);
field_binop!(Samples, values, Div, div, /, assert_same_grid);
scalar_ops!(Samples, values);

impl Add<f64> for &Samples {
    type Output = Samples;
    fn add(self, s: f64) -> Samples {
        self.map(|z| z + s)
    }
}

impl Add<f64> for Samples {
    type Output = Samples;
    fn add(self, s: f64) -> Samples {
        (&self) + s
    }
}

impl Add<f64> for &SpectralField {
    type Output = SpectralField;
    fn add(self, s: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }
}

impl Add<f64> for SpectralField {
    type Output = SpectralField;
    fn add(mut self, s: f64) -> SpectralField {
        self.coeffs[0] += s;
        self
    }
}
