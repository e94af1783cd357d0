//! Wave states in holomorphic coordinates and the fields derived from them.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::spectral::{Grid, HoloField, Samples, SpectralField};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default lower bound for `min |1 + W_α|`.
pub const DEFAULT_C_MIN: f64 = 0.1;

/// Tolerance on `Re mean W` and `Im mean Q` before a drift flag is raised.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Tolerance used when judging identity residuals and realness.
pub const IDENTITY_TOL: f64 = 1e-10;

/// The unknown `(W, Q)` at time `t`: `W = Z - α` and the holomorphic
/// velocity potential `Q`.
#[derive(Clone, Debug)]
pub struct WaveState {
    pub w: HoloField,
    pub q: HoloField,
    pub t: f64,
}

impl WaveState {
    pub fn new(w: HoloField, q: HoloField, t: f64) -> Result<Self> {
        if w.grid() != q.grid() {
            return Err(WaveError::GridMismatch);
        }
        Ok(WaveState { w, q, t })
    }

    /// Builds a state from raw fields, rejecting positive-frequency content.
    pub fn from_fields(w: SpectralField, q: SpectralField, t: f64) -> Result<Self> {
        Self::new(HoloField::new(w)?, HoloField::new(q)?, t)
    }

    pub fn flat(grid: &Grid) -> Self {
        WaveState {
            w: HoloField::zeros(grid),
            q: HoloField::zeros(grid),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.w.grid()
    }

    /// `max(|Re mean W|, |Im mean Q|)`; zero for a normalized state.
    pub fn normalization_drift(&self) -> f64 {
        self.w.mean().re.abs().max(self.q.mean().im.abs())
    }

    /// Differentiated variables `(W_α, Q_α / (1 + W_α))`.
    pub fn diff_state(&self, c_min: f64) -> Result<DiffState> {
        let wa = self.w.deriv(1);
        let opw = chord_arc(&wa.padded(), c_min)?;
        let r = (&self.q.deriv(1).padded() / &opw).to_field();
        Ok(DiffState {
            wa: HoloField::new_unchecked(wa),
            r: HoloField::new_unchecked(r),
            t: self.t,
        })
    }
}

/// The diagonal variables `(𝐖, R) = (W_α, Q_α/(1+W_α))`.
#[derive(Clone, Debug)]
pub struct DiffState {
    pub wa: HoloField,
    pub r: HoloField,
    pub t: f64,
}

impl DiffState {
    pub fn new(wa: HoloField, r: HoloField, t: f64) -> Result<Self> {
        if wa.grid() != r.grid() {
            return Err(WaveError::GridMismatch);
        }
        Ok(DiffState { wa, r, t })
    }

    pub fn grid(&self) -> &Grid {
        self.wa.grid()
    }
}

/// Returns padded samples of `1 + W_α` after checking the chord-arc bound.
pub(crate) fn chord_arc(wa: &Samples, c_min: f64) -> Result<Samples> {
    let opw = wa + 1.0;
    let min_abs = opw.min_abs();
    if !(min_abs >= c_min) {
        return Err(WaveError::DegenerateSurface { min_abs, c_min });
    }
    Ok(opw)
}

/// The auxiliary fields built from a state.
#[derive(Clone, Debug)]
pub struct DerivedFields {
    /// `𝐖 = W_α`
    pub wa: HoloField,
    /// `R = Q_α / (1 + W_α)`
    pub r: HoloField,
    /// `Y = 𝐖 / (1 + 𝐖)`
    pub y: HoloField,
    /// `J = |1 + 𝐖|²`
    pub j: SpectralField,
    pub f: HoloField,
    /// Frequency shift.
    pub a: SpectralField,
    /// Advection velocity.
    pub b: SpectralField,
    pub m: SpectralField,
    /// `ℝ = R_α (1 + 𝐖)`
    pub rr: HoloField,
    /// `min |1 + 𝐖|` over the padded nodes.
    pub min_abs_opw: f64,
}

/// Derived fields of `(W, Q)`, with `F` and `b` computed from `Q_α / J`.
pub fn derive_all(s: &WaveState, c_min: f64) -> Result<DerivedFields> {
    let wa = s.w.deriv(1);
    let qa = s.q.deriv(1);
    let opw = chord_arc(&wa.padded(), c_min)?;
    let r = (&qa.padded() / &opw).to_field();
    let qa_s = qa.padded();
    let j = opw.norm_sqr();
    let x = &qa_s / &j;
    Ok(finish_derived(wa, r, opw, x))
}

/// Derived fields of `(𝐖, R)`, with `Q_α / J` replaced by `R / (1 + 𝐖̄)`.
pub fn derive_diff(d: &DiffState, c_min: f64) -> Result<DerivedFields> {
    let opw = chord_arc(&d.wa.padded(), c_min)?;
    let x = &d.r.padded() / &opw.conj();
    Ok(finish_derived(
        d.wa.as_field().clone(),
        d.r.as_field().clone(),
        opw,
        x,
    ))
}

/// `x` holds samples of `Q_α / J`.
fn finish_derived(wa: SpectralField, r: SpectralField, opw: Samples, x: Samples) -> DerivedFields {
    let min_abs_opw = opw.min_abs();
    let inv = opw.recip();
    let invb = inv.conj();
    let wa_s = wa.padded();
    let y = (&wa_s * &inv).to_field();
    let j = opw.norm_sqr().to_field();
    let xb = x.conj();
    let f = (&x - &xb).to_field().project_p();
    let b = x.to_field().project_p() + xb.to_field().project_pbar();

    let r_s = r.padded();
    let ra_s = r.deriv(1).padded();
    let rrba = (&r_s * &ra_s.conj()).to_field();
    let a = (rrba.conj().project_pbar() - rrba.project_p()) * I;
    let m = (&ra_s * &invb + &ra_s.conj() * &inv).to_field() - b.deriv(1);
    let rr = (&ra_s * &opw).to_field();

    DerivedFields {
        wa: HoloField::new_unchecked(wa),
        r: HoloField::new_unchecked(r),
        y: HoloField::new_unchecked(y),
        j,
        f: HoloField::new_unchecked(f),
        a,
        b,
        m,
        rr: HoloField::new_unchecked(rr),
        min_abs_opw,
    }
}

/// Sup-norm residuals of the algebraic identities linking the derived fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `b - F - R̄/(1+𝐖)`
    pub b_minus_f: f64,
    /// Difference of the rational and polynomial forms of `M`.
    pub m_forms: f64,
    /// `b - 2 Re(R - P[RȲ])`
    pub b_polynomial: f64,
    /// `a - 2 Im P[R R̄_α]`
    pub a_im_form: f64,
    /// Largest imaginary part among `a`, `b`, `M`.
    pub realness: f64,
    /// `a - 2 Re P[R R̄_α]`. Report only: this variant is not an identity.
    pub a_re_form: f64,
}

impl IdentityReport {
    /// Checked residuals with their names (the report-only entry excluded).
    pub fn checked(&self) -> [(&'static str, f64); 5] {
        [
            ("b_minus_f", self.b_minus_f),
            ("m_forms", self.m_forms),
            ("b_polynomial", self.b_polynomial),
            ("a_im_form", self.a_im_form),
            ("realness", self.realness),
        ]
    }

    pub fn max_residual(&self) -> f64 {
        self.checked().iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }

    /// Names of residuals above `tol` (NaN counts as flagged).
    pub fn flagged(&self, tol: f64) -> Vec<&'static str> {
        self.checked()
            .iter()
            .filter(|(_, v)| !(*v <= tol))
            .map(|(n, _)| *n)
            .collect()
    }
}

fn imag_sup(f: &SpectralField) -> f64 {
    f.to_physical().iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

/// Evaluates both sides of each identity independently.
pub fn verify_identities(d: &DerivedFields) -> IdentityReport {
    let opw = d.wa.padded() + 1.0;
    let r_s = d.r.padded();
    let y_s = d.y.padded();
    let ra_s = d.r.deriv(1).padded();
    let ya_s = d.y.deriv(1).padded();

    let rb_over = (&r_s.conj() / &opw).to_field();
    let b_minus_f = (&d.b - d.f.as_field() - &rb_over).sup_norm();

    let m2 = (&r_s.conj() * &ya_s - &ra_s * &y_s.conj())
        .to_field()
        .project_pbar()
        + (&r_s * &ya_s.conj() - &ra_s.conj() * &y_s)
            .to_field()
            .project_p();
    let m_forms = (&d.m - &m2).sup_norm();

    let ryb = (&r_s * &y_s.conj()).to_field().project_p();
    let b_poly = (d.r.as_field() - &ryb).re() * 2.0;
    let b_polynomial = (&d.b - &b_poly).sup_norm();

    let prr = (&r_s * &ra_s.conj()).to_field().project_p();
    let a_im_form = (&d.a - &(prr.im() * 2.0)).sup_norm();
    let a_re_form = (&d.a - &(prr.re() * 2.0)).sup_norm();

    let realness = imag_sup(&d.a).max(imag_sup(&d.b)).max(imag_sup(&d.m));

    IdentityReport {
        b_minus_f,
        m_forms,
        b_polynomial,
        a_im_form,
        realness,
        a_re_form,
    }
}

/// `min_α (1 + a)` over the padded nodes.
pub fn taylor_sign(d: &DerivedFields) -> f64 {
    d.a.padded()
        .values()
        .iter()
        .map(|z| 1.0 + z.re)
        .fold(f64::INFINITY, f64::min)
}

/// Options for [`from_graph_surface`].
#[derive(Clone, Copy, Debug)]
pub struct GraphOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_slope: f64,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            tol: 1e-12,
            max_iter: 200,
            max_slope: 0.5,
        }
    }
}

/// Conformal state for the graph `y = η(x)` with surface potential `ψ(x)`.
///
/// `η` and `ψ` are real fields on the grid, read as functions of the
/// Eulerian coordinate `x`. The surface height in conformal parametrization
/// solves `Y(α) = η(α + H Y(α))`; then `W = (H + i) Y` and `Q = 2 P[ψ ∘ X]`.
pub fn from_graph_surface(
    eta: &SpectralField,
    psi: &SpectralField,
    opts: GraphOptions,
) -> Result<WaveState> {
    let grid = eta.grid().clone();
    if psi.grid() != &grid {
        return Err(WaveError::GridMismatch);
    }
    let slope = eta.deriv(1).sup_norm();
    if !(slope < opts.max_slope) {
        return Err(WaveError::SteepSurface(format!(
            "sup |eta'| = {slope:.3e} is not below {}",
            opts.max_slope
        )));
    }
    let eta_r = eta.re();
    let nodes = grid.nodes();
    let mut y = eta_r.clone();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let shift = y.hilbert().to_physical();
        let vals: Vec<Complex64> = nodes
            .iter()
            .zip(&shift)
            .map(|(&a, s)| Complex64::new(eta_r.eval(a + s.re).re, 0.0))
            .collect();
        let next = SpectralField::from_physical(&grid, &vals)?;
        let change = (&next - &y).sup_norm();
        y = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(WaveError::SteepSurface(format!(
            "height iteration did not converge in {} steps",
            opts.max_iter
        )));
    }
    let w = y.hilbert() + y.mul_i();
    let shift = y.hilbert().to_physical();
    let psi_r = psi.re();
    let vals: Vec<Complex64> = nodes
        .iter()
        .zip(&shift)
        .map(|(&a, s)| Complex64::new(psi_r.eval(a + s.re).re, 0.0))
        .collect();
    let q = SpectralField::from_physical(&grid, &vals)?.project_p() * 2.0;
    Ok(WaveState {
        w: HoloField::project(&w),
        q: HoloField::project(&q),
        t: 0.0,
    })
}

/// Random band-limited normalized state: modes `1 ≤ |k| ≤ N/6` with
/// amplitude `amp · decay^|k|` times complex Gaussians, an imaginary mean for
/// `W` and a real mean for `Q`.
pub fn random_state(grid: &Grid, seed: u64, amp: f64, decay: f64) -> WaveState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kmax = (grid.n_modes() / 6) as i64;
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let field = |mean: Complex64, gauss: &mut dyn FnMut() -> f64| {
        let mut modes = vec![(0, mean)];
        for k in 1..=kmax {
            let s = amp * decay.powi(k as i32);
            modes.push((-k, Complex64::new(gauss() * s, gauss() * s)));
        }
        SpectralField::from_modes(grid, &modes).expect("modes lie in the band")
    };
    let w_mean = Complex64::new(0.0, amp * gauss());
    let q_mean = Complex64::new(amp * gauss(), 0.0);
    let w = field(w_mean, &mut gauss);
    let q = field(q_mean, &mut gauss);
    WaveState {
        w: HoloField::new_unchecked(w),
        q: HoloField::new_unchecked(q),
        t: 0.0,
    }
}

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

/// First line of a snapshot file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n_modes: usize,
    pub period: f64,
    pub t: f64,
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// Writes a one-line JSON header followed by the coefficients of `W` then
/// `Q` (FFT order) as little-endian `(re, im)` f64 pairs.
pub fn write_snapshot<Wr: Write>(
    out: &mut Wr,
    s: &WaveState,
    provenance: Option<serde_json::Value>,
) -> Result<()> {
    let header = SnapshotHeader {
        n_modes: s.grid().n_modes(),
        period: s.grid().period(),
        t: s.t,
        format_version: SNAPSHOT_FORMAT_VERSION,
        provenance,
    };
    let line = serde_json::to_string(&header).map_err(|e| WaveError::Format(e.to_string()))?;
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(32 * header.n_modes);
    for c in s.w.coeffs().iter().chain(s.q.coeffs()) {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`]. The state is rebuilt on a
/// grid with the given dealiasing choice.
pub fn read_snapshot<Rd: BufRead>(input: &mut Rd, dealias: bool) -> Result<(SnapshotHeader, WaveState)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: SnapshotHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| WaveError::Format(e.to_string()))?;
    if header.format_version != SNAPSHOT_FORMAT_VERSION {
        return Err(WaveError::Format(format!(
            "unsupported format_version {}",
            header.format_version
        )));
    }
    let grid = Grid::with_dealiasing(header.n_modes, header.period, dealias)?;
    let n = header.n_modes;
    let mut bytes = vec![0u8; 32 * n];
    input
        .read_exact(&mut bytes)
        .map_err(|e| WaveError::Format(format!("truncated coefficient block: {e}")))?;
    let mut extra = [0u8; 1];
    if input.read(&mut extra)? != 0 {
        return Err(WaveError::Format("trailing bytes after coefficients".into()));
    }
    let vals: Vec<Complex64> = bytes
        .chunks_exact(16)
        .map(|ch| {
            let re = f64::from_le_bytes(ch[..8].try_into().unwrap());
            let im = f64::from_le_bytes(ch[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    let w = SpectralField::from_coeffs(&grid, vals[..n].to_vec())?;
    let q = SpectralField::from_coeffs(&grid, vals[n..].to_vec())?;
    let state = WaveState::from_fields(w, q, header.t)?;
    Ok((header, state))
}
