//! Right-hand sides of the full, differentiated and linearized systems, and
//! the RK4 time loop.

use log::warn;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{diagnostics, DiagnosticsRecord};
use crate::error::{Result, WaveError};
use crate::spectral::{HoloField, Samples, SpectralField};
use crate::state::{chord_arc, derive_diff, DerivedFields, DiffState, WaveState, NORMALIZATION_TOL};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Threshold on `sup |W_α|` beyond which a run is declared blown up.
pub const BLOWUP_SUP: f64 = 10.0;

/// Courant number above which a warning is raised.
pub const CFL_WARN: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
}

/// Projection used on the zero mode of the projected linearized system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroModePolicy {
    /// `Pⁱ` on the `w` equation, `Pʳ` on the `r` equation.
    #[default]
    #[serde(rename = "appendix_a")]
    SplitProjection,
    /// `P` on both equations.
    ProjectorP,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_modes: usize,
    pub period: f64,
    pub dt: f64,
    pub t_end: f64,
    pub c_min: f64,
    pub integrator: Integrator,
    pub dealias: bool,
    pub zero_mode_policy: ZeroModePolicy,
    pub output_every: usize,
    pub seed: u64,
    /// Exponent of the spectral filter `exp(-strength (|k|/band)^order)`
    /// applied after every step; 0 disables it.
    pub filter_order: u32,
    pub filter_strength: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_modes: 256,
            period: 2.0 * std::f64::consts::PI,
            dt: 1e-3,
            t_end: 1.0,
            c_min: crate::state::DEFAULT_C_MIN,
            integrator: Integrator::Rk4,
            dealias: true,
            zero_mode_policy: ZeroModePolicy::SplitProjection,
            output_every: 100,
            seed: 0,
            filter_order: 36,
            filter_strength: 36.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(WaveError::Config(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.c_min > 0.0 && self.c_min < 1.0) {
            return bad(format!("c_min must lie in (0, 1), got {}", self.c_min));
        }
        if self.output_every == 0 {
            return bad("output_every must be positive".into());
        }
        if !(self.filter_strength >= 0.0) {
            return bad(format!("filter_strength must be nonnegative, got {}", self.filter_strength));
        }
        if self.n_modes < 4 || !self.n_modes.is_power_of_two() {
            return bad(format!("n_modes must be a power of two >= 4, got {}", self.n_modes));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return bad(format!("period must be positive, got {}", self.period));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<crate::spectral::Grid> {
        crate::spectral::Grid::with_dealiasing(self.n_modes, self.period, self.dealias)
    }

    /// Number of steps needed to reach `t_end` (the last step is not shortened).
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// `(W_t, Q_t)` for the full system.
pub fn rhs_full(s: &WaveState, c_min: f64) -> Result<(SpectralField, SpectralField)> {
    let wa = s.w.deriv(1).padded();
    let qa = s.q.deriv(1).padded();
    let opw = chord_arc(&wa, c_min)?;
    let j = opw.norm_sqr();
    let f = ((&qa - &qa.conj()) / &j).to_field().project_p();
    let f_s = f.padded();
    let wt = -(&f_s * &opw).to_field();
    let qt = -(&f_s * &qa).to_field() + s.w.dealias().mul_i()
        - (qa.norm_sqr() / &j).to_field().project_p();
    Ok((wt, qt))
}

/// `(𝐖_t, R_t)` for the differentiated system.
pub fn rhs_diff(d: &DiffState, c_min: f64) -> Result<(SpectralField, SpectralField)> {
    let df = derive_diff(d, c_min)?;
    Ok(rhs_diff_with(&df))
}

fn rhs_diff_with(df: &DerivedFields) -> (SpectralField, SpectralField) {
    let opw = df.wa.padded() + 1.0;
    let b = df.b.padded();
    let ra = df.r.deriv(1).padded();
    let waa = df.wa.deriv(1).padded();
    let m = df.m.padded();
    let wat = (-(&b * &waa) - &(&opw * &ra) / &opw.conj() + &opw * &m).to_field();
    let rt = (-(&b * &ra) + (&df.wa.padded() - &df.a.padded()) / &opw * I).to_field();
    (wat, rt)
}

/// `Y_t` from the polynomial form `Y_t + bY_α + |1-Y|²R_α = (1-Y)M`.
pub fn rhs_y_polynomial(df: &DerivedFields) -> SpectralField {
    let y = df.y.padded();
    let one_minus = (&y * -1.0) + 1.0;
    let ya = df.y.deriv(1).padded();
    let ra = df.r.deriv(1).padded();
    (-(&df.b.padded() * &ya) - &(one_minus.norm_sqr() * &ra) + &one_minus * &df.m.padded()).to_field()
}

/// Linearized perturbation in diagonal variables, `r = q - R w`.
#[derive(Clone, Debug)]
pub struct LinState {
    pub w: HoloField,
    pub r: HoloField,
}

impl LinState {
    /// From the perturbation `(w, q)` of `(W, Q)`.
    pub fn from_wq(w: &SpectralField, q: &SpectralField, bg: &DerivedFields) -> Result<Self> {
        let r = q - &(&bg.r.padded() * &w.padded()).to_field();
        Ok(LinState {
            w: HoloField::new(w.clone())?,
            r: HoloField::new(r)?,
        })
    }

    /// Back to `(w, q)`.
    pub fn to_wq(&self, bg: &DerivedFields) -> (SpectralField, SpectralField) {
        let q = self.r.as_field() + &(&bg.r.padded() * &self.w.padded()).to_field();
        (self.w.as_field().clone(), q)
    }
}

/// Which form of the linearized equations to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinForm {
    /// Transport form with the source terms `𝒢`, `𝒦` kept in full.
    Unprojected,
    /// Holomorphic projection of every term.
    Projected(ZeroModePolicy),
}

/// `(w_t, r_t)` of the linearization around the background `bg`.
pub fn rhs_linearized(bg: &DerivedFields, p: &LinState, form: LinForm) -> (SpectralField, SpectralField) {
    let opw = bg.wa.padded() + 1.0;
    let opwb = opw.conj();
    let j = opw.norm_sqr();
    let r_s = bg.r.padded();
    let ra = bg.r.deriv(1).padded();
    let b = bg.b.padded();
    let w = p.w.padded();
    let wa = p.w.deriv(1).padded();
    let lra = p.r.deriv(1).padded();

    let dr = &lra + &(&ra * &w);
    let m = (&dr / &j + &(&r_s.conj() * &wa) / &(&opw * &opw)).to_field();
    let n = (&(&r_s.conj() * &dr) / &opw).to_field();
    let g_src = (&opw * &(m.conj().project_p() + m.project_pbar()).padded()).to_field();
    let k_src = n.project_pbar() - n.conj().project_p();

    let transport_w = (&b * &wa).to_field();
    let transport_r = (&b * &lra).to_field();
    let coupling_w = ((&lra + &(&ra * &w)) / &opwb).to_field();
    let coupling_r = (&(&(&bg.a.padded() + 1.0) * &w) / &opw).to_field().mul_i();

    match form {
        LinForm::Unprojected => (
            -(&transport_w + &coupling_w) + g_src,
            -&transport_r + coupling_r + k_src,
        ),
        LinForm::Projected(policy) => {
            let wt = -(&transport_w + &coupling_w) + g_src;
            let rt = -&transport_r + coupling_r + k_src;
            match policy {
                ZeroModePolicy::SplitProjection => (wt.project_pi(), rt.project_pr()),
                ZeroModePolicy::ProjectorP => (wt.project_p(), rt.project_p()),
            }
        }
    }
}

/// Exact linearization in the undiagonalized variables `(w, q)`.
pub fn rhs_linearized_wq(
    bg: &DerivedFields,
    w: &SpectralField,
    q: &SpectralField,
) -> (SpectralField, SpectralField) {
    let opw = bg.wa.padded() + 1.0;
    let j = opw.norm_sqr();
    let r_s = bg.r.padded();
    let qa_bg = &r_s * &opw;
    let wa = w.deriv(1).padded();
    let qa = q.deriv(1).padded();
    let m = (&(&qa - &(&r_s * &wa)) / &j + &(&r_s.conj() * &wa) / &(&opw * &opw)).to_field();
    let dr = (&(&qa - &(&r_s * &wa)) / &opw).to_field();
    let n = (&r_s.conj() * &dr.padded()).to_field();
    let dfl = (&m - &m.conj()).project_p().padded();
    let f = bg.f.padded();
    let wt = -(&(&f * &wa) + &(&opw * &dfl)).to_field();
    let qt = -(&(&f * &qa) + &(&qa_bg * &dfl)).to_field() + w.mul_i()
        - (&n + &n.conj()).project_p();
    (wt, qt)
}

/// One classical RK4 step for a system of fields.
pub fn rk4_fields<F>(y: &[SpectralField], dt: f64, f: F) -> Result<Vec<SpectralField>>
where
    F: Fn(&[SpectralField]) -> Result<Vec<SpectralField>>,
{
    let axpy = |a: &[SpectralField], h: f64, k: &[SpectralField]| -> Vec<SpectralField> {
        a.iter().zip(k).map(|(x, d)| x + &(d * h)).collect()
    };
    let k1 = f(y)?;
    let k2 = f(&axpy(y, 0.5 * dt, &k1))?;
    let k3 = f(&axpy(y, 0.5 * dt, &k2))?;
    let k4 = f(&axpy(y, dt, &k3))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, x)| {
            let incr = &(&k1[i] + &k2[i] * 2.0) + &(&k3[i] * 2.0 + &k4[i]);
            x + &(incr * (dt / 6.0))
        })
        .collect())
}

fn wave_from(fields: &[SpectralField], t: f64) -> WaveState {
    WaveState {
        w: HoloField::new_unchecked(fields[0].clone()),
        q: HoloField::new_unchecked(fields[1].clone()),
        t,
    }
}

/// One unfiltered RK4 step of the full system.
pub fn step_rk4(s: &WaveState, dt: f64, c_min: f64) -> Result<WaveState> {
    let y = [s.w.as_field().clone(), s.q.as_field().clone()];
    let out = rk4_fields(&y, dt, |v| {
        let (wt, qt) = rhs_full(&wave_from(v, s.t), c_min)?;
        Ok(vec![wt, qt])
    })?;
    Ok(wave_from(&out, s.t + dt))
}

/// One RK4 step of the differentiated system.
pub fn step_rk4_diff(d: &DiffState, dt: f64, c_min: f64) -> Result<DiffState> {
    let y = [d.wa.as_field().clone(), d.r.as_field().clone()];
    let out = rk4_fields(&y, dt, |v| {
        let ds = DiffState {
            wa: HoloField::new_unchecked(v[0].clone()),
            r: HoloField::new_unchecked(v[1].clone()),
            t: d.t,
        };
        let (a, b) = rhs_diff(&ds, c_min)?;
        Ok(vec![a, b])
    })?;
    Ok(DiffState {
        wa: HoloField::new_unchecked(out[0].clone()),
        r: HoloField::new_unchecked(out[1].clone()),
        t: d.t + dt,
    })
}

/// One RK4 step of the background together with a linearized perturbation.
pub fn step_rk4_linearized(
    s: &WaveState,
    p: &LinState,
    dt: f64,
    c_min: f64,
    form: LinForm,
) -> Result<(WaveState, LinState)> {
    let y = [
        s.w.as_field().clone(),
        s.q.as_field().clone(),
        p.w.as_field().clone(),
        p.r.as_field().clone(),
    ];
    let out = rk4_fields(&y, dt, |v| {
        let bgs = wave_from(&v[..2], s.t);
        let (wt, qt) = rhs_full(&bgs, c_min)?;
        let bg = crate::state::derive_all(&bgs, c_min)?;
        let lin = LinState {
            w: HoloField::new_unchecked(v[2].clone()),
            r: HoloField::new_unchecked(v[3].clone()),
        };
        let (lw, lr) = rhs_linearized(&bg, &lin, form);
        Ok(vec![wt, qt, lw, lr])
    })?;
    let lin = LinState {
        w: HoloField::new_unchecked(out[2].clone()),
        r: HoloField::new_unchecked(out[3].clone()),
    };
    Ok((wave_from(&out[..2], s.t + dt), lin))
}

/// Multiplies coefficients by `exp(-strength (|k|/band)^order)`.
pub fn apply_filter(f: &SpectralField, order: u32, strength: f64) -> SpectralField {
    if order == 0 {
        return f.clone();
    }
    let band = f.grid().band() as f64;
    f.multiplier(|k| {
        let x = k.unsigned_abs() as f64 / band;
        Complex64::new((-strength * x.powi(order as i32)).exp(), 0.0)
    })
}

/// Full-system step with the configured filter.
pub fn step(s: &WaveState, cfg: &SimConfig) -> Result<WaveState> {
    let mut next = step_rk4(s, cfg.dt, cfg.c_min)?;
    if cfg.filter_order > 0 {
        next.w = HoloField::new_unchecked(apply_filter(&next.w, cfg.filter_order, cfg.filter_strength));
        next.q = HoloField::new_unchecked(apply_filter(&next.q, cfg.filter_order, cfg.filter_strength));
    }
    Ok(next)
}

/// Courant number `dt · κ_max · max|b|`.
pub fn courant_number(df: &DerivedFields, dt: f64) -> f64 {
    let g = df.b.grid();
    let kmax = g.wavenumber(g.band() as i64);
    dt * kmax * df.b.padded().sup()
}

/// Reason a state is unusable, if any.
pub fn blowup_reason(s: &WaveState, c_min: f64) -> Option<String> {
    if !(s.w.is_finite() && s.q.is_finite()) {
        return Some("non-finite coefficients".into());
    }
    let wa: Samples = s.w.deriv(1).padded();
    let sup = wa.sup();
    if sup > BLOWUP_SUP {
        return Some(format!("sup |W_alpha| = {sup:.3e} exceeds {BLOWUP_SUP}"));
    }
    let min_abs = (&wa + 1.0).min_abs();
    if min_abs < c_min {
        return Some(format!("min |1 + W_alpha| = {min_abs:.3e} below c_min = {c_min}"));
    }
    None
}

/// Outcome of [`run`].
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub final_state: WaveState,
    pub steps: usize,
    /// Human-readable warnings raised during the run (CFL, normalization drift).
    pub flags: Vec<String>,
}

/// Steps `s0` to `cfg.t_end`, handing a diagnostics record to `sink` at the
/// start, every `output_every` steps and at the end.
pub fn run<F>(s0: &WaveState, cfg: &SimConfig, mut sink: F) -> Result<RunSummary>
where
    F: FnMut(&WaveState, &DiagnosticsRecord) -> Result<()>,
{
    cfg.validate()?;
    if let Some(reason) = blowup_reason(s0, cfg.c_min) {
        return Err(WaveError::BlowUp {
            t: s0.t,
            last_good_t: s0.t,
            reason,
        });
    }
    let mut flags = Vec::new();
    let mut drift_flagged = false;
    let mut cfl_flagged = false;
    let mut emit = |s: &WaveState, flags: &mut Vec<String>| -> Result<()> {
        let rec = diagnostics(s, cfg.c_min)?;
        if !drift_flagged && s.normalization_drift() > NORMALIZATION_TOL {
            drift_flagged = true;
            flags.push(format!(
                "normalization drift {:.3e} at t = {}",
                s.normalization_drift(),
                s.t
            ));
        }
        sink(s, &rec)
    };
    emit(s0, &mut flags)?;
    let n = cfg.n_steps();
    let mut s = s0.clone();
    for k in 1..=n {
        if k == 1 || k % cfg.output_every == 0 {
            let df = crate::state::derive_all(&s, cfg.c_min)?;
            let cn = courant_number(&df, cfg.dt);
            if cn > CFL_WARN && !cfl_flagged {
                cfl_flagged = true;
                warn!("Courant number {cn:.3} above {CFL_WARN} at t = {}", s.t);
                flags.push(format!("Courant number {cn:.3e} at t = {}", s.t));
            }
        }
        let next = step(&s, cfg).map_err(|e| match e {
            WaveError::DegenerateSurface { min_abs, c_min } => WaveError::BlowUp {
                t: s.t + cfg.dt,
                last_good_t: s.t,
                reason: format!("min |1 + W_alpha| = {min_abs:.3e} below c_min = {c_min}"),
            },
            other => other,
        })?;
        if let Some(reason) = blowup_reason(&next, cfg.c_min) {
            return Err(WaveError::BlowUp {
                t: next.t,
                last_good_t: s.t,
                reason,
            });
        }
        s = next;
        if k % cfg.output_every == 0 || k == n {
            emit(&s, &mut flags)?;
        }
    }
    Ok(RunSummary {
        final_state: s,
        steps: n,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use crate::state::{derive_all, random_state, DEFAULT_C_MIN};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn holo(f: SpectralField) -> HoloField {
        HoloField::new(f).unwrap()
    }

    #[test]
    fn flat_state_is_stationary() {
        let g = grid(32);
        let s = WaveState::flat(&g);
        let (wt, qt) = rhs_full(&s, DEFAULT_C_MIN).unwrap();
        assert_eq!(wt.max_coeff() + qt.max_coeff(), 0.0);
        let d = s.diff_state(DEFAULT_C_MIN).unwrap();
        let (a, b) = rhs_diff(&d, DEFAULT_C_MIN).unwrap();
        assert_eq!(a.max_coeff() + b.max_coeff(), 0.0);
        let cfg = SimConfig {
            n_modes: 32,
            t_end: 0.05,
            dt: 0.01,
            output_every: 1,
            ..SimConfig::default()
        };
        let mut count = 0;
        let sum = run(&s, &cfg, |_, rec| {
            assert_eq!(rec.e, 0.0);
            count += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(count, 6);
        assert_eq!(sum.final_state.w.max_coeff(), 0.0);
        assert!(sum.flags.is_empty());
    }

    #[test]
    fn small_amplitude_limit_is_linear_system() {
        // rhs_full(δw, δq)/δ -> (-q_α, i w)
        let g = grid(64);
        let base = random_state(&g, 4, 1.0, 0.5);
        let lin_w = -base.q.deriv(1);
        let lin_q = base.w.mul_i();
        let mut errs = vec![];
        for delta in [1e-3, 5e-4] {
            let s = WaveState {
                w: holo(base.w.as_field() * delta),
                q: holo(base.q.as_field() * delta),
                t: 0.0,
            };
            let (wt, qt) = rhs_full(&s, DEFAULT_C_MIN).unwrap();
            let e = (&(wt * (1.0 / delta)) - &lin_w).max_coeff()
                + (&(qt * (1.0 / delta)) - &lin_q).max_coeff();
            errs.push(e);
        }
        assert!(errs[0] < 1e-2);
        assert!((errs[0] / errs[1] - 2.0).abs() < 0.05, "{errs:?}");
    }

    /// `W_t` to second order in amplitude: with `J⁻¹ ≈ 1 - 𝐖 - 𝐖̄`,
    /// `W_t ≈ -P[Q_α - Q̄_α] + P[(Q_α - Q̄_α)(𝐖 + 𝐖̄)] - 𝐖 P[Q_α - Q̄_α]`.
    #[test]
    fn second_order_expansion_of_wt() {
        let g = grid(64);
        let mut errs = vec![];
        for eps in [1e-2, 5e-3] {
            let w = SpectralField::from_modes(&g, &[(-1, c(0.0, eps)), (-2, c(0.5 * eps, 0.0))]).unwrap();
            let q = SpectralField::from_modes(&g, &[(-1, c(eps, 0.0)), (-3, c(0.0, eps))]).unwrap();
            let s = WaveState::new(holo(w.clone()), holo(q.clone()), 0.0).unwrap();
            let (wt, _) = rhs_full(&s, DEFAULT_C_MIN).unwrap();
            let wa = w.deriv(1);
            let qa = q.deriv(1);
            let diff = &qa - &qa.conj();
            let lin = diff.project_p();
            let quad = (&diff.padded() * &(&wa + &wa.conj()).padded()).to_field().project_p()
                - (&wa.padded() * &lin.padded()).to_field();
            let expect = &quad - &lin;
            errs.push((&wt - &expect).max_coeff() / eps.powi(3));
        }
        // residual is cubic: the normalized error settles
        assert!(errs[0] < 50.0);
        assert!((errs[0] / errs[1] - 1.0).abs() < 0.05, "{errs:?}");
    }

    #[test]
    fn differentiated_rhs_matches_chain_rule() {
        let g = grid(256);
        let s = random_state(&g, 8, 0.1, 0.5);
        let (wt, qt) = rhs_full(&s, DEFAULT_C_MIN).unwrap();
        let d = s.diff_state(DEFAULT_C_MIN).unwrap();
        let (wat, rt) = rhs_diff(&d, DEFAULT_C_MIN).unwrap();
        // W_αt = ∂_α W_t;  R_t = (Q_αt - R W_αt)/(1+W_α)
        let wat_chain = wt.deriv(1);
        let opw = d.wa.padded() + 1.0;
        let rt_chain = (&(&qt.deriv(1).padded() - &(&d.r.padded() * &wat_chain.padded())) / &opw).to_field();
        assert!((&wat - &wat_chain).sup_norm() < 1e-11);
        assert!((&rt - &rt_chain).sup_norm() < 1e-11);
    }

    #[test]
    fn polynomial_y_form_matches_chain_rule() {
        let g = grid(256);
        let s = random_state(&g, 12, 0.1, 0.5);
        let d = s.diff_state(DEFAULT_C_MIN).unwrap();
        let df = derive_diff(&d, DEFAULT_C_MIN).unwrap();
        let (wat, _) = rhs_diff_with_pub(&df);
        let opw = df.wa.padded() + 1.0;
        let yt_chain = (&wat.padded() / &(&opw * &opw)).to_field();
        let yt_poly = rhs_y_polynomial(&df);
        assert!((&yt_chain - &yt_poly).sup_norm() < 1e-11);
    }

    fn rhs_diff_with_pub(df: &DerivedFields) -> (SpectralField, SpectralField) {
        rhs_diff_with(df)
    }

    #[test]
    fn flat_linearization_and_dispersion() {
        let g = grid(64);
        let bg = derive_all(&WaveState::flat(&g), DEFAULT_C_MIN).unwrap();
        let w = SpectralField::from_modes(&g, &[(-3, c(0.4, 0.1))]).unwrap();
        let r = SpectralField::from_modes(&g, &[(-3, c(-0.2, 0.5)), (-5, c(1.0, 0.0))]).unwrap();
        let p = LinState { w: holo(w.clone()), r: holo(r.clone()) };
        for form in [
            LinForm::Unprojected,
            LinForm::Projected(ZeroModePolicy::SplitProjection),
            LinForm::Projected(ZeroModePolicy::ProjectorP),
        ] {
            let (wt, rt) = rhs_linearized(&bg, &p, form);
            assert!((&wt + &r.deriv(1)).max_coeff() < 1e-15);
            assert!((&rt - &w.mul_i()).max_coeff() < 1e-15);
        }
    }

    #[test]
    fn diagonal_form_equals_exact_linearization() {
        let g = grid(256);
        let s = random_state(&g, 21, 0.1, 0.5);
        let bg = derive_all(&s, DEFAULT_C_MIN).unwrap();
        let pert = random_state(&g, 22, 1.0, 0.5);
        let p = LinState::from_wq(&pert.w, &pert.q, &bg).unwrap();
        let (wt, rt) = rhs_linearized(&bg, &p, LinForm::Unprojected);
        let (wt2, qt2) = rhs_linearized_wq(&bg, &pert.w, &pert.q);
        // r_t = q_t - R_t w - R w_t
        let (_, rt_bg) = rhs_diff(&s.diff_state(DEFAULT_C_MIN).unwrap(), DEFAULT_C_MIN).unwrap();
        let rt2 = &qt2
            - &(&(&rt_bg.padded() * &pert.w.padded()) + &(&bg.r.padded() * &wt2.padded())).to_field();
        assert!((&wt - &wt2).sup_norm() < 1e-10);
        assert!((&rt - &rt2).sup_norm() < 1e-10);
        // with w mean imaginary and r mean real the split projection changes nothing
        let (pw, pr) = rhs_linearized(&bg, &p, LinForm::Projected(ZeroModePolicy::SplitProjection));
        assert!((&wt - &pw).sup_norm() < 1e-10);
        assert!((&rt - &pr).sup_norm() < 1e-10);
        // while plain P halves the zero mode
        let (qw, _) = rhs_linearized(&bg, &p, LinForm::Projected(ZeroModePolicy::ProjectorP));
        assert!(((&qw - &wt).mean() + wt.mean() * 0.5).norm() < 1e-14);
    }

    #[test]
    fn full_flow_preserves_normalization_exactly() {
        let g = grid(128);
        let s = random_state(&g, 1, 0.1, 0.5);
        let (wt, qt) = rhs_full(&s, DEFAULT_C_MIN).unwrap();
        assert!(wt.mean().re.abs() < 1e-16);
        assert!(qt.mean().im.abs() < 1e-16);
        assert!(wt.positive_leakage() < 1e-16 && qt.positive_leakage() < 1e-16);
    }

    #[test]
    fn forward_backward_returns_to_start() {
        let g = grid(64);
        let s = random_state(&g, 2, 0.05, 0.5);
        let mut errs = vec![];
        for dt in [0.02, 0.01] {
            let fwd = step_rk4(&s, dt, DEFAULT_C_MIN).unwrap();
            let back = step_rk4(&fwd, -dt, DEFAULT_C_MIN).unwrap();
            errs.push((back.w.as_field() - s.w.as_field()).max_coeff()
                + (back.q.as_field() - s.q.as_field()).max_coeff());
        }
        assert!(errs[0] < 1e-8, "{errs:?}");
        assert!(errs[0] / errs[1] > 16.0, "{errs:?}");
    }

    #[test]
    fn linear_mode_rotates_at_unit_frequency() {
        let g = grid(32);
        let eps = 1e-6;
        let w = SpectralField::from_modes(&g, &[(-1, c(eps, 0.0))]).unwrap();
        // eigenvector of w_t = -q_α, q_t = i w with w ∝ e^{-it}
        let q = SpectralField::from_modes(&g, &[(-1, c(-eps, 0.0))]).unwrap();
        let mut s = WaveState::new(holo(w), holo(q), 0.0).unwrap();
        let dt = 0.01;
        for _ in 0..100 {
            s = step_rk4(&s, dt, DEFAULT_C_MIN).unwrap();
        }
        let phase = Complex64::from_polar(1.0, -1.0);
        assert!((s.w.coeff(-1) - phase * eps).norm() / eps < 1e-6);
    }

    #[test]
    fn inadmissible_start_is_reported() {
        let g = grid(64);
        let w = SpectralField::from_modes(&g, &[(-1, c(0.0, 0.5))]).unwrap();
        let s = WaveState::new(holo(w), HoloField::zeros(&g), 0.0).unwrap();
        let cfg = SimConfig {
            n_modes: 64,
            dt: 0.01,
            t_end: 50.0,
            c_min: 0.6,
            ..SimConfig::default()
        };
        let err = run(&s, &cfg, |_, _| Ok(())).unwrap_err();
        match err {
            WaveError::BlowUp { t, last_good_t, .. } => assert_eq!(t, last_good_t),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn filter_leaves_low_modes_alone() {
        let g = grid(64);
        let f = SpectralField::from_modes(&g, &[(-1, c(1.0, 0.0)), (-21, c(1.0, 0.0))]).unwrap();
        let out = apply_filter(&f, 36, 36.0);
        assert!((out.coeff(-1).re - 1.0).abs() < 1e-15);
        assert!((out.coeff(-21).re - (-36.0f64).exp()).abs() < 1e-20);
        assert_eq!(apply_filter(&f, 0, 36.0).coeffs(), f.coeffs());
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        for bad in [
            SimConfig { dt: 0.0, ..SimConfig::default() },
            SimConfig { n_modes: 100, ..SimConfig::default() },
            SimConfig { output_every: 0, ..SimConfig::default() },
            SimConfig { c_min: 1.5, ..SimConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(WaveError::Config(_))));
        }
        let cfg = SimConfig { t_end: 1.0, dt: 0.1, ..SimConfig::default() };
        assert_eq!(cfg.n_steps(), 10);
    }
}
