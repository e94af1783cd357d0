//! Quadratic normal form `W̃ = W - 2P[Re W · W_α]`, `Q̃ = Q - 2P[Re W · R]`
//! and the cubic remainders it leaves in the equations.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::rhs_full;
use crate::error::Result;
use crate::spectral::{HoloField, SpectralField};
use crate::state::{derive_all, WaveState};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Normal-form variables `(W̃, Q̃)`.
#[derive(Clone, Debug)]
pub struct NFState {
    pub wt: HoloField,
    pub qt: HoloField,
}

/// `P[f g]` evaluated on the padded grid.
fn holo_mul(f: &SpectralField, g: &SpectralField) -> SpectralField {
    (&f.padded() * &g.padded()).to_field().project_p()
}

pub fn normal_form(s: &WaveState, c_min: f64) -> Result<NFState> {
    let d = derive_all(s, c_min)?;
    let re_w = s.w.re();
    let wt = s.w.as_field() - &(holo_mul(&re_w, &d.wa) * 2.0);
    let qt = s.q.as_field() - &(holo_mul(&re_w, &d.r) * 2.0);
    Ok(NFState {
        wt: HoloField::new_unchecked(wt),
        qt: HoloField::new_unchecked(qt),
    })
}

/// Remainders `G̃ = W̃_t + Q̃_α`, `K̃ = Q̃_t - iW̃` computed two ways.
#[derive(Clone, Debug)]
pub struct NfResidual {
    /// From the closed-form cubic expressions.
    pub g_formula: SpectralField,
    pub k_formula: SpectralField,
    /// From differentiating the transformation along the flow.
    pub g_flow: SpectralField,
    pub k_flow: SpectralField,
    /// `‖G̃‖₂`, `‖K̃‖₂` of the closed-form route.
    pub g_norm: f64,
    pub k_norm: f64,
    /// Largest sup-norm difference between the two routes.
    pub crosscheck: f64,
}

/// Row of an amplitude scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NfScanRow {
    pub epsilon: f64,
    #[serde(rename = "normG")]
    pub norm_g: f64,
    #[serde(rename = "normK")]
    pub norm_k: f64,
    pub crosscheck_residual: f64,
}

pub fn nf_residual(s: &WaveState, c_min: f64) -> Result<NfResidual> {
    let (g_formula, k_formula) = remainders_formula(s, c_min)?;
    let (g_flow, k_flow) = remainders_flow(s, c_min)?;
    let crosscheck = (&g_formula - &g_flow)
        .sup_norm()
        .max((&k_formula - &k_flow).sup_norm());
    Ok(NfResidual {
        g_norm: g_formula.l2_norm(),
        k_norm: k_formula.l2_norm(),
        g_formula,
        k_formula,
        g_flow,
        k_flow,
        crosscheck,
    })
}

/// Closed-form expressions:
///
/// `G̃ = 2P[(F-R)_α Re W + 𝐖_α F Re W + 𝐖 Re(𝐖F) + F_α 𝐖 Re W]
///      - P[𝐖̄ R Ȳ - 𝐖(P[R̄Y] + P̄[RȲ])]`
///
/// `K̃ = P[(F̄(1+𝐖̄) - R̄)R + 2i P[(𝐖² + a)/(1+𝐖)] Re W + 2P[bR_α] Re W]`
pub fn remainders_formula(s: &WaveState, c_min: f64) -> Result<(SpectralField, SpectralField)> {
    let d = derive_all(s, c_min)?;
    let re_w = s.w.re().padded();
    let f = d.f.as_field();
    let r = d.r.as_field();
    let wa = d.wa.padded();
    let f_s = f.padded();
    let r_s = r.padded();
    let y_s = d.y.padded();

    let fr_a = (f - r).deriv(1).padded();
    let waa = d.wa.deriv(1).padded();
    let re_waf = (&wa * &f_s).re();
    let f_a = f.deriv(1).padded();
    let first = (&(&fr_a * &re_w) + &(&(&waa * &f_s) * &re_w))
        + (&(&wa * &re_waf) + &(&(&f_a * &wa) * &re_w));
    let first = first.to_field().project_p() * 2.0;
    let ry = (&r_s.conj() * &y_s).to_field();
    let ryb = (&r_s * &y_s.conj()).to_field();
    let inner = (ry.project_p() + ryb.project_pbar()).padded();
    let second = (&(&(&wa.conj() * &r_s) * &y_s.conj()) - &(&wa * &inner))
        .to_field()
        .project_p();
    let g = first - second;

    let opw = &wa + 1.0;
    let term1 = &(&(&f_s.conj() * &opw.conj()) - &r_s.conj()) * &r_s;
    let term2 = (&(&(&wa * &wa) + &d.a.padded()) / &opw)
        .to_field()
        .project_p()
        .padded()
        * (2.0 * I);
    let term3 = (&d.b.padded() * &d.r.deriv(1).padded())
        .to_field()
        .project_p()
        .padded()
        * 2.0;
    let k = (&term1 + &(&(&term2 * &re_w) + &(&term3 * &re_w)))
        .to_field()
        .project_p();
    Ok((g, k))
}

/// Chain rule through the transformation with `(W_t, Q_t)` from the full system.
pub fn remainders_flow(s: &WaveState, c_min: f64) -> Result<(SpectralField, SpectralField)> {
    let d = derive_all(s, c_min)?;
    let (w_t, q_t) = rhs_full(s, c_min)?;
    let re_w = s.w.re();
    let wa_t = w_t.deriv(1);
    let opw = d.wa.padded() + 1.0;
    let r_t = (&(&q_t.deriv(1).padded() - &(&d.r.padded() * &wa_t.padded())) / &opw).to_field();
    let re_wt = w_t.re();

    let wtil_t = &w_t - &((holo_mul(&re_wt, &d.wa) + holo_mul(&re_w, &wa_t)) * 2.0);
    let qtil_t = &q_t - &((holo_mul(&re_wt, &d.r) + holo_mul(&re_w, &r_t)) * 2.0);
    let nf = normal_form(s, c_min)?;
    let g = wtil_t + nf.qt.deriv(1);
    let k = qtil_t - nf.wt.mul_i();
    Ok((g, k))
}

/// `(R - F) - P[RȲ - R̄Y]`, which vanishes identically.
pub fn rf_minus_r(s: &WaveState, c_min: f64) -> Result<HoloField> {
    let d = derive_all(s, c_min)?;
    let r_s = d.r.padded();
    let y_s = d.y.padded();
    let rhs = (&(&r_s * &y_s.conj()) - &(&r_s.conj() * &y_s)).to_field().project_p();
    Ok(HoloField::new_unchecked(&(d.r.as_field() - d.f.as_field()) - &rhs))
}

/// `R - F`, quadratic in amplitude.
pub fn r_minus_f(s: &WaveState, c_min: f64) -> Result<SpectralField> {
    let d = derive_all(s, c_min)?;
    Ok(d.r.as_field() - d.f.as_field())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Remainder norms for `base` rescaled by each amplitude.
pub fn nf_scan(base: &WaveState, eps: &[f64], c_min: f64) -> Result<Vec<NfScanRow>> {
    eps.iter()
        .map(|&e| {
            let s = WaveState {
                w: HoloField::new_unchecked(base.w.as_field() * e),
                q: HoloField::new_unchecked(base.q.as_field() * e),
                t: base.t,
            };
            let res = nf_residual(&s, c_min)?;
            Ok(NfScanRow {
                epsilon: e,
                norm_g: res.g_norm,
                norm_k: res.k_norm,
                crosscheck_residual: res.crosscheck,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use crate::state::{random_state, DEFAULT_C_MIN};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize) -> Grid {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn flat_and_zero_w() {
        let g = grid(64);
        let nf = normal_form(&WaveState::flat(&g), DEFAULT_C_MIN).unwrap();
        assert_eq!(nf.wt.max_coeff() + nf.qt.max_coeff(), 0.0);
        let res = nf_residual(&WaveState::flat(&g), DEFAULT_C_MIN).unwrap();
        assert_eq!(res.g_norm + res.k_norm + res.crosscheck, 0.0);
        let q = SpectralField::from_modes(&g, &[(-2, c(0.1, 0.2))]).unwrap();
        let s = WaveState::from_fields(SpectralField::zeros(&g), q.clone(), 0.0).unwrap();
        let nf = normal_form(&s, DEFAULT_C_MIN).unwrap();
        assert_eq!(nf.wt.max_coeff(), 0.0);
        assert!((nf.qt.as_field() - &q).max_coeff() == 0.0);
    }

    #[test]
    fn single_mode_transform() {
        // W = εe^{-iα}  =>  W̃ = εe^{-iα} + iε²(e^{-2iα} + 1/2)
        let g = grid(64);
        let eps = 0.1;
        let w = SpectralField::from_modes(&g, &[(-1, c(eps, 0.0))]).unwrap();
        let s = WaveState::from_fields(w, SpectralField::zeros(&g), 0.0).unwrap();
        let nf = normal_form(&s, DEFAULT_C_MIN).unwrap();
        let expect = SpectralField::from_modes(
            &g,
            &[(-1, c(eps, 0.0)), (-2, c(0.0, eps * eps)), (0, c(0.0, 0.5 * eps * eps))],
        )
        .unwrap();
        assert!((nf.wt.as_field() - &expect).max_coeff() < 1e-17);
    }

    #[test]
    fn transform_is_near_identity() {
        let g = grid(128);
        let base = random_state(&g, 3, 1.0, 0.5);
        let eps = [0.02, 0.01, 0.005];
        let dev: Vec<f64> = eps
            .iter()
            .map(|&e| {
                let s = WaveState {
                    w: HoloField::new_unchecked(base.w.as_field() * e),
                    q: HoloField::new_unchecked(base.q.as_field() * e),
                    t: 0.0,
                };
                let nf = normal_form(&s, DEFAULT_C_MIN).unwrap();
                (nf.wt.as_field() - s.w.as_field()).l2_norm() + (nf.qt.as_field() - s.q.as_field()).l2_norm()
            })
            .collect();
        let slope = loglog_slope(&eps, &dev);
        assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn remainders_agree_and_are_cubic() {
        let g = grid(256);
        let base = random_state(&g, 17, 1.0, 0.5);
        let eps = [0.1, 0.05, 0.025, 0.0125];
        let rows = nf_scan(&base, &eps, DEFAULT_C_MIN).unwrap();
        for row in &rows {
            assert!(row.crosscheck_residual < 1e-9, "{row:?}");
        }
        let tot: Vec<f64> = rows.iter().map(|r| r.norm_g.hypot(r.norm_k)).collect();
        let slope = loglog_slope(&eps, &tot);
        assert!((slope - 3.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn r_minus_f_identity_and_quadratic_size() {
        let g = grid(256);
        let base = random_state(&g, 2, 1.0, 0.5);
        let eps = [0.04, 0.02, 0.01];
        let mut sizes = vec![];
        for &e in &eps {
            let s = WaveState {
                w: HoloField::new_unchecked(base.w.as_field() * e),
                q: HoloField::new_unchecked(base.q.as_field() * e),
                t: 0.0,
            };
            assert!(rf_minus_r(&s, DEFAULT_C_MIN).unwrap().sup_norm() < 1e-10);
            sizes.push(r_minus_f(&s, DEFAULT_C_MIN).unwrap().l2_norm());
        }
        let slope = loglog_slope(&eps, &sizes);
        assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn frechet_derivative_at_zero_is_identity() {
        let g = grid(64);
        let p = random_state(&g, 5, 1.0, 0.5);
        let h = 1e-6;
        let s = WaveState {
            w: HoloField::new_unchecked(p.w.as_field() * h),
            q: HoloField::new_unchecked(p.q.as_field() * h),
            t: 0.0,
        };
        let nf = normal_form(&s, DEFAULT_C_MIN).unwrap();
        let dw = nf.wt.as_field() * (1.0 / h);
        assert!((&dw - p.w.as_field()).max_coeff() < 1e-5);
        let dq = nf.qt.as_field() * (1.0 / h);
        assert!((&dq - p.q.as_field()).max_coeff() < 1e-5);
    }

    #[test]
    fn slope_fit_is_exact_on_power_law() {
        let x = [1.0, 2.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.0)).collect();
        assert!((loglog_slope(&x, &y) + 2.0).abs() < 1e-14);
    }
}
