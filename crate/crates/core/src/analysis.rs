//! Energies, control norms, dyadic diagnostics and the paraproduct toolkit.
//!
//! Energies use the normalization in which the kinetic and potential parts
//! carry equal weight, `E0(w, r) = ∫ |w|² + Im(r r̄_α)`, which is the one
//! conserved by the linear flow `w_t = -r_α`, `r_t = i w`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::normalform::nf_residual;
use crate::spectral::SpectralField;
use crate::state::{derive_diff, DerivedFields, DiffState, WaveState};

/// `∫ Im(f f̄_α) dα = L Σ_k (-κ_k) |f̂_k|²`.
fn im_f_fbar_alpha(f: &SpectralField) -> f64 {
    let g = f.grid();
    g.period()
        * f.modes()
            .map(|(k, c)| -g.wavenumber(k) * c.norm_sqr())
            .sum::<f64>()
}

fn l2_sq(f: &SpectralField) -> f64 {
    f.grid().period() * f.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// Quadratic energy of the flat linearized system, `∫ |w|² + Im(r r̄_α)`.
pub fn energy_e0(w: &SpectralField, r: &SpectralField) -> f64 {
    l2_sq(w) + im_f_fbar_alpha(r)
}

/// Conserved energy of the full system,
/// `∫ |W|² + Im(Q Q̄_α) - Re(W̄² W_α) dα + L |mean W|²`.
///
/// The last term compensates the zero mode of `W` on the torus: the
/// quadratic and cubic integrals alone change at the rate of `d/dt (mean W)²`.
pub fn energy_e(s: &WaveState) -> f64 {
    let w = s.w.as_field();
    let ws = w.padded();
    let cubic = (&(&ws.conj() * &ws.conj()) * &w.deriv(1).padded()).integral().re;
    let zero = w.grid().period() * w.mean().norm_sqr();
    l2_sq(w) + im_f_fbar_alpha(&s.q) - cubic + zero
}

/// `∫ (1 + a)|w|² + Im(r r̄_α)`.
pub fn energy_e2lin(bg: &DerivedFields, w: &SpectralField, r: &SpectralField) -> f64 {
    let weight = bg.a.padded() + 1.0;
    let quad = (&weight * &w.padded().norm_sqr()).integral().re;
    quad + im_f_fbar_alpha(r)
}

/// `E2lin + ∫ 2 Im(R̄ w♯ r_α) - 2 Re(𝐖̄ (w♯)²)` with `w♯ = P♯ w` the
/// mean-free part of `w`.
pub fn energy_e3lin(bg: &DerivedFields, w: &SpectralField, r: &SpectralField) -> f64 {
    let ws = w.project_psharp().padded();
    let rbar = bg.r.padded().conj();
    let wbar = bg.wa.padded().conj();
    let c1 = (&(&rbar * &ws) * &r.deriv(1).padded()).integral().im;
    let c2 = (&wbar * &(&ws * &ws)).integral().re;
    energy_e2lin(bg, w, r) + 2.0 * c1 - 2.0 * c2
}

/// Weighted pair `(P[e^{2φ}𝐖_α], P[e^{2φ}ℝ])` with `φ = -2 log|1 + 𝐖|`.
pub fn n2_pair(df: &DerivedFields) -> (SpectralField, SpectralField) {
    let opw = df.wa.padded() + 1.0;
    let j = opw.norm_sqr();
    let weight = (&j * &j).recip();
    let w = (&weight * &df.wa.deriv(1).padded()).to_field().project_p();
    let r = (&weight * &df.rr.padded()).to_field().project_p();
    (w, r)
}

/// Modified energy at the second derivative level: `E3lin` of [`n2_pair`].
pub fn energy_n2_cubic(d: &DiffState, c_min: f64) -> Result<f64> {
    let df = derive_diff(d, c_min)?;
    let (w, r) = n2_pair(&df);
    Ok(energy_e3lin(&df, &w, &r))
}

fn sup_nodes(f: &SpectralField) -> f64 {
    f.sup_norm()
}

/// `A = ‖𝐖‖∞ + ‖Y‖∞ + max(‖|D|^½ R‖∞, besov_proxy(|D|^½ R))`.
pub fn norm_a(d: &DiffState) -> f64 {
    let wa = d.wa.as_field();
    let y = (&wa.padded() / &(wa.padded() + 1.0)).to_field();
    let hr = d.r.frac_deriv(0.5);
    sup_nodes(wa) + sup_nodes(&y) + sup_nodes(&hr).max(besov_proxy(&hr))
}

/// `B = bmo_proxy(|D|^½ 𝐖) + bmo_proxy(R_α)`.
pub fn norm_b(d: &DiffState) -> f64 {
    bmo_proxy(&d.wa.frac_deriv(0.5)) + bmo_proxy(&d.r.deriv(1))
}

/// Largest mean oscillation `|I|⁻¹ Σ_{α_j ∈ I} |f(α_j) - avg_I f| h` over
/// node-aligned dyadic windows `I` holding at least two nodes.
pub fn bmo_proxy(f: &SpectralField) -> f64 {
    let vals = f.to_physical();
    let n = vals.len();
    let mut best = 0.0f64;
    let mut size = n;
    while size >= 2 {
        for chunk in vals.chunks_exact(size) {
            let avg: Complex64 = chunk.iter().sum::<Complex64>() / size as f64;
            let osc = chunk.iter().map(|z| (z - avg).norm()).sum::<f64>() / size as f64;
            best = best.max(osc);
        }
        size /= 2;
    }
    best
}

/// `(Σ_k ‖P_k f‖∞²)^½` over dyadic blocks.
pub fn besov_proxy(f: &SpectralField) -> f64 {
    f.lp_decompose()
        .iter()
        .map(|b| b.sup_norm().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `(L Σ_k |κ_k|^{2s} |f̂_k|²)^½`.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    f.frac_deriv(s).l2_norm()
}

/// Paraproduct pieces of `fg`.
#[derive(Clone, Debug)]
pub struct Paraproducts {
    /// `Σ_k f_{<k-gap} g_k`
    pub low_high: SpectralField,
    /// `Σ_k g_{<k-gap} f_k`
    pub high_low: SpectralField,
    /// `Σ_{|j-k| ≤ gap} f_j g_k`
    pub high_high: SpectralField,
}

impl Paraproducts {
    pub fn sum(&self) -> SpectralField {
        &(&self.low_high + &self.high_low) + &self.high_high
    }
}

/// Block separation used by [`paraproducts`].
pub const PARAPRODUCT_GAP: usize = 4;

/// Low-high, high-low and diagonal parts of the dealiased product.
pub fn paraproducts(f: &SpectralField, g: &SpectralField) -> Result<Paraproducts> {
    paraproducts_with_gap(f, g, PARAPRODUCT_GAP)
}

pub fn paraproducts_with_gap(f: &SpectralField, g: &SpectralField, gap: usize) -> Result<Paraproducts> {
    if f.grid() != g.grid() {
        return Err(WaveError::GridMismatch);
    }
    let fb = f.lp_decompose();
    let gb = g.lp_decompose();
    let nb = fb.len();
    let zero = SpectralField::zeros(f.grid());
    let mut low_high = zero.clone();
    let mut high_low = zero.clone();
    let mut high_high = zero;
    for k in 0..nb {
        if k > gap {
            low_high += &f.lp_low(k - gap).product(&gb[k])?;
            high_low += &g.lp_low(k - gap).product(&fb[k])?;
        }
        for j in k.saturating_sub(gap)..(k + gap + 1).min(nb) {
            high_high += &fb[j].product(&gb[k])?;
        }
    }
    Ok(Paraproducts {
        low_high,
        high_low,
        high_high,
    })
}

/// `[P, g] f = P(g f) - g P(f)` with dealiased products.
pub fn commutator_p(g: &SpectralField, f: &SpectralField) -> Result<SpectralField> {
    Ok(g.product(f)?.project_p() - g.product(&f.project_p())?)
}

/// `‖|D|^s [P, g] |D|^σ f‖₂ / (bmo_proxy(|D|^{σ+s} g) ‖f‖₂)`.
pub fn commutator_ratio(g: &SpectralField, f: &SpectralField, s: f64, sigma: f64) -> Result<f64> {
    let num = commutator_p(g, &f.frac_deriv(sigma))?.frac_deriv(s).l2_norm();
    let den = bmo_proxy(&g.frac_deriv(sigma + s)) * f.l2_norm();
    Ok(num / den)
}

/// Slowly varying majorant of the dyadic block norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub delta: f64,
    pub values: Vec<f64>,
}

impl Envelope {
    /// Smallest sequence above `norms` with `c_j / c_k ≤ 2^{δ|j-k|}`:
    /// `c_k = max_j 2^{-δ|j-k|} n_j`.
    pub fn from_block_norms(norms: &[f64], delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(WaveError::Config(format!("envelope delta must lie in (0, 1), got {delta}")));
        }
        let values = (0..norms.len())
            .map(|k| {
                norms
                    .iter()
                    .enumerate()
                    .map(|(j, &n)| n * 2f64.powf(-delta * (j as f64 - k as f64).abs()))
                    .fold(0.0, f64::max)
            })
            .collect();
        Ok(Envelope { delta, values })
    }
}

/// `L²` norms of the dyadic blocks of `f`.
pub fn block_norms(f: &SpectralField) -> Vec<f64> {
    f.lp_decompose().iter().map(|b| b.l2_norm()).collect()
}

/// Default envelope parameter.
pub const ENVELOPE_DELTA: f64 = 0.1;

pub fn frequency_envelope(f: &SpectralField, delta: f64) -> Result<Envelope> {
    Envelope::from_block_norms(&block_norms(f), delta)
}

/// Per-snapshot diagnostics.
///
/// `E0`, `E2lin`, `E3lin` are evaluated on the pair `(𝐖, R)`, which solves the
/// linearized equations around the current state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E2lin")]
    pub e2lin: f64,
    #[serde(rename = "E3lin")]
    pub e3lin: f64,
    #[serde(rename = "normA")]
    pub norm_a: f64,
    #[serde(rename = "normB")]
    pub norm_b: f64,
    #[serde(rename = "minJ")]
    pub min_j: f64,
    #[serde(rename = "min1plusA")]
    pub min_1_plus_a: f64,
    #[serde(rename = "meanW_re")]
    pub mean_w_re: f64,
    #[serde(rename = "meanQ_im")]
    pub mean_q_im: f64,
    #[serde(rename = "sup_Wa")]
    pub sup_wa: f64,
    #[serde(rename = "sup_R")]
    pub sup_r: f64,
    #[serde(rename = "E2_high")]
    pub e2_high: f64,
    #[serde(rename = "nf_residual_G")]
    pub nf_residual_g: f64,
    #[serde(rename = "nf_residual_K")]
    pub nf_residual_k: f64,
    pub envelope: Vec<f64>,
}

pub fn diagnostics(s: &WaveState, c_min: f64) -> Result<DiagnosticsRecord> {
    let d = s.diff_state(c_min)?;
    let df = derive_diff(&d, c_min)?;
    let (n2w, n2r) = n2_pair(&df);
    let nf = nf_residual(s, c_min)?;
    let min_j = df.min_abs_opw * df.min_abs_opw;
    Ok(DiagnosticsRecord {
        t: s.t,
        e: energy_e(s),
        e0: energy_e0(&d.wa, &d.r),
        e2lin: energy_e2lin(&df, &d.wa, &d.r),
        e3lin: energy_e3lin(&df, &d.wa, &d.r),
        norm_a: norm_a(&d),
        norm_b: norm_b(&d),
        min_j,
        min_1_plus_a: crate::state::taylor_sign(&df),
        mean_w_re: s.w.mean().re,
        mean_q_im: s.q.mean().im,
        sup_wa: d.wa.sup_norm(),
        sup_r: d.r.sup_norm(),
        e2_high: energy_e3lin(&df, &n2w, &n2r),
        nf_residual_g: nf.g_norm,
        nf_residual_k: nf.k_norm,
        envelope: frequency_envelope(&d.wa, ENVELOPE_DELTA)?.values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::step_rk4;
    use crate::spectral::{Grid, HoloField};
    use crate::state::{derive_all, random_state, DEFAULT_C_MIN};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize) -> Grid {
        Grid::new(n, 2.0 * PI).unwrap()
    }

    fn mode(g: &Grid, k: i64, a: Complex64) -> SpectralField {
        SpectralField::from_modes(g, &[(k, a)]).unwrap()
    }

    fn random_field(g: &Grid, seed: u64, band: i64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<_> = (-band..=band)
            .map(|k| (k, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        SpectralField::from_modes(g, &modes).unwrap()
    }

    /// Trapezoid quadrature of `f` on `m` uniform points (exact for trig
    /// polynomials of degree below `m`).
    fn quad(g: &Grid, m: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = g.period() / m as f64;
        (0..m).map(|j| f(j as f64 * h)).sum::<f64>() * h
    }

    #[test]
    fn e0_examples() {
        let g = grid(32);
        let z = SpectralField::zeros(&g);
        assert_eq!(energy_e0(&z, &z), 0.0);
        let e = mode(&g, -1, c(1.0, 0.0));
        assert_abs_diff_eq!(energy_e0(&e, &z), 2.0 * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(energy_e0(&z, &e), 2.0 * PI, epsilon = 1e-14);
    }

    #[test]
    fn e0_matches_quadrature() {
        let g = grid(64);
        let w = random_field(&g, 1, 10);
        let r = random_field(&g, 2, 10);
        let ra = r.deriv(1);
        let direct = quad(&g, 256, |x| {
            let (wv, rv, rav) = (w.eval(x), r.eval(x), ra.eval(x));
            wv.norm_sqr() + (rv * rav.conj()).im
        });
        assert_abs_diff_eq!(energy_e0(&w, &r), direct, epsilon = 1e-10);
    }

    #[test]
    fn e_single_mode_and_quadrature() {
        let g = grid(64);
        let eps = 0.3;
        let s = WaveState::from_fields(mode(&g, -1, c(eps, 0.0)), SpectralField::zeros(&g), 0.0).unwrap();
        assert_abs_diff_eq!(energy_e(&s), 2.0 * PI * eps * eps, epsilon = 1e-14);
        assert_eq!(energy_e(&WaveState::flat(&g)), 0.0);
        let s = random_state(&g, 3, 0.2, 0.6);
        let (w, wa, q, qa) = (s.w.as_field(), s.w.deriv(1), s.q.as_field(), s.q.deriv(1));
        let direct = quad(&g, 512, |x| {
            let (wv, wav, qv, qav) = (w.eval(x), wa.eval(x), q.eval(x), qa.eval(x));
            wv.norm_sqr() + (qv * qav.conj()).im - (wv.conj() * wv.conj() * wav).re
        }) + g.period() * w.mean().norm_sqr();
        assert_abs_diff_eq!(energy_e(&s), direct, epsilon = 1e-12);
    }

    #[test]
    fn energy_is_conserved_over_short_run() {
        let g = grid(128);
        let mut s = random_state(&g, 5, 0.05, 0.5);
        let e_start = energy_e(&s);
        for _ in 0..200 {
            s = step_rk4(&s, 5e-3, DEFAULT_C_MIN).unwrap();
        }
        let drift = (energy_e(&s) - e_start).abs() / e_start;
        assert!(drift < 1e-10, "drift {drift}");
    }

    #[test]
    fn linear_energies_at_flat_background() {
        let g = grid(64);
        let bg = derive_all(&WaveState::flat(&g), DEFAULT_C_MIN).unwrap();
        let w = random_field(&g, 1, 10).project_p();
        let r = random_field(&g, 2, 10).project_p();
        let e0 = energy_e0(&w, &r);
        assert_abs_diff_eq!(energy_e2lin(&bg, &w, &r), e0, epsilon = 1e-12);
        assert_abs_diff_eq!(energy_e3lin(&bg, &w, &r), e0, epsilon = 1e-12);
    }

    #[test]
    fn linear_energy_close_to_e0_for_small_background() {
        let g = grid(256);
        for seed in 0..10 {
            let s = random_state(&g, seed, 0.02, 0.5);
            let d = s.diff_state(DEFAULT_C_MIN).unwrap();
            let bg = derive_diff(&d, DEFAULT_C_MIN).unwrap();
            let p = random_state(&g, seed + 1000, 1.0, 0.5);
            let e0 = energy_e0(&p.w, &p.q);
            let e2 = energy_e2lin(&bg, &p.w, &p.q);
            let e3 = energy_e3lin(&bg, &p.w, &p.q);
            let a = norm_a(&d);
            assert!(e2 >= 0.0);
            assert!((e3 / e0 - 1.0).abs() <= 5.0 * a, "seed {seed}: {e3} {e0} A={a}");
        }
    }

    #[test]
    fn n2_energy_close_to_weighted_e0() {
        let g = grid(256);
        let s = random_state(&g, 7, 0.02, 0.5);
        let d = s.diff_state(DEFAULT_C_MIN).unwrap();
        let df = derive_diff(&d, DEFAULT_C_MIN).unwrap();
        let e = energy_n2_cubic(&d, DEFAULT_C_MIN).unwrap();
        let e0 = energy_e0(&d.wa.deriv(1), &df.rr);
        assert!((e / e0 - 1.0).abs() <= 10.0 * norm_a(&d), "{e} {e0}");
    }

    #[test]
    fn e3lin_is_nearly_conserved_along_linearized_flow() {
        // the pair (𝐖, R) solves the linearized equations around the state
        let g = grid(128);
        let s = random_state(&g, 9, 0.02, 0.5);
        let energy = |s: &WaveState| {
            let d = s.diff_state(DEFAULT_C_MIN).unwrap();
            let bg = derive_diff(&d, DEFAULT_C_MIN).unwrap();
            (energy_e2lin(&bg, &d.wa, &d.r), energy_e3lin(&bg, &d.wa, &d.r))
        };
        let (e2a, e3a) = energy(&s);
        let mut t = s.clone();
        for _ in 0..100 {
            t = step_rk4(&t, 1e-2, DEFAULT_C_MIN).unwrap();
        }
        let (e2b, e3b) = energy(&t);
        let d3 = ((e3b - e3a) / e3a).abs();
        let d2 = ((e2b - e2a) / e2a).abs();
        assert!(d3 < d2, "cubic drift {d3} vs quadratic drift {d2}");
    }

    #[test]
    fn control_norm_examples() {
        let g = grid(64);
        let d = WaveState::flat(&g).diff_state(DEFAULT_C_MIN).unwrap();
        assert_eq!(norm_a(&d) + norm_b(&d), 0.0);
        let d = DiffState::new(
            HoloField::new(mode(&g, -1, c(0.1, 0.0))).unwrap(),
            HoloField::zeros(&g),
            0.0,
        )
        .unwrap();
        // ‖𝐖‖∞ = 0.1, ‖Y‖∞ = 0.1/0.9
        assert_abs_diff_eq!(norm_a(&d), 0.1 + 0.1 / 0.9, epsilon = 1e-3);
        let r = mode(&g, -4, c(0.05, 0.0));
        assert_abs_diff_eq!(r.frac_deriv(0.5).sup_norm(), 0.1, epsilon = 1e-14);
    }

    #[test]
    fn norm_proxy_examples() {
        let g = grid(64);
        assert_eq!(bmo_proxy(&SpectralField::constant(&g, c(2.0, -1.0))), 0.0);
        let e4 = mode(&g, -4, c(1.0, 0.0));
        assert_abs_diff_eq!(sobolev_norm(&e4, 0.5), 2.0 * (2.0 * PI).sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(besov_proxy(&e4), 1.0, epsilon = 1e-14);
        // cos α over the full period: mean |cos| = 2/π
        let cosf = SpectralField::from_real_fn(&g, f64::cos);
        assert!(bmo_proxy(&cosf) >= 2.0 / PI - 1e-3);
    }

    #[test]
    fn paraproduct_examples() {
        let g = grid(256);
        let f = mode(&g, -1, c(1.0, 0.0));
        let h = mode(&g, -64, c(1.0, 0.0));
        let pp = paraproducts(&f, &h).unwrap();
        let fh = f.product(&h).unwrap();
        assert!((&pp.low_high - &fh).max_coeff() < 1e-15);
        assert!(pp.high_low.max_coeff() + pp.high_high.max_coeff() < 1e-15);
        // blocks 0 and 3 are within the gap: diagonal interaction
        let h8 = mode(&g, -8, c(1.0, 0.0));
        let pp = paraproducts(&f, &h8).unwrap();
        assert!(pp.low_high.max_coeff() < 1e-15);
        let pp2 = paraproducts_with_gap(&f, &h8, 2).unwrap();
        assert!((&pp2.low_high - &f.product(&h8).unwrap()).max_coeff() < 1e-15);
        // constant factor
        let k = SpectralField::constant(&g, c(2.0, 0.0));
        let r = random_field(&g, 4, 80);
        let pp = paraproducts(&k, &r).unwrap();
        assert!((&pp.sum() - &k.product(&r).unwrap()).max_coeff() < 1e-13);
        assert!(pp.high_low.max_coeff() < 1e-15);
    }

    #[test]
    fn commutator_examples() {
        let g = grid(128);
        let k = SpectralField::constant(&g, c(1.5, 0.5));
        let f = random_field(&g, 1, 20);
        let cm = commutator_p(&k, &f).unwrap();
        assert!(cm.max_coeff() < 1e-14);
        // holomorphic mean-free factors: both terms are the same holomorphic product
        let gh = random_field(&g, 2, 20).project_psharp();
        let fh = random_field(&g, 3, 5).project_psharp();
        assert!(commutator_p(&gh, &fh).unwrap().max_coeff() < 1e-14);
        // low-frequency antiholomorphic f against high holomorphic g: [P,g]f = P(gf) - 0
        let fa = mode(&g, 2, c(1.0, 0.0));
        let gk = mode(&g, -20, c(1.0, 0.0));
        let cm = commutator_p(&gk, &fa).unwrap();
        assert!((&cm - &gk.product(&fa).unwrap().project_p()).max_coeff() < 1e-14);
    }

    #[test]
    fn commutator_ratio_stays_bounded_under_refinement() {
        let mut ratios = vec![];
        for n in [64, 128, 256] {
            let g = grid(n);
            let gf = random_field(&g, 11, 10);
            let f = random_field(&g, 12, 10);
            ratios.push(commutator_ratio(&gf, &f, 0.5, 0.5).unwrap());
        }
        let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1.5, "{ratios:?}");
    }

    #[test]
    fn envelope_examples() {
        let g = grid(256);
        let f = mode(&g, -16, c(3.0, 0.0));
        let env = frequency_envelope(&f, 0.1).unwrap();
        let n = f.l2_norm();
        for (k, v) in env.values.iter().enumerate() {
            let expect = n * 2f64.powf(-0.1 * (k as f64 - 4.0).abs());
            assert_abs_diff_eq!(*v, expect, epsilon = 1e-12);
        }
        assert!(frequency_envelope(&f, 1.0).is_err());
    }

    fn arb_field() -> impl Strategy<Value = SpectralField> {
        (any::<u64>(), 1i64..40).prop_map(|(seed, band)| random_field(&grid(128), seed, band))
    }

    proptest! {
        #[test]
        fn paraproduct_reconstruction(f in arb_field(), h in arb_field()) {
            let pp = paraproducts(&f, &h).unwrap();
            prop_assert!((&pp.sum() - &f.product(&h).unwrap()).max_coeff() < 1e-12);
        }

        #[test]
        fn bmo_proxy_bounds(f in arb_field(), re in -5.0f64..5.0, im in -5.0f64..5.0) {
            let b = bmo_proxy(&f);
            prop_assert!(b <= 2.0 * f.sup_norm() + 1e-12);
            let shifted = &f + &SpectralField::constant(f.grid(), c(re, im));
            prop_assert!((bmo_proxy(&shifted) - b).abs() < 1e-10);
        }

        #[test]
        fn envelope_properties(f in arb_field(), delta in 0.01f64..0.99) {
            let env = frequency_envelope(&f, delta).unwrap();
            let norms = block_norms(&f);
            for (c, n) in env.values.iter().zip(&norms) {
                prop_assert!(c >= n);
            }
            for w in env.values.windows(2) {
                if w[0] > 0.0 && w[1] > 0.0 {
                    prop_assert!(w[1] / w[0] <= 2f64.powf(delta) * (1.0 + 1e-12));
                    prop_assert!(w[0] / w[1] <= 2f64.powf(delta) * (1.0 + 1e-12));
                }
            }
            let again = Envelope::from_block_norms(&env.values, delta).unwrap();
            for (a, b) in again.values.iter().zip(&env.values) {
                prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
            }
        }

        #[test]
        fn sobolev_matches_quadrature(f in arb_field(), s in 0.0f64..2.0) {
            let g = f.grid().clone();
            let h = f.frac_deriv(s);
            let direct = quad(&g, 256, |x| h.eval(x).norm_sqr()).sqrt();
            prop_assert!((sobolev_norm(&f, s) - direct).abs() < 1e-10 * direct.max(1.0));
        }
    }
}
