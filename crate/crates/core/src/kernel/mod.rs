//! Fundamental solutions of 1-D uniformly parabolic operators by the
//! parametrix (Levi) method.
//!
//! For ℒu = ∂ₜu - a(x,t)∂ₓₓu + b(x,t)∂ₓu + c(x,t)u with Hölder coefficients
//! and λ₀ ≤ a ≤ λ₁, the fundamental solution is
//!
//! ```text
//!   Γ(x,t,ξ,τ) = Z(x,t,ξ,τ) + ∫_τ^t ∫_ℝ Z(x,t,y,σ) φ(y,σ,ξ,τ) dy dσ,
//! ```
//!
//! where Z is the heat kernel with the diffusion coefficient frozen at the
//! source point and φ is the alternating series of iterated kernels (ℒZ)ₘ.
//! [`KernelHandle`] bundles coefficients, truncation depth, quadrature
//! policy and fitted tail constants, and memoizes per-source iterate tables
//! behind the evaluation calls.

mod coeffs;
mod levi;
pub mod quad;

pub use coeffs::{CoeffField, ParabolicCoefficients};

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

use statrs::function::gamma::ln_gamma;

use crate::grid::GridSpec;
use crate::{Error, Result};
use levi::{MomentData, MomentTable, PointSourceTable};

/// Quadrature configuration for every kernel integral.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadraturePolicy {
    /// Gauss-Legendre nodes per spatial panel.
    pub n_space: usize,
    /// Gauss-Legendre nodes per (substituted) time sub-interval.
    pub n_time: usize,
    /// Exponent p of the change of variables σ = τ + rᵖ that neutralizes
    /// the endpoint singularity of the time integrals.
    pub sing_exponent: f64,
    /// Spatial truncation radius in Gaussian standard deviations.
    pub domain_halfwidth: f64,
}

impl Default for QuadraturePolicy {
    fn default() -> Self {
        Self { n_space: 12, n_time: 12, sing_exponent: 2.0, domain_halfwidth: 8.0 }
    }
}

impl QuadraturePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.n_space < 4 || self.n_time < 4 {
            return Err(Error::Config(format!(
                "quadrature node counts must be >= 4, got n_space={}, n_time={}",
                self.n_space, self.n_time
            )));
        }
        if self.domain_halfwidth < 6.0 {
            return Err(Error::Config(format!(
                "domain_halfwidth must be >= 6 (Gaussian tail below 1e-9), got {}",
                self.domain_halfwidth
            )));
        }
        if !(self.sing_exponent >= 1.0) {
            return Err(Error::Config(format!(
                "sing_exponent must be >= 1, got {}",
                self.sing_exponent
            )));
        }
        Ok(())
    }
}

/// Fitted (K, C) pair of the a-priori iterate envelope
/// |ℒZ| ≤ K (t-τ)^{-(3-α)/2} exp(-C(x-ξ)²/(t-τ)).
///
/// These are empirical fits over a probe grid, inflated for slack. They are
/// diagnostics for truncation control, not certified constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConstants {
    pub k: f64,
    pub c: f64,
}

/// A configured fundamental-solution evaluator: coefficients, Levi series
/// truncation, quadrature policy and the fitted tail constants.
pub struct KernelHandle {
    pub coeffs: ParabolicCoefficients,
    /// Maximum admissible series depth.
    pub levi_depth: usize,
    pub quad: QuadraturePolicy,
    /// Spatial radius used for validation and constant-fitting probes.
    pub half_width: f64,
    /// Time horizon: evaluations require τ ≥ 0 and t - τ ≤ horizon.
    pub horizon: f64,
    pub tail_constants: TailConstants,
    tables: Mutex<HashMap<(u64, u64), Arc<PointSourceTable>>>,
}

impl std::fmt::Debug for KernelHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelHandle")
            .field("levi_depth", &self.levi_depth)
            .field("quad", &self.quad)
            .field("horizon", &self.horizon)
            .field("tail_constants", &self.tail_constants)
            .finish()
    }
}

impl KernelHandle {
    /// Validates the configuration, probes the coefficients against their
    /// declared bounds and fits the tail constants.
    pub fn new(
        coeffs: ParabolicCoefficients,
        levi_depth: usize,
        quad: QuadraturePolicy,
        half_width: f64,
        horizon: f64,
    ) -> Result<Self> {
        if levi_depth < 1 {
            return Err(Error::Config("levi_depth must be >= 1".into()));
        }
        quad.validate()?;
        if !(horizon > 0.0) {
            return Err(Error::NonPositive { name: "horizon", value: horizon });
        }
        if !(half_width > 0.0) {
            return Err(Error::NonPositive { name: "half_width", value: half_width });
        }
        coeffs.validate_on(half_width, horizon, 65, 9)?;
        let tail_constants = fit_tail_constants(&coeffs, half_width, horizon);
        Ok(Self {
            coeffs,
            levi_depth,
            quad,
            half_width,
            horizon,
            tail_constants,
            tables: Mutex::new(HashMap::new()),
        })
    }

    fn check_times(&self, t: f64, tau: f64) -> Result<()> {
        if t <= tau {
            return Err(Error::TimeOrder { t, tau });
        }
        if tau < 0.0 {
            return Err(Error::NegativeTime { value: tau });
        }
        if t - tau > self.horizon * (1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "evaluation span t - tau = {} exceeds handle horizon {}",
                t - tau,
                self.horizon
            )));
        }
        Ok(())
    }

    /// Smallest series depth whose analytic tail bound meets the truncation
    /// tolerance 1e-8·dt^{-1/2}, capped at the configured maximum. The
    /// analytic bound is loose (its constants come from the proof chain),
    /// so the cap is load-bearing for drift-dominated kernels.
    pub fn adaptive_depth(&self, dt: f64) -> usize {
        let tol = 1e-8 * dt.powf(-0.5);
        for m in 1..=self.levi_depth {
            if levi_tail_bound(self, m, dt) <= tol {
                return m;
            }
        }
        self.levi_depth
    }

    /// Memoized per-source iterate table (built once per (ξ, τ)).
    fn point_table(&self, xi: f64, tau: f64, min_depth: usize) -> Arc<PointSourceTable> {
        let key = (xi.to_bits(), tau.to_bits());
        if let Some(existing) = self.tables.lock().unwrap().get(&key) {
            if existing.is_trivial() || existing.depth() >= min_depth {
                return existing.clone();
            }
        }
        let smax = (self.horizon - tau).max(1e-12).sqrt();
        let target = self.adaptive_depth(smax * smax).max(min_depth).max(1);
        let table = Arc::new(PointSourceTable::build(
            &self.coeffs,
            &self.quad,
            xi,
            tau,
            smax,
            target,
            min_depth,
        ));
        let mut guard = self.tables.lock().unwrap();
        if guard.len() > 512 {
            guard.clear();
        }
        guard.insert(key, table.clone());
        table
    }
}

/// Heat-kernel parametrix
/// Z(x,t,ξ,τ) = (4π a(ξ,τ)(t-τ))^{-1/2} exp(-(x-ξ)²/(4a(ξ,τ)(t-τ))).
pub fn eval_z(coeffs: &ParabolicCoefficients, x: f64, t: f64, xi: f64, tau: f64) -> Result<f64> {
    if t <= tau {
        return Err(Error::TimeOrder { t, tau });
    }
    Ok(levi::z_parts(coeffs.a.at(xi, tau), x, t, xi, tau).0)
}

/// First Levi iterate
/// ℒZ = (a(ξ,τ) - a(x,t))∂ₓₓZ + b(x,t)∂ₓZ + c(x,t)Z.
pub fn eval_lz(coeffs: &ParabolicCoefficients, x: f64, t: f64, xi: f64, tau: f64) -> Result<f64> {
    if t <= tau {
        return Err(Error::TimeOrder { t, tau });
    }
    Ok(levi::lz_value(coeffs, x, t, xi, tau))
}

/// m-th iterated kernel (ℒZ)ₘ(x,t,ξ,τ).
///
/// m = 1 delegates to the closed form; higher iterates evaluate the
/// recursion integral with the handle's quadrature against the memoized
/// level tables.
pub fn levi_iterate_m(
    handle: &KernelHandle,
    m: usize,
    x: f64,
    t: f64,
    xi: f64,
    tau: f64,
) -> Result<f64> {
    if m < 1 {
        return Err(Error::Config("iterate index m must be >= 1".into()));
    }
    if m > handle.levi_depth {
        return Err(Error::LeviDepth { requested: m, max: handle.levi_depth });
    }
    handle.check_times(t, tau)?;
    if m == 1 {
        return eval_lz(&handle.coeffs, x, t, xi, tau);
    }
    let table = handle.point_table(xi, tau, m - 1);
    if table.is_trivial() {
        return Ok(0.0);
    }
    Ok(table.iterate_fresh(&handle.coeffs, &handle.quad, m - 1, x, t))
}

/// Analytic majorant of the Levi series tail after the m-th term:
/// Σ_{k>m} Kᵏ (π/C)^{(k-1)/2} Γ(α/2)ᵏ/Γ(kα/2) · dt^{(kα-3)/2}
/// with the handle's fitted (K, C). Finite, decreasing in m, and → 0.
pub fn levi_tail_bound(handle: &KernelHandle, m: usize, dt: f64) -> f64 {
    let TailConstants { k, c } = handle.tail_constants;
    if k <= 0.0 {
        return 0.0;
    }
    let alpha = handle.coeffs.holder_alpha;
    let ln_k = k.ln();
    let ln_pi_c = (std::f64::consts::PI / c).ln();
    let ln_g_half = ln_gamma(alpha / 2.0);
    let ln_dt = dt.ln();
    let mut sum = 0.0f64;
    for kk in (m + 1)..=(m + 400) {
        let kf = kk as f64;
        let ln_term = kf * ln_k + 0.5 * (kf - 1.0) * ln_pi_c + kf * ln_g_half
            - ln_gamma(kf * alpha / 2.0)
            + 0.5 * (kf * alpha - 3.0) * ln_dt;
        let term = ln_term.exp();
        sum += term;
        if term < 1e-30 * sum.max(1e-300) && kk > m + 4 {
            break;
        }
    }
    sum
}

/// Truncated Levi density φ with the tail bound of the dropped remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiEval {
    pub value: f64,
    pub tail_bound: f64,
}

/// φ(x,t,ξ,τ) = Σₘ (-1)ᵐ (ℒZ)ₘ truncated at the table depth, reported with
/// the analytic tail majorant of the truncation.
pub fn eval_phi(handle: &KernelHandle, x: f64, t: f64, xi: f64, tau: f64) -> Result<PhiEval> {
    handle.check_times(t, tau)?;
    let table = handle.point_table(xi, tau, 0);
    let value = table.phi(&handle.coeffs, x, t);
    let tail_bound = levi_tail_bound(handle, table.depth(), t - tau);
    Ok(PhiEval { value, tail_bound })
}

/// Fundamental solution Γ(x,t,ξ,τ).
pub fn eval_gamma(handle: &KernelHandle, x: f64, t: f64, xi: f64, tau: f64) -> Result<f64> {
    handle.check_times(t, tau)?;
    let table = handle.point_table(xi, tau, 0);
    Ok(table.gamma(&handle.coeffs, &handle.quad, x, t))
}

/// Spatial derivative ∂ₓΓ(x,t,ξ,τ).
pub fn eval_gamma_dx(handle: &KernelHandle, x: f64, t: f64, xi: f64, tau: f64) -> Result<f64> {
    handle.check_times(t, tau)?;
    let table = handle.point_table(xi, tau, 0);
    Ok(table.gamma_dx(&handle.coeffs, &handle.quad, x, t))
}

/// Convolution of a spatial profile with the fundamental solution:
/// x ↦ ∫ Γ(x,t,ξ,τ) g(ξ) dξ, evaluated on the grid nodes.
///
/// `g` is treated as constantly extended beyond the grid.
pub fn apply_gamma(
    handle: &KernelHandle,
    g: &(dyn Fn(f64) -> f64 + Sync),
    grid: &GridSpec,
    t: f64,
    tau: f64,
) -> Result<Vec<f64>> {
    handle.check_times(t, tau)?;
    let data = MomentData { initial: Some(g), source: None, x_feature: apply_feature(grid) };
    let table = MomentTable::build(
        &handle.coeffs,
        &handle.quad,
        -grid.half_width,
        grid.half_width,
        grid.dx(),
        tau,
        t - tau,
        &data,
        handle.adaptive_depth(t - tau),
    );
    let out = table.evaluate_many(&handle.coeffs, &handle.quad, &data, &grid.xs(), t);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("apply_gamma output".into()));
    }
    Ok(out)
}

/// Representation problem fed to [`solve_representation`]: initial data at
/// the base time and/or a distributed source over the window.
pub struct RepresentationProblem<'a> {
    pub initial: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
    pub source: Option<&'a (dyn Fn(f64, f64) -> f64 + Sync)>,
    /// Smallest honest spatial feature scale of the data.
    pub x_feature: f64,
}

/// Evaluates u(x,t) = ∫Γ(x,t,ξ,τ₀)u₀(ξ)dξ + ∫∫Γ(x,t,ξ,τ)f(ξ,τ)dξdτ on the
/// grid nodes for every requested time level, assembling the Levi moment
/// tables once for the whole window. Times at or below τ₀ return the
/// initial profile itself.
pub fn solve_representation(
    handle: &KernelHandle,
    grid: &GridSpec,
    tau0: f64,
    horizon: f64,
    problem: &RepresentationProblem<'_>,
    eval_times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if !(horizon > 0.0) {
        return Err(Error::NonPositive { name: "horizon", value: horizon });
    }
    let data = MomentData {
        initial: problem.initial,
        source: problem.source,
        x_feature: problem.x_feature.max(f64::MIN_POSITIVE),
    };
    let table = MomentTable::build(
        &handle.coeffs,
        &handle.quad,
        -grid.half_width,
        grid.half_width,
        grid.dx(),
        tau0,
        horizon,
        &data,
        handle.adaptive_depth(horizon),
    );
    let xs = grid.xs();
    let mut out = Vec::with_capacity(eval_times.len());
    for &t in eval_times {
        if t <= tau0 + 1e-15 {
            let profile = match problem.initial {
                Some(g) => xs.iter().map(|&x| g(x)).collect(),
                None => vec![0.0; xs.len()],
            };
            out.push(profile);
            continue;
        }
        let profile = table.evaluate_many(&handle.coeffs, &handle.quad, &data, &xs, t);
        if profile.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("representation at t = {t}")));
        }
        out.push(profile);
    }
    Ok(out)
}

/// One probe location for [`coefficient_gap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSample {
    pub x: f64,
    pub t: f64,
    pub xi: f64,
    pub tau: f64,
}

/// Normalized kernel-gap statistics between two coefficient triples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapStats {
    /// sup over samples of |Γ_v - Γ_v̄|·(t-τ)^{1/2}·exp(+C(x-ξ)²/(t-τ)).
    pub sup_normalized: f64,
    /// sup of the raw |Γ_v - Γ_v̄|.
    pub sup_raw: f64,
    /// Decay constant used in the normalization.
    pub c_used: f64,
}

/// Sup of the envelope-normalized gap |Γ_v - Γ_v̄| over a sample set; the
/// quantity the continuous-dependence estimate bounds linearly in ‖v - v̄‖.
pub fn coefficient_gap(
    handle_v: &KernelHandle,
    handle_vbar: &KernelHandle,
    samples: &[GapSample],
) -> Result<GapStats> {
    if (handle_v.horizon - handle_vbar.horizon).abs() > 1e-12
        || (handle_v.coeffs.holder_alpha - handle_vbar.coeffs.holder_alpha).abs() > 1e-12
    {
        return Err(Error::GridMismatch(
            "coefficient_gap requires handles over the same horizon and Hölder class".into(),
        ));
    }
    let c_used = handle_v.tail_constants.c.min(handle_vbar.tail_constants.c);
    let mut sup_normalized = 0.0f64;
    let mut sup_raw = 0.0f64;
    for s in samples {
        let g1 = eval_gamma(handle_v, s.x, s.t, s.xi, s.tau)?;
        let g2 = eval_gamma(handle_vbar, s.x, s.t, s.xi, s.tau)?;
        let raw = (g1 - g2).abs();
        let dt = s.t - s.tau;
        let normalized = raw * dt.sqrt() * (c_used * (s.x - s.xi).powi(2) / dt).exp();
        sup_raw = sup_raw.max(raw);
        sup_normalized = sup_normalized.max(normalized);
    }
    Ok(GapStats { sup_normalized, sup_raw, c_used })
}

/// Writes sampled Γ and ∂ₓΓ values as CSV (x, t, xi, tau, gamma, gamma_dx).
pub fn dump_gamma_csv(
    handle: &KernelHandle,
    samples: &[GapSample],
    path: &std::path::Path,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,t,xi,tau,gamma,gamma_dx")?;
    for s in samples {
        let g = eval_gamma(handle, s.x, s.t, s.xi, s.tau)?;
        let gx = eval_gamma_dx(handle, s.x, s.t, s.xi, s.tau)?;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_float(s.x),
            fmt_float(s.t),
            fmt_float(s.xi),
            fmt_float(s.tau),
            fmt_float(g),
            fmt_float(gx)
        )?;
    }
    Ok(())
}

/// 17-significant-digit float formatting shared by all CSV emitters.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn apply_feature(grid: &GridSpec) -> f64 {
    2.0 * grid.dx()
}

/// Fits the envelope constants (K, C) of |ℒZ| by least squares on the
/// first iterate over a probe grid, then inflates K for slack. The fitted
/// decay C is clamped to what the Gaussian factor of Z actually supports.
fn fit_tail_constants(
    coeffs: &ParabolicCoefficients,
    half_width: f64,
    horizon: f64,
) -> TailConstants {
    let alpha = coeffs.holder_alpha;
    let w_scale = (2.0 * coeffs.lambda1).sqrt();
    let mut samples: Vec<(f64, f64)> = Vec::new(); // (w², scaled |ℒZ|)
    let mut max_val = 0.0f64;
    for ix in 0..5 {
        let xi = -half_width + half_width * 0.5 * ix as f64;
        for tau_frac in [0.0, 0.45] {
            let tau = horizon * tau_frac;
            let smax = (horizon - tau).sqrt();
            for s_frac in [0.15, 0.35, 0.6, 0.85] {
                let s = smax * s_frac;
                for iw in 0..33 {
                    let w = (-5.0 + 10.0 * iw as f64 / 32.0) * w_scale;
                    if w.abs() < 1e-9 {
                        continue;
                    }
                    let val =
                        levi::lz_value(coeffs, xi + w * s, tau + s * s, xi, tau).abs()
                            * s.powf(3.0 - alpha);
                    max_val = max_val.max(val);
                    samples.push((w * w, val));
                }
            }
        }
    }
    let c_cap = 0.98 / (4.0 * coeffs.lambda1);
    let c_floor = 0.02 / (4.0 * coeffs.lambda1);
    if max_val < 1e-280 {
        return TailConstants { k: 0.0, c: 0.5 / (4.0 * coeffs.lambda1) };
    }
    // Linear least squares of ln(val) = ln K - C·w² over non-negligible
    // samples.
    let threshold = 1e-12 * max_val;
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(w2, val) in &samples {
        if val > threshold {
            let y = val.ln();
            sx += w2;
            sy += y;
            sxx += w2 * w2;
            sxy += w2 * y;
            n += 1.0;
        }
    }
    let denom = n * sxx - sx * sx;
    let slope = if denom.abs() > 1e-30 { (n * sxy - sx * sy) / denom } else { -c_cap };
    let c = (-slope).clamp(c_floor, c_cap);
    // With C fixed, take K as the probe majorant and inflate 2x.
    let mut k_major = 0.0f64;
    for &(w2, val) in &samples {
        k_major = k_major.max(val * (c * w2).exp());
    }
    TailConstants { k: 2.0 * k_major, c }
}
