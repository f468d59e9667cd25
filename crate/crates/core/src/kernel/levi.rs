//! Iterated-kernel machinery of the parametrix construction.
//!
//! The fundamental solution is assembled as Γ = Z + ∫∫ Z·φ with
//! φ = Σₘ (-1)ᵐ (ℒZ)ₘ, where (ℒZ)₁ = ℒZ and each further iterate is the
//! space-time composition of ℒZ with its predecessor. Two table flavors
//! materialize the iterates once per assembly and are then only read:
//!
//! * [`PointSourceTable`]: iterates for one fixed source point (ξ, τ),
//!   stored in self-similar coordinates w = (y-ξ)/√(σ-τ), s = √(σ-τ) with
//!   the singular power split off, so every stored profile is O(1) and
//!   smooth in both table directions. Backs the pointwise Γ evaluators.
//! * [`MomentTable`]: iterates pre-contracted against a data profile and a
//!   Duhamel source, stored on the solver's x-lattice. One table yields the
//!   whole integral representation u = Γ★u₀ + Γ∗f on every lattice node,
//!   which is the shape the Picard sweep needs.
//!
//! The level tables double as the memo cache: each (m, node) value is
//! computed once during assembly and the recursion only ever reads the
//! previous level's table. Level 1 is the exact kernel ℒZ and is evaluated
//! in closed form wherever it appears.

use rayon::prelude::*;

use super::coeffs::ParabolicCoefficients;
use super::quad::{
    integrate_composite, integrate_time_two_sided, integrate_time_upper_singular,
    overlap_interval,
};
use super::QuadraturePolicy;

/// Relative offset standing in for the s = 0 table row.
const S_FLOOR_FRACTION: f64 = 1e-6;
/// Hard cap on composite quadrature panels per one-dimensional integral.
const MAX_PANELS: usize = 96;
/// Lattice spacing of the self-similar w axis, in units of √(2λ₀).
const W_SPACING_FACTOR: f64 = 0.175;
/// Number of √time rows in iterate tables.
const N_S_ROWS: usize = 16;

/// Gaussian parametrix Z with coefficient frozen at the source point, plus
/// its first two x-derivatives (shared exponential).
#[inline]
pub(crate) fn z_parts(a_frozen: f64, x: f64, t: f64, xi: f64, tau: f64) -> (f64, f64, f64) {
    let dt = t - tau;
    let denom = 4.0 * a_frozen * dt;
    let d = x - xi;
    let arg = d * d / denom;
    if arg > 708.0 {
        return (0.0, 0.0, 0.0);
    }
    let z = (std::f64::consts::PI * denom).sqrt().recip() * (-arg).exp();
    let zx = -d / (2.0 * a_frozen * dt) * z;
    let zxx = (d * d / (2.0 * a_frozen * dt) - 1.0) / (2.0 * a_frozen * dt) * z;
    (z, zx, zxx)
}

/// ℒZ(x,t,ξ,τ) = (a(ξ,τ) - a(x,t))∂ₓₓZ + b(x,t)∂ₓZ + c(x,t)Z.
#[inline]
pub(crate) fn lz_value(v: &ParabolicCoefficients, x: f64, t: f64, xi: f64, tau: f64) -> f64 {
    let a_frozen = v.a.at(xi, tau);
    let (z, zx, zxx) = z_parts(a_frozen, x, t, xi, tau);
    (a_frozen - v.a.at(x, t)) * zxx + v.b.at(x, t) * zx + v.c.at(x, t) * z
}

/// Which kernel factor multiplies the stored iterate inside an integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KernelFactor {
    /// ℒZ — the recursion kernel.
    Lz,
    /// Z — the outer parametrix factor of Γ.
    Z,
    /// ∂ₓZ — the outer factor of ∂ₓΓ.
    Zx,
}

/// Operator coefficients frozen at a fixed evaluation point (x, t), for the
/// inner loops where only the integration variable moves.
#[derive(Clone, Copy)]
struct FrozenOperator {
    x: f64,
    t: f64,
    a_xt: f64,
    b_xt: f64,
    c_xt: f64,
}

impl FrozenOperator {
    fn at(v: &ParabolicCoefficients, x: f64, t: f64) -> Self {
        Self { x, t, a_xt: v.a.at(x, t), b_xt: v.b.at(x, t), c_xt: v.c.at(x, t) }
    }

    /// Kernel factor K(x,t,y,σ) viewed as a function of the source (y, σ).
    #[inline]
    fn factor(&self, v: &ParabolicCoefficients, which: KernelFactor, y: f64, sigma: f64) -> f64 {
        let a_frozen = v.a.at(y, sigma);
        let (z, zx, zxx) = z_parts(a_frozen, self.x, self.t, y, sigma);
        match which {
            KernelFactor::Lz => (a_frozen - self.a_xt) * zxx + self.b_xt * zx + self.c_xt * z,
            KernelFactor::Z => z,
            KernelFactor::Zx => zx,
        }
    }
}

/// Lagrange interpolation weights for a uniform stencil of K nodes at
/// positions 0..K-1, evaluated at fractional position `u`.
#[inline]
fn lagrange_weights<const K: usize>(u: f64) -> [f64; K] {
    let mut w = [0.0; K];
    for (i, wi) in w.iter_mut().enumerate() {
        let mut acc = 1.0;
        for j in 0..K {
            if j != i {
                acc *= (u - j as f64) / (i as f64 - j as f64);
            }
        }
        *wi = acc;
    }
    w
}

/// Uniform axis with stencil selection for local interpolation.
#[derive(Debug, Clone)]
struct UniformAxis {
    start: f64,
    step: f64,
    n: usize,
}

impl UniformAxis {
    fn coord(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    fn end(&self) -> f64 {
        self.coord(self.n - 1)
    }

    #[inline]
    fn stencil<const K: usize>(&self, x: f64) -> (usize, f64) {
        let s = (x - self.start) / self.step;
        let i0 = (s.floor() as isize - (K as isize / 2 - 1)).clamp(0, (self.n - K) as isize);
        (i0 as usize, s - i0 as f64)
    }
}

/// Behavior outside the tabulated spatial range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outside {
    /// Gaussian-enveloped tables: values are negligible beyond the range.
    Zero,
    /// Lattice tables: extend by the edge value, like every other profile.
    Clamp,
}

/// One family of scaled iterate tables on a (space × √time) lattice.
/// Level m stores s^{scale_base - m}·(true value) so entries stay O(1).
#[derive(Debug)]
struct IterateTable {
    space: UniformAxis,
    s_axis: UniformAxis,
    levels: Vec<Vec<f64>>,
    outside: Outside,
    scale_base: i32,
}

impl IterateTable {
    /// 6-point in space × 4-point in √time local Lagrange read of level `m`
    /// (the scaled profile).
    #[inline]
    fn interp(&self, m: usize, xq: f64, sq: f64) -> f64 {
        if self.outside == Outside::Zero
            && (xq < self.space.start - 1e-12 || xq > self.space.end() + 1e-12)
        {
            return 0.0;
        }
        let values = &self.levels[m - 1];
        let xq = xq.clamp(self.space.start, self.space.end());
        let sq = sq.clamp(self.s_axis.start, self.s_axis.end());
        let (i0, ux) = self.space.stencil::<6>(xq);
        let (j0, us) = self.s_axis.stencil::<4>(sq);
        let wx = lagrange_weights::<6>(ux);
        let ws = lagrange_weights::<4>(us);
        let nx = self.space.n;
        let mut acc = 0.0;
        for (dj, wsj) in ws.iter().enumerate() {
            let row = (j0 + dj) * nx + i0;
            let r = &values[row..row + 6];
            let mut rowacc = 0.0;
            for (di, wxi) in wx.iter().enumerate() {
                rowacc += wxi * r[di];
            }
            acc += wsj * rowacc;
        }
        acc
    }

    /// True (unscaled) iterate value at (space coordinate, s = √elapsed).
    #[inline]
    fn value(&self, m: usize, xq: f64, sq: f64) -> f64 {
        let s_eff = sq.max(self.s_axis.step * S_FLOOR_FRACTION);
        s_eff.powi(m as i32 - self.scale_base) * self.interp(m, xq, sq)
    }

    fn max_abs(&self, m: usize) -> f64 {
        self.levels[m - 1].iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    fn depth(&self) -> usize {
        self.levels.len()
    }
}

/// ∫ K(x,t,y,σ)·F(y,σ√) dy over the overlap of the kernel's Gaussian window
/// around x and the iterate support around ξ.
#[inline]
#[allow(clippy::too_many_arguments)]
fn point_window_integral(
    v: &ParabolicCoefficients,
    quad: &QuadraturePolicy,
    op: &FrozenOperator,
    which: KernelFactor,
    sigma: f64,
    tau: f64,
    xi: f64,
    w_support: f64,
    inner: &impl Fn(f64, f64) -> f64,
) -> f64 {
    let dt_top = (op.t - sigma).max(0.0);
    let s_sig = (sigma - tau).max(0.0).sqrt();
    let r1 = quad.domain_halfwidth * (2.0 * v.lambda1 * dt_top).sqrt();
    let r2 = w_support * s_sig;
    let Some((lo, hi)) = overlap_interval(op.x, r1, xi, r2) else {
        return 0.0;
    };
    let feature = (2.0 * v.lambda0).sqrt() * dt_top.sqrt().min(s_sig).max(1e-300);
    integrate_composite(lo, hi, feature, quad.n_space, MAX_PANELS, |y| {
        op.factor(v, which, y, sigma) * inner(y, s_sig)
    })
}

/// Same integral over the full kernel window, for lattice-wide iterates
/// whose support is the whole table.
#[inline]
fn lattice_window_integral(
    v: &ParabolicCoefficients,
    quad: &QuadraturePolicy,
    op: &FrozenOperator,
    which: KernelFactor,
    sigma: f64,
    tau0: f64,
    x_feature: f64,
    inner: &impl Fn(f64, f64) -> f64,
) -> f64 {
    let dt_top = (op.t - sigma).max(0.0);
    let s_sig = (sigma - tau0).max(0.0).sqrt();
    let r1 = quad.domain_halfwidth * (2.0 * v.lambda1 * dt_top).sqrt();
    let feature = ((2.0 * v.lambda0 * dt_top).sqrt()).min(x_feature).max(1e-300);
    integrate_composite(op.x - r1, op.x + r1, feature, quad.n_space, MAX_PANELS, |y| {
        op.factor(v, which, y, sigma) * inner(y, s_sig)
    })
}

/// Iterate tables for one fixed source point (ξ, τ), backing the pointwise
/// kernel evaluators.
#[derive(Debug)]
pub(crate) struct PointSourceTable {
    pub xi: f64,
    pub tau: f64,
    table: IterateTable,
}

impl PointSourceTable {
    /// Builds iterate levels up to `target_depth`, stopping early when a
    /// level vanishes identically or its estimated Γ contribution has
    /// dropped below the truncation floor for two consecutive levels.
    /// `min_depth` suppresses the contribution-based stop so explicitly
    /// requested iterate indices stay available.
    pub fn build(
        v: &ParabolicCoefficients,
        quad: &QuadraturePolicy,
        xi: f64,
        tau: f64,
        smax: f64,
        target_depth: usize,
        min_depth: usize,
    ) -> Self {
        let w_half = quad.domain_halfwidth * (2.0 * v.lambda1).sqrt();
        let step_goal = W_SPACING_FACTOR * (2.0 * v.lambda0).sqrt();
        let n_w = ((2.0 * w_half / step_goal).ceil() as usize + 1).max(9);
        let space = UniformAxis { start: -w_half, step: 2.0 * w_half / (n_w - 1) as f64, n: n_w };
        let s_axis = UniformAxis { start: 0.0, step: smax / N_S_ROWS as f64, n: N_S_ROWS + 1 };

        let mut table =
            IterateTable { space, s_axis, levels: Vec::new(), outside: Outside::Zero, scale_base: 3 };

        let s_floor = smax * S_FLOOR_FRACTION;
        let space_ax = table.space.clone();
        let s_ax = table.s_axis.clone();
        let level1: Vec<f64> = (0..s_ax.n)
            .into_par_iter()
            .flat_map_iter(|j| {
                let s = s_ax.coord(j).max(s_floor);
                let ax = space_ax.clone();
                (0..ax.n).map(move |i| {
                    let w = ax.coord(i);
                    (s * s) * lz_value(v, xi + w * s, tau + s * s, xi, tau)
                })
            })
            .collect();
        table.levels.push(level1);

        let contribution_floor = 1e-9 / smax.max(1e-6);
        let mut quiet = 0usize;
        for m in 1..target_depth {
            if table.max_abs(m) == 0.0 {
                break; // an identically zero level propagates
            }
            let next = Self::next_level(v, quad, xi, tau, &table, m);
            table.levels.push(next);
            let contrib = 2.0 * table.max_abs(m + 1) * smax.powi(m as i32) / m as f64;
            if contrib < contribution_floor && m + 1 >= min_depth {
                quiet += 1;
                if quiet >= 2 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }

        Self { xi, tau, table }
    }

    /// One recursion step evaluated on every lattice target:
    /// (ℒZ)_{m+1}(x,t') = ∫ₜ∫ ℒZ(x,t',y,σ)(ℒZ)ₘ(y,σ) dy dσ.
    fn next_level(
        v: &ParabolicCoefficients,
        quad: &QuadraturePolicy,
        xi: f64,
        tau: f64,
        table: &IterateTable,
        m: usize,
    ) -> Vec<f64> {
        let s_floor = table.s_axis.step * S_FLOOR_FRACTION;
        let w_support = table.space.end();
        (0..table.s_axis.n)
            .into_par_iter()
            .flat_map_iter(move |j| {
                let s_t = table.s_axis.coord(j).max(s_floor);
                (0..table.space.n).map(move |i| {
                    let x = xi + table.space.coord(i) * s_t;
                    let t = tau + s_t * s_t;
                    let op = FrozenOperator::at(v, x, t);
                    let inner =
                        |y: f64, s_sig: f64| iterate_at(v, table, m, xi, tau, y, s_sig);
                    let integral =
                        integrate_time_two_sided(tau, t, quad.sing_exponent, quad.n_time, |sigma| {
                            point_window_integral(
                                v,
                                quad,
                                &op,
                                KernelFactor::Lz,
                                sigma,
                                tau,
                                xi,
                                w_support,
                                &inner,
                            )
                        });
                    s_t.powi(2 - m as i32) * integral
                })
            })
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.table.depth()
    }

    /// Whether the Levi correction vanishes identically (exact parametrix).
    pub fn is_trivial(&self) -> bool {
        self.depth() == 1 && self.table.max_abs(1) == 0.0
    }

    /// φ(y,σ,ξ,τ): alternating partial sum at the built depth.
    pub fn phi(&self, v: &ParabolicCoefficients, y: f64, sigma: f64) -> f64 {
        let s_sig = (sigma - self.tau).max(0.0).sqrt();
        phi_from(v, &self.table, self.depth(), self.xi, self.tau, y, s_sig)
    }

    /// m-th iterate read from the tables (level 1 is closed-form).
    #[cfg(test)]
    pub fn iterate(&self, v: &ParabolicCoefficients, m: usize, y: f64, sigma: f64) -> f64 {
        let s_sig = (sigma - self.tau).max(0.0).sqrt();
        iterate_at(v, &self.table, m, self.xi, self.tau, y, s_sig)
    }

    /// Fresh recursion quadrature for the (m_inner+1)-th iterate at one
    /// arbitrary target, reading level m_inner from the table. The point
    /// evaluator uses this so query points are not lattice-snapped.
    pub fn iterate_fresh(
        &self,
        v: &ParabolicCoefficients,
        quad: &QuadraturePolicy,
        m_inner: usize,
        x: f64,
        t: f64,
    ) -> f64 {
        let op = FrozenOperator::at(v, x, t);
        let w_support = self.table.space.end();
        let inner = |y: f64, s_sig: f64| iterate_at(v, &self.table, m_inner, self.xi, self.tau, y, s_sig);
        integrate_time_two_sided(self.tau, t, quad.sing_exponent, quad.n_time, |sigma| {
            point_window_integral(
                v,
                quad,
                &op,
                KernelFactor::Lz,
                sigma,
                self.tau,
                self.xi,
                w_support,
                &inner,
            )
        })
    }

    /// Γ(x,t,ξ,τ) = Z + ∫∫ Z(x,t,y,σ)·φ(y,σ,ξ,τ) dy dσ.
    pub fn gamma(&self, v: &ParabolicCoefficients, quad: &QuadraturePolicy, x: f64, t: f64) -> f64 {
        let z0 = z_parts(v.a.at(self.xi, self.tau), x, t, self.xi, self.tau).0;
        z0 + self.correction(v, quad, x, t, KernelFactor::Z)
    }

    /// ∂ₓΓ(x,t,ξ,τ) = ∂ₓZ + ∫∫ ∂ₓZ(x,t,y,σ)·φ(y,σ,ξ,τ) dy dσ.
    pub fn gamma_dx(
        &self,
        v: &ParabolicCoefficients,
        quad: &QuadraturePolicy,
        x: f64,
        t: f64,
    ) -> f64 {
        let zx0 = z_parts(v.a.at(self.xi, self.tau), x, t, self.xi, self.tau).1;
        zx0 + self.correction(v, quad, x, t, KernelFactor::Zx)
    }

    fn correction(
        &self,
        v: &ParabolicCoefficients,
        quad: &QuadraturePolicy,
        x: f64,
        t: f64,
        which: KernelFactor,
    ) -> f64 {
        if self.is_trivial() {
            return 0.0;
        }
        let op = FrozenOperator::at(v, x, t);
        let depth = self.depth();
        let w_support = self.table.space.end();
        let inner =
            |y: f64, s_sig: f64| phi_from(v, &self.table, depth, self.xi, self.tau, y, s_sig);
        integrate_time_two_sided(self.tau, t, quad.sing_exponent, quad.n_time, |sigma| {
            point_window_integral(v, quad, &op, which, sigma, self.tau, self.xi, w_support, &inner)
        })
    }
}

/// The m-th iterate value: level 1 is the closed-form kernel, higher levels
/// are table reads in self-similar coordinates.
#[inline]
fn iterate_at(
    v: &ParabolicCoefficients,
    table: &IterateTable,
    m: usize,
    xi: f64,
    tau: f64,
    y: f64,
    s_sig: f64,
) -> f64 {
    if m == 1 {
        lz_value(v, y, tau + s_sig * s_sig, xi, tau)
    } else {
        let s_eff = s_sig.max(table.s_axis.step * S_FLOOR_FRACTION);
        table.value(m, (y - xi) / s_eff, s_sig)
    }
}

/// Alternating partial sum Σ (-1)ᵐ (ℒZ)ₘ at (y, σ).
#[inline]
fn phi_from(
    v: &ParabolicCoefficients,
    table: &IterateTable,
    depth: usize,
    xi: f64,
    tau: f64,
    y: f64,
    s_sig: f64,
) -> f64 {
    let mut acc = -iterate_at(v, table, 1, xi, tau, y, s_sig);
    let mut sign = 1.0;
    for m in 2..=depth {
        acc += sign * iterate_at(v, table, m, xi, tau, y, s_sig);
        sign = -sign;
    }
    acc
}

/// Data fed into a moment table: an initial profile applied at the base
/// time and/or a distributed source over the window.
pub(crate) struct MomentData<'a> {
    pub initial: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
    pub source: Option<&'a (dyn Fn(f64, f64) -> f64 + Sync)>,
    /// Smallest honest spatial feature scale of the data and coefficients.
    pub x_feature: f64,
}

/// Iterates pre-contracted against data on the solver lattice:
/// rₘ(y,σ) = ∫(ℒZ)ₘ(y,σ,ξ,τ₀)u₀(ξ)dξ + ∫∫(ℒZ)ₘ(y,σ,ξ,τ)f(ξ,τ)dξdτ.
///
/// The same recursion as the point iterates applies because the composition
/// acts on the evaluation pair only; contraction against the data commutes
/// with it.
#[derive(Debug)]
pub(crate) struct MomentTable {
    pub tau0: f64,
    table: IterateTable,
    x_feature: f64,
}

impl MomentTable {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        v: &ParabolicCoefficients,
        quad: &QuadraturePolicy,
        x_lo: f64,
        x_hi: f64,
        x_step: f64,
        tau0: f64,
        horizon: f64,
        data: &MomentData<'_>,
        target_depth: usize,
    ) -> Self {
        let margin = quad.domain_halfwidth * (2.0 * v.lambda1 * horizon).sqrt();
        let n_extra = (margin / x_step).ceil() as usize + 1;
        let n = ((x_hi - x_lo) / x_step).round() as usize + 1 + 2 * n_extra;
        let space = UniformAxis { start: x_lo - x_step * n_extra as f64, step: x_step, n };
        let smax = horizon.sqrt();
        let s_axis = UniformAxis { start: 0.0, step: smax / N_S_ROWS as f64, n: N_S_ROWS + 1 };
        let mut table =
            IterateTable { space, s_axis, levels: Vec::new(), outside: Outside::Clamp, scale_base: 2 };

        let s_floor = smax * S_FLOOR_FRACTION;
        let space_ax = table.space.clone();
        let s_ax = table.s_axis.clone();
        let level1: Vec<f64> = (0..s_ax.n)
            .into_par_iter()
            .flat_map_iter(|j| {
                let s = s_ax.coord(j).max(s_floor);
                let ax = space_ax.clone();
                (0..ax.n).map(move |i| {
                    let y = ax.coord(i);
                    s * first_moment(v, quad, y, tau0 + s * s, tau0, data)
                })
            })
            .collect();
        table.levels.push(level1);

        // Truncation floor relative to the leading contribution: the series
        // correction is convolution-local, so a relative cut keeps absolute
        // errors far below the check tolerances.
        let contrib_of = |t: &IterateTable, m: usize| {
            2.0 * t.max_abs(m) * smax.powi(m as i32 - 1) / m.max(1) as f64
        };
        let contribution_floor = 1e-7 * contrib_of(&table, 1).max(1e-300);
        for m in 1..target_depth {
            if table.max_abs(m) == 0.0 {
                break;
            }
            let next = Self::next_level(v, quad, tau0, &table, m, data.x_feature);
            table.levels.push(next);
            if std::env::var_os("PF_DEBUG_LEVELS").is_some() {
                eprintln!(
                    "moment level {}: max {:e} contrib {:e}",
                    m + 1,
                    table.max_abs(m + 1),
                    contrib_of(&table, m + 1)
                );
            }
            if contrib_of(&table, m + 1) < contribution_floor {
                break;
            }
        }

        Self { tau0, table, x_feature: data.x_feature }
    }

    fn next_level(
        v: &ParabolicCoefficients,
        quad: &QuadraturePolicy,
        tau0: f64,
        table: &IterateTable,
        m: usize,
        x_feature: f64,
    ) -> Vec<f64> {
        let s_floor = table.s_axis.step * S_FLOOR_FRACTION;
        (0..table.s_axis.n)
            .into_par_iter()
            .flat_map_iter(move |j| {
                let s_t = table.s_axis.coord(j).max(s_floor);
                (0..table.space.n).map(move |i| {
                    let x = table.space.coord(i);
                    let t = tau0 + s_t * s_t;
                    let op = FrozenOperator::at(v, x, t);
                    let inner = |y: f64, s_sig: f64| table.value(m, y, s_sig);
                    let integral =
                        integrate_time_two_sided(tau0, t, quad.sing_exponent, quad.n_time, |sigma| {
                            lattice_window_integral(
                                v,
                                quad,
                                &op,
                                KernelFactor::Lz,
                                sigma,
                                tau0,
                                x_feature,
                                &inner,
                            )
                        });
                    s_t.powi(1 - m as i32) * integral
                })
            })
            .collect()
    }

    /// Whether the correction vanishes identically.
    pub fn is_trivial(&self) -> bool {
        self.table.depth() == 1 && self.table.max_abs(1) == 0.0
    }

    pub fn depth(&self) -> usize {
        self.table.depth()
    }

    /// Full integral representation at one target:
    /// u(x,t) = ∫Z u₀ + ∫∫Z f + ∫∫ Z·Σ(-1)ᵐrₘ.
    pub fn evaluate(
        &self,
        v: &ParabolicCoefficients,
        quad: &QuadraturePolicy,
        data: &MomentData<'_>,
        x: f64,
        t: f64,
    ) -> f64 {
        let op = FrozenOperator::at(v, x, t);
        let mut acc = direct_part(v, quad, &op, self.tau0, data, KernelFactor::Z);
        if !self.is_trivial() {
            let depth = self.depth();
            let inner = |y: f64, s_sig: f64| {
                let mut sum = 0.0;
                let mut sign = -1.0;
                for m in 1..=depth {
                    sum += sign * self.table.value(m, y, s_sig);
                    sign = -sign;
                }
                sum
            };
            acc += integrate_time_two_sided(self.tau0, t, quad.sing_exponent, quad.n_time, |sigma| {
                lattice_window_integral(
                    v,
                    quad,
                    &op,
                    KernelFactor::Z,
                    sigma,
                    self.tau0,
                    self.x_feature,
                    &inner,
                )
            });
        }
        acc
    }

    /// Representation evaluated on many targets at one time level.
    pub fn evaluate_many(
        &self,
        v: &ParabolicCoefficients,
        quad: &QuadraturePolicy,
        data: &MomentData<'_>,
        targets: &[f64],
        t: f64,
    ) -> Vec<f64> {
        targets.par_iter().map(|&x| self.evaluate(v, quad, data, x, t)).collect()
    }
}

/// r₁(y, t_pt): the data-contracted first iterate.
fn first_moment(
    v: &ParabolicCoefficients,
    quad: &QuadraturePolicy,
    y: f64,
    t_pt: f64,
    tau0: f64,
    data: &MomentData<'_>,
) -> f64 {
    let op = FrozenOperator::at(v, y, t_pt);
    let mut acc = 0.0;
    if let Some(g) = data.initial {
        let inner = |xi: f64, _s: f64| g(xi);
        acc += lattice_window_integral(
            v,
            quad,
            &op,
            KernelFactor::Lz,
            tau0,
            tau0,
            data.x_feature,
            &inner,
        );
    }
    if let Some(f) = data.source {
        acc += integrate_time_upper_singular(tau0, t_pt, quad.sing_exponent, quad.n_time, |tau| {
            let inner = |xi: f64, _s: f64| f(xi, tau);
            // window is around y with width set by t_pt - tau
            let dt = (t_pt - tau).max(0.0);
            let r = quad.domain_halfwidth * (2.0 * v.lambda1 * dt).sqrt();
            let feature = ((2.0 * v.lambda0 * dt).sqrt()).min(data.x_feature).max(1e-300);
            integrate_composite(y - r, y + r, feature, quad.n_space, MAX_PANELS, |xi| {
                op.factor(v, KernelFactor::Lz, xi, tau) * inner(xi, 0.0)
            })
        });
    }
    acc
}

/// Parametrix part of the representation (no Levi correction):
/// ∫K u₀ + Duhamel ∫∫K f with K = Z or ∂ₓZ.
fn direct_part(
    v: &ParabolicCoefficients,
    quad: &QuadraturePolicy,
    op: &FrozenOperator,
    tau0: f64,
    data: &MomentData<'_>,
    which: KernelFactor,
) -> f64 {
    let mut acc = 0.0;
    if let Some(g) = data.initial {
        let dt = (op.t - tau0).max(0.0);
        let r = quad.domain_halfwidth * (2.0 * v.lambda1 * dt).sqrt();
        let feature = ((2.0 * v.lambda0 * dt).sqrt()).min(data.x_feature).max(1e-300);
        acc += integrate_composite(op.x - r, op.x + r, feature, quad.n_space, MAX_PANELS, |xi| {
            op.factor(v, which, xi, tau0) * g(xi)
        });
    }
    if let Some(f) = data.source {
        acc += integrate_time_upper_singular(tau0, op.t, quad.sing_exponent, quad.n_time, |tau| {
            let dt = (op.t - tau).max(0.0);
            let r = quad.domain_halfwidth * (2.0 * v.lambda1 * dt).sqrt();
            let feature = ((2.0 * v.lambda0 * dt).sqrt()).min(data.x_feature).max(1e-300);
            integrate_composite(op.x - r, op.x + r, feature, quad.n_space, MAX_PANELS, |xi| {
                op.factor(v, which, xi, tau) * f(xi, tau)
            })
        });
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::coeffs::ParabolicCoefficients;
    use approx::assert_abs_diff_eq;

    fn policy() -> QuadraturePolicy {
        QuadraturePolicy::default()
    }

    #[test]
    fn constant_coefficients_give_zero_iterates() {
        let v = ParabolicCoefficients::constant(1.3, 0.0, 0.0).unwrap();
        let table = PointSourceTable::build(&v, &policy(), 0.2, 0.0, 0.5f64.sqrt(), 6, 0);
        assert_eq!(table.depth(), 1);
        assert!(table.is_trivial());
        assert_eq!(table.phi(&v, 0.3, 0.2), 0.0);
    }

    #[test]
    fn first_iterate_matches_closed_form_for_constant_drift() {
        // a const, b const, c = 0: (ℒZ)₁ = b·∂ₓZ.
        let (a, b) = (0.8, 0.6);
        let v = ParabolicCoefficients::constant(a, b, 0.0).unwrap();
        let (x, t, xi, tau) = (0.35, 0.4, -0.1, 0.1);
        let lz = lz_value(&v, x, t, xi, tau);
        let (_, zx, _) = z_parts(a, x, t, xi, tau);
        assert_abs_diff_eq!(lz, b * zx, epsilon = 1e-14);
    }

    #[test]
    fn second_iterate_has_drift_closed_form() {
        // For a ≡ 1, b const, c = 0 the composition telescopes:
        // (ℒZ)₂(x,t,ξ,τ) = b²(t-τ)·∂ₓₓZ(x,t,ξ,τ).
        let b = 0.9;
        let v = ParabolicCoefficients::constant(1.0, b, 0.0).unwrap();
        let (xi, tau) = (0.0, 0.0);
        let table = PointSourceTable::build(&v, &policy(), xi, tau, 0.45f64.sqrt(), 4, 0);
        assert!(table.depth() >= 2);
        for (x, t) in [(0.1, 0.3), (-0.4, 0.2), (0.55, 0.42)] {
            let (_, _, zxx) = z_parts(1.0, x, t, xi, tau);
            let expected = b * b * (t - tau) * zxx;
            // quadrature at the exact query point (the evaluation path)
            let fresh = table.iterate_fresh(&v, &policy(), 1, x, t);
            assert_abs_diff_eq!(fresh, expected, epsilon = 2e-6 * expected.abs().max(0.05));
            // lattice read pays an interpolation toll but stays close
            let read = table.iterate(&v, 2, x, t);
            assert_abs_diff_eq!(read, expected, epsilon = 1e-4 * expected.abs().max(0.05));
        }
    }

    #[test]
    fn moment_table_reproduces_heat_semigroup_mass() {
        // Variable a, c = 0: ∫Γ(x,t,ξ,τ)dξ = 1, i.e. the representation
        // applied to g ≡ 1 returns 1.
        let v = ParabolicCoefficients::new(
            crate::kernel::coeffs::CoeffField::from_fn(|x: f64, t: f64| {
                1.0 + 0.3 * x.sin() * (-t).exp()
            }),
            crate::kernel::coeffs::CoeffField::from_fn(|x: f64, _| 0.2 * x.cos()),
            crate::kernel::coeffs::CoeffField::constant(0.0),
            0.65,
            1.35,
            1.0,
            4.0,
        )
        .unwrap();
        let one = |_x: f64| 1.0;
        let data = MomentData { initial: Some(&one), source: None, x_feature: 0.5 };
        let table = MomentTable::build(&v, &policy(), -4.0, 4.0, 0.1, 0.0, 0.3, &data, 6);
        for (x, t) in [(0.0, 0.05), (0.7, 0.2), (-1.3, 0.3)] {
            let u = table.evaluate(&v, &policy(), &data, x, t);
            assert_abs_diff_eq!(u, 1.0, epsilon = 1e-3);
        }
    }
}
