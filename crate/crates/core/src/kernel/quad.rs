//! Gauss-Legendre quadrature building blocks for the kernel integrals.
//!
//! The parametrix integrals all reduce to two shapes:
//!
//! * spatial integrals of Gaussian-enveloped integrands, handled by
//!   composite Gauss-Legendre panels sized to the narrowest feature scale;
//! * time integrals with integrable inverse-square-root endpoint behavior on
//!   one or both ends, handled by the substitution σ = τ + rᵖ (and mirrored
//!   at the upper end), which makes the transformed integrand bounded.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GlRule {
    /// Computes the rule by Newton iteration on the Legendre polynomial.
    fn compute(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            // Chebyshev-based initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Legendre recurrence for P_n(x) and P'_n(x).
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// ∫_a^b f(x) dx with this rule mapped onto [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Cached rule lookup; rules are immutable once computed.
pub fn gl_rule(n: usize) -> Arc<GlRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard.entry(n).or_insert_with(|| Arc::new(GlRule::compute(n))).clone()
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`, with panel length
/// tied to `feature`: the smallest length scale on which the integrand
/// varies. Panels are capped to keep worst-case cost bounded.
pub fn integrate_composite(
    a: f64,
    b: f64,
    feature: f64,
    nodes_per_panel: usize,
    max_panels: usize,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let span = b - a;
    let target = (2.5 * feature).max(1e-300);
    let panels = ((span / target).ceil() as usize).clamp(1, max_panels);
    let rule = gl_rule(nodes_per_panel);
    let h = span / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let lo = a + h * k as f64;
        acc += rule.integrate(lo, lo + h, &mut f);
    }
    acc
}

/// ∫_τ^t f(σ) dσ where f may blow up like an integrable power at **both**
/// endpoints. The interval is split at the midpoint and each half is mapped
/// by σ = endpoint ± rᵖ, which turns (σ-endpoint)^{-1/2}-type behavior into
/// a bounded integrand for p = 2.
pub fn integrate_time_two_sided(
    tau: f64,
    t: f64,
    exponent: f64,
    nodes_per_side: usize,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    if t <= tau {
        return 0.0;
    }
    let half = 0.5 * (t - tau);
    let rule = gl_rule(nodes_per_side);
    let rmax = half.powf(1.0 / exponent);
    let p = exponent;
    // Lower end: σ = τ + r^p.
    let lower = rule.integrate(0.0, rmax, |r| p * r.powf(p - 1.0) * f(tau + r.powf(p)));
    // Upper end: σ = t - r^p.
    let upper = rule.integrate(0.0, rmax, |r| p * r.powf(p - 1.0) * f(t - r.powf(p)));
    lower + upper
}

/// ∫_τ^t f(σ) dσ with singular behavior only at the **upper** endpoint
/// (σ = t), as in Duhamel source terms where the kernel concentrates at
/// vanishing time separation.
pub fn integrate_time_upper_singular(
    tau: f64,
    t: f64,
    exponent: f64,
    nodes: usize,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    if t <= tau {
        return 0.0;
    }
    let rule = gl_rule(nodes);
    let p = exponent;
    let rmax = (t - tau).powf(1.0 / p);
    rule.integrate(0.0, rmax, |r| p * r.powf(p - 1.0) * f(t - r.powf(p)))
}

/// Intersection of two centered windows `[c₁ ± r₁] ∩ [c₂ ± r₂]`, or `None`
/// when they do not overlap. Used to restrict spatial quadrature to where a
/// product of two Gaussian envelopes is non-negligible.
pub fn overlap_interval(c1: f64, r1: f64, c2: f64, r2: f64) -> Option<(f64, f64)> {
    let lo = (c1 - r1).max(c2 - r2);
    let hi = (c1 + r1).min(c2 + r2);
    if hi > lo {
        Some((lo, hi))
    } else {
        None
    }
}
