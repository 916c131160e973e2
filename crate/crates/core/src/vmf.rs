//! von Mises–Fisher distributions on `S^{d-1}`: exact sampling and normalising
//! constants via modified Bessel functions of the first kind.

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::{Beta, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::rng::Rng;

/// Argument above which the large-argument Bessel expansion is used.
const ASYMPTOTIC_SWITCH: f64 = 30.0;

/// `exp(α μ^T x)` on the sphere; `α = 0` is the constant function 1.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfFunction {
    pub mean: DVector<f64>,
    pub alpha: f64,
}

impl VmfFunction {
    pub fn new(mean: DVector<f64>, alpha: f64) -> Self {
        assert!(alpha >= 0.0, "concentration must be non-negative");
        let n = mean.norm();
        Self { mean: mean / n, alpha }
    }

    pub fn log_value(&self, x: &DVector<f64>) -> f64 {
        self.alpha * self.mean.dot(x)
    }

    /// `ln ∫_{S^{d-1}} exp(α μ^T x) dx`.
    pub fn log_sphere_integral(&self) -> f64 {
        log_sphere_integral(self.mean.len(), self.alpha)
    }

    pub fn sample(&self, rng: &mut Rng) -> DVector<f64> {
        sample_vmf(&self.mean, self.alpha, rng)
    }
}

/// `ln` of the surface area of `S^{d-1}`, `2 π^{d/2} / Γ(d/2)`.
pub fn log_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    std::f64::consts::LN_2 + h * std::f64::consts::PI.ln() - ln_gamma(h)
}

pub fn sphere_area(d: usize) -> f64 {
    log_sphere_area(d).exp()
}

/// `ln I_ν(x)` for `ν >= 0`, `x > 0`.
pub fn log_bessel_i(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0 && x >= 0.0);
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x >= ASYMPTOTIC_SWITCH && x >= 2.0 * nu * nu {
        if let Some(v) = log_bessel_i_asymptotic(nu, x) {
            return v;
        }
    }
    log_bessel_i_series(nu, x)
}

/// Power series `Σ (x/2)^{2k+ν} / (k! Γ(k+ν+1))`, summed in log space.
/// All terms are positive, so this is accurate for any `x`; cost grows like `x`.
fn log_bessel_i_series(nu: f64, x: f64) -> f64 {
    let lh = (x / 2.0).ln();
    let log_term = |k: f64| (2.0 * k + nu) * lh - ln_gamma(k + 1.0) - ln_gamma(k + nu + 1.0);
    // Terms peak where (k + 1)(k + ν + 1) ≈ x²/4.
    let peak = (((nu * nu + x * x).sqrt() - nu) / 2.0).floor().max(0.0);
    let top = log_term(peak);
    let mut sum = 1.0;
    let mut k = peak + 1.0;
    loop {
        let r = (log_term(k) - top).exp();
        sum += r;
        if r < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    let mut k = peak - 1.0;
    while k >= 0.0 {
        let r = (log_term(k) - top).exp();
        sum += r;
        if r < 1e-17 * sum {
            break;
        }
        k -= 1.0;
    }
    top + sum.ln()
}

/// Hankel expansion `e^x / sqrt(2πx) Σ (-1)^k a_k(ν) / x^k`.
fn log_bessel_i_asymptotic(nu: f64, x: f64) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if next.abs() >= term.abs() && k > 1 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (sum > 0.0).then(|| x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln())
}

/// `ln ∫_{S^{d-1}} exp(α μ^T x) dx = ln[(2π)^{d/2} I_{d/2-1}(α) / α^{d/2-1}]`.
pub fn log_sphere_integral(d: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return log_sphere_area(d);
    }
    let nu = d as f64 / 2.0 - 1.0;
    if nu == 0.0 {
        return (2.0 * std::f64::consts::PI).ln() + log_bessel_i(0.0, alpha);
    }
    (d as f64 / 2.0) * (2.0 * std::f64::consts::PI).ln() + log_bessel_i(nu, alpha) - nu * alpha.ln()
}

/// Expected `μ^T x` under vMF(μ, α): `I_{d/2}(α) / I_{d/2-1}(α)`.
pub fn mean_resultant_length(d: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let nu = d as f64 / 2.0;
    (log_bessel_i(nu, alpha) - log_bessel_i(nu - 1.0, alpha)).exp()
}

/// Exact vMF draw (Wood's rejection scheme for the cosine `w = μ^T x`).
pub fn sample_vmf(mean: &DVector<f64>, alpha: f64, rng: &mut Rng) -> DVector<f64> {
    let d = mean.len();
    let gauss = |rng: &mut Rng| DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(rng));
    if alpha == 0.0 {
        let g = gauss(rng);
        let n = g.norm();
        return g / n;
    }
    let m1 = (d - 1) as f64;
    let b = m1 / (2.0 * alpha + (4.0 * alpha * alpha + m1 * m1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = alpha * x0 + m1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(m1 / 2.0, m1 / 2.0).expect("valid beta shape");
    let w = loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = 1.0 - rng.random::<f64>();
        if alpha * w + m1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };
    let tangent = loop {
        let g = gauss(rng);
        let proj = &g - mean * mean.dot(&g);
        let n = proj.norm();
        if n > 1e-12 {
            break proj / n;
        }
    };
    mean * w + tangent * (1.0 - w * w).max(0.0).sqrt()
}
