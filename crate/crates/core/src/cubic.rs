//! Roots of the steady-state cubic a₃n³ + a₂n² + a₁n + a₀.
//!
//! Two independent solvers: the radical formula ([`solve_cubic_closed`]) and
//! a trigonometric/hyperbolic method with deflation ([`solve_cubic_numeric`]).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative size below which the discriminant is treated as zero.
const DISC_REL_EPS: f64 = 1e-12;
const POLISH_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoefficients {
    pub a3: f64,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
}

impl CubicCoefficients {
    pub fn new(a3: f64, a2: f64, a1: f64, a0: f64) -> Self {
        CubicCoefficients { a3, a2, a1, a0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        ((self.a3 * x + self.a2) * x + self.a1) * x + self.a0
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        ((z * self.a3 + self.a2) * z + self.a1) * z + self.a0
    }

    /// Magnitude scale used in residual bounds: the largest term at `x`.
    pub fn scale_at(&self, x: f64) -> f64 {
        let x = x.abs();
        (self.a3.abs() * x * x * x)
            .max(self.a2.abs() * x * x)
            .max(self.a1.abs() * x)
            .max(self.a0.abs())
            .max(1.0)
    }

    fn is_finite(&self) -> bool {
        self.a3.is_finite() && self.a2.is_finite() && self.a1.is_finite() && self.a0.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
    Unknown,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
            Stability::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "stable" => Stability::Stable,
            "unstable" => Stability::Unstable,
            "marginal" => Stability::Marginal,
            "unknown" => Stability::Unknown,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootEntry {
    pub value: f64,
    pub multiplicity: u8,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<RootEntry>,
    pub tolerance: f64,
}

impl RootSet {
    /// Number of distinct roots.
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.value).collect()
    }

    pub fn max(&self) -> Option<f64> {
        self.roots.last().map(|r| r.value)
    }
}

fn newton_polish(c: &CubicCoefficients, mut z: Complex64) -> Complex64 {
    let mut f = c.eval_complex(z);
    for _ in 0..POLISH_STEPS {
        if f.norm() == 0.0 {
            break;
        }
        let df = (z * (3.0 * c.a3) + 2.0 * c.a2) * z + c.a1;
        if df.norm() == 0.0 {
            break;
        }
        let z_new = z - f / df;
        let f_new = c.eval_complex(z_new);
        if !(f_new.norm() < f.norm()) {
            break;
        }
        z = z_new;
        f = f_new;
    }
    z
}

/// Terms of 4C³A − C²B² − 18CBAD + 27D²A² + 4DB³, whose sum is the
/// (negated) discriminant appearing under the square root of the formula.
fn discriminant_terms(a: f64, b: f64, c: f64, d: f64) -> [f64; 5] {
    [
        4.0 * c * c * c * a,
        -c * c * b * b,
        -18.0 * c * b * a * d,
        27.0 * d * d * a * a,
        4.0 * d * b * b * b,
    ]
}

/// Roots by the radical formula.
///
/// With D' = 4C³A − C²B² − 18CBAD + 27D²A² + 4DB³,
/// R = ∛(36CBA − 108DA² − 8B³ + 12√3·A·√D'), X± = R/6A ± (6AC − 2B²)/(3AR),
/// n₁ = X₋ − B/3A and n₂,₃ = −X₋/2 − B/3A ± i(√3/2)X₊.
///
/// Branch choice: of the two square roots ±√D' the one giving the larger
/// |R³| is taken (avoids cancellation), and R is the principal complex cube
/// root. Every cube root of the same radicand yields the same unordered
/// triple, so this choice only fixes the ordering. R = 0 means a triple root
/// at −B/3A. A near-zero D' is delegated to [`solve_cubic_numeric`].
pub fn solve_cubic_closed(coef: &CubicCoefficients) -> Result<[Complex64; 3]> {
    if coef.a3 == 0.0 {
        return Err(Error::DegenerateCubic);
    }
    if !coef.is_finite() {
        return Err(Error::NonFinite("cubic coefficients"));
    }
    // The formula is homogeneous in the coefficients; normalising keeps the
    // intermediate powers in range.
    let (a, b, c, d) = (1.0, coef.a2 / coef.a3, coef.a1 / coef.a3, coef.a0 / coef.a3);
    let monic = CubicCoefficients::new(a, b, c, d);

    let terms = discriminant_terms(a, b, c, d);
    let disc: f64 = terms.iter().sum();
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if disc.abs() <= DISC_REL_EPS * scale {
        return solve_cubic_numeric(coef);
    }

    let sqrt3 = 3f64.sqrt();
    let base = 36.0 * c * b * a - 108.0 * d * a * a - 8.0 * b * b * b;
    let root = Complex64::new(disc, 0.0).sqrt() * (12.0 * sqrt3 * a);
    let r3_plus = Complex64::new(base, 0.0) + root;
    let r3_minus = Complex64::new(base, 0.0) - root;
    let r3 = if r3_plus.norm() >= r3_minus.norm() { r3_plus } else { r3_minus };
    let shift = -b / (3.0 * a);
    if r3.norm() == 0.0 {
        let t = Complex64::new(shift, 0.0);
        return Ok([t, t, t]);
    }
    let r = r3.cbrt();
    let q = Complex64::new(6.0 * a * c - 2.0 * b * b, 0.0) / (r * (3.0 * a));
    let x_plus = r / (6.0 * a) + q;
    let x_minus = r / (6.0 * a) - q;
    let i = Complex64::new(0.0, 1.0);
    let n1 = x_minus + shift;
    let n2 = -x_minus / 2.0 + shift + i * (sqrt3 / 2.0) * x_plus;
    let n3 = -x_minus / 2.0 + shift - i * (sqrt3 / 2.0) * x_plus;
    Ok([n1, n2, n3].map(|z| newton_polish(&monic, z)))
}

/// Real root of a monic cubic by safeguarded Newton inside a bracket.
fn refine_real(c: &CubicCoefficients, x0: f64) -> f64 {
    let f0 = c.eval(x0);
    if f0 == 0.0 {
        return x0;
    }
    // Find a sign change around x0.
    let mut step = 1e-8 * (1.0 + x0.abs());
    let (mut lo, mut hi) = (x0, x0);
    let mut found = false;
    for _ in 0..200 {
        let (l, h) = (x0 - step, x0 + step);
        if c.eval(l).signum() != f0.signum() {
            lo = l;
            hi = x0;
            found = true;
            break;
        }
        if c.eval(h).signum() != f0.signum() {
            lo = x0;
            hi = h;
            found = true;
            break;
        }
        step *= 2.0;
    }
    if !found {
        return x0;
    }
    let flo = c.eval(lo);
    let mut x = x0;
    for _ in 0..200 {
        let fx = c.eval(x);
        if fx == 0.0 {
            return x;
        }
        if fx.signum() == flo.signum() {
            lo = x;
        } else {
            hi = x;
        }
        let df = (3.0 * c.a3 * x + 2.0 * c.a2) * x + c.a1;
        let mut next = if df != 0.0 { x - fx / df } else { f64::NAN };
        if !(next > lo.min(hi) && next < lo.max(hi)) {
            next = 0.5 * (lo + hi);
        }
        if next == x || (hi - lo).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        x = next;
    }
    x
}

/// Roots of x² + p x + q, computed without cancellation.
fn quadratic(p: f64, q: f64) -> [Complex64; 2] {
    let disc = p * p - 4.0 * q;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let t = -0.5 * (p + p.signum() * s);
        if t == 0.0 {
            return [Complex64::new(0.0, 0.0), Complex64::new(-p, 0.0)];
        }
        [Complex64::new(t, 0.0), Complex64::new(q / t, 0.0)]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(-0.5 * p, im), Complex64::new(-0.5 * p, -im)]
    }
}

/// Roots by Viète's trigonometric/hyperbolic method on the depressed cubic,
/// followed by bracketed Newton refinement of the real root, deflation and a
/// stable quadratic for the remaining pair.
pub fn solve_cubic_numeric(coef: &CubicCoefficients) -> Result<[Complex64; 3]> {
    if coef.a3 == 0.0 {
        return Err(Error::DegenerateCubic);
    }
    if !coef.is_finite() {
        return Err(Error::NonFinite("cubic coefficients"));
    }
    let (b, c, d) = (coef.a2 / coef.a3, coef.a1 / coef.a3, coef.a0 / coef.a3);
    let monic = CubicCoefficients::new(1.0, b, c, d);
    let shift = -b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;

    // Largest-magnitude real root of t³ + pt + q, then x = t + shift.
    let t = if p == 0.0 {
        -q.cbrt()
    } else if p < 0.0 {
        let m = (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt();
        if arg.abs() <= 1.0 {
            let theta = arg.acos() / 3.0;
            let cands = [0.0, 1.0, 2.0].map(|k| 2.0 * m * (theta - 2.0 * PI * k / 3.0).cos());
            let x = cands.map(|t| t + shift);
            // Prefer the root of largest |x| for the deflation step.
            let mut best = 0;
            for k in 1..3 {
                if x[k].abs() > x[best].abs() {
                    best = k;
                }
            }
            cands[best]
        } else {
            -2.0 * q.signum() * m * (arg.abs().acosh() / 3.0).cosh()
        }
    } else {
        let m = (p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p)) * (3.0 / p).sqrt();
        -2.0 * m * (arg.asinh() / 3.0).sinh()
    };
    let x1 = refine_real(&monic, t + shift);

    // Remaining pair from Vieta: sum = −b − x1, product = −d / x1.
    let pair = if x1 != 0.0 {
        quadratic(b + x1, -d / x1)
    } else {
        quadratic(b, c)
    };
    let pair = pair.map(|z| newton_polish(&monic, z));
    Ok([Complex64::new(x1, 0.0), pair[0], pair[1]])
}

/// Keeps the non-negative real roots and merges coincident ones.
///
/// A root is real if |Im| ≤ tol·(1+|Re|) and admissible if Re ≥ −tol; values
/// are clamped to ≥ 0. Roots closer than tol·(1 + max|r|) merge into one
/// entry whose value is their mean.
pub fn positive_real_roots(roots: &[Complex64], tol: f64) -> RootSet {
    let mut vals: Vec<f64> = roots
        .iter()
        .filter(|z| z.re.is_finite() && z.im.is_finite())
        .filter(|z| z.im.abs() <= tol * (1.0 + z.re.abs()) && z.re >= -tol)
        .map(|z| z.re.max(0.0))
        .collect();
    vals.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, u8)> = Vec::new();
    for v in vals {
        if let Some(last) = out.last_mut() {
            let (mean, k) = *last;
            if (v - mean).abs() <= tol * (1.0 + v.abs().max(mean.abs())) {
                *last = ((mean * k as f64 + v) / (k as f64 + 1.0), k + 1);
                continue;
            }
        }
        out.push((v, 1));
    }
    RootSet {
        roots: out
            .into_iter()
            .map(|(value, multiplicity)| RootEntry { value, multiplicity, stability: Stability::Unknown })
            .collect(),
        tolerance: tol,
    }
}
