//! Closed-form and root-finding reference solutions: modified Bessel
//! functions, the disk and rectangle Steklov spectra, and the small-`p`
//! asymptote.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dtn::ModeGroup;
use crate::geometry::{Domain, Point};
use crate::{Error, Result};

/// Above this argument `I_n(x)` overflows `f64`; use the scaled forms.
pub const BESSEL_OVERFLOW: f64 = 700.0;

/// Below this argument the power series is used; above it, the large-`x`
/// expansion of `I_0` combined with continued-fraction ratios.
const SERIES_LIMIT: f64 = 30.0;

/// `I_{n+1}(x) / I_n(x)` by the continued fraction
/// `1/(2(n+1)/x + 1/(2(n+2)/x + …))` (modified Lentz).
pub fn bessel_i_ratio(n: u32, x: f64) -> f64 {
    assert!(x >= 0.0, "bessel_i_ratio needs x >= 0, got {x}");
    if x == 0.0 {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let b = |k: u32| 2.0 * f64::from(n + k) / x;
    let mut f = b(1);
    let mut c = f;
    let mut d = 0.0;
    for k in 2..1_000_000 {
        let bk = b(k);
        d = bk + d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = bk + 1.0 / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| f64::from(k).ln()).sum()
}

/// `e^{-x} I_n(x)` by the ascending series (all terms positive).
fn scaled_series(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let lead = f64::from(n) * (0.5 * x).ln() - ln_factorial(n) - x;
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1.. {
        term *= q / (f64::from(m) * f64::from(m + n));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    lead.exp() * sum
}

/// `e^{-x} I_0(x)` by the large-argument expansion, truncated at its
/// smallest term.
fn scaled_i0_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = f64::from(2 * k - 1);
        let next = term * odd * odd / (8.0 * f64::from(k) * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

fn scaled_value(n: u32, x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        return scaled_series(n, x);
    }
    let mut v = scaled_i0_asymptotic(x);
    for j in 0..n {
        v *= bessel_i_ratio(j, x);
    }
    v
}

/// `(e^{-x} I_n(x), e^{-x} I_n'(x))`, finite for every `x >= 0`.
pub fn bessel_i_scaled(n: u32, x: f64) -> (f64, f64) {
    assert!(x >= 0.0, "bessel_i_scaled needs x >= 0, got {x}");
    let v = scaled_value(n, x);
    let up = scaled_value(n + 1, x);
    let down = if n == 0 { up } else { scaled_value(n - 1, x) };
    (v, 0.5 * (down + up))
}

/// `(I_n(x), I_n'(x))` with relative error near machine precision.
pub fn bessel_i(n: u32, x: f64) -> Result<(f64, f64)> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("Bessel argument must be >= 0, got {x}")));
    }
    if x > BESSEL_OVERFLOW {
        return Err(Error::Numerical(format!("I_{n}({x}) overflows; use bessel_i_scaled")));
    }
    let (v, d) = bessel_i_scaled(n, x);
    let e = x.exp();
    Ok((v * e, d * e))
}

/// DtN eigenvalue of angular order `n` on the disk of radius `r`:
/// `√p I_n'(r√p) / I_n(r√p)`, and `n / r` at `p = 0`.
pub fn disk_eigenvalue(n: u32, r: f64, p: f64) -> f64 {
    if p == 0.0 {
        return f64::from(n) / r;
    }
    let s = p.sqrt();
    f64::from(n) / r + s * bessel_i_ratio(n, r * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiskTrace {
    Constant,
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskEigenpair {
    pub order: u32,
    pub trace: DiskTrace,
    pub mu: f64,
    pub radius: f64,
    pub p: f64,
}

impl DiskEigenpair {
    /// Angular factor, normalized in `L²` of the circle.
    pub fn angular(&self, theta: f64) -> f64 {
        let r = self.radius;
        let k = f64::from(self.order);
        match self.trace {
            DiskTrace::Constant => 1.0 / (2.0 * PI * r).sqrt(),
            DiskTrace::Cos => (k * theta).cos() / (PI * r).sqrt(),
            DiskTrace::Sin => (k * theta).sin() / (PI * r).sqrt(),
        }
    }

    /// Extension into the disk centered at the origin.
    pub fn value(&self, x: Point) -> f64 {
        let rho = x.norm();
        let r = self.radius;
        let radial = if self.p == 0.0 {
            (rho / r).powi(self.order as i32)
        } else {
            let s = self.p.sqrt();
            let (num, _) = bessel_i_scaled(self.order, rho * s);
            let (den, _) = bessel_i_scaled(self.order, r * s);
            num / den * (-(r - rho) * s).exp()
        };
        radial * self.angular(x.y.atan2(x.x))
    }
}

/// The `count` lowest disk eigenpairs: one constant mode, then a cos/sin
/// pair for each order `n >= 1`.
pub fn disk_spectrum(r: f64, p: f64, count: usize) -> Vec<DiskEigenpair> {
    let mut out = Vec::with_capacity(count);
    let mut n = 0u32;
    while out.len() < count {
        let mu = disk_eigenvalue(n, r, p);
        let traces: &[DiskTrace] = if n == 0 { &[DiskTrace::Constant] } else { &[DiskTrace::Cos, DiskTrace::Sin] };
        for &trace in traces {
            if out.len() < count {
                out.push(DiskEigenpair { order: n, trace, mu, radius: r, p });
            }
        }
        n += 1;
    }
    out
}

/// Disk eigenspaces covering at least the first `count` indices, evaluated
/// at boundary points, for [`crate::dtn::eigenfunction_rmse`]. Pairs are
/// never split.
pub fn disk_mode_groups(r: f64, p: f64, count: usize, points: &[Point]) -> Vec<ModeGroup> {
    let mut groups: Vec<ModeGroup> = Vec::new();
    let mut covered = 0;
    let mut n = 0u32;
    while covered < count {
        let traces: &[DiskTrace] = if n == 0 { &[DiskTrace::Constant] } else { &[DiskTrace::Cos, DiskTrace::Sin] };
        let mu = disk_eigenvalue(n, r, p);
        let traces: Vec<Vec<f64>> = traces
            .iter()
            .map(|&trace| {
                let e = DiskEigenpair { order: n, trace, mu, radius: r, p };
                points.iter().map(|x| e.angular(x.y.atan2(x.x))).collect()
            })
            .collect();
        covered += traces.len();
        groups.push(ModeGroup { mu, traces });
        n += 1;
    }
    groups
}

/// Symmetry of a one-dimensional factor about the midpoint of its side.
///
/// A symmetric factor gives `μ = √t tanh(√t b/2)` and an antisymmetric one
/// `μ = √t coth(√t b/2)`, where `t` is the separation constant of that
/// coordinate (`u'' = t u`). In the `α = b√t` notation these are
/// `(α/b) tanh(α/2)` and `(α/b) coth(α/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Symmetric,
    Antisymmetric,
}

/// `α = b√t`: real for `t >= 0`, purely imaginary (stored as `b√-t`)
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Alpha {
    Real(f64),
    Imaginary(f64),
}

/// Separable eigenpair of the rectangle `[0, b1] × [0, b2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RectangleEigenpair {
    pub parity: [Parity; 2],
    /// Separation constants, `t[0] + t[1] = p`.
    pub t: [f64; 2],
    pub sides: [f64; 2],
    pub mu: f64,
}

/// `F(t)` written as `num / den` with both parts bounded near poles.
fn ratio_parts(parity: Parity, t: f64, half: f64) -> (f64, f64) {
    if t >= 0.0 {
        let s = t.sqrt();
        let y = s * half;
        match parity {
            Parity::Symmetric => (s * y.tanh(), 1.0),
            // tanh(y)/s, which tends to `half` as t -> 0.
            Parity::Antisymmetric => (1.0, if y < 1e-8 { half } else { y.tanh() / s }),
        }
    } else {
        let w = (-t).sqrt();
        let y = w * half;
        match parity {
            Parity::Symmetric => (-w * y.sin(), y.cos()),
            Parity::Antisymmetric => (y.cos(), if y < 1e-8 { half } else { y.sin() / w }),
        }
    }
}

/// Value of the one-dimensional Steklov ratio `u'(b)/u(b)` for the factor
/// with separation constant `t`.
fn side_ratio(parity: Parity, t: f64, half: f64) -> f64 {
    let (n, d) = ratio_parts(parity, t, half);
    n / d
}

/// Separation constants at which the side ratio has a pole, inside
/// `[lo, hi]`. Poles only occur for `t < 0`.
fn ratio_poles(parity: Parity, half: f64, lo: f64, hi: f64) -> Vec<f64> {
    let offset = match parity {
        Parity::Symmetric => 0.5,
        Parity::Antisymmetric => 1.0,
    };
    let mut out = Vec::new();
    for k in 0.. {
        let w = (f64::from(k) + offset) * PI / half;
        let t = -w * w;
        if t < lo {
            break;
        }
        if t <= hi {
            out.push(t);
        }
    }
    out
}

impl RectangleEigenpair {
    pub fn alpha(&self, n: usize) -> Alpha {
        let t = self.t[n];
        if t >= 0.0 {
            Alpha::Real(self.sides[n] * t.sqrt())
        } else {
            Alpha::Imaginary(self.sides[n] * (-t).sqrt())
        }
    }

    /// `α_1²/b_1² + α_2²/b_2²`, which equals `p`.
    pub fn alpha_constraint(&self) -> f64 {
        let sq = |a: Alpha, b: f64| match a {
            Alpha::Real(x) => (x / b).powi(2),
            Alpha::Imaginary(x) => -(x / b).powi(2),
        };
        sq(self.alpha(0), self.sides[0]) + sq(self.alpha(1), self.sides[1])
    }

    /// Residual of the defining equation `F_1(t_1) = F_2(t_2)` in the
    /// cross-multiplied, pole-free form.
    pub fn residual(&self) -> f64 {
        let (n1, d1) = ratio_parts(self.parity[0], self.t[0], 0.5 * self.sides[0]);
        let (n2, d2) = ratio_parts(self.parity[1], self.t[1], 0.5 * self.sides[1]);
        n1 * d2 - n2 * d1
    }

    /// One-dimensional factor along coordinate `n` (unnormalized).
    ///
    /// Real `α` uses the decaying-exponential forms
    /// `(e^{-αx/b} ± e^{-α(1-x/b)}) / (1 ± e^{-α})`, which stay finite for
    /// any `α`; imaginary `α = iw` gives `cos(w(x/b - 1/2))` or
    /// `sin(w(1/2 - x/b))`.
    pub fn factor(&self, n: usize, x: f64) -> f64 {
        let b = self.sides[n];
        let s = x / b;
        match (self.alpha(n), self.parity[n]) {
            (Alpha::Real(a), Parity::Symmetric) => ((-a * s).exp() + (-a * (1.0 - s)).exp()) / (1.0 + (-a).exp()),
            (Alpha::Real(a), Parity::Antisymmetric) => {
                if a == 0.0 {
                    1.0 - 2.0 * s
                } else {
                    (-a * s).exp() * (-a * (1.0 - 2.0 * s)).exp_m1() / (-a).exp_m1()
                }
            }
            (Alpha::Imaginary(w), Parity::Symmetric) => (w * (s - 0.5)).cos(),
            (Alpha::Imaginary(w), Parity::Antisymmetric) => (w * (0.5 - s)).sin(),
        }
    }

    /// Unnormalized eigenfunction at a point of `[0, b1] × [0, b2]`.
    pub fn value(&self, x: Point) -> f64 {
        self.factor(0, x.x) * self.factor(1, x.y)
    }
}

/// Bound on the number of times the eigenvalue search window is doubled.
const MAX_SEARCH_DOUBLINGS: usize = 40;

/// The `count` lowest DtN eigenpairs of `[0, b1] × [0, b2]`.
///
/// For each of the four parity classes the eigenvalue condition is
/// `h(t_1) = F_1(t_1) - F_2(p - t_1) = 0`. Each side ratio `F` increases
/// strictly in its separation constant between poles, so `h` increases
/// strictly between consecutive poles of either term and has at most one
/// root there. All roots with `μ <= μ_max` lie in a bounded range of
/// `t_1`; `μ_max` is doubled until `count` eigenvalues are found.
pub fn rectangle_spectrum(b1: f64, b2: f64, p: f64, count: usize) -> Result<Vec<RectangleEigenpair>> {
    if !(b1 > 0.0 && b2 > 0.0) {
        return Err(Error::InvalidArgument(format!("rectangle sides must be positive, got {b1} x {b2}")));
    }
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must be finite and >= 0, got {p}")));
    }
    let mut mu_max = p.sqrt() + 2.0 * PI * count as f64 / (b1 + b2) + 1.0;
    for _ in 0..MAX_SEARCH_DOUBLINGS {
        let mut found = Vec::new();
        for parity in [
            [Parity::Symmetric, Parity::Symmetric],
            [Parity::Symmetric, Parity::Antisymmetric],
            [Parity::Antisymmetric, Parity::Symmetric],
            [Parity::Antisymmetric, Parity::Antisymmetric],
        ] {
            found.extend(class_roots(parity, [b1, b2], p, mu_max)?);
        }
        found.retain(|e| e.mu <= mu_max);
        if found.len() >= count {
            found.sort_by(|a, b| a.mu.total_cmp(&b.mu));
            found.truncate(count);
            return Ok(found);
        }
        mu_max *= 2.0;
    }
    Err(Error::Numerical(format!("could not find {count} rectangle eigenvalues")))
}

fn class_roots(parity: [Parity; 2], sides: [f64; 2], p: f64, mu_max: f64) -> Result<Vec<RectangleEigenpair>> {
    let half = [0.5 * sides[0], 0.5 * sides[1]];
    // F(t) >= √t - 1/(2L) for t >= 0, so F > μ_max once √t > μ_max + 1/L.
    let t_hi = |h: f64| (mu_max + 1.0 / h).powi(2);
    let lo = p - t_hi(half[1]);
    let hi = t_hi(half[0]);
    let h = |t1: f64| side_ratio(parity[0], t1, half[0]) - side_ratio(parity[1], p - t1, half[1]);

    let mut poles: Vec<f64> = ratio_poles(parity[0], half[0], lo, hi);
    poles.extend(ratio_poles(parity[1], half[1], p - hi, p - lo).into_iter().map(|t2| p - t2));
    poles.sort_by(f64::total_cmp);
    poles.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));

    let mut cuts = vec![(lo, false)];
    cuts.extend(poles.iter().map(|&t| (t, true)));
    cuts.push((hi, false));

    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let ((a, a_pole), (b, b_pole)) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        // Just right of a pole h -> -∞, just left of one h -> +∞.
        let ha = if a_pole { f64::NEG_INFINITY } else { h(a) };
        let hb = if b_pole { f64::INFINITY } else { h(b) };
        if ha == 0.0 {
            out.push(make_pair(parity, sides, p, a));
            continue;
        }
        if !(ha < 0.0 && hb > 0.0) {
            continue;
        }
        let t1 = bisect(&h, a, b)?;
        out.push(make_pair(parity, sides, p, t1));
    }
    Ok(out)
}

fn make_pair(parity: [Parity; 2], sides: [f64; 2], p: f64, t1: f64) -> RectangleEigenpair {
    let t = [t1, p - t1];
    let mu = side_ratio(parity[0], t1, 0.5 * sides[0]);
    RectangleEigenpair { parity, t, sides, mu }
}

/// Bisection on an increasing function with `h(a+) < 0 < h(b-)`, then a
/// secant step on the final bracket.
fn bisect(h: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Result<f64> {
    let (lo, hi) = (a, b);
    for _ in 0..300 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || b - a <= 1e-15 * m.abs().max(1.0) {
            break;
        }
        let hm = h(m);
        if !hm.is_finite() {
            return Err(Error::RootBracketing { lo, hi, msg: format!("non-finite value at {m}") });
        }
        if hm > 0.0 {
            b = m;
        } else if hm < 0.0 {
            a = m;
        } else {
            return Ok(m);
        }
    }
    let (ha, hb) = (h(a), h(b));
    if ha.is_finite() && hb.is_finite() && hb > ha {
        let s = a - ha * (b - a) / (hb - ha);
        if s >= a && s <= b && h(s).abs() <= ha.abs().min(hb.abs()) {
            return Ok(s);
        }
    }
    Ok(0.5 * (a + b))
}

/// Rectangle eigenspaces evaluated at boundary points. Exactly degenerate
/// pairs (squares) are grouped.
pub fn rectangle_mode_groups(b1: f64, b2: f64, p: f64, count: usize, points: &[Point]) -> Result<Vec<ModeGroup>> {
    let pairs = rectangle_spectrum(b1, b2, p, count)?;
    let mut groups: Vec<ModeGroup> = Vec::new();
    for e in pairs {
        let trace: Vec<f64> = points.iter().map(|&x| e.value(x)).collect();
        match groups.last_mut() {
            Some(g) if (g.mu - e.mu).abs() <= 1e-10 * e.mu.max(1.0) => g.traces.push(trace),
            _ => groups.push(ModeGroup { mu: e.mu, traces: vec![trace] }),
        }
    }
    Ok(groups)
}

/// Slope `|Ω|/|∂Ω|` of `μ_0 ≃ p|Ω|/|∂Ω|` as `p -> 0`.
pub fn asymptote_small_p(domain: &Domain) -> f64 {
    domain.area() / domain.perimeter()
}
