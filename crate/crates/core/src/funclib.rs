//! Test-function families, their derivatives, supports, exact dyadic dilation
//! and the integration domains.
//!
//! Every closed-form variant is written so that `x -> 2^m x` only rescales
//! lengths by powers of two. Evaluating `dilate_dyadic(f, m)` at `x` then
//! performs the same floating-point operations as evaluating `f` at `2^m x`,
//! and the two agree bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{HerzError, Result};
use crate::serde_ext;

/// `floor(log2 x)` for finite `x > 0`, read from the exponent bits.
pub fn floor_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    if exp == 0 {
        // subnormal
        let mant = bits & ((1u64 << 52) - 1);
        return -1074 + (63 - mant.leading_zeros() as i32);
    }
    exp - 1023
}

/// `ceil(log2 x)` for finite `x > 0`, exact at powers of two.
pub fn ceil_log2(x: f64) -> i32 {
    let f = floor_log2(x);
    if x == pow2(f) {
        f
    } else {
        f + 1
    }
}

/// `2^k` as an exact double.
pub fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(HerzError::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

fn default_unit() -> f64 {
    1.0
}

fn default_amplitude() -> f64 {
    1.0
}

/// `f(x) = A · (|x|/ρ)^a · |ln(|x|/ρ)|^b · τ(|x|)` on `r_lo < |x| < r_hi`, zero elsewhere.
///
/// `ρ` (`unit`, default 1) is the length unit. Dilation rescales `ρ`, which
/// carries the factor `2^{ma}` of the effective amplitude `A·ρ^{-a}` and moves
/// the logarithmic singularity with the function. `τ` is a C^∞ edge taper of
/// relative width `taper` (0 means a sharp cut-off).
///
/// At `|x| = ρ` with `b < 0` the value is 0 by convention; the point has measure zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialPowerLog {
    pub n: usize,
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub r_lo: f64,
    #[serde(with = "serde_ext")]
    pub r_hi: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_unit")]
    pub unit: f64,
    #[serde(default)]
    pub taper: f64,
}

/// C^∞ step: 0 for `t <= 0`, 1 for `t >= 1`.
fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let phi = |s: f64| (-1.0 / s).exp();
    let (p, q) = (phi(t), phi(1.0 - t));
    let dp = p / (t * t);
    let dq = -q / ((1.0 - t) * (1.0 - t));
    let den = p + q;
    (p / den, (dp * den - p * (dp + dq)) / (den * den))
}

impl RadialPowerLog {
    pub fn new(n: usize, a: f64, b: f64, r_lo: f64, r_hi: f64) -> Self {
        RadialPowerLog {
            n,
            a,
            b,
            r_lo,
            r_hi,
            amplitude: 1.0,
            unit: 1.0,
            taper: 0.0,
        }
    }

    pub fn with_taper(mut self, taper: f64) -> Self {
        self.taper = taper;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// `A·ρ^{-a}`: the coefficient of `|x|^a` when `b = 0`.
    /// A sharp cut-off where the profile is non-zero: no weak gradient.
    pub fn has_jump(&self) -> bool {
        if self.taper > 0.0 || self.amplitude == 0.0 {
            return false;
        }
        let nonzero = |r: f64| !(r == self.unit && self.b > 0.0);
        (self.r_lo > 0.0 && nonzero(self.r_lo)) || (self.r_hi.is_finite() && nonzero(self.r_hi))
    }

    pub fn effective_amplitude(&self) -> f64 {
        self.amplitude * self.unit.powf(-self.a)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(HerzError::Precondition("dimension n must be >= 1".into()));
        }
        if !(self.r_lo >= 0.0 && self.r_hi > self.r_lo) {
            return Err(HerzError::Precondition(format!(
                "RadialPowerLog needs 0 <= r_lo < r_hi, got ({}, {})",
                self.r_lo, self.r_hi
            )));
        }
        if !(self.unit > 0.0 && self.unit.is_finite()) {
            return Err(HerzError::Precondition("unit must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.taper) {
            return Err(HerzError::Precondition("taper must lie in [0, 0.5)".into()));
        }
        if self.taper > 0.0 && !self.r_hi.is_finite() {
            return Err(HerzError::Precondition("taper needs a finite r_hi".into()));
        }
        Ok(())
    }

    fn taper_width(&self) -> f64 {
        self.taper * (self.r_hi - self.r_lo)
    }

    /// Taper factor and its radial derivative.
    fn taper_at(&self, r: f64) -> (f64, f64) {
        if self.taper == 0.0 {
            return (1.0, 0.0);
        }
        let w = self.taper_width();
        let (hi, dhi) = smooth_step((self.r_hi - r) / w);
        if self.r_lo == 0.0 {
            return (hi, -dhi / w);
        }
        let (lo, dlo) = smooth_step((r - self.r_lo) / w);
        (lo * hi, (dlo * hi - lo * dhi) / w)
    }

    /// Untapered profile `A (r/ρ)^a |ln(r/ρ)|^b`.
    fn core(&self, r: f64) -> f64 {
        let s = r / self.unit;
        let pw = s.powf(self.a);
        if self.b == 0.0 {
            return self.amplitude * pw;
        }
        let l = s.ln().abs();
        if l == 0.0 {
            return 0.0;
        }
        self.amplitude * pw * l.powf(self.b)
    }

    /// Radial profile value at radius `r`.
    pub fn radial_value(&self, r: f64) -> f64 {
        if !(r > self.r_lo && r < self.r_hi) {
            return 0.0;
        }
        let v = self.core(r);
        if self.taper == 0.0 {
            v
        } else {
            v * self.taper_at(r).0
        }
    }

    /// Radial derivative of the profile; errors where it does not exist.
    pub fn radial_derivative(&self, r: f64) -> Result<f64> {
        if r == 0.0 && self.r_lo == 0.0 {
            return Err(HerzError::UndefinedGradient("the origin".into()));
        }
        let on_edge = (r == self.r_lo && self.r_lo > 0.0) || r == self.r_hi;
        if on_edge {
            if self.taper > 0.0 {
                return Ok(0.0);
            }
            return Err(HerzError::UndefinedGradient(format!(
                "the support boundary |x| = {r}"
            )));
        }
        if !(r > self.r_lo && r < self.r_hi) {
            return Ok(0.0);
        }
        let s = r / self.unit;
        let l = s.ln();
        if l == 0.0 && self.b != 0.0 && self.b <= 1.0 {
            return Err(HerzError::UndefinedGradient(format!(
                "|x| = {} where |log| vanishes",
                self.unit
            )));
        }
        let pw = s.powf(self.a);
        let dcore = if self.b == 0.0 {
            self.amplitude * self.a * pw / r
        } else if l == 0.0 {
            0.0
        } else {
            let la = l.abs();
            let lb = la.powf(self.b);
            self.amplitude * pw * (self.a * lb + self.b * la.powf(self.b - 1.0) * l.signum()) / r
        };
        if self.taper == 0.0 {
            return Ok(dcore);
        }
        let (t, dt) = self.taper_at(r);
        Ok(dcore * t + self.core(r) * dt)
    }

    /// Radii where the radial integrand may fail to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![self.r_lo, self.r_hi];
        if self.taper > 0.0 {
            let w = self.taper_width();
            if self.r_lo > 0.0 {
                v.push(self.r_lo + w);
            }
            v.push(self.r_hi - w);
        }
        if self.b != 0.0 {
            v.push(self.unit);
        }
        v.retain(|r| r.is_finite() && *r > 0.0);
        v
    }
}

/// `A · exp(1 - 1/(1 - |x-c|²/R²))` inside `B(c, R)`, zero outside; the peak value is `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothBump {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

impl SmoothBump {
    pub fn new(center: Vec<f64>, radius: f64, amplitude: f64) -> Self {
        SmoothBump {
            center,
            radius,
            amplitude,
        }
    }

    pub fn centered(n: usize, radius: f64) -> Self {
        SmoothBump::new(vec![0.0; n], radius, 1.0)
    }

    fn s(&self, x: &[f64]) -> f64 {
        dist2(x, &self.center) / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s = self.s(x);
        if s >= 1.0 {
            return 0.0;
        }
        self.amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = self.s(x);
        if s >= 1.0 {
            return vec![0.0; x.len()];
        }
        let d = 1.0 - s;
        let v = self.amplitude * (1.0 - 1.0 / d).exp();
        let factor = -v / (d * d) * 2.0 / (self.radius * self.radius);
        x.iter().zip(&self.center).map(|(xi, ci)| factor * (xi - ci)).collect()
    }
}

/// `A · exp(-|x-c|²/s²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub center: Vec<f64>,
    pub scale: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

/// Physicists' Hermite polynomial `H_k(t)`.
fn hermite(k: u32, t: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * t);
    if k == 0 {
        return h0;
    }
    for j in 1..k {
        let h2 = 2.0 * t * h1 - 2.0 * j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

impl GaussianSpec {
    pub fn new(center: Vec<f64>, scale: f64, amplitude: f64) -> Self {
        GaussianSpec {
            center,
            scale,
            amplitude,
        }
    }

    pub fn centered(n: usize, scale: f64) -> Self {
        GaussianSpec::new(vec![0.0; n], scale, 1.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.amplitude * (-dist2(x, &self.center) / (self.scale * self.scale)).exp()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let v = self.value(x);
        let k = -2.0 * v / (self.scale * self.scale);
        x.iter().zip(&self.center).map(|(xi, ci)| k * (xi - ci)).collect()
    }

    /// `D^β f(x)` for any multi-index, via `d^k/du^k e^{-u²} = (-1)^k H_k(u) e^{-u²}`.
    pub fn derivative(&self, beta: &[u32], x: &[f64]) -> f64 {
        let mut out = self.amplitude;
        for ((&xi, &ci), &bi) in x.iter().zip(&self.center).zip(beta) {
            let t = (xi - ci) / self.scale;
            let sign = if bi % 2 == 0 { 1.0 } else { -1.0 };
            out *= sign * hermite(bi, t) * (-t * t).exp() / self.scale.powi(bi as i32);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridLayout {
    /// Samples at nodes `origin + i·h`, multilinear interpolation in between.
    #[default]
    Nodal,
    /// One value per cell `[origin + i·h, origin + (i+1)·h)`, piecewise constant.
    Cell,
}

/// Dense samples on an axis-aligned box in dimension 1, 2 or 3, row-major
/// (last axis fastest). Zero outside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledGrid {
    pub n: usize,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
    #[serde(with = "crate::serde_ext::vec")]
    pub values: Vec<f64>,
    #[serde(default)]
    pub layout: GridLayout,
}

impl SampledGrid {
    pub fn new(
        origin: Vec<f64>,
        spacing: f64,
        shape: Vec<usize>,
        values: Vec<f64>,
        layout: GridLayout,
    ) -> Result<Self> {
        let g = SampledGrid {
            n: origin.len(),
            origin,
            spacing,
            shape,
            values,
            layout,
        };
        g.validate()?;
        Ok(g)
    }

    /// Samples `f` on the nodes of a box.
    pub fn sample(
        origin: Vec<f64>,
        spacing: f64,
        shape: Vec<usize>,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let n = origin.len();
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut x = vec![0.0; n];
        for flat in 0..total {
            let mut rem = flat;
            for axis in (0..n).rev() {
                let i = rem % shape[axis];
                rem /= shape[axis];
                x[axis] = origin[axis] + i as f64 * spacing;
            }
            values.push(f(&x));
        }
        SampledGrid::new(origin, spacing, shape, values, GridLayout::Nodal)
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n) {
            return Err(HerzError::DimensionUnsupported(self.n));
        }
        if self.origin.len() != self.n || self.shape.len() != self.n {
            return Err(HerzError::DimensionMismatch {
                expected: self.n,
                got: self.origin.len().min(self.shape.len()),
            });
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(HerzError::Precondition("grid spacing must be positive".into()));
        }
        let min_shape = if self.layout == GridLayout::Nodal { 2 } else { 1 };
        if self.shape.iter().any(|&s| s < min_shape) {
            return Err(HerzError::Precondition(format!(
                "every axis needs at least {min_shape} samples"
            )));
        }
        let total: usize = self.shape.iter().product();
        if total != self.values.len() {
            return Err(HerzError::Precondition(format!(
                "grid has {} values, shape implies {}",
                self.values.len(),
                total
            )));
        }
        Ok(())
    }

    /// Upper corner of the box.
    pub fn upper(&self) -> Vec<f64> {
        let cells = |s: usize| match self.layout {
            GridLayout::Nodal => s - 1,
            GridLayout::Cell => s,
        };
        self.origin
            .iter()
            .zip(&self.shape)
            .map(|(o, &s)| o + cells(s) as f64 * self.spacing)
            .collect()
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let upper = self.upper();
        for axis in 0..self.n {
            let inside = match self.layout {
                GridLayout::Nodal => x[axis] >= self.origin[axis] && x[axis] <= upper[axis],
                GridLayout::Cell => x[axis] >= self.origin[axis] && x[axis] < upper[axis],
            };
            if !inside {
                return 0.0;
            }
        }
        match self.layout {
            GridLayout::Cell => {
                let idx: Vec<usize> = (0..self.n)
                    .map(|a| {
                        let i = ((x[a] - self.origin[a]) / self.spacing).floor() as usize;
                        i.min(self.shape[a] - 1)
                    })
                    .collect();
                self.values[self.flat_index(&idx)]
            }
            GridLayout::Nodal => {
                let mut base = vec![0usize; self.n];
                let mut frac = vec![0.0; self.n];
                for a in 0..self.n {
                    let t = (x[a] - self.origin[a]) / self.spacing;
                    let i = (t.floor() as usize).min(self.shape[a] - 2);
                    base[a] = i;
                    frac[a] = t - i as f64;
                }
                let mut acc = 0.0;
                let mut idx = vec![0usize; self.n];
                for corner in 0..(1usize << self.n) {
                    let mut w = 1.0;
                    for a in 0..self.n {
                        let bit = (corner >> a) & 1;
                        idx[a] = base[a] + bit;
                        w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                    }
                    if w != 0.0 {
                        acc += w * self.values[self.flat_index(&idx)];
                    }
                }
                acc
            }
        }
    }

    /// Second-order central differences of the interpolant with step `spacing`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = self.spacing;
        let mut y = x.to_vec();
        (0..self.n)
            .map(|a| {
                y[a] = x[a] + h;
                let fp = self.value(&y);
                y[a] = x[a] - h;
                let fm = self.value(&y);
                y[a] = x[a];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    /// Radii of the closest and farthest points of the box.
    pub fn radius_range(&self) -> (f64, f64) {
        let upper = self.upper();
        let mut near = 0.0;
        let mut far = 0.0;
        for a in 0..self.n {
            let (lo, hi) = (self.origin[a], upper[a]);
            let d = if lo > 0.0 {
                lo
            } else if hi < 0.0 {
                -hi
            } else {
                0.0
            };
            near += d * d;
            let m = lo.abs().max(hi.abs());
            far += m * m;
        }
        (near.sqrt(), far.sqrt())
    }
}

/// A test function. JSON form: an object with a `"variant"` discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum FunctionSpec {
    RadialPowerLog(RadialPowerLog),
    SmoothBump(SmoothBump),
    #[serde(rename = "Gaussian", alias = "GaussianSpec")]
    Gaussian(GaussianSpec),
    SampledGrid(SampledGrid),
    FiniteSum { terms: Vec<FunctionSpec> },
}

/// How the mass of a function behaves beyond its finite support indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayHint {
    Compact,
    Gaussian,
    /// Power-law behaviour `|x|^a` on the unbounded side.
    Power(f64),
}

/// Annulus indices that can carry mass; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportAnnuli {
    pub k_min: Option<i32>,
    pub k_max: Option<i32>,
    pub decay: DecayHint,
}

fn annuli_for_radii(lo: f64, hi: f64) -> (Option<i32>, Option<i32>) {
    let k_min = if lo > 0.0 && lo.is_finite() {
        Some(floor_log2(lo) + 1)
    } else {
        None
    };
    let k_max = if hi.is_finite() && hi > 0.0 {
        Some(ceil_log2(hi))
    } else {
        None
    };
    (k_min, k_max)
}

impl FunctionSpec {
    pub fn radial_power_log(n: usize, a: f64, b: f64, r_lo: f64, r_hi: f64) -> Self {
        FunctionSpec::RadialPowerLog(RadialPowerLog::new(n, a, b, r_lo, r_hi))
    }

    pub fn bump(center: Vec<f64>, radius: f64) -> Self {
        FunctionSpec::SmoothBump(SmoothBump::new(center, radius, 1.0))
    }

    pub fn gaussian(center: Vec<f64>, scale: f64) -> Self {
        FunctionSpec::Gaussian(GaussianSpec::new(center, scale, 1.0))
    }

    /// Indicator of `C_0 = {1/2 <= |x| < 1}` (up to a null set).
    pub fn unit_annulus_plateau(n: usize) -> Self {
        FunctionSpec::radial_power_log(n, 0.0, 0.0, 0.5, 1.0)
    }

    pub fn dim(&self) -> usize {
        match self {
            FunctionSpec::RadialPowerLog(f) => f.n,
            FunctionSpec::SmoothBump(f) => f.center.len(),
            FunctionSpec::Gaussian(f) => f.center.len(),
            FunctionSpec::SampledGrid(g) => g.n,
            FunctionSpec::FiniteSum { terms } => terms.first().map_or(0, |t| t.dim()),
        }
    }

    /// Checks structural invariants (positive radii, consistent dimensions, ...).
    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionSpec::RadialPowerLog(f) => f.validate(),
            FunctionSpec::SmoothBump(f) => {
                if f.center.is_empty() {
                    return Err(HerzError::Precondition("bump center is empty".into()));
                }
                if !(f.radius > 0.0 && f.radius.is_finite()) {
                    return Err(HerzError::Precondition("bump radius must be positive".into()));
                }
                Ok(())
            }
            FunctionSpec::Gaussian(f) => {
                if f.center.is_empty() {
                    return Err(HerzError::Precondition("gaussian center is empty".into()));
                }
                if !(f.scale > 0.0 && f.scale.is_finite()) {
                    return Err(HerzError::Precondition("gaussian scale must be positive".into()));
                }
                Ok(())
            }
            FunctionSpec::SampledGrid(g) => g.validate(),
            FunctionSpec::FiniteSum { terms } => {
                let first = terms.first().ok_or_else(|| {
                    HerzError::Precondition("FiniteSum needs at least one term".into())
                })?;
                let n = first.dim();
                for t in terms {
                    t.validate()?;
                    if t.dim() != n {
                        return Err(HerzError::DimensionMismatch {
                            expected: n,
                            got: t.dim(),
                        });
                    }
                }
                Ok(())
            }
        }
    }

    pub fn gradient_available(&self) -> bool {
        match self {
            FunctionSpec::SampledGrid(_) => false,
            FunctionSpec::RadialPowerLog(f) => !f.has_jump(),
            FunctionSpec::FiniteSum { terms } => terms.iter().all(|t| t.gradient_available()),
            _ => true,
        }
    }

    /// Radially symmetric about the origin.
    pub fn is_radial(&self) -> bool {
        match self {
            FunctionSpec::RadialPowerLog(_) => true,
            FunctionSpec::SmoothBump(b) => b.center.iter().all(|&c| c == 0.0),
            FunctionSpec::Gaussian(g) => g.center.iter().all(|&c| c == 0.0),
            FunctionSpec::SampledGrid(_) => false,
            FunctionSpec::FiniteSum { terms } => terms.iter().all(|t| t.is_radial()),
        }
    }

    /// Value without the dimension check, for hot loops.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            FunctionSpec::RadialPowerLog(f) => f.radial_value(norm(x)),
            FunctionSpec::SmoothBump(f) => f.value(x),
            FunctionSpec::Gaussian(f) => f.value(x),
            FunctionSpec::SampledGrid(g) => g.value(x),
            FunctionSpec::FiniteSum { terms } => terms.iter().map(|t| t.value(x)).sum(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(self.value(x))
    }

    /// Gradient: analytic for closed forms, central differences for grids.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x)?;
        match self {
            FunctionSpec::RadialPowerLog(f) => {
                let r = norm(x);
                let d = f.radial_derivative(r)?;
                if r == 0.0 {
                    return Ok(vec![0.0; x.len()]);
                }
                Ok(x.iter().map(|xi| d * xi / r).collect())
            }
            FunctionSpec::SmoothBump(f) => Ok(f.gradient(x)),
            FunctionSpec::Gaussian(f) => Ok(f.gradient(x)),
            FunctionSpec::SampledGrid(g) => Ok(g.gradient(x)),
            FunctionSpec::FiniteSum { terms } => {
                let mut acc = vec![0.0; x.len()];
                for t in terms {
                    for (a, g) in acc.iter_mut().zip(t.gradient(x)?) {
                        *a += g;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// `D^β f(x)`. Orders 0 and 1 are available for all closed forms,
    /// higher orders only for Gaussians (and sums of them).
    pub fn derivative(&self, beta: &[u32], x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x)?;
        if beta.len() != x.len() {
            return Err(HerzError::DimensionMismatch {
                expected: x.len(),
                got: beta.len(),
            });
        }
        let order: u32 = beta.iter().sum();
        if order == 0 {
            return Ok(self.value(x));
        }
        match self {
            FunctionSpec::Gaussian(g) => Ok(g.derivative(beta, x)),
            FunctionSpec::FiniteSum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.derivative(beta, x)?;
                }
                Ok(acc)
            }
            _ if order == 1 => {
                let j = beta.iter().position(|&b| b == 1).unwrap_or(0);
                Ok(self.gradient(x)?[j])
            }
            _ => Err(HerzError::MissingDerivative(beta.to_vec())),
        }
    }

    /// Checks that `D^β` can be evaluated, without evaluating it.
    pub fn has_derivative(&self, beta: &[u32]) -> bool {
        let order: u32 = beta.iter().sum();
        match self {
            _ if order == 0 => true,
            FunctionSpec::Gaussian(_) => true,
            FunctionSpec::RadialPowerLog(f) if f.has_jump() => false,
            FunctionSpec::FiniteSum { terms } => terms.iter().all(|t| t.has_derivative(beta)),
            _ => order == 1,
        }
    }

    /// The spec of `x -> f(2^m x)`.
    pub fn dilate_dyadic(&self, m: i32) -> Result<FunctionSpec> {
        let s = pow2(-m);
        let scale_vec = |v: &[f64]| v.iter().map(|c| c * s).collect::<Vec<_>>();
        Ok(match self {
            FunctionSpec::RadialPowerLog(f) => FunctionSpec::RadialPowerLog(RadialPowerLog {
                r_lo: f.r_lo * s,
                r_hi: f.r_hi * s,
                unit: f.unit * s,
                ..f.clone()
            }),
            FunctionSpec::SmoothBump(f) => FunctionSpec::SmoothBump(SmoothBump {
                center: scale_vec(&f.center),
                radius: f.radius * s,
                amplitude: f.amplitude,
            }),
            FunctionSpec::Gaussian(f) => FunctionSpec::Gaussian(GaussianSpec {
                center: scale_vec(&f.center),
                scale: f.scale * s,
                amplitude: f.amplitude,
            }),
            FunctionSpec::SampledGrid(_) => {
                return Err(HerzError::UnsupportedVariant(
                    "dyadic dilation of a SampledGrid".into(),
                ))
            }
            FunctionSpec::FiniteSum { terms } => FunctionSpec::FiniteSum {
                terms: terms
                    .iter()
                    .map(|t| t.dilate_dyadic(m))
                    .collect::<Result<_>>()?,
            },
        })
    }

    /// The spec of `x -> f(x - h)`; radial power-log profiles cannot move.
    pub fn translate(&self, h: &[f64]) -> Result<FunctionSpec> {
        check_dim(self.dim(), h)?;
        let shift = |c: &[f64]| c.iter().zip(h).map(|(a, b)| a + b).collect::<Vec<_>>();
        Ok(match self {
            FunctionSpec::SmoothBump(f) => FunctionSpec::SmoothBump(SmoothBump {
                center: shift(&f.center),
                ..f.clone()
            }),
            FunctionSpec::Gaussian(f) => FunctionSpec::Gaussian(GaussianSpec {
                center: shift(&f.center),
                ..f.clone()
            }),
            FunctionSpec::SampledGrid(g) => FunctionSpec::SampledGrid(SampledGrid {
                origin: shift(&g.origin),
                ..g.clone()
            }),
            FunctionSpec::FiniteSum { terms } => FunctionSpec::FiniteSum {
                terms: terms.iter().map(|t| t.translate(h)).collect::<Result<_>>()?,
            },
            FunctionSpec::RadialPowerLog(_) => {
                return Err(HerzError::UnsupportedVariant(
                    "translation of a RadialPowerLog".into(),
                ))
            }
        })
    }

    /// Parameters `ρ` in `(0, inf)` where the ray `x + ρω` crosses a locus on
    /// which `f` is not smooth.
    pub fn ray_breaks(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let sphere = |c: &[f64], radius: f64, out: &mut Vec<f64>| {
            // |x + ρω - c| = radius
            let d: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
            let b = d.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            let cc = d.iter().map(|v| v * v).sum::<f64>() - radius * radius;
            let disc = b * b - cc;
            if disc >= 0.0 {
                let s = disc.sqrt();
                out.push(-b - s);
                out.push(-b + s);
            }
        };
        let mut out = Vec::new();
        match self {
            FunctionSpec::RadialPowerLog(f) => {
                let origin = vec![0.0; x.len()];
                for r in f.breakpoints() {
                    sphere(&origin, r, &mut out);
                }
            }
            FunctionSpec::SmoothBump(f) => sphere(&f.center, f.radius, &mut out),
            FunctionSpec::Gaussian(_) => {}
            FunctionSpec::SampledGrid(g) => {
                let upper = g.upper();
                for a in 0..x.len() {
                    if w[a] != 0.0 {
                        out.push((g.origin[a] - x[a]) / w[a]);
                        out.push((upper[a] - x[a]) / w[a]);
                    }
                }
            }
            FunctionSpec::FiniteSum { terms } => {
                for t in terms {
                    out.extend(t.ray_breaks(x, w));
                }
            }
        }
        out.retain(|r| r.is_finite() && *r > 0.0);
        out.sort_by(|a, b| a.total_cmp(b));
        out.dedup();
        out
    }

    /// Inner and outer radius of the support (`0` and `inf` when unbounded).
    ///
    /// Gaussians report `(0, inf)`; see [`FunctionSpec::effective_radii`].
    pub fn support_radii(&self) -> (f64, f64) {
        match self {
            FunctionSpec::RadialPowerLog(f) => (f.r_lo, f.r_hi),
            FunctionSpec::SmoothBump(f) => {
                let c = norm(&f.center);
                ((c - f.radius).max(0.0), c + f.radius)
            }
            FunctionSpec::Gaussian(_) => (0.0, f64::INFINITY),
            FunctionSpec::SampledGrid(g) => g.radius_range(),
            FunctionSpec::FiniteSum { terms } => terms.iter().fold(
                (f64::INFINITY, 0.0f64),
                |(lo, hi), t| {
                    let (a, b) = t.support_radii();
                    (lo.min(a), hi.max(b))
                },
            ),
        }
    }

    /// Support radii with Gaussians cut at `center ± 10·scale`, where the
    /// profile is below `e^{-100}` of its peak.
    pub fn effective_radii(&self) -> (f64, f64) {
        match self {
            FunctionSpec::Gaussian(g) => {
                let c = norm(&g.center);
                ((c - 10.0 * g.scale).max(0.0), c + 10.0 * g.scale)
            }
            FunctionSpec::FiniteSum { terms } => terms.iter().fold(
                (f64::INFINITY, 0.0f64),
                |(lo, hi), t| {
                    let (a, b) = t.effective_radii();
                    (lo.min(a), hi.max(b))
                },
            ),
            _ => self.support_radii(),
        }
    }

    /// Axis-aligned box outside which `f` vanishes (Gaussians cut at 10 scales).
    pub fn effective_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        match self {
            FunctionSpec::RadialPowerLog(f) => (vec![-f.r_hi; n], vec![f.r_hi; n]),
            FunctionSpec::SmoothBump(f) => (
                f.center.iter().map(|c| c - f.radius).collect(),
                f.center.iter().map(|c| c + f.radius).collect(),
            ),
            FunctionSpec::Gaussian(g) => (
                g.center.iter().map(|c| c - 10.0 * g.scale).collect(),
                g.center.iter().map(|c| c + 10.0 * g.scale).collect(),
            ),
            FunctionSpec::SampledGrid(g) => (g.origin.clone(), g.upper()),
            FunctionSpec::FiniteSum { terms } => {
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for t in terms {
                    let (a, b) = t.effective_box();
                    for i in 0..n {
                        lo[i] = lo[i].min(a[i]);
                        hi[i] = hi[i].max(b[i]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Smallest length over which the function changes appreciably.
    pub fn feature_scale(&self) -> f64 {
        match self {
            FunctionSpec::RadialPowerLog(f) => {
                let mut s = f.r_hi - f.r_lo;
                if f.taper > 0.0 {
                    s = s.min(f.taper_width());
                }
                if f.r_lo > 0.0 {
                    s = s.min(f.r_lo);
                }
                s
            }
            FunctionSpec::SmoothBump(f) => f.radius,
            FunctionSpec::Gaussian(g) => g.scale,
            FunctionSpec::SampledGrid(g) => g.spacing,
            FunctionSpec::FiniteSum { terms } => terms
                .iter()
                .map(|t| t.feature_scale())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Radii at which the radial integrand may have kinks or singularities.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = match self {
            FunctionSpec::RadialPowerLog(f) => f.breakpoints(),
            FunctionSpec::SmoothBump(f) => {
                let c = norm(&f.center);
                vec![c - f.radius, c + f.radius, c]
            }
            FunctionSpec::Gaussian(_) => Vec::new(),
            FunctionSpec::SampledGrid(g) => {
                let (lo, hi) = g.radius_range();
                vec![lo, hi]
            }
            FunctionSpec::FiniteSum { terms } => {
                terms.iter().flat_map(|t| t.breakpoints()).collect()
            }
        };
        v.retain(|r| r.is_finite() && *r > 0.0);
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    }

    /// Annuli `C_k` that can carry mass, with a hint on the unbounded sides.
    pub fn support_annuli(&self) -> SupportAnnuli {
        match self {
            FunctionSpec::RadialPowerLog(f) => {
                let (k_min, k_max) = annuli_for_radii(f.r_lo, f.r_hi);
                let decay = if k_min.is_some() && k_max.is_some() {
                    DecayHint::Compact
                } else {
                    DecayHint::Power(f.a)
                };
                SupportAnnuli { k_min, k_max, decay }
            }
            FunctionSpec::Gaussian(_) => SupportAnnuli {
                k_min: None,
                k_max: None,
                decay: DecayHint::Gaussian,
            },
            FunctionSpec::FiniteSum { terms } => {
                let mut k_min = Some(i32::MAX);
                let mut k_max = Some(i32::MIN);
                let mut decay = DecayHint::Compact;
                for t in terms {
                    let s = t.support_annuli();
                    k_min = match (k_min, s.k_min) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        _ => None,
                    };
                    k_max = match (k_max, s.k_max) {
                        (Some(a), Some(b)) => Some(a.max(b)),
                        _ => None,
                    };
                    decay = match (decay, s.decay) {
                        (DecayHint::Power(a), DecayHint::Power(b)) => DecayHint::Power(a.max(b)),
                        (DecayHint::Power(a), _) | (_, DecayHint::Power(a)) => DecayHint::Power(a),
                        (DecayHint::Gaussian, _) | (_, DecayHint::Gaussian) => DecayHint::Gaussian,
                        _ => DecayHint::Compact,
                    };
                }
                SupportAnnuli { k_min, k_max, decay }
            }
            _ => {
                let (lo, hi) = self.support_radii();
                let (k_min, k_max) = annuli_for_radii(lo, hi);
                SupportAnnuli {
                    k_min,
                    k_max,
                    decay: DecayHint::Compact,
                }
            }
        }
    }
}

/// The region `Ω`. Every built-in domain satisfies the cone condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", deny_unknown_fields)]
pub enum DomainSpec {
    FullSpace { n: usize },
    Ball { center: Vec<f64>, radius: f64 },
    /// Union of the annuli `C_k`, `k_min <= k <= k_max`.
    AnnulusRange { n: usize, k_min: i32, k_max: i32 },
    Cube { corner: Vec<f64>, side: f64 },
}

/// Height `ϱ` and half-aperture `κ` of a finite cone that fits at every point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    #[serde(with = "serde_ext")]
    pub height: f64,
    pub aperture: f64,
}

impl DomainSpec {
    pub fn full(n: usize) -> Self {
        DomainSpec::FullSpace { n }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        DomainSpec::Ball { center, radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::FullSpace { n } | DomainSpec::AnnulusRange { n, .. } => *n,
            DomainSpec::Ball { center, .. } => center.len(),
            DomainSpec::Cube { corner, .. } => corner.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::FullSpace { n } if *n == 0 => {
                Err(HerzError::Precondition("dimension n must be >= 1".into()))
            }
            DomainSpec::Ball { radius, .. } if !(*radius > 0.0) => {
                Err(HerzError::Precondition("ball radius must be positive".into()))
            }
            DomainSpec::Cube { side, .. } if !(*side > 0.0) => {
                Err(HerzError::Precondition("cube side must be positive".into()))
            }
            DomainSpec::AnnulusRange { k_min, k_max, .. } if k_min > k_max => Err(
                HerzError::Precondition(format!("AnnulusRange needs k_min <= k_max, got {k_min} > {k_max}")),
            ),
            _ if self.dim() == 0 => Err(HerzError::Precondition("domain dimension is zero".into())),
            _ => Ok(()),
        }
    }

    pub fn cone_condition(&self) -> bool {
        true
    }

    pub fn cone_params(&self) -> ConeParams {
        use std::f64::consts::FRAC_PI_3;
        use std::f64::consts::FRAC_PI_4;
        match self {
            DomainSpec::FullSpace { .. } => ConeParams {
                height: f64::INFINITY,
                aperture: FRAC_PI_4,
            },
            DomainSpec::Ball { radius, .. } => ConeParams {
                height: *radius,
                aperture: FRAC_PI_3,
            },
            DomainSpec::AnnulusRange { k_min, .. } => ConeParams {
                height: pow2(k_min - 2),
                aperture: FRAC_PI_4,
            },
            DomainSpec::Cube { corner, side } => ConeParams {
                height: side / 2.0,
                aperture: (1.0 / (corner.len() as f64).sqrt()).asin(),
            },
        }
    }

    pub fn contains_origin(&self) -> bool {
        match self {
            DomainSpec::FullSpace { .. } => true,
            DomainSpec::Ball { center, radius } => norm(center) < *radius,
            DomainSpec::AnnulusRange { .. } => false,
            DomainSpec::Cube { corner, side } => corner.iter().all(|&c| c < 0.0 && c + side > 0.0),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::FullSpace { .. } => true,
            DomainSpec::Ball { center, radius } => dist2(x, center) < radius * radius,
            DomainSpec::AnnulusRange { k_min, k_max, .. } => {
                let r = norm(x);
                r >= pow2(k_min - 1) && r < pow2(*k_max)
            }
            DomainSpec::Cube { corner, side } => x
                .iter()
                .zip(corner)
                .all(|(&xi, &c)| xi >= c && xi < c + side),
        }
    }

    /// `Some((r_lo, r_hi))` when membership depends only on `|x|`.
    pub fn radial_interval(&self) -> Option<(f64, f64)> {
        match self {
            DomainSpec::FullSpace { .. } => Some((0.0, f64::INFINITY)),
            DomainSpec::Ball { center, radius } if center.iter().all(|&c| c == 0.0) => {
                Some((0.0, *radius))
            }
            DomainSpec::AnnulusRange { k_min, k_max, .. } => {
                Some((pow2(k_min - 1), pow2(*k_max)))
            }
            _ => None,
        }
    }

    /// Radii between which the domain lies.
    pub fn radius_range(&self) -> (f64, f64) {
        match self {
            DomainSpec::Ball { center, radius } => {
                let c = norm(center);
                ((c - radius).max(0.0), c + radius)
            }
            DomainSpec::Cube { corner, side } => {
                let g = SampledGrid {
                    n: corner.len(),
                    origin: corner.clone(),
                    spacing: *side,
                    shape: vec![1; corner.len()],
                    values: vec![0.0],
                    layout: GridLayout::Cell,
                };
                g.radius_range()
            }
            _ => self.radial_interval().unwrap_or((0.0, f64::INFINITY)),
        }
    }

    /// Dilation of the domain matching `f -> f(2^m ·)`.
    pub fn dilate_dyadic(&self, m: i32) -> DomainSpec {
        let s = pow2(-m);
        match self {
            DomainSpec::FullSpace { n } => DomainSpec::FullSpace { n: *n },
            DomainSpec::Ball { center, radius } => DomainSpec::Ball {
                center: center.iter().map(|c| c * s).collect(),
                radius: radius * s,
            },
            DomainSpec::AnnulusRange { n, k_min, k_max } => DomainSpec::AnnulusRange {
                n: *n,
                k_min: k_min - m,
                k_max: k_max - m,
            },
            DomainSpec::Cube { corner, side } => DomainSpec::Cube {
                corner: corner.iter().map(|c| c * s).collect(),
                side: side * s,
            },
        }
    }
}
