//! L^p masses over single dyadic annuli.
//!
//! Radial integrands reduce to one dimension against `|S^{n-1}| r^{n-1} dr`
//! and are integrated by adaptive Gauss–Kronrod (7/15) bisection. Other
//! integrands use a polar tensor rule: the same adaptive radial rule, with
//! an inner sphere rule refined by doubling at every radial node.
//!
//! All refinement decisions are relative, so a dyadic dilation of the
//! integrand (which rescales nodes by powers of two) reproduces the same
//! panels.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{HerzError, Result};
use crate::funclib::{pow2, DomainSpec, FunctionSpec, RadialPowerLog};
use crate::params::Exponent;
use crate::serde_ext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadMode {
    /// Radial reduction when both integrand and domain allow it, tensor rule otherwise.
    #[default]
    Auto,
    Radial1d,
    TensorGrid,
    /// Closed form (or a 1-D integral in `u = ln r`) for untapered RadialPowerLog.
    OracleExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    #[serde(default)]
    pub mode: QuadMode,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            rel_tol: 1e-10,
            max_subdivisions: 60,
            mode: QuadMode::Auto,
        }
    }
}

impl QuadratureOptions {
    /// Defaults for piecewise-multilinear grid data.
    pub fn grid() -> Self {
        QuadratureOptions {
            rel_tol: 1e-4,
            ..Default::default()
        }
    }

    pub fn with_tol(rel_tol: f64) -> Self {
        QuadratureOptions {
            rel_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.max_subdivisions == 0 {
            return Err(HerzError::Precondition(
                "quadrature needs rel_tol > 0 and max_subdivisions >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// `‖f χ_k χ_Ω‖_p` with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusMass {
    pub k: i32,
    #[serde(with = "serde_ext")]
    pub value: f64,
    #[serde(with = "serde_ext")]
    pub err_est: f64,
}

/// Anything that can be integrated over annuli.
pub trait Field: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    /// Radially symmetric about the origin.
    fn is_radial(&self) -> bool;
    /// Radii where the integrand may be non-smooth.
    fn breakpoints(&self) -> Vec<f64>;
    /// The field vanishes outside `lo <= |x| <= hi`.
    fn support_radii(&self) -> (f64, f64);
    fn oracle(&self) -> Option<&RadialPowerLog> {
        None
    }
}

impl Field for FunctionSpec {
    fn dim(&self) -> usize {
        FunctionSpec::dim(self)
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.value(x)
    }
    fn is_radial(&self) -> bool {
        FunctionSpec::is_radial(self)
    }
    fn breakpoints(&self) -> Vec<f64> {
        FunctionSpec::breakpoints(self)
    }
    fn support_radii(&self) -> (f64, f64) {
        FunctionSpec::support_radii(self)
    }
    fn oracle(&self) -> Option<&RadialPowerLog> {
        match self {
            FunctionSpec::RadialPowerLog(f) if f.taper == 0.0 => Some(f),
            _ => None,
        }
    }
}

impl<T: Field + ?Sized> Field for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
    fn is_radial(&self) -> bool {
        (**self).is_radial()
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
    fn support_radii(&self) -> (f64, f64) {
        (**self).support_radii()
    }
    fn oracle(&self) -> Option<&RadialPowerLog> {
        (**self).oracle()
    }
}

/// `|S^{n-1}| = 2π^{n/2}/Γ(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    assert!(n >= 1, "sphere_area needs n >= 1");
    // Γ(n/2) by the half-integer recursion
    let mut gamma = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut s = if n % 2 == 0 { 1.0 } else { 0.5 };
    while s + 0.5 < n as f64 / 2.0 {
        gamma *= s;
        s += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Kronrod-15 panel: `(K15, |K15 - G7|)`.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

/// Adaptive integral of `f` over `[a, b]`, split first at `breaks`.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate is below `rel_tol·|I|` or `max_subdivisions` splits were made.
/// Returns `(value, err_est)`.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
    max_subdivisions: usize,
) -> (f64, f64) {
    if !(b > a) {
        return (0.0, 0.0);
    }
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);
    let mut panels: Vec<Panel> = cuts
        .windows(2)
        .map(|w| {
            let (value, err) = gk15(&mut f, w[0], w[1]);
            Panel {
                a: w[0],
                b: w[1],
                value,
                err,
            }
        })
        .collect();
    let mut splits = 0;
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if err <= rel_tol * total.abs() || err == 0.0 || splits >= max_subdivisions {
            return (total, err);
        }
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            if p.err > panels[worst].err {
                worst = i;
            }
        }
        let p = panels[worst];
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return (total, err);
        }
        let (v1, e1) = gk15(&mut f, p.a, mid);
        let (v2, e2) = gk15(&mut f, mid, p.b);
        panels[worst] = Panel {
            a: p.a,
            b: mid,
            value: v1,
            err: e1,
        };
        panels.insert(
            worst + 1,
            Panel {
                a: mid,
                b: p.b,
                value: v2,
                err: e2,
            },
        );
        splits += 1;
    }
}

fn legendre_rule(m: usize) -> (Vec<f64>, Vec<f64>) {
    use std::f64::consts::PI;
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

const GL_LEVELS: usize = 8;

/// Gauss–Legendre nodes and weights on `[-1, 1]` with `8·2^level` points.
pub fn gauss_legendre(level: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: [OnceLock<(Vec<f64>, Vec<f64>)>; GL_LEVELS] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let level = level.min(GL_LEVELS - 1);
    RULES[level].get_or_init(|| legendre_rule(8 << level))
}

/// Integral of `g` over the unit sphere `S^{n-1}` with a rule refined by
/// doubling until two levels agree to `rel_tol`.
pub fn sphere_integral(n: usize, mut g: impl FnMut(&[f64]) -> f64, rel_tol: f64) -> Result<f64> {
    use std::f64::consts::PI;
    match n {
        1 => Ok(g(&[1.0]) + g(&[-1.0])),
        2 => {
            // nested trapezoid: each level adds the odd points
            let mut count = 64usize;
            let mut sum = 0.0;
            for j in 0..count {
                let t = 2.0 * PI * j as f64 / count as f64;
                sum += g(&[t.cos(), t.sin()]);
            }
            let mut prev = sum * 2.0 * PI / count as f64;
            while count < 1 << 14 {
                let mut add = 0.0;
                for j in 0..count {
                    let t = 2.0 * PI * (2 * j + 1) as f64 / (2 * count) as f64;
                    add += g(&[t.cos(), t.sin()]);
                }
                sum += add;
                count *= 2;
                let cur = sum * 2.0 * PI / count as f64;
                if (cur - prev).abs() <= rel_tol * cur.abs() {
                    return Ok(cur);
                }
                prev = cur;
            }
            Ok(prev)
        }
        3 => {
            let rule = |level: usize, g: &mut dyn FnMut(&[f64]) -> f64| {
                let (z, w) = gauss_legendre(level);
                let nphi = 2 * z.len();
                let mut total = 0.0;
                for (zi, wi) in z.iter().zip(w) {
                    let s = (1.0 - zi * zi).max(0.0).sqrt();
                    let mut ring = 0.0;
                    for j in 0..nphi {
                        let t = 2.0 * PI * (j as f64 + 0.5) / nphi as f64;
                        ring += g(&[s * t.cos(), s * t.sin(), *zi]);
                    }
                    total += wi * ring * 2.0 * PI / nphi as f64;
                }
                total
            };
            let mut prev = rule(1, &mut g);
            for level in 2..5 {
                let cur = rule(level, &mut g);
                if (cur - prev).abs() <= rel_tol * cur.abs() {
                    return Ok(cur);
                }
                prev = cur;
            }
            Ok(prev)
        }
        _ => Err(HerzError::DimensionUnsupported(n)),
    }
}

/// `(r_lo, r_hi)` of `C_k ∩ supp ∩ Ω`, or `None` when empty.
fn radial_window(field: &dyn Field, k: i32, omega: &DomainSpec) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (pow2(k - 1), pow2(k));
    let (slo, shi) = field.support_radii();
    lo = lo.max(slo);
    hi = hi.min(shi);
    let (dlo, dhi) = omega.radius_range();
    lo = lo.max(dlo);
    hi = hi.min(dhi);
    (hi > lo).then_some((lo, hi))
}

fn pow_abs(v: f64, p: f64) -> f64 {
    let a = v.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

fn unit_point(n: usize, r: f64) -> Vec<f64> {
    let mut x = vec![0.0; n];
    x[0] = r;
    x
}

/// Same radial integral as the quadrature path, by the closed form in `u = ln(r/ρ)`.
fn oracle_mass_p(f: &RadialPowerLog, lo: f64, hi: f64, p: f64, opts: &QuadratureOptions) -> f64 {
    let n = f.n as f64;
    let s = f.a * p + n;
    let ulo = (lo / f.unit).ln();
    let uhi = (hi / f.unit).ln();
    let scale = sphere_area(f.n) * f.amplitude.abs().powf(p) * f.unit.powf(n);
    if f.b == 0.0 {
        if s == 0.0 {
            return scale * (uhi - ulo);
        }
        return scale * (s * ulo).exp() * (s * (uhi - ulo)).exp_m1() / s;
    }
    let bp = f.b * p;
    let (v, _) = integrate(
        |u| (s * u).exp() * u.abs().powf(bp),
        ulo,
        uhi,
        &[0.0],
        opts.rel_tol * 1e-2,
        opts.max_subdivisions.max(200),
    );
    scale * v
}

fn log_singularity_blocks(f: &RadialPowerLog, lo: f64, hi: f64, p: f64) -> bool {
    f.b * p <= -1.0 && f.unit >= lo && f.unit <= hi
}

/// `(∫_{C_k ∩ Ω} |f|^p)^{1/p}`, or the essential supremum for `p = inf`.
pub fn annulus_lp_norm(
    field: &dyn Field,
    k: i32,
    p: Exponent,
    omega: &DomainSpec,
    opts: &QuadratureOptions,
) -> Result<AnnulusMass> {
    let n = field.dim();
    if omega.dim() != n {
        return Err(HerzError::DimensionMismatch {
            expected: n,
            got: omega.dim(),
        });
    }
    let Some((lo, hi)) = radial_window(field, k, omega) else {
        return Ok(AnnulusMass {
            k,
            value: 0.0,
            err_est: 0.0,
        });
    };
    let radial_domain = omega.radial_interval().is_some();
    let radial = match opts.mode {
        QuadMode::TensorGrid => false,
        QuadMode::Radial1d | QuadMode::OracleExact => {
            if !(field.is_radial() && radial_domain) {
                return Err(HerzError::Precondition(
                    "radial quadrature needs a radial integrand and domain".into(),
                ));
            }
            true
        }
        QuadMode::Auto => field.is_radial() && radial_domain,
    };
    if !radial && n > 3 {
        return Err(HerzError::DimensionUnsupported(n));
    }
    let mut breaks = field.breakpoints();
    if let Some((a, b)) = omega.radial_interval() {
        breaks.push(a);
        breaks.push(b);
    }
    if let Some(f) = field.oracle() {
        if p.is_finite() && log_singularity_blocks(f, lo, hi, p.value()) {
            return Err(HerzError::NonIntegrable(format!(
                "|log|x||^{} is not p-integrable near |x| = {}",
                f.b, f.unit
            )));
        }
    }

    let mass = match p {
        Exponent::Infinite => {
            let v = if radial {
                radial_sup(field, lo, hi, &breaks, opts)
            } else {
                tensor_sup(field, lo, hi, &breaks, omega, opts)?
            };
            return Ok(AnnulusMass {
                k,
                value: v,
                err_est: v * opts.rel_tol,
            });
        }
        Exponent::Finite(pv) => {
            if opts.mode == QuadMode::OracleExact {
                if let Some(f) = field.oracle() {
                    let v = oracle_mass_p(f, lo, hi, pv, opts);
                    (v, v * opts.rel_tol * 1e-2)
                } else {
                    radial_mass_p(field, lo, hi, &breaks, pv, opts)
                }
            } else if radial {
                radial_mass_p(field, lo, hi, &breaks, pv, opts)
            } else {
                tensor_mass_p(field, lo, hi, &breaks, pv, omega, opts)?
            }
        }
    };
    let pv = p.value();
    let (mp, ep) = mass;
    if !mp.is_finite() {
        return Err(HerzError::NonIntegrable(format!("annulus {k} has infinite mass")));
    }
    if mp.is_nan() {
        return Err(HerzError::Quadrature(format!("NaN integrand on annulus {k}")));
    }
    let value = mp.max(0.0).powf(1.0 / pv);
    let err_est = if mp > 0.0 { value * (ep / mp) / pv } else { 0.0 };
    Ok(AnnulusMass { k, value, err_est })
}

fn radial_mass_p(
    field: &dyn Field,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    p: f64,
    opts: &QuadratureOptions,
) -> (f64, f64) {
    let n = field.dim();
    let mut x = vec![0.0; n];
    let (v, e) = integrate(
        |r| {
            x[0] = r;
            pow_abs(field.eval(&x), p) * r.powi(n as i32 - 1)
        },
        lo,
        hi,
        breaks,
        opts.rel_tol,
        opts.max_subdivisions,
    );
    let w = sphere_area(n);
    (w * v, w * e)
}

fn tensor_mass_p(
    field: &dyn Field,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    p: f64,
    omega: &DomainSpec,
    opts: &QuadratureOptions,
) -> Result<(f64, f64)> {
    let n = field.dim();
    let inner_tol = opts.rel_tol * 0.1;
    let mut x = vec![0.0; n];
    let mut failure = None;
    let full = matches!(omega, DomainSpec::FullSpace { .. });
    let (v, e) = integrate(
        |r| {
            let s = sphere_integral(
                n,
                |w| {
                    for i in 0..n {
                        x[i] = r * w[i];
                    }
                    if !full && !omega.contains(&x) {
                        return 0.0;
                    }
                    pow_abs(field.eval(&x), p)
                },
                inner_tol,
            );
            match s {
                Ok(s) => s * r.powi(n as i32 - 1),
                Err(err) => {
                    failure = Some(err);
                    0.0
                }
            }
        },
        lo,
        hi,
        breaks,
        opts.rel_tol,
        opts.max_subdivisions,
    );
    if let Some(err) = failure {
        return Err(err);
    }
    Ok((v, e))
}

/// Points, relative to `r`, just inside and outside each breakpoint.
const NUDGE: f64 = 1.0 / (1u64 << 48) as f64;

fn sup_mesh(lo: f64, hi: f64, breaks: &[f64], per_piece: usize) -> Vec<f64> {
    let mut cuts = vec![lo];
    cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut pts = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        pts.push(a);
        pts.push(a * (1.0 + NUDGE));
        pts.push(b * (1.0 - NUDGE));
        for i in 1..per_piece {
            pts.push(a + (b - a) * i as f64 / per_piece as f64);
        }
    }
    pts.push(hi);
    pts
}

fn radial_sup(field: &dyn Field, lo: f64, hi: f64, breaks: &[f64], opts: &QuadratureOptions) -> f64 {
    let n = field.dim();
    let sup_at = |per: usize| {
        sup_mesh(lo, hi, breaks, per)
            .into_iter()
            .map(|r| field.eval(&unit_point(n, r)).abs())
            .fold(0.0, f64::max)
    };
    let mut per = 16;
    let mut prev = sup_at(per);
    while per < 1 << 14 {
        per *= 2;
        let cur = sup_at(per);
        if cur - prev <= opts.rel_tol * cur {
            return cur;
        }
        prev = cur;
    }
    prev
}

fn tensor_sup(
    field: &dyn Field,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    omega: &DomainSpec,
    opts: &QuadratureOptions,
) -> Result<f64> {
    use std::f64::consts::PI;
    let n = field.dim();
    let dirs = |level: usize| -> Vec<Vec<f64>> {
        match n {
            1 => vec![vec![1.0], vec![-1.0]],
            2 => {
                let m = 32 << level;
                (0..m)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / m as f64;
                        vec![t.cos(), t.sin()]
                    })
                    .collect()
            }
            _ => {
                let m = 8 << level;
                let mut v = Vec::new();
                for i in 0..=m {
                    let z = -1.0 + 2.0 * i as f64 / m as f64;
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    for j in 0..2 * m {
                        let t = PI * j as f64 / m as f64;
                        v.push(vec![s * t.cos(), s * t.sin(), z]);
                    }
                }
                v
            }
        }
    };
    let sup_at = |level: usize| {
        let mut best = 0.0f64;
        let mesh = sup_mesh(lo, hi, breaks, 8 << level);
        let mut x = vec![0.0; n];
        for d in dirs(level) {
            for &r in &mesh {
                for i in 0..n {
                    x[i] = r * d[i];
                }
                if omega.contains(&x) {
                    best = best.max(field.eval(&x).abs());
                }
            }
        }
        best
    };
    let mut prev = sup_at(0);
    for level in 1..5 {
        let cur = sup_at(level);
        if cur - prev <= opts.rel_tol * cur {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert_eq!(sphere_area(1), 2.0);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kronrod_is_exact_for_polynomials() {
        let (v, _) = integrate(|x| x.powi(20) - 3.0 * x.powi(7) + 1.0, -1.0, 2.0, &[], 1e-14, 0);
        let exact = (2f64.powi(21) + 1.0) / 21.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0 + 3.0;
        assert!((v - exact).abs() < 1e-10 * exact.abs());
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let (v, _) = integrate(|x| x.sqrt(), 0.0, 1.0, &[], 1e-10, 60);
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn legendre_rules_integrate() {
        for level in 0..4 {
            let (x, w) = gauss_legendre(level);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
            let m4: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(4)).sum();
            assert!((m4 - 0.4).abs() < 1e-13);
        }
    }

    #[test]
    fn sphere_rules() {
        let a2 = sphere_integral(2, |w| w[0] * w[0], 1e-12).unwrap();
        assert!((a2 - PI).abs() < 1e-12);
        let a3 = sphere_integral(3, |w| w[2] * w[2], 1e-12).unwrap();
        assert!((a3 - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!(sphere_integral(4, |_| 1.0, 1e-12).is_err());
    }

    #[test]
    fn plateau_in_one_dimension() {
        let f = FunctionSpec::unit_annulus_plateau(1);
        for p in [1.0, 2.0, 3.5] {
            let m = annulus_lp_norm(&f, 0, Exponent::new(p).unwrap(), &DomainSpec::full(1), &Default::default()).unwrap();
            assert!((m.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn power_annulus_closed_form() {
        let n = 3;
        let (a, p) = (-0.7, 2.5);
        let f = FunctionSpec::radial_power_log(n, a, 0.0, 0.0, f64::INFINITY);
        let s = a * p + n as f64;
        for k in [-3, 0, 4] {
            let m = annulus_lp_norm(&f, k, Exponent::new(p).unwrap(), &DomainSpec::full(n), &Default::default()).unwrap();
            let exact = (4.0 * PI * (2f64.powf(k as f64 * s) - 2f64.powf((k - 1) as f64 * s)) / s).powf(1.0 / p);
            assert!((m.value / exact - 1.0).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn critical_power_gives_log2() {
        let f = FunctionSpec::radial_power_log(2, -2.0, 0.0, 0.0, f64::INFINITY);
        for k in [-5, 0, 7] {
            let m = annulus_lp_norm(&f, k, Exponent::ONE, &DomainSpec::full(2), &Default::default()).unwrap();
            assert!((m.value / (2.0 * PI * 2f64.ln()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_of_monotone_profile() {
        let f = FunctionSpec::radial_power_log(2, -1.5, 0.0, 0.0, f64::INFINITY);
        let m = annulus_lp_norm(&f, 2, Exponent::INFINITY, &DomainSpec::full(2), &Default::default()).unwrap();
        assert!((m.value - 2f64.powf(-1.5)).abs() < 1e-9);
    }

    #[test]
    fn tensor_agrees_with_radial() {
        let f = FunctionSpec::bump(vec![0.0, 0.0], 1.5);
        let p = Exponent::new(2.0).unwrap();
        let r = annulus_lp_norm(&f, 0, p, &DomainSpec::full(2), &Default::default()).unwrap();
        let opts = QuadratureOptions {
            mode: QuadMode::TensorGrid,
            ..Default::default()
        };
        let t = annulus_lp_norm(&f, 0, p, &DomainSpec::full(2), &opts).unwrap();
        assert!((r.value / t.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn oracle_path_matches_quadrature() {
        let f = FunctionSpec::radial_power_log(2, 0.3, 1.0, 0.0, 8.0);
        let p = Exponent::new(1.5).unwrap();
        let q = annulus_lp_norm(&f, 1, p, &DomainSpec::full(2), &Default::default()).unwrap();
        let opts = QuadratureOptions {
            mode: QuadMode::OracleExact,
            ..Default::default()
        };
        let o = annulus_lp_norm(&f, 1, p, &DomainSpec::full(2), &opts).unwrap();
        assert!((q.value / o.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_integrable_log_is_reported() {
        let f = FunctionSpec::radial_power_log(1, 0.0, -1.0, 0.0, 4.0);
        let r = annulus_lp_norm(&f, 1, Exponent::ONE, &DomainSpec::full(1), &Default::default());
        assert!(matches!(r, Err(HerzError::NonIntegrable(_))));
    }
}
