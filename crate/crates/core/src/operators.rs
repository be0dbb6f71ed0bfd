//! Mollification, the Hardy–Littlewood and fractional maximal functions,
//! the Riesz potential and the dyadic averaging projection.
//!
//! Each operator is evaluated pointwise by quadrature. The `*Field` wrappers
//! expose an operator output to the norm assembly without sampling it on
//! a grid first.

use serde::{Deserialize, Serialize};

use crate::error::{HerzError, Result};
use crate::funclib::{ceil_log2, floor_log2, pow2, DecayHint, DomainSpec, FunctionSpec, GridLayout, SampledGrid, SupportAnnuli};
use crate::norms::{herz_norm_field, NormResult, TruncationPolicy};
use crate::params::HerzParams;
use crate::quadrature::{gauss_legendre, integrate, sphere_area, sphere_integral, Field, QuadratureOptions};

/// `J(x) = c_n · exp(1 - 1/(1 - |x|²))` on the open unit ball, `∫ J = 1`;
/// `J_ε(x) = ε^{-n} J(x/ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierKernel {
    pub n: usize,
    pub epsilon: f64,
    /// `c_n`, the peak value of `J`.
    pub normalization: f64,
}

fn bump_profile(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

impl MollifierKernel {
    pub fn new(n: usize, epsilon: f64) -> Result<Self> {
        if n == 0 {
            return Err(HerzError::Precondition("dimension n must be >= 1".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(HerzError::Precondition(format!("epsilon must be > 0, got {epsilon}")));
        }
        let (radial, _) = integrate(
            |t| bump_profile(t) * t.powi(n as i32 - 1),
            0.0,
            1.0,
            &[0.5, 0.9],
            1e-15,
            400,
        );
        Ok(MollifierKernel {
            n,
            epsilon,
            normalization: 1.0 / (sphere_area(n) * radial),
        })
    }

    /// `J(x)` (unscaled).
    pub fn profile(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.normalization * bump_profile(r)
    }

    /// `J_ε(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v / self.epsilon).collect();
        self.profile(&y) / self.epsilon.powi(self.n as i32)
    }

    /// `∫ J` by the same radial rule used for convolution.
    pub fn mass(&self) -> f64 {
        let (radial, _) = integrate(
            |t| bump_profile(t) * t.powi(self.n as i32 - 1),
            0.0,
            1.0,
            &[0.5, 0.9],
            1e-15,
            400,
        );
        self.normalization * sphere_area(self.n) * radial
    }
}

fn masked(f: &FunctionSpec, omega: &DomainSpec, y: &[f64]) -> f64 {
    if omega.contains(y) {
        f.value(y)
    } else {
        0.0
    }
}

/// `(J_ε * (f χ_Ω))(x) - (f χ_Ω)(x)`, written as
/// `∫_0^1 J(t) t^{n-1} ∫_S [g(x - εtω) - g(x)] dω dt` so that constants are
/// reproduced exactly and the second-order smallness is not lost to cancellation.
fn mollify_difference(
    f: &FunctionSpec,
    kernel: &MollifierKernel,
    x: &[f64],
    omega: &DomainSpec,
    opts: &QuadratureOptions,
) -> Result<f64> {
    let n = kernel.n;
    if f.dim() != n || x.len() != n {
        return Err(HerzError::DimensionMismatch {
            expected: n,
            got: if f.dim() != n { f.dim() } else { x.len() },
        });
    }
    if n > 3 {
        return Err(HerzError::DimensionUnsupported(n));
    }
    let g0 = masked(f, omega, x);
    let eps = kernel.epsilon;
    let mut y = vec![0.0; n];
    let mut failure = None;
    // non-smooth radii of t -> g(x - εtω), relative to the unit ball
    let mut breaks: Vec<f64> = vec![0.5, 0.9];
    let r0 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for b in f.breakpoints() {
        let d = (b - r0).abs() / eps;
        if d > 0.0 && d < 1.0 {
            breaks.push(d);
        }
    }
    let (v, _) = integrate(
        |t| {
            if t == 0.0 {
                return 0.0;
            }
            let s = sphere_integral(
                n,
                |w| {
                    for i in 0..n {
                        y[i] = x[i] - eps * t * w[i];
                    }
                    masked(f, omega, &y) - g0
                },
                opts.rel_tol,
            );
            match s {
                Ok(s) => s * bump_profile(t) * t.powi(n as i32 - 1),
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        &breaks,
        opts.rel_tol,
        opts.max_subdivisions,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(kernel.normalization * v)
}

/// `(J_ε * f)(x)`.
pub fn mollify(f: &FunctionSpec, eps: f64, x: &[f64], opts: &QuadratureOptions) -> Result<f64> {
    let kernel = MollifierKernel::new(f.dim(), eps)?;
    let omega = DomainSpec::full(f.dim());
    Ok(f.evaluate(x)? + mollify_difference(f, &kernel, x, &omega, opts)?)
}

/// `J_ε * (f χ_Ω) - f χ_Ω` as an integrable field.
pub struct MollifiedDifference<'a> {
    pub f: &'a FunctionSpec,
    pub kernel: MollifierKernel,
    pub omega: DomainSpec,
    pub opts: QuadratureOptions,
}

impl Field for MollifiedDifference<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        mollify_difference(self.f, &self.kernel, x, &self.omega, &self.opts).unwrap_or(f64::NAN)
    }
    fn is_radial(&self) -> bool {
        self.f.is_radial() && self.omega.radial_interval().is_some()
    }
    fn breakpoints(&self) -> Vec<f64> {
        let e = self.kernel.epsilon;
        let mut v = Vec::new();
        for b in self.f.breakpoints() {
            v.extend([b - e, b, b + e]);
        }
        v.retain(|r| *r > 0.0);
        v
    }
    fn support_radii(&self) -> (f64, f64) {
        let (lo, hi) = self.f.support_radii();
        ((lo - self.kernel.epsilon).max(0.0), hi + self.kernel.epsilon)
    }
}

fn widened_support(f: &FunctionSpec, pad: f64) -> SupportAnnuli {
    let s = f.support_annuli();
    let (lo, hi) = f.support_radii();
    let lo = lo - pad;
    let hi = hi + pad;
    SupportAnnuli {
        k_min: s.k_min.and_then(|_| (lo > 0.0).then(|| floor_log2(lo) + 1)),
        k_max: s.k_max.and_then(|_| hi.is_finite().then(|| ceil_log2(hi))),
        decay: s.decay,
    }
}

/// `‖(J_ε * f - f) χ_Ω‖` in `K̇^{α,q}_p`, evaluated at the quadrature nodes of
/// the norm assembly. Grid data must resolve the kernel: `ε >= 4·spacing`.
pub fn mollify_error_norm(
    f: &FunctionSpec,
    eps: f64,
    hp: &HerzParams,
    omega: &DomainSpec,
    trunc: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<NormResult> {
    f.validate()?;
    if let FunctionSpec::SampledGrid(g) = f {
        if eps < 4.0 * g.spacing {
            return Err(HerzError::Resolution(format!(
                "epsilon {eps} is below 4 x grid spacing {}",
                g.spacing
            )));
        }
    }
    let field = MollifiedDifference {
        f,
        kernel: MollifierKernel::new(f.dim(), eps)?,
        omega: omega.clone(),
        opts: *opts,
    };
    herz_norm_field(&field, widened_support(f, eps), hp, omega, trunc, opts)
}

/// Nodes and weights of a composite Gauss–Legendre rule on `[a, b]` with
/// `panels` equal panels of 8 points.
fn composite_rule(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(0);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * x.len());
    let mut weights = Vec::with_capacity(panels * x.len());
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            nodes.push(c + 0.5 * h * xi);
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

/// `∫_{[lo, hi]} g` by a tensor composite rule with panels no wider than `feature / 2`.
fn box_integral(g: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], feature: f64) -> f64 {
    let n = lo.len();
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|i| {
            let len = hi[i] - lo[i];
            let panels = ((2.0 * len / feature).ceil() as usize).clamp(1, 8);
            composite_rule(lo[i], hi[i], panels)
        })
        .collect();
    let mut x = vec![0.0; n];
    let mut total = 0.0;
    let counts: Vec<usize> = rules.iter().map(|r| r.0.len()).collect();
    let size: usize = counts.iter().product();
    for flat in 0..size {
        let mut rem = flat;
        let mut w = 1.0;
        for a in (0..n).rev() {
            let i = rem % counts[a];
            rem /= counts[a];
            x[a] = rules[a].0[i];
            w *= rules[a].1[i];
        }
        total += w * g(&x);
    }
    total
}

/// Upper comparison constant of the cube family: `M f(x) <= 4^n · maximal(f, x)`.
pub fn maximal_family_constant(n: usize) -> f64 {
    4f64.powi(n as i32)
}

/// Sup of the averages of `g` over the cube family at `x`.
fn cube_family_sup(f: &FunctionSpec, g: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Result<f64> {
    let n = f.dim();
    if x.len() != n {
        return Err(HerzError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if n > 3 {
        return Err(HerzError::DimensionUnsupported(n));
    }
    let (blo, bhi) = f.effective_box();
    if !blo.iter().chain(&bhi).all(|v| v.is_finite()) {
        return Err(HerzError::UnsupportedVariant(
            "maximal function needs an effectively bounded support".into(),
        ));
    }
    let feature = f.feature_scale();
    let reach = (0..n)
        .map(|i| (x[i] - blo[i]).abs().max((x[i] - bhi[i]).abs()))
        .fold(0.0, f64::max);
    let j_lo = floor_log2(feature) - 3;
    let j_hi = (ceil_log2(2.0 * reach.max(feature)) + 1).min(j_lo + 200);
    let offsets = [0.0, 0.5, 1.0];
    let mut best = g(x);
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for j in j_lo..=j_hi {
        let side = pow2(j);
        let volume = side.powi(n as i32);
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let mut empty = false;
            for i in 0..n {
                let o = offsets[c % 3];
                c /= 3;
                let a = x[i] - o * side;
                let b = a + side;
                lo[i] = a.max(blo[i]);
                hi[i] = b.min(bhi[i]);
                if !(hi[i] > lo[i]) {
                    empty = true;
                }
            }
            if empty {
                continue;
            }
            let avg = box_integral(g, &lo, &hi, feature) / volume;
            best = best.max(avg);
        }
    }
    Ok(best)
}

/// Approximate `M f(x) = sup_{Q ∋ x} |Q|^{-1} ∫_Q |f|`.
///
/// The supremum runs over cubes of side `2^j` containing `x` at the offsets
/// `{0, 1/2, 1}^n` relative to `x`, for `j` from `floor(log2 s) - 3` (`s` the
/// smallest feature length of `f`) up to the first side that covers the
/// support, together with the point value `|f(x)|`. The family maximum is a
/// lower bound for `M f(x)` and at least `4^{-n} M f(x)`.
pub fn maximal(f: &FunctionSpec, x: &[f64], _opts: &QuadratureOptions) -> Result<f64> {
    cube_family_sup(f, &|y: &[f64]| f.value(y).abs(), x)
}

/// `M_t f(x) = (M(|f|^t)(x))^{1/t}`.
pub fn frac_maximal(f: &FunctionSpec, t: f64, x: &[f64], opts: &QuadratureOptions) -> Result<f64> {
    if !(t > 0.0) {
        return Err(HerzError::Precondition(format!("t must be > 0, got {t}")));
    }
    if t == 1.0 {
        return maximal(f, x, opts);
    }
    Ok(cube_family_sup(f, &|y: &[f64]| f.value(y).abs().powf(t), x)?.powf(1.0 / t))
}

/// `x -> M_t f(x)` as an integrable field (`t = 1` gives `M f`).
pub struct MaximalField<'a> {
    pub f: &'a FunctionSpec,
    pub t: f64,
    pub opts: QuadratureOptions,
}

impl Field for MaximalField<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        frac_maximal(self.f, self.t, x, &self.opts).unwrap_or(f64::NAN)
    }
    fn is_radial(&self) -> bool {
        // cubes are only invariant under the reflections of the line
        self.f.dim() == 1 && self.f.is_radial()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.f.breakpoints()
    }
    fn support_radii(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

impl MaximalField<'_> {
    pub fn support(&self) -> SupportAnnuli {
        SupportAnnuli {
            k_min: None,
            k_max: None,
            decay: DecayHint::Power(-(self.f.dim() as f64) / self.t),
        }
    }
}

fn ray_box(x: &[f64], w: &[f64], lo: &[f64], hi: &[f64]) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for i in 0..x.len() {
        if w[i] == 0.0 {
            if x[i] < lo[i] || x[i] > hi[i] {
                return None;
            }
            continue;
        }
        let a = (lo[i] - x[i]) / w[i];
        let b = (hi[i] - x[i]) / w[i];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t1 > t0).then_some((t0, t1))
}

/// `I_λ f(x) = ∫ f(y) |x - y|^{λ - n} dy`.
///
/// Integrated in polar coordinates about `x`: along each ray the substitution
/// `t = ρ^λ` turns `ρ^{λ-1} dρ` into `dt/λ`, which removes the kernel
/// singularity, and the ray is split where it crosses the non-smooth loci of `f`.
pub fn riesz(f: &FunctionSpec, lambda: f64, x: &[f64], opts: &QuadratureOptions) -> Result<f64> {
    let n = f.dim();
    if x.len() != n {
        return Err(HerzError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if !(lambda > 0.0 && lambda < n as f64) {
        return Err(HerzError::Precondition(format!(
            "lambda must lie in (0, n) = (0, {n}), got {lambda}"
        )));
    }
    if let DecayHint::Power(a) = f.support_annuli().decay {
        if f.support_radii().1.is_infinite() && a + lambda >= 0.0 {
            return Err(HerzError::DivergentTail(format!(
                "|x|^{a} decay is too slow for the kernel |x|^({lambda} - n)"
            )));
        }
    }
    if !f.effective_box().0.iter().all(|v| v.is_finite()) {
        return Err(HerzError::DivergentTail("function has unbounded support".into()));
    }
    if n > 3 {
        return Err(HerzError::DimensionUnsupported(n));
    }
    let (blo, bhi) = f.effective_box();
    let gap = (0..n)
        .map(|i| (blo[i] - x[i]).max(x[i] - bhi[i]))
        .fold(f64::NEG_INFINITY, f64::max);
    let width = (0..n).map(|i| bhi[i] - blo[i]).fold(0.0, f64::max);
    if gap > width {
        // far from the support the kernel is smooth on it; a polar ray would
        // carry the large distance in every node and lose the support's digits
        let radii = f.breakpoints();
        let mut y = vec![0.0; n];
        let mut g = |y: &[f64]| {
            let d2: f64 = (0..n).map(|i| (x[i] - y[i]) * (x[i] - y[i])).sum();
            f.value(y) * d2.powf(0.5 * (lambda - n as f64))
        };
        return Ok(iterated_integral(&mut g, &blo, &bhi, 0, &mut y, &radii, opts));
    }
    let inv = 1.0 / lambda;
    let mut y = vec![0.0; n];
    let ray = |w: &[f64], y: &mut Vec<f64>| -> f64 {
        let Some((r0, r1)) = ray_box(x, w, &blo, &bhi) else {
            return 0.0;
        };
        let raw: Vec<f64> = f.ray_breaks(x, w).into_iter().filter(|r| *r > r0 && *r < r1).collect();
        if r0 > r1 - r0 {
            // away from the kernel singularity, where ρ^λ would lose the digits of the ray
            let (v, _) = integrate(
                |rho| {
                    for i in 0..n {
                        y[i] = x[i] + rho * w[i];
                    }
                    f.value(y) * rho.powf(lambda - 1.0)
                },
                r0,
                r1,
                &raw,
                opts.rel_tol,
                opts.max_subdivisions,
            );
            return v;
        }
        let breaks: Vec<f64> = raw.iter().map(|r| r.powf(lambda)).collect();
        let (v, _) = integrate(
            |t| {
                let rho = t.powf(inv);
                for i in 0..n {
                    y[i] = x[i] + rho * w[i];
                }
                f.value(y)
            },
            r0.powf(lambda),
            r1.powf(lambda),
            &breaks,
            opts.rel_tol,
            opts.max_subdivisions,
        );
        v / lambda
    };
    sphere_integral(n, |w| ray(w, &mut y), opts.rel_tol)
}

/// `∫_{[lo, hi]} g` by nested adaptive rules, splitting each line where it
/// crosses the spheres `|y| = b`.
fn iterated_integral(
    g: &mut dyn FnMut(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    axis: usize,
    y: &mut Vec<f64>,
    radii: &[f64],
    opts: &QuadratureOptions,
) -> f64 {
    let n = lo.len();
    let outer: f64 = y[..axis].iter().map(|v| v * v).sum();
    let mut breaks = Vec::new();
    for &b in radii {
        if b * b > outer {
            let s = (b * b - outer).sqrt();
            breaks.extend([-s, s]);
        }
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    integrate(
        |t| {
            y[axis] = t;
            if axis + 1 == n {
                g(y)
            } else {
                iterated_integral(g, lo, hi, axis + 1, y, radii, opts)
            }
        },
        lo[axis],
        hi[axis],
        &breaks,
        opts.rel_tol,
        opts.max_subdivisions,
    )
    .0
}

/// `x -> I_λ f(x)` as an integrable field.
pub struct RieszField<'a> {
    pub f: &'a FunctionSpec,
    pub lambda: f64,
    pub opts: QuadratureOptions,
}

impl Field for RieszField<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        riesz(self.f, self.lambda, x, &self.opts).unwrap_or(f64::NAN)
    }
    fn is_radial(&self) -> bool {
        self.f.is_radial()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.f.breakpoints()
    }
    fn support_radii(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

impl RieszField<'_> {
    pub fn support(&self) -> SupportAnnuli {
        SupportAnnuli {
            k_min: None,
            k_max: None,
            decay: DecayHint::Power(self.lambda - self.f.dim() as f64),
        }
    }
}

/// `2^{-j}`-aligned integer coordinates of `v`, or `None`.
fn dyadic_units(v: f64, j: i32) -> Option<i64> {
    let s = v * pow2(j);
    (s.fract() == 0.0 && s.abs() < 9e15).then_some(s as i64)
}

/// Average of `f` over each dyadic cube `Q_{j,m} = Π [2^{-j} m_i, 2^{-j}(m_i + 1))`
/// inside the cube `region`, returned as a cell grid (zero outside `region`).
///
/// The average is `|Q|^{-1} ∫_Q f = 2^{jn} ∫_Q f`. Cell grids whose cells
/// refine the dyadic cubes are averaged exactly from their cell values.
pub fn dyadic_project(f: &FunctionSpec, j: i32, region: &DomainSpec) -> Result<SampledGrid> {
    let DomainSpec::Cube { corner, side } = region else {
        return Err(HerzError::NotDyadicAligned("the region must be a Cube".into()));
    };
    let n = corner.len();
    if f.dim() != n {
        return Err(HerzError::DimensionMismatch {
            expected: n,
            got: f.dim(),
        });
    }
    if !(1..=3).contains(&n) {
        return Err(HerzError::DimensionUnsupported(n));
    }
    let cells = dyadic_units(*side, j)
        .filter(|c| *c >= 1 && *c <= 4096)
        .ok_or_else(|| HerzError::NotDyadicAligned(format!("side {side} is not a multiple of 2^{}", -j)))?
        as usize;
    for &c in corner {
        dyadic_units(c, j).ok_or_else(|| {
            HerzError::NotDyadicAligned(format!("corner coordinate {c} is not on the 2^{} lattice", -j))
        })?;
    }
    let h = pow2(-j);
    let total = cells.pow(n as u32);
    let mut values = Vec::with_capacity(total);
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    let fine = match f {
        FunctionSpec::SampledGrid(g) if g.layout == GridLayout::Cell => {
            let jf = -floor_log2(g.spacing);
            let aligned = g.spacing == pow2(-jf)
                && jf >= j
                && g.origin.iter().all(|&o| dyadic_units(o, jf).is_some());
            aligned.then_some((g, jf))
        }
        _ => None,
    };
    for flat in 0..total {
        let mut rem = flat;
        for a in (0..n).rev() {
            let i = rem % cells;
            rem /= cells;
            lo[a] = corner[a] + i as f64 * h;
            hi[a] = lo[a] + h;
        }
        let avg = match fine {
            Some((g, jf)) => {
                let sub = 1usize << (jf - j);
                let count = sub.pow(n as u32);
                let sf = g.spacing;
                let mut acc = 0.0;
                let mut y = vec![0.0; n];
                for s in 0..count {
                    let mut r = s;
                    for a in (0..n).rev() {
                        let i = r % sub;
                        r /= sub;
                        y[a] = lo[a] + (i as f64 + 0.5) * sf;
                    }
                    acc += g.value(&y);
                }
                acc / count as f64
            }
            None => {
                let g = |y: &[f64]| f.value(y);
                box_integral(&g, &lo, &hi, h / 2.0) / h.powi(n as i32)
            }
        };
        values.push(avg);
    }
    SampledGrid::new(corner.clone(), h, vec![cells; n], values, GridLayout::Cell)
}

/// An operator applied pointwise, for sampling on grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorKind {
    Mollify { epsilon: f64 },
    Maximal,
    FracMaximal { t: f64 },
    Riesz { lambda: f64 },
}

impl OperatorKind {
    pub fn apply(&self, f: &FunctionSpec, x: &[f64], opts: &QuadratureOptions) -> Result<f64> {
        match self {
            OperatorKind::Mollify { epsilon } => mollify(f, *epsilon, x, opts),
            OperatorKind::Maximal => maximal(f, x, opts),
            OperatorKind::FracMaximal { t } => frac_maximal(f, *t, x, opts),
            OperatorKind::Riesz { lambda } => riesz(f, *lambda, x, opts),
        }
    }
}

/// Samples `op f` on the nodes of a box.
pub fn sample_operator(
    op: &OperatorKind,
    f: &FunctionSpec,
    origin: Vec<f64>,
    spacing: f64,
    shape: Vec<usize>,
    opts: &QuadratureOptions,
) -> Result<SampledGrid> {
    use rayon::prelude::*;
    let n = origin.len();
    if f.dim() != n || shape.len() != n {
        return Err(HerzError::DimensionMismatch {
            expected: f.dim(),
            got: n,
        });
    }
    let total: usize = shape.iter().product();
    let values: Vec<Result<f64>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut x = vec![0.0; n];
            for a in (0..n).rev() {
                let i = rem % shape[a];
                rem /= shape[a];
                x[a] = origin[a] + i as f64 * spacing;
            }
            op.apply(f, &x, opts)
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    SampledGrid::new(origin, spacing, shape, values, GridLayout::Nodal)
}
