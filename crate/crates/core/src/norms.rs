//! Herz, Herz–Sobolev, gradient-Herz and power-weighted Lebesgue norms,
//! assembled from annulus masses, and the discrete Hardy transform.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Direction, HerzError, Result};
use crate::funclib::{ceil_log2, floor_log2, pow2, DomainSpec, FunctionSpec, RadialPowerLog, SupportAnnuli};
use crate::params::{Exponent, HerzParams, SobolevParams};
use crate::quadrature::{self, annulus_lp_norm, Field, QuadratureOptions};
use crate::serde_ext;

/// How far the sum over `k ∈ Z` is carried.
///
/// Terms are first computed on `[k_lo, k_hi]` (clipped to the annuli that can
/// carry mass). On every side where mass may remain, blocks of 8 further
/// annuli are added until a block contributes less than `tail_tol` times the
/// running norm, at most `hard_cap` annuli per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationPolicy {
    pub k_lo: i32,
    pub k_hi: i32,
    pub tail_tol: f64,
    pub hard_cap: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            k_lo: -64,
            k_hi: 64,
            tail_tol: 1e-12,
            hard_cap: 256,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.k_lo > self.k_hi || !(self.tail_tol > 0.0) {
            return Err(HerzError::Precondition(
                "truncation needs k_lo <= k_hi and tail_tol > 0".into(),
            ));
        }
        Ok(())
    }
}

const BLOCK: i32 = 8;

/// One annulus: `mass = ‖f χ_k‖_p` and `term = 2^{kα}·mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub k: i32,
    #[serde(with = "serde_ext")]
    pub mass: f64,
    #[serde(with = "serde_ext")]
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    #[serde(with = "serde_ext")]
    pub value: f64,
    pub terms: Vec<WeightedTerm>,
    pub k_range_used: (i32, i32),
    #[serde(with = "serde_ext")]
    pub err_est: f64,
    pub converged: bool,
}

impl NormResult {
    fn empty() -> Self {
        NormResult {
            value: 0.0,
            terms: Vec::new(),
            k_range_used: (0, -1),
            err_est: 0.0,
            converged: true,
        }
    }
}

/// Compensated sum in the given order.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `‖x‖_{ℓ^q}`, including `0 < q < 1` and `q = inf`.
pub fn lq_norm(values: &[f64], q: Exponent) -> f64 {
    match q {
        Exponent::Infinite => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        Exponent::Finite(qv) => kahan_sum(values.iter().map(|v| v.abs().powf(qv))).powf(1.0 / qv),
    }
}

fn annuli_of_domain(omega: &DomainSpec) -> (Option<i32>, Option<i32>) {
    if let DomainSpec::AnnulusRange { k_min, k_max, .. } = omega {
        return (Some(*k_min), Some(*k_max));
    }
    let (lo, hi) = omega.radius_range();
    let k_min = (lo > 0.0).then(|| floor_log2(lo) + 1);
    let k_max = hi.is_finite().then(|| ceil_log2(hi));
    (k_min, k_max)
}

fn tighter(a: Option<i32>, b: Option<i32>, lower: bool) -> Option<i32> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if lower { x.max(y) } else { x.min(y) }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Herz aggregation of per-annulus masses produced by `mass(k) -> (mass, err)`.
pub fn assemble_herz(
    mass: &(dyn Fn(i32) -> Result<(f64, f64)> + Sync),
    support: SupportAnnuli,
    omega: &DomainSpec,
    alpha: f64,
    q: Exponent,
    trunc: &TruncationPolicy,
) -> Result<NormResult> {
    trunc.validate()?;
    let (dmin, dmax) = annuli_of_domain(omega);
    let kmin = tighter(support.k_min, dmin, true);
    let kmax = tighter(support.k_max, dmax, false);
    let cap = trunc.hard_cap as i32;
    let mut lo = kmin.unwrap_or(trunc.k_lo);
    let mut hi = kmax.unwrap_or(trunc.k_hi);
    let mut open_lo = kmin.is_none();
    let mut open_hi = kmax.is_none();
    if lo < trunc.k_lo - cap {
        lo = trunc.k_lo - cap;
        open_lo = true;
    }
    if hi > trunc.k_hi + cap {
        hi = trunc.k_hi + cap;
        open_hi = true;
    }
    if lo > hi {
        if kmin.is_some() && kmax.is_some() {
            return Ok(NormResult::empty());
        }
        if kmax.is_some() {
            // mass only below the window
            open_lo = true;
            lo = hi;
        } else {
            open_hi = true;
            hi = lo;
        }
    }

    let weight = |k: i32| (k as f64 * alpha).exp2();
    let mut rel_err = 0.0f64;
    let track = |rel_err: &mut f64, a: i32, b: i32| -> Result<Vec<WeightedTerm>> {
        let raw: Vec<Result<(f64, f64)>> = (a..=b).into_par_iter().map(mass).collect();
        let mut out = Vec::with_capacity(raw.len());
        for (k, r) in (a..=b).zip(raw) {
            let (m, e) = r?;
            if m > 0.0 {
                *rel_err = rel_err.max(e / m);
            }
            out.push(WeightedTerm {
                k,
                mass: m,
                term: weight(k) * m,
            });
        }
        Ok(out)
    };

    let mut terms = track(&mut rel_err, lo, hi)?;
    let aggregate = |terms: &[WeightedTerm]| -> f64 {
        let mut sorted: Vec<f64> = Vec::with_capacity(terms.len());
        let mut ts: Vec<&WeightedTerm> = terms.iter().collect();
        ts.sort_by_key(|t| t.k);
        sorted.extend(ts.iter().map(|t| t.term));
        lq_norm(&sorted, q)
    };
    let block_norm = |block: &[WeightedTerm]| -> f64 {
        let v: Vec<f64> = block.iter().map(|t| t.term).collect();
        lq_norm(&v, q)
    };

    let mut converged = true;
    let mut tail_bound = 0.0f64;
    for (open, dir) in [(open_lo, Direction::Inner), (open_hi, Direction::Outer)] {
        if !open {
            continue;
        }
        let mut added = 0i32;
        loop {
            if added >= cap {
                converged = false;
                break;
            }
            let (a, b) = match dir {
                Direction::Inner => (lo - BLOCK, lo - 1),
                Direction::Outer => (hi + 1, hi + BLOCK),
            };
            let block = track(&mut rel_err, a, b)?;
            added += BLOCK;
            match dir {
                Direction::Inner => lo = a,
                Direction::Outer => hi = b,
            }
            let bn = block_norm(&block);
            terms.extend_from_slice(&block);
            let running = aggregate(&terms);
            if bn <= trunc.tail_tol * running {
                tail_bound = tail_bound.max(bn);
                break;
            }
            if q.is_infinite() {
                // a supremum only needs the terms to settle
                let bmin = block.iter().map(|t| t.term).fold(f64::INFINITY, f64::min);
                if bn - bmin <= trunc.tail_tol * running {
                    tail_bound = tail_bound.max(bn - bmin);
                    break;
                }
            }
            // march order: away from the window
            let mut seq: Vec<f64> = block.iter().map(|t| t.term).collect();
            if dir == Direction::Inner {
                seq.reverse();
            }
            let growing = seq.iter().all(|&t| t > 0.0) && seq.windows(2).all(|w| w[1] >= w[0]);
            if growing {
                terms.sort_by_key(|t| t.k);
                let partial = NormResult {
                    value: aggregate(&terms),
                    terms,
                    k_range_used: (lo, hi),
                    err_est: f64::INFINITY,
                    converged: false,
                };
                return Err(HerzError::Divergence {
                    direction: dir,
                    partial: Box::new(partial),
                });
            }
        }
    }
    terms.sort_by_key(|t| t.k);
    let value = aggregate(&terms);
    let err_est = value * rel_err + tail_bound;
    Ok(NormResult {
        value,
        terms,
        k_range_used: (lo, hi),
        err_est,
        converged,
    })
}

fn check_dims(n: usize, f_dim: usize, omega: &DomainSpec) -> Result<()> {
    if f_dim != n {
        return Err(HerzError::DimensionMismatch {
            expected: n,
            got: f_dim,
        });
    }
    if omega.dim() != n {
        return Err(HerzError::DimensionMismatch {
            expected: n,
            got: omega.dim(),
        });
    }
    omega.validate()
}

/// Herz norm of an arbitrary field with the given support information.
pub fn herz_norm_field(
    field: &dyn Field,
    support: SupportAnnuli,
    hp: &HerzParams,
    omega: &DomainSpec,
    trunc: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<NormResult> {
    check_dims(hp.n, field.dim(), omega)?;
    opts.validate()?;
    let mass = |k: i32| -> Result<(f64, f64)> {
        let m = annulus_lp_norm(field, k, hp.p, omega, opts)?;
        Ok((m.value, m.err_est))
    };
    assemble_herz(&mass, support, omega, hp.alpha, hp.q, trunc)
}

/// `‖f χ_Ω‖` in `K̇^{α,q}_p(R^n)`.
pub fn herz_norm(
    f: &FunctionSpec,
    hp: &HerzParams,
    omega: &DomainSpec,
    trunc: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<NormResult> {
    f.validate()?;
    herz_norm_field(f, f.support_annuli(), hp, omega, trunc, opts)
}

/// `x -> f(x)·|x|^α`.
struct Weighted<'a> {
    f: &'a dyn Field,
    alpha: f64,
}

impl Field for Weighted<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.f.eval(x) * r2.powf(0.5 * self.alpha)
    }
    fn is_radial(&self) -> bool {
        self.f.is_radial()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.f.breakpoints()
    }
    fn support_radii(&self) -> (f64, f64) {
        self.f.support_radii()
    }
}

fn power_log_origin_integrable(f: &RadialPowerLog, alpha: f64, p: f64) -> bool {
    if f.r_lo > 0.0 {
        return true;
    }
    let s = (f.a + alpha) * p + f.n as f64;
    s > 0.0 || (s == 0.0 && f.b * p < -1.0)
}

/// `(∫_Ω |f(x)|^p |x|^{αp} dx)^{1/p}`.
pub fn weighted_lp_norm(
    f: &FunctionSpec,
    alpha: f64,
    p: Exponent,
    omega: &DomainSpec,
    trunc: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<f64> {
    f.validate()?;
    let pv = match p {
        Exponent::Finite(v) => v,
        Exponent::Infinite => {
            return Err(HerzError::Precondition("weighted_lp_norm needs finite p".into()))
        }
    };
    if let FunctionSpec::RadialPowerLog(g) = f {
        let origin_in = omega.contains_origin() || omega.radius_range().0 == 0.0;
        if origin_in && !power_log_origin_integrable(g, alpha, pv) {
            return Err(HerzError::NonIntegrable(format!(
                "(a + alpha)p + n = {} <= 0 at the origin",
                (g.a + alpha) * pv + g.n as f64
            )));
        }
    }
    weighted_field_norm(&Weighted { f, alpha }, f.support_annuli(), p, omega, trunc, opts)
}

/// `(∫_Ω |∇f(x)|^p |x|^{αp} dx)^{1/p}`.
pub fn weighted_gradient_lp_norm(
    f: &FunctionSpec,
    alpha: f64,
    p: Exponent,
    omega: &DomainSpec,
    trunc: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<f64> {
    f.validate()?;
    if p.is_infinite() {
        return Err(HerzError::Precondition("weighted_gradient_lp_norm needs finite p".into()));
    }
    if !f.gradient_available() && !matches!(f, FunctionSpec::SampledGrid(_)) {
        return Err(HerzError::UndefinedGradient("this function".into()));
    }
    let grad = GradientMagnitude(f);
    weighted_field_norm(&Weighted { f: &grad, alpha }, f.support_annuli(), p, omega, trunc, opts)
}

fn weighted_field_norm(
    field: &Weighted<'_>,
    support: SupportAnnuli,
    p: Exponent,
    omega: &DomainSpec,
    trunc: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<f64> {
    let hp = HerzParams::new(0.0, p, p, field.dim())?;
    match herz_norm_field(field, support, &hp, omega, trunc, opts) {
        Ok(r) => Ok(r.value),
        Err(HerzError::Divergence {
            direction: Direction::Inner,
            ..
        }) => Err(HerzError::NonIntegrable(
            "weighted integrand is not integrable at the origin".into(),
        )),
        Err(e) => Err(e),
    }
}

/// `|∇f|`, the Euclidean length of the gradient.
pub struct GradientMagnitude<'a>(pub &'a FunctionSpec);

impl Field for GradientMagnitude<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        match self.0.gradient(x) {
            Ok(g) => g.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Err(_) => f64::NAN,
        }
    }
    fn is_radial(&self) -> bool {
        self.0.is_radial()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.0.breakpoints()
    }
    fn support_radii(&self) -> (f64, f64) {
        self.0.support_radii()
    }
}

/// `D^β f`.
struct Derivative<'a> {
    f: &'a FunctionSpec,
    beta: Vec<u32>,
}

impl Field for Derivative<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.f.derivative(&self.beta, x).unwrap_or(f64::NAN)
    }
    fn is_radial(&self) -> bool {
        self.beta.iter().all(|&b| b == 0) && self.f.is_radial()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.f.breakpoints()
    }
    fn support_radii(&self) -> (f64, f64) {
        self.f.support_radii()
    }
}

/// `Σ_j ∫_{S^{n-1}} |ω_j|^p dω`.
fn component_sphere_constant(n: usize, p: f64) -> f64 {
    if n == 1 {
        return 2.0;
    }
    // ∫_S |ω_1|^p = |S^{n-2}| ∫_{-π/2}^{π/2} |sin t|^p cos^{n-2} t dt
    let (v, _) = quadrature::integrate(
        |t: f64| t.sin().abs().powf(p) * t.cos().powi(n as i32 - 2),
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
        &[0.0],
        1e-14,
        200,
    );
    n as f64 * quadrature::sphere_area(n - 1) * v
}

/// For radial `f`, a radial field whose `p`-mass on every annulus equals
/// `(Σ_j ‖∂_j f χ_k‖_p^p)^{1/p}`.
struct RadialComponentSum<'a> {
    f: &'a FunctionSpec,
    factor: f64,
}

impl Field for RadialComponentSum<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        GradientMagnitude(self.f).eval(x) * self.factor
    }
    fn is_radial(&self) -> bool {
        true
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.f.breakpoints()
    }
    fn support_radii(&self) -> (f64, f64) {
        self.f.support_radii()
    }
}

/// Multi-indices `β ∈ N^n` with `|β| = order`, in lexicographic order.
pub fn multi_indices(n: usize, order: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for b in (0..=left).rev() {
            cur.push(b);
            rec(n, left - b, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, order, &mut Vec::new(), &mut out);
    out
}

/// Which derivative orders enter the per-annulus sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SobolevMode {
    /// All `|β| <= m`, as in the definition.
    #[default]
    Full,
    /// Only `|β| = m`: the dilation-homogeneous top-order part.
    TopOrder,
}

/// Herz–Sobolev norm: per annulus `(Σ_β ‖D^β f χ_k χ_Ω‖_p^p)^{1/p}`, then the Herz sum.
pub fn herz_sobolev_norm(
    f: &FunctionSpec,
    sp: &SobolevParams,
    omega: &DomainSpec,
    mode: SobolevMode,
    trunc: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<NormResult> {
    f.validate()?;
    let hp = sp.herz;
    check_dims(hp.n, f.dim(), omega)?;
    let n = hp.n;
    let orders: Vec<u32> = match mode {
        SobolevMode::Full => (0..=sp.m).collect(),
        SobolevMode::TopOrder => vec![sp.m],
    };
    // Each order contributes one or more fields; all are combined in ℓ^p.
    let mut fields: Vec<Box<dyn Field + '_>> = Vec::new();
    for &order in &orders {
        if order == 1 && f.is_radial() && hp.p.is_finite() {
            if !f.gradient_available() {
                let mut beta = vec![0; n];
                beta[0] = 1;
                return Err(HerzError::MissingDerivative(beta));
            }
            let p = hp.p.value();
            let factor = (component_sphere_constant(n, p) / quadrature::sphere_area(n)).powf(1.0 / p);
            fields.push(Box::new(RadialComponentSum { f, factor }));
            continue;
        }
        for beta in multi_indices(n, order) {
            if !f.has_derivative(&beta) {
                return Err(HerzError::MissingDerivative(beta));
            }
            fields.push(Box::new(Derivative { f, beta }));
        }
    }
    let p = hp.p;
    let mass = |k: i32| -> Result<(f64, f64)> {
        let mut parts = Vec::with_capacity(fields.len());
        let mut err = 0.0f64;
        for fld in &fields {
            let m = annulus_lp_norm(fld.as_ref(), k, p, omega, opts)?;
            if m.value > 0.0 {
                err = err.max(m.err_est / m.value);
            }
            parts.push(m.value);
        }
        let v = lq_norm(&parts, p);
        Ok((v, v * err))
    };
    assemble_herz(&mass, f.support_annuli(), omega, hp.alpha, hp.q, trunc)
}

/// `‖∇f‖` in `K̇^{α₂,r}_p`: the Herz norm of `|∇f|`.
pub fn gradient_herz_norm(
    f: &FunctionSpec,
    alpha2: f64,
    p: Exponent,
    r: Exponent,
    omega: &DomainSpec,
    trunc: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<NormResult> {
    f.validate()?;
    if !f.gradient_available() && !matches!(f, FunctionSpec::SampledGrid(_)) {
        return Err(HerzError::UndefinedGradient("this function".into()));
    }
    let hp = HerzParams::new(alpha2, p, r, f.dim())?;
    herz_norm_field(&GradientMagnitude(f), f.support_annuli(), &hp, omega, trunc, opts)
}

/// `δ_k = Σ_{j >= k} a^{j-k} ε_j` by the backward recursion `δ_k = ε_k + a·δ_{k+1}`.
pub fn hardy_transform(eps: &[f64], a: f64) -> Result<Vec<f64>> {
    if !(a > 0.0 && a < 1.0) {
        return Err(HerzError::OutOfRange(format!("a must lie in (0, 1), got {a}")));
    }
    if let Some(e) = eps.iter().find(|e| !(**e >= 0.0)) {
        return Err(HerzError::OutOfRange(format!("sequence entries must be >= 0, got {e}")));
    }
    let mut out = vec![0.0; eps.len()];
    let mut next = 0.0;
    for k in (0..eps.len()).rev() {
        next = eps[k] + a * next;
        out[k] = next;
    }
    Ok(out)
}

/// `c(a, q)`: `(1-a)^{-1}` for `q >= 1`, `(1-a^q)^{-1/q}` for `0 < q < 1`.
pub fn hardy_constant(a: f64, q: Exponent) -> f64 {
    match q {
        Exponent::Finite(qv) if qv < 1.0 => (1.0 - a.powf(qv)).powf(-1.0 / qv),
        _ => 1.0 / (1.0 - a),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyCheck {
    #[serde(with = "serde_ext")]
    pub lhs: f64,
    #[serde(with = "serde_ext")]
    pub rhs_bound: f64,
    pub constant: f64,
    pub ok: bool,
}

/// Compares `‖δ‖_{ℓ^q}` with `c(a,q)·‖ε‖_{ℓ^q}`.
pub fn hardy_bound_check(eps: &[f64], a: f64, q: Exponent) -> Result<HardyCheck> {
    let delta = hardy_transform(eps, a)?;
    let c = hardy_constant(a, q);
    let lhs = lq_norm(&delta, q);
    let rhs_bound = c * lq_norm(eps, q);
    Ok(HardyCheck {
        lhs,
        rhs_bound,
        constant: c,
        ok: lhs <= rhs_bound + 1e-12,
    })
}

/// Geometric-series value of `Σ_{k <= k_top} (c·2^{ks})^q` to the power `1/q`.
pub fn geometric_herz_tail(c: f64, s: f64, k_top: i32, q: Exponent) -> f64 {
    match q {
        Exponent::Infinite => c * pow2(k_top).powf(s),
        Exponent::Finite(qv) => {
            let first = (c * (k_top as f64 * s).exp2()).powf(qv);
            (first / (1.0 - (-s * qv).exp2())).powf(1.0 / qv)
        }
    }
}
