//! Experiments that measure both sides of the embedding inequalities over
//! families of test functions, their dilation behaviour, and the two
//! boundary counterexamples of the local integrability lemma.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HerzError, Result};
use crate::funclib::{pow2, DomainSpec, FunctionSpec, RadialPowerLog};
use crate::norms::{
    gradient_herz_norm, herz_norm, herz_norm_field, herz_sobolev_norm, weighted_gradient_lp_norm, weighted_lp_norm,
    NormResult, SobolevMode, TruncationPolicy,
};
use crate::operators::{MaximalField, RieszField};
use crate::params::{
    check_hypotheses, sobolev_exponent, Exponent, HerzParams, HypothesisReport, ParamBundle, SobolevParams, TheoremId,
    EQ_TOL,
};
use crate::quadrature::{annulus_lp_norm, sphere_area, QuadratureOptions};
use crate::serde_ext;

/// Relative ratio spread allowed across dilation levels of a balanced experiment.
pub const DILATION_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingExperiment {
    pub thm: TheoremId,
    pub params: ParamBundle,
    pub family: Vec<FunctionSpec>,
    #[serde(default = "default_levels")]
    pub dilation_levels: Vec<i32>,
    pub domain: DomainSpec,
    #[serde(default)]
    pub sobolev_mode: SobolevMode,
    /// Evaluate even when a hypothesis fails; the report is watermarked.
    #[serde(default)]
    pub override_hypotheses: bool,
}

fn default_levels() -> Vec<i32> {
    vec![0]
}

impl EmbeddingExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.family.is_empty() {
            return Err(HerzError::Precondition("family must not be empty".into()));
        }
        if self.dilation_levels.is_empty() {
            return Err(HerzError::Precondition("dilation_levels must not be empty".into()));
        }
        let n = self.params.n()?;
        for f in &self.family {
            if f.dim() != n {
                return Err(HerzError::DimensionMismatch {
                    expected: n,
                    got: f.dim(),
                });
            }
            f.validate()?;
        }
        if self.domain.dim() != n {
            return Err(HerzError::DimensionMismatch {
                expected: n,
                got: self.domain.dim(),
            });
        }
        self.domain.validate()
    }
}

/// One member of the family at one dilation level `f(2^m ·)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub index: usize,
    pub m: i32,
    #[serde(with = "serde_ext")]
    pub lhs: f64,
    #[serde(with = "serde_ext")]
    pub rhs: f64,
    #[serde(with = "serde_ext")]
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberError {
    pub index: usize,
    pub m: i32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub theorem: TheoremId,
    pub per_function: Vec<RatioRow>,
    pub errors: Vec<MemberError>,
    #[serde(with = "serde_ext")]
    pub empirical_constant: f64,
    #[serde(with = "serde_ext")]
    pub scaling_exponent_lhs: f64,
    #[serde(with = "serde_ext")]
    pub scaling_exponent_rhs: f64,
    pub scaling_balanced: bool,
    /// Largest `|ratio(m) / ratio(m_0) - 1|` over members.
    #[serde(with = "serde_ext")]
    pub max_dilation_drift: f64,
    #[serde(with = "serde_ext")]
    pub dilation_tol: f64,
    pub dilation_invariant: Option<bool>,
    pub sobolev_mode: SobolevMode,
    pub hypothesis: HypothesisReport,
    #[serde(rename = "override", default, skip_serializing_if = "Option::is_none")]
    pub override_watermark: Option<String>,
    pub pass: bool,
}

fn finite_norm(r: NormResult) -> Result<f64> {
    if !r.converged {
        return Err(HerzError::Quadrature(format!(
            "annulus sum did not settle within k in [{}, {}]",
            r.k_range_used.0, r.k_range_used.1
        )));
    }
    Ok(r.value)
}

fn herz(f: &FunctionSpec, alpha: f64, p: Exponent, q: Exponent, omega: &DomainSpec, trunc: &TruncationPolicy, opts: &QuadratureOptions) -> Result<f64> {
    let hp = HerzParams::new(alpha, p, q, f.dim())?;
    finite_norm(herz_norm(f, &hp, omega, trunc, opts)?)
}

fn target_q(thm: TheoremId, params: &ParamBundle) -> Result<Exponent> {
    match thm {
        TheoremId::EmbedQeqP => Ok(params.q.unwrap_or(params.p()?)),
        TheoremId::EmbedQInfty => Ok(params.q.unwrap_or(Exponent::INFINITY)),
        TheoremId::EmbeddingsFirst if params.q.is_none() => {
            let n = params.n()? as f64;
            let nq = params.p()?.divide(n) - params.m()? as f64 + params.alpha2()? - params.alpha1()?;
            if nq <= 0.0 {
                return Err(HerzError::Precondition("n/p - m + alpha2 - alpha1 must be > 0".into()));
            }
            Exponent::new(n / nq)
        }
        _ => params.q(),
    }
}

fn result3_exponents(params: &ParamBundle) -> Result<(Exponent, Exponent, Exponent)> {
    let p = params.p()?;
    let ps = sobolev_exponent(p, params.lambda()?, params.n()?)?;
    let q0 = params.q0.or(params.q).unwrap_or(p);
    let q1 = params.q1.or(params.q).unwrap_or(q0);
    Ok((ps, q0, q1))
}

/// Both sides of the inequality of `thm` for one function.
///
/// The right-hand side is the source-space norm (Herz–Sobolev, gradient
/// Herz, or the θ-product for the interpolation inequalities).
pub fn lhs_rhs(
    thm: TheoremId,
    params: &ParamBundle,
    f: &FunctionSpec,
    omega: &DomainSpec,
    mode: SobolevMode,
    trunc: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<(f64, f64)> {
    let n = params.n()?;
    if f.dim() != n {
        return Err(HerzError::DimensionMismatch {
            expected: n,
            got: f.dim(),
        });
    }
    match thm {
        TheoremId::L1loc => {
            let lhs = herz(f, 0.0, Exponent::ONE, Exponent::ONE, omega, trunc, opts)?;
            let rhs = herz(f, params.alpha()?, params.p()?, params.q()?, omega, trunc, opts)?;
            Ok((lhs, rhs))
        }
        TheoremId::MaximalInq => {
            let (alpha, p) = (params.alpha()?, params.p()?);
            let q = params.q.unwrap_or(p);
            let hp = HerzParams::new(alpha, p, q, n)?;
            let field = MaximalField { f, t: 1.0, opts: *opts };
            let lhs = finite_norm(herz_norm_field(&field, field.support(), &hp, omega, trunc, opts)?)?;
            let rhs = herz(f, alpha, p, q, omega, trunc, opts)?;
            Ok((lhs, rhs))
        }
        TheoremId::Result3 => {
            let (alpha, p, lambda) = (params.alpha()?, params.p()?, params.lambda()?);
            let (ps, q0, q1) = result3_exponents(params)?;
            let hp = HerzParams::new(alpha, ps, q1, n)?;
            let field = RieszField { f, lambda, opts: *opts };
            let lhs = finite_norm(herz_norm_field(&field, field.support(), &hp, omega, trunc, opts)?)?;
            let rhs = herz(f, alpha, p, q0, omega, trunc, opts)?;
            Ok((lhs, rhs))
        }
        TheoremId::Embeddings1 | TheoremId::Embeddings2 => {
            let p = if thm == TheoremId::Embeddings1 {
                Exponent::ONE
            } else {
                params.p()?
            };
            let (q, r) = (params.q()?, params.r()?);
            let lhs = herz(f, params.alpha1()?, q, r, omega, trunc, opts)?;
            let rhs = finite_norm(gradient_herz_norm(f, params.alpha2()?, p, r, omega, trunc, opts)?)?;
            Ok((lhs, rhs))
        }
        TheoremId::Embeddings3 | TheoremId::Embeddings4 => {
            let p = if thm == TheoremId::Embeddings3 {
                Exponent::ONE
            } else {
                params.p()?
            };
            let theta = params.theta()?;
            let lhs = herz(f, params.alpha1()?, params.q()?, params.r()?, omega, trunc, opts)?;
            let grad = if theta > 0.0 {
                finite_norm(gradient_herz_norm(f, params.alpha2()?, p, params.s()?, omega, trunc, opts)?)?.powf(theta)
            } else {
                1.0
            };
            let plain = if theta < 1.0 {
                herz(f, params.alpha3()?, params.u()?, params.v()?, omega, trunc, opts)?.powf(1.0 - theta)
            } else {
                1.0
            };
            Ok((lhs, grad * plain))
        }
        TheoremId::CknClassical => {
            let lhs = weighted_lp_norm(f, params.alpha1()?, params.q()?, omega, trunc, opts)?;
            let rhs = weighted_gradient_lp_norm(f, params.alpha2()?, params.p()?, omega, trunc, opts)?;
            Ok((lhs, rhs))
        }
        TheoremId::EmbeddingsFirst
        | TheoremId::EmbedQeqP
        | TheoremId::EmbedQInfty
        | TheoremId::EmbedPltQ
        | TheoremId::EmbedQltP => {
            let q = target_q(thm, params)?;
            let r = params.r()?;
            let lhs = herz(f, params.alpha1()?, q, r, omega, trunc, opts)?;
            let sp = SobolevParams {
                herz: HerzParams::new(params.alpha2()?, params.p()?, r, n)?,
                m: params.m()?,
            };
            let rhs = finite_norm(herz_sobolev_norm(f, &sp, omega, mode, trunc, opts)?)?;
            Ok((lhs, rhs))
        }
    }
}

/// Exponents `e` with `side(f(2^m ·)) = 2^{-m e} side(f)`.
///
/// For the Herz–Sobolev theorems the right exponent is that of the top-order
/// part `α₂ + n/p - m`; the full norm mixes orders and is not homogeneous.
pub fn scaling_exponents(thm: TheoremId, params: &ParamBundle) -> Result<(f64, f64)> {
    let nf = params.n()? as f64;
    Ok(match thm {
        TheoremId::L1loc => (nf, params.alpha()? + params.p()?.divide(nf)),
        TheoremId::MaximalInq => {
            let e = params.alpha()? + params.p()?.divide(nf);
            (e, e)
        }
        TheoremId::Result3 => {
            let (ps, _, _) = result3_exponents(params)?;
            let alpha = params.alpha()?;
            (params.lambda()? + alpha + ps.divide(nf), alpha + params.p()?.divide(nf))
        }
        TheoremId::Embeddings1 => (
            params.alpha1()? + params.q()?.divide(nf),
            params.alpha2()? + nf - 1.0,
        ),
        TheoremId::Embeddings2 | TheoremId::CknClassical => (
            params.alpha1()? + params.q()?.divide(nf),
            params.alpha2()? + params.p()?.divide(nf) - 1.0,
        ),
        TheoremId::Embeddings3 | TheoremId::Embeddings4 => {
            let p = if thm == TheoremId::Embeddings3 {
                Exponent::ONE
            } else {
                params.p()?
            };
            let theta = params.theta()?;
            let grad = if theta > 0.0 {
                theta * (params.alpha2()? + p.divide(nf) - 1.0)
            } else {
                0.0
            };
            let plain = if theta < 1.0 {
                (1.0 - theta) * (params.alpha3()? + params.u()?.divide(nf))
            } else {
                0.0
            };
            (params.alpha1()? + params.q()?.divide(nf), grad + plain)
        }
        _ => (
            params.alpha1()? + target_q(thm, params)?.divide(nf),
            params.alpha2()? + params.p()?.divide(nf) - params.m()? as f64,
        ),
    })
}

fn is_sobolev_theorem(thm: TheoremId) -> bool {
    matches!(
        thm,
        TheoremId::EmbeddingsFirst
            | TheoremId::EmbedQeqP
            | TheoremId::EmbedQInfty
            | TheoremId::EmbedPltQ
            | TheoremId::EmbedQltP
    )
}

/// Both sides transform as the same power of the dilation factor.
pub fn scaling_balanced(thm: TheoremId, params: &ParamBundle, mode: SobolevMode) -> Result<bool> {
    if thm == TheoremId::L1loc {
        return Ok(false);
    }
    let (el, er) = scaling_exponents(thm, params)?;
    let homogeneous = !is_sobolev_theorem(thm) || mode == SobolevMode::TopOrder || params.m()? == 0;
    Ok(homogeneous && (el - er).abs() <= EQ_TOL)
}

/// Evaluates every member at every dilation level.
///
/// Member failures are listed in `errors` and do not affect the others.
pub fn run_embedding(exp: &EmbeddingExperiment, trunc: &TruncationPolicy, opts: &QuadratureOptions) -> Result<EmbeddingReport> {
    exp.validate()?;
    let hypothesis = check_hypotheses(exp.thm, &exp.params)?;
    let (e_lhs, e_rhs) = scaling_exponents(exp.thm, &exp.params)?;
    let balanced = scaling_balanced(exp.thm, &exp.params, exp.sobolev_mode)?;
    let jobs: Vec<(usize, i32)> = (0..exp.family.len())
        .flat_map(|i| exp.dilation_levels.iter().map(move |&m| (i, m)))
        .collect();
    let results: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(i, m)| {
            let g = exp.family[i].dilate_dyadic(m)?;
            lhs_rhs(exp.thm, &exp.params, &g, &exp.domain, exp.sobolev_mode, trunc, opts)
        })
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (&(index, m), r) in jobs.iter().zip(results) {
        match r {
            Ok((lhs, rhs)) if lhs == 0.0 && rhs == 0.0 => errors.push(MemberError {
                index,
                m,
                error: "function vanishes on the domain".into(),
            }),
            Ok((lhs, rhs)) => rows.push(RatioRow {
                index,
                m,
                lhs,
                rhs,
                ratio: lhs / rhs,
            }),
            Err(e) => errors.push(MemberError {
                index,
                m,
                error: e.to_string(),
            }),
        }
    }
    let all_finite = rows.iter().all(|r| r.ratio.is_finite());
    let empirical_constant = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let mut drift = 0.0f64;
    for i in 0..exp.family.len() {
        let mut it = rows.iter().filter(|r| r.index == i);
        if let Some(first) = it.next() {
            for r in it {
                drift = drift.max((r.ratio / first.ratio - 1.0).abs());
            }
        }
    }
    let full_space = matches!(exp.domain, DomainSpec::FullSpace { .. });
    let dilation_invariant = (balanced && full_space).then_some(drift <= DILATION_TOL);
    let override_watermark = (exp.override_hypotheses && !hypothesis.ok)
        .then(|| format!("hypotheses overridden: {}", hypothesis.violated.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join("; ")));
    let pass = (hypothesis.ok || exp.override_hypotheses)
        && !rows.is_empty()
        && all_finite
        && dilation_invariant.unwrap_or(true);
    Ok(EmbeddingReport {
        theorem: exp.thm,
        per_function: rows,
        errors,
        empirical_constant,
        scaling_exponent_lhs: e_lhs,
        scaling_exponent_rhs: e_rhs,
        scaling_balanced: balanced,
        max_dilation_drift: drift,
        dilation_tol: DILATION_TOL,
        dilation_invariant,
        sobolev_mode: exp.sobolev_mode,
        hypothesis,
        override_watermark,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantRow {
    pub theorem: TheoremId,
    #[serde(with = "serde_ext")]
    pub empirical_constant: f64,
    pub evaluations: usize,
    /// Largest ratio of each family member, `None` when every level failed.
    pub per_function: Vec<Option<f64>>,
}

/// One row per theorem: the largest ratio over all reports for it.
pub fn estimate_constant(reports: &[EmbeddingReport]) -> Result<Vec<ConstantRow>> {
    if reports.is_empty() {
        return Err(HerzError::Precondition("no reports to summarize".into()));
    }
    let mut out: Vec<ConstantRow> = Vec::new();
    for rep in reports {
        let members = rep.per_function.iter().map(|r| r.index + 1).max().unwrap_or(0);
        let mut per = vec![None; members];
        for r in &rep.per_function {
            let slot: &mut Option<f64> = &mut per[r.index];
            *slot = Some(slot.map_or(r.ratio, |v: f64| v.max(r.ratio)));
        }
        match out.iter_mut().find(|row| row.theorem == rep.theorem) {
            Some(row) => {
                row.empirical_constant = row.empirical_constant.max(rep.empirical_constant);
                row.evaluations += rep.per_function.len();
                row.per_function.extend(per);
            }
            None => out.push(ConstantRow {
                theorem: rep.theorem,
                empirical_constant: rep.empirical_constant,
                evaluations: rep.per_function.len(),
                per_function: per,
            }),
        }
    }
    Ok(out)
}

/// Three Gaussians, three bumps (one off-center) and two tapered power-log shells.
pub fn default_family(n: usize) -> Vec<FunctionSpec> {
    let zero = vec![0.0; n];
    let mut shifted = zero.clone();
    shifted[0] = 0.25;
    vec![
        FunctionSpec::gaussian(zero.clone(), 0.5),
        FunctionSpec::gaussian(zero.clone(), 1.0),
        FunctionSpec::gaussian(zero.clone(), 2.0),
        FunctionSpec::bump(zero.clone(), 0.5),
        FunctionSpec::bump(shifted, 1.0),
        FunctionSpec::bump(zero, 2.0),
        FunctionSpec::RadialPowerLog(RadialPowerLog::new(n, 0.5, 0.0, 0.5, 2.0).with_taper(0.25)),
        FunctionSpec::RadialPowerLog(RadialPowerLog::new(n, -0.5, 2.0, 0.25, 4.0).with_taper(0.25)),
    ]
}

fn e(v: f64) -> Option<Exponent> {
    Some(Exponent::Finite(v))
}

/// A parameter set satisfying every hypothesis of `thm`.
pub fn default_params(thm: TheoremId) -> ParamBundle {
    let base = ParamBundle::default();
    match thm {
        TheoremId::L1loc => ParamBundle {
            n: Some(2),
            alpha: Some(0.5),
            p: e(2.0),
            q: e(2.0),
            ..base
        },
        TheoremId::MaximalInq => ParamBundle {
            n: Some(1),
            alpha: Some(0.0),
            p: e(2.0),
            q: e(2.0),
            ..base
        },
        TheoremId::Result3 => ParamBundle {
            n: Some(1),
            alpha: Some(0.0),
            lambda: Some(0.25),
            p: e(2.0),
            q0: e(2.0),
            q1: e(2.0),
            ..base
        },
        TheoremId::Embeddings1 => ParamBundle {
            n: Some(2),
            alpha1: Some(0.0),
            alpha2: Some(0.0),
            q: e(2.0),
            r: e(2.0),
            ..base
        },
        TheoremId::Embeddings2 => ParamBundle {
            n: Some(3),
            alpha1: Some(0.0),
            alpha2: Some(0.0),
            p: e(2.0),
            q: e(6.0),
            r: e(6.0),
            ..base
        },
        TheoremId::Embeddings3 | TheoremId::Embeddings4 => ParamBundle {
            n: Some(2),
            alpha1: Some(0.0),
            alpha2: Some(0.0),
            alpha3: Some(0.0),
            sigma: Some(0.0),
            theta: Some(0.5),
            p: if thm == TheoremId::Embeddings4 { e(2.0) } else { None },
            q: e(if thm == TheoremId::Embeddings4 { 4.0 } else { 2.0 }),
            u: e(2.0),
            r: e(2.0),
            s: e(2.0),
            v: e(2.0),
            ..base
        },
        TheoremId::CknClassical => ParamBundle {
            n: Some(2),
            alpha1: Some(0.0),
            alpha2: Some(0.5),
            p: e(2.0),
            q: e(4.0),
            ..base
        },
        TheoremId::EmbeddingsFirst => ParamBundle {
            n: Some(2),
            m: Some(1),
            alpha1: Some(0.25),
            alpha2: Some(0.5),
            p: e(2.0),
            q: e(8.0),
            r: e(2.0),
            ..base
        },
        TheoremId::EmbedQeqP | TheoremId::EmbedQInfty | TheoremId::EmbedPltQ => ParamBundle {
            n: Some(2),
            m: Some(1),
            // with q = inf and r < inf the target norm of any f with f(0) != 0 is infinite unless alpha1 > 0
            alpha1: Some(if thm == TheoremId::EmbedQInfty { 0.2 } else { 0.0 }),
            alpha2: Some(0.25),
            p: e(4.0),
            q: match thm {
                TheoremId::EmbedQeqP => e(4.0),
                TheoremId::EmbedQInfty => Some(Exponent::INFINITY),
                _ => e(8.0),
            },
            r: e(2.0),
            ..base
        },
        TheoremId::EmbedQltP => ParamBundle {
            n: Some(2),
            m: Some(1),
            alpha1: Some(0.1),
            alpha2: Some(0.5),
            p: e(8.0),
            q: e(4.0),
            r: e(2.0),
            ..base
        },
    }
}

/// The default experiment of `thm` over `dilation_levels`.
pub fn default_experiment(thm: TheoremId, dilation_levels: Vec<i32>) -> EmbeddingExperiment {
    let params = default_params(thm);
    let n = params.n.unwrap_or(1);
    let domain = if thm == TheoremId::L1loc {
        DomainSpec::ball(vec![0.0; n], 1.0)
    } else {
        DomainSpec::full(n)
    };
    EmbeddingExperiment {
        thm,
        params,
        family: default_family(n),
        dilation_levels,
        domain,
        sobolev_mode: SobolevMode::Full,
        override_hypotheses: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Case1Row {
    #[serde(with = "serde_ext")]
    pub eps: f64,
    /// `∫_{ε<|x|<r} |f|`.
    #[serde(with = "serde_ext")]
    pub l1_mass: f64,
    #[serde(with = "serde_ext")]
    pub herz_norm: f64,
    /// Change of the Herz column from the previous row (0 on the first row).
    #[serde(with = "serde_ext")]
    pub herz_increment: f64,
}

/// `f = |x|^{-n} χ_{ε<|x|<r}` for each `ε`: the `L¹` mass is unbounded as
/// `ε -> 0` while the Herz norm converges when `α > n - n/p`.
pub fn counterexample_case1(
    r: f64,
    hp: &HerzParams,
    eps_list: &[f64],
    trunc: &TruncationPolicy,
    opts: &QuadratureOptions,
) -> Result<Vec<Case1Row>> {
    let nf = hp.n as f64;
    let edge = nf - hp.p.divide(nf);
    if hp.alpha <= edge + EQ_TOL {
        return Err(HerzError::RegimeViolation(format!(
            "needs alpha > n - n/p = {edge}, got {}",
            hp.alpha
        )));
    }
    if !(r > 0.0) {
        return Err(HerzError::Precondition("r must be > 0".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e < r)) {
        return Err(HerzError::Precondition("every eps must lie in (0, r)".into()));
    }
    let l1 = HerzParams::new(0.0, Exponent::ONE, Exponent::ONE, hp.n)?;
    let omega = DomainSpec::full(hp.n);
    let rows: Vec<Result<(f64, f64, f64)>> = eps_list
        .par_iter()
        .map(|&eps| {
            let f = FunctionSpec::radial_power_log(hp.n, -nf, 0.0, eps, r);
            let mass = finite_norm(herz_norm(&f, &l1, &omega, trunc, opts)?)?;
            let h = finite_norm(herz_norm(&f, hp, &omega, trunc, opts)?)?;
            Ok((eps, mass, h))
        })
        .collect();
    let mut out = Vec::with_capacity(rows.len());
    let mut prev: Option<f64> = None;
    for row in rows {
        let (eps, l1_mass, herz_norm) = row?;
        out.push(Case1Row {
            eps,
            l1_mass,
            herz_norm,
            herz_increment: prev.map_or(0.0, |p| (herz_norm - p).abs()),
        });
        prev = Some(herz_norm);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Case2Row {
    /// Annuli `k = -1, ..., -big_k` are included.
    pub big_k: usize,
    /// `2^{kαq} ‖f χ_k‖_p^q` for `k = -big_k`.
    #[serde(with = "serde_ext")]
    pub herz_term: f64,
    #[serde(with = "serde_ext")]
    pub herz_partial: f64,
    #[serde(with = "serde_ext")]
    pub herz_lower: f64,
    #[serde(with = "serde_ext")]
    pub herz_upper: f64,
    /// Integral-test bound on what the annuli beyond `big_k` can still add.
    #[serde(with = "serde_ext")]
    pub tail_bound: f64,
    #[serde(with = "serde_ext")]
    pub l1_mass: f64,
    #[serde(with = "serde_ext")]
    pub l1_partial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case2Table {
    /// `c` in `c (j+1)^{-q} <= term_{-j} <= c j^{-q}`.
    #[serde(with = "serde_ext")]
    pub herz_constant: f64,
    /// `c` in `‖f χ_{-j}‖_1 >= c / (j+1)`.
    #[serde(with = "serde_ext")]
    pub l1_lower_constant: f64,
    pub rows: Vec<Case2Row>,
}

/// `f = |x|^{-n} |ln|x||^{-1} χ_{0<|x|<1/2}` at `α = n - n/p`: the Herz
/// partial sums behave like `Σ j^{-q}` and the `L¹` partial sums like the
/// harmonic series.
pub fn counterexample_case2(hp: &HerzParams, big_k: usize, opts: &QuadratureOptions) -> Result<Case2Table> {
    let n = hp.n;
    let nf = n as f64;
    let edge = nf - hp.p.divide(nf);
    if (hp.alpha - edge).abs() > EQ_TOL {
        return Err(HerzError::RegimeViolation(format!(
            "needs alpha = n - n/p = {edge}, got {}",
            hp.alpha
        )));
    }
    let q = match hp.q {
        Exponent::Finite(q) if q > 1.0 => q,
        Exponent::Finite(q) => {
            return Err(HerzError::RegimeViolation(format!("needs q > 1, got {q}")));
        }
        Exponent::Infinite => {
            return Err(HerzError::Precondition("the partial-sum table needs a finite q".into()));
        }
    };
    let p = match hp.p {
        Exponent::Finite(p) => p,
        Exponent::Infinite => return Err(HerzError::Precondition("the envelope needs a finite p".into())),
    };
    if big_k == 0 {
        return Err(HerzError::Precondition("K must be >= 1".into()));
    }
    let f = FunctionSpec::radial_power_log(n, -nf, -1.0, 0.0, 0.5);
    let omega = DomainSpec::full(n);
    let omega_area = sphere_area(n);
    let ln2 = std::f64::consts::LN_2;
    let c = nf * (p - 1.0);
    let shell = if c == 0.0 { ln2 } else { (2f64.powf(c) - 1.0) / c };
    let herz_constant = (omega_area * shell).powf(q / p) * ln2.powf(-q);
    let masses: Vec<Result<(f64, f64)>> = (1..=big_k)
        .into_par_iter()
        .map(|j| {
            let k = -(j as i32);
            let lp = annulus_lp_norm(&f, k, hp.p, &omega, opts)?.value;
            let l1 = annulus_lp_norm(&f, k, Exponent::ONE, &omega, opts)?.value;
            Ok(((pow2(k).powf(hp.alpha) * lp).powf(q), l1))
        })
        .collect();
    let mut rows = Vec::with_capacity(big_k);
    let (mut hs, mut hc) = (0.0f64, 0.0f64);
    let (mut ls, mut lc) = (0.0f64, 0.0f64);
    let (mut lower, mut upper) = (0.0f64, 0.0f64);
    for (j, m) in (1..=big_k).zip(masses) {
        let (term, l1) = m?;
        // compensated running sums
        let y = term - hc;
        let t = hs + y;
        hc = (t - hs) - y;
        hs = t;
        let y = l1 - lc;
        let t = ls + y;
        lc = (t - ls) - y;
        ls = t;
        let jf = j as f64;
        lower += herz_constant * (jf + 1.0).powf(-q);
        upper += herz_constant * jf.powf(-q);
        rows.push(Case2Row {
            big_k: j,
            herz_term: term,
            herz_partial: hs,
            herz_lower: lower,
            herz_upper: upper,
            tail_bound: herz_constant / ((q - 1.0) * jf.powf(q - 1.0)),
            l1_mass: l1,
            l1_partial: ls,
        });
    }
    Ok(Case2Table {
        herz_constant,
        l1_lower_constant: omega_area,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn opts() -> QuadratureOptions {
        QuadratureOptions::with_tol(1e-10)
    }

    #[test]
    fn default_params_satisfy_hypotheses() {
        for thm in TheoremId::ALL {
            let rep = check_hypotheses(thm, &default_params(thm)).unwrap();
            assert!(rep.ok, "{thm}: {:?}", rep.violated);
            if thm != TheoremId::L1loc && !is_sobolev_theorem(thm) {
                assert!(scaling_balanced(thm, &default_params(thm), SobolevMode::Full).unwrap(), "{thm}");
            }
        }
    }

    #[test]
    fn broken_relation_shifts_exponent() {
        let mut p = default_params(TheoremId::Embeddings1);
        let (a, b) = scaling_exponents(TheoremId::Embeddings1, &p).unwrap();
        assert_eq!(a, b);
        p.alpha1 = Some(0.1);
        let (a, b) = scaling_exponents(TheoremId::Embeddings1, &p).unwrap();
        assert!((a - b - 0.1).abs() < 1e-15);
    }

    #[test]
    fn embeddings4_exponent_is_convex_combination() {
        let p = default_params(TheoremId::Embeddings4);
        let (a, b) = scaling_exponents(TheoremId::Embeddings4, &p).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!((a - 0.5).abs() < 1e-15);
    }

    #[test]
    fn embeddings4_theta_zero_collapses() {
        let mut p = default_params(TheoremId::Embeddings4);
        p.theta = Some(0.0);
        p.q = p.u;
        p.r = p.v;
        p.alpha1 = p.alpha3;
        let f = FunctionSpec::gaussian(vec![0.0, 0.0], 1.0);
        let (l, r) = lhs_rhs(
            TheoremId::Embeddings4,
            &p,
            &f,
            &DomainSpec::full(2),
            SobolevMode::Full,
            &TruncationPolicy::default(),
            &opts(),
        )
        .unwrap();
        assert_eq!(l, r);
    }

    #[test]
    fn sobolev_order_zero_is_identity() {
        let p = ParamBundle {
            n: Some(2),
            m: Some(0),
            alpha1: Some(0.3),
            alpha2: Some(0.3),
            p: e(2.0),
            q: e(2.0),
            r: e(2.0),
            ..Default::default()
        };
        let f = FunctionSpec::bump(vec![0.0, 0.0], 1.0);
        let (l, r) = lhs_rhs(
            TheoremId::EmbedQeqP,
            &p,
            &f,
            &DomainSpec::full(2),
            SobolevMode::Full,
            &TruncationPolicy::default(),
            &opts(),
        )
        .unwrap();
        assert!((l / r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn balanced_experiment_is_dilation_invariant() {
        let mut exp = default_experiment(TheoremId::Embeddings1, vec![-1, 0, 2]);
        exp.family.truncate(2);
        let rep = run_embedding(&exp, &TruncationPolicy::default(), &opts()).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.per_function.len(), 6);
        assert!(rep.max_dilation_drift < 1e-8);
    }

    #[test]
    fn divergent_member_is_flagged() {
        let mut exp = default_experiment(TheoremId::Embeddings1, vec![0]);
        exp.family = vec![
            FunctionSpec::gaussian(vec![0.0, 0.0], 1.0),
            FunctionSpec::radial_power_log(2, 0.0, 0.0, 0.5, 1.0),
        ];
        let rep = run_embedding(&exp, &TruncationPolicy::default(), &opts()).unwrap();
        assert_eq!(rep.per_function.len(), 1);
        assert_eq!(rep.errors.len(), 1);
        assert!(rep.pass);
    }

    #[test]
    fn violated_hypothesis_never_passes_without_override() {
        let mut exp = default_experiment(TheoremId::Embeddings1, vec![0]);
        exp.family.truncate(1);
        exp.params.alpha1 = Some(0.1);
        let rep = run_embedding(&exp, &TruncationPolicy::default(), &opts()).unwrap();
        assert!(!rep.pass);
        assert!(rep.override_watermark.is_none());
        exp.override_hypotheses = true;
        let rep = run_embedding(&exp, &TruncationPolicy::default(), &opts()).unwrap();
        assert!(rep.pass);
        assert!(rep.override_watermark.is_some());
    }

    #[test]
    fn constant_is_max_ratio() {
        let mut exp = default_experiment(TheoremId::Embeddings1, vec![0]);
        exp.family.truncate(2);
        let rep = run_embedding(&exp, &TruncationPolicy::default(), &opts()).unwrap();
        let rows = estimate_constant(&[rep.clone(), rep.clone()]).unwrap();
        assert_eq!(rows.len(), 1);
        let max = rep.per_function.iter().map(|r| r.ratio).fold(0.0, f64::max);
        assert_eq!(rows[0].empirical_constant, max);
        assert_eq!(rows[0].evaluations, 4);
    }

    #[test]
    fn case1_columns() {
        let hp = HerzParams::new(1.5, Exponent::Finite(2.0), Exponent::Finite(2.0), 2).unwrap();
        let eps: Vec<f64> = (1..=10).map(|k| pow2(-k)).collect();
        let t = counterexample_case1(1.0, &hp, &eps, &TruncationPolicy::default(), &opts()).unwrap();
        let last = t.last().unwrap();
        assert!((last.l1_mass / (2.0 * PI * 10.0 * std::f64::consts::LN_2) - 1.0).abs() < 1e-8);
        for w in t.windows(3) {
            assert!(w[2].herz_increment < w[1].herz_increment);
        }
        let low = HerzParams::new(0.5, Exponent::Finite(2.0), Exponent::Finite(2.0), 2).unwrap();
        assert!(matches!(
            counterexample_case1(1.0, &low, &eps, &TruncationPolicy::default(), &opts()),
            Err(HerzError::RegimeViolation(_))
        ));
    }

    #[test]
    fn case2_envelopes() {
        let hp = HerzParams::new(1.0, Exponent::Finite(2.0), Exponent::Finite(2.0), 2).unwrap();
        let t = counterexample_case2(&hp, 64, &opts()).unwrap();
        for r in &t.rows {
            assert!(r.herz_partial > r.herz_lower && r.herz_partial < r.herz_upper, "{r:?}");
            let exact = 2.0 * PI * ((r.big_k as f64 + 1.0).ln());
            assert!((r.l1_partial / exact - 1.0).abs() < 1e-8);
        }
        let q1 = HerzParams::new(1.0, Exponent::Finite(2.0), Exponent::ONE, 2).unwrap();
        assert!(counterexample_case2(&q1, 8, &opts()).is_err());
    }
}
