//! Exponent types and the admissibility regions of every statement the toolkit
//! can exercise.
//!
//! All comparisons against a boundary use the absolute tolerance [`EQ_TOL`]:
//! an equality holds when the difference is at most `EQ_TOL`, a strict
//! inequality holds only when it clears the boundary by more than `EQ_TOL`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{HerzError, Result};
use crate::serde_ext;

/// Absolute tolerance for boundary comparisons.
pub const EQ_TOL: f64 = 1e-12;

/// An integrability or summability exponent in `(0, +inf]`.
///
/// `+inf` is a tagged variant, so `n / p` with `p = inf` is exactly `0`.
/// The Lebesgue exponents of the theory live in `[1, inf]` and are built
/// with [`Exponent::new`]; [`Exponent::quasi`] admits `(0, 1)` for the
/// summation exponents that some statements allow below one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub const INFINITY: Exponent = Exponent::Infinite;
    pub const ONE: Exponent = Exponent::Finite(1.0);

    /// An exponent in `[1, inf]`.
    pub fn new(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            Ok(Exponent::Infinite)
        } else if value.is_finite() && value >= 1.0 {
            Ok(Exponent::Finite(value))
        } else {
            Err(HerzError::OutOfRange(format!(
                "exponent must lie in [1, inf], got {value}"
            )))
        }
    }

    /// An exponent in `(0, inf]`.
    pub fn quasi(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            Ok(Exponent::Infinite)
        } else if value.is_finite() && value > 0.0 {
            Ok(Exponent::Finite(value))
        } else {
            Err(HerzError::OutOfRange(format!(
                "exponent must lie in (0, inf], got {value}"
            )))
        }
    }

    /// The exponent as an IEEE real (`f64::INFINITY` for the tagged value).
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(v) => v,
            Exponent::Infinite => f64::INFINITY,
        }
    }

    /// `1/p`, exactly zero for `p = inf`.
    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(v) => 1.0 / v,
            Exponent::Infinite => 0.0,
        }
    }

    /// `n/p`, exactly zero for `p = inf`.
    pub fn divide(self, numerator: f64) -> f64 {
        match self {
            Exponent::Finite(v) => numerator / v,
            Exponent::Infinite => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    pub fn is_finite(self) -> bool {
        !self.is_infinite()
    }

    /// Hölder conjugate: `1/p + 1/p' = 1`, with `1' = inf` and `inf' = 1`.
    pub fn conjugate(self) -> Result<Self> {
        match self {
            Exponent::Infinite => Ok(Exponent::ONE),
            Exponent::Finite(v) if v == 1.0 => Ok(Exponent::Infinite),
            Exponent::Finite(v) if v > 1.0 => Ok(Exponent::Finite(v / (v - 1.0))),
            Exponent::Finite(v) => Err(HerzError::OutOfRange(format!(
                "conjugate exponent needs p >= 1, got {v}"
            ))),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(v) => write!(f, "{v}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serde_ext::serialize(&self.value(), s)
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_ext::deserialize(d)?;
        Exponent::quasi(v).map_err(serde::de::Error::custom)
    }
}

/// The exponent triple `(alpha, p, q)` of a homogeneous Herz space over `R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HerzParams {
    pub alpha: f64,
    pub p: Exponent,
    pub q: Exponent,
    pub n: usize,
}

impl HerzParams {
    pub fn new(alpha: f64, p: Exponent, q: Exponent, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(HerzError::Precondition("dimension n must be >= 1".into()));
        }
        if !alpha.is_finite() {
            return Err(HerzError::OutOfRange(format!("alpha must be finite, got {alpha}")));
        }
        Ok(Self { alpha, p, q, n })
    }

    /// `alpha + n/p`, the homogeneity exponent of the norm under dyadic dilation.
    pub fn homogeneity(&self) -> f64 {
        self.alpha + self.p.divide(self.n as f64)
    }
}

/// Herz exponents plus the weak-derivative order `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevParams {
    #[serde(flatten)]
    pub herz: HerzParams,
    pub m: u32,
}

/// Parameters of the Herz-type Caffarelli–Kohn–Nirenberg inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CknParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub sigma: f64,
    pub theta: f64,
    pub p: Exponent,
    pub q: Exponent,
    pub u: Exponent,
    pub r: Exponent,
    pub s: Exponent,
    pub v: Exponent,
    pub n: usize,
}

/// The statements whose hypotheses and inequalities the toolkit encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    /// Embedding of the Herz space into `L^1_loc` (the set `V_{alpha,p,q}`).
    L1loc,
    /// Boundedness of the Hardy–Littlewood maximal operator.
    MaximalInq,
    /// Boundedness of the Riesz potential `I_lambda` into the Sobolev exponent space.
    Result3,
    /// `W^{alpha2,r}_{1,1} -> K^{alpha1,r}_q`.
    Embeddings1,
    /// `W^{alpha2,r}_{p,1} -> K^{alpha1,r}_q`.
    Embeddings2,
    /// CKN-type interpolation inequality with gradient in `K_1`.
    Embeddings3,
    /// CKN-type interpolation inequality with gradient in `K_p`.
    Embeddings4,
    /// The classical weighted Caffarelli–Kohn–Nirenberg inequality.
    #[serde(rename = "CKNClassical")]
    CknClassical,
    /// Herz–Sobolev embedding with the exact exponent relation.
    EmbeddingsFirst,
    /// Herz–Sobolev embedding with `q = p`.
    EmbedQeqP,
    /// Herz–Sobolev embedding into `K_inf`.
    EmbedQInfty,
    /// Herz–Sobolev embedding with `p < q`.
    EmbedPltQ,
    /// Herz–Sobolev embedding with `q < p`.
    EmbedQltP,
}

impl TheoremId {
    pub const ALL: [TheoremId; 13] = [
        TheoremId::L1loc,
        TheoremId::MaximalInq,
        TheoremId::Result3,
        TheoremId::Embeddings1,
        TheoremId::Embeddings2,
        TheoremId::Embeddings3,
        TheoremId::Embeddings4,
        TheoremId::CknClassical,
        TheoremId::EmbeddingsFirst,
        TheoremId::EmbedQeqP,
        TheoremId::EmbedQInfty,
        TheoremId::EmbedPltQ,
        TheoremId::EmbedQltP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::L1loc => "L1loc",
            TheoremId::MaximalInq => "MaximalInq",
            TheoremId::Result3 => "Result3",
            TheoremId::Embeddings1 => "Embeddings1",
            TheoremId::Embeddings2 => "Embeddings2",
            TheoremId::Embeddings3 => "Embeddings3",
            TheoremId::Embeddings4 => "Embeddings4",
            TheoremId::CknClassical => "CKNClassical",
            TheoremId::EmbeddingsFirst => "EmbeddingsFirst",
            TheoremId::EmbedQeqP => "EmbedQeqP",
            TheoremId::EmbedQInfty => "EmbedQInfty",
            TheoremId::EmbedPltQ => "EmbedPltQ",
            TheoremId::EmbedQltP => "EmbedQltP",
        }
    }

    /// Herz–Sobolev statements posed on a domain with the cone condition and `0 ∈ Ω`.
    pub fn needs_cone_domain(self) -> bool {
        matches!(
            self,
            TheoremId::EmbeddingsFirst
                | TheoremId::EmbedQeqP
                | TheoremId::EmbedQInfty
                | TheoremId::EmbedPltQ
                | TheoremId::EmbedQltP
        )
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TheoremId {
    type Err = HerzError;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| HerzError::OutOfRange(format!("unknown theorem tag `{s}`")))
    }
}

/// A loose bundle of named parameters; each statement reads the fields it needs.
///
/// For the classical CKN inequality the target weight `gamma` is stored in
/// `alpha1`, the gradient weight in `alpha2`, the target exponent in `q` and
/// the gradient exponent in `p`, mirroring the Herz-type statements.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBundle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Exponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Exponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Exponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Exponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Exponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Exponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Exponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<Exponent>,
}

fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| HerzError::MissingField(name.to_string()))
}

macro_rules! accessor {
    ($($name:ident : $ty:ty),* $(,)?) => {
        $(
            pub fn $name(&self) -> Result<$ty> {
                need(self.$name, stringify!($name))
            }
        )*
    };
}

impl ParamBundle {
    accessor!(
        n: usize, m: u32, alpha: f64, alpha1: f64, alpha2: f64, alpha3: f64,
        sigma: f64, theta: f64, lambda: f64, p: Exponent, q: Exponent,
        r: Exponent, s: Exponent, u: Exponent, v: Exponent,
    );

    fn dim(&self) -> Result<f64> {
        let n = self.n()?;
        if n == 0 {
            return Err(HerzError::Precondition("dimension n must be >= 1".into()));
        }
        Ok(n as f64)
    }
}

impl From<HerzParams> for ParamBundle {
    fn from(hp: HerzParams) -> Self {
        ParamBundle {
            n: Some(hp.n),
            alpha: Some(hp.alpha),
            p: Some(hp.p),
            q: Some(hp.q),
            ..Default::default()
        }
    }
}

impl From<SobolevParams> for ParamBundle {
    fn from(sp: SobolevParams) -> Self {
        ParamBundle {
            m: Some(sp.m),
            ..ParamBundle::from(sp.herz)
        }
    }
}

impl From<CknParams> for ParamBundle {
    fn from(c: CknParams) -> Self {
        ParamBundle {
            n: Some(c.n),
            alpha1: Some(c.alpha1),
            alpha2: Some(c.alpha2),
            alpha3: Some(c.alpha3),
            sigma: Some(c.sigma),
            theta: Some(c.theta),
            p: Some(c.p),
            q: Some(c.q),
            u: Some(c.u),
            r: Some(c.r),
            s: Some(c.s),
            v: Some(c.v),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        })
    }
}

/// `a - b`, with `inf - inf = 0`.
fn gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

/// One evaluated hypothesis `lhs relation rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    #[serde(with = "serde_ext")]
    pub lhs: f64,
    pub relation: Relation,
    #[serde(with = "serde_ext")]
    pub rhs: f64,
    /// Signed margin: positive means the condition holds with room to spare;
    /// for equalities it is `-|lhs - rhs|`.
    #[serde(with = "serde_ext")]
    pub slack: f64,
    pub satisfied: bool,
}

impl Condition {
    pub fn evaluate(name: impl Into<String>, lhs: f64, relation: Relation, rhs: f64) -> Self {
        let (slack, satisfied) = match relation {
            Relation::Lt => {
                let s = gap(rhs, lhs);
                (s, s > EQ_TOL)
            }
            Relation::Le => {
                let s = gap(rhs, lhs);
                (s, s >= -EQ_TOL)
            }
            Relation::Gt => {
                let s = gap(lhs, rhs);
                (s, s > EQ_TOL)
            }
            Relation::Ge => {
                let s = gap(lhs, rhs);
                (s, s >= -EQ_TOL)
            }
            Relation::Eq => {
                let d = gap(lhs, rhs).abs();
                (-d, d <= EQ_TOL)
            }
        };
        Condition {
            name: name.into(),
            lhs,
            relation,
            rhs,
            slack,
            satisfied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedValue {
    pub name: String,
    #[serde(with = "serde_ext")]
    pub value: f64,
}

/// Outcome of a hypothesis check: every condition evaluated, the violated ones
/// repeated in `violated`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub theorem: TheoremId,
    pub ok: bool,
    pub conditions: Vec<Condition>,
    pub violated: Vec<Condition>,
    pub derived: Vec<DerivedValue>,
}

impl HypothesisReport {
    pub fn new(theorem: TheoremId, conditions: Vec<Condition>, derived: Vec<DerivedValue>) -> Self {
        let violated: Vec<Condition> = conditions.iter().filter(|c| !c.satisfied).cloned().collect();
        HypothesisReport {
            theorem,
            ok: violated.is_empty(),
            conditions,
            violated,
            derived,
        }
    }

    /// Appends further conditions (for example domain requirements) and
    /// recomputes `ok` and `violated`.
    pub fn extend(&mut self, extra: impl IntoIterator<Item = Condition>) {
        for c in extra {
            if !c.satisfied {
                self.violated.push(c.clone());
            }
            self.conditions.push(c);
        }
        self.ok = self.violated.is_empty();
    }

    pub fn derived_value(&self, name: &str) -> Option<f64> {
        self.derived.iter().find(|d| d.name == name).map(|d| d.value)
    }
}

/// `(alpha, p, q) ∈ V_{alpha,p,q}`: the parameters for which the Herz space
/// embeds into `L^1_loc` near the origin.
pub fn in_v(alpha: f64, p: Exponent, q: Exponent, n: usize) -> bool {
    let n = n as f64;
    let edge = n - p.divide(n);
    if edge - alpha > EQ_TOL {
        return true;
    }
    if (alpha - edge).abs() <= EQ_TOL && (q.value() - 1.0).abs() <= EQ_TOL {
        return true;
    }
    alpha.abs() <= EQ_TOL && p.is_infinite() && q.is_infinite()
}

/// Admissible `(alpha, p)` for the maximal operator on `K^{alpha,q}_p`:
/// `1 < p < inf` and `-n/p < alpha < n(1 - 1/p)`.
pub fn maximal_admissible(alpha: f64, p: Exponent, n: usize) -> bool {
    let n = n as f64;
    match p {
        Exponent::Infinite => false,
        Exponent::Finite(pv) => {
            pv - 1.0 > EQ_TOL && alpha + n / pv > EQ_TOL && n * (1.0 - 1.0 / pv) - alpha > EQ_TOL
        }
    }
}

fn check_riesz_pre(p: Exponent, lambda: f64, n: usize) -> Result<()> {
    let nf = n as f64;
    if !(lambda > 0.0 && lambda < nf) {
        return Err(HerzError::Precondition(format!(
            "lambda must lie in (0, n) = (0, {n}), got {lambda}"
        )));
    }
    let upper = nf / lambda;
    let pv = p.value();
    if !(pv > 1.0 && pv < upper) {
        return Err(HerzError::Precondition(format!(
            "p must lie in (1, n/lambda) = (1, {upper}), got {p}"
        )));
    }
    Ok(())
}

/// Admissible `alpha` for the Riesz potential: `lambda - n/p < alpha < n - n/p`.
pub fn riesz_admissible(alpha: f64, p: Exponent, lambda: f64, n: usize) -> Result<bool> {
    check_riesz_pre(p, lambda, n)?;
    let nf = n as f64;
    let np = p.divide(nf);
    Ok(alpha - (lambda - np) > EQ_TOL && (nf - np) - alpha > EQ_TOL)
}

/// The Sobolev exponent `p*` with `1/p* = 1/p - lambda/n`.
pub fn sobolev_exponent(p: Exponent, lambda: f64, n: usize) -> Result<Exponent> {
    if n == 0 {
        return Err(HerzError::Precondition("dimension n must be >= 1".into()));
    }
    if !(lambda > 0.0) {
        return Err(HerzError::Precondition(format!("lambda must be > 0, got {lambda}")));
    }
    let inv = p.recip() - lambda / n as f64;
    if inv <= EQ_TOL {
        return Err(HerzError::OutOfRange(format!(
            "1/p - lambda/n = {inv} must be positive (p = {p}, lambda = {lambda}, n = {n})"
        )));
    }
    Ok(Exponent::Finite(1.0 / inv))
}

struct Checks {
    conds: Vec<Condition>,
    derived: Vec<DerivedValue>,
}

impl Checks {
    fn new() -> Self {
        Checks {
            conds: Vec::new(),
            derived: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, lhs: f64, rel: Relation, rhs: f64) {
        self.conds.push(Condition::evaluate(name, lhs, rel, rhs));
    }

    fn derive(&mut self, name: &str, value: f64) {
        self.derived.push(DerivedValue {
            name: name.to_string(),
            value,
        });
    }

    /// `(alpha, p, q) ∈ V` as a single condition, reported against the edge `n - n/p`.
    fn in_v(&mut self, label: &str, alpha: f64, p: Exponent, q: Exponent, n: usize) {
        let edge = n as f64 - p.divide(n as f64);
        let ok = in_v(alpha, p, q, n);
        let relation = if (alpha - edge).abs() <= EQ_TOL {
            Relation::Eq
        } else {
            Relation::Lt
        };
        self.conds.push(Condition {
            name: label.to_string(),
            lhs: alpha,
            relation,
            rhs: edge,
            slack: gap(edge, alpha),
            satisfied: ok,
        });
    }

    fn finish(self, thm: TheoremId) -> HypothesisReport {
        HypothesisReport::new(thm, self.conds, self.derived)
    }
}

use Relation::{Eq as EQ, Ge as GE, Gt as GT, Le as LE, Lt as LT};

/// Evaluates every hypothesis of `thm` on `params`.
///
/// Returns `MissingField` naming the first absent symbol the statement needs.
pub fn check_hypotheses(thm: TheoremId, params: &ParamBundle) -> Result<HypothesisReport> {
    let mut c = Checks::new();
    match thm {
        TheoremId::L1loc => {
            let n = params.n()?;
            let nf = params.dim()?;
            let (alpha, p, q) = (params.alpha()?, params.p()?, params.q()?);
            c.push("p >= 1", p.value(), GE, 1.0);
            c.push("q >= 1", q.value(), GE, 1.0);
            let edge = nf - p.divide(nf);
            if edge - alpha > EQ_TOL {
                c.push("alpha < n - n/p", alpha, LT, edge);
            } else if (alpha - edge).abs() <= EQ_TOL {
                c.push("alpha = n - n/p", alpha, EQ, edge);
                c.push("q = 1 on the endpoint alpha = n - n/p", q.value(), EQ, 1.0);
            } else if in_v(alpha, p, q, n) {
                c.push("alpha = 0 with p = q = inf", alpha, EQ, 0.0);
            } else {
                c.push("alpha <= n - n/p", alpha, LE, edge);
            }
        }
        TheoremId::MaximalInq => {
            let nf = params.dim()?;
            let (alpha, p) = (params.alpha()?, params.p()?);
            c.push("1 < p", p.value(), GT, 1.0);
            c.push("p < inf", p.value(), LT, f64::INFINITY);
            c.push("-n/p < alpha", alpha, GT, -p.divide(nf));
            c.push("alpha < n(1 - 1/p)", alpha, LT, nf * (1.0 - p.recip()));
            if let Some(q) = params.q {
                c.push("q >= 1", q.value(), GE, 1.0);
            }
        }
        TheoremId::Result3 => {
            let n = params.n()?;
            let nf = params.dim()?;
            let (alpha, p, lambda) = (params.alpha()?, params.p()?, params.lambda()?);
            c.push("0 < lambda", lambda, GT, 0.0);
            c.push("lambda < n", lambda, LT, nf);
            c.push("1 < p", p.value(), GT, 1.0);
            c.push("p < n/lambda", p.value(), LT, nf / lambda);
            c.push("lambda - n/p < alpha", alpha, GT, lambda - p.divide(nf));
            c.push("alpha < n - n/p", alpha, LT, nf - p.divide(nf));
            let q0 = params.q0.or(params.q);
            let q1 = params.q1.or(params.q);
            if let Some(q0) = q0 {
                c.push("q0 > 0", q0.value(), GT, 0.0);
                if let Some(q1) = q1 {
                    c.push("q0 <= q1", q0.value(), LE, q1.value());
                }
            }
            if let Ok(ps) = sobolev_exponent(p, lambda, n) {
                c.derive("p_star", ps.value());
            }
        }
        TheoremId::Embeddings1 => {
            let nf = params.dim()?;
            let (q, a1, a2) = (params.q()?, params.alpha1()?, params.alpha2()?);
            let upper = if nf > 1.0 { nf / (nf - 1.0) } else { f64::INFINITY };
            c.push("1 <= q", q.value(), GE, 1.0);
            c.push("q <= n/(n-1)", q.value(), LE, upper);
            if let Some(r) = params.r {
                c.push("0 < r", r.value(), GT, 0.0);
            }
            c.push("alpha2 + n - 1 = alpha1 + n/q", a2 + nf - 1.0, EQ, a1 + q.divide(nf));
        }
        TheoremId::Embeddings2 => {
            let nf = params.dim()?;
            let (p, q, a1, a2) = (params.p()?, params.q()?, params.alpha1()?, params.alpha2()?);
            c.push("1 <= q", q.value(), GE, 1.0);
            let denom = p.divide(nf) - 1.0;
            if denom > EQ_TOL {
                c.push("q <= n/(n/p - 1)", q.value(), LE, nf / denom);
            } else {
                c.push("p<n (implied by exponent bound)", p.value(), LT, nf);
            }
            if let Some(r) = params.r {
                c.push("0 < r", r.value(), GT, 0.0);
            }
            c.push("alpha2 >= alpha1", a2, GE, a1);
            c.push(
                "n/q - n/p = alpha2 - 1 - alpha1",
                q.divide(nf) - p.divide(nf),
                EQ,
                a2 - 1.0 - a1,
            );
            c.push("alpha2 - 1 - alpha1 <= 0", a2 - 1.0 - a1, LE, 0.0);
        }
        TheoremId::Embeddings3 | TheoremId::Embeddings4 => {
            let nf = params.dim()?;
            let p = if thm == TheoremId::Embeddings3 {
                Exponent::ONE
            } else {
                params.p()?
            };
            let (q, u, r, s, v) = (params.q()?, params.u()?, params.r()?, params.s()?, params.v()?);
            let (a1, a2, a3) = (params.alpha1()?, params.alpha2()?, params.alpha3()?);
            let (sigma, theta) = (params.sigma()?, params.theta()?);
            if thm == TheoremId::Embeddings4 {
                c.push("p >= 1", p.value(), GE, 1.0);
            }
            c.push("u >= 1", u.value(), GE, 1.0);
            c.push("q > 0", q.value(), GT, 0.0);
            c.push("r > 0", r.value(), GT, 0.0);
            c.push("s > 0", s.value(), GT, 0.0);
            c.push("v > 0", v.value(), GT, 0.0);
            c.push("0 <= theta", theta, GE, 0.0);
            c.push("theta <= 1", theta, LE, 1.0);
            c.push("n/p + alpha2 > 0", p.divide(nf) + a2, GT, 0.0);
            c.push("n/u + alpha3 > 0", u.divide(nf) + a3, GT, 0.0);
            c.push("n/q + alpha1 > 0", q.divide(nf) + a1, GT, 0.0);
            c.push("sigma <= alpha2", sigma, LE, a2);
            c.push("alpha2 <= sigma + 1", a2, LE, sigma + 1.0);
            c.push(
                "alpha1 = theta*sigma + (1-theta)*alpha3",
                a1,
                EQ,
                theta * sigma + (1.0 - theta) * a3,
            );
            c.push(
                "n/q + alpha1 = theta(n/p + alpha2 - 1) + (1-theta)(n/u + alpha3)",
                q.divide(nf) + a1,
                EQ,
                theta * (p.divide(nf) + a2 - 1.0) + (1.0 - theta) * (u.divide(nf) + a3),
            );
            c.push(
                "1/r = theta/s + (1-theta)/v",
                r.recip(),
                EQ,
                theta * s.recip() + (1.0 - theta) * v.recip(),
            );
        }
        TheoremId::CknClassical => {
            // target: weight alpha1 (gamma), exponent q; gradient: weight alpha2, exponent p
            let nf = params.dim()?;
            let (p, q, a1, a2) = (params.p()?, params.q()?, params.alpha1()?, params.alpha2()?);
            c.push("1 <= p", p.value(), GE, 1.0);
            c.push("p < inf", p.value(), LT, f64::INFINITY);
            c.push("alpha2 > 1 - n/p", a2, GT, 1.0 - p.divide(nf));
            c.push("alpha2 - 1 <= alpha1", a2 - 1.0, LE, a1);
            c.push("alpha1 <= alpha2", a1, LE, a2);
            c.push(
                "n/q - n/p = alpha2 - alpha1 - 1",
                q.divide(nf) - p.divide(nf),
                EQ,
                a2 - a1 - 1.0,
            );
            c.push("alpha2 - alpha1 - 1 <= 0", a2 - a1 - 1.0, LE, 0.0);
        }
        TheoremId::EmbeddingsFirst => {
            let n = params.n()?;
            let nf = params.dim()?;
            let (p, r, m) = (params.p()?, params.r()?, params.m()? as f64);
            let (a1, a2) = (params.alpha1()?, params.alpha2()?);
            c.in_v("(alpha2, p, r) in V", a2, p, r, n);
            c.push("1 < p", p.value(), GT, 1.0);
            c.push("p < inf", p.value(), LT, f64::INFINITY);
            c.push("alpha2 >= alpha1", a2, GE, a1);
            c.push("m - n/p < alpha2", m - p.divide(nf), LT, a2);
            c.push("alpha2 < n - n/p", a2, LT, nf - p.divide(nf));
            c.push("m - alpha2 + alpha1 > 0", m - a2 + a1, GT, 0.0);
            let nq = p.divide(nf) - m + a2 - a1;
            c.push("n/p - m + alpha2 - alpha1 > 0", nq, GT, 0.0);
            match params.q {
                Some(q) => c.push("n/q = n/p - m + alpha2 - alpha1", q.divide(nf), EQ, nq),
                None if nq > EQ_TOL => c.derive("q", nf / nq),
                None => {}
            }
        }
        TheoremId::EmbedQeqP | TheoremId::EmbedQInfty | TheoremId::EmbedPltQ | TheoremId::EmbedQltP => {
            let n = params.n()?;
            let nf = params.dim()?;
            let (p, r, m) = (params.p()?, params.r()?, params.m()? as f64);
            let (a1, a2) = (params.alpha1()?, params.alpha2()?);
            let np = p.divide(nf);
            c.in_v("(alpha2, p, r) in V", a2, p, r, n);
            c.push("1 < p", p.value(), GT, 1.0);
            c.push("p < inf", p.value(), LT, f64::INFINITY);
            c.push("m < n", m, LT, nf);
            match thm {
                TheoremId::EmbedQeqP => {
                    if let Some(q) = params.q {
                        c.push("q = p", q.value(), EQ, p.value());
                    }
                    c.push("alpha2 >= alpha1", a2, GE, a1);
                    c.push("alpha1 + n/p > 0", a1 + np, GT, 0.0);
                    c.push("max(n/p + alpha2, n/p + alpha2 - alpha1) < m", (np + a2).max(np + a2 - a1), LT, m);
                }
                TheoremId::EmbedQInfty => {
                    if let Some(q) = params.q {
                        c.push("q = inf", q.value(), EQ, f64::INFINITY);
                    }
                    c.push("1 <= r", r.value(), GE, 1.0);
                    c.push("n/p + alpha2 < m", np + a2, LT, m);
                    c.push("alpha2 >= alpha1", a2, GE, a1);
                    c.push("alpha1 > -n/p", a1, GT, -np);
                }
                TheoremId::EmbedPltQ => {
                    let q = params.q()?;
                    c.push("p < q", p.value(), LT, q.value());
                    c.push("q < inf", q.value(), LT, f64::INFINITY);
                    c.push("alpha2 >= alpha1", a2, GE, a1);
                    c.push("alpha1 > -n/p", a1, GT, -np);
                    c.push("max(n/p + alpha2, n/p + alpha2 - alpha1) < m", (np + a2).max(np + a2 - a1), LT, m);
                }
                _ => {
                    let q = params.q()?;
                    c.push("1 < q", q.value(), GT, 1.0);
                    c.push("q < p", q.value(), LT, p.value());
                    c.push("alpha2 + n/p >= alpha1 + n/q", a2 + np, GE, a1 + q.divide(nf));
                    c.push("max(n/p + alpha2, n/p + alpha2 - alpha1) < m", (np + a2).max(np + a2 - a1), LT, m);
                }
            }
        }
    }
    Ok(c.finish(thm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn conjugates() {
        assert_eq!(Exponent::ONE.conjugate().unwrap(), Exponent::INFINITY);
        assert_eq!(Exponent::INFINITY.conjugate().unwrap(), Exponent::ONE);
        assert_eq!(e(2.0).conjugate().unwrap(), e(2.0));
        let p = e(3.0);
        let pc = p.conjugate().unwrap();
        assert!((p.recip() + pc.recip() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exponent_rejects_below_one() {
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::quasi(0.5).is_ok());
        assert!(Exponent::quasi(0.0).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
    }

    #[test]
    fn in_v_examples() {
        assert!(in_v(0.0, e(2.0), e(2.0), 3));
        assert!(in_v(1.0, e(2.0), Exponent::ONE, 2));
        assert!(!in_v(1.0, e(2.0), e(2.0), 2));
        assert!(in_v(0.0, Exponent::INFINITY, Exponent::INFINITY, 2));
        assert!(!in_v(2.5, Exponent::INFINITY, Exponent::INFINITY, 2));
    }

    #[test]
    fn maximal_region() {
        assert!(maximal_admissible(0.0, e(2.0), 3));
        assert!(!maximal_admissible(-1.0, e(2.0), 2));
        let top = 2.0 * (1.0 - 1.0 / 3.0);
        assert!(maximal_admissible(0.9 * top, e(3.0), 2));
        assert!(!maximal_admissible(top, e(3.0), 2));
        assert!(!maximal_admissible(0.0, Exponent::ONE, 2));
        assert!(!maximal_admissible(0.0, Exponent::INFINITY, 2));
    }

    #[test]
    fn riesz_region() {
        assert!(riesz_admissible(0.0, e(2.0), 1.0, 3).unwrap());
        assert!(!riesz_admissible(1.5, e(2.0), 1.0, 3).unwrap());
        // -1.4 < 1 - 1.5 = -0.5, so the lower bound fails
        assert!(!riesz_admissible(-1.4, e(2.0), 1.0, 3).unwrap());
        assert!(riesz_admissible(0.0, e(2.0), 3.0, 3).is_err());
        assert!(riesz_admissible(0.0, e(4.0), 1.0, 3).is_err());
        assert!(riesz_admissible(0.0, Exponent::ONE, 1.0, 3).is_err());
    }

    #[test]
    fn sobolev_exponent_examples() {
        let ps = sobolev_exponent(e(2.0), 1.0, 3).unwrap();
        assert!((ps.value() - 6.0).abs() < 1e-12);
        assert!(sobolev_exponent(Exponent::ONE, 0.0, 3).is_err());
        assert!(sobolev_exponent(e(2.0), 1.0, 2).is_err());
        assert!(sobolev_exponent(Exponent::INFINITY, 0.5, 2).is_err());
    }

    #[test]
    fn missing_field_is_named() {
        let b = ParamBundle {
            n: Some(3),
            q: Some(e(1.5)),
            alpha1: Some(0.0),
            ..Default::default()
        };
        match check_hypotheses(TheoremId::Embeddings1, &b) {
            Err(HerzError::MissingField(name)) => assert_eq!(name, "alpha2"),
            other => panic!("expected missing alpha2, got {other:?}"),
        }
    }

    #[test]
    fn embeddings1_examples() {
        let mut b = ParamBundle {
            n: Some(3),
            q: Some(e(1.5)),
            alpha1: Some(0.0),
            alpha2: Some(0.0),
            r: Some(e(2.0)),
            ..Default::default()
        };
        let rep = check_hypotheses(TheoremId::Embeddings1, &b).unwrap();
        assert!(rep.ok, "{rep:?}");
        b.q = Some(e(2.0));
        let rep = check_hypotheses(TheoremId::Embeddings1, &b).unwrap();
        assert!(!rep.ok);
        assert!(rep.violated.iter().any(|c| c.name == "q <= n/(n-1)"));
    }

    #[test]
    fn embeddings2_p_at_least_n() {
        let b = ParamBundle {
            n: Some(2),
            p: Some(e(3.0)),
            q: Some(e(2.0)),
            alpha1: Some(0.0),
            alpha2: Some(0.0),
            ..Default::default()
        };
        let rep = check_hypotheses(TheoremId::Embeddings2, &b).unwrap();
        assert!(rep
            .violated
            .iter()
            .any(|c| c.name == "p<n (implied by exponent bound)"));
    }

    #[test]
    fn embeddings_first_derives_q() {
        let b = ParamBundle {
            n: Some(3),
            p: Some(e(2.0)),
            r: Some(e(2.0)),
            m: Some(1),
            alpha1: Some(0.0),
            alpha2: Some(0.0),
            ..Default::default()
        };
        let rep = check_hypotheses(TheoremId::EmbeddingsFirst, &b).unwrap();
        assert!(rep.ok, "{:?}", rep.violated);
        assert!((rep.derived_value("q").unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn embeddings4_theta_one_reduces_to_gradient_relation() {
        let b = ParamBundle {
            n: Some(3),
            p: Some(e(2.0)),
            q: Some(e(6.0)),
            u: Some(e(2.0)),
            r: Some(e(2.0)),
            s: Some(e(2.0)),
            v: Some(e(5.0)),
            alpha1: Some(0.0),
            alpha2: Some(0.0),
            alpha3: Some(7.0),
            sigma: Some(0.0),
            theta: Some(1.0),
            ..Default::default()
        };
        let rep = check_hypotheses(TheoremId::Embeddings4, &b).unwrap();
        assert!(rep.ok, "{:?}", rep.violated);
        let rel = rep
            .conditions
            .iter()
            .find(|c| c.name.starts_with("n/q + alpha1 ="))
            .unwrap();
        assert_eq!(rel.lhs, 0.5);
        assert_eq!(rel.rhs, 1.5 + 0.0 - 1.0);
        let rr = rep.conditions.iter().find(|c| c.name.starts_with("1/r")).unwrap();
        assert_eq!(rr.rhs, 0.5);
    }

    #[test]
    fn exponent_json_round_trip() {
        let s = serde_json::to_string(&Exponent::INFINITY).unwrap();
        assert_eq!(s, "\"inf\"");
        let back: Exponent = serde_json::from_str(&s).unwrap();
        assert_eq!(back, Exponent::INFINITY);
        let two: Exponent = serde_json::from_str("2").unwrap();
        assert_eq!(two, e(2.0));
        assert!(serde_json::from_str::<Exponent>("-1").is_err());
    }

    #[test]
    fn theorem_tags_parse() {
        for t in TheoremId::ALL {
            let parsed: TheoremId = t.name().parse().unwrap();
            assert_eq!(parsed, t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.name()));
        }
        assert!("Nope".parse::<TheoremId>().is_err());
    }
}
