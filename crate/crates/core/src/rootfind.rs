//! Roots of polynomials with series coefficients.
//!
//! Roots are expanded term by term: the Newton polygon of the current
//! translate gives the valuation `mu` and the residual polynomial gives the
//! leading coefficient `c` of every root continuing the branch, then the
//! polynomial is translated by `c t^mu`. Exponents can accumulate below a
//! finite limit, so when a branch goes deeper than the job allows, the
//! partial root is fed to [`detect_tr`] and the periodic prediction is used
//! to jump past the accumulation point. Roots are only ever checked on
//! finite windows; a root is reported [`RootStatus::ExactPeriodic`] when it
//! has a twist-recurrent description that also verifies on a larger window.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use serde::Serialize;
use thiserror::Error;

use crate::exponents::{cert_add, to_digits, ExpQ, SupportCert};
use crate::ffield::{poly_roots, split_extension_degree, Field, FieldError, FqElem, FqPoly};
use crate::lrr::PeriodCert;
use crate::series::{window_equal, ExpBound, Provenance, Series, SeriesError, Valuation};
use crate::twistrec::{as_solve, detect_tr, DetectBounds, TRSeries, TwistError};

/// Extra depth and height used for searches and confirmation windows.
pub const MARGIN: u32 = 2;

const MAX_EXTRAPOLATIONS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RootError {
    #[error("valuation of coefficient {index} not found below {r} at depth {depth}")]
    UnresolvedValuation { index: usize, r: ExpQ, depth: u32 },
    #[error("residual roots need an extension of degree {required_degree} over F_{p}")]
    FieldTooSmall { p: u32, required_degree: u32 },
    #[error("step budget of {budget} exhausted")]
    BudgetExceeded { budget: usize },
    #[error("bad polynomial: {0}")]
    BadPolynomial(String),
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error(transparent)]
    Twist(#[from] TwistError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

fn structural_zero(s: &Series) -> bool {
    s.finite_terms().is_some_and(|m| m.is_empty())
}

fn one(field: &Field) -> Series {
    Series::monomial(&field.one(), ExpQ::zero())
}

/// `x^n`, using Frobenius for factors of `p`.
pub fn series_pow(x: &Series, n: usize) -> Series {
    let p = x.p() as usize;
    match n {
        0 => one(x.field()),
        1 => x.clone(),
        n if n % p == 0 => series_pow(x, n / p).twist_up(1),
        n => x.mul(&series_pow(x, n - 1)),
    }
}

fn binom_mod(mut n: usize, mut k: usize, p: usize) -> usize {
    // Lucas
    let mut acc = 1;
    while n > 0 || k > 0 {
        let (ni, ki) = (n % p, k % p);
        if ki > ni {
            return 0;
        }
        let mut b = 1usize;
        for j in 0..ki {
            b = b * (ni - j) / (j + 1);
        }
        acc = acc * (b % p) % p;
        n /= p;
        k /= p;
    }
    acc
}

/// Polynomial `sum a_i x^i` with series coefficients.
#[derive(Clone)]
pub struct SeriesPoly {
    field: Field,
    coeffs: Vec<Series>,
}

impl SeriesPoly {
    /// Drops structurally zero leading coefficients; the degree must stay
    /// at least 1.
    pub fn new(field: &Field, mut coeffs: Vec<Series>) -> Result<SeriesPoly, RootError> {
        for c in &coeffs {
            field.check(c.field())?;
        }
        while coeffs.last().is_some_and(structural_zero) {
            coeffs.pop();
        }
        if coeffs.len() < 2 {
            return Err(RootError::BadPolynomial("degree must be at least 1".into()));
        }
        Ok(SeriesPoly {
            field: field.clone(),
            coeffs,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Series] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &Series {
        &self.coeffs[i]
    }

    /// `P(x)` as a series.
    pub fn eval(&self, x: &Series) -> Series {
        let mut acc = Series::zero(&self.field);
        for (i, a) in self.coeffs.iter().enumerate() {
            if !structural_zero(a) {
                acc = acc.add(&a.mul(&series_pow(x, i)));
            }
        }
        acc
    }

    /// Parses `sum c*t^(e)*x^k`; factors may come in any order and
    /// coefficients are field-element literals.
    pub fn parse(text: &str, field: &Field) -> Result<SeriesPoly, RootError> {
        let mut by_deg: BTreeMap<usize, BTreeMap<ExpQ, FqElem>> = BTreeMap::new();
        for (pos, sign, term) in split_terms(text)? {
            let (c, e, k) = parse_term(term, pos, field)?;
            let c = if sign { c.neg_ref() } else { c };
            let m = by_deg.entry(k).or_default();
            let v = m.remove(&e).unwrap_or_else(|| field.zero()).add_ref(&c);
            m.insert(e, v);
        }
        let deg = by_deg.keys().last().copied().unwrap_or(0);
        let coeffs = (0..=deg)
            .map(|k| {
                let terms = by_deg.remove(&k).unwrap_or_default().into_iter().collect();
                Series::from_terms(field, terms)
            })
            .collect::<Result<Vec<_>, _>>()?;
        SeriesPoly::new(field, coeffs)
    }

    /// Canonical text, or `None` when some coefficient is not finite.
    pub fn to_text(&self) -> Option<String> {
        let mut terms = Vec::new();
        for (k, a) in self.coeffs.iter().enumerate().rev() {
            for (e, c) in a.finite_terms()? {
                terms.push(term_text(c, e, k));
            }
        }
        Some(if terms.is_empty() { "0".into() } else { terms.join(" + ") })
    }
}

fn term_text(c: &FqElem, e: &ExpQ, k: usize) -> String {
    let mut factors = Vec::new();
    let bare = !e.is_zero() || k > 0;
    if !(c.is_one() && bare) {
        factors.push(if c.is_compound() { format!("({c})") } else { c.to_string() });
    }
    if !e.is_zero() {
        factors.push(if e.is_integer() { format!("t^{e}") } else { format!("t^({e})") });
    }
    match k {
        0 => {}
        1 => factors.push("x".into()),
        k => factors.push(format!("x^{k}")),
    }
    factors.join("*")
}

/// Parses a finite sum of terms `c*t^(e)`.
pub fn parse_laurent(text: &str, field: &Field) -> Result<Series, RootError> {
    let mut m: BTreeMap<ExpQ, FqElem> = BTreeMap::new();
    for (pos, sign, term) in split_terms(text)? {
        let (c, e, k) = parse_term(term, pos, field)?;
        if k > 0 {
            return Err(RootError::Syntax { pos, msg: format!("`x` in a series literal `{}`", term.trim()) });
        }
        let c = if sign { c.neg_ref() } else { c };
        let v = m.remove(&e).unwrap_or_else(|| field.zero()).add_ref(&c);
        m.insert(e, v);
    }
    Ok(Series::from_terms(field, m.into_iter().collect())?)
}

/// Canonical text of a finite series, `None` for oracles.
pub fn laurent_text(x: &Series) -> Option<String> {
    let terms: Vec<String> = x.finite_terms()?.iter().map(|(e, c)| term_text(c, e, 0)).collect();
    Some(if terms.is_empty() { "0".into() } else { terms.join(" + ") })
}

impl PartialEq for SeriesPoly {
    /// Equality of finite coefficients; oracle coefficients never compare
    /// equal.
    fn eq(&self, other: &SeriesPoly) -> bool {
        self.field == other.field
            && self.coeffs.len() == other.coeffs.len()
            && self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .all(|(a, b)| matches!((a.finite_terms(), b.finite_terms()), (Some(x), Some(y)) if x == y))
    }
}

impl fmt::Display for SeriesPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_text() {
            Some(t) => f.write_str(&t),
            None => write!(f, "<polynomial of degree {} with series coefficients>", self.degree()),
        }
    }
}

impl fmt::Debug for SeriesPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SeriesPoly({self})")
    }
}

/// Terms with their byte offset and whether they are subtracted.
fn split_terms(text: &str) -> Result<Vec<(usize, bool, &str)>, RootError> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let mut neg = false;
    let bytes = text.as_bytes();
    let mut prev: Option<u8> = None;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(RootError::Syntax { pos: i, msg: "unbalanced `)`".into() });
                }
            }
            '+' | '-' if depth == 0 && prev != Some(b'^') => {
                let t = &text[start..i];
                if !t.trim().is_empty() {
                    out.push((start, neg, t));
                } else if !out.is_empty() || ch == '+' {
                    return Err(RootError::Syntax { pos: i, msg: "missing term".into() });
                }
                neg = ch == '-';
                start = i + 1;
            }
            _ => {}
        }
        if !ch.is_whitespace() {
            prev = Some(bytes[i]);
        }
    }
    if depth != 0 {
        return Err(RootError::Syntax { pos: text.len(), msg: "unbalanced `(`".into() });
    }
    let t = &text[start..];
    if t.trim().is_empty() {
        return Err(RootError::Syntax { pos: text.len(), msg: "missing term".into() });
    }
    out.push((start, neg, t));
    Ok(out)
}

fn parse_term(term: &str, pos: usize, field: &Field) -> Result<(FqElem, ExpQ, usize), RootError> {
    let syntax = |msg: String| RootError::Syntax { pos, msg };
    let mut c = field.one();
    let mut e = ExpQ::zero();
    let mut k = 0usize;
    let mut depth = 0;
    let mut pieces = Vec::new();
    let mut last = 0;
    for (i, ch) in term.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            '*' if depth == 0 => {
                pieces.push(&term[last..i]);
                last = i + 1;
            }
            '/' if depth == 0 => return Err(syntax(format!("division outside parentheses in `{}`", term.trim()))),
            _ => {}
        }
    }
    pieces.push(&term[last..]);
    for piece in pieces {
        let piece: String = piece.chars().filter(|c| !c.is_whitespace()).collect();
        if piece.is_empty() {
            return Err(syntax(format!("empty factor in `{}`", term.trim())));
        }
        if let Some(rest) = piece.strip_prefix('x') {
            k += match rest.strip_prefix('^') {
                None if rest.is_empty() => 1,
                Some(n) => n.parse::<usize>().map_err(|_| syntax(format!("bad power of x `{piece}`")))?,
                None => return Err(syntax(format!("bad factor `{piece}`"))),
            };
        } else if let Some(rest) = piece.strip_prefix('t') {
            let ex = match rest.strip_prefix('^') {
                None if rest.is_empty() => ExpQ::int(1),
                Some(s) => s.parse::<ExpQ>().map_err(|_| syntax(format!("bad exponent `{s}`")))?,
                None => return Err(syntax(format!("bad factor `{piece}`"))),
            };
            e = e.add(&ex);
        } else {
            let v = field.parse_elem(&piece).map_err(|_| syntax(format!("bad coefficient `{piece}`")))?;
            c = c.mul_ref(&v);
        }
    }
    Ok((c, e, k))
}

/// Value of a Newton-polygon point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointVal {
    Exact(ExpQ),
    /// nothing nonzero in the search window
    AtLeast { r: ExpQ, depth: u32 },
    /// structurally zero coefficient
    Zero,
}

/// Hull edge from `(start, start_val)` to `(end, end_val)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub start_val: ExpQ,
    pub end_val: ExpQ,
    pub slope: ExpQ,
    /// valuation of the `end - start` roots on this edge, `-slope`
    pub valuation: ExpQ,
}

impl Segment {
    pub fn length(&self) -> usize {
        self.end - self.start
    }

    fn height_at(&self, i: usize) -> ExpQ {
        self.start_val.add(&self.slope.mul_int((i - self.start) as i128))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NewtonPolygon {
    pub points: Vec<(usize, PointVal)>,
    pub hull: Vec<(usize, ExpQ)>,
    /// ascending slopes, i.e. descending root valuations
    pub segments: Vec<Segment>,
}

impl NewtonPolygon {
    /// Number of leading coefficients without a found valuation: the
    /// multiplicity of 0 as a root on the search window.
    pub fn vanishing_order(&self) -> usize {
        self.hull.first().map_or(0, |h| h.0)
    }
}

/// Lower convex hull of `(i, val(a_i))`.
///
/// Valuations are looked up on the window `(r, depth)`. Leading
/// coefficients with nothing in the window count as vanishing; any other
/// coefficient without a found valuation must provably lie on or above the
/// hull, otherwise the polygon is not resolved.
pub fn newton_polygon(poly: &SeriesPoly, r: &ExpQ, depth: u32) -> Result<NewtonPolygon, RootError> {
    let points: Vec<(usize, PointVal)> = poly
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let v = if structural_zero(a) {
                PointVal::Zero
            } else {
                match a.valuation(r, depth) {
                    Valuation::Found(e) => PointVal::Exact(e),
                    Valuation::AtLeast { r, depth } => PointVal::AtLeast { r, depth },
                }
            };
            (i, v)
        })
        .collect();
    let found: Vec<(usize, ExpQ)> = points
        .iter()
        .filter_map(|(i, v)| match v {
            PointVal::Exact(e) => Some((*i, e.clone())),
            _ => None,
        })
        .collect();
    let d = poly.degree();
    if found.last().map(|f| f.0) != Some(d) {
        return Err(RootError::UnresolvedValuation { index: d, r: r.clone(), depth });
    }
    let mut hull: Vec<(usize, ExpQ)> = Vec::new();
    for pt in found {
        while hull.len() >= 2 {
            let (i1, v1) = &hull[hull.len() - 2];
            let (i2, v2) = &hull[hull.len() - 1];
            // drop the middle point unless the slope strictly increases
            let left = v2.sub(v1).mul_int((pt.0 - i2) as i128);
            let right = pt.1.sub(v2).mul_int((i2 - i1) as i128);
            if left >= right {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let segments: Vec<Segment> = hull
        .windows(2)
        .map(|w| {
            let slope = w[1].1.sub(&w[0].1).div_int((w[1].0 - w[0].0) as i128);
            Segment {
                start: w[0].0,
                end: w[1].0,
                start_val: w[0].1.clone(),
                end_val: w[1].1.clone(),
                valuation: slope.neg(),
                slope,
            }
        })
        .collect();
    let first = hull[0].0;
    for (i, v) in &points {
        if let PointVal::AtLeast { r: lower, .. } = v {
            if *i < first {
                continue;
            }
            let seg = segments.iter().find(|s| s.start <= *i && *i <= s.end).unwrap();
            if *lower < seg.height_at(*i) {
                return Err(RootError::UnresolvedValuation { index: *i, r: r.clone(), depth });
            }
        }
    }
    Ok(NewtonPolygon { points, hull, segments })
}

/// `sum_i coeff(a_i, on the edge) c^(i - start)`; its nonzero roots are the
/// leading coefficients of the roots of valuation `seg.valuation`.
pub fn residual_poly(poly: &SeriesPoly, seg: &Segment) -> FqPoly {
    let coeffs = (seg.start..=seg.end)
        .map(|i| poly.coeffs[i].coeff(&seg.height_at(i)))
        .collect();
    FqPoly::new(&poly.field, coeffs)
}

/// `P(x + s)`.
pub fn translate(poly: &SeriesPoly, s: &Series) -> SeriesPoly {
    if structural_zero(s) {
        return poly.clone();
    }
    let p = poly.field.p() as usize;
    let d = poly.degree();
    let powers: Vec<Series> = (0..=d).map(|k| series_pow(s, k)).collect();
    let coeffs = (0..=d)
        .map(|i| {
            let mut acc = Series::zero(&poly.field);
            for j in i..=d {
                let b = binom_mod(j, i, p);
                if b == 0 || structural_zero(&poly.coeffs[j]) {
                    continue;
                }
                let term = poly.coeffs[j].mul(&powers[j - i]);
                acc = acc.add(&if b == 1 { term } else { term.scale(&poly.field.from_int(b as i64)) });
            }
            acc
        })
        .collect();
    SeriesPoly {
        field: poly.field.clone(),
        coeffs,
    }
}

/// `(Q, e)` with `P(x) = Q(x^{p^e})` and `e` maximal.
pub fn inseparable_reduce(poly: &SeriesPoly) -> (SeriesPoly, u32) {
    let p = poly.field.p() as usize;
    let mut step = 1usize;
    let mut e = 0;
    loop {
        let next = step * p;
        let ok = poly
            .coeffs
            .iter()
            .enumerate()
            .all(|(i, a)| i % next == 0 || structural_zero(a));
        if !ok || poly.degree() % next != 0 {
            break;
        }
        step = next;
        e += 1;
    }
    let coeffs = poly.coeffs.iter().step_by(step).cloned().collect();
    (
        SeriesPoly {
            field: poly.field.clone(),
            coeffs,
        },
        e,
    )
}

/// Window, period bounds and budgets for a root expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootJob {
    pub r: ExpQ,
    pub depth: u32,
    pub period: PeriodCert,
    /// total branch steps
    pub budget: usize,
    /// skip branches whose residual roots are outside the field instead of
    /// failing
    pub drop_unsplit: bool,
}

impl Default for RootJob {
    fn default() -> RootJob {
        RootJob {
            r: ExpQ::int(2),
            depth: 10,
            period: PeriodCert { m: 4, n: 4 },
            budget: 10_000,
            drop_unsplit: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RootStatus {
    ExactPeriodic,
    WindowOnly { r: ExpQ, depth: u32 },
}

/// Nonzero coefficients of `P(x)` on a window; empty means verified there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub r: ExpQ,
    pub depth: u32,
    pub nonzero: Vec<(ExpQ, FqElem)>,
}

impl VerifyReport {
    pub fn is_empty(&self) -> bool {
        self.nonzero.is_empty()
    }
}

#[derive(Serialize)]
struct VerifyDump {
    r: String,
    depth: u32,
    nonzero: Vec<(String, String)>,
}

impl Serialize for VerifyReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        VerifyDump {
            r: self.r.to_string(),
            depth: self.depth,
            nonzero: self.nonzero.iter().map(|(e, c)| (e.to_string(), c.to_string())).collect(),
        }
        .serialize(s)
    }
}

/// Materializes `P(x)` on `(r, depth)`.
pub fn verify_root(poly: &SeriesPoly, x: &Series, r: &ExpQ, depth: u32) -> VerifyReport {
    VerifyReport {
        r: r.clone(),
        depth,
        nonzero: translate_window(poly, x, r, depth).coeffs[0].materialize(r, depth).terms,
    }
}

/// `P(x + s)` with finite coefficients that are exact on the window
/// `(r, depth)` and omit everything outside it.
pub fn translate_window(poly: &SeriesPoly, s: &Series, r: &ExpQ, depth: u32) -> SeriesPoly {
    let field = &poly.field;
    let p = field.p();
    let live: Vec<(usize, &Series)> = poly.coeffs.iter().enumerate().filter(|(_, a)| !structural_zero(a)).collect();
    let cs = s.cert();
    let ls = series_floor(s).min(ExpQ::zero());

    // Terms of depth K can only cancel down to depth K - (mass - 1)/(p - 1),
    // where mass bounds the digit sum of one product term.
    let parts = |c: &SupportCert| ExpQ::new(1, c.a as i128).denom_parts(p);
    let big = live.iter().fold(parts(&cs).0, |l, (_, a)| l.lcm(&parts(&a.cert()).0));
    let twist = live.iter().map(|(_, a)| parts(&a.cert()).1).fold(parts(&cs).1, u32::max);
    let mass = |c: &SupportCert| c.c as i128 * (big / parts(c).0);
    let dpad = live
        .iter()
        .map(|(j, a)| (mass(&a.cert()) + *j as i128 * mass(&cs) - 1).max(0) / (p as i128 - 1))
        .max()
        .unwrap_or(0);
    let deep = depth + dpad as u32 + twist;

    let lowest = live
        .iter()
        .filter(|(j, _)| *j >= 1)
        .map(|(j, a)| series_floor(a).add(&ls.mul_int(*j as i128 - 1)))
        .min()
        .unwrap_or_else(ExpQ::zero);
    let finite = |x: &Series, cap: &ExpQ| Series::from_terms(field, x.materialize(cap, deep).terms).unwrap();
    let s_fin = finite(s, &r.sub(&lowest.min(ExpQ::zero())));
    let coeffs = poly
        .coeffs
        .iter()
        .enumerate()
        .map(|(j, a)| {
            if structural_zero(a) {
                a.clone()
            } else {
                finite(a, &r.sub(&ls.mul_int(j as i128)))
            }
        })
        .collect();
    let moved = translate(&SeriesPoly { field: field.clone(), coeffs }, &s_fin);
    SeriesPoly {
        field: field.clone(),
        coeffs: moved
            .coeffs
            .iter()
            .map(|c| Series::from_terms(field, c.materialize(r, depth).terms).unwrap())
            .collect(),
    }
}

/// Lowest exponent a series can have: its first term when finite, otherwise
/// the bottom of its certificate.
fn series_floor(x: &Series) -> ExpQ {
    match x.finite_terms() {
        Some(m) => m.keys().next().cloned().unwrap_or_else(ExpQ::zero),
        None => cert_floor(&x.cert(), x.p()),
    }
}

/// Lowest exponent of `S_{a,b,c}`: `n >= -b` and the digits take away at
/// most `c/p`.
fn cert_floor(cert: &SupportCert, p: u32) -> ExpQ {
    let (a, b, c, p) = (cert.a as i128, cert.b as i128, cert.c as i128, p as i128);
    ExpQ::new(-(b * p + c), a * p)
}

#[derive(Clone, Debug)]
pub struct RootResult {
    pub series: Series,
    /// twist-recurrent description when the root is `ExactPeriodic`
    pub tr: Option<TRSeries>,
    pub multiplicity: usize,
    pub status: RootStatus,
    /// `verify_root` on the job window
    pub verification: VerifyReport,
}

impl RootResult {
    pub fn period(&self) -> Option<PeriodCert> {
        self.tr.as_ref().map(|t| t.period())
    }
}

/// Smallest certificate with `a` prime to `p` holding the exponents.
fn guess_cert<'a>(exps: impl Iterator<Item = &'a ExpQ>, p: u32) -> SupportCert {
    let exps: Vec<&ExpQ> = exps.collect();
    let mut a = 1i128;
    for e in &exps {
        let (rest, _) = e.denom_parts(p);
        a = num_integer::lcm(a, rest);
    }
    let mut b = 0u64;
    let mut c = 0u32;
    for e in exps {
        let w = to_digits(e, a as u64, p).expect("p-free part divides a");
        b = b.max((-w.n).max(0) as u64);
        c = c.max(w.digit_sum());
    }
    SupportCert::new(a as u64, b, c)
}

/// A partial root: an optional periodic prediction plus finitely many terms.
#[derive(Clone, Debug)]
struct Partial {
    base: Option<Series>,
    extras: BTreeMap<ExpQ, FqElem>,
    extrapolations: usize,
}

impl Partial {
    fn empty() -> Partial {
        Partial {
            base: None,
            extras: BTreeMap::new(),
            extrapolations: 0,
        }
    }

    fn with(&self, mu: &ExpQ, c: &FqElem) -> Partial {
        let mut next = self.clone();
        let v = next.extras.remove(mu).map_or_else(|| c.clone(), |old| old.add_ref(c));
        next.extras.insert(mu.clone(), v);
        next
    }

    fn series(&self, field: &Field) -> Series {
        let extras = Series::from_terms(field, self.extras.clone().into_iter().collect()).unwrap();
        match &self.base {
            Some(z) => z.add(&extras).recertify(self.cert(field.p()), Provenance::RootExpansion),
            None => extras.recertify(self.cert(field.p()), Provenance::RootExpansion),
        }
    }

    fn cert(&self, p: u32) -> SupportCert {
        let g = guess_cert(self.extras.keys(), p);
        match &self.base {
            Some(z) => cert_add(&z.cert(), &g, p),
            None => g,
        }
    }
}

#[derive(Clone, Debug)]
enum Bound {
    None,
    Above(ExpQ),
    AtLeast(ExpQ),
}

impl Bound {
    fn admits(&self, mu: &ExpQ) -> bool {
        match self {
            Bound::None => true,
            Bound::Above(b) => mu > b,
            Bound::AtLeast(b) => mu >= b,
        }
    }
}

struct Expansion<'a> {
    top: SeriesPoly,
    job: &'a RootJob,
    /// Branches stop once the next term would be at or above this.
    target: ExpQ,
    steps: usize,
    found: Vec<(Partial, usize)>,
}

impl Expansion<'_> {
    fn search(&self) -> (ExpQ, u32) {
        (self.target.add(&ExpQ::int(MARGIN as i128)), self.job.depth + 2 * MARGIN)
    }

    fn node(&mut self, q: SeriesPoly, root: Partial, bound: Bound, _mult: usize) -> Result<(), RootError> {
        self.steps += 1;
        if self.steps > self.job.budget {
            return Err(RootError::BudgetExceeded { budget: self.job.budget });
        }
        let field = q.field.clone();
        let (sr, sd) = self.search();
        let poly = newton_polygon(&q, &sr, sd)?;
        let segs: Vec<Segment> = poly.segments.iter().filter(|s| bound.admits(&s.valuation)).cloned().collect();
        let here = poly.vanishing_order()
            + segs.iter().filter(|s| s.valuation >= self.target).map(|s| s.length()).sum::<usize>();
        if here > 0 {
            self.found.push((root.clone(), here));
        }
        let target = self.target.clone();
        for seg in segs.iter().filter(|s| s.valuation < target) {
            let res = residual_poly(&q, seg);
            let roots = poly_roots(&res);
            let split: usize = roots.iter().map(|(_, m)| m).sum();
            if split < seg.length() && !self.job.drop_unsplit {
                let m = split_extension_degree(&res).unwrap_or(0);
                return Err(RootError::FieldTooSmall {
                    p: field.p(),
                    required_degree: m * field.degree(),
                });
            }
            let mu = &seg.valuation;
            for (c, m) in roots {
                if mu.depth(field.p()) > self.job.depth + MARGIN {
                    self.extrapolate(&root, mu, &c, m)?;
                } else {
                    let q2 = translate(&q, &Series::monomial(&c, mu.clone()));
                    self.node(q2, root.with(mu, &c), Bound::Above(mu.clone()), m)?;
                }
            }
        }
        Ok(())
    }

    /// Replaces the partial root by its periodic continuation when the
    /// prediction is consistent with the known terms and with the count of
    /// roots left on the branch.
    fn extrapolate(&mut self, root: &Partial, mu: &ExpQ, c: &FqElem, m: usize) -> Result<(), RootError> {
        let field = self.top.field.clone();
        let p = field.p();
        let known = root.with(mu, c);
        if root.extrapolations >= MAX_EXTRAPOLATIONS {
            self.found.push((known, m));
            return Ok(());
        }
        let stream = root.series(&field);
        let cert = root.cert(p);
        let a = cert.a as i128;
        let bounds = DetectBounds {
            period_max: self.job.period.m,
            preperiod_max: self.job.period.n,
            index_hi: mu.mul_int(a).ceil(),
            samples: (self.job.depth + 2 * MARGIN + 2) as usize,
            known_below: Some(mu.clone()),
            zero_beyond: false,
        };
        let Ok(cand) = detect_tr(&stream, &bounds) else {
            self.found.push((known, m));
            return Ok(());
        };
        let boundary = match cand.unknown.first() {
            Some(b) if b > mu => b.clone(),
            _ => {
                self.found.push((known, m));
                return Ok(());
            }
        };
        let z = cand.series.to_series().truncate_below(&ExpBound::Finite(boundary.clone()));
        let below = ExpBound::Finite(mu.clone());
        let (_, sd) = self.search();
        let consistent = z.coeff(mu) == *c
            && window_equal(&z.truncate_below(&below), &stream.truncate_below(&below), mu, sd);
        if !consistent {
            self.found.push((known, m));
            return Ok(());
        }
        let (sr, sd) = self.search();
        // later steps translate by terms above the boundary, which can pull
        // coefficients down by at most D * max(0, -boundary)
        let slack = if boundary.is_negative() { boundary.neg() } else { ExpQ::zero() };
        let reach = sr.add(&slack.mul_int(self.top.degree() as i128));
        let q = translate_window(&self.top, &z, &reach, sd + MARGIN);
        let count = match newton_polygon(&q, &sr, sd) {
            Ok(poly) => {
                poly.vanishing_order()
                    + poly
                        .segments
                        .iter()
                        .filter(|s| s.valuation >= boundary)
                        .map(|s| s.length())
                        .sum::<usize>()
            }
            Err(_) => 0,
        };
        if count != m {
            self.found.push((known, m));
            return Ok(());
        }
        let next = Partial {
            base: Some(z),
            extras: BTreeMap::new(),
            extrapolations: root.extrapolations + 1,
        };
        self.node(q, next, Bound::AtLeast(boundary), m)
    }
}

/// Upgrades a root to `ExactPeriodic` when a twist-recurrent description
/// reproduces it and still verifies on a window larger than the job's.
fn finalize(poly: &SeriesPoly, series: Series, cert: SupportCert, multiplicity: usize, job: &RootJob) -> RootResult {
    let wider = job.r.add(&ExpQ::int(1));
    let deeper = job.depth + MARGIN;
    let series = series.recertify(cert, series.provenance());
    let a = cert.a as i128;
    let index_hi = wider.mul_int(a).ceil() + 2 * job.period.m as i128 + 2;
    let bounds = DetectBounds::new(job.period.m, job.period.n, index_hi, job.period.n + 2 * job.period.m + 2);
    // the prediction must keep verifying well past the sampled range
    let far = ExpQ::new(2 * (index_hi + 1), a).add(&ExpQ::int(1));
    let exact = detect_tr(&series, &bounds).ok().and_then(|cand| {
        let t = cand.series.to_series();
        if !window_equal(&t, &series, &wider, deeper) {
            return None;
        }
        verify_root(poly, &t, &far, deeper).is_empty().then_some((t, cand.series))
    });
    let (series, tr, status) = match exact {
        Some((t, tr)) => (t, Some(tr), RootStatus::ExactPeriodic),
        None => (
            series,
            None,
            RootStatus::WindowOnly {
                r: job.r.clone(),
                depth: job.depth,
            },
        ),
    };
    let verification = verify_root(poly, &series, &job.r, job.depth);
    RootResult {
        series,
        tr,
        multiplicity,
        status,
        verification,
    }
}

/// How far a root must be expanded for `P(x)` to vanish below `job.r`: the
/// leading coefficient and the other linear factors of `P` lower the
/// valuation of `P(x)` by at most `max(0, -v(a_D)) + (D - 1) max(0, -mu_min)`.
fn expansion_target(poly: &SeriesPoly, job: &RootJob) -> Result<ExpQ, RootError> {
    let (r, depth) = (job.r.add(&ExpQ::int(MARGIN as i128)), job.depth + 2 * MARGIN);
    let np = newton_polygon(poly, &r, depth)?;
    let lowest = np.segments.iter().map(|s| s.valuation.clone()).min().unwrap_or_else(ExpQ::zero);
    let lead = match poly.coeff(poly.degree()).valuation(&r, depth) {
        Valuation::Found(v) => v,
        Valuation::AtLeast { .. } => ExpQ::zero(),
    };
    let neg = |e: ExpQ| if e.is_negative() { e.neg() } else { ExpQ::zero() };
    let spread = neg(lowest).mul_int(poly.degree() as i128 - 1);
    Ok(job.r.add(&neg(lead)).add(&spread))
}

/// Depth-first Newton-polygon expansion of all roots.
pub fn expand_root(poly: &SeriesPoly, job: &RootJob) -> Result<Vec<RootResult>, RootError> {
    let mut ex = Expansion {
        top: poly.clone(),
        job,
        target: expansion_target(poly, job)?,
        steps: 0,
        found: Vec::new(),
    };
    ex.node(poly.clone(), Partial::empty(), Bound::None, poly.degree())?;
    let field = poly.field.clone();
    Ok(ex
        .found
        .into_iter()
        .map(|(part, m)| finalize(poly, part.series(&field), part.cert(field.p()), m, job))
        .collect())
}

/// Solves `u (x^p - x - y)` directly when `u` is a constant.
pub fn as_fast_path(poly: &SeriesPoly, job: &RootJob) -> Result<Option<Vec<RootResult>>, RootError> {
    let field = &poly.field;
    let p = field.p() as usize;
    if poly.degree() != p {
        return Ok(None);
    }
    let constant = |s: &Series| -> Option<FqElem> {
        let m = s.finite_terms()?;
        match m.iter().next() {
            Some((e, c)) if m.len() == 1 && e.is_zero() => Some(c.clone()),
            _ => None,
        }
    };
    let Some(u) = constant(&poly.coeffs[p]) else {
        return Ok(None);
    };
    if constant(&poly.coeffs[1]) != Some(u.neg_ref()) || !(2..p).all(|i| structural_zero(&poly.coeffs[i])) {
        return Ok(None);
    }
    let y = poly.coeffs[0].scale(&u.inv().unwrap().neg_ref());
    let sol = as_solve(&y).map_err(|e| match e {
        TwistError::FieldTooSmall { p, required_degree } => RootError::FieldTooSmall { p, required_degree },
        e => RootError::Twist(e),
    })?;
    Ok(Some(
        sol.all()
            .into_iter()
            .map(|x| {
                let cert = x.cert();
                finalize(poly, x, cert, 1, job)
            })
            .collect(),
    ))
}

/// All roots: the Artin-Schreier fast path when it applies, otherwise
/// inseparable reduction followed by [`expand_root`].
pub fn find_roots(poly: &SeriesPoly, job: &RootJob) -> Result<Vec<RootResult>, RootError> {
    if let Some(roots) = as_fast_path(poly, job)? {
        return Ok(roots);
    }
    let (q, e) = inseparable_reduce(poly);
    if e == 0 {
        return expand_root(poly, job);
    }
    let pe = (poly.field.p() as i128).pow(e);
    let inner = RootJob {
        r: if job.r.is_positive() { job.r.mul_int(pe) } else { job.r.clone() },
        ..job.clone()
    };
    Ok(find_roots(&q, &inner)?
        .into_iter()
        .map(|root| {
            let x = root.series.twist_down(e);
            let cert = x.cert();
            finalize(poly, x, cert, root.multiplicity * pe as usize, job)
        })
        .collect())
}

#[derive(Serialize)]
struct RootDump {
    terms: Vec<(String, String)>,
    cert: SupportCert,
    period: Option<PeriodCert>,
    multiplicity: usize,
    status: RootStatus,
    verification: VerifyReport,
}

/// Structured root report: window terms, certificate, period, multiplicity,
/// status and the verification window.
pub fn root_report<S: serde::Serializer>(root: &RootResult, s: S) -> Result<S::Ok, S::Error> {
    let w = root.series.materialize(&root.verification.r, root.verification.depth);
    RootDump {
        terms: w.terms.iter().map(|(e, c)| (e.to_string(), c.to_string())).collect(),
        cert: root.series.cert(),
        period: root.period(),
        multiplicity: root.multiplicity,
        status: root.status.clone(),
        verification: root.verification.clone(),
    }
    .serialize(s)
}

impl Serialize for RootResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        root_report(self, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(p: u64, d: u64) -> Field {
        Field::new(p, d).unwrap()
    }

    fn poly(text: &str, field: &Field) -> SeriesPoly {
        SeriesPoly::parse(text, field).unwrap()
    }

    fn q(n: i128, d: i128) -> ExpQ {
        ExpQ::new(n, d)
    }

    fn wide() -> (ExpQ, u32) {
        (ExpQ::int(4), 12)
    }

    #[test]
    fn parse_and_print() {
        let f4 = f(2, 2);
        for text in ["x^2 + x + t^-1", "(1+g)*t^(1/2)*x^3 + g*x + t^-2", "x + t^(-3/4)"] {
            let p = poly(text, &f4);
            let printed = p.to_text().unwrap();
            assert_eq!(poly(&printed, &f4), p, "{printed}");
        }
        assert_eq!(poly("x*t^-1*g + t", &f4).to_text().unwrap(), "g*t^-1*x + t^1");
        assert!(matches!(SeriesPoly::parse("x^2 + x/t", &f4), Err(RootError::Syntax { .. })));
        assert!(matches!(SeriesPoly::parse("x^2 + + t", &f4), Err(RootError::Syntax { .. })));
        assert!(matches!(SeriesPoly::parse("t + 1", &f4), Err(RootError::BadPolynomial(_))));
    }

    #[test]
    fn newton_examples() {
        let (r, d) = wide();
        let np = newton_polygon(&poly("x^2 - t", &f(3, 1)), &r, d).unwrap();
        assert_eq!(np.segments.len(), 1);
        assert_eq!((np.segments[0].start, np.segments[0].end), (0, 2));
        assert_eq!(np.segments[0].valuation, q(1, 2));

        let np = newton_polygon(&poly("x^2 + x + t^-1", &f(2, 1)), &r, d).unwrap();
        assert_eq!(np.hull, vec![(0, ExpQ::int(-1)), (2, ExpQ::zero())]);
        assert_eq!(np.segments[0].valuation, q(-1, 2));

        let np = newton_polygon(&poly("x - t", &f(2, 1)), &r, d).unwrap();
        assert_eq!(np.segments[0].valuation, ExpQ::int(1));

        // a leading coefficient beyond the window cannot be placed
        let err = newton_polygon(&poly("t^9*x^2 + 1", &f(2, 1)), &r, d).unwrap_err();
        assert!(matches!(err, RootError::UnresolvedValuation { index: 2, .. }));
    }

    #[test]
    fn residual_examples() {
        let (r, d) = wide();
        let f2 = f(2, 1);
        let p = poly("x^2 + x + t^-1", &f2);
        let seg = &newton_polygon(&p, &r, d).unwrap().segments[0];
        assert_eq!(residual_poly(&p, seg), FqPoly::new(&f2, vec![f2.one(), f2.zero(), f2.one()]));

        let f3 = f(3, 1);
        let p = poly("x^2 - t", &f3);
        let seg = &newton_polygon(&p, &r, d).unwrap().segments[0];
        let res = residual_poly(&p, seg);
        assert_eq!(res, FqPoly::new(&f3, vec![f3.from_int(-1), f3.zero(), f3.one()]));
        let roots: Vec<_> = poly_roots(&res).into_iter().map(|(c, _)| c).collect();
        assert_eq!(roots, vec![f3.one(), f3.from_int(2)]);

        let p = poly("x - t", &f3);
        let seg = &newton_polygon(&p, &r, d).unwrap().segments[0];
        assert_eq!(residual_poly(&p, seg), FqPoly::new(&f3, vec![f3.from_int(-1), f3.one()]));
    }

    #[test]
    fn translate_examples() {
        let f2 = f(2, 1);
        let p = poly("x^2 + x + t^-1", &f2);
        let s = Series::monomial(&f2.one(), q(-1, 2));
        assert_eq!(translate(&p, &s), poly("x^2 + x + t^(-1/2)", &f2));
        assert_eq!(translate(&p, &Series::zero(&f2)), p);
        let t = translate(&poly("x - t", &f2), &Series::monomial(&f2.one(), ExpQ::int(1)));
        assert!(t.coeff(0).finite_terms().unwrap().is_empty());
        assert_eq!(t.degree(), 1);
    }

    #[test]
    fn inseparable_examples() {
        for p in [2u64, 3] {
            let fp = f(p, 1);
            let (qq, e) = inseparable_reduce(&poly(&format!("x^{p} - t"), &fp));
            assert_eq!((qq, e), (poly("x - t", &fp), 1));
            let (qq, e) = inseparable_reduce(&poly(&format!("x^{} - t", p * p), &fp));
            assert_eq!((qq, e), (poly("x - t", &fp), 2));
        }
        let p = poly("x^2 + x + t^-1", &f(2, 1));
        assert_eq!(inseparable_reduce(&p), (p.clone(), 0));

        let roots = find_roots(&poly("x^2 - t", &f(2, 1)), &RootJob::default()).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].multiplicity, 2);
        assert_eq!(roots[0].series.materialize(&ExpQ::int(3), 6).terms, vec![(q(1, 2), f(2, 1).one())]);
    }

    fn chevalley_coeffs_ok(x: &Series, p: u32) -> bool {
        (1..=10).all(|e| x.coeff(&ExpQ::new(-1, (p as i128).pow(e))).is_one())
    }

    #[test]
    fn expansion_recovers_chevalley_roots() {
        for p in [2u64, 3] {
            let fp = f(p, 1);
            let pol = poly(&format!("x^{p} - x - t^-1"), &fp);
            let job = RootJob {
                depth: 12,
                ..RootJob::default()
            };
            let roots = expand_root(&pol, &job).unwrap();
            assert_eq!(roots.len(), p as usize);
            let mut constants = Vec::new();
            for r in &roots {
                assert_eq!(r.status, RootStatus::ExactPeriodic);
                assert_eq!(r.multiplicity, 1);
                assert_eq!(r.period(), Some(PeriodCert { m: 1, n: 0 }));
                assert!(r.verification.is_empty());
                assert!(chevalley_coeffs_ok(&r.series, p as u32));
                constants.push(r.series.coeff(&ExpQ::zero()));
            }
            constants.sort_by(|a, b| a.lex_cmp(b));
            assert_eq!(constants, fp.prime_elements().collect::<Vec<_>>());
        }
    }

    #[test]
    fn tame_roots() {
        let f3 = f(3, 1);
        let roots = expand_root(&poly("x^2 - t", &f3), &RootJob::default()).unwrap();
        let leading: Vec<_> = roots.iter().map(|r| r.series.coeff(&q(1, 2))).collect();
        assert_eq!(leading, vec![f3.one(), f3.from_int(2)]);
        for r in &roots {
            assert_eq!(r.status, RootStatus::ExactPeriodic);
            assert_eq!(r.series.materialize(&ExpQ::int(5), 4).terms.len(), 1);
        }

        let f4 = f(2, 2);
        let roots = expand_root(&poly("x^3 - t", &f4), &RootJob::default()).unwrap();
        assert_eq!(roots.len(), 3);
        for r in &roots {
            let terms = r.series.materialize(&ExpQ::int(5), 4).terms;
            assert_eq!(terms.len(), 1);
            assert_eq!(terms[0].0, q(1, 3));
            assert!(terms[0].1.pow(3).is_one());
        }
        assert!(matches!(
            expand_root(&poly("x^3 - t", &f(2, 1)), &RootJob::default()),
            Err(RootError::FieldTooSmall { p: 2, required_degree: 2 })
        ));
        let dropped = RootJob {
            drop_unsplit: true,
            ..RootJob::default()
        };
        assert_eq!(expand_root(&poly("x^3 - t", &f(2, 1)), &dropped).unwrap().len(), 1);
    }

    #[test]
    fn fast_path_examples() {
        let f2 = f(2, 1);
        let job = RootJob::default();
        let roots = as_fast_path(&poly("x^2 + x + t^-1", &f2), &job).unwrap().unwrap();
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().all(|r| chevalley_coeffs_ok(&r.series, 2) && r.status == RootStatus::ExactPeriodic));

        let roots = as_fast_path(&poly("x^2 + x + t", &f2), &job).unwrap().unwrap();
        let expect = Series::from_terms(&f2, [1, 2, 4, 8].iter().map(|&e| (ExpQ::int(e), f2.one())).collect()).unwrap();
        assert!(window_equal(&roots[0].series, &expect, &ExpQ::int(10), 2));
        assert!(roots[0].verification.is_empty());
        assert!(matches!(roots[0].status, RootStatus::WindowOnly { .. }));
        assert!(roots[1].series.coeff(&ExpQ::zero()).is_one());

        assert!(as_fast_path(&poly("x^2 - t", &f2), &job).unwrap().is_none());
        // a constant scaling is allowed
        let f3 = f(3, 1);
        assert!(as_fast_path(&poly("2*x^3 + x + t^-1", &f3), &job).unwrap().is_some());
    }

    #[test]
    fn fast_path_agrees_with_expansion() {
        for (p, text) in [(2u64, "x^2 + x + t^-1"), (3, "x^3 - x - t^-1"), (2, "x^2 + x + t^-3"), (3, "x^3 - x + t^-2")] {
            let fp = f(p, 1);
            let pol = poly(text, &fp);
            let job = RootJob {
                depth: 12,
                ..RootJob::default()
            };
            let fast = as_fast_path(&pol, &job).unwrap().unwrap();
            let slow = expand_root(&pol, &job).unwrap();
            assert_eq!(fast.len(), slow.len(), "{text}");
            for x in &fast {
                assert!(slow.iter().any(|y| window_equal(&x.series, &y.series, &job.r, job.depth)), "{text}");
            }
        }
    }

    #[test]
    fn verify_examples() {
        let f2 = f(2, 1);
        let x = as_solve(&Series::monomial(&f2.one(), ExpQ::int(-1))).unwrap().principal;
        assert!(verify_root(&poly("x^2 + x + t^-1", &f2), &x, &ExpQ::int(2), 10).is_empty());

        let f3 = f(3, 1);
        let half = Series::monomial(&f3.one(), q(1, 2));
        assert!(verify_root(&poly("x^2 - t", &f3), &half, &ExpQ::int(20), 8).is_empty());
        let rep = verify_root(&poly("x^2 - t", &f3), &Series::monomial(&f3.one(), ExpQ::int(1)), &ExpQ::int(3), 0);
        let exps: Vec<_> = rep.nonzero.iter().map(|(e, _)| e.clone()).collect();
        assert_eq!(exps, vec![ExpQ::int(1), ExpQ::int(2)]);
    }

    #[test]
    fn report_serializes() {
        let f3 = f(3, 1);
        let roots = find_roots(&poly("x^2 - t", &f3), &RootJob::default()).unwrap();
        let v = serde_json::to_value(&roots[0]).unwrap();
        assert_eq!(v["terms"][0][0], "1/2");
        assert_eq!(v["status"]["kind"], "exact-periodic");
        assert_eq!(v["multiplicity"], 1);
    }
}
