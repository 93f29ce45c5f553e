//! Twist-recurrent series over finite fields.
//!
//! A series supported on `S_{a,b,c}` is described by the functions
//! `f_m(z) = x_{(m+z)/a}` on `T_c ∪ {0}`, where `T_c` is the set of
//! `z = -sum b_i p^-i` in `(-1, 0)` with digit sum at most `c`. Over `F_q`
//! every tail sequence `f(prefix - p^-n tail)` of an algebraic series is
//! eventually periodic, so a function is pinned down by its values on the
//! canonical digit words: words whose zero runs are all shorter than `N+M`.
//! Longer runs collapse by multiples of `M`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_integer::Integer;
use serde::Serialize;
use thiserror::Error;

use crate::exponents::{
    cert_add, cert_contains, cert_twist_down, digit_sum, digits_value, to_digits, Digits, ExpQ,
    SupportCert,
};
use crate::ffield::{embed, poly_roots, root_extension_degree, Field, FieldError, FqElem, FqPoly};
use crate::lrr::{detect_period, period_to_lrr, satisfies, LrrSpec, PeriodCert};
use crate::series::{window_equal, ExpBound, Provenance, Series};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TwistError {
    #[error("{0} is not in the domain of the coefficient function")]
    NotInDomain(String),
    #[error("inconsistent twist-recurrent data: {0}")]
    InconsistentDomain(String),
    #[error("recurrence fails on the tail sequence through {word}")]
    SpecMismatch { word: String },
    #[error("witness step at level {level} failed verification: {reason}")]
    PeriodUnverified { level: usize, reason: String },
    #[error("Artin-Schreier constant needs an extension of degree {required_degree} over F_{p}")]
    FieldTooSmall { p: u32, required_degree: u32 },
    #[error("no periodic structure within the bounds: {0}")]
    NotFound(String),
    #[error("cannot parse twist-recurrent series: {0}")]
    Parse(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Digit values and zero-run lengths of a word; `runs[0]` is the run before
/// the first digit and `runs[i]` the gap before digit `i`.
fn word_runs(word: &[(u32, u32)]) -> (Vec<u32>, Vec<u32>) {
    let mut prev = 0;
    let mut vals = Vec::with_capacity(word.len());
    let mut runs = Vec::with_capacity(word.len());
    for &(pos, b) in word {
        runs.push(pos - prev - 1);
        vals.push(b);
        prev = pos;
    }
    (vals, runs)
}

fn word_from_runs(vals: &[u32], runs: &[u32]) -> Digits {
    let mut pos = 0;
    vals.iter()
        .zip(runs)
        .map(|(&b, &r)| {
            pos += r + 1;
            (pos, b)
        })
        .collect()
}

fn collapse_run(r: u32, period: PeriodCert) -> u32 {
    let (m, n) = (period.m as u32, period.n as u32);
    if r >= n + m {
        n + (r - n) % m
    } else {
        r
    }
}

/// Collapses every zero run of length `>= N+M` into `[N, N+M)`.
pub fn canonicalize(word: &[(u32, u32)], period: PeriodCert) -> Digits {
    let (vals, runs) = word_runs(word);
    let runs: Vec<u32> = runs.into_iter().map(|r| collapse_run(r, period)).collect();
    word_from_runs(&vals, &runs)
}

/// Digit values with sum at most `c` together with all run vectors whose
/// entries are below `run_bound`.
fn skeletons(p: u32, c: u32, run_bound: u32) -> Vec<(Vec<u32>, Vec<u32>)> {
    fn values(p: u32, budget: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        out.push(cur.clone());
        for b in 1..p.min(budget + 1) {
            cur.push(b);
            values(p, budget - b, cur, out);
            cur.pop();
        }
    }
    fn runs(k: usize, bound: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for r in 0..bound {
            cur.push(r);
            runs(k, bound, cur, out);
            cur.pop();
        }
    }
    let mut vals = Vec::new();
    values(p, c, &mut Vec::new(), &mut vals);
    let mut out = Vec::new();
    for v in vals {
        let mut rs = Vec::new();
        runs(v.len(), run_bound, &mut Vec::new(), &mut rs);
        for r in rs {
            out.push((v.clone(), r));
        }
    }
    out
}

/// Every canonical word for the period, digit sum at most `c`.
pub fn canonical_words(p: u32, c: u32, period: PeriodCert) -> Vec<Digits> {
    let bound = (period.n + period.m) as u32;
    let mut words: Vec<Digits> = skeletons(p, c, bound)
        .into_iter()
        .map(|(v, r)| word_from_runs(&v, &r))
        .collect();
    words.sort();
    words
}

fn word_text(word: &[(u32, u32)]) -> String {
    let inner: Vec<String> = word.iter().map(|(p, b)| format!("{p}:{b}")).collect();
    format!("[{}]", inner.join(","))
}

fn elem_text(c: &FqElem) -> String {
    if c.is_compound() {
        format!("({c})")
    } else {
        c.to_string()
    }
}

/// A function on `T_c ∪ {0}` given by its values on canonical words.
#[derive(Clone, PartialEq, Eq)]
pub struct CoeffFunction {
    field: Field,
    c: u32,
    period: PeriodCert,
    /// nonzero values only
    table: BTreeMap<Digits, FqElem>,
}

impl CoeffFunction {
    /// Builds a function from canonical-word values; zero values are dropped.
    pub fn new(
        field: &Field,
        c: u32,
        period: PeriodCert,
        table: BTreeMap<Digits, FqElem>,
    ) -> Result<CoeffFunction, TwistError> {
        let p = field.p();
        for (w, v) in &table {
            field.check(v.field())?;
            let ok_digits = w.iter().all(|&(_, b)| b > 0 && b < p)
                && w.windows(2).all(|x| x[0].0 < x[1].0)
                && w.first().map_or(true, |&(pos, _)| pos >= 1);
            if !ok_digits || digit_sum(w) > c || canonicalize(w, period) != *w {
                return Err(TwistError::InconsistentDomain(format!(
                    "table key {} is not a canonical word for c={c}, period {period}",
                    word_text(w)
                )));
            }
        }
        let table = table.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        Ok(CoeffFunction {
            field: field.clone(),
            c,
            period,
            table,
        })
    }

    pub fn zero(field: &Field, c: u32, period: PeriodCert) -> CoeffFunction {
        CoeffFunction {
            field: field.clone(),
            c,
            period,
            table: BTreeMap::new(),
        }
    }

    pub fn period(&self) -> PeriodCert {
        self.period
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn table(&self) -> &BTreeMap<Digits, FqElem> {
        &self.table
    }

    pub fn is_zero(&self) -> bool {
        self.table.is_empty()
    }

    /// Value on a digit word of `-z`, which must have digit sum `<= c`.
    pub fn eval_word(&self, word: &[(u32, u32)]) -> FqElem {
        self.table
            .get(&canonicalize(word, self.period))
            .cloned()
            .unwrap_or_else(|| self.field.zero())
    }

    pub fn eval(&self, z: &ExpQ) -> Result<FqElem, TwistError> {
        let p = self.field.p();
        let w = to_digits(z, 1, p).map_err(|_| TwistError::NotInDomain(z.to_string()))?;
        if w.n != 0 || w.digit_sum() > self.c {
            return Err(TwistError::NotInDomain(z.to_string()));
        }
        Ok(self.eval_word(&w.digits))
    }

    /// The same function tabulated for a coarser period `(M', N')` with
    /// `M | M'` and `N <= N'`.
    pub fn with_period(&self, period: PeriodCert) -> CoeffFunction {
        assert!(period.m % self.period.m == 0 && period.n >= self.period.n);
        let table = canonical_words(self.field.p(), self.c, period)
            .into_iter()
            .filter_map(|w| {
                let v = self.eval_word(&w);
                (!v.is_zero()).then_some((w, v))
            })
            .collect();
        CoeffFunction {
            field: self.field.clone(),
            c: self.c,
            period,
            table,
        }
    }

    fn fmt_table(&self) -> String {
        let entries: Vec<String> = self
            .table
            .iter()
            .map(|(w, v)| format!("{}={}", word_text(w), elem_text(v)))
            .collect();
        format!("{{{}}}", entries.join(","))
    }
}

impl fmt::Debug for CoeffFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoeffFunction(c={}, period {}, {})", self.c, self.period, self.fmt_table())
    }
}

/// How `f_m` continues past the stored assignments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MTail {
    Zero,
    /// `f_m = f_{m-P}` beyond the stored range
    Periodic(usize),
}

/// Exact description of a twist-recurrent series over `F_q`.
#[derive(Clone, PartialEq, Eq)]
pub struct TRSeries {
    field: Field,
    cert: SupportCert,
    period: PeriodCert,
    funcs: Vec<CoeffFunction>,
    /// function index for `m = -b, -b+1, ...`; `None` is the zero function
    assign: Vec<Option<usize>>,
    tail: MTail,
}

/// Validated constructor for [`TRSeries`].
pub fn build_tr(
    field: &Field,
    cert: SupportCert,
    period: PeriodCert,
    funcs: Vec<CoeffFunction>,
    assign: Vec<Option<usize>>,
    tail: MTail,
) -> Result<TRSeries, TwistError> {
    let bad = |msg: String| Err(TwistError::InconsistentDomain(msg));
    for f in &funcs {
        field.check(&f.field)?;
        if f.c != cert.c {
            return bad(format!("function digit bound {} differs from c={}", f.c, cert.c));
        }
        if period.m % f.period.m != 0 || f.period.n > period.n {
            return bad(format!("function period {} is not compatible with {period}", f.period));
        }
    }
    if let Some(i) = assign.iter().flatten().find(|&&i| i >= funcs.len()) {
        return bad(format!("assignment refers to missing function {i}"));
    }
    if let MTail::Periodic(pp) = tail {
        if pp == 0 || pp > assign.len() {
            return bad(format!("periodic tail {pp} needs at least that many assignments"));
        }
    }
    let funcs = funcs.into_iter().map(|f| f.with_period(period)).collect();
    Ok(TRSeries {
        field: field.clone(),
        cert,
        period,
        funcs,
        assign,
        tail,
    })
}

impl TRSeries {
    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn cert(&self) -> SupportCert {
        self.cert
    }

    pub fn period(&self) -> PeriodCert {
        self.period
    }

    pub fn funcs(&self) -> &[CoeffFunction] {
        &self.funcs
    }

    pub fn assignments(&self) -> &[Option<usize>] {
        &self.assign
    }

    pub fn tail(&self) -> MTail {
        self.tail
    }

    /// The function `f_m`, or `None` when it is identically zero.
    pub fn func(&self, m: i128) -> Option<&CoeffFunction> {
        let i = m + self.cert.b as i128;
        if i < 0 {
            return None;
        }
        let len = self.assign.len() as i128;
        let idx = if i < len {
            self.assign[i as usize]
        } else {
            match self.tail {
                MTail::Zero => None,
                MTail::Periodic(pp) => {
                    let pp = pp as i128;
                    self.assign[(len - pp + (i - len) % pp) as usize]
                }
            }
        };
        idx.map(|j| &self.funcs[j])
    }

    pub fn coeff(&self, e: &ExpQ) -> FqElem {
        let p = self.field.p();
        match to_digits(e, self.cert.a, p) {
            Ok(w) if w.n >= -(self.cert.b as i128) && w.digit_sum() <= self.cert.c => self
                .func(w.n)
                .map_or_else(|| self.field.zero(), |f| f.eval_word(&w.digits)),
            _ => self.field.zero(),
        }
    }

    /// Coefficient oracle over the certificate.
    pub fn to_series(&self) -> Series {
        let tr = self.clone();
        Series::from_oracle(&self.field, self.cert, Provenance::TwistRecurrent, move |e| {
            tr.coeff(e)
        })
    }

    /// Dimension of the span of the `f_m`.
    pub fn basis_rank(&self) -> usize {
        express_in_basis(&self.func_vectors()).0.len()
    }

    fn func_vectors(&self) -> Vec<Vec<FqElem>> {
        let words = canonical_words(self.field.p(), self.cert.c, self.period);
        self.funcs
            .iter()
            .map(|f| words.iter().map(|w| f.eval_word(w)).collect())
            .collect()
    }

    /// The same data read with scale `a = 1`, i.e. the series `x(t^a)`.
    pub fn unscaled(&self) -> TRSeries {
        TRSeries {
            cert: SupportCert::new(1, self.cert.b, self.cert.c),
            ..self.clone()
        }
    }

    /// Text form, parsed back by [`TRSeries::parse`].
    pub fn to_text(&self) -> String {
        let funcs: Vec<String> = self.funcs.iter().map(|f| f.fmt_table()).collect();
        let assign: Vec<String> = self
            .assign
            .iter()
            .map(|a| a.map_or("-".to_string(), |i| i.to_string()))
            .collect();
        let tail = match self.tail {
            MTail::Zero => "zero".to_string(),
            MTail::Periodic(pp) => format!("periodic({pp})"),
        };
        format!(
            "tr a={} b={} c={} period={} tail={} funcs={} assign={}",
            self.cert.a,
            self.cert.b,
            self.cert.c,
            self.period,
            tail,
            if funcs.is_empty() { "-".to_string() } else { funcs.join("|") },
            if assign.is_empty() { "-".to_string() } else { assign.join(",") },
        )
    }

    pub fn parse(text: &str, field: &Field) -> Result<TRSeries, TwistError> {
        let bad = |m: &str| TwistError::Parse(format!("{m} in `{text}`"));
        let body = text.trim().strip_prefix("tr").ok_or_else(|| bad("missing `tr`"))?;
        let mut kv = HashMap::new();
        for tok in body.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(&format!("missing {k}")));
        let num = |k: &str| -> Result<u64, TwistError> {
            get(k)?.parse().map_err(|_| bad(&format!("bad {k}")))
        };
        let a = num("a")?;
        if a == 0 {
            return Err(bad("a must be positive"));
        }
        let cert = SupportCert::new(a, num("b")?, num("c")? as u32);
        let period: PeriodCert = get("period")?.parse().map_err(|_| bad("bad period"))?;
        let tail = match get("tail")? {
            "zero" => MTail::Zero,
            t => {
                let pp = t
                    .strip_prefix("periodic(")
                    .and_then(|s| s.strip_suffix(')'))
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("bad tail"))?;
                MTail::Periodic(pp)
            }
        };
        let mut funcs = Vec::new();
        let ftext = get("funcs")?;
        if ftext != "-" {
            for ft in ftext.split('|') {
                let inner = ft
                    .strip_prefix('{')
                    .and_then(|s| s.strip_suffix('}'))
                    .ok_or_else(|| bad("function table needs braces"))?;
                let mut table = BTreeMap::new();
                for entry in split_outside(inner, ',') {
                    if entry.trim().is_empty() {
                        continue;
                    }
                    let (w, v) = entry.split_once('=').ok_or_else(|| bad("entry needs ="))?;
                    let word = parse_word(w).ok_or_else(|| bad("bad digit word"))?;
                    table.insert(word, field.parse_elem(v)?);
                }
                funcs.push(CoeffFunction::new(field, cert.c, period, table)?);
            }
        }
        let mut assign = Vec::new();
        let atext = get("assign")?;
        if atext != "-" {
            for s in atext.split(',') {
                assign.push(match s {
                    "-" => None,
                    s => Some(s.parse().map_err(|_| bad("bad assignment"))?),
                });
            }
        }
        build_tr(field, cert, period, funcs, assign, tail)
    }
}

impl fmt::Debug for TRSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} over {}", self.to_text(), self.field)
    }
}

#[derive(Serialize)]
struct TrDump {
    field: String,
    cert: SupportCert,
    period: PeriodCert,
    tail: MTail,
    funcs: Vec<Vec<(String, String)>>,
    assign: Vec<Option<usize>>,
}

/// Structured form: certificate, period, tables and the m-assignment.
impl Serialize for TRSeries {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TrDump {
            field: format!("{}^{}", self.field.p(), self.field.degree()),
            cert: self.cert,
            period: self.period,
            tail: self.tail,
            funcs: self
                .funcs
                .iter()
                .map(|f| f.table.iter().map(|(w, v)| (word_text(w), v.to_string())).collect())
                .collect(),
            assign: self.assign.clone(),
        }
        .serialize(s)
    }
}

fn split_outside(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut last = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' | '(' | '{' => depth += 1,
            ']' | ')' | '}' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[last..i]);
                last = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[last..]);
    out
}

fn parse_word(s: &str) -> Option<Digits> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    inner
        .split(',')
        .map(|d| {
            let (p, b) = d.split_once(':')?;
            Some((p.trim().parse().ok()?, b.trim().parse().ok()?))
        })
        .collect()
}

/// Greedy basis of the vectors and the coordinates of every vector in it.
fn express_in_basis(vectors: &[Vec<FqElem>]) -> (Vec<usize>, Vec<Vec<FqElem>>) {
    // echelon rows: (reduced vector, pivot, combination of basis members)
    let mut rows: Vec<(Vec<FqElem>, usize, Vec<FqElem>)> = Vec::new();
    let mut basis = Vec::new();
    let mut coords = Vec::new();
    let Some(field) = vectors.iter().flatten().next().map(|c| c.field().clone()) else {
        return (Vec::new(), vec![Vec::new(); vectors.len()]);
    };
    for (idx, v) in vectors.iter().enumerate() {
        let mut v = v.clone();
        let mut comb: Vec<FqElem> = vec![field.zero(); basis.len()];
        for (row, pivot, rc) in &rows {
            if v[*pivot].is_zero() {
                continue;
            }
            let factor = v[*pivot].clone();
            for (x, y) in v.iter_mut().zip(row) {
                *x = x.sub_ref(&factor.mul_ref(y));
            }
            for (i, y) in rc.iter().enumerate() {
                comb[i] = comb[i].add_ref(&factor.mul_ref(y));
            }
        }
        match v.iter().position(|x| !x.is_zero()) {
            None => coords.push(comb),
            Some(pivot) => {
                // v_orig = comb·basis + v, so v = v_orig - comb·basis
                let inv = v[pivot].inv().unwrap();
                let row: Vec<FqElem> = v.iter().map(|x| x.mul_ref(&inv)).collect();
                let mut rc: Vec<FqElem> = comb.iter().map(|x| x.neg_ref().mul_ref(&inv)).collect();
                rc.push(inv.clone());
                for (_, _, c) in rows.iter_mut() {
                    c.push(field.zero());
                }
                basis.push(idx);
                let mut own = vec![field.zero(); basis.len()];
                own[basis.len() - 1] = field.one();
                coords.push(own);
                rows.push((row, pivot, rc));
            }
        }
    }
    let r = basis.len();
    for c in coords.iter_mut() {
        c.resize(r, field.zero());
    }
    (basis, coords)
}

/// Sampling limits for [`detect_tr`].
#[derive(Clone, Debug)]
pub struct DetectBounds {
    /// largest period `M` tried on each tail sequence
    pub period_max: usize,
    /// largest preperiod `N` tried
    pub preperiod_max: usize,
    /// largest integer part `m` sampled
    pub index_hi: i128,
    /// terms per tail sequence
    pub samples: usize,
    /// only coefficients strictly below this exponent are trusted
    pub known_below: Option<ExpQ>,
    /// `true` when `f_m = 0` is known for every `m > index_hi`
    pub zero_beyond: bool,
}

impl DetectBounds {
    pub fn new(period_max: usize, preperiod_max: usize, index_hi: i128, samples: usize) -> DetectBounds {
        DetectBounds {
            period_max,
            preperiod_max,
            index_hi,
            samples,
            known_below: None,
            zero_beyond: false,
        }
    }
}

/// Output of [`detect_tr`]: a candidate that only the sampled terms back.
#[derive(Clone, Debug)]
pub struct TrCandidate {
    pub series: TRSeries,
    /// exponents of table entries that lie at or above `known_below`; their
    /// values were not sampled and are recorded as zero
    pub unknown: Vec<ExpQ>,
}

impl TrCandidate {
    /// Checks the candidate against the source series on a window.
    pub fn verify(&self, x: &Series, r: &ExpQ, depth: u32) -> bool {
        window_equal(&self.series.to_series(), x, r, depth)
    }
}

/// Largest `D` with `a * p^D <= 2^120`, keeping sampled exponents well
/// inside `i128`.
fn depth_cap(a: u64, p: u32) -> u32 {
    let limit = 1i128 << 120;
    let mut v = a as i128;
    let mut d = 0;
    while v * (p as i128) <= limit {
        v *= p as i128;
        d += 1;
    }
    d
}

fn exponent_of(m: i128, word: &[(u32, u32)], a: u64, p: u32) -> ExpQ {
    ExpQ::int(m).sub(&digits_value(word, p)).div_int(a as i128)
}

/// Finds a twist-recurrent description of `x` from samples.
///
/// Every tail sequence through a word with runs below
/// `period_max + preperiod_max` is sampled for each `m` in
/// `[-b, index_hi]`; the uniform `(M, N)` is the lcm of the periods and the
/// largest preperiod found. The `m`-assignment ends in zeros, or in a
/// period of the assignment sequence when `zero_beyond` is not set.
pub fn detect_tr(x: &Series, bounds: &DetectBounds) -> Result<TrCandidate, TwistError> {
    let field = x.field().clone();
    let p = field.p();
    let cert = x.cert();
    let cap = depth_cap(cert.a, p);
    let trusted = |e: &ExpQ| bounds.known_below.as_ref().map_or(true, |kb| e < kb);
    let run_bound = (bounds.period_max + bounds.preperiod_max) as u32;
    let skel = skeletons(p, cert.c, run_bound);
    let need = bounds.preperiod_max + 2 * bounds.period_max;
    let lo = -(cert.b as i128);
    if bounds.index_hi < lo {
        return Err(TwistError::NotFound("empty index range".into()));
    }

    let mut period = PeriodCert { m: 1, n: 0 };
    let (mut short, mut long) = (0usize, 0usize);
    for m in lo..=bounds.index_hi {
        for (vals, runs) in &skel {
            for r in 0..runs.len() {
                if runs[r] != 0 {
                    continue;
                }
                let mut seq = Vec::new();
                let mut rs = runs.clone();
                for l in 0..bounds.samples as u32 {
                    rs[r] = l;
                    let w = word_from_runs(vals, &rs);
                    if w.last().map_or(0, |&(pos, _)| pos) > cap {
                        break;
                    }
                    let e = exponent_of(m, &w, cert.a, p);
                    if !trusted(&e) {
                        break;
                    }
                    seq.push(x.coeff(&e));
                }
                if seq.len() < need.max(1) {
                    if bounds.known_below.is_some() {
                        short += 1;
                        continue;
                    }
                    return Err(TwistError::NotFound(format!(
                        "tail sequence at m={m} through {} has only {} samples",
                        word_text(&word_from_runs(vals, runs)),
                        seq.len()
                    )));
                }
                long += 1;
                match detect_period(&seq, bounds.period_max, bounds.preperiod_max) {
                    Some(found) => {
                        period = PeriodCert {
                            m: period.m.lcm(&found.cert.m),
                            n: period.n.max(found.cert.n),
                        };
                    }
                    None => {
                        return Err(TwistError::NotFound(format!(
                            "tail sequence at m={m} through {} is not periodic within ({}, {})",
                            word_text(&word_from_runs(vals, runs)),
                            bounds.period_max,
                            bounds.preperiod_max
                        )))
                    }
                }
            }
        }
    }

    if short > 0 && long == 0 {
        return Err(TwistError::NotFound(format!(
            "no tail sequence below {} has {need} samples",
            bounds.known_below.as_ref().unwrap()
        )));
    }

    let words = canonical_words(p, cert.c, period);
    let mut unknown = Vec::new();
    let mut funcs: Vec<CoeffFunction> = Vec::new();
    let mut assign = Vec::new();
    for m in lo..=bounds.index_hi {
        let mut table = BTreeMap::new();
        for w in &words {
            let e = exponent_of(m, w, cert.a, p);
            if !trusted(&e) {
                unknown.push(e);
                continue;
            }
            let v = x.coeff(&e);
            if !v.is_zero() {
                table.insert(w.clone(), v);
            }
        }
        if table.is_empty() {
            assign.push(None);
            continue;
        }
        let f = CoeffFunction {
            field: field.clone(),
            c: cert.c,
            period,
            table,
        };
        let idx = match funcs.iter().position(|g| *g == f) {
            Some(i) => i,
            None => {
                funcs.push(f);
                funcs.len() - 1
            }
        };
        assign.push(Some(idx));
    }

    let last_nonzero = assign.iter().rposition(|a| a.is_some());
    let tail = if bounds.zero_beyond {
        MTail::Zero
    } else if bounds.known_below.is_some() {
        // a prediction: nothing is claimed from the next integer part on
        unknown.extend(words.iter().map(|w| exponent_of(bounds.index_hi + 1, w, cert.a, p)));
        MTail::Zero
    } else {
        let trailing = assign.len() - last_nonzero.map_or(0, |i| i + 1);
        if trailing >= 2 {
            MTail::Zero
        } else {
            let exact = assign.iter().map(|a| a.map_or(0, |i| i + 1)).collect::<Vec<_>>();
            match assignment_period(&exact, bounds.period_max) {
                Some(pp) => MTail::Periodic(pp),
                None => {
                    return Err(TwistError::NotFound(
                        "f_m neither vanishes nor repeats past the sampled range".into(),
                    ))
                }
            }
        }
    };
    if tail == MTail::Zero {
        assign.truncate(last_nonzero.map_or(0, |i| i + 1));
    }
    unknown.sort();
    unknown.dedup();
    let series = build_tr(&field, cert, period, funcs, assign, tail)?;
    Ok(TrCandidate { series, unknown })
}

/// Least `P <= max` such that the second half of the sequence is `P`-periodic
/// and spans at least two periods.
fn assignment_period(seq: &[usize], max: usize) -> Option<usize> {
    let half = seq.len() / 2;
    (1..=max).find(|&pp| {
        seq.len() - half >= 2 * pp && (half..seq.len() - pp).all(|i| seq[i] == seq[i + pp])
    })
}

/// `x = sum_j L_j g_j` with Laurent series `L_j` and `g_j` on `T_c ∪ {0}`.
pub fn decompose(x: &TRSeries) -> Result<Vec<(Series, TRSeries)>, TwistError> {
    if x.cert.a != 1 {
        return Err(TwistError::InconsistentDomain(format!(
            "decompose needs a = 1, got {}",
            x.cert
        )));
    }
    let field = &x.field;
    let (basis, coords) = express_in_basis(&x.func_vectors());
    let lo = -(x.cert.b as i128);
    let mut out = Vec::new();
    for (j, &bj) in basis.iter().enumerate() {
        let k_of = |idx: Option<usize>| idx.map_or_else(|| field.zero(), |i| coords[i][j].clone());
        let laurent = match x.tail {
            MTail::Zero => {
                let terms = x
                    .assign
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (ExpQ::int(lo + i as i128), k_of(*a)))
                    .collect();
                Series::from_terms(field, terms).expect("distinct integer exponents")
            }
            MTail::Periodic(_) => {
                let xs = x.clone();
                let cs = coords.clone();
                let f2 = field.clone();
                let lcert = SupportCert::new(1, x.cert.b, 0);
                Series::from_oracle(field, lcert, Provenance::Literal, move |e| {
                    let m = e.numer();
                    match xs.func(m) {
                        None => f2.zero(),
                        Some(f) => {
                            let i = xs.funcs.iter().position(|g| g == f).unwrap();
                            cs[i][j].clone()
                        }
                    }
                })
            }
        };
        let g = build_tr(
            field,
            SupportCert::new(1, 0, x.cert.c),
            x.period,
            vec![x.funcs[bj].clone()],
            vec![Some(0)],
            MTail::Zero,
        )?;
        out.push((laurent, g));
    }
    Ok(out)
}

/// The two certificates attached to a twist-operator image.
#[derive(Clone, Debug)]
pub struct TwistImage {
    /// `S_{p^k, p^k - 1, c - 1}`, exact when the recurrence holds
    pub tight: Series,
    /// the sum certificate `S_{p^k, p^k - 1, c}` with no cancellation used
    pub loose: Series,
    pub k: u32,
}

/// `y = sum_i d_i^{1/p^k} x^{1/p^{k-i}}` for `x` on `T_c ∪ {0}`.
///
/// The `p^k`-th roots of the coefficients turn the recurrence at the tail
/// through `p^k j` into the vanishing of `y_j` for every `j` of full digit
/// sum whose first `k` digits are zero. The recurrence is checked first on
/// every tail sequence of every canonical word.
pub fn twist_operator(x: &TRSeries, spec: &LrrSpec) -> Result<TwistImage, TwistError> {
    let field = x.field.clone();
    let p = field.p();
    if x.cert.a != 1 || x.cert.b != 0 || x.assign.len() > 1 || x.tail != MTail::Zero {
        return Err(TwistError::InconsistentDomain(format!(
            "twist operator needs a series on T_c, got {}",
            x.cert
        )));
    }
    let spec = if spec.field() == &field {
        spec.clone()
    } else {
        spec.embed(&field).map_err(|e| TwistError::InconsistentDomain(e.to_string()))?
    };
    let k = spec.order() as u32;
    let c = x.cert.c;
    let f0 = x.func(0).cloned().unwrap_or_else(|| CoeffFunction::zero(&field, c, x.period));
    check_tails(&f0, &spec)?;

    let loose = twist_sum(&x.to_series(), &spec);
    let pk = (p as u64).pow(k);
    let tight_cert = SupportCert::new(pk, pk - 1, c.saturating_sub(1));
    let tight = loose.recertify(tight_cert, Provenance::Twist);
    Ok(TwistImage { tight, loose, k })
}

/// `sum_i d_i^{1/p^k} x^{1/p^{k-i}}` with the plain sum certificate and no
/// check of the recurrence.
pub fn twist_sum(x: &Series, spec: &LrrSpec) -> Series {
    let field = x.field().clone();
    let p = field.p();
    let k = spec.order() as u32;
    let mut sum = Series::zero(&field);
    let mut cert = SupportCert::new(1, 0, 0);
    for (i, d) in spec.coeffs().iter().enumerate() {
        let s = k - i as u32;
        cert = cert_add(&cert, &cert_twist_down(&x.cert(), s, p), p);
        if !d.is_zero() {
            let d = embed(d, &field).expect("recurrence over a subfield");
            sum = sum.add(&x.twist_down(s).scale(&d.pth_root(k)));
        }
    }
    sum.recertify(cert, Provenance::Twist)
}

/// The recurrence on every tail sequence through a canonical word, for
/// enough `n` to cover one preperiod and period past the recurrence order.
fn check_tails(f: &CoeffFunction, spec: &LrrSpec) -> Result<(), TwistError> {
    let p = f.field.p();
    let period = f.period;
    let k = spec.order();
    let len = spec.start() + period.n + 2 * period.m + k + 1;
    for (vals, runs) in skeletons(p, f.c, (period.n + period.m) as u32) {
        for r in 0..runs.len() {
            if runs[r] != 0 {
                continue;
            }
            let mut rs = runs.clone();
            let seq: Vec<FqElem> = (0..len as u32)
                .map(|l| {
                    rs[r] = l;
                    f.eval_word(&word_from_runs(&vals, &rs))
                })
                .collect();
            if !satisfies(spec, &seq) {
                return Err(TwistError::SpecMismatch {
                    word: word_text(&word_from_runs(&vals, &runs)),
                });
            }
        }
    }
    Ok(())
}

/// One twist-operator application in an algebraicity witness.
#[derive(Clone, Debug)]
pub struct WitnessStep {
    /// nesting level, starting at 0
    pub level: usize,
    /// index of the basis piece at this level
    pub piece: usize,
    pub spec: LrrSpec,
    pub cert_in: SupportCert,
    pub cert_out: SupportCert,
    pub verified: bool,
}

/// Twist-operator steps lowering the digit bound to 0, together with the
/// Laurent-type series left at the bottom.
#[derive(Clone, Debug)]
pub struct Witness {
    pub steps: Vec<WitnessStep>,
    pub terminals: Vec<Series>,
}

impl Witness {
    pub fn verified(&self) -> bool {
        self.steps.iter().all(|s| s.verified)
    }
}

/// Window used to verify witness steps and extra sampling room for the
/// detection of each twisted image.
#[derive(Clone, Debug)]
pub struct WitnessOptions {
    pub r: ExpQ,
    pub depth: u32,
    pub period_max: usize,
}

impl Default for WitnessOptions {
    fn default() -> WitnessOptions {
        WitnessOptions {
            r: ExpQ::int(1),
            depth: 10,
            period_max: 8,
        }
    }
}

/// Builds the witness of algebraicity by induction on `c`.
///
/// Each level reads the series at scale 1, splits it into Laurent
/// multiples of functions on `T_c ∪ {0}`, applies the twist operator built
/// from the period, and checks the image against the uncancelled sum on the
/// window. The image is then re-detected with digit bound `c - 1`.
pub fn algebraicity_witness(x: &TRSeries, opts: &WitnessOptions) -> Result<Witness, TwistError> {
    let mut w = Witness {
        steps: Vec::new(),
        terminals: Vec::new(),
    };
    witness_level(x, 0, opts, &mut w)?;
    Ok(w)
}

fn witness_level(x: &TRSeries, level: usize, opts: &WitnessOptions, w: &mut Witness) -> Result<(), TwistError> {
    if x.cert.c == 0 {
        w.terminals.push(x.to_series());
        return Ok(());
    }
    let field = x.field.clone();
    let p = field.p();
    let fail = |reason: String| TwistError::PeriodUnverified { level, reason };
    let x1 = x.unscaled();
    for (piece, (_laurent, g)) in decompose(&x1)?.into_iter().enumerate() {
        let spec = period_to_lrr(g.period, &field);
        let img = twist_operator(&g, &spec)?;
        let mut verified = window_equal(&img.tight, &img.loose, &opts.r, opts.depth);
        let k = img.k;
        let pk = (p as i128).pow(k);
        // the image lives in (-1, 0], so its integer parts at scale p^k are <= 0
        let bounds = DetectBounds {
            period_max: opts.period_max.max(g.period.m * field.degree() as usize),
            preperiod_max: g.period.n + k as usize + 2,
            index_hi: 0,
            samples: 0,
            known_below: None,
            zero_beyond: true,
        };
        let bounds = DetectBounds {
            samples: bounds.preperiod_max + 2 * bounds.period_max + 2,
            ..bounds
        };
        let next = detect_tr(&img.tight, &bounds)
            .map_err(|e| fail(format!("image not recognized: {e}")))?;
        verified &= next.verify(&img.tight, &opts.r, opts.depth);
        w.steps.push(WitnessStep {
            level,
            piece,
            spec,
            cert_in: g.cert,
            cert_out: img.tight.cert(),
            verified,
        });
        if !verified {
            return Err(fail(format!("piece {piece} differs on window ({}, {})", opts.r, opts.depth)));
        }
        debug_assert_eq!(next.series.cert.a as i128, pk);
        witness_level(&next.series, level + 1, opts, w)?;
    }
    Ok(())
}

/// Solutions of `x^p - x = y`.
#[derive(Clone, Debug)]
pub struct AsSolution {
    /// `negative + constant + positive`
    pub principal: Series,
    /// `sum_{n>=1} (y^-)^{1/p^n}`, supported on `S_{a,b,b+c}`
    pub negative: Series,
    /// lexicographically least root of `X^p - X = y_0`
    pub constant: FqElem,
    /// `-sum_{n>=0} (y^+)^{p^n}`, supported on `S_{a,b,c}`
    pub positive: Series,
}

impl AsSolution {
    /// All `p` solutions: the principal one plus each constant in `F_p`.
    pub fn all(&self) -> Vec<Series> {
        let f = self.principal.field();
        f.prime_elements()
            .map(|k| self.principal.add(&Series::monomial(&k, ExpQ::zero())))
            .collect()
    }
}

/// Solves `x^p - x = y` termwise.
pub fn as_solve(y: &Series) -> Result<AsSolution, TwistError> {
    let field = y.field().clone();
    let p = field.p();
    let cert = y.cert();
    let (a, b, c) = (cert.a as i128, cert.b as i128, cert.c);

    // every element of S_{a,b,c} exceeds -(b+1)/a
    let floor = ExpQ::new(-(b + 1), a);
    let yn = y.clone();
    let f2 = field.clone();
    let negative = Series::from_oracle(
        &field,
        SupportCert::new(cert.a, cert.b, cert.b as u32 + c),
        Provenance::AsSolution,
        move |e| {
            let mut acc = f2.zero();
            if !e.is_negative() {
                return acc;
            }
            let mut n = 1u32;
            loop {
                let ep = e.scale_pow(p, n as i32);
                if ep <= floor {
                    break;
                }
                acc = acc.add_ref(&yn.coeff(&ep).pth_root(n));
                n += 1;
            }
            acc
        },
    );

    // positive elements of S_{a,b,c} are at least p^-c / a
    let least = ExpQ::new(1, a).scale_pow(p, -(c as i32));
    let yp = y.clone();
    let f3 = field.clone();
    let positive = Series::from_oracle(&field, cert, Provenance::AsSolution, move |e| {
        let mut acc = f3.zero();
        if !e.is_positive() {
            return acc;
        }
        let mut n = 0u32;
        loop {
            let ep = e.scale_pow(p, -(n as i32));
            if ep < least {
                break;
            }
            acc = acc.sub_ref(&yp.coeff(&ep).frobenius(n));
            n += 1;
        }
        acc
    });

    let y0 = y.coeff(&ExpQ::zero());
    let mut coeffs = vec![y0.neg_ref(), field.one().neg_ref()];
    coeffs.resize(p as usize, field.zero());
    coeffs.push(field.one());
    let poly = FqPoly::new(&field, coeffs);
    let constant = match poly_roots(&poly).into_iter().next() {
        Some((r, _)) => r,
        None => {
            let m = root_extension_degree(&poly).unwrap_or(0);
            return Err(TwistError::FieldTooSmall {
                p,
                required_degree: m * field.degree(),
            });
        }
    };
    let principal = negative
        .add(&positive)
        .add(&Series::monomial(&constant, ExpQ::zero()))
        .recertify(
            crate::exponents::cert_add(&negative.cert(), &cert, p),
            Provenance::AsSolution,
        );
    Ok(AsSolution {
        principal,
        negative,
        constant,
        positive,
    })
}

/// Embeds a twist-recurrent series into a larger coefficient field.
pub fn tr_embed(x: &TRSeries, target: &Field) -> Result<TRSeries, TwistError> {
    let funcs = x
        .funcs
        .iter()
        .map(|f| {
            let table = f
                .table
                .iter()
                .map(|(w, v)| Ok((w.clone(), embed(v, target)?)))
                .collect::<Result<BTreeMap<_, _>, FieldError>>()?;
            CoeffFunction::new(target, f.c, f.period, table)
        })
        .collect::<Result<Vec<_>, _>>()?;
    build_tr(target, x.cert, x.period, funcs, x.assign.clone(), x.tail)
}

/// Coefficient check used by tests and the CLI: does `e` lie in the
/// certificate of the series.
pub fn in_support_cert(x: &TRSeries, e: &ExpQ) -> bool {
    cert_contains(&x.cert, e, x.field.p())
}

/// Truncates the series description below `j` and re-detects it.
pub fn truncate_tr(x: &Series, j: &ExpQ, bounds: &DetectBounds) -> Result<TrCandidate, TwistError> {
    detect_tr(&x.truncate_below(&ExpBound::Finite(j.clone())), bounds)
}
