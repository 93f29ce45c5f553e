//! Additive polynomials and linearized recurrences
//! `d_0 c_n + d_1 c_{n+1}^p + ... + d_k c_{n+k}^{p^k} = 0`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ffield::{embed, Field, FieldError, FqElem, MAX_FIELD_ORDER};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LrrError {
    #[error("kernel needs an extension of degree {required_degree} over F_{p}")]
    FieldTooSmall { p: u32, required_degree: u32 },
    #[error("Moore system is singular")]
    SingularSystem,
    #[error("recurrence needs a nonzero constant coefficient")]
    ZeroConstantTerm,
    #[error("recurrence needs a nonzero leading coefficient")]
    ZeroLeadingTerm,
    #[error("need {need} initial terms, got {got}")]
    NotEnoughTerms { need: usize, got: usize },
    #[error("cannot parse recurrence `{0}`")]
    Parse(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Recurrence coefficients `d_0..d_k`, asserted for `n >= start`.
#[derive(Clone, PartialEq, Eq)]
pub struct LrrSpec {
    field: Field,
    coeffs: Vec<FqElem>,
    start: usize,
}

impl LrrSpec {
    pub fn new(coeffs: Vec<FqElem>, start: usize) -> Result<LrrSpec, LrrError> {
        let field = match coeffs.first() {
            Some(c) => c.field().clone(),
            None => return Err(LrrError::ZeroLeadingTerm),
        };
        if coeffs.iter().any(|c| *c.field() != field) {
            let other = coeffs.iter().find(|c| *c.field() != field).unwrap();
            return Err(FieldError::MixedFields(field.to_string(), other.field().to_string()).into());
        }
        if coeffs.last().unwrap().is_zero() {
            return Err(LrrError::ZeroLeadingTerm);
        }
        Ok(LrrSpec {
            field,
            coeffs,
            start,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn coeffs(&self) -> &[FqElem] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn with_start(&self, start: usize) -> LrrSpec {
        LrrSpec {
            start,
            ..self.clone()
        }
    }

    /// The same relation with coefficients in a larger field.
    pub fn embed(&self, target: &Field) -> Result<LrrSpec, LrrError> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| embed(c, target))
            .collect::<Result<_, _>>()?;
        Ok(LrrSpec {
            field: target.clone(),
            coeffs,
            start: self.start,
        })
    }

    /// Parses `[d_0,...,d_k]@N0`; the offset defaults to 0.
    pub fn parse(text: &str, field: &Field) -> Result<LrrSpec, LrrError> {
        let bad = || LrrError::Parse(text.to_string());
        let t = text.trim();
        let (body, start) = match t.rsplit_once('@') {
            Some((b, s)) => (b, s.trim().parse().map_err(|_| bad())?),
            None => (t, 0),
        };
        let body = body
            .trim()
            .strip_prefix('[')
            .and_then(|b| b.strip_suffix(']'))
            .ok_or_else(bad)?;
        let coeffs = split_top_level(body)
            .into_iter()
            .map(|s| field.parse_elem(s))
            .collect::<Result<Vec<_>, _>>()?;
        LrrSpec::new(coeffs, start)
    }
}

/// Splits on commas outside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut last = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[last..i]);
                last = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[last..]);
    out
}

impl fmt::Display for LrrSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            if c.is_compound() {
                write!(f, "({c})")?;
            } else {
                write!(f, "{c}")?;
            }
        }
        write!(f, "]@{}", self.start)
    }
}

impl fmt::Debug for LrrSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} over {}", self.field)
    }
}

/// Period `m` after a preperiod of `n` terms.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct PeriodCert {
    pub m: usize,
    pub n: usize,
}

impl fmt::Display for PeriodCert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.m, self.n)
    }
}

impl std::str::FromStr for PeriodCert {
    type Err = LrrError;
    fn from_str(s: &str) -> Result<PeriodCert, LrrError> {
        let bad = || LrrError::Parse(s.to_string());
        let (m, n) = s.split_once(',').ok_or_else(bad)?;
        let m: usize = m.trim().parse().map_err(|_| bad())?;
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        if m == 0 {
            return Err(bad());
        }
        Ok(PeriodCert { m, n })
    }
}

/// `sum d_i x^{p^i}`.
pub fn additive_eval(spec: &LrrSpec, x: &FqElem) -> FqElem {
    let mut acc = x.field().zero();
    let mut power = x.clone();
    for d in &spec.coeffs {
        acc = acc.add_ref(&d.mul_ref(&power));
        power = power.frobenius(1);
    }
    acc
}

fn kernel(spec: &LrrSpec) -> Vec<FqElem> {
    spec.field
        .elements()
        .filter(|x| additive_eval(spec, x).is_zero())
        .collect()
}

/// Greedy F_p-basis of a set of field elements.
fn fp_basis<'a>(elems: impl IntoIterator<Item = &'a FqElem>) -> Vec<FqElem> {
    let mut basis = Vec::new();
    let mut span: Vec<FqElem> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for e in elems {
        if span.is_empty() {
            span.push(e.field().zero());
            seen.insert(e.field().zero());
        }
        if seen.contains(e) {
            continue;
        }
        let p = e.field().p();
        let mut grown = Vec::with_capacity(span.len() * p as usize);
        for s in &span {
            let mut cur = s.clone();
            for _ in 0..p {
                grown.push(cur.clone());
                cur = cur.add_ref(e);
            }
        }
        seen.extend(grown.iter().cloned());
        span = grown;
        basis.push(e.clone());
    }
    basis
}

/// A basis of the roots of the additive polynomial inside `ambient`.
///
/// When the kernel does not fit, the error names the smallest field degree
/// over `F_p` that holds it, or 0 if that field is beyond the supported size.
pub fn kernel_basis(spec: &LrrSpec, ambient: &Field) -> Result<Vec<FqElem>, LrrError> {
    if spec.coeffs[0].is_zero() {
        return Err(LrrError::ZeroConstantTerm);
    }
    let k = spec.order();
    let local = spec.embed(ambient)?;
    let basis = fp_basis(kernel(&local).iter());
    if basis.len() == k {
        return Ok(basis);
    }
    let (p, d) = (ambient.p(), ambient.degree());
    let mut m = 2u32;
    loop {
        let order = (p as u128).checked_pow(d * m);
        if order.map_or(true, |o| o > MAX_FIELD_ORDER as u128) {
            return Err(LrrError::FieldTooSmall {
                p,
                required_degree: 0,
            });
        }
        let big = Field::new(p as u64, (d * m) as u64)?;
        if fp_basis(kernel(&local.embed(&big)?).iter()).len() == k {
            return Err(LrrError::FieldTooSmall {
                p,
                required_degree: d * m,
            });
        }
        m += 1;
    }
}

/// Determinant over the field by Gaussian elimination.
fn determinant(mut rows: Vec<Vec<FqElem>>, field: &Field) -> FqElem {
    let k = rows.len();
    let mut det = field.one();
    for col in 0..k {
        let pivot = match (col..k).find(|&r| !rows[r][col].is_zero()) {
            Some(r) => r,
            None => return field.zero(),
        };
        if pivot != col {
            rows.swap(pivot, col);
            det = det.neg_ref();
        }
        let pv = rows[col][col].clone();
        det = det.mul_ref(&pv);
        let inv = pv.inv().unwrap();
        for r in col + 1..k {
            let factor = rows[r][col].mul_ref(&inv);
            if factor.is_zero() {
                continue;
            }
            for c in col..k {
                let sub = factor.mul_ref(&rows[col][c]);
                rows[r][c] = rows[r][c].sub_ref(&sub);
            }
        }
    }
    det
}

fn moore_rows(z: &[FqElem]) -> Vec<Vec<FqElem>> {
    (0..z.len())
        .map(|i| z.iter().map(|x| x.frobenius(i as u32)).collect())
        .collect()
}

/// Determinant of `(z_j^{p^i})`; nonzero iff the `z_j` are F_p-independent.
pub fn moore_det(z: &[FqElem]) -> FqElem {
    match z.first() {
        None => panic!("moore_det of an empty list has no field"),
        Some(z0) => determinant(moore_rows(z), z0.field()),
    }
}

/// Solves `A x = rhs` or reports a singular matrix.
fn solve_linear(mut a: Vec<Vec<FqElem>>, mut rhs: Vec<FqElem>) -> Result<Vec<FqElem>, LrrError> {
    let k = a.len();
    for col in 0..k {
        let pivot = (col..k)
            .find(|&r| !a[r][col].is_zero())
            .ok_or(LrrError::SingularSystem)?;
        a.swap(pivot, col);
        rhs.swap(pivot, col);
        let inv = a[col][col].inv().unwrap();
        for c in col..k {
            a[col][c] = a[col][c].mul_ref(&inv);
        }
        rhs[col] = rhs[col].mul_ref(&inv);
        for r in 0..k {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in col..k {
                let sub = factor.mul_ref(&a[col][c]);
                a[r][c] = a[r][c].sub_ref(&sub);
            }
            let sub = factor.mul_ref(&rhs[col]);
            rhs[r] = rhs[r].sub_ref(&sub);
        }
    }
    Ok(rhs)
}

/// Scalars `λ` with `c_n = sum z_i λ_i^{1/p^n}` for `n < k`, from the Moore
/// system `c_n^{p^n} = sum z_i^{p^n} λ_i`.
pub fn solve_scalars(basis: &[FqElem], initial: &[FqElem]) -> Result<Vec<FqElem>, LrrError> {
    let k = basis.len();
    if initial.len() < k {
        return Err(LrrError::NotEnoughTerms {
            need: k,
            got: initial.len(),
        });
    }
    let rhs = (0..k).map(|n| initial[n].frobenius(n as u32)).collect();
    solve_linear(moore_rows(basis), rhs)
}

/// `sum z_i λ_i^{1/p^n}`.
pub fn closed_form(basis: &[FqElem], scalars: &[FqElem], n: u32) -> FqElem {
    let field = basis[0].field();
    basis
        .iter()
        .zip(scalars)
        .fold(field.zero(), |acc, (z, l)| acc.add_ref(&z.mul_ref(&l.pth_root(n))))
}

/// Terms `c_0..c_{count-1}` generated from the first `start + k` terms.
pub fn extend_terms(spec: &LrrSpec, initial: &[FqElem], count: usize) -> Result<Vec<FqElem>, LrrError> {
    let k = spec.order();
    let need = spec.start + k;
    if initial.len() < need.min(count) {
        return Err(LrrError::NotEnoughTerms {
            need,
            got: initial.len(),
        });
    }
    let mut out: Vec<FqElem> = initial.iter().take(count.max(need)).cloned().collect();
    let lead_inv = spec.coeffs[k].inv().unwrap().neg_ref();
    while out.len() < count {
        let n = out.len() - k;
        let mut acc = spec.field.zero();
        for i in 0..k {
            acc = acc.add_ref(&spec.coeffs[i].mul_ref(&out[n + i].frobenius(i as u32)));
        }
        out.push(lead_inv.mul_ref(&acc).pth_root(k as u32));
    }
    out.truncate(count);
    Ok(out)
}

/// The `n`-th term of the sequence determined by the initial terms.
pub fn extend_sequence(spec: &LrrSpec, initial: &[FqElem], n: usize) -> Result<FqElem, LrrError> {
    Ok(extend_terms(spec, initial, n + 1)?.pop().unwrap())
}

/// Whether the relation holds at every `n >= start` inside the given terms.
pub fn satisfies(spec: &LrrSpec, terms: &[FqElem]) -> bool {
    let k = spec.order();
    (spec.start..terms.len().saturating_sub(k)).all(|n| {
        let mut acc = spec.field.zero();
        for (i, d) in spec.coeffs.iter().enumerate() {
            acc = acc.add_ref(&d.mul_ref(&terms[n + i].frobenius(i as u32)));
        }
        acc.is_zero()
    })
}

/// The monic additive polynomial vanishing exactly on the F_p-span.
pub fn subspace_poly(vectors: &[FqElem], ambient: &Field) -> Result<LrrSpec, LrrError> {
    let p = ambient.p() as u64;
    let mut l = vec![ambient.one()];
    for v in vectors {
        let v = embed(v, ambient)?;
        let spec = LrrSpec::new(l.clone(), 0)?;
        let w = additive_eval(&spec, &v);
        if w.is_zero() {
            continue;
        }
        let w = w.pow(p - 1);
        let mut next = vec![ambient.zero(); l.len() + 1];
        for (i, c) in l.iter().enumerate() {
            next[i + 1] = next[i + 1].add_ref(&c.frobenius(1));
            next[i] = next[i].sub_ref(&w.mul_ref(c));
        }
        l = next;
    }
    LrrSpec::new(l, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineMode {
    Sum,
    Product,
}

/// A recurrence satisfied by termwise sums or products of solutions.
pub fn combine(
    a: &LrrSpec,
    b: &LrrSpec,
    mode: CombineMode,
    ambient: &Field,
) -> Result<LrrSpec, LrrError> {
    let za = kernel_basis(a, ambient)?;
    let zb = kernel_basis(b, ambient)?;
    let span: Vec<FqElem> = match mode {
        CombineMode::Sum => za.iter().chain(&zb).cloned().collect(),
        CombineMode::Product => za
            .iter()
            .flat_map(|x| zb.iter().map(move |y| x.mul_ref(y)))
            .collect(),
    };
    Ok(subspace_poly(&span, ambient)?.with_start(a.start.max(b.start)))
}

/// Recurrence for `{c_n}` given one for the differences `c_{n+1}^p - c_n`.
pub fn as_shift(spec: &LrrSpec) -> LrrSpec {
    let d = &spec.coeffs;
    let k = spec.order();
    let mut out = Vec::with_capacity(k + 2);
    out.push(d[0].neg_ref());
    for j in 1..=k {
        out.push(d[j - 1].sub_ref(&d[j]));
    }
    out.push(d[k].clone());
    LrrSpec::new(out, spec.start).expect("leading coefficient is d_k")
}

/// `c_{n+N} = c_{n+N+Md}^{p^{Md}}` over `F_{p^d}`.
pub fn period_to_lrr(cert: PeriodCert, field: &Field) -> LrrSpec {
    let len = cert.n + cert.m * field.degree() as usize + 1;
    let mut coeffs = vec![field.zero(); len];
    coeffs[cert.n] = field.one();
    coeffs[len - 1] = field.one().neg_ref();
    LrrSpec::new(coeffs, 0).unwrap()
}

/// A period found on a finite sample; only the sampled terms back it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SampledPeriod {
    pub cert: PeriodCert,
    pub samples: usize,
}

/// Least `(N, M)`, `N` first, with `c_{n+M} = c_n` on every sampled `n >= N`.
pub fn detect_period(terms: &[FqElem], m_max: usize, n_max: usize) -> Option<SampledPeriod> {
    for n in 0..=n_max {
        for m in 1..=m_max {
            if n + m >= terms.len() {
                break;
            }
            if (n..terms.len() - m).all(|i| terms[i + m] == terms[i]) {
                return Some(SampledPeriod {
                    cert: PeriodCert { m, n },
                    samples: terms.len(),
                });
            }
        }
    }
    None
}

/// Exact minimal period of the sequence generated by the recurrence.
pub fn lrr_to_period(spec: &LrrSpec, initial: &[FqElem]) -> Result<PeriodCert, LrrError> {
    let k = spec.order().max(1);
    let start = spec.start;
    let mut terms = extend_terms(spec, initial, start + k)?;
    let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
    let (first, again) = loop {
        let i = terms.len() - k;
        let state: Vec<u32> = terms[i..].iter().map(|c| c.code()).collect();
        if let Some(&j) = seen.get(&state) {
            break (j, i);
        }
        seen.insert(state, i);
        terms = extend_terms(spec, &terms, terms.len() + 1)?;
    };
    let m = minimal_tail_period(&terms, first, again - first);
    let mut n = first;
    while n > 0 && terms[n - 1] == terms[n - 1 + m] {
        n -= 1;
    }
    Ok(PeriodCert { m, n })
}

/// Least divisor `m` of `period` with `c_{i+m} = c_i` on one full cycle from `from`.
fn minimal_tail_period(terms: &[FqElem], from: usize, period: usize) -> usize {
    let at = |i: usize| &terms[from + (i - from) % period];
    (1..=period)
        .filter(|m| period % m == 0)
        .find(|&m| (from..from + period).all(|i| at(i + m) == at(i)))
        .unwrap_or(period)
}
