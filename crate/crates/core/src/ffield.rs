//! Finite fields `F_{p^d}` with table-driven arithmetic.
//!
//! Every `(p, d)` pair has exactly one representation: the modulus is the
//! lexicographically least monic irreducible polynomial of degree `d`, with
//! coefficients compared constant term first. Elements are stored as a packed
//! code `c_0 + c_1 p + ... + c_{d-1} p^{d-1}` of their coefficient vector over
//! the power basis `1, g, ..., g^{d-1}`, where `g` is the class of `x`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use parking_lot::Mutex;
use thiserror::Error;

/// Largest field order accepted by [`Field::new`].
pub const MAX_FIELD_ORDER: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("elements belong to different fields ({0} and {1})")]
    MixedFields(String, String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("F_{from} is not a subfield of F_{target}")]
    NotASubfield { from: String, target: String },
    #[error("unsupported field {p}^{d}: {reason}")]
    UnsupportedField { p: u64, d: u64, reason: String },
    #[error("field too small: roots need an extension of degree {required_degree} over F_{p}")]
    FieldTooSmall { p: u32, required_degree: u32 },
    #[error("cannot parse field element `{0}`")]
    BadLiteral(String),
}

/// Description of `F_{p^d}` together with its log/antilog tables.
pub struct FieldDesc {
    p: u32,
    d: u32,
    q: u32,
    modulus: Vec<u32>,
    exp: Vec<u32>,
    log: Vec<u32>,
}

impl FieldDesc {
    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.d
    }

    pub fn order(&self) -> u32 {
        self.q
    }

    /// Monic modulus, constant coefficient first (length `d + 1`).
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }
}

impl fmt::Debug for FieldDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", describe(self))
    }
}

fn describe(desc: &FieldDesc) -> String {
    let m: Vec<String> = desc.modulus.iter().map(|c| c.to_string()).collect();
    format!("{}^{}:{}", desc.p, desc.d, m.join(","))
}

/// Shared handle to a [`FieldDesc`]. Two handles compare equal when they
/// describe the same `(p, d)`; the canonical modulus makes that sound.
#[derive(Clone)]
pub struct Field(Arc<FieldDesc>);

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.p == other.0.p && self.0.d == other.0.d)
    }
}

impl Eq for Field {}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", describe(&self.0))
    }
}

impl fmt::Display for Field {
    /// `p^d:modulus-coeffs`, constant coefficient first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", describe(&self.0))
    }
}

impl std::ops::Deref for Field {
    type Target = FieldDesc;
    fn deref(&self) -> &FieldDesc {
        &self.0
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= n {
        if n % i == 0 {
            return false;
        }
        i += 1;
    }
    true
}

// --- dense polynomials over F_p, constant term first -----------------------

fn trim(mut v: Vec<u32>) -> Vec<u32> {
    while v.len() > 1 && *v.last().unwrap() == 0 {
        v.pop();
    }
    v
}

fn inv_mod(a: u32, p: u32) -> u32 {
    let mut r = 1u64;
    let mut b = a as u64 % p as u64;
    let mut e = p as u64 - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p as u64;
        }
        b = b * b % p as u64;
        e >>= 1;
    }
    r as u32
}

/// Remainder of `a` modulo a nonzero polynomial `m` over F_p.
fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let m = trim(m.to_vec());
    let dm = m.len() - 1;
    let lead_inv = inv_mod(m[dm], p) as u64;
    let mut r = a.to_vec();
    while r.len() > dm && !(r.len() == 1 && r[0] == 0) {
        let top = r.len() - 1;
        let c = r[top] as u64 * lead_inv % p as u64;
        if c != 0 {
            for (i, &mi) in m.iter().enumerate() {
                let idx = top - dm + i;
                r[idx] = ((r[idx] as u64 + (p as u64 - c) * mi as u64) % p as u64) as u32;
            }
        }
        r.pop();
        if r.is_empty() {
            r.push(0);
        }
    }
    trim(r)
}

fn is_irreducible(f: &[u32], p: u32) -> bool {
    let d = f.len() - 1;
    if d <= 1 {
        return d == 1;
    }
    // trial division by every monic polynomial of degree 1..=d/2
    for deg in 1..=d / 2 {
        let count = (p as u64).pow(deg as u32);
        for idx in 0..count {
            let mut g = vec![0u32; deg + 1];
            let mut t = idx;
            for gi in g.iter_mut().take(deg) {
                *gi = (t % p as u64) as u32;
                t /= p as u64;
            }
            g[deg] = 1;
            let r = poly_rem(f, &g, p);
            if r.len() == 1 && r[0] == 0 {
                return false;
            }
        }
    }
    true
}

/// Lexicographically least monic irreducible of degree `d` over F_p,
/// coefficients compared from the constant term upward.
fn canonical_modulus(p: u32, d: u32) -> Vec<u32> {
    let count = (p as u64).pow(d);
    for idx in 0..count {
        // most significant base-p digit of idx is c_0
        let mut coeffs = vec![0u32; d as usize + 1];
        let mut t = idx;
        for i in (0..d as usize).rev() {
            coeffs[i] = (t % p as u64) as u32;
            t /= p as u64;
        }
        coeffs[d as usize] = 1;
        if is_irreducible(&coeffs, p) {
            return coeffs;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

fn code_to_vec(code: u32, p: u32, d: u32) -> Vec<u32> {
    let mut v = Vec::with_capacity(d as usize);
    let mut c = code;
    for _ in 0..d {
        v.push(c % p);
        c /= p;
    }
    v
}

fn vec_to_code(v: &[u32], p: u32) -> u32 {
    v.iter().rev().fold(0u32, |acc, &c| acc * p + c)
}

fn slow_mul(a: u32, b: u32, p: u32, d: u32, modulus: &[u32]) -> u32 {
    let av = code_to_vec(a, p, d);
    let bv = code_to_vec(b, p, d);
    let mut prod = vec![0u32; 2 * d as usize];
    for (i, &x) in av.iter().enumerate() {
        for (j, &y) in bv.iter().enumerate() {
            prod[i + j] = ((prod[i + j] as u64 + x as u64 * y as u64) % p as u64) as u32;
        }
    }
    let mut r = poly_rem(&prod, modulus, p);
    r.resize(d as usize, 0);
    vec_to_code(&r, p)
}

impl Field {
    /// Builds `F_{p^d}` with its canonical modulus.
    pub fn new(p: u64, d: u64) -> Result<Field, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::UnsupportedField {
                p,
                d,
                reason: "characteristic is not prime".into(),
            });
        }
        if d == 0 {
            return Err(FieldError::UnsupportedField {
                p,
                d,
                reason: "degree must be positive".into(),
            });
        }
        let q = (p as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
        if q > MAX_FIELD_ORDER as u128 {
            return Err(FieldError::UnsupportedField {
                p,
                d,
                reason: format!("order exceeds {MAX_FIELD_ORDER}"),
            });
        }
        let (p, d, q) = (p as u32, d as u32, q as u32);
        if let Some(f) = FIELDS.lock().get(&(p, d)) {
            return Ok(f.clone());
        }
        let modulus = canonical_modulus(p, d);
        // primitive element: first code of multiplicative order q - 1
        let mut exp = Vec::with_capacity(q as usize - 1);
        'search: for cand in 1..q {
            exp.clear();
            let mut cur = 1u32;
            for i in 0..q - 1 {
                if i > 0 && cur == 1 {
                    continue 'search;
                }
                exp.push(cur);
                cur = slow_mul(cur, cand, p, d, &modulus);
            }
            if cur == 1 {
                break;
            }
        }
        let mut log = vec![0u32; q as usize];
        for (i, &e) in exp.iter().enumerate() {
            log[e as usize] = i as u32;
        }
        let field = Field(Arc::new(FieldDesc {
            p,
            d,
            q,
            modulus,
            exp,
            log,
        }));
        FIELDS.lock().insert((p, d), field.clone());
        Ok(field)
    }

    /// Parses `p^d` (or a bare prime `p`).
    pub fn parse(text: &str) -> Result<Field, FieldError> {
        let t = text.trim();
        let t = t.split(':').next().unwrap_or(t);
        let (p, d) = match t.split_once('^') {
            Some((a, b)) => (a.trim().parse::<u64>(), b.trim().parse::<u64>()),
            None => (t.parse::<u64>(), Ok(1)),
        };
        match (p, d) {
            (Ok(p), Ok(d)) => Field::new(p, d),
            _ => Err(FieldError::BadLiteral(text.to_string())),
        }
    }

    pub fn zero(&self) -> FqElem {
        self.from_code(0)
    }

    pub fn one(&self) -> FqElem {
        self.from_code(1)
    }

    /// The class of `x` modulo the field modulus (`0` for prime fields).
    pub fn generator(&self) -> FqElem {
        if self.d == 1 {
            // modulus is x, so the class of x is 0
            self.zero()
        } else {
            self.from_code(self.p)
        }
    }

    /// Image of an integer.
    pub fn from_int(&self, n: i64) -> FqElem {
        self.from_code(n.rem_euclid(self.p as i64) as u32)
    }

    pub fn from_code(&self, code: u32) -> FqElem {
        debug_assert!(code < self.q);
        FqElem {
            field: self.clone(),
            code,
        }
    }

    /// Element with the given power-basis coefficients; powers at or above
    /// `d` are reduced through the modulus.
    pub fn from_coeffs(&self, coeffs: &[i64]) -> FqElem {
        let g = self.generator();
        coeffs.iter().enumerate().fold(self.zero(), |acc, (i, &c)| {
            let basis = if i == 0 { self.one() } else { g.pow(i as u64) };
            &acc + &basis.scale(c)
        })
    }

    /// All elements, ordered by code.
    pub fn elements(&self) -> impl Iterator<Item = FqElem> + '_ {
        (0..self.q).map(move |c| self.from_code(c))
    }

    /// Elements of the prime subfield, `0..p`.
    pub fn prime_elements(&self) -> impl Iterator<Item = FqElem> + '_ {
        (0..self.p).map(move |c| self.from_code(c))
    }

    pub fn check(&self, other: &Field) -> Result<(), FieldError> {
        if self == other {
            Ok(())
        } else {
            Err(FieldError::MixedFields(self.to_string(), other.to_string()))
        }
    }

    /// Parses an element literal: an integer, or a sum of terms `c`, `c*g`,
    /// `g`, `c*g^k`, optionally wrapped in parentheses.
    pub fn parse_elem(&self, text: &str) -> Result<FqElem, FieldError> {
        let bad = || FieldError::BadLiteral(text.to_string());
        let mut s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        while s.starts_with('(') && s.ends_with(')') {
            s = s[1..s.len() - 1].to_string();
        }
        if s.is_empty() {
            return Err(bad());
        }
        let mut acc = self.zero();
        let mut rest = s.as_str();
        let mut sign = 1i64;
        if let Some(r) = rest.strip_prefix('-') {
            sign = -1;
            rest = r;
        }
        loop {
            let end = rest.find(['+', '-']).unwrap_or(rest.len());
            let term = &rest[..end];
            if term.is_empty() {
                return Err(bad());
            }
            let (coef, power) = match term.split_once('*') {
                Some((c, g)) => (c.parse::<i64>().map_err(|_| bad())?, parse_gen_power(g).ok_or_else(bad)?),
                None => match term.parse::<i64>() {
                    Ok(c) => (c, 0),
                    Err(_) => (1, parse_gen_power(term).ok_or_else(bad)?),
                },
            };
            let t = if power == 0 {
                self.from_int(coef * sign)
            } else if self.d == 1 {
                return Err(bad());
            } else {
                self.generator().pow(power).scale(coef * sign)
            };
            acc = acc.add_ref(&t);
            if end == rest.len() {
                break;
            }
            sign = if rest.as_bytes()[end] == b'-' { -1 } else { 1 };
            rest = &rest[end + 1..];
        }
        Ok(acc)
    }
}

fn parse_gen_power(s: &str) -> Option<u64> {
    if s == "g" {
        return Some(1);
    }
    s.strip_prefix("g^")?.parse::<u64>().ok()
}

/// Element of a finite field.
#[derive(Clone)]
pub struct FqElem {
    field: Field,
    code: u32,
}

impl PartialEq for FqElem {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code && self.field == other.field
    }
}

impl Eq for FqElem {}

impl std::hash::Hash for FqElem {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.field.p.hash(state);
        self.field.d.hash(state);
        self.code.hash(state);
    }
}

/// Arithmetic operation selector for [`fq_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FqOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Checked field arithmetic.
pub fn fq_arith(x: &FqElem, y: &FqElem, op: FqOp) -> Result<FqElem, FieldError> {
    x.field.check(&y.field)?;
    Ok(match op {
        FqOp::Add => x.add_ref(y),
        FqOp::Sub => x.sub_ref(y),
        FqOp::Mul => x.mul_ref(y),
        FqOp::Div => {
            if y.is_zero() {
                return Err(FieldError::DivisionByZero);
            }
            x.mul_ref(&y.inv().expect("nonzero"))
        }
    })
}

impl FqElem {
    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn code(&self) -> u32 {
        self.code
    }

    /// Power-basis coefficients `c_0..c_{d-1}`.
    pub fn coeffs(&self) -> Vec<u32> {
        code_to_vec(self.code, self.field.p, self.field.d)
    }

    pub fn is_zero(&self) -> bool {
        self.code == 0
    }

    pub fn is_one(&self) -> bool {
        self.code == 1
    }

    fn same(&self, other: &FqElem) {
        assert!(
            self.field == other.field,
            "mixed fields {} and {}",
            self.field,
            other.field
        );
    }

    pub fn add_ref(&self, other: &FqElem) -> FqElem {
        self.same(other);
        let p = self.field.p;
        let code = if p == 2 {
            self.code ^ other.code
        } else {
            let (mut a, mut b) = (self.code, other.code);
            let mut out = 0u32;
            let mut place = 1u32;
            while a > 0 || b > 0 {
                out += ((a % p + b % p) % p) * place;
                a /= p;
                b /= p;
                place = place.wrapping_mul(p);
            }
            out
        };
        self.field.from_code(code)
    }

    pub fn neg_ref(&self) -> FqElem {
        let p = self.field.p;
        if p == 2 {
            return self.clone();
        }
        let mut a = self.code;
        let mut out = 0u32;
        let mut place = 1u32;
        while a > 0 {
            out += ((p - a % p) % p) * place;
            a /= p;
            place = place.wrapping_mul(p);
        }
        self.field.from_code(out)
    }

    pub fn sub_ref(&self, other: &FqElem) -> FqElem {
        self.add_ref(&other.neg_ref())
    }

    pub fn mul_ref(&self, other: &FqElem) -> FqElem {
        self.same(other);
        if self.code == 0 || other.code == 0 {
            return self.field.zero();
        }
        let n = self.field.q - 1;
        let l = (self.field.log[self.code as usize] as u64 + self.field.log[other.code as usize] as u64)
            % n as u64;
        self.field.from_code(self.field.exp[l as usize])
    }

    /// Multiplies by an integer.
    pub fn scale(&self, k: i64) -> FqElem {
        self.mul_ref(&self.field.from_int(k))
    }

    pub fn inv(&self) -> Option<FqElem> {
        if self.code == 0 {
            return None;
        }
        let n = self.field.q - 1;
        let l = self.field.log[self.code as usize];
        Some(self.field.from_code(self.field.exp[((n - l) % n) as usize]))
    }

    pub fn pow(&self, e: u64) -> FqElem {
        if e == 0 {
            return self.field.one();
        }
        if self.code == 0 {
            return self.clone();
        }
        let n = (self.field.q - 1) as u64;
        let l = (self.field.log[self.code as usize] as u64 * (e % n)) % n;
        self.field.from_code(self.field.exp[l as usize])
    }

    /// `x^(p^n)`.
    pub fn frobenius(&self, n: u32) -> FqElem {
        let d = self.field.d;
        let n = n % d;
        if n == 0 || self.code == 0 {
            return self.clone();
        }
        let m = (self.field.q - 1) as u64;
        let pn = (self.field.p as u64).pow(n) % m;
        let l = self.field.log[self.code as usize] as u64 * pn % m;
        self.field.from_code(self.field.exp[l as usize])
    }

    /// The unique `y` with `y^(p^n) = x`.
    pub fn pth_root(&self, n: u32) -> FqElem {
        let d = self.field.d;
        self.frobenius((d - n % d) % d)
    }

    /// Ordering on coefficient vectors, constant coefficient compared first.
    pub fn lex_cmp(&self, other: &FqElem) -> Ordering {
        self.coeffs().cmp(&other.coeffs())
    }

    /// True when the element lies in the prime field.
    pub fn in_prime_field(&self) -> bool {
        self.code < self.field.p
    }

    /// Prime-field value as an integer, if the element lies in F_p.
    pub fn as_prime(&self) -> Option<u32> {
        self.in_prime_field().then_some(self.code)
    }

    /// True when printing needs parentheses inside a product.
    pub fn is_compound(&self) -> bool {
        self.coeffs().iter().filter(|&&c| c != 0).count() > 1
            || self.coeffs().iter().skip(1).any(|&c| c > 1)
    }
}

impl fmt::Display for FqElem {
    /// Integers for prime fields, `c0+c1*g+c2*g^2` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cs = self.coeffs();
        let mut parts = Vec::new();
        for (i, &c) in cs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            parts.push(match (i, c) {
                (0, c) => c.to_string(),
                (1, 1) => "g".to_string(),
                (1, c) => format!("{c}*g"),
                (i, 1) => format!("g^{i}"),
                (i, c) => format!("{c}*g^{i}"),
            });
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join("+"))
        }
    }
}

impl fmt::Debug for FqElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $inner:ident) => {
        impl std::ops::$tr<&FqElem> for &FqElem {
            type Output = FqElem;
            fn $m(self, rhs: &FqElem) -> FqElem {
                self.$inner(rhs)
            }
        }
        impl std::ops::$tr<FqElem> for FqElem {
            type Output = FqElem;
            fn $m(self, rhs: FqElem) -> FqElem {
                self.$inner(&rhs)
            }
        }
        impl std::ops::$tr<&FqElem> for FqElem {
            type Output = FqElem;
            fn $m(self, rhs: &FqElem) -> FqElem {
                self.$inner(rhs)
            }
        }
    };
}

forward_binop!(Add, add, add_ref);
forward_binop!(Sub, sub, sub_ref);
forward_binop!(Mul, mul, mul_ref);

impl std::ops::Neg for &FqElem {
    type Output = FqElem;
    fn neg(self) -> FqElem {
        self.neg_ref()
    }
}

impl std::ops::Neg for FqElem {
    type Output = FqElem;
    fn neg(self) -> FqElem {
        self.neg_ref()
    }
}

/// Dense univariate polynomial over a finite field, constant term first.
#[derive(Clone, PartialEq, Eq)]
pub struct FqPoly {
    field: Field,
    coeffs: Vec<FqElem>,
}

impl fmt::Debug for FqPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| format!("({c})*X^{i}"))
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

impl FqPoly {
    pub fn new(field: &Field, mut coeffs: Vec<FqElem>) -> FqPoly {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        FqPoly {
            field: field.clone(),
            coeffs,
        }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn coeffs(&self) -> &[FqElem] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: &FqElem) -> FqElem {
        self.coeffs
            .iter()
            .rev()
            .fold(self.field.zero(), |acc, c| &(&acc * x) + c)
    }

    /// Quotient and remainder by `X - r`.
    pub fn div_linear(&self, r: &FqElem) -> (FqPoly, FqElem) {
        if self.coeffs.is_empty() {
            return (self.clone(), self.field.zero());
        }
        let n = self.coeffs.len();
        let mut q = vec![self.field.zero(); n - 1];
        let mut carry = self.field.zero();
        for i in (0..n).rev() {
            let v = &self.coeffs[i] + &(&carry * r);
            if i == 0 {
                return (FqPoly::new(&self.field, q), v);
            }
            q[i - 1] = v.clone();
            carry = v;
        }
        unreachable!()
    }

    pub fn mul(&self, other: &FqPoly) -> FqPoly {
        if self.is_zero() || other.is_zero() {
            return FqPoly::new(&self.field, vec![]);
        }
        let mut out = vec![self.field.zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        FqPoly::new(&self.field, out)
    }

    /// Maps every coefficient through `embed` into `target`.
    pub fn embed(&self, target: &Field) -> Result<FqPoly, FieldError> {
        let emb = Embedding::new(&self.field, target)?;
        Ok(FqPoly::new(target, self.coeffs.iter().map(|c| emb.apply(c)).collect()))
    }
}

/// Roots of `f` in its coefficient field with multiplicities, in lexicographic
/// order of the roots. The zero polynomial has no listed roots.
pub fn poly_roots(f: &FqPoly) -> Vec<(FqElem, usize)> {
    let mut out = Vec::new();
    if f.is_zero() {
        return out;
    }
    let mut roots: Vec<FqElem> = f.field.elements().filter(|r| f.eval(r).is_zero()).collect();
    roots.sort_by(|a, b| a.lex_cmp(b));
    for r in roots {
        let mut g = f.clone();
        let mut mult = 0;
        loop {
            let (q, rem) = g.div_linear(&r);
            if !rem.is_zero() || g.degree() == Some(0) {
                break;
            }
            mult += 1;
            g = q;
        }
        out.push((r, mult));
    }
    out
}

/// Smallest `m` such that `f` has a root in `F_{q^m}`, searching fields up to
/// [`MAX_FIELD_ORDER`]. Returns `None` when no such field is in range.
pub fn root_extension_degree(f: &FqPoly) -> Option<u32> {
    let base = f.field();
    for m in 1.. {
        let d = base.degree() as u64 * m as u64;
        let target = match Field::new(base.p() as u64, d) {
            Ok(t) => t,
            Err(_) => return None,
        };
        let g = f.embed(&target).ok()?;
        if !poly_roots(&g).is_empty() {
            return Some(m);
        }
    }
    None
}

/// Smallest `m` such that `f` splits completely over `F_{q^m}`.
pub fn split_extension_degree(f: &FqPoly) -> Option<u32> {
    let base = f.field();
    let n = f.degree()?;
    for m in 1.. {
        let target = Field::new(base.p() as u64, base.degree() as u64 * m as u64).ok()?;
        let g = f.embed(&target).ok()?;
        if poly_roots(&g).iter().map(|(_, k)| k).sum::<usize>() == n {
            return Some(m);
        }
    }
    None
}

static FIELDS: Mutex<BTreeMap<(u32, u32), Field>> = Mutex::new(BTreeMap::new());
static EMBEDDINGS: Mutex<BTreeMap<(u32, u32, u32), u32>> = Mutex::new(BTreeMap::new());

/// The fixed embedding `F_{p^s} -> F_{p^t}` for `s | t`.
#[derive(Clone, Debug)]
pub struct Embedding {
    source: Field,
    target: Field,
    gen_image: FqElem,
}

impl Embedding {
    /// The image of the source generator is the lexicographically least root
    /// of the source modulus in the target field (the identity when the two
    /// fields coincide).
    pub fn new(source: &Field, target: &Field) -> Result<Embedding, FieldError> {
        if source.p != target.p || target.d % source.d != 0 {
            return Err(FieldError::NotASubfield {
                from: format!("{}^{}", source.p, source.d),
                target: format!("{}^{}", target.p, target.d),
            });
        }
        let key = (source.p, source.d, target.d);
        let cached = EMBEDDINGS.lock().get(&key).copied();
        let code = match cached {
            Some(code) => code,
            None if source.d == target.d => target.generator().code,
            None => {
                let modulus = FqPoly::new(
                    target,
                    source.modulus.iter().map(|&c| target.from_code(c)).collect(),
                );
                poly_roots(&modulus)
                    .into_iter()
                    .next()
                    .map(|(r, _)| r.code)
                    .expect("subfield modulus splits in the extension")
            }
        };
        EMBEDDINGS.lock().insert(key, code);
        let gen_image = target.from_code(code);
        Ok(Embedding {
            source: source.clone(),
            target: target.clone(),
            gen_image,
        })
    }

    pub fn target(&self) -> &Field {
        &self.target
    }

    pub fn generator_image(&self) -> &FqElem {
        &self.gen_image
    }

    pub fn apply(&self, x: &FqElem) -> FqElem {
        self.source.check(&x.field).expect("element of the source field");
        let mut acc = self.target.zero();
        let mut pw = self.target.one();
        for c in x.coeffs() {
            if c != 0 {
                acc = &acc + &pw.scale(c as i64);
            }
            pw = &pw * &self.gen_image;
        }
        acc
    }
}

/// Embeds `x` into `target` along the canonical embedding.
pub fn embed(x: &FqElem, target: &Field) -> Result<FqElem, FieldError> {
    Ok(Embedding::new(&x.field, target)?.apply(x))
}
