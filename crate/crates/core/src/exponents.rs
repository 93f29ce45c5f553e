//! Rational exponents, base-p digit words and the support sets `S_{a,b,c}`.
//!
//! An exponent `x` lies in `S_{a,b,c}` when `a*x = n - sum_i b_i p^-i` with
//! `n >= -b`, digits `b_i in 0..p` and digit sum at most `c`. Every such
//! representation is unique (the fractional part is finite and lies in
//! `[0, 1)`), so membership reduces to a digit expansion of `a*x`.
//!
//! Exponents are stored as reduced `i128` fractions. All arithmetic is
//! checked; an overflow panics instead of wrapping.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExponentError {
    #[error("{x} times {a} does not have a power-of-{p} denominator")]
    IncompatibleDenominator { x: String, a: u64, p: u32 },
    #[error("cannot parse exponent `{0}`")]
    Parse(String),
}

/// Exact rational exponent.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExpQ(Ratio<i128>);

fn overflow() -> ! {
    panic!("exponent arithmetic overflowed i128")
}

impl ExpQ {
    pub fn new(num: i128, den: i128) -> ExpQ {
        assert!(den != 0, "zero denominator");
        ExpQ(Ratio::new(num, den))
    }

    pub fn int(n: i128) -> ExpQ {
        ExpQ(Ratio::from_integer(n))
    }

    pub fn zero() -> ExpQ {
        ExpQ::int(0)
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn floor(&self) -> i128 {
        Integer::div_floor(&self.numer(), &self.denom())
    }

    pub fn ceil(&self) -> i128 {
        -Integer::div_floor(&-self.numer(), &self.denom())
    }

    /// Splits the denominator as `denom_a * p^denom_e` with `p ∤ denom_a`.
    pub fn denom_parts(&self, p: u32) -> (i128, u32) {
        let mut a = self.denom();
        let mut e = 0;
        while a % p as i128 == 0 {
            a /= p as i128;
            e += 1;
        }
        (a, e)
    }

    /// The p-adic depth: exponent of `p` in the reduced denominator.
    pub fn depth(&self, p: u32) -> u32 {
        self.denom_parts(p).1
    }

    pub fn add(&self, other: &ExpQ) -> ExpQ {
        ExpQ(self.0.checked_add(&other.0).unwrap_or_else(|| overflow()))
    }

    pub fn sub(&self, other: &ExpQ) -> ExpQ {
        ExpQ(self.0.checked_sub(&other.0).unwrap_or_else(|| overflow()))
    }

    pub fn neg(&self) -> ExpQ {
        ExpQ(-self.0)
    }

    pub fn mul(&self, other: &ExpQ) -> ExpQ {
        ExpQ(self.0.checked_mul(&other.0).unwrap_or_else(|| overflow()))
    }

    pub fn mul_int(&self, k: i128) -> ExpQ {
        self.mul(&ExpQ::int(k))
    }

    pub fn div_int(&self, k: i128) -> ExpQ {
        self.mul(&ExpQ::new(1, k))
    }

    /// `self * p^n` for any integer `n`.
    pub fn scale_pow(&self, p: u32, n: i32) -> ExpQ {
        let pn = (p as i128).checked_pow(n.unsigned_abs()).unwrap_or_else(|| overflow());
        if n >= 0 {
            self.mul_int(pn)
        } else {
            self.div_int(pn)
        }
    }
}

impl fmt::Display for ExpQ {
    /// `num/den` in lowest terms, or the integer itself.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for ExpQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for ExpQ {
    type Err = ExponentError;
    fn from_str(s: &str) -> Result<ExpQ, ExponentError> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let t = t.trim_start_matches('(').trim_end_matches(')');
        let bad = || ExponentError::Parse(s.to_string());
        match t.split_once('/') {
            Some((n, d)) => {
                let n: i128 = n.parse().map_err(|_| bad())?;
                let d: i128 = d.parse().map_err(|_| bad())?;
                if d == 0 {
                    return Err(bad());
                }
                Ok(ExpQ::new(n, d))
            }
            None => Ok(ExpQ::int(t.parse().map_err(|_| bad())?)),
        }
    }
}

impl Serialize for ExpQ {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExpQ {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<ExpQ, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Finite list of `(position, digit)` with positions strictly increasing and
/// digits nonzero; the word `b_1 b_2 ...` stands for `sum b_i p^-i`.
pub type Digits = Vec<(u32, u32)>;

pub fn digit_sum(digits: &[(u32, u32)]) -> u32 {
    digits.iter().map(|&(_, b)| b).sum()
}

/// `sum b_i p^-i` as an exact fraction.
pub fn digits_value(digits: &[(u32, u32)], p: u32) -> ExpQ {
    let depth = digits.last().map_or(0, |&(pos, _)| pos);
    let den = (p as i128).checked_pow(depth).unwrap_or_else(|| overflow());
    let mut num: i128 = 0;
    for &(pos, b) in digits {
        let w = (p as i128).pow(depth - pos);
        num = num
            .checked_add(w.checked_mul(b as i128).unwrap_or_else(|| overflow()))
            .unwrap_or_else(|| overflow());
    }
    ExpQ::new(num, den)
}

/// Exponent written as `(1/a)(n - sum b_i p^-i)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DigitWord {
    pub a: u64,
    pub n: i128,
    pub digits: Digits,
}

impl DigitWord {
    pub fn digit_sum(&self) -> u32 {
        digit_sum(&self.digits)
    }

    /// Position of the last nonzero digit (0 for integers).
    pub fn word_depth(&self) -> u32 {
        self.digits.last().map_or(0, |&(pos, _)| pos)
    }

    pub fn value(&self, p: u32) -> ExpQ {
        ExpQ::int(self.n)
            .sub(&digits_value(&self.digits, p))
            .div_int(self.a as i128)
    }
}

impl fmt::Debug for DigitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(1/{})({}", self.a, self.n)?;
        for &(pos, b) in &self.digits {
            write!(f, " - {b}*p^-{pos}")?;
        }
        write!(f, ")")
    }
}

/// Base-p digits of a fraction `F / p^e` with `0 <= F < p^e`.
fn fraction_digits(mut num: i128, e: u32, p: u32) -> Digits {
    let mut out = Vec::new();
    let mut pos = e;
    while num > 0 {
        let b = (num % p as i128) as u32;
        if b != 0 {
            out.push((pos, b));
        }
        num /= p as i128;
        pos -= 1;
    }
    out.reverse();
    out
}

/// Digit decomposition of `a*x`.
pub fn to_digits(x: &ExpQ, a: u64, p: u32) -> Result<DigitWord, ExponentError> {
    let y = x.mul_int(a as i128);
    let (rest, e) = y.denom_parts(p);
    if rest != 1 {
        return Err(ExponentError::IncompatibleDenominator {
            x: x.to_string(),
            a,
            p,
        });
    }
    let n = y.ceil();
    let frac = ExpQ::int(n).sub(&y); // in [0, 1), denominator p^e
    let num = frac.numer() * (y.denom() / frac.denom());
    Ok(DigitWord {
        a,
        n,
        digits: fraction_digits(num, e, p),
    })
}

/// Certificate `(a, b, c)` for supports inside `S_{a,b,c}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct SupportCert {
    pub a: u64,
    pub b: u64,
    pub c: u32,
}

impl SupportCert {
    pub fn new(a: u64, b: u64, c: u32) -> SupportCert {
        assert!(a >= 1, "certificate scale must be positive");
        SupportCert { a, b, c }
    }

    /// `S_{1,0,0}`, the non-negative integers.
    pub fn trivial() -> SupportCert {
        SupportCert::new(1, 0, 0)
    }

    /// `T_c` together with the point 0: `S_{1,0,c} ∩ (-1, 0]`.
    pub fn fractional(c: u32) -> SupportCert {
        SupportCert::new(1, 0, c)
    }
}

impl fmt::Display for SupportCert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S({},{},{})", self.a, self.b, self.c)
    }
}

/// Membership test for `S_{a,b,c}`.
pub fn cert_contains(cert: &SupportCert, x: &ExpQ, p: u32) -> bool {
    match to_digits(x, cert.a, p) {
        Ok(w) => w.n >= -(cert.b as i128) && w.digit_sum() <= cert.c,
        Err(_) => false,
    }
}

/// Every digit list with positions in `1..=max_pos` and digit sum `<= c`.
pub fn fractional_words(p: u32, c: u32, max_pos: u32) -> Vec<Digits> {
    fn rec(p: u32, budget: u32, start: u32, max_pos: u32, cur: &mut Digits, out: &mut Vec<Digits>) {
        out.push(cur.clone());
        if budget == 0 {
            return;
        }
        for pos in start..=max_pos {
            for b in 1..p.min(budget + 1) {
                cur.push((pos, b));
                rec(p, budget - b, pos + 1, max_pos, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(p, c, 1, max_pos, &mut Vec::new(), &mut out);
    out
}

/// Elements of `S_{a,b,c}` below `r` with depth at most `max_depth`, ascending.
pub fn cert_window(cert: &SupportCert, r: &ExpQ, max_depth: u32, p: u32) -> Vec<ExpQ> {
    let mut out = Vec::new();
    let ar = r.mul_int(cert.a as i128);
    let n_hi = ar.ceil() + 1;
    for word in fractional_words(p, cert.c, max_depth) {
        let f = digits_value(&word, p);
        for n in -(cert.b as i128)..n_hi {
            let x = ExpQ::int(n).sub(&f).div_int(cert.a as i128);
            if x < *r && x.depth(p) <= max_depth {
                out.push(x);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Base-p digit sum of a non-negative integer.
pub fn int_digit_sum(mut u: u64, p: u32) -> u32 {
    let mut s = 0;
    while u > 0 {
        s += (u % p as u64) as u32;
        u /= p as u64;
    }
    s
}

/// Certificate operations mirroring the series operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertOp {
    Add,
    Mul,
    TwistDown(u32),
    TwistUp(u32),
    Rescale(u64),
}

/// Certificate for the same support viewed at scale `l` (requires `a | l`).
///
/// With `u = l/a`, `l*x = u*n - u*f`; the fractional part of `u*f` has digit
/// sum at most `c * S_p(u)` and the integer spill is at most `u - 1`.
pub fn cert_rescale(x: &SupportCert, l: u64, p: u32) -> SupportCert {
    assert!(l % x.a == 0, "rescale target {l} is not a multiple of {}", x.a);
    let u = l / x.a;
    SupportCert::new(l, u * x.b + u - 1, x.c * int_digit_sum(u, p))
}

pub fn cert_add(x: &SupportCert, y: &SupportCert, p: u32) -> SupportCert {
    let l = x.a.lcm(&y.a);
    let (x, y) = (cert_rescale(x, l, p), cert_rescale(y, l, p));
    SupportCert::new(l, x.b.max(y.b), x.c.max(y.c))
}

/// Product certificate. A carry out of the fractional part lowers the integer
/// part by one and needs fractional digit mass at least `p`.
pub fn cert_mul(x: &SupportCert, y: &SupportCert, p: u32) -> SupportCert {
    let l = x.a.lcm(&y.a);
    let (x, y) = (cert_rescale(x, l, p), cert_rescale(y, l, p));
    let spill = u64::from(x.c + y.c >= p);
    SupportCert::new(l, x.b + y.b + spill, x.c + y.c)
}

pub fn cert_twist_down(x: &SupportCert, n: u32, p: u32) -> SupportCert {
    SupportCert::new(x.a * (p as u64).pow(n), x.b, x.c)
}

pub fn cert_twist_up(x: &SupportCert, n: u32, p: u32) -> SupportCert {
    let pn = (p as u64).pow(n);
    SupportCert::new(x.a, pn * x.b + pn - 1, x.c)
}

/// Dispatches to the individual certificate transforms; `y` is only read by
/// the binary operations.
pub fn cert_transform(x: &SupportCert, y: &SupportCert, op: CertOp, p: u32) -> SupportCert {
    match op {
        CertOp::Add => cert_add(x, y, p),
        CertOp::Mul => cert_mul(x, y, p),
        CertOp::TwistDown(n) => cert_twist_down(x, n, p),
        CertOp::TwistUp(n) => cert_twist_up(x, n, p),
        CertOp::Rescale(l) => cert_rescale(x, l, p),
    }
}

/// All pairs `(i, j)` with `i` in `S_x`, `j` in `S_y` and `i + j = k`,
/// ordered by `i`.
///
/// Works at the common scale `L`: writing `L*k = N - F`, the fractional
/// words of `i` and `j` are found column by column from the deepest position
/// upward, tracking the carry. Columns deeper than `depth(F) + (c_x+c_y)/(p-1)`
/// cannot hold digits because every carry spends at least `p - 1` of the
/// combined digit budget.
pub fn split_representations(
    cx: &SupportCert,
    cy: &SupportCert,
    k: &ExpQ,
    p: u32,
) -> Vec<(ExpQ, ExpQ)> {
    let (ox, oy) = (cx, cy);
    let l = cx.a.lcm(&cy.a);
    let (cx, cy) = (cert_rescale(cx, l, p), cert_rescale(cy, l, p));
    let word = match to_digits(k, l, p) {
        Ok(w) => w,
        Err(_) => return Vec::new(),
    };
    let max_pos = word.word_depth() + (cx.c + cy.c) / (p - 1);
    let mut target = vec![0u32; max_pos as usize + 1];
    for &(pos, b) in &word.digits {
        target[pos as usize] = b;
    }
    let mut splits = Vec::new();
    let mut u = vec![0u32; max_pos as usize + 1];
    let mut v = vec![0u32; max_pos as usize + 1];
    column_splits(
        p, &target, max_pos, 0, cx.c, cy.c, &mut u, &mut v, &mut splits,
    );
    let mut out = Vec::new();
    for (fu, fv, carry) in splits {
        let total = word.n + carry as i128;
        for n1 in -(cx.b as i128)..=total + cy.b as i128 {
            let n2 = total - n1;
            if n2 < -(cy.b as i128) {
                continue;
            }
            let i = ExpQ::int(n1).sub(&fu).div_int(l as i128);
            let j = ExpQ::int(n2).sub(&fv).div_int(l as i128);
            // rescaled certificates are looser than the originals
            if cert_contains(ox, &i, p) && cert_contains(oy, &j, p) {
                out.push((i, j));
            }
        }
    }
    out.sort();
    out
}

#[allow(clippy::too_many_arguments)]
fn column_splits(
    p: u32,
    target: &[u32],
    pos: u32,
    carry_in: u32,
    bx: u32,
    by: u32,
    u: &mut Vec<u32>,
    v: &mut Vec<u32>,
    out: &mut Vec<(ExpQ, ExpQ, u32)>,
) {
    if pos == 0 {
        let to_digits = |w: &[u32]| -> Digits {
            w.iter()
                .enumerate()
                .filter(|(_, &b)| b != 0)
                .map(|(i, &b)| (i as u32, b))
                .collect()
        };
        out.push((
            digits_value(&to_digits(u), p),
            digits_value(&to_digits(v), p),
            carry_in,
        ));
        return;
    }
    let kappa = target[pos as usize];
    for carry_out in 0..=1u32 {
        let column = kappa + p * carry_out;
        if column < carry_in {
            continue;
        }
        let s = column - carry_in;
        for du in 0..=(p - 1).min(bx).min(s) {
            let dv = s - du;
            if dv > p - 1 || dv > by {
                continue;
            }
            u[pos as usize] = du;
            v[pos as usize] = dv;
            column_splits(p, target, pos - 1, carry_out, bx - du, by - dv, u, v, out);
        }
    }
    u[pos as usize] = 0;
    v[pos as usize] = 0;
}

/// The exponents `(1/a)(m - prefix - p^-n * tail)` for `n = 0, 1, ...`;
/// tail digits carry their positions at `n = 0`.
pub fn tail_exponents(
    m: i128,
    prefix: &[(u32, u32)],
    tail: &[(u32, u32)],
    a: u64,
    p: u32,
) -> impl Iterator<Item = ExpQ> {
    let head = ExpQ::int(m).sub(&digits_value(prefix, p));
    let tail = digits_value(tail, p);
    (0u32..).map(move |n| {
        head.sub(&tail.scale_pow(p, -(n as i32)))
            .div_int(a as i128)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i128, d: i128) -> ExpQ {
        ExpQ::new(n, d)
    }

    #[test]
    fn digit_examples() {
        let w = to_digits(&q(-1, 3), 1, 3).unwrap();
        assert_eq!((w.n, w.digits.clone()), (0, vec![(1, 1)]));
        let w = to_digits(&q(1, 4), 1, 2).unwrap();
        assert_eq!((w.n, w.digits.clone()), (1, vec![(1, 1), (2, 1)]));
        let w = to_digits(&ExpQ::int(-1), 1, 2).unwrap();
        assert_eq!((w.n, w.digits.clone()), (-1, vec![]));
        assert!(matches!(
            to_digits(&q(1, 3), 1, 2),
            Err(ExponentError::IncompatibleDenominator { .. })
        ));
        assert_eq!(to_digits(&q(1, 3), 3, 2).unwrap().n, 1);
        assert_eq!(format!("{:?}", to_digits(&q(-3, 4), 1, 2).unwrap()), "(1/1)(0 - 1*p^-1 - 1*p^-2)");
    }

    #[test]
    fn membership_examples() {
        assert!(cert_contains(&SupportCert::new(1, 1, 1), &q(-1, 2), 2));
        assert!(cert_contains(&SupportCert::new(1, 1, 1), &q(-1, 3), 3));
        assert!(!cert_contains(&SupportCert::new(1, 0, 1), &q(-3, 2), 2));
        assert!(!cert_contains(&SupportCert::new(1, 0, 1), &q(-3, 4), 2));
    }

    #[test]
    fn window_examples() {
        let w = cert_window(&SupportCert::new(1, 0, 1), &ExpQ::zero(), 3, 2);
        assert_eq!(w, vec![q(-1, 2), q(-1, 4), q(-1, 8)]);
        let w = cert_window(&SupportCert::new(1, 0, 0), &ExpQ::int(3), 5, 2);
        assert_eq!(w, vec![ExpQ::int(0), ExpQ::int(1), ExpQ::int(2)]);
        let w = cert_window(&SupportCert::new(1, 1, 1), &ExpQ::zero(), 2, 2);
        assert_eq!(w, vec![q(-3, 2), q(-5, 4), ExpQ::int(-1), q(-1, 2), q(-1, 4)]);
    }

    #[test]
    fn transform_examples() {
        let m = cert_mul(&SupportCert::new(1, 0, 1), &SupportCert::new(1, 0, 1), 2);
        assert_eq!(m.c, 2);
        assert!(cert_contains(&m, &q(-3, 4), 2));
        // -1/2 + -1/2 carries into the integer part
        assert!(cert_contains(&m, &ExpQ::int(-1), 2));
        let td = cert_twist_down(&SupportCert::new(1, 1, 1), 1, 3);
        assert_eq!(td, SupportCert::new(3, 1, 1));
        assert!(cert_contains(&td, &q(-1, 3), 3));
        let tu = cert_twist_up(&SupportCert::new(1, 0, 1), 1, 2);
        assert_eq!(tu, SupportCert::new(1, 1, 1));
        assert!(cert_contains(&tu, &ExpQ::int(-1), 2));
    }

    #[test]
    fn split_examples() {
        let c1 = SupportCert::new(1, 0, 1);
        assert_eq!(
            split_representations(&c1, &c1, &ExpQ::int(-1), 2),
            vec![(q(-1, 2), q(-1, 2))]
        );
        let c0 = SupportCert::new(1, 0, 0);
        let s = split_representations(&c0, &c0, &ExpQ::int(5), 2);
        let expect: Vec<_> = (0..=5).map(|i| (ExpQ::int(i), ExpQ::int(5 - i))).collect();
        assert_eq!(s, expect);
        assert_eq!(
            split_representations(&c1, &c1, &q(-3, 4), 2),
            vec![(q(-1, 2), q(-1, 4)), (q(-1, 4), q(-1, 2))]
        );
    }

    #[test]
    fn tail_examples() {
        let s: Vec<_> = tail_exponents(0, &[], &[(1, 1)], 1, 2).take(3).collect();
        assert_eq!(s, vec![q(-1, 2), q(-1, 4), q(-1, 8)]);
        let s: Vec<_> = tail_exponents(0, &[(1, 2)], &[(2, 1)], 1, 3).take(3).collect();
        let expect: Vec<_> = (0..3)
            .map(|n| q(-2, 3).sub(&q(1, 9).scale_pow(3, -n)))
            .collect();
        assert_eq!(s, expect);
        let s: Vec<_> = tail_exponents(2, &[(1, 1)], &[], 2, 2).take(3).collect();
        assert!(s.iter().all(|x| *x == q(3, 4)));
    }

    #[test]
    fn exponent_text() {
        assert_eq!(q(-2, 4).to_string(), "-1/2");
        assert_eq!(ExpQ::int(3).to_string(), "3");
        assert_eq!("(-1/2)".parse::<ExpQ>().unwrap(), q(-1, 2));
        assert!("1/0".parse::<ExpQ>().is_err());
    }
}
