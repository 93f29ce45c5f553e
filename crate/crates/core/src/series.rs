//! Generalized power series `sum x_i t^i` with well-ordered rational support.
//!
//! A [`Series`] is a certificate `S_{a,b,c}` bounding its support together
//! with either an explicit finite term map or a memoized coefficient oracle.
//! Coefficients outside the certificate are zero without consulting the
//! oracle. Zero testing is only ever done on finite windows `(r, E)`: all
//! exponents below `r` whose p-depth is at most `E`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use parking_lot::Mutex;
use serde::Serialize;
use thiserror::Error;

use crate::exponents::{
    cert_add, cert_contains, cert_mul, cert_twist_down, cert_twist_up, cert_window,
    int_digit_sum, split_representations, ExpQ, SupportCert,
};
use crate::ffield::{Field, FieldError, FqElem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("exponent {0} appears twice")]
    DuplicateExponent(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// How a series was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Literal,
    Sum,
    Product,
    Twist,
    Truncation,
    Substitution,
    AsSolution,
    RootExpansion,
    TwistRecurrent,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::Literal => "literal",
            Provenance::Sum => "sum",
            Provenance::Product => "product",
            Provenance::Twist => "twist",
            Provenance::Truncation => "truncation",
            Provenance::Substitution => "substitution",
            Provenance::AsSolution => "as-solution",
            Provenance::RootExpansion => "root-expansion",
            Provenance::TwistRecurrent => "twist-recurrent",
        };
        f.write_str(s)
    }
}

type Oracle = Box<dyn Fn(&ExpQ) -> FqElem + Send + Sync>;

enum Kind {
    Finite(BTreeMap<ExpQ, FqElem>),
    Oracle {
        f: Oracle,
        memo: Mutex<HashMap<ExpQ, FqElem>>,
    },
}

struct Inner {
    field: Field,
    cert: SupportCert,
    provenance: Provenance,
    kind: Kind,
}

/// Shareable handle to an immutable series.
#[derive(Clone)]
pub struct Series(Arc<Inner>);

/// Upper end of a truncation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExpBound {
    Finite(ExpQ),
    Infinity,
}

/// Result of a windowed valuation search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Valuation {
    Found(ExpQ),
    /// No nonzero coefficient below `r` at depth `<= depth`; says nothing
    /// about the series outside that window.
    AtLeast { r: ExpQ, depth: u32 },
}

/// Minimal `(a, b, 0)` certificate for a finite set of exponents.
fn finite_cert<'a>(exps: impl Iterator<Item = &'a ExpQ>) -> SupportCert {
    let exps: Vec<&ExpQ> = exps.collect();
    let a = exps
        .iter()
        .fold(1i128, |acc, e| acc.lcm(&e.denom())) as u64;
    let b = exps
        .iter()
        .map(|e| -(e.mul_int(a as i128).numer()))
        .max()
        .unwrap_or(0)
        .max(0) as u64;
    SupportCert::new(a, b, 0)
}

impl Series {
    fn build(field: &Field, cert: SupportCert, provenance: Provenance, kind: Kind) -> Series {
        Series(Arc::new(Inner {
            field: field.clone(),
            cert,
            provenance,
            kind,
        }))
    }

    fn finite(field: &Field, terms: BTreeMap<ExpQ, FqElem>, provenance: Provenance) -> Series {
        let terms: BTreeMap<_, _> = terms.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        let cert = finite_cert(terms.keys());
        Series::build(field, cert, provenance, Kind::Finite(terms))
    }

    /// Series with a coefficient oracle. The oracle is only asked about
    /// exponents inside `cert` and its answers are memoized.
    pub fn from_oracle(
        field: &Field,
        cert: SupportCert,
        provenance: Provenance,
        f: impl Fn(&ExpQ) -> FqElem + Send + Sync + 'static,
    ) -> Series {
        Series::build(
            field,
            cert,
            provenance,
            Kind::Oracle {
                f: Box::new(f),
                memo: Mutex::new(HashMap::new()),
            },
        )
    }

    pub fn zero(field: &Field) -> Series {
        Series::finite(field, BTreeMap::new(), Provenance::Literal)
    }

    pub fn monomial(c: &FqElem, e: ExpQ) -> Series {
        Series::finite(c.field(), BTreeMap::from([(e, c.clone())]), Provenance::Literal)
    }

    /// Finite series from distinct exponents; zero coefficients are dropped.
    pub fn from_terms(field: &Field, terms: Vec<(ExpQ, FqElem)>) -> Result<Series, SeriesError> {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            field.check(c.field())?;
            if map.insert(e.clone(), c).is_some() {
                return Err(SeriesError::DuplicateExponent(e.to_string()));
            }
        }
        Ok(Series::finite(field, map, Provenance::Literal))
    }

    pub fn field(&self) -> &Field {
        &self.0.field
    }

    pub fn cert(&self) -> SupportCert {
        self.0.cert
    }

    pub fn provenance(&self) -> Provenance {
        self.0.provenance
    }

    pub fn p(&self) -> u32 {
        self.0.field.p()
    }

    /// The nonzero terms when the series is known to be finite.
    pub fn finite_terms(&self) -> Option<&BTreeMap<ExpQ, FqElem>> {
        match &self.0.kind {
            Kind::Finite(m) => Some(m),
            Kind::Oracle { .. } => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.finite_terms().is_some()
    }

    pub fn coeff(&self, e: &ExpQ) -> FqElem {
        match &self.0.kind {
            Kind::Finite(m) => m.get(e).cloned().unwrap_or_else(|| self.0.field.zero()),
            Kind::Oracle { f, memo } => {
                if !cert_contains(&self.0.cert, e, self.p()) {
                    return self.0.field.zero();
                }
                if let Some(c) = memo.lock().get(e) {
                    return c.clone();
                }
                // the lock is released while the oracle runs; oracles recurse
                let c = f(e);
                memo.lock().insert(e.clone(), c.clone());
                c
            }
        }
    }

    /// Same coefficients on the new certificate and zero outside it.
    pub fn recertify(&self, cert: SupportCert, provenance: Provenance) -> Series {
        let x = self.clone();
        let p = self.p();
        if let Some(m) = self.finite_terms() {
            let kept = m
                .iter()
                .filter(|(e, _)| cert_contains(&cert, e, p))
                .filter(|(_, c)| !c.is_zero())
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect();
            return Series::build(self.field(), cert, provenance, Kind::Finite(kept));
        }
        Series::from_oracle(self.field(), cert, provenance, move |e| x.coeff(e))
    }

    fn check_field(&self, other: &Series) {
        if let Err(e) = self.field().check(other.field()) {
            panic!("{e}");
        }
    }

    /// Termwise sum.
    ///
    /// # Panics
    /// If the series live over different fields.
    pub fn add(&self, other: &Series) -> Series {
        self.check_field(other);
        if let (Some(a), Some(b)) = (self.finite_terms(), other.finite_terms()) {
            let mut m = a.clone();
            for (e, c) in b {
                let v = m.get(e).map_or(c.clone(), |x| x.add_ref(c));
                m.insert(e.clone(), v);
            }
            return Series::finite(self.field(), m, Provenance::Sum);
        }
        let cert = cert_add(&self.cert(), &other.cert(), self.p());
        let (x, y) = (self.clone(), other.clone());
        Series::from_oracle(self.field(), cert, Provenance::Sum, move |e| {
            x.coeff(e).add_ref(&y.coeff(e))
        })
    }

    pub fn neg(&self) -> Series {
        self.scale(&self.field().one().neg_ref())
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.add(&other.neg())
    }

    /// Multiplies every coefficient by a constant.
    pub fn scale(&self, c: &FqElem) -> Series {
        if let Some(m) = self.finite_terms() {
            let m = m.iter().map(|(e, x)| (e.clone(), x.mul_ref(c))).collect();
            return Series::finite(self.field(), m, self.provenance());
        }
        if c.is_zero() {
            return Series::zero(self.field());
        }
        let (x, c) = (self.clone(), c.clone());
        Series::from_oracle(self.field(), self.cert(), self.provenance(), move |e| {
            x.coeff(e).mul_ref(&c)
        })
    }

    /// Cauchy product; each coefficient is a finite sum over the splittings
    /// `i + j = k` allowed by the two certificates.
    ///
    /// # Panics
    /// If the series live over different fields.
    pub fn mul(&self, other: &Series) -> Series {
        self.check_field(other);
        let field = self.field().clone();
        match (self.finite_terms(), other.finite_terms()) {
            (Some(a), Some(b)) => {
                let mut m: BTreeMap<ExpQ, FqElem> = BTreeMap::new();
                for (i, x) in a {
                    for (j, y) in b {
                        let k = i.add(j);
                        let v = x.mul_ref(y);
                        let v = m.get(&k).map_or(v.clone(), |z| z.add_ref(&v));
                        m.insert(k, v);
                    }
                }
                Series::finite(&field, m, Provenance::Product)
            }
            (Some(_), None) => other.mul(self),
            (None, Some(b)) => {
                let cert = cert_mul(&self.cert(), &other.cert(), self.p());
                let (x, b) = (self.clone(), b.clone());
                let f2 = field.clone();
                Series::from_oracle(&field, cert, Provenance::Product, move |k| {
                    b.iter().fold(f2.zero(), |acc, (j, y)| {
                        acc.add_ref(&x.coeff(&k.sub(j)).mul_ref(y))
                    })
                })
            }
            (None, None) => {
                let p = self.p();
                let (cx, cy) = (self.cert(), other.cert());
                let cert = cert_mul(&cx, &cy, p);
                let (x, y) = (self.clone(), other.clone());
                let f2 = field.clone();
                Series::from_oracle(&field, cert, Provenance::Product, move |k| {
                    split_representations(&cx, &cy, k, p)
                        .iter()
                        .fold(f2.zero(), |acc, (i, j)| {
                            let xi = x.coeff(i);
                            if xi.is_zero() {
                                return acc;
                            }
                            acc.add_ref(&xi.mul_ref(&y.coeff(j)))
                        })
                })
            }
        }
    }

    /// `x^{p^n}`: exponents scaled by `p^n`, coefficients raised to `p^n`.
    pub fn twist_up(&self, n: u32) -> Series {
        let p = self.p();
        if let Some(m) = self.finite_terms() {
            let m = m
                .iter()
                .map(|(e, c)| (e.scale_pow(p, n as i32), c.frobenius(n)))
                .collect();
            return Series::finite(self.field(), m, Provenance::Twist);
        }
        let x = self.clone();
        let cert = cert_twist_up(&self.cert(), n, p);
        Series::from_oracle(self.field(), cert, Provenance::Twist, move |e| {
            x.coeff(&e.scale_pow(p, -(n as i32))).frobenius(n)
        })
    }

    /// `x^{1/p^n}`: exponents divided by `p^n`, coefficients `p^n`-th roots.
    pub fn twist_down(&self, n: u32) -> Series {
        let p = self.p();
        if let Some(m) = self.finite_terms() {
            let m = m
                .iter()
                .map(|(e, c)| (e.scale_pow(p, -(n as i32)), c.pth_root(n)))
                .collect();
            return Series::finite(self.field(), m, Provenance::Twist);
        }
        let x = self.clone();
        let cert = cert_twist_down(&self.cert(), n, p);
        Series::from_oracle(self.field(), cert, Provenance::Twist, move |e| {
            x.coeff(&e.scale_pow(p, n as i32)).pth_root(n)
        })
    }

    /// The substitution `t -> t^u`: exponents multiplied by `u`, coefficients
    /// unchanged.
    pub fn stretch(&self, u: u64) -> Series {
        assert!(u >= 1);
        let p = self.p();
        if let Some(m) = self.finite_terms() {
            let m = m.iter().map(|(e, c)| (e.mul_int(u as i128), c.clone())).collect();
            return Series::finite(self.field(), m, Provenance::Substitution);
        }
        let c = self.cert();
        let cert = if c.a % u == 0 {
            SupportCert::new(c.a / u, c.b, c.c)
        } else {
            SupportCert::new(c.a, u * c.b + u - 1, c.c * int_digit_sum(u, p))
        };
        let x = self.clone();
        Series::from_oracle(self.field(), cert, Provenance::Substitution, move |e| {
            x.coeff(&e.div_int(u as i128))
        })
    }

    /// The substitution `t -> t^{1/v}`.
    pub fn shrink(&self, v: u64) -> Series {
        assert!(v >= 1);
        if let Some(m) = self.finite_terms() {
            let m = m.iter().map(|(e, c)| (e.div_int(v as i128), c.clone())).collect();
            return Series::finite(self.field(), m, Provenance::Substitution);
        }
        let c = self.cert();
        let x = self.clone();
        Series::from_oracle(
            self.field(),
            SupportCert::new(c.a * v, c.b, c.c),
            Provenance::Substitution,
            move |e| x.coeff(&e.mul_int(v as i128)),
        )
    }

    /// Keeps the terms with exponent strictly below `j`.
    pub fn truncate_below(&self, j: &ExpBound) -> Series {
        let j = match j {
            ExpBound::Infinity => return self.clone(),
            ExpBound::Finite(j) => j.clone(),
        };
        if let Some(m) = self.finite_terms() {
            let m = m.range(..j).map(|(e, c)| (e.clone(), c.clone())).collect();
            return Series::finite(self.field(), m, Provenance::Truncation);
        }
        let x = self.clone();
        let f = self.field().clone();
        Series::from_oracle(self.field(), self.cert(), Provenance::Truncation, move |e| {
            if *e < j {
                x.coeff(e)
            } else {
                f.zero()
            }
        })
    }

    /// Least exponent in the window `(r, depth)` with a nonzero coefficient.
    pub fn valuation(&self, r: &ExpQ, depth: u32) -> Valuation {
        let p = self.p();
        let found = match self.finite_terms() {
            Some(m) => m
                .range(..r.clone())
                .map(|(e, _)| e)
                .find(|e| e.depth(p) <= depth)
                .cloned(),
            None => cert_window(&self.cert(), r, depth, p)
                .into_iter()
                .find(|e| !self.coeff(e).is_zero()),
        };
        match found {
            Some(e) => Valuation::Found(e),
            None => Valuation::AtLeast {
                r: r.clone(),
                depth,
            },
        }
    }

    /// All nonzero terms in the window, ascending.
    pub fn materialize(&self, r: &ExpQ, depth: u32) -> Window {
        let p = self.p();
        let terms = match self.finite_terms() {
            Some(m) => m
                .range(..r.clone())
                .filter(|(e, _)| e.depth(p) <= depth)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
            None => cert_window(&self.cert(), r, depth, p)
                .into_iter()
                .filter_map(|e| {
                    let c = self.coeff(&e);
                    (!c.is_zero()).then_some((e, c))
                })
                .collect(),
        };
        Window {
            field: self.field().clone(),
            cert: self.cert(),
            r: r.clone(),
            depth,
            terms,
        }
    }
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Series({} over {}, {}",
            self.cert(),
            self.field(),
            self.provenance()
        )?;
        if let Some(m) = self.finite_terms() {
            write!(f, ", {} terms", m.len())?;
        }
        write!(f, ")")
    }
}

/// Sums a list of series over one field.
pub fn sum_all(field: &Field, xs: &[Series]) -> Series {
    xs.iter().fold(Series::zero(field), |acc, x| acc.add(x))
}

/// Equality of the two materializations on `(r, depth)`. Each side is
/// enumerated on its own certificate, which covers the join of the two.
pub fn window_equal(x: &Series, y: &Series, r: &ExpQ, depth: u32) -> bool {
    x.materialize(r, depth).terms == y.materialize(r, depth).terms
}

/// Finite view of a series.
#[derive(Clone, Debug)]
pub struct Window {
    pub field: Field,
    pub cert: SupportCert,
    pub r: ExpQ,
    pub depth: u32,
    pub terms: Vec<(ExpQ, FqElem)>,
}

#[derive(Serialize)]
struct WindowDump<'a> {
    field: String,
    cert: SupportCert,
    r: &'a ExpQ,
    depth: u32,
    terms: Vec<(&'a ExpQ, String)>,
}

/// Structured dump with the certificate attached.
impl Serialize for Window {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WindowDump {
            field: format!("{}^{}", self.field.p(), self.field.degree()),
            cert: self.cert,
            r: &self.r,
            depth: self.depth,
            terms: self.terms.iter().map(|(e, c)| (e, c.to_string())).collect(),
        }
        .serialize(s)
    }
}

impl fmt::Display for Window {
    /// `coef*t^(e)` terms joined by ` + `, ascending; `0` when empty.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if c.is_compound() {
                write!(f, "({c})*t^({e})")?;
            } else {
                write!(f, "{c}*t^({e})")?;
            }
        }
        Ok(())
    }
}
