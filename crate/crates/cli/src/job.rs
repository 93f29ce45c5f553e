//! Job text: statements separated by `;` or newlines.
//!
//! ```text
//! field 2^1; roots x^2 + x + t^-1; window 2 10
//! ```

use std::fmt;

use hahn_core::exponents::{ExpQ, SupportCert};
use hahn_core::ffield::Field;
use hahn_core::lrr::PeriodCert;
use hahn_core::rootfind::{laurent_text, parse_laurent, RootError, SeriesPoly};
use hahn_core::series::{Provenance, Series};
use hahn_core::twistrec::TRSeries;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error(transparent)]
    Core(#[from] hahn_core::Error),
}

impl CliError {
    pub fn code(&self) -> String {
        match self {
            CliError::Syntax { .. } => "cli::Syntax".into(),
            CliError::Core(e) => e.code(),
        }
    }

    pub fn is_not_found(&self) -> bool {
        matches!(self, CliError::Core(e) if e.is_not_found())
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> CliError {
                CliError::Core(e.into())
            }
        }
    )*};
}

from_core!(
    hahn_core::ffield::FieldError,
    hahn_core::series::SeriesError,
    hahn_core::twistrec::TwistError,
    RootError
);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Text => "text",
            Format::Json => "json",
        })
    }
}

/// Exponent pattern of a lacunary series `sum_{k>=1} t^(-1/p^f(k))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// `f(k) = k`
    Linear,
    /// `f(k) = k^2`
    Square,
    /// `f(k) = 2^k`
    Doubling,
}

impl Shape {
    fn contains(self, j: u32) -> bool {
        match self {
            Shape::Linear => j >= 1,
            Shape::Square => {
                let s = (j as f64).sqrt().round() as u32;
                j >= 1 && s * s == j
            }
            Shape::Doubling => j >= 2 && j.is_power_of_two(),
        }
    }

    fn text(self) -> &'static str {
        match self {
            Shape::Linear => "k",
            Shape::Square => "k^2",
            Shape::Doubling => "2^k",
        }
    }
}

/// A series given in a job: a finite literal, a twist-recurrent description
/// or a lacunary pattern.
#[derive(Clone, Debug)]
pub enum SeriesInput {
    Laurent(Series),
    Tr(TRSeries),
    Lacunary(Shape),
}

impl SeriesInput {
    fn parse(text: &str, pos: usize, field: &Field) -> Result<SeriesInput, CliError> {
        let t = text.trim();
        if let Some(rest) = t.strip_prefix("lacunary") {
            let shape = match rest.trim() {
                "k" => Shape::Linear,
                "k^2" => Shape::Square,
                "2^k" => Shape::Doubling,
                other => {
                    return Err(CliError::Syntax {
                        pos,
                        msg: format!("unknown lacunary pattern `{other}`"),
                    })
                }
            };
            return Ok(SeriesInput::Lacunary(shape));
        }
        if t.starts_with("tr ") {
            return Ok(SeriesInput::Tr(TRSeries::parse(t, field)?));
        }
        if let Some(rest) = t.strip_prefix("series ") {
            return Ok(SeriesInput::Tr(TRSeries::parse(&format!("tr {rest}"), field)?));
        }
        parse_laurent(text, field).map(SeriesInput::Laurent).map_err(|e| shift(e, pos))
    }

    pub fn series(&self, field: &Field) -> Series {
        match self {
            SeriesInput::Laurent(x) => x.clone(),
            SeriesInput::Tr(x) => x.to_series(),
            SeriesInput::Lacunary(shape) => {
                let (f, shape, p) = (field.clone(), *shape, field.p());
                Series::from_oracle(field, SupportCert::new(1, 0, 1), Provenance::Literal, move |e| {
                    let hit = e.numer() == -1 && e.denom() == (p as i128).pow(e.depth(p)) && shape.contains(e.depth(p));
                    if hit {
                        f.one()
                    } else {
                        f.zero()
                    }
                })
            }
        }
    }
}

impl fmt::Display for SeriesInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesInput::Laurent(x) => f.write_str(&laurent_text(x).unwrap_or_default()),
            SeriesInput::Tr(x) => f.write_str(&x.to_text()),
            SeriesInput::Lacunary(s) => write!(f, "lacunary {}", s.text()),
        }
    }
}

impl PartialEq for SeriesInput {
    fn eq(&self, other: &SeriesInput) -> bool {
        self.to_string() == other.to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Roots(SeriesPoly),
    AsSolve(SeriesInput),
    Certify(SeriesInput),
    Eval(SeriesInput),
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Roots(poly) => write!(f, "roots {poly}"),
            Command::AsSolve(x) => write!(f, "as-solve {x}"),
            Command::Certify(x) => write!(f, "certify {x}"),
            Command::Eval(x) => write!(f, "eval {x}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobSpec {
    pub field: Field,
    pub command: Command,
    /// window `(r, depth)`
    pub r: ExpQ,
    pub depth: u32,
    /// period search bounds `(M, N)`
    pub period: PeriodCert,
    /// node budget of the root expansion
    pub budget: usize,
    /// samples per tail sequence when certifying
    pub samples: usize,
    pub format: Format,
}

impl fmt::Display for JobSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "field {}^{}; {}; window {} {}; bounds {} {}; budget {}; samples {}; format {}",
            self.field.p(),
            self.field.degree(),
            self.command,
            self.r,
            self.depth,
            self.period.m,
            self.period.n,
            self.budget,
            self.samples,
            self.format
        )
    }
}

/// Values used for everything a job text leaves out.
#[derive(Clone, Debug)]
pub struct Defaults {
    pub field: Option<Field>,
    pub r: ExpQ,
    pub depth: u32,
    pub period: PeriodCert,
    pub budget: usize,
    pub samples: usize,
    pub format: Format,
}

impl Default for Defaults {
    fn default() -> Defaults {
        Defaults {
            field: None,
            r: ExpQ::int(2),
            depth: 10,
            period: PeriodCert { m: 4, n: 4 },
            budget: 10_000,
            samples: 100,
            format: Format::Text,
        }
    }
}

fn shift(e: RootError, by: usize) -> CliError {
    match e {
        RootError::Syntax { pos, msg } => CliError::Core(RootError::Syntax { pos: pos + by, msg }.into()),
        e => e.into(),
    }
}

/// Statements with the byte offset of their argument text.
fn statements(text: &str) -> Vec<(usize, &str, usize, &str)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let mut push = |from: usize, to: usize| {
        let s = &text[from..to];
        let lead = s.len() - s.trim_start().len();
        let s = s.trim();
        if s.is_empty() {
            return;
        }
        let (kw, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
        let arg_at = from + lead + kw.len() + (rest.len() - rest.trim_start().len()) + usize::from(!rest.is_empty());
        out.push((from + lead, kw, arg_at, rest.trim()));
    };
    for (i, ch) in text.char_indices() {
        match ch {
            '(' | '{' | '[' => depth += 1,
            ')' | '}' | ']' => depth -= 1,
            ';' | '\n' if depth == 0 => {
                push(start, i);
                start = i + 1;
            }
            _ => {}
        }
    }
    push(start, text.len());
    out
}

fn number<T: std::str::FromStr>(s: &str, pos: usize, what: &str) -> Result<T, CliError> {
    s.trim().parse::<T>().map_err(|_| CliError::Syntax {
        pos,
        msg: format!("bad {what} `{}`", s.trim()),
    })
}

/// Two values separated by whitespace or a comma.
pub fn pair(s: &str, pos: usize, what: &str) -> Result<(String, String), CliError> {
    let parts: Vec<&str> = s.split(|c: char| c == ',' || c.is_whitespace()).filter(|x| !x.is_empty()).collect();
    match parts.as_slice() {
        [a, b] => Ok((a.to_string(), b.to_string())),
        _ => Err(CliError::Syntax {
            pos,
            msg: format!("{what} needs two values, got `{s}`"),
        }),
    }
}

pub fn parse_window(s: &str, pos: usize) -> Result<(ExpQ, u32), CliError> {
    let (r, e) = pair(s, pos, "window")?;
    Ok((number(&r, pos, "window exponent")?, number(&e, pos, "window depth")?))
}

pub fn parse_bounds(s: &str, pos: usize) -> Result<PeriodCert, CliError> {
    let (m, n) = pair(s, pos, "bounds")?;
    let m: usize = number(&m, pos, "period bound")?;
    if m == 0 {
        return Err(CliError::Syntax {
            pos,
            msg: "period bound must be positive".into(),
        });
    }
    Ok(PeriodCert {
        m,
        n: number(&n, pos, "preperiod bound")?,
    })
}

pub fn parse_format(s: &str, pos: usize) -> Result<Format, CliError> {
    match s.trim() {
        "text" => Ok(Format::Text),
        "json" | "json-like" => Ok(Format::Json),
        other => Err(CliError::Syntax {
            pos,
            msg: format!("unknown format `{other}`"),
        }),
    }
}

pub fn parse_job(text: &str, defaults: &Defaults) -> Result<JobSpec, CliError> {
    let stmts = statements(text);
    let mut field = defaults.field.clone();
    for (_, kw, at, arg) in &stmts {
        if *kw == "field" {
            field = Some(Field::parse(arg).map_err(|e| match e {
                hahn_core::ffield::FieldError::BadLiteral(s) => CliError::Syntax {
                    pos: *at,
                    msg: format!("bad field `{s}`"),
                },
                e => e.into(),
            })?);
        }
    }
    let mut job = JobSpec {
        field: Field::new(2, 1)?,
        command: Command::Eval(SeriesInput::Lacunary(Shape::Linear)),
        r: defaults.r.clone(),
        depth: defaults.depth,
        period: defaults.period,
        budget: defaults.budget,
        samples: defaults.samples,
        format: defaults.format,
    };
    let mut command = None;
    for (pos, kw, at, arg) in stmts {
        let need_field = || {
            field.clone().ok_or(CliError::Syntax {
                pos,
                msg: "no field given (use `field p^d`, --field or HAHN_FIELD)".into(),
            })
        };
        let cmd = match kw {
            "field" => continue,
            "window" => {
                (job.r, job.depth) = parse_window(arg, at)?;
                continue;
            }
            "bounds" => {
                job.period = parse_bounds(arg, at)?;
                continue;
            }
            "budget" => {
                job.budget = number(arg, at, "budget")?;
                continue;
            }
            "samples" => {
                job.samples = number(arg, at, "sample count")?;
                continue;
            }
            "format" => {
                job.format = parse_format(arg, at)?;
                continue;
            }
            "roots" => Command::Roots(SeriesPoly::parse(arg, &need_field()?).map_err(|e| shift(e, at))?),
            "as-solve" => Command::AsSolve(SeriesInput::parse(arg, at, &need_field()?)?),
            "certify" => Command::Certify(SeriesInput::parse(arg, at, &need_field()?)?),
            "eval" => Command::Eval(SeriesInput::parse(arg, at, &need_field()?)?),
            other => {
                return Err(CliError::Syntax {
                    pos,
                    msg: format!("unknown statement `{other}`"),
                })
            }
        };
        if command.replace(cmd).is_some() {
            return Err(CliError::Syntax {
                pos,
                msg: "more than one command".into(),
            });
        }
    }
    job.command = command.ok_or(CliError::Syntax {
        pos: text.len(),
        msg: "no command (roots, as-solve, certify or eval)".into(),
    })?;
    job.field = field.expect("a command needs a field");
    Ok(job)
}
