//! Exact arithmetic in the algebraic closure of `F_q((t))`.
//!
//! Elements are generalized power series with rational exponents whose
//! supports sit inside the digit-sum bounded sets `S_{a,b,c}`. Series are
//! coefficient oracles carrying a support certificate; algebraic series over
//! finite fields additionally have an exact finite description as
//! twist-recurrent series with periodic tail tables.

pub mod ffield;
pub mod exponents;
pub mod lrr;
pub mod series;
pub mod twistrec;
pub mod rootfind;

use thiserror::Error as ThisError;

/// Any error raised by the library.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error(transparent)]
    Field(#[from] ffield::FieldError),
    #[error(transparent)]
    Exponent(#[from] exponents::ExponentError),
    #[error(transparent)]
    Lrr(#[from] lrr::LrrError),
    #[error(transparent)]
    Series(#[from] series::SeriesError),
    #[error(transparent)]
    Twist(#[from] twistrec::TwistError),
    #[error(transparent)]
    Root(#[from] rootfind::RootError),
}

fn variant<T: std::fmt::Debug>(x: &T) -> String {
    format!("{x:?}").chars().take_while(|c| c.is_ascii_alphanumeric()).collect()
}

impl Error {
    /// Module-qualified code of the innermost error, e.g. `rootfind::Syntax`.
    pub fn code(&self) -> String {
        use rootfind::RootError as R;
        use twistrec::TwistError as T;
        match self {
            Error::Field(e) => format!("ffield::{}", variant(e)),
            Error::Exponent(e) => format!("exponents::{}", variant(e)),
            Error::Lrr(lrr::LrrError::Field(e)) | Error::Series(series::SeriesError::Field(e)) => {
                Error::Field(e.clone()).code()
            }
            Error::Lrr(e) => format!("lrr::{}", variant(e)),
            Error::Series(e) => format!("series::{}", variant(e)),
            Error::Twist(T::Field(e)) | Error::Root(R::Field(e)) => Error::Field(e.clone()).code(),
            Error::Twist(e) => format!("twistrec::{}", variant(e)),
            Error::Root(R::Twist(e)) => Error::Twist(e.clone()).code(),
            Error::Root(R::Series(e)) => Error::Series(e.clone()).code(),
            Error::Root(e) => format!("rootfind::{}", variant(e)),
        }
    }

    /// Search exhausted its bounds without a verified answer, as opposed
    /// to a malformed job or an arithmetic failure.
    pub fn is_not_found(&self) -> bool {
        use twistrec::TwistError as T;
        matches!(
            self,
            Error::Twist(T::NotFound(_) | T::PeriodUnverified { .. })
                | Error::Root(rootfind::RootError::Twist(T::NotFound(_) | T::PeriodUnverified { .. }))
                | Error::Root(rootfind::RootError::UnresolvedValuation { .. })
        )
    }
}
