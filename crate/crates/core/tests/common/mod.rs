#![allow(dead_code)]

use std::collections::BTreeMap;

use hahn_core::exponents::{Digits, SupportCert};
use hahn_core::ffield::{Field, FqElem};
use hahn_core::lrr::PeriodCert;
use hahn_core::twistrec::{build_tr, canonical_words, CoeffFunction, MTail, TRSeries};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_elem(f: &Field, rng: &mut ChaCha8Rng) -> FqElem {
    f.from_code(rng.gen_range(0..f.order()))
}

/// Random values on every canonical word; roughly a third are zero.
pub fn random_function(f: &Field, c: u32, period: PeriodCert, rng: &mut ChaCha8Rng) -> CoeffFunction {
    let table: BTreeMap<Digits, FqElem> = canonical_words(f.p(), c, period)
        .into_iter()
        .map(|w| {
            let v = if rng.gen_bool(0.33) { f.zero() } else { random_elem(f, rng) };
            (w, v)
        })
        .collect();
    CoeffFunction::new(f, c, period, table).unwrap()
}

pub fn random_period(rng: &mut ChaCha8Rng, m_max: usize, n_max: usize) -> PeriodCert {
    PeriodCert {
        m: rng.gen_range(1..=m_max),
        n: rng.gen_range(0..=n_max),
    }
}

/// A twist-recurrent series on `S_{a,b,c}` with `f_m` nonzero only for
/// `m <= m_hi`.
pub fn random_tr(f: &Field, cert: SupportCert, period: PeriodCert, m_hi: i128, rng: &mut ChaCha8Rng) -> TRSeries {
    let funcs: Vec<_> = (0..rng.gen_range(1..=2)).map(|_| random_function(f, cert.c, period, rng)).collect();
    let len = (m_hi + cert.b as i128 + 1).max(0) as usize;
    let assign = (0..len)
        .map(|_| if rng.gen_bool(0.2) { None } else { Some(rng.gen_range(0..funcs.len())) })
        .collect();
    build_tr(f, cert, period, funcs, assign, MTail::Zero).unwrap()
}

/// A series on `T_c ∪ {0}` with a single coefficient function.
pub fn random_tc(f: &Field, c: u32, period: PeriodCert, rng: &mut ChaCha8Rng) -> TRSeries {
    let func = random_function(f, c, period, rng);
    build_tr(f, SupportCert::new(1, 0, c), period, vec![func], vec![Some(0)], MTail::Zero).unwrap()
}

/// Random digit word with digit sum at most `c` and depth at most `max_pos`.
pub fn random_word(p: u32, c: u32, max_pos: u32, rng: &mut ChaCha8Rng) -> Digits {
    let mut budget = c;
    let mut word = Vec::new();
    for pos in 1..=max_pos {
        if budget == 0 {
            break;
        }
        if rng.gen_bool(0.2) {
            let b = rng.gen_range(1..=budget.min(p - 1));
            word.push((pos, b));
            budget -= b;
        }
    }
    word
}
