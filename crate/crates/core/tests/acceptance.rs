//! One PASS/FAIL line per acceptance criterion. Time limits are wall clock
//! on the optimized test profile.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use hahn_core::exponents::{cert_contains, cert_window, ExpQ, SupportCert};
use hahn_core::ffield::{embed, Field, FqElem};
use hahn_core::lrr::{
    combine, extend_terms, kernel_basis, moore_det, period_to_lrr, subspace_poly, CombineMode, LrrError, LrrSpec,
    PeriodCert,
};
use hahn_core::rootfind::{expand_root, find_roots, laurent_text, verify_root, RootJob, RootStatus, SeriesPoly};
use hahn_core::series::{window_equal, ExpBound, Provenance, Series};
use hahn_core::twistrec::{
    algebraicity_witness, as_solve, detect_tr, twist_operator, DetectBounds, TwistError, WitnessOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn one(f: &Field) -> Series {
    Series::monomial(&f.one(), ExpQ::zero())
}

fn t_pow(f: &Field, e: ExpQ) -> Series {
    Series::monomial(&f.one(), e)
}

/// `x^p - x - y`.
fn artin_schreier(f: &Field, y: &Series) -> SeriesPoly {
    let p = f.p() as usize;
    let mut c = vec![Series::zero(f); p + 1];
    c[0] = y.neg();
    c[1] = one(f).neg();
    c[p] = one(f);
    SeriesPoly::new(f, c).unwrap()
}

fn chevalley_roots(p: u64) -> Result<Vec<hahn_core::rootfind::RootResult>, String> {
    let f = Field::new(p, 1).unwrap();
    let job = RootJob {
        r: ExpQ::int(2),
        depth: 12,
        ..RootJob::default()
    };
    find_roots(&artin_schreier(&f, &t_pow(&f, ExpQ::int(-1))), &job).map_err(|e| e.to_string())
}

fn chevalley() -> Outcome {
    for p in [2u64, 3] {
        let f = Field::new(p, 1).unwrap();
        let roots = chevalley_roots(p)?;
        ensure!(roots.len() == p as usize, "p={p}: {} roots", roots.len());
        let mut constants = BTreeSet::new();
        for r in &roots {
            ensure!(r.multiplicity == 1, "p={p}: multiplicity {}", r.multiplicity);
            for e in 1..=10u32 {
                let at = ExpQ::new(-1, (p as i128).pow(e));
                ensure!(r.series.coeff(&at) == f.one(), "p={p}: coefficient at {at}");
            }
            ensure!(r.status == RootStatus::ExactPeriodic, "p={p}: {:?}", r.status);
            ensure!(r.period() == Some(PeriodCert { m: 1, n: 0 }), "p={p}: period {:?}", r.period());
            let v = verify_root(&artin_schreier(&f, &t_pow(&f, ExpQ::int(-1))), &r.series, &ExpQ::int(2), 12);
            ensure!(v.is_empty(), "p={p}: residue {:?}", v.nonzero);
            constants.insert(r.series.coeff(&ExpQ::zero()).to_string());
        }
        ensure!(constants.len() == p as usize, "p={p}: roots do not differ by F_p");
    }
    Ok(())
}

/// Indicator of `{-1/p^(k^2) : k >= 1}`.
fn squares(f: &Field) -> Series {
    let (g, p) = (f.clone(), f.p());
    Series::from_oracle(f, SupportCert::new(1, 0, 1), Provenance::Literal, move |e| {
        let k = e.depth(p);
        let root = (k as f64).sqrt().round() as u32;
        if e.numer() == -1 && e.denom() == (p as i128).pow(k) && root * root == k && k > 0 {
            g.one()
        } else {
            g.zero()
        }
    })
}

fn eventually_periodic_desk_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let f = Field::new(2, 2).unwrap();
    let opts = WitnessOptions {
        r: ExpQ::int(1),
        depth: 10,
        period_max: 3,
    };
    for i in 0..50 {
        let cert = SupportCert::new(rng.gen_range(1..3), rng.gen_range(0..2), rng.gen_range(1..3));
        let t = random_tr(&f, cert, random_period(&mut rng, 3, 2), 2, &mut rng);
        // the series comes back from its coefficients, then certifies
        let found = detect_tr(&t.to_series(), &DetectBounds::new(3, 2, 2 * cert.a as i128 + 8, 24))
            .map_err(|e| format!("spec {i}: {e}"))?;
        ensure!(
            window_equal(&found.series.to_series(), &t.to_series(), &ExpQ::int(1), 10),
            "spec {i}: detected description differs"
        );
        let w = algebraicity_witness(&t, &opts).map_err(|e| format!("spec {i}: {e}"))?;
        ensure!(w.steps.iter().all(|s| s.verified), "spec {i}: unverified step");
    }
    let f2 = Field::new(2, 1).unwrap();
    match detect_tr(&squares(&f2), &DetectBounds::new(8, 8, 0, 100)) {
        Err(TwistError::NotFound(_)) => Ok(()),
        other => Err(format!("squares: {other:?}")),
    }
}

/// Roots of `sum d_i x^(p^i)` by direct evaluation with `pow`.
fn brute_kernel(d: &[FqElem], f: &Field) -> Vec<FqElem> {
    let p = f.p() as u64;
    f.elements()
        .filter(|x| {
            let mut acc = f.zero();
            for (i, di) in d.iter().enumerate() {
                acc = acc.add_ref(&di.mul_ref(&x.pow(p.pow(i as u32))));
            }
            acc.is_zero()
        })
        .collect()
}

fn kernel_dimension() -> Outcome {
    for (p, deg) in [(2u64, 2u64), (2, 3)] {
        let f = Field::new(p, deg).unwrap();
        let nonzero: Vec<FqElem> = f.elements().filter(|x| !x.is_zero()).collect();
        let all: Vec<FqElem> = f.elements().collect();
        for k in 1..=2usize {
            let mut specs: Vec<Vec<FqElem>> = vec![vec![]];
            for i in 0..=k {
                let pool = if i == 0 || i == k { &nonzero } else { &all };
                specs = specs
                    .into_iter()
                    .flat_map(|s| {
                        pool.iter().map(move |x| {
                            let mut s = s.clone();
                            s.push(x.clone());
                            s
                        })
                    })
                    .collect();
            }
            for d in specs {
                let spec = LrrSpec::new(d.clone(), 0).unwrap();
                let roots = brute_kernel(&d, &f);
                let full = (p as usize).pow(k as u32);
                match kernel_basis(&spec, &f) {
                    Ok(basis) => {
                        ensure!(roots.len() == full, "{spec}: {} roots over F_{p}^{deg}", roots.len());
                        ensure!(basis.len() == k, "{spec}: basis of {}", basis.len());
                    }
                    Err(LrrError::FieldTooSmall { required_degree, .. }) => {
                        ensure!(roots.len() < full, "{spec}: splits but reported too small");
                        // the roots live in the reported field and fill it out
                        let big = Field::new(p, required_degree as u64).unwrap();
                        let lifted: Vec<FqElem> = d.iter().map(|x| embed(x, &big).unwrap()).collect();
                        let n = brute_kernel(&lifted, &big).len();
                        ensure!(n == full, "{spec}: {n} roots over F_{p}^{required_degree}");
                    }
                    Err(e) => return Err(format!("{spec}: {e}")),
                }
            }
        }
    }
    Ok(())
}

/// Some nonzero `lambda` in `F_p^k` with `sum lambda_i z_i = 0`.
fn dependent(z: &[FqElem], p: u32) -> bool {
    let k = z.len() as u32;
    (1..(p as u64).pow(k)).any(|code| {
        let mut acc = z[0].field().zero();
        let mut c = code;
        for zi in z {
            for _ in 0..c % p as u64 {
                acc = acc.add_ref(zi);
            }
            c /= p as u64;
        }
        acc.is_zero()
    })
}

fn moore_criterion() -> Outcome {
    for (p, deg) in [(2u64, 2u64), (3, 2)] {
        let f = Field::new(p, deg).unwrap();
        let all: Vec<FqElem> = f.elements().collect();
        let mut mismatches = 0;
        for a in &all {
            mismatches += usize::from(moore_det(&[a.clone()]).is_zero() != dependent(&[a.clone()], p as u32));
            for b in &all {
                let z = [a.clone(), b.clone()];
                mismatches += usize::from(moore_det(&z).is_zero() != dependent(&z, p as u32));
            }
        }
        ensure!(mismatches == 0, "F_{p}^{deg}: {mismatches} mismatches");
    }
    Ok(())
}

/// `sum d_i c_{n+i}^(p^i)` at every `n` in `0..=40`.
fn annihilates(d: &[FqElem], terms: &[FqElem]) -> bool {
    let p = d[0].field().p() as u64;
    (0..=40).all(|n| {
        let mut acc = d[0].field().zero();
        for (i, di) in d.iter().enumerate() {
            acc = acc.add_ref(&di.mul_ref(&terms[n + i].pow(p.pow(i as u32))));
        }
        acc.is_zero()
    })
}

fn random_split_spec(f: &Field, rng: &mut ChaCha8Rng) -> LrrSpec {
    let vs: Vec<FqElem> = (0..rng.gen_range(1..=3)).map(|_| f.from_code(rng.gen_range(1..f.order()))).collect();
    let s = subspace_poly(&vs, f).unwrap();
    let a = f.from_code(rng.gen_range(1..f.order()));
    LrrSpec::new(s.coeffs().iter().map(|c| c.mul_ref(&a)).collect(), 0).unwrap()
}

fn combined_recurrences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let f = Field::new(2, 3).unwrap();
    for trial in 0..200 {
        let (a, b) = (random_split_spec(&f, &mut rng), random_split_spec(&f, &mut rng));
        let ia: Vec<FqElem> = (0..a.order()).map(|_| random_elem(&f, &mut rng)).collect();
        let ib: Vec<FqElem> = (0..b.order()).map(|_| random_elem(&f, &mut rng)).collect();
        let sa = extend_terms(&a, &ia, 50).unwrap();
        let sb = extend_terms(&b, &ib, 50).unwrap();
        for (mode, seq) in [
            (CombineMode::Sum, sa.iter().zip(&sb).map(|(x, y)| x.add_ref(y)).collect::<Vec<_>>()),
            (CombineMode::Product, sa.iter().zip(&sb).map(|(x, y)| x.mul_ref(y)).collect()),
        ] {
            let c = combine(&a, &b, mode, &f).map_err(|e| format!("trial {trial}: {e}"))?;
            ensure!(annihilates(c.coeffs(), &seq), "trial {trial}: {mode:?} of {a} and {b} via {c}");
        }
    }
    Ok(())
}

fn random_y(f: &Field, rng: &mut ChaCha8Rng) -> Series {
    let y = if rng.gen_bool(0.5) {
        let p = f.p() as i128;
        let terms: BTreeMap<ExpQ, FqElem> = (0..rng.gen_range(1..5))
            .map(|_| (ExpQ::new(rng.gen_range(-6..6), p.pow(rng.gen_range(0..3))), random_elem(f, rng)))
            .collect();
        Series::from_terms(f, terms.into_iter().collect()).unwrap()
    } else {
        let cert = SupportCert::new(rng.gen_range(1..3), rng.gen_range(0..2), rng.gen_range(0..3));
        random_tr(f, cert, random_period(rng, 2, 2), 2, rng).to_series()
    };
    // over F_p the constant equation is solvable only for a zero constant
    let y0 = y.coeff(&ExpQ::zero());
    y.sub(&Series::monomial(&y0, ExpQ::zero()))
}

fn artin_schreier_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for i in 0..100 {
        let f = Field::new([2, 3][i % 2], 1).unwrap();
        let p = f.p();
        let y = random_y(&f, &mut rng);
        let sol = as_solve(&y).map_err(|e| format!("y {i}: {e}"))?;
        let x = &sol.principal;
        // (x^p)_{pe} = x_e^p; depth drops by one under e -> pe
        let mut lhs: BTreeMap<ExpQ, FqElem> = BTreeMap::new();
        for (e, c) in x.materialize(&ExpQ::new(2, p as i128), 9).terms {
            lhs.insert(e.mul_int(p as i128), c.pow(p as u64));
        }
        for (e, c) in x.materialize(&ExpQ::int(2), 8).terms {
            let v = lhs.remove(&e).unwrap_or(f.zero()).sub_ref(&c);
            lhs.insert(e, v);
        }
        lhs.retain(|e, c| !c.is_zero() && e.depth(p) <= 8);
        let want: BTreeMap<ExpQ, FqElem> = y.materialize(&ExpQ::int(2), 8).terms.into_iter().collect();
        ensure!(lhs == want, "y {i}: x^p - x differs from y");
        let SupportCert { a, b, c } = y.cert();
        let target = SupportCert::new(a, b, b as u32 + c);
        for (e, _) in sol.negative.materialize(&ExpQ::int(2), 8).terms {
            ensure!(cert_contains(&target, &e, p), "y {i}: negative part at {e} outside {target}");
        }
        // direct sum of Frobenius twists on a wider set than claimed
        let wide = SupportCert::new(a, b, b as u32 + c + 2);
        for e in cert_window(&wide, &ExpQ::zero(), 6, p) {
            let mut acc = f.zero();
            for n in 1..12 {
                acc = acc.add_ref(&y.coeff(&e.scale_pow(p, n)).pth_root(n as u32));
            }
            ensure!(acc == sol.negative.coeff(&e), "y {i}: negative part wrong at {e}");
            ensure!(acc.is_zero() || cert_contains(&target, &e, p), "y {i}: sum at {e} outside {target}");
        }
    }
    Ok(())
}

fn twist_support() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let fields = [Field::new(2, 1).unwrap(), Field::new(2, 2).unwrap(), Field::new(3, 1).unwrap()];
    for i in 0..100 {
        let f = &fields[i % 3];
        let p = f.p();
        let c = rng.gen_range(1..=2);
        let x = random_tc(f, c, random_period(&mut rng, 2, 1), &mut rng);
        let img = twist_operator(&x, &period_to_lrr(x.period(), f)).map_err(|e| format!("series {i}: {e}"))?;
        let pk = (p as u64).pow(img.k);
        let target = SupportCert::new(pk, pk - 1, c - 1);
        for (r, depth) in [(ExpQ::int(1), img.k + 4), (ExpQ::int(3), img.k + 2)] {
            ensure!(window_equal(&img.tight, &img.loose, &r, depth), "series {i}: tight and loose differ");
            for (e, _) in img.loose.materialize(&r, depth).terms {
                ensure!(cert_contains(&target, &e, p), "series {i}: {e} outside {target}");
            }
        }
    }
    Ok(())
}

fn in_grid(e: &ExpQ) -> bool {
    e.denom() <= 2 && e.numer().abs() <= 2 && (e.denom() == 2 || e.numer().abs() <= 1)
}

fn is_zero_exactly(s: &Series) -> bool {
    s.finite_terms().is_some_and(|m| m.iter().all(|(_, c)| c.is_zero()))
}

fn brute_force_roots() -> Outcome {
    let f = Field::new(2, 1).unwrap();
    let grid: Vec<ExpQ> = [(-1, 1), (-1, 2), (0, 1), (1, 2), (1, 1)].iter().map(|&(n, d)| ExpQ::new(n, d)).collect();
    let candidates: Vec<Series> = (0u32..32)
        .map(|mask| {
            let terms = (0..5).filter(|i| mask >> i & 1 == 1).map(|i| (grid[i].clone(), f.one())).collect();
            Series::from_terms(&f, terms).unwrap()
        })
        .collect();
    let pool = [
        t_pow(&f, ExpQ::int(-1)),
        one(&f),
        t_pow(&f, ExpQ::int(1)),
        t_pow(&f, ExpQ::int(-1)).add(&one(&f)),
    ];
    // a window well past the grid, so that a root leaving it shows a term
    let job = RootJob {
        r: ExpQ::int(8),
        depth: 8,
        drop_unsplit: true,
        ..RootJob::default()
    };
    let mut hits = 0;
    for degree in 1..=2usize {
        for code in 0..4usize.pow(degree as u32 + 1) {
            let coeffs: Vec<Series> = (0..=degree).map(|i| pool[code / 4usize.pow(i as u32) % 4].clone()).collect();
            let poly = SeriesPoly::new(&f, coeffs.clone()).unwrap();
            let eval = |z: &Series| {
                let mut acc = Series::zero(&f);
                for c in coeffs.iter().rev() {
                    acc = acc.mul(z).add(c);
                }
                acc
            };
            let brute: Vec<&Series> = candidates.iter().filter(|z| is_zero_exactly(&eval(z))).collect();
            hits += brute.len();
            let found = expand_root(&poly, &job).map_err(|e| format!("{poly}: {e}"))?;
            let on_grid: Vec<Series> = found
                .iter()
                .filter_map(|r| {
                    let terms = r.series.materialize(&job.r, job.depth).terms;
                    terms.iter().all(|(e, _)| in_grid(e)).then(|| Series::from_terms(&f, terms).unwrap())
                })
                .collect();
            for z in &on_grid {
                ensure!(is_zero_exactly(&eval(z)), "{poly}: {:?} is not a root", laurent_text(z));
            }
            ensure!(on_grid.len() == brute.len(), "{poly}: {} found, {} by search", on_grid.len(), brute.len());
            for z in brute {
                ensure!(on_grid.iter().any(|s| window_equal(s, z, &job.r, job.depth)), "{poly}: missed {:?}", laurent_text(z));
            }
        }
    }
    ensure!(hits > 0, "no polynomial has a root on the grid");
    Ok(())
}

fn tame_puiseux() -> Outcome {
    for (n, p, d) in [(2u32, 3u64, 1u64), (2, 5, 1), (3, 2, 2), (3, 5, 2), (5, 2, 4), (5, 3, 4)] {
        let f = Field::new(p, d).unwrap();
        let mut c = vec![Series::zero(&f); n as usize + 1];
        c[0] = t_pow(&f, ExpQ::int(1)).neg();
        c[n as usize] = one(&f);
        let poly = SeriesPoly::new(&f, c).unwrap();
        let roots = find_roots(&poly, &RootJob::default()).map_err(|e| format!("n={n} F_{p}^{d}: {e}"))?;
        ensure!(roots.len() == n as usize, "n={n} F_{p}^{d}: {} roots", roots.len());
        let cert = SupportCert::new(n as u64, 0, 0);
        let mut zetas = BTreeSet::new();
        for r in &roots {
            let terms = r.series.materialize(&ExpQ::int(4), 10).terms;
            ensure!(terms.len() == 1 && terms[0].0 == ExpQ::new(1, n as i128), "n={n}: root {terms:?}");
            ensure!(cert_contains(&cert, &terms[0].0, p as u32), "n={n}: outside {cert}");
            ensure!(terms[0].1.pow(n as u64) == f.one(), "n={n}: {} is not a root of unity", terms[0].1);
            ensure!(verify_root(&poly, &r.series, &ExpQ::int(2), 10).is_empty(), "n={n}: unverified");
            zetas.insert(terms[0].1.to_string());
        }
        ensure!(zetas.len() == n as usize, "n={n}: roots repeat");
    }
    Ok(())
}

fn truncation() -> Outcome {
    for p in [2u64, 3] {
        let j = ExpQ::new(-1, (p as i128).pow(3));
        for r in chevalley_roots(p)? {
            let cut = r.series.truncate_below(&ExpBound::Finite(j.clone()));
            let tr = detect_tr(&cut, &DetectBounds::new(4, 4, 4, 32))
                .map_err(|e| format!("p={p}: {e}"))?
                .series;
            ensure!(window_equal(&tr.to_series(), &cut, &ExpQ::int(2), 12), "p={p}: detection differs");
            let opts = WitnessOptions {
                r: ExpQ::int(1),
                depth: 10,
                period_max: 4,
            };
            let w = algebraicity_witness(&tr, &opts).map_err(|e| format!("p={p}: {e}"))?;
            ensure!(w.verified(), "p={p}: witness unverified");
        }
    }
    Ok(())
}

fn run(name: &str, limit: Option<Duration>, check: fn() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
    let took = start.elapsed();
    let result = match (result, limit) {
        (Ok(()), Some(l)) if took > l => Err(format!("took {took:.2?}, limit {l:?}")),
        (r, _) => r,
    };
    // written past the harness capture so the lines show in every run
    let line = match &result {
        Ok(()) => format!("PASS {name} ({took:.2?})"),
        Err(msg) => format!("FAIL {name} ({took:.2?}): {msg}"),
    };
    let _ = writeln!(std::io::stdout(), "{line}");
    result.is_ok()
}

#[test]
fn acceptance() {
    let secs = |s| Some(Duration::from_secs(s));
    let checks: [(&str, Option<Duration>, fn() -> Outcome); 10] = [
        ("1 chevalley roots", secs(5), chevalley),
        ("2 eventually periodic desk check", secs(10), eventually_periodic_desk_check),
        ("3 kernel dimension", None, kernel_dimension),
        ("4 moore determinant", None, moore_criterion),
        ("5 combined recurrences", None, combined_recurrences),
        ("6 artin-schreier round trips", None, artin_schreier_round_trips),
        ("7 twist support", None, twist_support),
        ("8 brute-force roots", secs(5), brute_force_roots),
        ("9 tame puiseux", None, tame_puiseux),
        ("10 truncation", None, truncation),
    ];
    let passed = checks.iter().filter(|(name, limit, f)| run(name, *limit, *f)).count();
    assert_eq!(passed, checks.len(), "{} criteria failed", checks.len() - passed);
}
