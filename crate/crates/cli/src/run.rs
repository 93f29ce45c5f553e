use hahn_core::exponents::ExpQ;
use hahn_core::rootfind::{find_roots, laurent_text, verify_root, RootJob, RootStatus, SeriesPoly};
use hahn_core::series::{window_equal, Series};
use hahn_core::twistrec::{algebraicity_witness, as_solve, detect_tr, DetectBounds, TRSeries, WitnessOptions};
use serde_json::{json, Value};

use crate::job::{parse_job, CliError, Command, Defaults, Format, JobSpec, SeriesInput};

/// A finished job: what to print and how to exit.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: String,
}

struct Report {
    ok: bool,
    json: Value,
    text: Vec<String>,
}

fn terms(x: &Series, job: &JobSpec) -> String {
    let w = x.materialize(&job.r, job.depth).terms;
    laurent_text(&Series::from_terms(x.field(), w).expect("distinct exponents")).expect("finite")
}

fn window_json(x: &Series, job: &JobSpec) -> Value {
    let w = x.materialize(&job.r, job.depth).terms;
    Value::Array(w.iter().map(|(e, c)| json!([e.to_string(), c.to_string()])).collect())
}

fn roots(job: &JobSpec, poly: &SeriesPoly) -> Result<Report, CliError> {
    let rj = RootJob {
        r: job.r.clone(),
        depth: job.depth,
        period: job.period,
        budget: job.budget,
        drop_unsplit: false,
    };
    let found = find_roots(poly, &rj)?;
    let ok = found.iter().all(|r| r.verification.is_empty());
    let mut text = vec![format!("{} roots of {poly}", found.len())];
    for (i, r) in found.iter().enumerate() {
        let status = match &r.status {
            RootStatus::ExactPeriodic => "exact-periodic".to_string(),
            RootStatus::WindowOnly { r, depth } => format!("window-only ({r}, {depth})"),
        };
        let period = r.period().map_or("-".into(), |p| format!("({}, {})", p.m, p.n));
        text.push(format!(
            "root {i}: multiplicity {}, {status}, cert {}, period {period}",
            r.multiplicity,
            r.series.cert()
        ));
        text.push(format!("  {}", terms(&r.series, job)));
        if let Some(tr) = &r.tr {
            text.push(format!("  {}", tr.to_text()));
        }
        text.push(verification_line(&r.verification.nonzero, job));
    }
    Ok(Report {
        ok,
        json: json!({ "roots": serde_json::to_value(&found).expect("serializable") }),
        text,
    })
}

fn verification_line(nonzero: &[(ExpQ, hahn_core::ffield::FqElem)], job: &JobSpec) -> String {
    if nonzero.is_empty() {
        format!("  verified on window ({}, {})", job.r, job.depth)
    } else {
        let at: Vec<String> = nonzero.iter().map(|(e, _)| e.to_string()).collect();
        format!("  NOT verified: residue at {}", at.join(", "))
    }
}

fn as_solve_job(job: &JobSpec, input: &SeriesInput) -> Result<Report, CliError> {
    let f = &job.field;
    let y = input.series(f);
    let sol = as_solve(&y)?;
    let p = f.p() as usize;
    let mut coeffs = vec![Series::zero(f); p + 1];
    coeffs[0] = y.neg();
    coeffs[1] = Series::monomial(&f.one(), ExpQ::zero()).neg();
    coeffs[p] = Series::monomial(&f.one(), ExpQ::zero());
    let poly = SeriesPoly::new(f, coeffs)?;
    let check = verify_root(&poly, &sol.principal, &job.r, job.depth);
    let text = vec![
        format!("x^{p} - x = {input}"),
        format!("principal root, cert {}", sol.principal.cert()),
        format!("  {}", terms(&sol.principal, job)),
        format!("negative part cert {}", sol.negative.cert()),
        format!("constant {}", sol.constant),
        format!("positive part cert {}", sol.positive.cert()),
        format!("all roots: principal + k for k in F_{p}"),
        verification_line(&check.nonzero, job),
    ];
    let json = json!({
        "principal": {
            "terms": window_json(&sol.principal, job),
            "cert": sol.principal.cert(),
        },
        "negative_cert": sol.negative.cert(),
        "constant": sol.constant.to_string(),
        "positive_cert": sol.positive.cert(),
        "roots": sol.all().iter().map(|x| window_json(x, job)).collect::<Vec<_>>(),
        "verification": check,
    });
    Ok(Report {
        ok: check.is_empty(),
        json,
        text,
    })
}

fn certify(job: &JobSpec, input: &SeriesInput) -> Result<Report, CliError> {
    let x = input.series(&job.field);
    let tr: TRSeries = match input {
        SeriesInput::Tr(t) => t.clone(),
        _ => {
            let cert = x.cert();
            let bounds = DetectBounds::new(
                job.period.m,
                job.period.n,
                job.r.mul_int(cert.a as i128).ceil() + 2 * job.period.m as i128 + 2,
                job.samples,
            );
            let cand = detect_tr(&x, &bounds)?;
            if !window_equal(&cand.series.to_series(), &x, &job.r, job.depth) {
                return Err(hahn_core::twistrec::TwistError::NotFound(
                    "the detected description disagrees with the series on the window".into(),
                )
                .into());
            }
            cand.series
        }
    };
    let opts = WitnessOptions {
        r: job.r.clone(),
        depth: job.depth,
        period_max: job.period.m,
    };
    let w = algebraicity_witness(&tr, &opts)?;
    let mut text = vec![
        format!("twist-recurrent, cert {}, period ({}, {})", tr.cert(), tr.period().m, tr.period().n),
        format!("  {}", tr.to_text()),
    ];
    for s in &w.steps {
        text.push(format!(
            "step level {} piece {}: twist {} maps {} to {}, {}",
            s.level,
            s.piece,
            s.spec,
            s.cert_in,
            s.cert_out,
            if s.verified { "verified" } else { "NOT verified" }
        ));
    }
    for (i, t) in w.terminals.iter().enumerate() {
        text.push(format!("terminal {i}, cert {}: {}", t.cert(), terms(t, job)));
    }
    let json = json!({
        "series": serde_json::to_value(&tr).expect("serializable"),
        "steps": w.steps.iter().map(|s| json!({
            "level": s.level,
            "piece": s.piece,
            "spec": s.spec.to_string(),
            "cert_in": s.cert_in,
            "cert_out": s.cert_out,
            "verified": s.verified,
        })).collect::<Vec<_>>(),
        "terminals": w.terminals.iter().map(|t| json!({
            "cert": t.cert(),
            "terms": window_json(t, job),
        })).collect::<Vec<_>>(),
    });
    Ok(Report {
        ok: w.verified(),
        json,
        text,
    })
}

fn eval(job: &JobSpec, input: &SeriesInput) -> Report {
    let x = input.series(&job.field);
    Report {
        ok: true,
        json: serde_json::to_value(x.materialize(&job.r, job.depth)).expect("serializable"),
        text: vec![format!("cert {}", x.cert()), format!("  {}", terms(&x, job))],
    }
}

fn render(job_text: Option<String>, format: Format, body: Result<Report, CliError>) -> Outcome {
    let (code, json, text) = match body {
        Ok(r) => {
            let code = if r.ok { 0 } else { 2 };
            (code, r.json, r.text)
        }
        Err(e) => {
            let code = if e.is_not_found() { 2 } else { 1 };
            let json = json!({ "error": { "code": e.code(), "message": e.to_string() } });
            (code, json, vec![format!("error {}: {e}", e.code())])
        }
    };
    let report = match format {
        Format::Json => {
            let mut v = json;
            v["job"] = job_text.map_or(Value::Null, Value::String);
            v["exit"] = json!(code);
            serde_json::to_string_pretty(&v).expect("serializable")
        }
        Format::Text => {
            let mut lines = Vec::new();
            if let Some(j) = job_text {
                lines.push(format!("job: {j}"));
            }
            lines.extend(text);
            lines.join("\n")
        }
    };
    Outcome { code, report }
}

/// Runs a parsed job.
pub fn run(job: &JobSpec) -> Outcome {
    let body = match &job.command {
        Command::Roots(poly) => roots(job, poly),
        Command::AsSolve(x) => as_solve_job(job, x),
        Command::Certify(x) => certify(job, x),
        Command::Eval(x) => Ok(eval(job, x)),
    };
    render(Some(job.to_string()), job.format, body)
}

/// Parses and runs a job text; parse failures exit with 1.
pub fn execute(text: &str, defaults: &Defaults) -> Outcome {
    match parse_job(text, defaults) {
        Ok(job) => run(&job),
        Err(e) => render(None, defaults.format, Err(e)),
    }
}
