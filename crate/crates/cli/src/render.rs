use std::fmt::Write as _;

use cvmdi::optimizer::{tolerable_noise_curve, OptimumReport};
use cvmdi::{
    max_distance, optimal_tps, run_equivalence_check, success_probability, sweep, Error, Evaluation, McConfig, Party,
    SourceParams, SweepSpec,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, Format, RunConfig, SchemeArg};
use crate::{CliError, Status};

const SCHEMA: u32 = 1;
const SUCCESS_GRID_STEP: f64 = 0.005;

/// Rendered output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub body: String,
    pub status: Status,
    /// Diagnostic for stderr, e.g. why the status is non-zero.
    pub note: Option<String>,
}

impl Report {
    fn ok(body: String) -> Self {
        Report {
            body,
            status: Status::Ok,
            note: None,
        }
    }

    fn no_key(body: String, note: String) -> Self {
        Report {
            body,
            status: Status::NoKey,
            note: Some(note),
        }
    }
}

// Ten significant digits, locale independent.
fn num(x: f64) -> String {
    format!("{x:.9e}")
}

fn csv_start(header: &[&str]) -> String {
    format!("# schema={SCHEMA}\n{}\n", header.join(","))
}

fn push_row(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

fn json_body<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
    s.push('\n');
    Ok(s)
}

fn envelope<T: Serialize>(cfg: &RunConfig, key: &str, value: T) -> serde_json::Value {
    let mut v = json!({ "schema": SCHEMA, "command": cfg.command.name(), "config": cfg });
    v[key] = serde_json::to_value(value).expect("report values serialize");
    v
}

/// Report for a run that ended in a domain outcome rather than data.
fn outcome_report(cfg: &RunConfig, err: &Error) -> Result<Report, CliError> {
    let (kind, message) = match err {
        Error::NoPositiveRate(m) => ("no-positive-rate", m.clone()),
        Error::InsufficientAcceptance { accepted } => {
            ("insufficient-acceptance", format!("only {accepted} samples accepted"))
        }
        _ => unreachable!("only domain outcomes are reported"),
    };
    let body = match cfg.format {
        Format::Csv => format!("# schema={SCHEMA}\n# outcome={kind}: {message}\n"),
        Format::Json => json_body(&envelope(cfg, "outcome", json!({ "kind": kind, "message": message })))?,
    };
    Ok(Report::no_key(body, format!("{kind}: {message}")))
}

fn recover(cfg: &RunConfig, result: Result<Report, Error>) -> Result<Report, CliError> {
    match result {
        Ok(r) => Ok(r),
        Err(e @ (Error::NoPositiveRate(_) | Error::InsufficientAcceptance { .. })) => outcome_report(cfg, &e),
        Err(e) => Err(e.into()),
    }
}

pub(crate) fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.scenario().validate()?;
    match cfg.command {
        Command::KeyrateCurve => keyrate_curve(cfg),
        Command::NoiseCurve => noise_curve(cfg),
        Command::OptimalTps => {
            let r = optimal_tps_scan(cfg);
            recover(cfg, r)
        }
        Command::SuccessProb => success_prob(cfg),
        Command::McVerify => {
            let r = mc_verify(cfg);
            recover(cfg, r)
        }
        Command::MaxDistance => {
            let r = max_distance_report(cfg);
            recover(cfg, r)
        }
    }
}

fn keyrate_curve(cfg: &RunConfig) -> Result<Report, CliError> {
    let spec = SweepSpec::distances(cfg.dmin, cfg.dmax, cfg.step);
    let result = sweep(&spec, &cfg.scenario())?;
    let both = cfg.scheme == SchemeArg::Both;
    let rows: Vec<&Evaluation> = result.rows.iter().map(|r| &r.evaluation).collect();
    let body = match cfg.format {
        Format::Csv => {
            let mut header = vec![
                "distance_km",
                "key_rate",
                "raw_rate",
                "i_ab",
                "chi_be",
                "p_success",
                "t_ps",
            ];
            if both {
                header.push("t_ps_b");
            }
            header.extend(["mu", "plob_bound"]);
            let mut out = csv_start(&header);
            for e in &rows {
                let b = &e.breakdown;
                let t_ps = if cfg.scheme == SchemeArg::Bob { e.tps_b } else { e.tps_a };
                let mut fields = vec![
                    num(e.distance_km),
                    num(b.key_rate),
                    num(b.raw_rate),
                    num(b.i_ab),
                    num(b.chi_be),
                    num(b.p_success),
                    num(t_ps),
                ];
                if both {
                    fields.push(num(e.tps_b));
                }
                fields.push(num(b.mu));
                fields.push(num(e.plob.unwrap_or(f64::INFINITY)));
                push_row(&mut out, &fields);
            }
            out
        }
        Format::Json => json_body(&envelope(cfg, "rows", &rows))?,
    };
    if rows.iter().any(|e| e.breakdown.key_rate > 0.0) {
        Ok(Report::ok(body))
    } else {
        Ok(Report::no_key(
            body,
            "no positive key rate in the requested range".into(),
        ))
    }
}

fn noise_curve(cfg: &RunConfig) -> Result<Report, CliError> {
    let distances = SweepSpec::distances(cfg.dmin, cfg.dmax, cfg.step);
    distances.validate()?;
    let curve = tolerable_noise_curve(&cfg.scenario(), &distances.points(), cfg.reoptimize)?;
    let body = match cfg.format {
        Format::Csv => {
            let mut out = csv_start(&["distance_km", "tolerable_eps"]);
            for (d, eps) in &curve {
                push_row(&mut out, &[num(*d), eps.map(num).unwrap_or_default()]);
            }
            out
        }
        Format::Json => {
            let rows: Vec<_> = curve
                .iter()
                .map(|(d, eps)| json!({ "distance_km": d, "tolerable_eps": eps }))
                .collect();
            json_body(&envelope(cfg, "rows", rows))?
        }
    };
    if curve.iter().any(|(_, eps)| eps.is_some()) {
        Ok(Report::ok(body))
    } else {
        Ok(Report::no_key(body, "no distance admits a positive key rate".into()))
    }
}

fn optimal_tps_scan(cfg: &RunConfig) -> Result<Report, Error> {
    let scenario = cfg.scenario();
    let party = match cfg.scheme {
        SchemeArg::Bob => Party::Bob,
        _ => Party::Alice,
    };
    let base = scenario.protocol(cfg.distance, 1.0, 1.0)?;
    let report: OptimumReport = optimal_tps(&base, cfg.k, party)?;
    let body = match cfg.format {
        Format::Csv => {
            let mut out = format!("# schema={SCHEMA}\n");
            match report.argmax {
                Some(t) => {
                    let _ = writeln!(out, "# argmax={} key_rate={}", num(t), num(report.value));
                }
                None => out.push_str("# argmax=none\n"),
            }
            out.push_str("t_ps,key_rate,raw_rate,i_ab,chi_be,p_success,mu\n");
            for row in &report.scan {
                let b = &row.breakdown;
                push_row(
                    &mut out,
                    &[
                        num(row.t_ps),
                        num(b.key_rate),
                        num(b.raw_rate),
                        num(b.i_ab),
                        num(b.chi_be),
                        num(b.p_success),
                        num(b.mu),
                    ],
                );
            }
            out
        }
        Format::Json => json_body(&envelope(cfg, "optimum", &report)).map_err(|e| Error::Domain(e.to_string()))?,
    };
    Ok(match report.argmax {
        Some(_) => Report::ok(body),
        None => Report::no_key(body, format!("no T_PS gives a positive key at {} km", cfg.distance)),
    })
}

fn success_prob(cfg: &RunConfig) -> Result<Report, CliError> {
    let grid: Vec<f64> = match cfg.tps {
        crate::config::TpsArg::Value(t) => vec![t],
        crate::config::TpsArg::Keyword(_) => {
            let n = (1.0 / SUCCESS_GRID_STEP).round() as u32;
            (1..=n).map(|i| f64::from(i) / f64::from(n)).collect()
        }
    };
    let rows = grid
        .iter()
        .map(|&t| Ok((t, success_probability(&SourceParams::new(cfg.va, cfg.k, t)?))))
        .collect::<Result<Vec<_>, Error>>()?;
    let body = match cfg.format {
        Format::Csv => {
            let mut out = csv_start(&["t_ps", "p_success"]);
            for (t, p) in &rows {
                push_row(&mut out, &[num(*t), num(*p)]);
            }
            out
        }
        Format::Json => {
            let rows: Vec<_> = rows.iter().map(|(t, p)| json!({ "t_ps": t, "p_success": p })).collect();
            json_body(&envelope(cfg, "rows", rows))?
        }
    };
    Ok(Report::ok(body))
}

fn mc_verify(cfg: &RunConfig) -> Result<Report, Error> {
    let src = SourceParams::new(cfg.va, cfg.k, cfg.fixed_tps())?;
    let mut report = run_equivalence_check(&McConfig::new(src, cfg.samples, cfg.seed)?)?;
    // wall-clock time would break byte-identical reruns, so it goes to stderr
    let runtime_ms = std::mem::take(&mut report.runtime_ms);
    let body = json_body(&report).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(Report {
        note: Some(format!("sampling took {runtime_ms:.1} ms")),
        ..Report::ok(body)
    })
}

fn max_distance_report(cfg: &RunConfig) -> Result<Report, Error> {
    let scenario = cfg.scenario();
    let d = max_distance(&scenario)?;
    let at = scenario.evaluate(d)?;
    let body = match cfg.format {
        Format::Csv => {
            let mut out = csv_start(&["max_distance_km", "key_rate", "t_ps", "t_ps_b"]);
            push_row(
                &mut out,
                &[num(d), num(at.breakdown.key_rate), num(at.tps_a), num(at.tps_b)],
            );
            out
        }
        Format::Json => json_body(&envelope(
            cfg,
            "result",
            json!({ "max_distance_km": d, "evaluation": at }),
        ))
        .map_err(|e| Error::Domain(e.to_string()))?,
    };
    Ok(Report::ok(body))
}
