use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Suite;
use crate::error::{Error, Result};
use crate::report::{CertReport, ReportBundle};

const AXES: [&str; 5] = ["level", "lambda", "epsilon", "p", "resolution"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    KernelProfile,
    PhiVsLambda,
    ConstantVsLevel,
}

impl PlotKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "kernel-profile" => Ok(PlotKind::KernelProfile),
            "phi-vs-lambda" => Ok(PlotKind::PhiVsLambda),
            "constant-vs-level" => Ok(PlotKind::ConstantVsLevel),
            other => Err(Error::Config(format!("unknown plot kind `{other}`"))),
        }
    }

    pub fn header(self) -> Vec<&'static str> {
        let mut h = AXES.to_vec();
        h.extend(match self {
            PlotKind::KernelProfile => vec!["t", "source", "target", "distance", "kernel"],
            PlotKind::PhiVsLambda => vec!["c_phi", "c_phi_hat", "status"],
            PlotKind::ConstantVsLevel => vec!["inequality", "constant", "status"],
        });
        h
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn axes(r: &CertReport) -> Vec<String> {
    AXES.iter().map(|k| r.context.get(*k).cloned().unwrap_or_default()).collect()
}

fn status(r: &CertReport) -> String {
    serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

/// One row per report of `suite`: id, constant, status, sweep values, ball and family.
pub fn suite_csv(bundle: &ReportBundle, suite: Suite) -> Result<String> {
    let mut w = writer();
    let mut header = vec!["inequality", "constant", "status"];
    header.extend(AXES);
    header.extend(["ball", "family"]);
    w.write_record(&header).map_err(csv_err)?;
    for r in bundle.reports.iter().filter(|r| r.context.get("suite").map(String::as_str) == Some(suite.name())) {
        let mut row = vec![r.inequality.clone(), fmt(r.constant), status(r)];
        row.extend(axes(r));
        row.push(r.context.get("ball").cloned().unwrap_or_default());
        row.push(r.family.clone());
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Long-format plot data. An empty bundle gives the header alone; a non-empty bundle
/// without the needed reports is an error.
pub fn emit_plot_data(bundle: &ReportBundle, kind: PlotKind) -> Result<String> {
    let mut w = writer();
    w.write_record(kind.header()).map_err(csv_err)?;
    let wanted = |r: &&CertReport| match kind {
        PlotKind::KernelProfile => r.inequality == "kernel-profile",
        PlotKind::PhiVsLambda => r.inequality == "phi",
        PlotKind::ConstantVsLevel => true,
    };
    let picked: Vec<&CertReport> = bundle.reports.iter().filter(wanted).collect();
    if picked.is_empty() && !bundle.reports.is_empty() {
        let need = match kind {
            PlotKind::KernelProfile => "propagator",
            PlotKind::PhiVsLambda => "harnack",
            PlotKind::ConstantVsLevel => "any",
        };
        return Err(Error::Config(format!("bundle has no {need} suite reports")));
    }
    for r in picked {
        let ax = axes(r);
        match kind {
            PlotKind::KernelProfile => {
                let Some(t) = &r.table else { continue };
                let source = fmt(r.get("source").unwrap_or(f64::NAN));
                for row in &t.rows {
                    let mut rec = ax.clone();
                    rec.extend([fmt(row[0]), source.clone(), fmt(row[1]), fmt(row[2]), fmt(row[3])]);
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
            PlotKind::PhiVsLambda => {
                let mut rec = ax;
                rec.extend([
                    fmt(r.constant),
                    fmt(r.get("c_phi_hat").unwrap_or(f64::NAN)),
                    status(r),
                ]);
                w.write_record(&rec).map_err(csv_err)?;
            }
            PlotKind::ConstantVsLevel => {
                let mut rec = ax;
                rec.extend([r.inequality.clone(), fmt(r.constant), status(r)]);
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

/// Writes `<name>.json` and one `<name>-<suite>.csv` per suite present; returns the paths.
pub fn write_outputs(bundle: &ReportBundle, dir: &Path, name: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join(format!("{name}.json"));
    std::fs::write(&json, bundle.to_json()?)?;
    let mut out = vec![json];
    for s in Suite::ALL {
        if bundle.reports.iter().any(|r| r.context.get("suite").map(String::as_str) == Some(s.name())) {
            let p = dir.join(format!("{name}-{}.csv", s.name()));
            std::fs::write(&p, suite_csv(bundle, s)?)?;
            out.push(p);
        }
    }
    Ok(out)
}
