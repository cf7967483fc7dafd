//! Certification reports shared by every module.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
    Infeasible,
}

impl Status {
    pub fn is_ok(self) -> bool {
        matches!(self, Status::Pass | Status::NotApplicable)
    }
}

/// Extremal ball and/or function attaining a measured constant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ball: Option<BallTag>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub function: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallTag {
    pub center: usize,
    pub radius: f64,
    pub width: f64,
}

/// Column-labelled numeric table attached to a report (plot data, per-member rows).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|x| x.to_string())).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub inequality: String,
    #[serde(with = "num")]
    pub constant: f64,
    pub status: Status,
    #[serde(with = "num_opt", default)]
    pub budget: Option<f64>,
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness>,
    #[serde(with = "num_map", default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub context: BTreeMap<String, String>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub table: Option<Table>,
}

impl CertReport {
    /// A report whose status is decided by finiteness and the optional budget.
    pub fn measured(inequality: &str, constant: f64, family: &str) -> Self {
        let status = if constant.is_finite() { Status::Pass } else { Status::Infeasible };
        CertReport {
            inequality: inequality.to_string(),
            constant,
            status,
            budget: None,
            family: family.to_string(),
            witness: None,
            values: BTreeMap::new(),
            context: BTreeMap::new(),
            notes: Vec::new(),
            table: None,
        }
    }

    pub fn with_status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }

    /// Attach a budget; a finite constant above it fails.
    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = Some(budget);
        if self.status == Status::Pass && self.constant > budget {
            self.status = Status::Fail;
        }
        self
    }

    pub fn with_witness(mut self, w: Witness) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }

    pub fn set(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    pub fn tag(mut self, key: &str, v: impl Into<String>) -> Self {
        self.context.insert(key.to_string(), v.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Ordered collection of reports from one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: String,
    pub seed: u64,
    #[serde(default)]
    pub config: serde_json::Value,
    pub reports: Vec<CertReport>,
}

impl ReportBundle {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        ReportBundle { schema_version: SCHEMA_VERSION.to_string(), seed, config, reports: Vec::new() }
    }

    pub fn status(&self) -> Status {
        if self.reports.iter().all(|r| r.status.is_ok()) {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let version = raw
            .get("schema_version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Schema("missing".into()))?;
        let major = version.split('.').next().unwrap_or("");
        let ours = SCHEMA_VERSION.split('.').next().unwrap_or("");
        if major != ours {
            return Err(Error::Schema(version.to_string()));
        }
        Ok(serde_json::from_value(raw)?)
    }
}

// JSON has no infinities; non-finite numbers travel as strings.
pub(crate) mod num {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        N(f64),
        S(String),
    }

    pub(super) fn to_f64(r: Repr) -> Result<f64, String> {
        match r {
            Repr::N(x) => Ok(x),
            Repr::S(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(format!("bad number `{other}`")),
            },
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        to_f64(Repr::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod num_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::num::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let r: Option<super::num::Repr> = Option::deserialize(d)?;
        r.map(super::num::to_f64).transpose().map_err(serde::de::Error::custom)
    }
}

pub(crate) mod num_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    struct One<'a>(&'a f64);

    impl serde::Serialize for One<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            super::num::serialize(self.0, s)
        }
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &One(v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw: BTreeMap<String, super::num::Repr> = BTreeMap::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| super::num::to_f64(v).map(|x| (k, x)))
            .collect::<Result<_, _>>()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_constants_round_trip() {
        let r = CertReport::measured("pi", f64::INFINITY, "eigen").value("x", f64::NAN).value("y", 2.5);
        let mut b = ReportBundle::new(7, serde_json::Value::Null);
        b.reports.push(r);
        let text = b.to_json().unwrap();
        let back = ReportBundle::from_json(&text).unwrap();
        assert!(back.reports[0].constant.is_infinite());
        assert!(back.reports[0].values["x"].is_nan());
        assert_eq!(back.reports[0].values["y"], 2.5);
        assert_eq!(back.reports[0].status, Status::Infeasible);
    }

    #[test]
    fn loader_rejects_unknown_major_version() {
        let text = r#"{"schema_version":"2.0","seed":1,"reports":[]}"#;
        assert!(matches!(ReportBundle::from_json(text), Err(Error::Schema(_))));
        let ok = r#"{"schema_version":"1.7","seed":1,"reports":[]}"#;
        assert!(ReportBundle::from_json(ok).is_ok());
    }

    #[test]
    fn budget_turns_pass_into_fail() {
        let r = CertReport::measured("vd", 3.0, "f").with_budget(2.0);
        assert_eq!(r.status, Status::Fail);
        let r = CertReport::measured("vd", 1.0, "f").with_budget(2.0);
        assert_eq!(r.status, Status::Pass);
    }
}
