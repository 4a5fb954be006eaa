use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// How a reported number was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    CertifiedBound,
    Sampled,
}

impl Provenance {
    fn tag(self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Quadrature => "quadrature",
            Provenance::MonteCarlo => "monte-carlo",
            Provenance::CertifiedBound => "certified-bound",
            Provenance::Sampled => "sampled",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Quantity {
    pub name: String,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Property {
    pub name: String,
    pub holds: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub input_sha256: String,
    pub config: serde_json::Value,
    pub quantities: Vec<Quantity>,
    pub properties: Vec<Property>,
    pub assertions: Vec<Assertion>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub artifacts: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        let canonical = serde_json::to_string(&(command, &config)).expect("config serializes");
        let input_sha256 = Sha256::digest(canonical.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        Self {
            command: command.to_string(),
            input_sha256,
            config,
            quantities: Vec::new(),
            properties: Vec::new(),
            assertions: Vec::new(),
            artifacts: serde_json::Value::Null,
        }
    }

    pub fn quantity(&mut self, name: &str, value: f64, error: Option<f64>, provenance: Provenance) {
        self.quantities.push(Quantity { name: name.into(), value: Some(value), error, provenance, note: None });
    }

    pub fn missing(&mut self, name: &str, provenance: Provenance, note: String) {
        self.quantities.push(Quantity { name: name.into(), value: None, error: None, provenance, note: Some(note) });
    }

    pub fn property(&mut self, name: &str, holds: bool, provenance: Provenance) {
        self.properties.push(Property { name: name.into(), holds, provenance });
    }

    pub fn assert(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion { name: name.into(), passed, detail });
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,name,value,error,provenance\n");
        let num = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        for q in &self.quantities {
            let _ = writeln!(out, "quantity,{},{},{},{}", q.name, num(q.value), num(q.error), q.provenance.tag());
        }
        for p in &self.properties {
            let _ = writeln!(out, "property,{},{},,{}", p.name, p.holds, p.provenance.tag());
        }
        for a in &self.assertions {
            let _ = writeln!(out, "assertion,{},{},,", a.name, if a.passed { "pass" } else { "fail" });
        }
        out
    }
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
