//! Commands over a manifest and their reports.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::algebra::{verify_algebra, Algebra, Carrier};
use crate::bar::{verify_bar, Bar};
use crate::chain::ChainComplex;
use crate::dstructure::{
    carrier_window, check_bar_identity, is_equivalence, roundtrip_algebra, roundtrip_dstructure, stable_degrees,
    verify_dstructure, verify_morphism, BarDStructure, Cn, DMorphism, Generators, RoundtripReport,
};
use crate::io::{serialize, Built, DStructureSpec, Manifest};
use crate::operad::{verify_operad, CheckOutcome};
use crate::tree::enumerate;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Trees { n: usize, classes: bool },
    Bar,
    Homology,
    Dstruct,
    Roundtrip,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Trees { .. } => "trees",
            Command::Bar => "bar",
            Command::Homology => "homology",
            Command::Dstruct => "dstruct",
            Command::Roundtrip => "roundtrip",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Report {
    pub command: String,
    /// SHA-256 of the command line and the canonical manifest text.
    pub inputs_digest: String,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    /// Homology dimensions by degree, per named complex.
    pub homology: BTreeMap<String, BTreeMap<i64, usize>>,
    pub data: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u128>,
}

impl Report {
    fn new(command: &Command, inputs: &str) -> Report {
        let digest = Sha256::digest(format!("{command:?}\n{inputs}").as_bytes());
        Report {
            command: command.name().to_string(),
            inputs_digest: digest.iter().map(|b| format!("{b:02x}")).collect(),
            passed: true,
            checks: Vec::new(),
            homology: BTreeMap::new(),
            data: BTreeMap::new(),
            timing_ms: None,
        }
    }

    fn push(&mut self, prefix: &str, mut c: CheckOutcome) {
        if !prefix.is_empty() {
            c.name = format!("{prefix}/{}", c.name);
        }
        self.passed &= c.passed;
        self.checks.push(c);
    }

    /// Records an error as a failed check.
    fn error(&mut self, name: &str, e: impl fmt::Display) {
        let mut c = CheckOutcome::new(name);
        c.fail(e.to_string());
        self.push("", c);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.command, if self.passed { "PASS" } else { "FAIL" })?;
        for c in &self.checks {
            writeln!(f, "  {:<6} {} ({} instances)", if c.passed { "ok" } else { "FAILED" }, c.name, c.instances)?;
            for w in &c.failures {
                writeln!(f, "         {w}")?;
            }
        }
        for (name, table) in &self.homology {
            let cells: Vec<String> = table.iter().map(|(k, d)| format!("H_{k}={d}")).collect();
            writeln!(f, "  {name}: {}", if cells.is_empty() { "0".to_string() } else { cells.join(" ") })?;
        }
        for (k, v) in &self.data {
            writeln!(f, "  {k}: {v}")?;
        }
        if let Some(t) = self.timing_ms {
            writeln!(f, "  time: {t} ms")?;
        }
        Ok(())
    }
}

fn homology_table(c: &ChainComplex) -> BTreeMap<i64, usize> {
    c.basis().degrees().into_iter().map(|k| (k, c.homology_in_degree(k).dim)).collect()
}

/// Enumeration of trees with `n` vertices, planar or up to equivalence.
pub fn trees_report(n: usize, classes: bool, num_sorts: usize) -> Report {
    let cmd = Command::Trees { n, classes };
    let mut r = Report::new(&cmd, &format!("sorts {num_sorts}"));
    match enumerate(n, classes, num_sorts) {
        Ok(ts) => {
            r.data.insert("count".into(), json!(ts.len()));
            r.data.insert("trees".into(), json!(ts.iter().map(|t| t.to_string()).collect::<Vec<_>>()));
        }
        Err(e) => r.error("enumerate", e),
    }
    r
}

fn roundtrip_into(r: &mut Report, prefix: &str, rt: RoundtripReport) {
    for c in rt.checks {
        r.push(prefix, c);
    }
    let mut eq = CheckOutcome::new("equivalence");
    eq.record(rt.equivalence.verdict != Some(false), || format!("{:?}", rt.equivalence.evidence));
    r.push(prefix, eq);
    r.homology.insert(format!("{prefix}/persistent-ranks"), rt.persistent_ranks);
    r.homology.insert(format!("{prefix}/target"), rt.target_homology);
    r.data.insert(format!("{prefix}/bar-dims"), json!(rt.bar_dims));
    r.data.insert(format!("{prefix}/equivalence"), json!(rt.equivalence));
}

fn bar_section<C: Carrier>(r: &mut Report, a: &C, size: usize) {
    let bar = match Bar::new(a) {
        Ok(b) => b,
        Err(e) => return r.error("bar", e),
    };
    match verify_bar(&bar, size) {
        Ok(v) => v.checks.into_iter().for_each(|c| r.push("bar", c)),
        Err(e) => return r.error("bar", e),
    }
    let win = match bar.quotient_window(size) {
        Ok(w) => w,
        Err(e) => return r.error("bar-window", e),
    };
    r.homology.insert("bar-window".into(), homology_table(&win.complex));
    match (win.persistent_ranks(), stable_degrees(&win.complex, &win.inner_mask)) {
        (Ok(p), Ok(s)) => {
            r.homology.insert("bar-persistent".into(), p);
            r.data.insert("bar-stable-degrees".into(), json!(s));
        }
        (Err(e), _) | (_, Err(e)) => r.error("bar-window", e),
    }
    match carrier_window(a, size.saturating_sub(2)) {
        Ok(w) => {
            r.homology.insert("algebra".into(), homology_table(&w.complex));
        }
        Err(e) => r.error("algebra-window", e),
    }
}

fn dstruct_section<G: Generators>(r: &mut Report, prefix: &str, g: &G, size: usize) {
    match verify_dstructure(g, size) {
        Ok(v) => v.checks.into_iter().for_each(|c| r.push(prefix, c)),
        Err(e) => return r.error(prefix, e),
    }
    match DMorphism::identity(g) {
        Ok(m) => {
            match verify_morphism(&m, size) {
                Ok(mut c) => {
                    c.name = "identity-morphism".into();
                    r.push(prefix, c);
                }
                Err(e) => r.error(&format!("{prefix}/identity-morphism"), e),
            }
            match is_equivalence(&m, size) {
                Ok(eq) => {
                    let mut c = CheckOutcome::new("identity-equivalence");
                    c.record(eq.verdict != Some(false), || format!("{:?}", eq.evidence));
                    r.push(prefix, c);
                }
                Err(e) => r.error(&format!("{prefix}/identity-equivalence"), e),
            }
        }
        Err(e) => r.error(&format!("{prefix}/identity"), e),
    }
    match Cn::new(g).map_err(|e| e.to_string()).and_then(|cn| carrier_window(&cn, size).map_err(|e| e.to_string())) {
        Ok(w) => {
            r.homology.insert(format!("{prefix}/CN-window"), homology_table(&w.complex));
            if let Ok(s) = stable_degrees(&w.complex, &w.inner_mask) {
                r.data.insert(format!("{prefix}/CN-stable-degrees"), json!(s));
            }
        }
        Err(e) => r.error(&format!("{prefix}/CN-window"), e),
    }
}

fn need<'b, T>(x: &'b Option<T>, what: &str) -> Result<&'b T, String> {
    x.as_ref().ok_or_else(|| format!("this command needs a [{what}] section"))
}

/// Runs a command. `Err` means the manifest cannot serve the command at all; failures of the
/// computations themselves are recorded as failing checks.
pub fn run(command: &Command, m: &Manifest) -> Result<Report, String> {
    let built: Built = m.build()?;
    let size = m.window.size;
    let mut r = Report::new(command, &serialize(m));
    match command {
        Command::Trees { n, classes } => {
            let sorts = built.operad.as_ref().map(|o| o.num_sorts()).or(m.sorts.as_ref().map(|s| s.len())).unwrap_or(1);
            let mut t = trees_report(*n, *classes, sorts);
            t.inputs_digest = r.inputs_digest;
            r = t;
        }
        Command::Validate => {
            if let Some(op) = &built.operad {
                verify_operad(op, m.cap).checks.into_iter().for_each(|c| r.push("operad", c));
                r.data.insert("operad/certificate".into(), json!(op.certificate().to_string()));
            }
            if let Some(a) = &built.algebra {
                verify_algebra(a, m.cap).checks.into_iter().for_each(|c| r.push("algebra", c));
            }
            if let Some(ds) = &built.dstructure {
                match verify_dstructure(ds, size) {
                    Ok(v) => v.checks.into_iter().for_each(|c| r.push("dstructure", c)),
                    Err(e) => r.error("dstructure", e),
                }
            }
            if let Some(c) = &built.complex {
                let mut ok = CheckOutcome::new("d-squared");
                ok.record(true, String::new);
                r.push("complex", ok);
                r.data.insert("complex/dims".into(), json!(c.dims_by_degree()));
            }
        }
        Command::Bar => {
            let a = need(&built.algebra, "algebra")?;
            bar_section(&mut r, a, size);
        }
        Command::Homology => {
            if let Some(c) = &built.complex {
                r.homology.insert("complex".into(), homology_table(c));
            }
            if let Some(a) = &built.algebra {
                r.homology.insert("algebra".into(), homology_table(&a.complex()));
            }
            if built.complex.is_none() && built.algebra.is_none() {
                return Err("this command needs a [complex] or [algebra] section".into());
            }
        }
        Command::Dstruct => {
            let spec = need(&m.dstructure, "dstructure")?;
            match spec {
                DStructureSpec::Bar => {
                    let a = need(&built.algebra, "algebra")?;
                    dstruct_bar(&mut r, a, size);
                }
                DStructureSpec::Explicit(_) => {
                    let ds = built.dstructure.as_ref().expect("explicit D-structures are built");
                    dstruct_section(&mut r, "dstructure", ds, size);
                }
            }
        }
        Command::Roundtrip => {
            if built.algebra.is_none() && built.dstructure.is_none() && !matches!(m.dstructure, Some(DStructureSpec::Bar)) {
                return Err("this command needs an [algebra] or [dstructure] section".into());
            }
            if let Some(a) = &built.algebra {
                match roundtrip_algebra(a, size) {
                    Ok(rt) => roundtrip_into(&mut r, "algebra", rt),
                    Err(e) => r.error("algebra", e),
                }
            }
            if let Some(ds) = &built.dstructure {
                match roundtrip_dstructure(ds, size) {
                    Ok(rt) => roundtrip_into(&mut r, "dstructure", rt),
                    Err(e) => r.error("dstructure", e),
                }
            }
            if let (Some(DStructureSpec::Bar), Some(a)) = (&m.dstructure, &built.algebra) {
                match BarDStructure::new(a).and_then(|ds| roundtrip_dstructure(&ds, size)) {
                    Ok(rt) => roundtrip_into(&mut r, "bar-dstructure", rt),
                    Err(e) => r.error("bar-dstructure", e),
                }
            }
        }
    }
    Ok(r)
}

fn dstruct_bar(r: &mut Report, a: &Algebra, size: usize) {
    let ds = match BarDStructure::new(a) {
        Ok(d) => d,
        Err(e) => return r.error("bar-dstructure", e),
    };
    match check_bar_identity(&ds, size) {
        Ok(c) => r.push("bar-dstructure", c),
        Err(e) => r.error("bar-dstructure", e),
    }
    dstruct_section(r, "bar-dstructure", &ds, size);
}

/// [`run`] with the elapsed wall time recorded.
pub fn run_timed(command: &Command, m: &Manifest) -> Result<Report, String> {
    let start = Instant::now();
    let mut r = run(command, m)?;
    r.timing_ms = Some(start.elapsed().as_millis());
    Ok(r)
}
