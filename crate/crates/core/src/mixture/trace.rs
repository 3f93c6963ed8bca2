//! Chain traces and their line-delimited JSON file format.
//!
//! Line 1 is a header carrying the schema name and version, then one line per
//! kept sweep, then a summary line with the full joint log-score series and the
//! structure-move acceptance counts. Labels are written 1-based.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AssignmentLikelihood, ChainState, FitConfig};
use crate::data::{DataMatrix, Dataset};
use crate::error::{Error, Result};
use crate::gating::{Assignments, GatingCoefficients};
use crate::gbn::ComponentParams;
use crate::graphs::Dag;
use crate::io::{read_text, write_atomic};
use crate::structure::MoveStats;

pub const TRACE_SCHEMA: &str = "bnmix-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub version: u32,
    pub k: usize,
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub gate_prior_var: f64,
    pub likelihood: AssignmentLikelihood,
}

impl TraceHeader {
    pub fn for_fit(data: &Dataset, config: &FitConfig) -> Self {
        Self {
            schema: TRACE_SCHEMA.to_string(),
            version: TRACE_VERSION,
            k: config.k,
            m: data.m(),
            p: data.p(),
            n: data.n(),
            iterations: config.iterations,
            burn_in: config.burn_in(),
            thin: config.thin,
            seed: config.seed,
            gate_prior_var: config.gate_prior_var,
            likelihood: config.likelihood,
        }
    }
}

/// One kept sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub z: Assignments,
    pub beta: GatingCoefficients,
    pub graphs: Vec<Dag>,
    pub params: Vec<ComponentParams>,
    pub log_score: f64,
}

impl TraceRecord {
    pub fn from_state(state: &ChainState) -> Self {
        Self {
            iteration: state.iteration,
            z: state.z.clone(),
            beta: state.beta.clone(),
            graphs: state.graphs.clone(),
            params: state.params.clone(),
            log_score: state.log_score,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
    /// Joint log-score after every sweep, burn-in included.
    pub log_scores: Vec<f64>,
    /// Structure-move counts per component over the whole run.
    pub acceptance: Vec<MoveStats>,
}

impl ChainTrace {
    pub fn new(header: TraceHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
            log_scores: Vec::new(),
            acceptance: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.header.k
    }

    pub fn m(&self) -> usize {
        self.header.m
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    iteration: usize,
    z: Vec<usize>,
    beta: Vec<f64>,
    graphs: Vec<String>,
    params: Vec<Vec<f64>>,
    log_score: f64,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    log_scores: Vec<f64>,
    proposed: Vec<u64>,
    accepted: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Record(RecordLine),
    Summary(SummaryLine),
}

fn to_json(line: &Line) -> String {
    serde_json::to_string(line).expect("trace lines contain only finite numbers")
}

/// Serialises the trace to its text form.
pub fn trace_to_string(trace: &ChainTrace) -> String {
    let mut out = to_json(&Line::Header(trace.header.clone()));
    out.push('\n');
    for r in &trace.records {
        let line = Line::Record(RecordLine {
            iteration: r.iteration,
            z: r.z.labels().iter().map(|z| z + 1).collect(),
            beta: r.beta.as_slice().to_vec(),
            graphs: r.graphs.iter().map(Dag::to_bitstring).collect(),
            params: r.params.iter().map(ComponentParams::to_flat).collect(),
            log_score: r.log_score,
        });
        out.push_str(&to_json(&line));
        out.push('\n');
    }
    out.push_str(&to_json(&Line::Summary(SummaryLine {
        log_scores: trace.log_scores.clone(),
        proposed: trace.acceptance.iter().map(|s| s.proposed).collect(),
        accepted: trace.acceptance.iter().map(|s| s.accepted).collect(),
    })));
    out.push('\n');
    out
}

pub fn write_trace(path: &Path, trace: &ChainTrace) -> Result<()> {
    write_atomic(path, trace_to_string(trace).as_bytes())
}

pub fn read_trace(path: &Path) -> Result<ChainTrace> {
    parse_trace(&read_text(path)?).map_err(|e| e.context(path.display()))
}

/// Parses the text form; rejects unknown schemas and versions.
pub fn parse_trace(text: &str) -> Result<ChainTrace> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let parse = |no: usize, l: &str| -> Result<Line> {
        serde_json::from_str(l).map_err(|e| Error::parse(format!("line {}", no + 1), e.to_string()))
    };
    let header = match lines.next() {
        Some((no, l)) => {
            let value: serde_json::Value = serde_json::from_str(l)
                .map_err(|e| Error::parse(format!("line {}", no + 1), e.to_string()))?;
            let schema = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
            if schema != TRACE_SCHEMA {
                return Err(Error::parse(
                    "line 1",
                    format!("not a trace file (schema {schema:?})"),
                ));
            }
            let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
            if version != TRACE_VERSION {
                return Err(Error::Schema {
                    what: "trace".into(),
                    found: version,
                    expected: TRACE_VERSION,
                });
            }
            match parse(no, l)? {
                Line::Header(h) => h,
                _ => return Err(Error::parse("line 1", "expected a header line")),
            }
        }
        None => return Err(Error::parse("line 1", "empty trace file")),
    };
    let mut trace = ChainTrace::new(header);
    let (k, m, p, n) = (
        trace.header.k,
        trace.header.m,
        trace.header.p,
        trace.header.n,
    );
    let mut summary_seen = false;
    for (no, l) in lines {
        let loc = format!("line {}", no + 1);
        if summary_seen {
            return Err(Error::parse(loc, "content after the summary line"));
        }
        match parse(no, l)? {
            Line::Header(_) => return Err(Error::parse(loc, "duplicate header")),
            Line::Summary(s) => {
                if s.proposed.len() != s.accepted.len() {
                    return Err(Error::parse(loc, "acceptance arrays differ in length"));
                }
                trace.log_scores = s.log_scores;
                trace.acceptance = s
                    .proposed
                    .into_iter()
                    .zip(s.accepted)
                    .map(|(proposed, accepted)| MoveStats { proposed, accepted })
                    .collect();
                summary_seen = true;
            }
            Line::Record(r) => {
                let rec = record_from_line(r, k, m, p, n).map_err(|e| e.context(&loc))?;
                if let Some(prev) = trace.records.last() {
                    if rec.iteration <= prev.iteration {
                        return Err(Error::parse(loc, "iteration stamps must increase"));
                    }
                }
                trace.records.push(rec);
            }
        }
    }
    if !summary_seen {
        return Err(Error::parse(
            "end of file",
            "missing summary line (truncated trace?)",
        ));
    }
    Ok(trace)
}

fn record_from_line(r: RecordLine, k: usize, m: usize, p: usize, n: usize) -> Result<TraceRecord> {
    if r.z.len() != n || r.z.iter().any(|&z| z == 0 || z > k) {
        return Err(Error::parse("z", format!("expected {n} labels in 1..={k}")));
    }
    if r.graphs.len() != k || r.params.len() != k {
        return Err(Error::parse("graphs", format!("expected {k} components")));
    }
    let graphs = r
        .graphs
        .iter()
        .map(|s| Dag::from_bitstring(s))
        .collect::<Result<Vec<_>>>()?;
    if graphs.iter().any(|g| g.m() != m) {
        return Err(Error::parse("graphs", format!("expected {m}-node graphs")));
    }
    let params = graphs
        .iter()
        .zip(&r.params)
        .map(|(g, flat)| ComponentParams::from_flat(g, flat))
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceRecord {
        iteration: r.iteration,
        z: Assignments(r.z.into_iter().map(|z| z - 1).collect()),
        beta: GatingCoefficients::from_values(k, p, r.beta)?,
        graphs,
        params,
        log_score: r.log_score,
    })
}

/// Posterior edge frequencies per component: entry `(i, j)` is the share of
/// records whose graph has `i -> j`.
pub fn edge_frequencies(trace: &ChainTrace) -> Vec<DataMatrix> {
    let (k, m) = (trace.k(), trace.m());
    let mut out = vec![DataMatrix::zeros(m, m); k];
    if trace.records.is_empty() {
        return out;
    }
    let s = trace.records.len() as f64;
    for r in &trace.records {
        for (c, g) in r.graphs.iter().enumerate() {
            for (i, j) in g.edges() {
                out[c].row_mut(i)[j] += 1.0 / s;
            }
        }
    }
    out
}
