use std::path::{Path, PathBuf};

use bnmix::eval::{lmppd, mshd, select_k, select_k_on_split, WaicReport};
use bnmix::io::{read_dataset, write_atomic, write_dataset, DatasetLayout};
use bnmix::mixture::{edge_frequencies, read_trace, run_chain, write_trace, ChainTrace};
use bnmix::synth::{
    generate, read_truth, write_truth, SynthCondition, DEFAULT_COVARIATES, DEFAULT_NODES,
};
use bnmix::{Error, Result};
use serde::Serialize;

use crate::config::{
    check_input, check_output, parse_k_range, required, EvaluateOpts, FitOpts, GenerateOpts,
    SelectOpts, SummarizeOpts,
};

pub const SUMMARY_SCHEMA: &str = "bnmix-summary";
pub const REPORT_SCHEMA: &str = "bnmix-report";
pub const MANIFEST_SCHEMA: &str = "bnmix-manifest";
pub const OUTPUT_VERSION: u32 = 1;

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports hold only finite numbers");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    version: u32,
    command: &'static str,
    condition: &'a SynthCondition,
    rows: usize,
    dataset: &'a Path,
    truth: &'a Path,
}

pub fn generate_cmd(opts: GenerateOpts) -> Result<()> {
    let condition = SynthCondition {
        components: required(opts.components, "components")?,
        n_per_component: required(opts.per_component, "per_component")?,
        sparsity: required(opts.sparsity, "sparsity")?.parse()?,
        density: required(opts.density, "density")?.parse()?,
        seed: required(opts.seed, "seed")?,
        nodes: opts.nodes.unwrap_or(DEFAULT_NODES),
        covariates: opts.covariates.unwrap_or(DEFAULT_COVARIATES),
        covariate_kind: opts
            .covariate_kind
            .as_deref()
            .unwrap_or("gaussian")
            .parse()?,
    };
    condition.validate()?;
    let out = required(opts.out, "out")?;
    let truth_path = required(opts.truth, "truth")?;
    check_output(&out, "dataset")?;
    check_output(&truth_path, "ground truth")?;
    if out == truth_path {
        return Err(Error::Parameter(
            "out and truth must be different files".into(),
        ));
    }

    let (truth, data) = generate(&condition)?;
    write_dataset(&out, &data)?;
    write_truth(&truth_path, &truth)?;
    log::info!("wrote {} rows to {}", data.n(), out.display());
    emit(
        None,
        &to_json(&Manifest {
            schema: MANIFEST_SCHEMA,
            version: OUTPUT_VERSION,
            command: "generate",
            condition: &condition,
            rows: data.n(),
            dataset: &out,
            truth: &truth_path,
        }),
    )
}

#[derive(Serialize)]
struct ComponentAcceptance {
    component: usize,
    proposed: u64,
    accepted: u64,
    rate: f64,
}

#[derive(Serialize)]
struct Summary {
    schema: &'static str,
    version: u32,
    k: usize,
    m: usize,
    p: usize,
    n: usize,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
    records: usize,
    acceptance: Vec<ComponentAcceptance>,
    log_scores: Vec<f64>,
    /// Per component, an M×M matrix; entry `[i][j]` is the posterior frequency of `i -> j`.
    edge_frequencies: Vec<Vec<Vec<f64>>>,
}

fn summary(trace: &ChainTrace) -> Summary {
    let h = &trace.header;
    Summary {
        schema: SUMMARY_SCHEMA,
        version: OUTPUT_VERSION,
        k: h.k,
        m: h.m,
        p: h.p,
        n: h.n,
        iterations: h.iterations,
        burn_in: h.burn_in,
        thin: h.thin,
        seed: h.seed,
        records: trace.records.len(),
        acceptance: trace
            .acceptance
            .iter()
            .enumerate()
            .map(|(c, s)| ComponentAcceptance {
                component: c + 1,
                proposed: s.proposed,
                accepted: s.accepted,
                rate: s.acceptance_rate(),
            })
            .collect(),
        log_scores: trace.log_scores.clone(),
        edge_frequencies: edge_frequencies(trace)
            .iter()
            .map(|f| f.iter_rows().map(<[f64]>::to_vec).collect())
            .collect(),
    }
}

pub fn fit_cmd(opts: FitOpts) -> Result<()> {
    let data_path = required(opts.data, "data")?;
    check_input(&data_path, "dataset")?;
    let layout = opts.layout.resolve()?;
    let k = required(opts.k, "k")?;
    let config = opts.chain.resolve(k)?;
    let trace_path = required(opts.trace, "trace")?;
    check_output(&trace_path, "trace")?;
    if let Some(p) = &opts.summary {
        check_output(p, "summary")?;
    }

    let data = read_dataset(&data_path, layout)?;
    log::info!(
        "fitting K = {k} to {} rows for {} sweeps (seed {})",
        data.n(),
        config.iterations,
        config.seed
    );
    let trace = run_chain(&data, &config)?;
    write_trace(&trace_path, &trace)?;
    emit(opts.summary.as_deref(), &to_json(&summary(&trace)))
}

pub fn summarize_cmd(opts: SummarizeOpts) -> Result<()> {
    let trace_path = required(opts.trace, "trace")?;
    check_input(&trace_path, "trace")?;
    if let Some(p) = &opts.out {
        check_output(p, "summary")?;
    }
    let trace = read_trace(&trace_path)?;
    emit(opts.out.as_deref(), &to_json(&summary(&trace)))
}

pub fn select_cmd(opts: SelectOpts) -> Result<()> {
    let data_path = required(opts.data, "data")?;
    check_input(&data_path, "dataset")?;
    if let Some(p) = &opts.test_data {
        check_input(p, "test dataset")?;
    }
    let layout = opts.layout.resolve()?;
    let k_range = parse_k_range(opts.k_range.as_deref().unwrap_or("1..5"))?;
    let test_fraction = opts.test_fraction.unwrap_or(0.1);
    if opts.test_data.is_none() && !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "test_fraction: must be in (0, 1), got {test_fraction}"
        )));
    }
    let base = opts.chain.resolve(1)?;
    for &k in &k_range {
        opts.chain.resolve(k)?;
    }
    if let Some(p) = &opts.out {
        check_output(p, "table")?;
    }

    let data = read_dataset(&data_path, layout)?;
    let table = match &opts.test_data {
        Some(p) => select_k_on_split(&data, &read_dataset(p, layout)?, &k_range, &base)?,
        None => select_k(&data, &k_range, test_fraction, &base)?,
    };
    log::info!("highest held-out LMPPD at K = {}", table.best_k);
    emit(opts.out.as_deref(), &table.to_csv())
}

#[derive(Serialize)]
struct MshdSection {
    value: f64,
    /// True component (1-based) matched to each fitted component, or null.
    labelling: Vec<Option<usize>>,
    mean_shd: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct LmppdSection {
    total: f64,
    points: usize,
    samples: usize,
}

#[derive(Serialize)]
struct Report {
    schema: &'static str,
    version: u32,
    records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mshd: Option<MshdSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lmppd: Option<LmppdSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    waic: Option<WaicReport>,
}

pub fn evaluate_cmd(opts: EvaluateOpts) -> Result<()> {
    let trace_path = required(opts.trace, "trace")?;
    check_input(&trace_path, "trace")?;
    if opts.truth.is_none() && opts.test_data.is_none() && opts.data.is_none() {
        return Err(Error::Parameter(
            "nothing to evaluate: supply truth (MSHD), test_data (LMPPD) or data (WAIC)".into(),
        ));
    }
    let inputs: [(&Option<PathBuf>, &str); 3] = [
        (&opts.truth, "MSHD unavailable: ground-truth file"),
        (&opts.test_data, "LMPPD unavailable: test dataset"),
        (&opts.data, "WAIC unavailable: training dataset"),
    ];
    for (path, what) in inputs {
        if let Some(p) = path {
            check_input(p, what)?;
        }
    }
    if let Some(p) = &opts.out {
        check_output(p, "report")?;
    }

    let trace = read_trace(&trace_path)?;
    let layout = DatasetLayout {
        modifiable: trace.m(),
        covariates: trace.header.p,
        labels: opts.labels.unwrap_or(false),
    };
    let mshd = match &opts.truth {
        Some(p) => {
            let truth = read_truth(p)?;
            let r = mshd(&trace, &truth.graphs).map_err(|e| e.context("MSHD"))?;
            Some(MshdSection {
                value: r.value,
                labelling: r.best.iter().map(|b| b.map(|j| j + 1)).collect(),
                mean_shd: r.mean_shd,
            })
        }
        None => None,
    };
    let lmppd = match &opts.test_data {
        Some(p) => {
            let test = read_dataset(p, layout)?;
            let s = lmppd(&test, &trace).map_err(|e| e.context("LMPPD"))?;
            Some(LmppdSection {
                total: s.total,
                points: s.per_point.len(),
                samples: s.samples,
            })
        }
        None => None,
    };
    let waic = match &opts.data {
        Some(p) => Some(
            bnmix::eval::waic(&read_dataset(p, layout)?, &trace).map_err(|e| e.context("WAIC"))?,
        ),
        None => None,
    };
    emit(
        opts.out.as_deref(),
        &to_json(&Report {
            schema: REPORT_SCHEMA,
            version: OUTPUT_VERSION,
            records: trace.records.len(),
            mshd,
            lmppd,
            waic,
        }),
    )
}
