//! Batch front end: `normalize`, `label`, `refine`, `metrics` and
//! `gradcheck` over JSONL corpora.
//!
//! Exit codes: 1 usage or I/O, 2 parse failure, 3 validation failure,
//! 4 metric pairing failure.

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{run_gradient_suite, SuiteReport};
use crate::config::{Config, ConfigError};
use crate::continuity::{junction_sites, label_glyph, line_sites};
use crate::corpus::{load_corpus, save_corpus, write_jsonl, CorpusError, CorpusRecord, RecordLabels};
use crate::metrics::{accuracy_alignment, accuracy_continuity, chamfer_re, iou, l1_image, MetricsRow};
use crate::model::{normalize_glyph, validate_glyph, Glyph};
use crate::raster::rasterize;
use crate::refine::{refine_glyph, ClassProbs};
use crate::scalar::Point;
use crate::svg_io::serialize_path_data;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("pairing error: {0}")]
    Pairing(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Pairing(_) => 4,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            ConfigError::Syntax(_) => CliError::Parse(e.to_string()),
            ConfigError::Field { .. } => CliError::Validation(e.to_string()),
        }
    }
}

fn io_err(path: &FsPath, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "outline-refine", version, about = "Glyph outline continuity and alignment refinement")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Minimum argmax probability for a prediction to be applied.
    #[arg(long, global = true)]
    pub confidence: Option<f64>,
    /// Raster resolution for metrics.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Random seed for gradcheck.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Divide by units-per-em and center every glyph.
    Normalize { input: PathBuf, output: PathBuf },
    /// Attach ground-truth continuity and alignment labels.
    Label { input: PathBuf, output: PathBuf },
    /// Apply gated refinement from predictions, or from the stored labels.
    Refine {
        input: PathBuf,
        output: PathBuf,
        /// JSONL predictions; oracle mode when absent.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Compare two corpora glyph by glyph.
    Metrics {
        a: PathBuf,
        b: PathBuf,
        /// Report file; stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Verify reverse-mode gradients on random sites against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
}

/// Per-glyph class distributions for `refine`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub font_id: String,
    pub glyph_id: String,
    pub continuity: Vec<[f64; 3]>,
    pub alignment: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefineSummary {
    pub font_id: String,
    pub glyph_id: String,
    pub repaired: usize,
    pub snapped: usize,
    pub skipped: Vec<(usize, String)>,
}

pub fn effective_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(c) = cli.confidence {
        cfg.confidence = c;
    }
    if let Some(r) = cli.resolution {
        cfg.raster.resolution = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn locus(r: &CorpusRecord, index: usize) -> String {
    format!("record {index} ({}/{})", r.font_id, r.glyph_id)
}

/// Glyph of a record in EM units, checked for structural validity.
fn em_glyph(r: &CorpusRecord, index: usize) -> Result<Glyph, CliError> {
    r.validate(index)?;
    let g = r.glyph(index)?;
    let report = validate_glyph(&g);
    if let Some(v) = report.violations.first() {
        return Err(CliError::Validation(format!("{}: {v}", locus(r, index))));
    }
    g.to_em_units().map_err(|e| CliError::Validation(format!("{}: {e}", locus(r, index))))
}

fn paths_to_strings(g: &Glyph, precision: usize) -> Vec<String> {
    g.paths
        .iter()
        .map(|p| serialize_path_data(std::slice::from_ref(p), precision))
        .collect()
}

pub fn cmd_normalize(records: &[CorpusRecord], cfg: &Config) -> Result<Vec<CorpusRecord>, CliError> {
    records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            em_glyph(r, i)?;
            let g = normalize_glyph(&r.glyph(i)?)
                .map_err(|e| CliError::Validation(format!("{}: {e}", locus(r, i))))?;
            Ok(CorpusRecord {
                units_per_em: 1.0,
                paths: paths_to_strings(&g, cfg.precision),
                ..r.clone()
            })
        })
        .collect()
}

pub fn cmd_label(records: &[CorpusRecord], cfg: &Config) -> Result<Vec<CorpusRecord>, CliError> {
    records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let g = em_glyph(r, i)?;
            let labels = label_glyph(&g, &cfg.thresholds);
            Ok(CorpusRecord {
                labels: Some(RecordLabels {
                    continuity: labels.continuity_codes(),
                    alignment: labels.alignment_codes(),
                }),
                ..r.clone()
            })
        })
        .collect()
}

fn probs(values: &[[f64; 3]], what: &str, loc: &str) -> Result<Vec<ClassProbs>, CliError> {
    values
        .iter()
        .map(|p| ClassProbs::new(*p).map_err(|e| CliError::Validation(format!("{loc}: {what}: {e}"))))
        .collect()
}

pub fn cmd_refine(
    records: &[CorpusRecord],
    predictions: Option<&[PredictionRecord]>,
    cfg: &Config,
) -> Result<(Vec<CorpusRecord>, Vec<RefineSummary>), CliError> {
    let by_key: Option<HashMap<(&str, &str), &PredictionRecord>> = predictions
        .map(|ps| ps.iter().map(|p| ((p.font_id.as_str(), p.glyph_id.as_str()), p)).collect());
    let results: Vec<(CorpusRecord, RefineSummary)> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let g = em_glyph(r, i)?;
            let loc = locus(r, i);
            let (jp, ap) = match &by_key {
                Some(map) => {
                    let p = map
                        .get(&r.key())
                        .ok_or_else(|| CliError::Validation(format!("{loc}: no prediction record")))?;
                    (probs(&p.continuity, "continuity", &loc)?, probs(&p.alignment, "alignment", &loc)?)
                }
                None => {
                    let (cont, align) = match &r.labels {
                        Some(l) => (l.continuity.clone(), l.alignment.clone()),
                        None => {
                            let l = label_glyph(&g, &cfg.thresholds);
                            (l.continuity_codes(), l.alignment_codes())
                        }
                    };
                    let hot = |c: &[u8]| c.iter().map(|&k| ClassProbs::one_hot(k as usize)).collect::<Vec<_>>();
                    (hot(&cont), hot(&align))
                }
            };
            let out = refine_glyph(&g, &jp, &ap, cfg.confidence)
                .map_err(|e| CliError::Validation(format!("{loc}: {e}")))?;
            let upm = r.units_per_em;
            let record = CorpusRecord {
                paths: paths_to_strings(&out.glyph.from_em_units(upm), cfg.precision),
                ..r.clone()
            };
            let summary = RefineSummary {
                font_id: r.font_id.clone(),
                glyph_id: r.glyph_id.clone(),
                repaired: out.repaired.len(),
                snapped: out.snapped.len(),
                skipped: out.skipped.iter().map(|s| (s.junction, s.error.to_string())).collect(),
            };
            Ok((record, summary))
        })
        .collect::<Result<_, CliError>>()?;
    Ok(results.into_iter().unzip())
}

/// Centers both glyphs with the translation that centers `reference`.
fn common_frame(a: &Glyph, reference: &Glyph) -> (Glyph, Glyph) {
    let center = reference
        .bounds()
        .map(|(lo, hi)| Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0))
        .unwrap_or(Point::ZERO);
    let shift = |g: &Glyph| {
        let mut g = g.clone();
        g.map_points(|p| p - center);
        g
    };
    (shift(a), shift(reference))
}

fn metrics_row(a: &CorpusRecord, ia: usize, b: &CorpusRecord, ib: usize, cfg: &Config) -> Result<MetricsRow, CliError> {
    let (ga, gb) = common_frame(&em_glyph(a, ia)?, &em_glyph(b, ib)?);
    let metric = |e: crate::metrics::MetricError| CliError::Validation(format!("{}: {e}", locus(a, ia)));
    let rc = &cfg.raster;
    let ra = rasterize(&ga, rc.resolution, rc.fill_rule, rc.view_box).map_err(metric)?;
    let rb = rasterize(&gb, rc.resolution, rc.fill_rule, rc.view_box).map_err(metric)?;
    let re = chamfer_re(&ga, &gb, cfg.chamfer.n_per_segment, cfg.chamfer.sampling).map_err(metric)?;

    let la = label_glyph(&ga, &cfg.thresholds);
    let lb = label_glyph(&gb, &cfg.thresholds);
    let same_sites = junction_sites(&ga).len() == junction_sites(&gb).len()
        && line_sites(&ga).len() == line_sites(&gb).len();
    let acc_cont = if same_sites { accuracy_continuity(&la.continuity, &lb.continuity).ok() } else { None };
    let acc_align = if same_sites { accuracy_alignment(&la.alignment, &lb.alignment).ok() } else { None };
    Ok(MetricsRow {
        font_id: a.font_id.clone(),
        glyph_id: a.glyph_id.clone(),
        iou: iou(&ra, &rb).map_err(metric)?,
        l1: l1_image(&ra, &rb).map_err(metric)?,
        re,
        acc_cont,
        acc_align,
    })
}

/// One row per glyph of `a`, paired with `b` by `(font_id, glyph_id)`.
pub fn cmd_metrics(a: &[CorpusRecord], b: &[CorpusRecord], cfg: &Config) -> Result<Vec<MetricsRow>, CliError> {
    let mut index_b: HashMap<(&str, &str), usize> = HashMap::new();
    for (i, r) in b.iter().enumerate() {
        if index_b.insert(r.key(), i).is_some() {
            return Err(CliError::Pairing(format!("duplicate key {}/{} in second corpus", r.font_id, r.glyph_id)));
        }
    }
    let mut seen = HashMap::new();
    for (i, r) in a.iter().enumerate() {
        if seen.insert(r.key(), i).is_some() {
            return Err(CliError::Pairing(format!("duplicate key {}/{} in first corpus", r.font_id, r.glyph_id)));
        }
        if !index_b.contains_key(&r.key()) {
            return Err(CliError::Pairing(format!("{} has no partner in second corpus", locus(r, i))));
        }
    }
    if let Some(r) = b.iter().find(|r| !seen.contains_key(&r.key())) {
        return Err(CliError::Pairing(format!("{}/{} has no partner in first corpus", r.font_id, r.glyph_id)));
    }
    a.par_iter()
        .enumerate()
        .map(|(i, r)| {
            let j = index_b[&r.key()];
            metrics_row(r, i, &b[j], j, cfg)
        })
        .collect()
}

pub fn cmd_gradcheck(seed: u64, count: usize, cfg: &Config) -> SuiteReport {
    run_gradient_suite(seed, count, &cfg.ste)
}

fn load_predictions(path: &FsPath) -> Result<Vec<PredictionRecord>, CliError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CliError::Parse(format!("{}: prediction line {}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

fn write_report(rows: &[MetricsRow], output: Option<&FsPath>) -> Result<(), CliError> {
    let mut all = rows.to_vec();
    all.push(MetricsRow::mean(rows));
    let mut buf = Vec::new();
    write_jsonl(&all, &mut buf)?;
    match output {
        Some(p) => fs::write(p, buf).map_err(|e| io_err(p, e)),
        None => io::stdout().write_all(&buf).map_err(|e| CliError::Io(e.to_string())),
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = effective_config(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(CliError::Usage("a subcommand is required (see --help)".into()));
    };
    match command {
        Command::Normalize { input, output } => {
            let out = cmd_normalize(&load_corpus(input)?, &cfg)?;
            save_corpus(&out, output)?;
        }
        Command::Label { input, output } => {
            let out = cmd_label(&load_corpus(input)?, &cfg)?;
            save_corpus(&out, output)?;
        }
        Command::Refine { input, output, predictions } => {
            let preds = predictions.as_deref().map(load_predictions).transpose()?;
            let (out, summary) = cmd_refine(&load_corpus(input)?, preds.as_deref(), &cfg)?;
            save_corpus(&out, output)?;
            let repaired: usize = summary.iter().map(|s| s.repaired).sum();
            let snapped: usize = summary.iter().map(|s| s.snapped).sum();
            eprintln!("refined {} glyphs: {repaired} junctions repaired, {snapped} lines snapped", out.len());
            for s in &summary {
                for (j, e) in &s.skipped {
                    eprintln!("  {}/{} junction {j} skipped: {e}", s.font_id, s.glyph_id);
                }
            }
        }
        Command::Metrics { a, b, output } => {
            let rows = cmd_metrics(&load_corpus(a)?, &load_corpus(b)?, &cfg)?;
            write_report(&rows, output.as_deref())?;
        }
        Command::Gradcheck { count } => {
            let report = cmd_gradcheck(cli.seed.unwrap_or(42), *count, &cfg);
            for (kind, ok, total) in report.by_kind() {
                println!("{:<24} {ok}/{total}", serde_json::to_value(kind).unwrap().as_str().unwrap_or("?"));
            }
            println!(
                "pass rate {:.4} ({}/{}), {} draws resampled",
                report.pass_rate(),
                report.passed(),
                report.cases.len(),
                report.resampled
            );
        }
    }
    Ok(())
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
