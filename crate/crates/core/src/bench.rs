//! Timing sweep over generated documents and a linearity check.
//!
//! Each cell generates one document, runs one discarded warm-up, then times
//! `repetitions` runs of load + shred into a [`CountingSink`]. Generation and
//! file output are outside the timed section.

use std::fmt;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::dom::{load_document, node_count, DomError};
use crate::dtd::DtdGraph;
use crate::emit::CountingSink;
use crate::engine::{check_lemmas, xinsert, IdGenerator, LemmaCheck, ShredError};
use crate::generate::{generate_document, GenerateError};
use crate::schema::{map_schema, SchemaError, Strategy};

/// Largest accepted spread of per-element time across sizes.
pub const MAX_SPREAD: f64 = 2.0;
/// Smallest accepted coefficient of determination.
pub const MIN_R_SQUARED: f64 = 0.98;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Dom(#[from] DomError),
    #[error(transparent)]
    Shred(#[from] ShredError),
    #[error("queue counters disagree with the document at {size} bytes ({strategy}): {check:?}")]
    Lemma {
        size: usize,
        strategy: Strategy,
        check: LemmaCheck,
    },
}

/// Parses `512`, `64k`, `1m`, `2MB`, `1g` (binary multiples).
pub fn parse_size(s: &str) -> Result<usize, String> {
    let lower = s.trim().to_ascii_lowercase();
    let body = lower
        .strip_suffix("ib")
        .or_else(|| lower.strip_suffix('b'))
        .unwrap_or(&lower);
    let (digits, mult) = match body.chars().last() {
        Some('k') => (&body[..body.len() - 1], 1usize << 10),
        Some('m') => (&body[..body.len() - 1], 1 << 20),
        Some('g') => (&body[..body.len() - 1], 1 << 30),
        _ => (body, 1),
    };
    digits
        .parse::<usize>()
        .ok()
        .and_then(|d| d.checked_mul(mult))
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("invalid size `{s}`"))
}

/// Comma-separated list of [`parse_size`] values.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(parse_size)
        .collect()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub strategies: Vec<Strategy>,
    pub seed: u64,
    /// Run cells on separate threads. Off by default because concurrent
    /// cells disturb each other's timings.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![1 << 20, 2 << 20, 4 << 20, 8 << 20, 16 << 20],
            repetitions: 5,
            strategies: vec![Strategy::DtdMap],
            seed: 42,
            parallel: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.sizes.is_empty() {
            return Err(BenchError::Config("no sizes given".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BenchError::Config(
                "sizes must be strictly increasing".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(BenchError::Config("repetitions must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(BenchError::Config("no strategies given".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`. `None` with fewer than two points
/// or when all `x` are equal. A perfectly flat `y` gives `r_squared = 1`.
pub fn least_squares(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "N/A")]
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "N/A",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub target_size: usize,
    pub strategy: Strategy,
    pub document_bytes: usize,
    pub elements: usize,
    pub attributes: usize,
    /// Elements plus attributes.
    pub n: usize,
    pub rep_seconds: Vec<f64>,
    pub mean_seconds: f64,
    pub ns_per_node: f64,
    pub q_enqueues: u64,
    pub r_enqueues: u64,
    pub tuples: u64,
    pub edge_rows: u64,
    pub parent_links: u64,
    pub lemmas_hold: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyFit {
    pub strategy: Strategy,
    pub fit: Option<LinearFit>,
    /// max / min of `ns_per_node` across sizes.
    pub spread: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub repetitions: usize,
    pub cells: Vec<BenchCell>,
    pub fits: Vec<StrategyFit>,
    pub verdict: Verdict,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>10} {:>8} {:>11} {:>10} {:>10} {:>8}",
            "target", "strategy", "n", "mean ms", "ns/node", "lemmas"
        )?;
        for c in &self.cells {
            writeln!(
                f,
                "{:>10} {:>8} {:>11} {:>10.2} {:>10.1} {:>8}",
                c.target_size,
                c.strategy.to_string(),
                c.n,
                c.mean_seconds * 1e3,
                c.ns_per_node,
                if c.lemmas_hold { "ok" } else { "FAIL" }
            )?;
        }
        for s in &self.fits {
            match (s.fit, s.spread) {
                (Some(fit), Some(spread)) => writeln!(
                    f,
                    "{}: slope {:.3} ns/node, R^2 {:.4}, spread {:.2} -> {}",
                    s.strategy,
                    fit.slope * 1e9,
                    fit.r_squared,
                    spread,
                    s.verdict
                )?,
                _ => writeln!(f, "{}: fewer than two sizes -> {}", s.strategy, s.verdict)?,
            }
        }
        write!(f, "verdict: {}", self.verdict)
    }
}

/// Seed for the document of the `index`-th size; shared by all strategies.
fn cell_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_cell(
    g: &DtdGraph,
    strategy: Strategy,
    target: usize,
    seed: u64,
    repetitions: usize,
) -> Result<BenchCell, BenchError> {
    let schema = map_schema(g, strategy)?;
    let doc = generate_document(g, target, seed)?;

    let timed = || -> Result<(f64, _, _), BenchError> {
        let mut sink = CountingSink::default();
        let start = Instant::now();
        let mut tree = load_document(&doc)?;
        let stats = xinsert(&mut tree, g, &schema, &mut sink, &mut IdGenerator::new())?;
        let secs = start.elapsed().as_secs_f64();
        Ok((secs, tree, stats))
    };
    timed()?;
    let mut rep_seconds = Vec::with_capacity(repetitions);
    let mut last = None;
    for _ in 0..repetitions {
        let (secs, tree, stats) = timed()?;
        rep_seconds.push(secs);
        last = Some((tree, stats));
    }
    let (tree, stats) = last.expect("repetitions >= 1");
    let check = check_lemmas(&tree, g, &schema, &stats);
    if !check.holds() {
        return Err(BenchError::Lemma {
            size: target,
            strategy,
            check,
        });
    }
    let (elements, attributes) = node_count(&tree);
    let n = elements + attributes;
    let mean_seconds = rep_seconds.iter().sum::<f64>() / repetitions as f64;
    Ok(BenchCell {
        target_size: target,
        strategy,
        document_bytes: doc.len(),
        elements,
        attributes,
        n,
        rep_seconds,
        mean_seconds,
        ns_per_node: mean_seconds * 1e9 / n as f64,
        q_enqueues: stats.q_enqueues,
        r_enqueues: stats.r_enqueues,
        tuples: stats.tuples_emitted,
        edge_rows: stats.edge_rows,
        parent_links: stats.parent_links,
        lemmas_hold: true,
    })
}

fn fit_strategy(strategy: Strategy, cells: &[BenchCell]) -> StrategyFit {
    let mine: Vec<&BenchCell> = cells.iter().filter(|c| c.strategy == strategy).collect();
    let points: Vec<(f64, f64)> = mine.iter().map(|c| (c.n as f64, c.mean_seconds)).collect();
    let fit = least_squares(&points);
    let spread = (mine.len() >= 2).then(|| {
        let per: Vec<f64> = mine.iter().map(|c| c.ns_per_node).collect();
        let max = per.iter().copied().fold(f64::MIN, f64::max);
        let min = per.iter().copied().fold(f64::MAX, f64::min);
        max / min
    });
    let verdict = match (fit, spread) {
        (Some(fit), Some(spread)) if fit.r_squared >= MIN_R_SQUARED && spread <= MAX_SPREAD => {
            Verdict::Pass
        }
        (Some(_), Some(_)) => Verdict::Fail,
        _ => Verdict::NotApplicable,
    };
    StrategyFit {
        strategy,
        fit,
        spread,
        verdict,
    }
}

/// Runs every size × strategy cell and fits mean time against `n`.
pub fn run_bench(g: &DtdGraph, cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    let jobs: Vec<(usize, Strategy, u64)> = cfg
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &size)| {
            cfg.strategies
                .iter()
                .map(move |&s| (size, s, cell_seed(cfg.seed, i)))
        })
        .collect();
    let cells: Vec<BenchCell> = if cfg.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|&(size, s, seed)| {
                    scope.spawn(move || run_cell(g, s, size, seed, cfg.repetitions))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("bench thread panicked"))
                .collect::<Result<_, _>>()
        })?
    } else {
        jobs.iter()
            .map(|&(size, s, seed)| {
                log::info!("bench cell {size} bytes, {s}");
                run_cell(g, s, size, seed, cfg.repetitions)
            })
            .collect::<Result<_, _>>()?
    };
    let fits: Vec<StrategyFit> = cfg
        .strategies
        .iter()
        .map(|&s| fit_strategy(s, &cells))
        .collect();
    let verdict = if fits.iter().any(|f| f.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if fits.iter().all(|f| f.verdict == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::NotApplicable
    };
    Ok(BenchReport {
        seed: cfg.seed,
        repetitions: cfg.repetitions,
        cells,
        fits,
        verdict,
    })
}
