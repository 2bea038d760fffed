use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use xshred::bench::{parse_size, run_bench, BenchConfig, BenchError, Verdict};
use xshred::dom::load_document;
use xshred::dtd::{parse_dtd, DtdGraph};
use xshred::emit::{open_sink, OutputFormat};
use xshred::engine::{check_lemmas, xinsert, IdGenerator};
use xshred::generate::generate_document;
use xshred::schema::{emit_ddl, map_schema, Strategy};

/// Maps DTDs to relational schemas and shreds XML documents into them.
#[derive(Parser)]
#[command(name = "xshred", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the DDL and mapping for a DTD.
    Schema {
        dtd: PathBuf,
        #[arg(long, default_value = "dtdmap")]
        strategy: Strategy,
        /// Write the DDL here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Root element; inferred from the DTD when omitted.
        #[arg(long)]
        root: Option<String>,
    },
    /// Shred a document into CSV files or a SQL script.
    Shred {
        dtd: PathBuf,
        xml: PathBuf,
        #[arg(long, default_value = "dtdmap")]
        strategy: Strategy,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Output directory. With `--format sql`, a path ending in `.sql` is
        /// used as the script itself.
        #[arg(long)]
        out: PathBuf,
        /// Write header-only CSV files for tables that received no rows.
        #[arg(long)]
        emit_empty: bool,
        #[arg(long)]
        root: Option<String>,
    },
    /// Time shredding over generated documents of increasing size.
    Bench {
        dtd: PathBuf,
        #[arg(long, default_value = "1m,2m,4m,8m,16m", value_delimiter = ',', value_parser = parse_size)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Repeat or comma-separate to compare strategies.
        #[arg(long, default_value = "dtdmap", value_delimiter = ',')]
        strategy: Vec<Strategy>,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Run cells on separate threads.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        root: Option<String>,
    },
    /// Generate a random document of roughly the given size.
    Generate {
        dtd: PathBuf,
        #[arg(long, value_parser = parse_size)]
        size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        root: Option<String>,
    },
}

/// Input or pipeline failure.
const EXIT_ERROR: u8 = 1;
/// Queue counters disagree with the document.
const EXIT_LEMMA: u8 = 2;

fn load_graph(path: &Path, root: Option<&str>) -> Result<DtdGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let dtd = parse_dtd(&text).with_context(|| format!("parsing {}", path.display()))?;
    for w in &dtd.warnings {
        log::warn!("{w}");
    }
    let root = match root {
        Some(r) => r.to_string(),
        None => dtd
            .infer_root()
            .context("the DTD declares no elements")?
            .to_string(),
    };
    Ok(dtd.graph(&root)?)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Schema {
            dtd,
            strategy,
            out,
            root,
        } => {
            let g = load_graph(&dtd, root.as_deref())?;
            let schema = map_schema(&g, strategy)?;
            write_or_print(out.as_deref(), &emit_ddl(&schema))?;
            if out.is_some() {
                print!("{}", schema.mapping_report());
            } else {
                eprint!("{}", schema.mapping_report());
            }
            Ok(0)
        }
        Command::Shred {
            dtd,
            xml,
            strategy,
            format,
            out,
            emit_empty,
            root,
        } => {
            let g = load_graph(&dtd, root.as_deref())?;
            let schema = map_schema(&g, strategy)?;
            let text =
                fs::read_to_string(&xml).with_context(|| format!("reading {}", xml.display()))?;
            let mut tree = load_document(&text)?;
            let dest = match format {
                OutputFormat::Sql if out.extension().is_some_and(|e| e == "sql") => out,
                OutputFormat::Sql => out.join("data.sql"),
                OutputFormat::Csv => out,
            };
            let mut sink = open_sink(&schema, format, &dest, emit_empty)?;
            let stats = xinsert(&mut tree, &g, &schema, &mut sink, &mut IdGenerator::new())?;
            let report = sink.finalize()?;
            print!("{report}");
            println!(
                "tuples {} edge rows {} parent links {} elapsed {:.3} ms",
                stats.tuples_emitted,
                stats.edge_rows,
                stats.parent_links,
                stats.elapsed.as_secs_f64() * 1e3
            );
            for w in tree.warnings().iter().chain(&stats.warnings) {
                log::warn!("{w}");
            }
            let check = check_lemmas(&tree, &g, &schema, &stats);
            println!(
                "q lemma {} ({} enqueues, {} non-inlinable elements)",
                if check.q_holds() { "PASS" } else { "FAIL" },
                check.q_enqueues,
                check.non_inlinable_instances
            );
            println!(
                "r lemma {} ({} enqueues, {} elements)",
                if check.r_holds() { "PASS" } else { "FAIL" },
                check.r_enqueues,
                check.element_count
            );
            Ok(if check.holds() { 0 } else { EXIT_LEMMA })
        }
        Command::Bench {
            dtd,
            sizes,
            reps,
            seed,
            strategy,
            report,
            parallel,
            root,
        } => {
            let g = load_graph(&dtd, root.as_deref())?;
            let cfg = BenchConfig {
                sizes,
                repetitions: reps,
                strategies: strategy,
                seed,
                parallel,
            };
            let result = match run_bench(&g, &cfg) {
                Ok(r) => r,
                Err(e @ BenchError::Lemma { .. }) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_LEMMA);
                }
                Err(e) => return Err(e.into()),
            };
            if let Some(p) = &report {
                fs::write(p, result.to_json())
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            println!("{result}");
            if result.verdict == Verdict::Fail {
                log::warn!("timings are not linear in document size on this machine");
            }
            Ok(0)
        }
        Command::Generate {
            dtd,
            size,
            seed,
            out,
            root,
        } => {
            let g = load_graph(&dtd, root.as_deref())?;
            let doc = generate_document(&g, size, seed)?;
            write_or_print(out.as_deref(), &doc)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
