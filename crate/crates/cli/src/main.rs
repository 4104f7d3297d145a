//! `ege`: validate files, run the matcher, emit layouts, serve the API and
//! export persisted sessions.
//!
//! Exit status is 0 on success, 1 when the inputs have error diagnostics and
//! 2 for I/O or usage problems.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use ege_core::editor::{filter_by_confidence, filter_by_entity};
use ege_core::formats::{
    check_instance_against_corpus, parse_corpus, parse_graph, parse_instance, parse_schema,
    serialize_graph, sniff_kind, to_canonical, DocumentKind,
};
use ege_core::layout::{compute_layout, minimap_view, ExpansionState};
use ege_core::matcher::{match_graphs, MatchConfig, DEFAULT_TAU};
use ege_core::model::validate_graph;
use ege_core::provenance::CorpusIndex;
use ege_core::{Diagnostic, Diagnostics};
use ege_service::{load_session_dir, SessionStore};

#[derive(Parser)]
#[command(name = "ege", version, about = "Schema-guided event graph engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate schema, instance, corpus or graph files.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Corpus to check instance and graph provenance against.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Instantiate a schema with an instance graph.
    Match {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        /// Corpus to check instance offsets against before matching.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TAU, value_parser = parse_tau)]
        tau: f64,
        /// Output file; standard output when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Lay out an instantiated graph.
    Layout {
        graph: PathBuf,
        /// Comma-separated parent ids to expand.
        #[arg(long, value_delimiter = ',', conflicts_with = "expand_all")]
        expand: Vec<String>,
        #[arg(long)]
        expand_all: bool,
        /// Dim events that do not use this entity.
        #[arg(long)]
        entity: Option<String>,
        /// Dim events with confidence outside [lo, hi].
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        confidence: Option<Vec<f64>>,
        /// Scale the result into the unit square.
        #[arg(long)]
        minimap: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Session storage; in-memory when absent.
        #[arg(long, env = "EGE_DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
    /// Replay a persisted session and write its current graph.
    Export {
        /// Session directory, or a session id under --data-dir.
        session: String,
        #[arg(long, env = "EGE_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let tau: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    MatchConfig::new(tau).map(|c| c.tau).map_err(|d| d.message)
}

enum Failure {
    Domain,
    Io(String),
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => {
            std::fs::write(p, bytes).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| Failure::Io(format!("stdout: {e}")))
        }
    }
}

fn report(origin: &str, diags: &Diagnostics) {
    for d in diags.iter() {
        eprintln!("{origin}: {d}");
    }
}

/// Prints `diags` and fails when any is an error.
fn check(origin: &str, diags: &Diagnostics) -> Result<(), Failure> {
    report(origin, diags);
    if diags.has_errors() {
        Err(Failure::Domain)
    } else {
        Ok(())
    }
}

fn domain<T>(origin: &str, r: Result<T, Diagnostics>) -> Result<T, Failure> {
    r.map_err(|d| {
        report(origin, &d);
        Failure::Domain
    })
}

fn validate(paths: &[PathBuf], corpus: Option<&Path>) -> Result<(), Failure> {
    let index = match corpus {
        Some(p) => Some(CorpusIndex::new(&domain(
            &p.display().to_string(),
            parse_corpus(&read(p)?),
        )?)),
        None => None,
    };
    let mut failed = false;
    for path in paths {
        let origin = path.display().to_string();
        let bytes = read(path)?;
        let mut diags = Diagnostics::default();
        let outcome = match sniff_kind(&bytes) {
            Some(DocumentKind::Schema) => parse_schema(&bytes).map(|_| ()),
            Some(DocumentKind::Corpus) => parse_corpus(&bytes).map(|_| ()),
            Some(DocumentKind::Instance) => parse_instance(&bytes).map(|inst| {
                if let Some(ix) = &index {
                    diags = check_instance_against_corpus(&inst, ix.corpus());
                }
            }),
            Some(DocumentKind::Graph) => parse_graph(&bytes).map(|g| {
                diags = validate_graph(&g);
                if let Some(ix) = &index {
                    diags.0.extend(ix.check_graph(&g));
                    diags.sort();
                }
            }),
            None => Err(Diagnostics::single(Diagnostic::error(
                ege_core::Code::Syntax,
                "document",
                "not a schema, instance, corpus or graph document",
            ))),
        };
        if let Err(d) = outcome {
            diags = d;
        }
        failed |= check(&origin, &diags).is_err();
    }
    if failed {
        Err(Failure::Domain)
    } else {
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { paths, corpus } => validate(&paths, corpus.as_deref()),
        Command::Match {
            schema,
            instance,
            corpus,
            tau,
            out,
        } => {
            let s = domain(&schema.display().to_string(), parse_schema(&read(&schema)?))?;
            let i = domain(
                &instance.display().to_string(),
                parse_instance(&read(&instance)?),
            )?;
            if let Some(c) = corpus {
                let origin = c.display().to_string();
                let c = domain(&origin, parse_corpus(&read(&c)?))?;
                check(
                    &instance.display().to_string(),
                    &check_instance_against_corpus(&i, &c),
                )?;
            }
            let cfg = MatchConfig::new(tau).map_err(|d| Failure::Io(d.message))?;
            let result = domain("match", match_graphs(&s, &i, &cfg))?;
            report("match", &result.diagnostics);
            emit(out.as_deref(), &serialize_graph(&result.graph))
        }
        Command::Layout {
            graph,
            expand,
            expand_all,
            entity,
            confidence,
            minimap,
            out,
        } => {
            let origin = graph.display().to_string();
            let g = domain(&origin, parse_graph(&read(&graph)?))?;
            check(&origin, &validate_graph(&g))?;
            let st = if expand_all {
                ExpansionState::all(&g)
            } else {
                ExpansionState::new(expand)
            };
            let mut emphasis: Option<BTreeSet<String>> = None;
            if let Some(e) = entity {
                emphasis = Some(domain(
                    &origin,
                    filter_by_entity(&g, &e).map_err(Diagnostics::single),
                )?);
            }
            if let Some(c) = confidence {
                let set = domain(
                    &origin,
                    filter_by_confidence(&g, c[0], c[1]).map_err(Diagnostics::single),
                )?;
                emphasis = Some(match emphasis {
                    Some(prev) => prev.intersection(&set).cloned().collect(),
                    None => set,
                });
            }
            let mut layout = domain(&origin, compute_layout(&g, &st, emphasis.as_ref()))?;
            if minimap {
                layout = domain(&origin, minimap_view(&layout).map_err(Diagnostics::single))?;
            }
            emit(out.as_deref(), &to_canonical(&layout))
        }
        Command::Serve {
            port,
            host,
            data_dir,
        } => {
            let store = match data_dir {
                Some(dir) => domain(&dir.display().to_string(), SessionStore::open(dir.clone()))?,
                None => SessionStore::in_memory(),
            };
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
            eprintln!("listening on http://{addr}");
            rt.block_on(ege_service::serve(Arc::new(store), addr))
                .map_err(|e| Failure::Io(format!("{addr}: {e}")))
        }
        Command::Export {
            session,
            data_dir,
            out,
        } => {
            let direct = PathBuf::from(&session);
            let dir = match data_dir {
                Some(root) if !direct.is_dir() => root.join(&session),
                _ => direct,
            };
            if !dir.is_dir() {
                return Err(Failure::Io(format!(
                    "{}: no such session directory",
                    dir.display()
                )));
            }
            let s = load_session_dir(&dir).map_err(|d| {
                if d.has_code(ege_core::Code::Io) {
                    report(&dir.display().to_string(), &d);
                    Failure::Io(format!("{}: unreadable session", dir.display()))
                } else {
                    report(&dir.display().to_string(), &d);
                    Failure::Domain
                }
            })?;
            emit(out.as_deref(), &serialize_graph(s.graph()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain) => ExitCode::from(1),
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
