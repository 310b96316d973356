//! `histoscope analyze | serve | inspect`.
//!
//! Exit codes: 0 success, 1 configuration or startup error, 2 corpus error,
//! 3 provider error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use histoscope_core::clustering::Linkage;
use histoscope_core::config::{ConfigFile, ProviderKind};
use histoscope_core::corpus::{load_corpus, Corpus, CorpusFormat};
use histoscope_core::histogram::{sort_histogram_refs, Histogram, SortKey};
use histoscope_core::pipeline::{analyze_with_tagger, Providers};
use histoscope_core::extraction::RuleTagger;
use histoscope_core::store::{load_artifact, save_artifact, AnalysisArtifact, StoreError};

use crate::service::{router, AppState, Session};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CORPUS: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

#[derive(Parser, Debug)]
#[command(name = "histoscope", version, about = "Explore a text dataset through entity histograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract, embed, cluster and label entities; write an analysis artifact.
    Analyze(AnalyzeArgs),
    /// Serve the HTTP API for an artifact and its corpus.
    Serve(ServeArgs),
    /// Print the top histograms of an artifact.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Corpus file (.jsonl, .csv or .txt)
    corpus: PathBuf,
    /// jsonl, csv or txt-lines; inferred from the extension by default
    #[arg(long)]
    format: Option<CorpusFormat>,
    #[arg(long)]
    out: PathBuf,
    /// Number of most frequent entities kept
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated ascending cosine-distance cutoffs
    #[arg(long, value_delimiter = ',')]
    cutoffs: Option<Vec<f64>>,
    #[arg(long)]
    min_size: Option<usize>,
    #[arg(long)]
    max_size: Option<usize>,
    /// average, complete or single
    #[arg(long)]
    linkage: Option<String>,
    /// stub or remote, for both embedding and labeling
    #[arg(long)]
    provider: Option<ProviderKind>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: available processors)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long)]
    artifact: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    format: Option<CorpusFormat>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    artifact: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            if code == 0 {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => run_analyze(a, out),
        Command::Serve(s) => run_serve(s, out),
        Command::Inspect(i) => run_inspect(i, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn infer_format(path: &Path, explicit: Option<CorpusFormat>) -> CorpusFormat {
    explicit.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => CorpusFormat::Csv,
        Some("txt") => CorpusFormat::TxtLines,
        _ => CorpusFormat::Jsonl,
    })
}

fn read_corpus(path: &Path, format: Option<CorpusFormat>) -> Result<Corpus, Failure> {
    load_corpus(path, infer_format(path, format))
        .map_err(|e| fail(EXIT_CORPUS, format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    ConfigFile::load_or_default(path).map_err(|e| fail(EXIT_CONFIG, e.to_string()))
}

fn run_analyze(args: AnalyzeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let started = Instant::now();
    let mut config = load_config(args.config.as_deref())?.pipeline;
    if let Some(k) = args.k {
        config.k_cap = k;
    }
    if let Some(c) = args.cutoffs {
        config.cutoffs = c;
    }
    if let Some(m) = args.min_size {
        config.min_size = m;
    }
    if let Some(m) = args.max_size {
        config.max_size = m;
    }
    if let Some(l) = &args.linkage {
        config.linkage = match l.as_str() {
            "average" => Linkage::Average,
            "complete" => Linkage::Complete,
            "single" => Linkage::Single,
            other => return Err(fail(EXIT_CONFIG, format!("unknown linkage {other:?}"))),
        };
    }
    if let Some(p) = args.provider {
        config.embedding.kind = p;
        config.labeling.kind = p;
    }
    config.validate().map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    let corpus = read_corpus(&args.corpus, args.format)?;
    let providers = Providers::from_config(&config).map_err(|e| fail(EXIT_PROVIDER, e.to_string()))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(fail(EXIT_CONFIG, "--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let (artifact, timings) = pool
        .install(|| analyze_with_tagger(&corpus, &config, &providers, &RuleTagger::default()))
        .map_err(|e| {
            let code = if e.is_provider_failure() { EXIT_PROVIDER } else { EXIT_CONFIG };
            fail(code, e.to_string())
        })?;
    save_artifact(&artifact, &args.out).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    let r = &artifact.run_report;
    let _ = writeln!(out, "corpus      {} ({} examples)", args.corpus.display(), r.example_count);
    let _ = writeln!(out, "entities    {}", r.entity_count);
    for c in &r.cluster_counts {
        let _ = writeln!(out, "clusters    cutoff {:<5} {}", c.cutoff, c.clusters);
    }
    let _ = writeln!(
        out,
        "labels      {} labeled, {} no label ({} provider failures)",
        r.labeled, r.no_label, r.failed
    );
    let _ = writeln!(out, "histograms  {}", artifact.auto_histograms.len());
    for w in &r.warnings {
        let _ = writeln!(out, "warning     {w}");
    }
    let stages: Vec<String> = timings
        .stages
        .iter()
        .map(|(name, d)| format!("{name} {:.0}ms", d.as_secs_f64() * 1000.0))
        .collect();
    let _ = writeln!(
        out,
        "elapsed     {:.2}s ({})",
        started.elapsed().as_secs_f64(),
        stages.join(", ")
    );
    let _ = writeln!(out, "wrote       {}", args.out.display());
    Ok(())
}

/// Everything `serve` does before accepting connections.
pub struct Prepared {
    pub listener: std::net::TcpListener,
    pub app: axum::Router,
}

fn prepare_serve(args: &ServeArgs) -> Result<Prepared, Failure> {
    let file = load_config(args.config.as_deref())?;
    let mut server = file.server;
    if let Some(p) = args.port {
        server.port = p;
    }
    server.validate().map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    let artifact: AnalysisArtifact = load_artifact(&args.artifact).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let corpus = read_corpus(&args.corpus, args.format)?;
    if let Err(e) = artifact.validate_against_corpus(&corpus) {
        let code = if matches!(e, StoreError::DigestMismatch { .. }) { EXIT_CORPUS } else { EXIT_CONFIG };
        return Err(fail(code, e.to_string()));
    }
    // providers follow the artifact so embeddings stay comparable
    let providers = Providers::from_config(&artifact.config).map_err(|e| fail(EXIT_PROVIDER, e.to_string()))?;
    let session = Session::new(artifact, corpus, providers, server.clone(), Some(args.artifact.clone()))
        .map_err(|e| fail(EXIT_CORPUS, e.to_string()))?;

    let address = format!("{}:{}", args.host, server.port);
    let listener = std::net::TcpListener::bind(&address)
        .map_err(|e| fail(EXIT_CONFIG, format!("cannot listen on {address}: {e}")))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    Ok(Prepared {
        listener,
        app: router(AppState::loaded(session), &server),
    })
}

fn run_serve(args: ServeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let prepared = prepare_serve(&args)?;
    let address = prepared.listener.local_addr().map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let _ = writeln!(out, "listening on http://{address}");
    let _ = out.flush();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(prepared.listener)
            .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
        axum::serve(listener, prepared.app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| fail(EXIT_CONFIG, e.to_string()))
    })
}

fn print_table(out: &mut dyn Write, title: &str, rows: &[&Histogram]) {
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{:>4}  {:>7}  {:>7}  {:>7}  {:<6}  label", "rank", "total", "entropy", "buckets", "source");
    for (i, h) in rows.iter().enumerate() {
        let source = match h.source {
            histoscope_core::histogram::HistogramSource::Auto => "auto",
            histoscope_core::histogram::HistogramSource::User => "user",
        };
        let _ = writeln!(
            out,
            "{:>4}  {:>7}  {:>7.3}  {:>7}  {:<6}  {}",
            i + 1,
            h.total_count,
            h.entropy,
            h.buckets.len(),
            source,
            h.label
        );
    }
}

fn run_inspect(args: InspectArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let artifact = load_artifact(&args.artifact).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let r = &artifact.run_report;
    let _ = writeln!(
        out,
        "{}: {} examples, {} entities, {} histograms ({} user)\n",
        r.corpus_name,
        r.example_count,
        artifact.entities.len(),
        artifact.histogram_count(),
        artifact.user_histograms.len()
    );
    for (title, key) in [
        ("Top histograms by total count", SortKey::TotalCount),
        ("Top histograms by entropy", SortKey::Entropy),
    ] {
        let mut refs: Vec<&Histogram> = artifact.histograms().collect();
        sort_histogram_refs(&mut refs, key);
        refs.truncate(args.top);
        print_table(out, title, &refs);
        let _ = writeln!(out);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_inference() {
        assert_eq!(infer_format(Path::new("a.csv"), None), CorpusFormat::Csv);
        assert_eq!(infer_format(Path::new("a.txt"), None), CorpusFormat::TxtLines);
        assert_eq!(infer_format(Path::new("a.jsonl"), None), CorpusFormat::Jsonl);
        assert_eq!(infer_format(Path::new("a.csv"), Some(CorpusFormat::Jsonl)), CorpusFormat::Jsonl);
    }

    #[test]
    fn defaults_from_flags() {
        let cli = Cli::try_parse_from(["histoscope", "inspect", "--artifact", "a.json"]).unwrap();
        match cli.command {
            Command::Inspect(i) => assert_eq!(i.top, 10),
            _ => unreachable!(),
        }
        let cli = Cli::try_parse_from(["histoscope", "analyze", "c.jsonl", "--out", "o", "--cutoffs", "0.1,0.4"]).unwrap();
        match cli.command {
            Command::Analyze(a) => {
                assert_eq!(a.cutoffs, Some(vec![0.1, 0.4]));
                assert_eq!(a.k, None);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn usage_error_is_config_exit() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["histoscope", "analyze"], &mut o, &mut e), EXIT_CONFIG);
        assert_eq!(run(["histoscope", "--help"], &mut o, &mut e), 0);
    }
}
