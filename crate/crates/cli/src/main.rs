use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use lingeval::ingest::{load_corpus, load_language_classification, CorpusManifest, LanguageClassification};
use lingeval::model::{validate_corpus, Corpus};
use lingeval::report::{
    artifact_stem, build_bundle, emit_csv, emit_json, emit_trec_run, evaluate_run, report_json,
};
use lingeval::retrieval::{build_index, mock_embed, DenseStore, SparseStore, TokenStore, Tokenizer};
use lingeval::runner::{file_digest, load_run_verified, persist_run, run, RunConfig};
use lingeval::{Error, Result};

const DATA_ROOT_VAR: &str = "LINGEVAL_DATA_ROOT";

#[derive(Parser)]
#[command(name = "lingeval", version, about = "Language-aware evaluation of multilingual retrieval")]
struct Cli {
    /// Worker threads for query-level parallelism (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a corpus, printing its shape.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        /// Also check that every corpus language is classified.
        #[arg(long)]
        classification: Option<PathBuf>,
    },
    /// Build a BM25 inverted index.
    Index {
        /// Corpus manifest.
        #[arg(long)]
        corpus: PathBuf,
        /// `fallback` or a tokenizer.json path.
        #[arg(long, default_value = "fallback")]
        tokenizer: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a vector file and record it in the store registry.
    ImportVectors {
        #[arg(long, value_enum)]
        kind: VectorKind,
        #[arg(long)]
        file: PathBuf,
        /// Registry name; defaults to the file stem.
        #[arg(long)]
        name: Option<String>,
        /// Check that the file covers this corpus's ids.
        #[arg(long, requires = "role")]
        corpus: Option<PathBuf>,
        #[arg(long, value_enum)]
        role: Option<Role>,
        /// Registry file (default: registry.json under the data root).
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Score a corpus and write an MLRN run file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also export the ranking as a TREC run.
        #[arg(long)]
        trec: Option<PathBuf>,
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Compute metrics for one run.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        classification: Option<PathBuf>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate many runs and write report artifacts.
    Report {
        /// Glob matching run files.
        #[arg(long)]
        runs: String,
        #[arg(long)]
        classification: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write deterministic synthetic query and passage stores.
    MockEmbed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long, allow_negative_numbers = true)]
        language_weight: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize, PartialEq, Eq, Debug)]
#[serde(rename_all = "lowercase")]
enum VectorKind {
    Dense,
    Token,
    Sparse,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Queries,
    Passages,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct RegistryEntry {
    kind: VectorKind,
    path: PathBuf,
    sha256: String,
    records: usize,
    dim: usize,
}

type Registry = BTreeMap<String, RegistryEntry>;

fn data_root() -> Option<PathBuf> {
    std::env::var_os(DATA_ROOT_VAR).map(PathBuf::from)
}

/// Relative input paths resolve against the data root when it is set.
fn input_path(path: &Path) -> PathBuf {
    match data_root() {
        Some(root) if path.is_relative() => root.join(path),
        _ => path.to_path_buf(),
    }
}

fn registry_path(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .unwrap_or_else(|| data_root().unwrap_or_default().join("registry.json"))
}

fn read_registry(path: &Path) -> Result<Registry> {
    match std::fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Registry::new()),
        Err(source) => Err(Error::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_manifest_corpus(path: &Path) -> Result<(CorpusManifest, Corpus)> {
    let manifest = CorpusManifest::load(&input_path(path))?;
    let corpus = load_corpus(&manifest)?;
    Ok((manifest, corpus))
}

fn load_classification(path: Option<&Path>) -> Result<Option<LanguageClassification>> {
    path.map(|p| load_language_classification(&input_path(p))).transpose()
}

fn ingest(manifest: &Path, classification: Option<&Path>) -> Result<()> {
    let (manifest, corpus) = load_manifest_corpus(manifest)?;
    let mut violations = validate_corpus(&corpus);
    violations.extend(manifest.check(&corpus));
    println!(
        "{}: {} languages, {} groups, {} passages, {} queries",
        corpus.name(),
        corpus.all_languages().len(),
        corpus.groups().len(),
        corpus.passages().len(),
        corpus.queries().len()
    );
    println!(
        "parallelism {:?}, max group size {}, depth {}",
        corpus.observed_parallelism(),
        corpus.max_group_size(),
        manifest.depth(&corpus)
    );
    if let Some(c) = load_classification(classification)? {
        let langs = corpus.all_languages();
        let mut missing = c.missing_macro_groups(&langs);
        missing.extend(c.missing_tiers(&langs));
        missing.sort();
        missing.dedup();
        if !missing.is_empty() {
            return Err(Error::MissingClassification {
                what: "classification entry",
                langs: missing.iter().map(ToString::to_string).collect(),
            });
        }
    }
    for v in &violations {
        println!("violation: {v}");
    }
    match violations.first() {
        Some(first) => Err(Error::InvalidCorpus {
            count: violations.len(),
            first: first.to_string(),
        }),
        None => Ok(()),
    }
}

fn index(corpus: &Path, tokenizer: &str, out: &Path) -> Result<()> {
    let (_, corpus) = load_manifest_corpus(corpus)?;
    let spec = if tokenizer == "fallback" {
        tokenizer.to_string()
    } else {
        input_path(Path::new(tokenizer)).to_string_lossy().into_owned()
    };
    let index = build_index(&corpus, &Tokenizer::from_spec(&spec)?);
    index.save(out)?;
    println!(
        "indexed {} passages, {} terms -> {}",
        index.doc_count(),
        index.postings.len(),
        out.display()
    );
    Ok(())
}

fn import_vectors(
    kind: VectorKind,
    file: &Path,
    name: Option<&str>,
    coverage: Option<(&Path, Role)>,
    registry: Option<&Path>,
) -> Result<()> {
    let file = input_path(file);
    let (ids, dim): (Vec<String>, usize) = match kind {
        VectorKind::Dense => {
            let s = DenseStore::load(&file)?;
            (s.ids().to_vec(), s.dim())
        }
        VectorKind::Token => {
            let s = TokenStore::load(&file)?;
            if s.normalized_on_import() {
                log::warn!("{}: token vectors are not unit length; scores use cosine", file.display());
            }
            (s.ids().to_vec(), s.dim())
        }
        VectorKind::Sparse => {
            let s = SparseStore::load(&file)?;
            (s.ids().to_vec(), s.vocab_size() as usize)
        }
    };
    if let Some((corpus, role)) = coverage {
        let (_, corpus) = load_manifest_corpus(corpus)?;
        let have: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
        let (what, wanted): (&'static str, Vec<&str>) = match role {
            Role::Queries => ("query", corpus.queries().iter().map(|q| q.id.as_str()).collect()),
            Role::Passages => ("passage", corpus.passages().iter().map(|p| p.id.as_str()).collect()),
        };
        let missing: Vec<String> = wanted
            .into_iter()
            .filter(|id| !have.contains(id))
            .map(str::to_string)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Coverage {
                kind: what,
                count: missing.len(),
                sample: missing.into_iter().take(5).collect(),
            });
        }
    }

    let name = match name {
        Some(n) => n.to_string(),
        None => file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::InvalidArgument(format!("cannot derive a name from {}", file.display())))?,
    };
    let path = std::fs::canonicalize(&file).map_err(|source| Error::Io {
        path: file.clone(),
        source,
    })?;
    let entry = RegistryEntry {
        kind,
        sha256: file_digest(&path)?,
        path,
        records: ids.len(),
        dim,
    };
    let registry_file = registry_path(registry);
    let mut reg = read_registry(&registry_file)?;
    println!(
        "{name}: {:?} store, {} records, {} {}",
        kind,
        entry.records,
        if kind == VectorKind::Sparse { "vocabulary" } else { "dimensions" },
        entry.dim
    );
    reg.insert(name, entry);
    let text = serde_json::to_string_pretty(&reg).expect("registry serializes");
    write_text(&registry_file, &(text + "\n"))
}

/// Fills store paths that name registry entries instead of files.
fn apply_registry(config: &mut RunConfig, registry: &Registry) {
    for p in [&mut config.query_store, &mut config.passage_store].into_iter().flatten() {
        if !p.exists() {
            if let Some(entry) = p.file_name().and_then(|n| registry.get(&*n.to_string_lossy())) {
                *p = entry.path.clone();
            }
        }
    }
}

fn run_command(config_path: &Path, out: &Path, trec: Option<&Path>, registry: Option<&Path>) -> Result<()> {
    let config_path = input_path(config_path);
    let mut config = RunConfig::load(&config_path)?;
    let base = data_root()
        .or_else(|| config_path.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    config.resolve_paths(&base);
    apply_registry(&mut config, &read_registry(&registry_path(registry))?);
    let scored = run(&config)?;
    persist_run(&scored, out)?;
    if let Some(trec) = trec {
        emit_trec_run(&scored, trec)?;
    }
    println!(
        "{} queries at depth {} -> {}",
        scored.queries.len(),
        scored.header.depth,
        out.display()
    );
    Ok(())
}

fn eval(run_path: &Path, classification: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let scored = load_run_verified(&input_path(run_path))?;
    let classification = load_classification(classification)?;
    let report = evaluate_run(&scored, classification.as_ref())?;
    let text = report_json(&report)?;
    match out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report(pattern: &str, classification: Option<&Path>, out_dir: &Path) -> Result<()> {
    let pattern = input_path(Path::new(pattern)).to_string_lossy().into_owned();
    let paths = glob::glob(&pattern)
        .map_err(|e| Error::InvalidArgument(format!("bad glob {pattern:?}: {e}")))?
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if paths.is_empty() {
        log::warn!("no run files match {pattern:?}");
    }
    let runs = paths
        .iter()
        .map(|p| load_run_verified(p))
        .collect::<Result<Vec<_>>>()?;
    let classification = load_classification(classification)?;
    let bundle = build_bundle(&runs, classification.as_ref())?;

    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    emit_json(&bundle, &out_dir.join("bundle.json"))?;
    let mut written = emit_csv(&bundle, out_dir)?.len() + 1;
    for r in bundle.reports.iter().chain(&bundle.macro_reports) {
        let stem = artifact_stem(&r.model, &r.dataset, r.k);
        write_text(&out_dir.join(format!("{stem}.json")), &report_json(r)?)?;
        written += 1;
    }
    for scored in &runs {
        let stem = artifact_stem(&scored.header.config.model, &scored.header.corpus, Some(scored.header.depth));
        emit_trec_run(scored, &out_dir.join(format!("{stem}.trec")))?;
        written += 1;
    }
    println!(
        "{} runs, {} models -> {} files in {}",
        runs.len(),
        bundle.macro_reports.len(),
        written,
        out_dir.display()
    );
    Ok(())
}

fn mock(corpus: &Path, dim: usize, weight: f64, seed: u64, out_dir: &Path) -> Result<()> {
    let (_, corpus) = load_manifest_corpus(corpus)?;
    let stores = mock_embed(&corpus, dim, weight, seed)?;
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    stores.queries.save(&out_dir.join("queries.mlev"))?;
    stores.passages.save(&out_dir.join("passages.mlev"))?;
    println!(
        "{} query and {} passage vectors of dimension {dim} -> {}",
        stores.queries.len(),
        stores.passages.len(),
        out_dir.display()
    );
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            manifest,
            classification,
        } => ingest(&manifest, classification.as_deref()),
        Command::Index { corpus, tokenizer, out } => index(&corpus, &tokenizer, &out),
        Command::ImportVectors {
            kind,
            file,
            name,
            corpus,
            role,
            registry,
        } => import_vectors(
            kind,
            &file,
            name.as_deref(),
            corpus.as_deref().zip(role),
            registry.as_deref(),
        ),
        Command::Run {
            config,
            out,
            trec,
            registry,
        } => run_command(&config, &out, trec.as_deref(), registry.as_deref()),
        Command::Eval {
            run,
            classification,
            out,
        } => eval(&run, classification.as_deref(), out.as_deref()),
        Command::Report {
            runs,
            classification,
            out_dir,
        } => report(&runs, classification.as_deref(), &out_dir),
        Command::MockEmbed {
            corpus,
            dim,
            language_weight,
            seed,
            out_dir,
        } => mock(&corpus, dim, language_weight, seed, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error[E_USAGE]: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[E_USAGE]: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let detail = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {detail}", e.code());
            ExitCode::from(1)
        }
    }
}
