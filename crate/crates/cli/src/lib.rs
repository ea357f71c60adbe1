//! The `agora` project driver: builds a static site from wiki narratives
//! that transclude annotated formal documents.

pub mod config;
pub mod css;
pub mod project;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use agora_core::antiquotation::Location;
use agora_core::harvester::{self, FragmentType};
use agora_core::resolver::{self, Corpus, HttpFetcher, PageCache};
use agora_core::{annotator, narrative, HtmlDoc, Iri, RenderMode, ResolutionResult};
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use config::ProjectConfig;
use project::{io_err, Project, Report, SITE_CSS};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_UNRESOLVED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "agora", version, about = "Build wiki narratives that include annotated formal documents")]
pub struct Cli {
    /// Project configuration file.
    #[arg(long, global = true, default_value = "agora.conf")]
    pub config: PathBuf,
    /// Fetch remote pages again instead of using the cache.
    #[arg(long, global = true)]
    pub refresh: bool,
    /// Override the configured output mode.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Exit 0 even when references are unresolved.
    #[arg(long, global = true)]
    pub allow_unresolved: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Inline,
    Placeholder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TripleFormat {
    Ntriples,
    Tsv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render every narrative into the output directory.
    Build,
    /// Resolve every antiquotation without writing output.
    Check,
    /// List the fragments of a page: a file, an IRI, or a wiki path.
    List {
        page: String,
        /// Base IRI for a page read from a file.
        #[arg(long)]
        base: Option<String>,
    },
    /// Add RDFa annotations to Coqdoc HTML.
    Annotate {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the triples of an annotated HTML page.
    Harvest {
        input: PathBuf,
        #[arg(long)]
        base: Option<String>,
        #[arg(long, value_enum, default_value = "ntriples")]
        format: TripleFormat,
    },
    /// Resolve antiquotations given as text (prefix declarations allowed).
    Resolve { text: String },
}

/// Runs a parsed command line, writing results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<u8, CliError> {
    let result = match &cli.command {
        Command::Build => build(&project_config(cli)?, cli.refresh, cli.allow_unresolved, out),
        Command::Check => check(&project_config(cli)?, cli.refresh, out),
        Command::List { page, base } => list(&optional_config(cli)?, cli.refresh, page, base.as_deref(), out),
        Command::Annotate { input, output } => {
            let mapping = match optional_config(cli)? {
                Some(c) => project::type_mapping(&c),
                None => annotator::TypeMapping::default(),
            };
            annotate(&mapping, input, output.as_deref(), out)
        }
        Command::Harvest { input, base, format } => harvest(input, base.as_deref(), *format, out),
        Command::Resolve { text } => resolve(&optional_config(cli)?, cli.refresh, text, out),
    };
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    result
}

/// The config file, or `None` when it does not exist.
fn optional_config(cli: &Cli) -> Result<Option<ProjectConfig>, CliError> {
    if cli.config.exists() {
        project_config(cli).map(Some)
    } else {
        Ok(None)
    }
}

fn project_config(cli: &Cli) -> Result<ProjectConfig, CliError> {
    let mut config = ProjectConfig::load(&cli.config)?;
    if let Some(mode) = cli.mode {
        config.mode = match mode {
            ModeArg::Inline => RenderMode::Inline,
            ModeArg::Placeholder => RenderMode::Placeholder,
        };
    }
    Ok(config)
}

fn write_out(out: &mut dyn Write, s: &str) -> Result<(), CliError> {
    out.write_all(s.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn build(config: &ProjectConfig, refresh: bool, allow_unresolved: bool, out: &mut dyn Write) -> Result<u8, CliError> {
    let project = Project::load(config.clone(), refresh)?;
    let resolved = match config.mode {
        RenderMode::Inline => project.resolve_all(),
        // Placeholders are resolved by the reader's browser.
        RenderMode::Placeholder => project
            .narratives
            .iter()
            .map(|n| project::ResolvedNarrative {
                narrative: n.clone(),
                env: project::project_env(config),
                results: Vec::new(),
            })
            .collect(),
    };
    let out_dir = &config.out_dir;
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    for f in &project.formal_outputs {
        write_file(&out_dir.join(&f.path), &f.bytes)?;
    }
    write_file(&out_dir.join(SITE_CSS), project.site_stylesheet().as_bytes())?;
    for r in &resolved {
        let html = project::render_page(r, config.mode);
        write_file(&out_dir.join(format!("{}.html", r.narrative.path)), html.as_bytes())?;
    }
    let mut report = project.report(&resolved);
    if config.mode == RenderMode::Placeholder {
        report.antiquotations = project.narratives.iter().map(|n| n.doc.antiquotations().len()).sum();
    }
    write_out(out, &report.to_string())?;
    Ok(if report.unresolved() == 0 || allow_unresolved {
        EXIT_OK
    } else {
        EXIT_UNRESOLVED
    })
}

pub fn check_report(config: &ProjectConfig, refresh: bool) -> Result<Report, CliError> {
    let project = Project::load(config.clone(), refresh)?;
    let resolved = project.resolve_all();
    Ok(project.report(&resolved))
}

pub fn check(config: &ProjectConfig, refresh: bool, out: &mut dyn Write) -> Result<u8, CliError> {
    let report = check_report(config, refresh)?;
    write_out(out, &report.to_string())?;
    Ok(if report.is_clean() { EXIT_OK } else { EXIT_UNRESOLVED })
}

fn read_html(input: &Path) -> Result<HtmlDoc, CliError> {
    let bytes = fs::read(input).map_err(|e| io_err(input, e))?;
    Ok(HtmlDoc::parse(&String::from_utf8_lossy(&bytes)))
}

fn base_iri(base: Option<&str>, input: &Path) -> Result<Iri, CliError> {
    match base {
        Some(b) => Iri::new(b).map_err(|e| CliError::Usage(format!("--base: {e}"))),
        None => project::file_iri(input),
    }
}

pub fn list(
    config: &Option<ProjectConfig>,
    refresh: bool,
    page: &str,
    base: Option<&str>,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let file = Path::new(page);
    let fragments = if base.is_some() || file.is_file() {
        let doc = read_html(file)?;
        harvester::harvest(&doc, &base_iri(base, file)?)
    } else {
        let env = config.as_ref().map_or_else(agora_core::PrefixEnv::builtins, project::project_env);
        let location = if agora_core::uri::is_absolute(page) && page.contains("://") {
            Location::Iri(Iri::new(page).map_err(|e| CliError::Usage(e.to_string()))?)
        } else {
            Location::classify(page).map_err(CliError::Usage)?
        };
        let corpus = match config {
            Some(c) => Project::load(c.clone(), refresh)?.corpus,
            None if matches!(location, Location::Path(_)) => {
                return Err(CliError::Usage(format!("{page} is neither a file nor an IRI, and there is no project config")))
            }
            None => remote_corpus(),
        };
        match corpus.page(&location, &env) {
            Ok(p) => p.fragments.clone(),
            Err(reason) => {
                log::error!("{page}: {reason}");
                return Ok(EXIT_UNRESOLVED);
            }
        }
    };
    let mut table = String::new();
    for f in &fragments {
        let id = f.id().unwrap_or(f.subject.as_str());
        let ty = f.ty.as_ref().map_or_else(|| "-".to_string(), FragmentType::to_string);
        table.push_str(&format!("{id}\t{ty}\t{}\n", f.subject));
    }
    write_out(out, &table)?;
    Ok(EXIT_OK)
}

/// A corpus without local pages, for use outside a project.
fn remote_corpus() -> Corpus {
    Corpus::new(Box::new(HttpFetcher::default()), PageCache::in_memory())
}

pub fn annotate(
    mapping: &annotator::TypeMapping,
    input: &Path,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let annotated = annotator::annotate(read_html(input)?, mapping);
    for w in &annotated.warnings {
        log::warn!("{}: {w}", input.display());
    }
    let html = annotated.doc.to_html();
    match output {
        Some(path) => write_file(path, html.as_bytes())?,
        None => write_out(out, &html)?,
    }
    Ok(EXIT_OK)
}

pub fn harvest(input: &Path, base: Option<&str>, format: TripleFormat, out: &mut dyn Write) -> Result<u8, CliError> {
    let doc = read_html(input)?;
    let h = harvester::harvest_with_warnings(&doc, &base_iri(base, input)?);
    for w in &h.warnings {
        log::warn!("{}: {w}", input.display());
    }
    let mut text = String::new();
    for t in harvester::triples(&h.fragments) {
        text.push_str(&match format {
            TripleFormat::Ntriples => t.to_ntriples(),
            TripleFormat::Tsv => t.to_tsv(),
        });
        text.push('\n');
    }
    write_out(out, &text)?;
    Ok(EXIT_OK)
}

/// Resolves the antiquotations in `text` against the project, printing one
/// inclusion per line.
pub fn resolve(config: &Option<ProjectConfig>, refresh: bool, text: &str, out: &mut dyn Write) -> Result<u8, CliError> {
    let doc = narrative::parse_narrative(text);
    for issue in &doc.issues {
        log::warn!("{}: {}", issue.span, issue.message);
    }
    let antiquotations = doc.antiquotations();
    if antiquotations.is_empty() {
        return Err(CliError::Usage(format!("no antiquotation in {text:?}")));
    }
    let (corpus, project_env) = match config {
        Some(c) => (Project::load(c.clone(), refresh)?.corpus, project::project_env(c)),
        None => (remote_corpus(), agora_core::PrefixEnv::builtins()),
    };
    let env = project::page_env(&project_env, &doc, "<input>");
    let mut status = EXIT_OK;
    for a in antiquotations {
        let result = resolver::resolve(a, &env, &corpus);
        if !result.is_resolved() {
            status = EXIT_UNRESOLVED;
        }
        if let ResolutionResult::NotFound { reason, .. } = &result {
            log::warn!("{a}: {reason}");
        }
        write_out(out, &resolver::inclusion_html(a, &result))?;
        write_out(out, "\n")?;
    }
    Ok(status)
}
