//! Corpus assembly and resolution of every narrative in a project.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use agora_core::annotator::{self, TypeMapping};
use agora_core::antiquotation::Location;
use agora_core::narrative::{self, NarrativeDoc};
use agora_core::resolver::{self, Corpus, HttpFetcher, NotFoundReason, PageCache};
use agora_core::{Antiquotation, HtmlDoc, Iri, PrefixEnv, ResolutionResult, Span};
use rayon::prelude::*;
use walkdir::WalkDir;

use crate::config::{normalize_prefix_base, ProjectConfig};
use crate::css::scope_css;
use crate::CliError;

/// A file to be written below the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    /// Forward-slash path relative to the output directory.
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FindingKind {
    Unresolved { reference: String, reason: NotFoundReason },
    DuplicateSubject(Iri),
}

/// One entry of a build or check report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    /// Source file relative to the project root.
    pub file: String,
    pub span: Option<Span>,
    pub kind: FindingKind,
}

impl Finding {
    fn sort_key(&self) -> (&str, usize, usize) {
        let (s, e) = self.span.map_or((0, 0), |s| (s.start, s.end));
        (&self.file, s, e)
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.file)?;
        if let Some(span) = self.span {
            write!(f, ":{span}")?;
        }
        match &self.kind {
            FindingKind::Unresolved { reference, reason } => write!(f, ": unresolved {reference}: {reason}"),
            FindingKind::DuplicateSubject(iri) => write!(f, ": duplicate subject {iri}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub pages: usize,
    pub antiquotations: usize,
    /// Sorted by file, then span.
    pub findings: Vec<Finding>,
}

impl Report {
    pub fn unresolved(&self) -> usize {
        self.findings
            .iter()
            .filter(|f| matches!(f.kind, FindingKind::Unresolved { .. }))
            .count()
    }

    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        writeln!(
            f,
            "{} page(s), {} antiquotation(s), {} unresolved, {} duplicate subject(s)",
            self.pages,
            self.antiquotations,
            self.unresolved(),
            self.findings.len() - self.unresolved()
        )
    }
}

#[derive(Debug, Clone)]
pub struct Narrative {
    /// Wiki path: relative path without the `.creole` extension.
    pub path: String,
    /// Source file relative to the project root.
    pub file: String,
    pub doc: NarrativeDoc,
}

/// A project with its formal pages loaded into a corpus.
pub struct Project {
    pub config: ProjectConfig,
    pub corpus: Corpus,
    pub narratives: Vec<Narrative>,
    /// Formal pages and assets, as they are published.
    pub formal_outputs: Vec<OutputFile>,
    /// Copied stylesheets, in path order.
    pub stylesheets: Vec<(String, String)>,
    pub findings: Vec<Finding>,
}

/// The outcome of resolving one narrative.
#[derive(Debug, Clone)]
pub struct ResolvedNarrative {
    pub narrative: Narrative,
    pub env: PrefixEnv,
    pub results: Vec<(Antiquotation, ResolutionResult)>,
}

pub(crate) fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn files_under(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Io(e.to_string()))?;
        if entry.file_type().is_file() {
            let rel = entry
                .path()
                .strip_prefix(dir)
                .expect("walk stays below its root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            out.push((rel, entry.into_path()));
        }
    }
    Ok(out)
}

fn relative_to_root(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).unwrap_or(file);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// `file://` IRI of a directory, with a trailing slash.
pub fn dir_iri(dir: &Path) -> Result<Iri, CliError> {
    let abs = std::path::absolute(dir).map_err(|e| io_err(dir, e))?;
    let mut s = abs.to_string_lossy().replace('\\', "/").replace(' ', "%20");
    if !s.starts_with('/') {
        s.insert(0, '/');
    }
    if !s.ends_with('/') {
        s.push('/');
    }
    Iri::new(format!("file://{s}")).map_err(|e| CliError::Config(e.to_string()))
}

pub fn file_iri(file: &Path) -> Result<Iri, CliError> {
    let abs = std::path::absolute(file).map_err(|e| io_err(file, e))?;
    let s = abs.to_string_lossy().replace('\\', "/").replace(' ', "%20");
    let s = if s.starts_with('/') { s } else { format!("/{s}") };
    Iri::new(format!("file://{s}")).map_err(|e| CliError::Config(e.to_string()))
}

pub fn type_mapping(config: &ProjectConfig) -> TypeMapping {
    let mut mapping = TypeMapping::default();
    for (token, ty) in &config.type_overrides {
        mapping.insert(token, *ty);
    }
    mapping
}

/// The prefix environment of the project, before page declarations.
pub fn project_env(config: &ProjectConfig) -> PrefixEnv {
    let mut env = PrefixEnv::builtins();
    for (name, base) in &config.prefixes {
        env.bind(name, base.clone()).expect("validated when the config was parsed");
    }
    env
}

/// Adds a page's prefix declarations to the project environment; page
/// declarations shadow project ones, built-ins cannot be rebound.
pub fn page_env(project: &PrefixEnv, doc: &NarrativeDoc, file: &str) -> PrefixEnv {
    let mut env = project.clone();
    for decl in &doc.prefix_decls {
        let bound = Iri::new(normalize_prefix_base(decl.base.as_str()))
            .and_then(|base| env.bind(&decl.name, base));
        if let Err(e) = bound {
            log::warn!("{file}:{}: prefix {} ignored: {e}", decl.span, decl.name);
        }
    }
    env
}

impl Project {
    pub fn load(config: ProjectConfig, refresh: bool) -> Result<Self, CliError> {
        config.check_paths()?;
        let fetcher = HttpFetcher::new(config.timeout);
        let cache = PageCache::on_disk(&config.cache_dir);
        let mut corpus = Corpus::new(Box::new(fetcher), cache).with_refresh(refresh);
        let site_base = match &config.site_base {
            Some(b) => b.clone(),
            None => dir_iri(&config.out_dir)?,
        };
        let mapping = type_mapping(&config);

        let mut formal_outputs = BTreeMap::new();
        let mut stylesheets = BTreeMap::new();
        let mut local_paths = Vec::new();
        let dirs = config
            .formal
            .iter()
            .map(|d| (d, false))
            .chain(config.annotate.iter().map(|d| (d, true)));
        for (dir, annotate) in dirs {
            for (rel, file) in files_under(dir)? {
                let bytes = fs::read(&file).map_err(|e| io_err(&file, e))?;
                let source = relative_to_root(&config.root, &file);
                if let Some(stem) = rel.strip_suffix(".html").or_else(|| rel.strip_suffix(".htm")) {
                    let text = String::from_utf8_lossy(&bytes);
                    let mut doc = HtmlDoc::parse(&text);
                    if annotate {
                        let annotated = annotator::annotate(doc, &mapping);
                        for w in &annotated.warnings {
                            log::warn!("{source}: {w}");
                        }
                        doc = annotated.doc;
                    }
                    let out_path = format!("{stem}.html");
                    let base = Iri::new(agora_core::uri::resolve(site_base.as_str(), &out_path))
                        .map_err(|e| CliError::Config(e.to_string()))?;
                    let html = doc.to_html();
                    corpus.add_local(stem, doc, base);
                    local_paths.push((stem.to_string(), source.clone()));
                    if formal_outputs.insert(out_path.clone(), html.into_bytes()).is_some() {
                        log::warn!("{source}: replaces an earlier page published as {out_path}");
                    }
                } else {
                    if rel.ends_with(".css") {
                        stylesheets.insert(rel.clone(), String::from_utf8_lossy(&bytes).into_owned());
                    }
                    formal_outputs.insert(rel, bytes);
                }
            }
        }

        let env = PrefixEnv::builtins();
        let mut findings = Vec::new();
        for (path, source) in &local_paths {
            if let Ok(page) = corpus.page(&Location::Path(path.clone()), &env) {
                for dup in agora_core::harvester::duplicate_subjects(&page.fragments) {
                    findings.push(Finding {
                        file: source.clone(),
                        span: None,
                        kind: FindingKind::DuplicateSubject(dup),
                    });
                }
            }
        }
        findings.dedup();

        let mut narratives = Vec::new();
        for dir in &config.narratives {
            for (rel, file) in files_under(dir)? {
                let Some(path) = rel.strip_suffix(".creole") else {
                    continue;
                };
                let text = fs::read_to_string(&file).map_err(|e| io_err(&file, e))?;
                let doc = narrative::parse_narrative(&text);
                let source = relative_to_root(&config.root, &file);
                for issue in &doc.issues {
                    log::warn!("{source}:{}: {}", issue.span, issue.message);
                }
                narratives.push(Narrative {
                    path: path.to_string(),
                    file: source,
                    doc,
                });
            }
        }

        Ok(Project {
            config,
            corpus,
            narratives,
            formal_outputs: formal_outputs
                .into_iter()
                .map(|(path, bytes)| OutputFile { path, bytes })
                .collect(),
            stylesheets: stylesheets.into_iter().collect(),
            findings,
        })
    }

    /// Resolves every antiquotation of every narrative, pages in parallel.
    pub fn resolve_all(&self) -> Vec<ResolvedNarrative> {
        let project_env = project_env(&self.config);
        self.narratives
            .par_iter()
            .map(|n| {
                let env = page_env(&project_env, &n.doc, &n.file);
                let results = n
                    .doc
                    .antiquotations()
                    .into_iter()
                    .map(|a| (a.clone(), resolver::resolve(a, &env, &self.corpus)))
                    .collect();
                ResolvedNarrative {
                    narrative: n.clone(),
                    env,
                    results,
                }
            })
            .collect()
    }

    pub fn report(&self, resolved: &[ResolvedNarrative]) -> Report {
        let mut findings = self.findings.clone();
        let mut antiquotations = 0;
        for r in resolved {
            antiquotations += r.results.len();
            for (a, result) in &r.results {
                if let ResolutionResult::NotFound { reference, reason } = result {
                    findings.push(Finding {
                        file: r.narrative.file.clone(),
                        span: Some(a.span),
                        kind: FindingKind::Unresolved {
                            reference: reference.clone(),
                            reason: reason.clone(),
                        },
                    });
                }
            }
        }
        findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Report {
            pages: resolved.len(),
            antiquotations,
            findings,
        }
    }

    /// The stylesheet linked from every narrative page.
    pub fn site_stylesheet(&self) -> String {
        let mut css = String::from(resolver::UNRESOLVED_CSS);
        for (path, text) in &self.stylesheets {
            css.push_str(&format!("\n/* {path} */\n"));
            css.push_str(&scope_css(text));
            if !css.ends_with('\n') {
                css.push('\n');
            }
        }
        css
    }
}

/// A complete HTML page around a rendered narrative body.
pub fn page_html(path: &str, body: &str) -> String {
    let up = "../".repeat(path.matches('/').count());
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\"/>\n<title>{}</title>\n\
         <link rel=\"stylesheet\" href=\"{up}{SITE_CSS}\"/>\n</head>\n<body>\n{body}</body>\n</html>\n",
        agora_core::html::escape_text(path)
    )
}

pub const SITE_CSS: &str = "agora.css";

/// Renders one resolved narrative to its output page.
pub fn render_page(r: &ResolvedNarrative, mode: agora_core::RenderMode) -> String {
    let inclusions = r
        .results
        .iter()
        .map(|(a, result)| (a.span, resolver::inclusion_html(a, result)))
        .collect();
    let body = narrative::render_narrative(&r.narrative.doc, &inclusions, mode)
        .expect("every antiquotation has an inclusion");
    page_html(&r.narrative.path, &body)
}
