//! Dereferencing antiquotations to HTML inclusions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::antiquotation::{Antiquotation, Location};
use crate::harvester::{self, AnnotatedFragment, FindError};
use crate::html::{self, Element, HtmlDoc, Node};
use crate::uri;
use crate::vocabulary::{parse_type_iri, Iri, OmdocType, PrefixEnv, VocabError};

/// Stylesheet for unresolved references.
pub const UNRESOLVED_CSS: &str = ".agora-unresolved { color: red; }\n";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("no page at {0}")]
    NotFound(String),
    #[error("transport error: {0}")]
    Transport(String),
}

pub trait Fetcher: Send + Sync {
    fn fetch(&self, iri: &Iri) -> Result<Vec<u8>, FetchError>;
}

/// HTTP(S) GET with `Accept: text/html`.
pub struct HttpFetcher {
    agent: ureq::Agent,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpFetcher { agent }
    }
}

impl Default for HttpFetcher {
    fn default() -> Self {
        Self::new(DEFAULT_TIMEOUT)
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, iri: &Iri) -> Result<Vec<u8>, FetchError> {
        let url = iri.without_fragment();
        let mut resp = self
            .agent
            .get(url)
            .header("Accept", "text/html")
            .call()
            .map_err(|e| FetchError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 404 || status == 410 {
            return Err(FetchError::NotFound(url.to_string()));
        }
        if !(200..300).contains(&status) {
            return Err(FetchError::Transport(format!("HTTP {status} for {url}")));
        }
        resp.body_mut()
            .read_to_vec()
            .map_err(|e| FetchError::Transport(e.to_string()))
    }
}

/// A fetcher for offline use: every remote reference fails.
pub struct Offline;

impl Fetcher for Offline {
    fn fetch(&self, iri: &Iri) -> Result<Vec<u8>, FetchError> {
        Err(FetchError::Transport(format!("offline: {iri}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedPage {
    pub bytes: Vec<u8>,
    /// Seconds since the Unix epoch.
    pub retrieved: u64,
}

/// Fetched pages keyed by IRI (without fragment).
///
/// On disk each page is stored as `<hex sha256 of IRI>` with a sidecar
/// `<hex>.meta` holding `IRI<TAB>timestamp`. Writes are serialized per IRI;
/// reads are concurrent.
#[derive(Default)]
pub struct PageCache {
    dir: Option<PathBuf>,
    mem: RwLock<HashMap<String, Arc<CachedPage>>>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl PageCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        PageCache {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn key(iri: &str) -> String {
        hex::encode(Sha256::digest(iri.as_bytes()))
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn read_disk(&self, iri: &str) -> Option<CachedPage> {
        let dir = self.dir.as_ref()?;
        let key = Self::key(iri);
        let meta = fs::read_to_string(dir.join(format!("{key}.meta"))).ok()?;
        let (stored_iri, ts) = meta.trim_end().split_once('\t')?;
        if stored_iri != iri {
            return None;
        }
        let bytes = fs::read(dir.join(&key)).ok()?;
        Some(CachedPage {
            bytes,
            retrieved: ts.parse().ok()?,
        })
    }

    fn write_disk(&self, iri: &str, page: &CachedPage) -> io::Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        fs::create_dir_all(dir)?;
        let key = Self::key(iri);
        let tmp = dir.join(format!("{key}.tmp"));
        fs::write(&tmp, &page.bytes)?;
        fs::rename(&tmp, dir.join(&key))?;
        let tmp_meta = dir.join(format!("{key}.meta.tmp"));
        fs::write(&tmp_meta, format!("{iri}\t{}\n", page.retrieved))?;
        fs::rename(&tmp_meta, dir.join(format!("{key}.meta")))
    }

    pub fn get(&self, iri: &str) -> Option<Arc<CachedPage>> {
        if let Some(p) = self.mem.read().expect("cache lock").get(iri) {
            return Some(p.clone());
        }
        self.read_disk(iri).map(|p| self.remember(iri, p))
    }

    fn remember(&self, iri: &str, page: CachedPage) -> Arc<CachedPage> {
        self.mem
            .write()
            .expect("cache lock")
            .entry(iri.to_string())
            .or_insert_with(|| Arc::new(page))
            .clone()
    }

    /// Returns the cached page, fetching it on a miss. With `refresh` the
    /// disk cache is not consulted (pages fetched earlier in this process
    /// are still reused).
    pub fn get_or_fetch(
        &self,
        iri: &str,
        fetcher: &dyn Fetcher,
        refresh: bool,
    ) -> Result<Arc<CachedPage>, FetchError> {
        if let Some(p) = self.mem.read().expect("cache lock").get(iri) {
            return Ok(p.clone());
        }
        let lock = self
            .locks
            .lock()
            .expect("lock table")
            .entry(iri.to_string())
            .or_default()
            .clone();
        let _guard = lock.lock().expect("per-IRI lock");
        if let Some(p) = self.mem.read().expect("cache lock").get(iri) {
            return Ok(p.clone());
        }
        if !refresh {
            if let Some(p) = self.read_disk(iri) {
                return Ok(self.remember(iri, p));
            }
        }
        let parsed = Iri::new(iri).map_err(|e| FetchError::Transport(e.to_string()))?;
        let bytes = fetcher.fetch(&parsed)?;
        let page = CachedPage {
            bytes,
            retrieved: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        };
        if let Err(e) = self.write_disk(iri, &page) {
            log::warn!("cannot write cache entry for {iri}: {e}");
        }
        Ok(self.remember(iri, page))
    }
}

#[derive(Debug, Clone)]
pub struct LocalPage {
    pub doc: HtmlDoc,
    pub base: Iri,
}

/// The harvested fragments of one page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageFragments {
    pub base: Iri,
    pub fragments: Vec<AnnotatedFragment>,
}

/// Local wiki pages plus access to remote pages through a cache.
pub struct Corpus {
    local: BTreeMap<String, LocalPage>,
    fetcher: Box<dyn Fetcher>,
    cache: PageCache,
    refresh: bool,
    harvested: RwLock<HashMap<String, Arc<PageFragments>>>,
}

impl Corpus {
    pub fn new(fetcher: Box<dyn Fetcher>, cache: PageCache) -> Self {
        Corpus {
            local: BTreeMap::new(),
            fetcher,
            cache,
            refresh: false,
            harvested: RwLock::new(HashMap::new()),
        }
    }

    pub fn offline() -> Self {
        Self::new(Box::new(Offline), PageCache::in_memory())
    }

    pub fn with_refresh(mut self, refresh: bool) -> Self {
        self.refresh = refresh;
        self
    }

    pub fn add_local(&mut self, path: &str, doc: HtmlDoc, base: Iri) {
        self.local.insert(normalize_path(path).to_string(), LocalPage { doc, base });
    }

    pub fn local_pages(&self) -> impl Iterator<Item = (&str, &LocalPage)> {
        self.local.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn cache(&self) -> &PageCache {
        &self.cache
    }

    /// Loads and harvests the page a location designates.
    pub fn page(&self, location: &Location, env: &PrefixEnv) -> Result<Arc<PageFragments>, NotFoundReason> {
        match location {
            Location::Path(p) => {
                let key = format!("local:{}", normalize_path(p));
                if let Some(h) = self.harvested.read().expect("harvest lock").get(&key) {
                    return Ok(h.clone());
                }
                let page = self.local.get(normalize_path(p)).ok_or(NotFoundReason::NoPage)?;
                Ok(self.remember(key, &page.doc, page.base.clone()))
            }
            Location::Curie(c) => {
                let iri = env.expand(c).map_err(|e| match e {
                    VocabError::UnknownPrefix(p) => NotFoundReason::UnknownPrefix(p),
                    other => NotFoundReason::TransportError(other.to_string()),
                })?;
                self.remote(&iri)
            }
            Location::Iri(iri) => self.remote(iri),
        }
    }

    fn remote(&self, iri: &Iri) -> Result<Arc<PageFragments>, NotFoundReason> {
        let url = iri.without_fragment().to_string();
        if let Some(h) = self.harvested.read().expect("harvest lock").get(&url) {
            return Ok(h.clone());
        }
        let page = self
            .cache
            .get_or_fetch(&url, self.fetcher.as_ref(), self.refresh)
            .map_err(|e| match e {
                FetchError::NotFound(_) => NotFoundReason::NoPage,
                FetchError::Transport(msg) => NotFoundReason::TransportError(msg),
            })?;
        let doc = HtmlDoc::parse(&String::from_utf8_lossy(&page.bytes));
        let base = doc
            .base_href()
            .and_then(|b| Iri::new(uri::resolve(&url, &b)).ok())
            .unwrap_or_else(|| Iri::new(url.clone()).expect("fetched IRI is absolute"));
        Ok(self.remember(url, &doc, base))
    }

    fn remember(&self, key: String, doc: &HtmlDoc, base: Iri) -> Arc<PageFragments> {
        let fragments = harvester::harvest(doc, &base);
        self.harvested
            .write()
            .expect("harvest lock")
            .entry(key)
            .or_insert_with(|| Arc::new(PageFragments { base, fragments }))
            .clone()
    }
}

fn normalize_path(p: &str) -> &str {
    let p = p.trim_start_matches('/');
    p.strip_suffix(".html").unwrap_or(p)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NotFoundReason {
    NoPage,
    NoFragment,
    /// The referenced item exists with a different type (`None` when the
    /// antiquotation's own type is not a known OMDoc type or the item is
    /// untyped).
    TypeMismatch { actual: Option<String> },
    UnknownPrefix(String),
    TransportError(String),
}

impl NotFoundReason {
    pub fn name(&self) -> &'static str {
        match self {
            NotFoundReason::NoPage => "NoPage",
            NotFoundReason::NoFragment => "NoFragment",
            NotFoundReason::TypeMismatch { .. } => "TypeMismatch",
            NotFoundReason::UnknownPrefix(_) => "UnknownPrefix",
            NotFoundReason::TransportError(_) => "TransportError",
        }
    }
}

impl fmt::Display for NotFoundReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NotFoundReason::TypeMismatch { actual: Some(t) } => write!(f, "TypeMismatch (actual type {t})"),
            NotFoundReason::UnknownPrefix(p) => write!(f, "UnknownPrefix ({p})"),
            NotFoundReason::TransportError(e) => write!(f, "TransportError ({e})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolutionResult {
    Resolved { html: String, subject: Iri, ty: OmdocType },
    NotFound { reference: String, reason: NotFoundReason },
}

impl ResolutionResult {
    pub fn is_resolved(&self) -> bool {
        matches!(self, ResolutionResult::Resolved { .. })
    }
}

pub fn resolve(a: &Antiquotation, env: &PrefixEnv, corpus: &Corpus) -> ResolutionResult {
    let reference = a.target.to_string();
    let not_found = |reason| ResolutionResult::NotFound {
        reference: reference.clone(),
        reason,
    };

    let wanted = match env.expand(&a.ty) {
        Ok(iri) => match parse_type_iri(&iri) {
            Some(t) => t,
            None => return not_found(NotFoundReason::TypeMismatch { actual: None }),
        },
        Err(VocabError::UnknownPrefix(p)) => return not_found(NotFoundReason::UnknownPrefix(p)),
        Err(e) => return not_found(NotFoundReason::TransportError(e.to_string())),
    };

    let page = match corpus.page(&a.target.location, env) {
        Ok(p) => p,
        Err(reason) => return not_found(reason),
    };
    let Some(fragment_id) = &a.target.fragment else {
        return not_found(NotFoundReason::NoFragment);
    };
    let fragment = match harvester::find_fragment(&page.fragments, fragment_id, wanted) {
        Ok(f) => f,
        Err(FindError::NotFound) => return not_found(NotFoundReason::NoFragment),
        Err(FindError::TypeMismatch(actual)) => {
            return not_found(NotFoundReason::TypeMismatch {
                actual: actual.map(|t| t.to_string()),
            })
        }
    };

    let html = if a.has_option("noproof") {
        remove_nested_proofs(&fragment.html)
    } else {
        fragment.html.clone()
    };
    ResolutionResult::Resolved {
        html: rewrite_links(&html, &page.base),
        subject: fragment.subject.clone(),
        ty: fragment.known_type().expect("find_fragment checks the type"),
    }
}

fn is_proof_element(e: &Element, env: &PrefixEnv) -> bool {
    e.attr("typeof").is_some_and(|t| {
        t.split_ascii_whitespace().any(|tok| {
            env.expand_str(tok)
                .ok()
                .and_then(|iri| parse_type_iri(&iri))
                == Some(OmdocType::Proof)
        })
    })
}

/// Deletes every descendant element typed as a proof; the root is kept.
pub fn remove_nested_proofs(fragment_html: &str) -> String {
    fn strip(nodes: &mut Vec<Node>, env: &PrefixEnv) {
        nodes.retain(|n| !matches!(n, Node::Element(e) if is_proof_element(e, env)));
        for n in nodes {
            if let Node::Element(e) = n {
                strip(&mut e.children, env);
            }
        }
    }
    let env = PrefixEnv::builtins();
    let mut nodes = html::parse_nodes(fragment_html);
    for n in &mut nodes {
        if let Node::Element(e) = n {
            strip(&mut e.children, &env);
        }
    }
    html::serialize_nodes(&nodes)
}

/// Resolves every `href` and `src` attribute against `base`.
pub fn rewrite_links(fragment_html: &str, base: &Iri) -> String {
    fn walk(nodes: &mut [Node], base: &Iri) {
        for n in nodes {
            if let Node::Element(e) = n {
                for attr in ["href", "src"] {
                    if let Some(value) = e.attr(attr) {
                        let resolved = uri::resolve(base.as_str(), value.trim());
                        if Iri::new(resolved.as_str()).is_err() {
                            log::warn!("cannot resolve {attr}={value:?} against {base}");
                        } else if resolved != value {
                            e.set_attr(attr, &resolved);
                        }
                    }
                }
                walk(&mut e.children, base);
            }
        }
    }
    let mut nodes = html::parse_nodes(fragment_html);
    walk(&mut nodes, base);
    html::serialize_nodes(&nodes)
}

/// The red question-marked rendering of an unresolved reference.
pub fn render_not_found(a: &Antiquotation, reason: &NotFoundReason) -> String {
    format!(
        "<span class=\"agora-unresolved\" title=\"{}\">{}?</span>",
        reason.name(),
        html::escape_text(&a.target.to_string())
    )
}

/// The HTML an antiquotation contributes to an inline-mode page.
pub fn inclusion_html(a: &Antiquotation, result: &ResolutionResult) -> String {
    match result {
        ResolutionResult::Resolved { html, .. } => html.clone(),
        ResolutionResult::NotFound { reason, .. } => render_not_found(a, reason),
    }
}
