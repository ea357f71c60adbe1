//! Extraction of annotated fragments and triples from HTML+RDFa.
//!
//! Only `about`, `typeof`, `rel` and `resource` are interpreted. An element
//! carrying `about` and/or `typeof` starts a fragment; `rel`/`resource`
//! pairs attach to the nearest enclosing fragment (or the element's own).

use std::fmt;

use crate::html::{Element, HtmlDoc, Node};
use crate::uri;
use crate::vocabulary::{parse_type_iri, Iri, OmdocType, PrefixEnv, RelationType, RDF_TYPE};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FragmentType {
    Known(OmdocType),
    Other(Iri),
}

impl FragmentType {
    pub fn iri(&self) -> Iri {
        match self {
            FragmentType::Known(t) => crate::vocabulary::type_iri(*t, &PrefixEnv::builtins()),
            FragmentType::Other(i) => i.clone(),
        }
    }

    pub fn known(&self) -> Option<OmdocType> {
        match self {
            FragmentType::Known(t) => Some(*t),
            FragmentType::Other(_) => None,
        }
    }
}

impl fmt::Display for FragmentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FragmentType::Known(t) => t.fmt(f),
            FragmentType::Other(i) => i.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    Known(RelationType),
    Other(Iri),
}

impl Predicate {
    pub fn iri(&self) -> Iri {
        match self {
            Predicate::Known(r) => r.iri(),
            Predicate::Other(i) => i.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedFragment {
    pub subject: Iri,
    /// `None` for an element carrying `about` without `typeof`.
    pub ty: Option<FragmentType>,
    /// Serialized subtree of the carrying element.
    pub html: String,
    pub relations: Vec<(Predicate, Iri)>,
    pub source_order: usize,
}

impl AnnotatedFragment {
    pub fn known_type(&self) -> Option<OmdocType> {
        self.ty.as_ref().and_then(FragmentType::known)
    }

    pub fn id(&self) -> Option<&str> {
        self.subject.fragment()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub s: Iri,
    pub p: Iri,
    pub o: Iri,
}

impl Triple {
    pub fn to_ntriples(&self) -> String {
        format!(
            "<{}> <{}> <{}> .",
            escape_nt_iri(self.s.as_str()),
            escape_nt_iri(self.p.as_str()),
            escape_nt_iri(self.o.as_str())
        )
    }

    pub fn to_tsv(&self) -> String {
        format!("{}\t{}\t{}", self.s, self.p, self.o)
    }
}

/// Escapes characters not permitted inside an N-Triples IRIREF.
fn escape_nt_iri(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') {
            out.push_str(&format!("\\u{:04X}", c as u32));
        } else {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HarvestWarning {
    UnknownCurie { value: String },
    BadResource { value: String },
}

impl fmt::Display for HarvestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarvestWarning::UnknownCurie { value } => write!(f, "cannot expand {value:?}"),
            HarvestWarning::BadResource { value } => write!(f, "cannot resolve resource {value:?}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Harvest {
    pub fragments: Vec<AnnotatedFragment>,
    pub warnings: Vec<HarvestWarning>,
}

pub fn harvest(doc: &HtmlDoc, base: &Iri) -> Vec<AnnotatedFragment> {
    harvest_with_warnings(doc, base).fragments
}

pub fn harvest_with_warnings(doc: &HtmlDoc, base: &Iri) -> Harvest {
    let mut h = Harvester {
        base,
        env: PrefixEnv::builtins(),
        out: Harvest::default(),
        element_index: 0,
    };
    h.walk(&doc.nodes, None);
    h.out
}

struct Harvester<'a> {
    base: &'a Iri,
    env: PrefixEnv,
    out: Harvest,
    element_index: usize,
}

impl Harvester<'_> {
    fn walk(&mut self, nodes: &[Node], current: Option<usize>) {
        for node in nodes {
            if let Node::Element(e) = node {
                self.element(e, current);
            }
        }
    }

    fn element(&mut self, e: &Element, current: Option<usize>) {
        let order = self.element_index;
        self.element_index += 1;
        let about = e.attr("about");
        let typeof_ = e.attr("typeof").filter(|t| !t.trim().is_empty());
        let mut owner = current;
        if about.is_some() || typeof_.is_some() {
            let subject = match &about {
                Some(a) => self.resolve(a),
                None => None,
            }
            .unwrap_or_else(|| {
                Iri::new(format!("{}#_gen{order}", self.base.without_fragment()))
                    .expect("base is absolute")
            });
            let ty = typeof_.as_deref().map(|t| self.fragment_type(t));
            self.out.fragments.push(AnnotatedFragment {
                subject,
                ty,
                html: e.to_html(),
                relations: Vec::new(),
                source_order: order,
            });
            owner = Some(self.out.fragments.len() - 1);
        }
        if let (Some(rel), Some(resource), Some(idx)) = (e.attr("rel"), e.attr("resource"), owner) {
            match self.resolve(&resource) {
                Some(object) => {
                    for token in rel.split_ascii_whitespace() {
                        if let Some(p) = self.predicate(token) {
                            self.out.fragments[idx].relations.push((p, object.clone()));
                        }
                    }
                }
                None => self.out.warnings.push(HarvestWarning::BadResource { value: resource }),
            }
        }
        self.walk(&e.children, owner);
    }

    fn resolve(&self, reference: &str) -> Option<Iri> {
        Iri::new(uri::resolve(self.base.as_str(), reference.trim())).ok()
    }

    fn expand(&mut self, token: &str) -> Option<Iri> {
        match self.env.expand_str(token) {
            Ok(iri) => Some(iri),
            Err(_) => {
                self.out.warnings.push(HarvestWarning::UnknownCurie {
                    value: token.to_string(),
                });
                None
            }
        }
    }

    fn fragment_type(&mut self, typeof_: &str) -> FragmentType {
        let token = typeof_.split_ascii_whitespace().next().unwrap_or("");
        match self.expand(token) {
            Some(iri) => match parse_type_iri(&iri) {
                Some(t) => FragmentType::Known(t),
                None => FragmentType::Other(iri),
            },
            None => FragmentType::Other(
                Iri::new(token)
                    .ok()
                    .or_else(|| self.resolve(token))
                    .unwrap_or_else(|| self.base.clone()),
            ),
        }
    }

    fn predicate(&mut self, token: &str) -> Option<Predicate> {
        let iri = self.expand(token)?;
        Some(match RelationType::from_iri(&iri) {
            Some(r) => Predicate::Known(r),
            None => Predicate::Other(iri),
        })
    }
}

/// One `rdf:type` triple per typed fragment, then one per relation, in
/// source order.
pub fn triples(frags: &[AnnotatedFragment]) -> Vec<Triple> {
    let rdf_type = Iri::new(RDF_TYPE).expect("constant IRI");
    let mut out = Vec::new();
    for f in frags {
        if let Some(ty) = &f.ty {
            out.push(Triple {
                s: f.subject.clone(),
                p: rdf_type.clone(),
                o: ty.iri(),
            });
        }
        for (p, o) in &f.relations {
            out.push(Triple {
                s: f.subject.clone(),
                p: p.iri(),
                o: o.clone(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FindError {
    NotFound,
    TypeMismatch(Option<FragmentType>),
}

/// Selects the first fragment (source order) whose subject's fragment id is
/// `fragment_id` and whose type is subsumed by `wanted`.
pub fn find_fragment<'a>(
    frags: &'a [AnnotatedFragment],
    fragment_id: &str,
    wanted: OmdocType,
) -> Result<&'a AnnotatedFragment, FindError> {
    let mut candidates = frags.iter().filter(|f| f.id() == Some(fragment_id)).peekable();
    let first = candidates.peek().copied().ok_or(FindError::NotFound)?;
    candidates
        .find(|f| {
            f.known_type()
                .is_some_and(|t| crate::vocabulary::subsumes(wanted, t))
        })
        .ok_or_else(|| FindError::TypeMismatch(first.ty.clone()))
}

/// Subjects that occur on more than one fragment, in first-seen order.
pub fn duplicate_subjects(frags: &[AnnotatedFragment]) -> Vec<Iri> {
    let mut seen = std::collections::HashSet::new();
    let mut dups = Vec::new();
    for f in frags {
        if !seen.insert(&f.subject) && !dups.contains(&f.subject) {
            dups.push(f.subject.clone());
        }
    }
    dups
}
