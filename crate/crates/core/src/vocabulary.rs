//! IRIs, CURIEs, prefix environments and the OMDoc ontology subset.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const OMDOC_NS: &str = "http://omdoc.org/ontology#";
pub const OWL_NS: &str = "http://www.w3.org/2002/07/owl#";
pub const RDFS_NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

const BUILTIN_PREFIXES: [(&str, &str); 3] = [("oo", OMDOC_NS), ("owl", OWL_NS), ("rdfs", RDFS_NS)];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("not an absolute IRI: {0:?}")]
    InvalidIri(String),
    #[error("not a CURIE: {0:?}")]
    InvalidCurie(String),
    #[error("invalid prefix name: {0:?}")]
    InvalidPrefix(String),
    #[error("unknown prefix {0:?}")]
    UnknownPrefix(String),
    #[error("prefix {0:?} is built in and cannot be rebound")]
    ShadowsBuiltin(String),
}

/// An absolute IRI, stored exactly as given.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iri(String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, VocabError> {
        let value = value.into();
        if has_scheme(&value) && !value.chars().any(char::is_whitespace) {
            Ok(Iri(value))
        } else {
            Err(VocabError::InvalidIri(value))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The part after the first `#`, if any.
    pub fn fragment(&self) -> Option<&str> {
        self.0.split_once('#').map(|(_, f)| f)
    }

    /// The IRI with any fragment removed.
    pub fn without_fragment(&self) -> &str {
        self.0.split_once('#').map_or(&self.0, |(b, _)| b)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Iri {
    type Err = VocabError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Iri::new(s)
    }
}

/// `ALPHA *( ALPHA / DIGIT / "+" / "-" / "." ) ":"`
pub fn has_scheme(s: &str) -> bool {
    let Some((scheme, _)) = s.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
}

pub fn is_prefix_token(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Curie {
    pub prefix: String,
    pub local: String,
}

impl Curie {
    pub fn new(prefix: &str, local: &str) -> Result<Self, VocabError> {
        if !is_prefix_token(prefix) {
            return Err(VocabError::InvalidPrefix(prefix.to_string()));
        }
        if local.is_empty() || local.chars().any(|c| c.is_whitespace() || c == '}') {
            return Err(VocabError::InvalidCurie(format!("{prefix}:{local}")));
        }
        Ok(Curie {
            prefix: prefix.to_string(),
            local: local.to_string(),
        })
    }
}

impl FromStr for Curie {
    type Err = VocabError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (prefix, local) = s
            .split_once(':')
            .ok_or_else(|| VocabError::InvalidCurie(s.to_string()))?;
        Curie::new(prefix, local).map_err(|_| VocabError::InvalidCurie(s.to_string()))
    }
}

impl fmt::Display for Curie {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.prefix, self.local)
    }
}

/// Prefix bindings. `oo`, `owl` and `rdfs` are always bound and cannot be
/// rebound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixEnv {
    bindings: BTreeMap<String, Iri>,
}

impl Default for PrefixEnv {
    fn default() -> Self {
        Self::builtins()
    }
}

impl PrefixEnv {
    pub fn builtins() -> Self {
        let bindings = BUILTIN_PREFIXES
            .iter()
            .map(|(p, ns)| (p.to_string(), Iri(ns.to_string())))
            .collect();
        PrefixEnv { bindings }
    }

    pub fn is_builtin(prefix: &str) -> bool {
        BUILTIN_PREFIXES.iter().any(|(p, _)| *p == prefix)
    }

    /// Binds (or rebinds) a user prefix.
    pub fn bind(&mut self, prefix: &str, base: Iri) -> Result<(), VocabError> {
        if Self::is_builtin(prefix) {
            return Err(VocabError::ShadowsBuiltin(prefix.to_string()));
        }
        if !is_prefix_token(prefix) {
            return Err(VocabError::InvalidPrefix(prefix.to_string()));
        }
        self.bindings.insert(prefix.to_string(), base);
        Ok(())
    }

    pub fn get(&self, prefix: &str) -> Option<&Iri> {
        self.bindings.get(prefix)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Iri)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Concatenates the bound base and the local part. The base is used
    /// verbatim; no separator is inserted.
    pub fn expand(&self, curie: &Curie) -> Result<Iri, VocabError> {
        let base = self
            .bindings
            .get(&curie.prefix)
            .ok_or_else(|| VocabError::UnknownPrefix(curie.prefix.clone()))?;
        Ok(Iri(format!("{}{}", base.0, curie.local)))
    }

    /// Expands `s` when it is a CURIE with a bound prefix; otherwise returns
    /// it unchanged if it is already an absolute IRI.
    pub fn expand_str(&self, s: &str) -> Result<Iri, VocabError> {
        if let Ok(curie) = s.parse::<Curie>() {
            if self.bindings.contains_key(&curie.prefix) {
                return self.expand(&curie);
            }
            if s.contains("://") {
                return Iri::new(s);
            }
            return Err(VocabError::UnknownPrefix(curie.prefix));
        }
        Iri::new(s)
    }
}

pub fn expand_curie(curie: &Curie, env: &PrefixEnv) -> Result<Iri, VocabError> {
    env.expand(curie)
}

/// The supported subset of OMDoc ontology item types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OmdocType {
    Theory,
    Symbol,
    Definition,
    Axiom,
    Assertion,
    Theorem,
    Lemma,
    Corollary,
    Proposition,
    Example,
    Proof,
}

impl OmdocType {
    pub const ALL: [OmdocType; 11] = [
        OmdocType::Theory,
        OmdocType::Symbol,
        OmdocType::Definition,
        OmdocType::Axiom,
        OmdocType::Assertion,
        OmdocType::Theorem,
        OmdocType::Lemma,
        OmdocType::Corollary,
        OmdocType::Proposition,
        OmdocType::Example,
        OmdocType::Proof,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OmdocType::Theory => "Theory",
            OmdocType::Symbol => "Symbol",
            OmdocType::Definition => "Definition",
            OmdocType::Axiom => "Axiom",
            OmdocType::Assertion => "Assertion",
            OmdocType::Theorem => "Theorem",
            OmdocType::Lemma => "Lemma",
            OmdocType::Corollary => "Corollary",
            OmdocType::Proposition => "Proposition",
            OmdocType::Example => "Example",
            OmdocType::Proof => "Proof",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    pub fn parent(self) -> Option<OmdocType> {
        match self {
            OmdocType::Theorem | OmdocType::Lemma | OmdocType::Corollary | OmdocType::Proposition => {
                Some(OmdocType::Assertion)
            }
            _ => None,
        }
    }

    /// The type itself followed by its ancestors.
    pub fn ancestors(self) -> impl Iterator<Item = OmdocType> {
        std::iter::successors(Some(self), |t| t.parent())
    }

    pub fn curie(self) -> Curie {
        Curie {
            prefix: "oo".into(),
            local: self.name().into(),
        }
    }
}

impl fmt::Display for OmdocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// True iff `specific` is `general` or one of its descendants.
pub fn subsumes(general: OmdocType, specific: OmdocType) -> bool {
    specific.ancestors().any(|t| t == general)
}

pub fn type_iri(t: OmdocType, env: &PrefixEnv) -> Iri {
    env.expand(&t.curie())
        .expect("the oo prefix is always bound")
}

pub fn parse_type_iri(iri: &Iri) -> Option<OmdocType> {
    iri.as_str()
        .strip_prefix(OMDOC_NS)
        .and_then(OmdocType::from_name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationType {
    HomeTheoryOf,
    HasDefinition,
    Proves,
    Formalizes,
    Verbalizes,
    SameAs,
    SeeAlso,
}

impl RelationType {
    pub const ALL: [RelationType; 7] = [
        RelationType::HomeTheoryOf,
        RelationType::HasDefinition,
        RelationType::Proves,
        RelationType::Formalizes,
        RelationType::Verbalizes,
        RelationType::SameAs,
        RelationType::SeeAlso,
    ];

    pub fn local_name(self) -> &'static str {
        match self {
            RelationType::HomeTheoryOf => "homeTheoryOf",
            RelationType::HasDefinition => "hasDefinition",
            RelationType::Proves => "proves",
            RelationType::Formalizes => "formalizes",
            RelationType::Verbalizes => "verbalizes",
            RelationType::SameAs => "sameAs",
            RelationType::SeeAlso => "seeAlso",
        }
    }

    pub fn namespace(self) -> &'static str {
        match self {
            RelationType::SameAs => OWL_NS,
            RelationType::SeeAlso => RDFS_NS,
            _ => OMDOC_NS,
        }
    }

    pub fn iri(self) -> Iri {
        Iri(format!("{}{}", self.namespace(), self.local_name()))
    }

    pub fn from_iri(iri: &Iri) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.iri() == *iri)
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.local_name())
    }
}
