//! Scanning and parsing of `@{type reference [options]}` antiquotations and
//! `@{prefix NAME=IRI}` declarations.

use std::fmt;

use crate::vocabulary::{is_prefix_token, Curie, Iri};

/// Half-open byte range in the narrative source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Location {
    Curie(Curie),
    /// A page name inside the wiki, e.g. `CoqBinomialCoefficient`.
    Path(String),
    Iri(Iri),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Curie(c) => c.fmt(f),
            Location::Path(p) => f.write_str(p),
            Location::Iri(i) => i.fmt(f),
        }
    }
}

impl Location {
    /// `://` marks an absolute IRI; a `:` before any `/` or `#` marks a
    /// CURIE; anything else is a wiki path.
    pub fn classify(s: &str) -> Result<Location, String> {
        if s.is_empty() {
            return Err("empty location".into());
        }
        if s.contains("://") {
            return Iri::new(s).map(Location::Iri).map_err(|e| e.to_string());
        }
        let first_delim = s.find(['/', '#']).unwrap_or(s.len());
        if s[..first_delim].contains(':') {
            return s.parse::<Curie>().map(Location::Curie).map_err(|e| e.to_string());
        }
        if s.chars().any(|c| c.is_whitespace() || c == '}') {
            return Err(format!("invalid wiki path {s:?}"));
        }
        Ok(Location::Path(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RefTarget {
    pub location: Location,
    pub fragment: Option<String>,
}

impl RefTarget {
    pub fn parse(s: &str) -> Result<RefTarget, String> {
        let (loc, fragment) = match s.split_once('#') {
            Some((loc, frag)) => {
                if frag.is_empty() || frag.chars().any(|c| c == '#' || c == '}' || c.is_whitespace()) {
                    return Err(format!("invalid fragment in {s:?}"));
                }
                (loc, Some(frag.to_string()))
            }
            None => (s, None),
        };
        Ok(RefTarget {
            location: Location::classify(loc)?,
            fragment,
        })
    }
}

impl fmt::Display for RefTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.location.fmt(f)?;
        if let Some(frag) = &self.fragment {
            write!(f, "#{frag}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Antiquotation {
    pub ty: Curie,
    pub target: RefTarget,
    pub options: Vec<String>,
    pub span: Span,
}

impl Antiquotation {
    pub fn has_option(&self, key: &str) -> bool {
        self.options
            .iter()
            .any(|o| o.split_once('=').map_or(o.as_str(), |(k, _)| k) == key)
    }

    /// Equality ignoring the source span.
    pub fn same_content(&self, other: &Antiquotation) -> bool {
        self.ty == other.ty && self.target == other.target && self.options == other.options
    }
}

impl fmt::Display for Antiquotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{{{} {}", self.ty, self.target)?;
        if !self.options.is_empty() {
            write!(f, " [{}]", self.options.join(","))?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixDecl {
    pub name: String,
    pub base: Iri,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    Malformed,
    EmptyBody,
    BadIri,
    BadOptions,
    Unterminated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIssue {
    pub span: Span,
    pub kind: IssueKind,
    pub message: String,
}

impl ParseIssue {
    pub fn new(span: Span, kind: IssueKind, message: impl Into<String>) -> Self {
        ParseIssue {
            span,
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:?}): {}", self.span, self.kind, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Parsed {
    Antiquotation(Antiquotation),
    Prefix(PrefixDecl),
    Issue(ParseIssue),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub span: Span,
    pub body: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanResult {
    pub occurrences: Vec<Occurrence>,
    pub issues: Vec<ParseIssue>,
}

/// Result of looking for an antiquotation opener at a byte offset.
pub(crate) enum Opener {
    /// `\@{`: a literal `@{`; consumes 3 bytes.
    Escaped,
    /// `@{ ... }` ending at the given byte offset (exclusive).
    Complete { body_start: usize, end: usize },
    Unterminated,
    None,
}

pub(crate) fn opener_at(text: &str, pos: usize) -> Opener {
    let rest = &text[pos..];
    if rest.starts_with("\\@{") {
        return Opener::Escaped;
    }
    if !rest.starts_with("@{") {
        return Opener::None;
    }
    let body_start = pos + 2;
    match find_closing_brace(&text[body_start..]) {
        Some(i) => Opener::Complete {
            body_start,
            end: body_start + i + 1,
        },
        None => Opener::Unterminated,
    }
}

/// Offset of the first `}` not preceded by a backslash.
fn find_closing_brace(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    (0..bytes.len()).find(|&i| bytes[i] == b'}' && (i == 0 || bytes[i - 1] != b'\\'))
}

/// Finds every `@{...}` occurrence in document order.
pub fn scan(text: &str) -> ScanResult {
    let mut out = ScanResult::default();
    let mut pos = 0;
    while let Some(off) = text[pos..].find(['@', '\\']) {
        let at = pos + off;
        match opener_at(text, at) {
            Opener::Escaped => pos = at + 3,
            Opener::Complete { body_start, end } => {
                out.occurrences.push(Occurrence {
                    span: Span::new(at, end),
                    body: text[body_start..end - 1].to_string(),
                });
                pos = end;
            }
            Opener::Unterminated => {
                out.issues.push(ParseIssue::new(
                    Span::new(at, text.len()),
                    IssueKind::Unterminated,
                    "antiquotation has no closing '}'",
                ));
                break;
            }
            Opener::None => pos = at + 1,
        }
    }
    out
}

/// Replaces every `\@{` escape with a literal `@{`.
pub fn unescape_literal(text: &str) -> String {
    text.replace("\\@{", "@{")
}

/// Parses the text strictly between `@{` and `}`.
pub fn parse(body: &str, span: Span) -> Parsed {
    let trimmed = body.trim();
    if trimmed.is_empty() {
        return Parsed::Issue(ParseIssue::new(span, IssueKind::EmptyBody, "empty antiquotation"));
    }
    let (head, after_head) = split_token(trimmed);
    if head == "prefix" {
        return parse_prefix(after_head.trim(), span);
    }

    let malformed = |msg: String| Parsed::Issue(ParseIssue::new(span, IssueKind::Malformed, msg));

    let ty = match head.parse::<Curie>() {
        Ok(c) => c,
        Err(_) => return malformed(format!("type {head:?} is not a CURIE")),
    };

    let (ref_part, opts_part) = match after_head.find('[') {
        Some(i) => (after_head[..i].trim(), Some(after_head[i..].trim())),
        None => (after_head.trim(), None),
    };
    if ref_part.is_empty() {
        return malformed("missing reference".into());
    }
    if ref_part.split_whitespace().count() != 1 {
        return malformed(format!("expected one reference, found {ref_part:?}"));
    }
    let target = match RefTarget::parse(ref_part) {
        Ok(t) => t,
        Err(e) => return malformed(e),
    };

    let options = match opts_part {
        None => Vec::new(),
        Some(o) => match parse_options(o) {
            Ok(opts) => opts,
            Err(msg) => return Parsed::Issue(ParseIssue::new(span, IssueKind::BadOptions, msg)),
        },
    };

    Parsed::Antiquotation(Antiquotation {
        ty,
        target,
        options,
        span,
    })
}

fn split_token(s: &str) -> (&str, &str) {
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    }
}

fn parse_prefix(rest: &str, span: Span) -> Parsed {
    let Some((name, iri)) = rest.split_once('=') else {
        return Parsed::Issue(ParseIssue::new(
            span,
            IssueKind::Malformed,
            "prefix declaration must be 'prefix NAME=IRI'",
        ));
    };
    let (name, iri) = (name.trim(), iri.trim());
    if !is_prefix_token(name) {
        return Parsed::Issue(ParseIssue::new(
            span,
            IssueKind::Malformed,
            format!("invalid prefix name {name:?}"),
        ));
    }
    match Iri::new(iri) {
        Ok(base) => Parsed::Prefix(PrefixDecl {
            name: name.to_string(),
            base,
            span,
        }),
        Err(_) => Parsed::Issue(ParseIssue::new(
            span,
            IssueKind::BadIri,
            format!("prefix base {iri:?} is not an absolute IRI"),
        )),
    }
}

fn parse_options(s: &str) -> Result<Vec<String>, String> {
    let inner = s
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("options must be enclosed in brackets: {s:?}"))?;
    let mut out = Vec::new();
    for tok in inner.split(|c: char| c == ',' || c.is_whitespace()) {
        if tok.is_empty() {
            continue;
        }
        if tok.contains(['[', ']']) {
            return Err(format!("invalid option {tok:?}"));
        }
        let key = tok.split_once('=').map_or(tok, |(k, _)| k);
        if key.is_empty() {
            return Err(format!("option {tok:?} has an empty key"));
        }
        out.push(tok.to_string());
    }
    Ok(out)
}

/// Scans and parses all occurrences in one step.
pub fn parse_all(text: &str) -> (Vec<Parsed>, Vec<ParseIssue>) {
    let scanned = scan(text);
    let parsed = scanned
        .occurrences
        .iter()
        .map(|o| parse(&o.body, o.span))
        .collect();
    (parsed, scanned.issues)
}
