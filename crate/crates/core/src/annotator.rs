//! Post-processing of Coqdoc-style HTML into HTML+RDFa.
//!
//! Coqdoc emits a flat run of `span`/`a`/text siblings per command, with
//! the syntactic class of each token in a `type` (older) or `title` (newer)
//! attribute. Annotation runs four passes:
//!
//! 1. [`group_commands`] gathers the siblings of one command under a
//!    `class="command"` wrapper.
//! 2. [`export_types`] maps the defining token's class to an OMDoc type
//!    and sets `typeof`.
//! 3. [`identify_subjects`] copies the name anchor into `about`.
//! 4. [`wrap_proofs`] wraps `Proof. ... Qed.` runs in a `typeof="oo:Proof"`
//!    element linked to the statement it proves.
//!
//! Wrappers are `div` when they enclose block-level content and `span`
//! otherwise. Text nodes are never modified.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::html::{decode_entities, is_block, nodes_contain_block, Element, HtmlDoc, Node};
use crate::vocabulary::{subsumes, OmdocType};

pub const COMMAND_CLASS: &str = "command";

const PROOF_END_KEYWORDS: [&str; 4] = ["Qed", "Defined", "Admitted", "Abort"];

/// Token classes that never name a defined item.
const LEXICAL_CLASSES: [&str; 8] = [
    "keyword", "var", "binder", "tactic", "notation", "comment", "string", "number",
];

/// Source token class to OMDoc type. Tokens compare case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeMapping {
    map: BTreeMap<String, OmdocType>,
}

impl Default for TypeMapping {
    fn default() -> Self {
        let mut m = TypeMapping {
            map: BTreeMap::new(),
        };
        for (token, ty) in [
            ("lemma", OmdocType::Lemma),
            ("thm", OmdocType::Theorem),
            ("theorem", OmdocType::Theorem),
            ("definition", OmdocType::Definition),
            ("def", OmdocType::Definition),
            ("axiom", OmdocType::Axiom),
            ("corollary", OmdocType::Corollary),
            ("proposition", OmdocType::Proposition),
            ("example", OmdocType::Example),
        ] {
            m.insert(token, ty);
        }
        m
    }
}

impl TypeMapping {
    pub fn empty() -> Self {
        TypeMapping {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, token: &str, ty: OmdocType) {
        self.map.insert(token.to_lowercase(), ty);
    }

    pub fn get(&self, token: &str) -> Option<OmdocType> {
        self.map.get(&token.to_lowercase()).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotationWarning {
    UnmappedType { token: String, command: String },
    MissingName { command: String },
    DuplicateSubject { about: String },
    ProofWithoutStatement { command: String },
    UnclosedProof { command: String },
}

impl fmt::Display for AnnotationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotationWarning::UnmappedType { token, command } => {
                write!(f, "no OMDoc type for token class {token:?} in `{command}`")
            }
            AnnotationWarning::MissingName { command } => {
                write!(f, "typed command has no name anchor: `{command}`")
            }
            AnnotationWarning::DuplicateSubject { about } => write!(f, "duplicate subject {about:?}"),
            AnnotationWarning::ProofWithoutStatement { command } => {
                write!(f, "proof does not follow a named assertion: `{command}`")
            }
            AnnotationWarning::UnclosedProof { command } => {
                write!(f, "proof is not closed before end of input: `{command}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotated {
    pub doc: HtmlDoc,
    pub warnings: Vec<AnnotationWarning>,
}

/// The token class Coqdoc attached to an element.
fn source_class(e: &Element) -> Option<String> {
    e.attr("type")
        .or_else(|| e.has_class("id").then(|| e.attr("title")).flatten())
        .map(|s| s.trim().to_lowercase())
        .filter(|s| !s.is_empty())
}

fn is_keyword(e: &Element) -> bool {
    source_class(e).as_deref() == Some("keyword")
}

pub fn is_command(e: &Element) -> bool {
    e.has_class(COMMAND_CLASS)
}

fn snippet(e: &Element) -> String {
    let text = decode_entities(&e.text_content());
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut s = words.join(" ");
    if s.chars().count() > 60 {
        s = s.chars().take(57).collect::<String>() + "...";
    }
    s
}

fn first_word(e: &Element) -> String {
    decode_entities(&e.text_content())
        .trim_start_matches(|c: char| c.is_whitespace())
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect()
}

/// True when the text contains a `.` followed by whitespace or end of
/// text and not adjacent to another `.`.
pub fn has_terminator(raw_text: &str) -> bool {
    let text: Vec<char> = decode_entities(raw_text).chars().collect();
    text.iter().enumerate().any(|(i, &c)| {
        c == '.'
            && (i == 0 || text[i - 1] != '.')
            && text.get(i + 1).is_none_or(|n| n.is_whitespace())
    })
}

fn wrapper(children: Vec<Node>) -> Element {
    let blocky = children.iter().any(|n| match n {
        Node::Element(e) => is_block(&e.name),
        _ => false,
    }) || nodes_contain_block(&children);
    let mut e = Element::new(if blocky { "div" } else { "span" });
    e.children = children;
    e
}

pub fn group_commands(doc: HtmlDoc) -> HtmlDoc {
    HtmlDoc {
        nodes: group_list(doc.nodes),
    }
}

fn group_list(nodes: Vec<Node>) -> Vec<Node> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut current: Option<Vec<Node>> = None;
    let close = |group: Vec<Node>| Node::Element(wrapper(group).with_attr("class", COMMAND_CLASS));

    for node in nodes {
        if let Some(group) = current.as_mut() {
            let terminates = matches!(&node, Node::Text(t) if has_terminator(t));
            group.push(node);
            if terminates {
                out.push(close(current.take().expect("open group")));
            }
            continue;
        }
        match node {
            Node::Element(e) if is_command(&e) => out.push(Node::Element(e)),
            Node::Element(e) if is_keyword(&e) => current = Some(vec![Node::Element(e)]),
            Node::Element(mut e) => {
                e.children = group_list(e.children);
                out.push(Node::Element(e));
            }
            other => out.push(other),
        }
    }
    if let Some(group) = current {
        out.push(close(group));
    }
    out
}

/// Visits every element in pre-order, mutably.
fn for_each_element(nodes: &mut [Node], f: &mut impl FnMut(&mut Element)) {
    for n in nodes {
        if let Node::Element(e) = n {
            f(e);
            for_each_element(&mut e.children, f);
        }
    }
}

/// Class tokens of descendants that may name the defined item: tokens
/// inside `a[href]` are references to other items and are skipped.
fn defining_tokens(nodes: &[Node], in_reference: bool, out: &mut Vec<String>) {
    for n in nodes {
        if let Node::Element(e) = n {
            let in_ref = in_reference || (e.name == "a" && e.has_attr("href"));
            if !in_ref {
                if let Some(class) = source_class(e) {
                    if !LEXICAL_CLASSES.contains(&class.as_str()) {
                        out.push(class);
                    }
                }
            }
            defining_tokens(&e.children, in_ref, out);
        }
    }
}

pub fn export_types(mut doc: HtmlDoc, mapping: &TypeMapping) -> (HtmlDoc, Vec<AnnotationWarning>) {
    let mut warnings = Vec::new();
    for_each_element(&mut doc.nodes, &mut |e| {
        if !is_command(e) || e.has_attr("typeof") {
            return;
        }
        let mut tokens = Vec::new();
        defining_tokens(&e.children, false, &mut tokens);
        let Some(token) = tokens.first() else {
            return;
        };
        match mapping.get(token) {
            Some(ty) => e.set_attr("typeof", &ty.curie().to_string()),
            None => warnings.push(AnnotationWarning::UnmappedType {
                token: token.clone(),
                command: snippet(e),
            }),
        }
    });
    (doc, warnings)
}

pub fn identify_subjects(mut doc: HtmlDoc) -> (HtmlDoc, Vec<AnnotationWarning>) {
    let mut warnings = Vec::new();
    for_each_element(&mut doc.nodes, &mut |e| {
        if !is_command(e) || !e.has_attr("typeof") || e.has_attr("about") {
            return;
        }
        let name = e
            .find_descendant(&|d| d.name == "a" && d.attr("name").is_some_and(|n| !n.is_empty()))
            .and_then(|a| a.attr("name"));
        match name {
            Some(name) => e.set_attr("about", &format!("#{name}")),
            None => warnings.push(AnnotationWarning::MissingName { command: snippet(e) }),
        }
    });
    (doc, warnings)
}

pub fn wrap_proofs(doc: HtmlDoc) -> (HtmlDoc, Vec<AnnotationWarning>) {
    let mut warnings = Vec::new();
    let nodes = wrap_list(doc.nodes, &mut warnings);
    (HtmlDoc { nodes }, warnings)
}

fn command_word(node: &Node) -> Option<(String, &Element)> {
    match node {
        Node::Element(e) if is_command(e) => Some((first_word(e), e)),
        _ => None,
    }
}

fn wrap_list(nodes: Vec<Node>, warnings: &mut Vec<AnnotationWarning>) -> Vec<Node> {
    let nodes: Vec<Node> = nodes
        .into_iter()
        .map(|n| match n {
            Node::Element(mut e) if !is_command(&e) && !e.has_attr("typeof") => {
                e.children = wrap_list(e.children, warnings);
                Node::Element(e)
            }
            other => other,
        })
        .collect();

    let mut out = Vec::with_capacity(nodes.len());
    // The most recent typed statement: (about, type).
    let mut statement: Option<(Option<String>, Option<OmdocType>)> = None;
    let mut iter = nodes.into_iter().peekable();
    while let Some(node) = iter.next() {
        let Some((word, cmd)) = command_word(&node) else {
            out.push(node);
            continue;
        };
        if word != "Proof" {
            if let Some(t) = cmd.attr("typeof") {
                let ty = t
                    .strip_prefix("oo:")
                    .and_then(OmdocType::from_name);
                statement = Some((cmd.attr("about"), ty));
            }
            out.push(node);
            continue;
        }

        let opening = snippet(cmd);
        let mut region = vec![node];
        let mut closed = false;
        for next in iter.by_ref() {
            let ends = command_word(&next).is_some_and(|(w, _)| PROOF_END_KEYWORDS.contains(&w.as_str()));
            region.push(next);
            if ends {
                closed = true;
                break;
            }
        }
        if !closed {
            warnings.push(AnnotationWarning::UnclosedProof {
                command: opening.clone(),
            });
        }

        let proves = match statement.take() {
            Some((Some(about), Some(ty))) if subsumes(OmdocType::Assertion, ty) => Some(about),
            _ => None,
        };
        let mut children = Vec::with_capacity(region.len() + 1);
        if let Some(about) = &proves {
            let mut rel = Element::new("span")
                .with_attr("rel", "oo:proves")
                .with_attr("resource", about);
            rel.self_closing = true;
            children.push(Node::Element(rel));
        } else {
            warnings.push(AnnotationWarning::ProofWithoutStatement { command: opening });
        }
        children.extend(region);
        let mut w = wrapper(children);
        w.set_attr("typeof", "oo:Proof");
        out.push(Node::Element(w));
    }
    out
}

/// Runs the four passes in order. All problems are reported as warnings.
pub fn annotate(doc: HtmlDoc, mapping: &TypeMapping) -> Annotated {
    let doc = group_commands(doc);
    let (doc, mut warnings) = export_types(doc, mapping);
    let (doc, w) = identify_subjects(doc);
    warnings.extend(w);
    let (doc, w) = wrap_proofs(doc);
    warnings.extend(w);

    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    for e in doc.elements() {
        if let Some(about) = e.attr("about") {
            if !seen.insert(about.clone()) && reported.insert(about.clone()) {
                warnings.push(AnnotationWarning::DuplicateSubject { about });
            }
        }
    }
    Annotated { doc, warnings }
}
