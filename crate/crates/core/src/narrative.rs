//! Creole-subset narratives with `$...$` math and antiquotation nodes.
//!
//! Supported: `=` headings, `**bold**`, `//italic//`, `[[link]]` and
//! `[[target|label]]`, `*`/`#` lists, `----` rules, `{{{ }}}` nowiki
//! (block and inline). Tables and images are not recognized.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::antiquotation::{self, opener_at, Antiquotation, IssueKind, Opener, ParseIssue, Parsed, PrefixDecl, Span};
use crate::html::{encode_attr, escape_text};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inline {
    Text(String),
    Bold(Vec<Inline>),
    Italic(Vec<Inline>),
    Link { target: String, label: Option<String> },
    Math(String),
    /// Inline `{{{...}}}`.
    Nowiki(String),
    Antiquotation(Antiquotation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListItem {
    pub inlines: Vec<Inline>,
    /// Nested lists.
    pub children: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Block {
    Heading { level: u8, inlines: Vec<Inline> },
    Paragraph(Vec<Inline>),
    UnorderedList(Vec<ListItem>),
    OrderedList(Vec<ListItem>),
    Preformatted(String),
    HorizontalRule,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NarrativeDoc {
    pub blocks: Vec<Block>,
    pub prefix_decls: Vec<PrefixDecl>,
    pub issues: Vec<ParseIssue>,
}

impl NarrativeDoc {
    /// Every antiquotation node, in document order.
    pub fn antiquotations(&self) -> Vec<&Antiquotation> {
        let mut out = Vec::new();
        for b in &self.blocks {
            collect_block(b, &mut out);
        }
        out
    }
}

fn collect_block<'a>(block: &'a Block, out: &mut Vec<&'a Antiquotation>) {
    match block {
        Block::Heading { inlines, .. } | Block::Paragraph(inlines) => collect_inlines(inlines, out),
        Block::UnorderedList(items) | Block::OrderedList(items) => {
            for item in items {
                collect_inlines(&item.inlines, out);
                for c in &item.children {
                    collect_block(c, out);
                }
            }
        }
        Block::Preformatted(_) | Block::HorizontalRule => {}
    }
}

fn collect_inlines<'a>(inlines: &'a [Inline], out: &mut Vec<&'a Antiquotation>) {
    for i in inlines {
        match i {
            Inline::Antiquotation(a) => out.push(a),
            Inline::Bold(c) | Inline::Italic(c) => collect_inlines(c, out),
            _ => {}
        }
    }
}

struct Line<'a> {
    start: usize,
    text: &'a str,
}

fn split_lines(src: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut start = 0;
    for piece in src.split_inclusive('\n') {
        let text = piece.strip_suffix('\n').unwrap_or(piece);
        let text = text.strip_suffix('\r').unwrap_or(text);
        out.push(Line { start, text });
        start += piece.len();
    }
    out
}

fn list_marker(text: &str, in_list: bool) -> Option<(bool, usize, usize)> {
    let trimmed = text.trim_start();
    let indent = text.len() - trimmed.len();
    let first = trimmed.chars().next()?;
    if first != '*' && first != '#' {
        return None;
    }
    let depth = trimmed.chars().take_while(|&c| c == first).count();
    // Outside a list, a leading `**` is bold rather than a level-2 item.
    if first == '*' && depth >= 2 && !in_list {
        return None;
    }
    if first == '#' && !in_list && depth >= 2 {
        // `##` at paragraph start is ordinary text.
        return None;
    }
    Some((first == '#', depth, indent + depth))
}

fn is_rule(text: &str) -> bool {
    let t = text.trim();
    t.len() >= 4 && t.chars().all(|c| c == '-')
}

pub fn parse_narrative(src: &str) -> NarrativeDoc {
    let mut p = BlockParser {
        src,
        doc: NarrativeDoc::default(),
    };
    p.run();
    p.doc
}

struct BlockParser<'a> {
    src: &'a str,
    doc: NarrativeDoc,
}

struct RawItem {
    ordered: bool,
    depth: usize,
    inlines: Vec<Inline>,
}

impl<'a> BlockParser<'a> {
    fn run(&mut self) {
        let lines = split_lines(self.src);
        let mut i = 0;
        let mut para: Option<(usize, usize)> = None;
        let mut list: Vec<RawItem> = Vec::new();

        while i < lines.len() {
            let line = &lines[i];
            let trimmed = line.text.trim();
            if trimmed.is_empty() {
                self.flush_paragraph(&mut para);
                self.flush_list(&mut list);
                i += 1;
                continue;
            }
            let starts_block = trimmed.starts_with('=')
                || is_rule(trimmed)
                || trimmed == "{{{"
                || self.whole_line_nowiki(trimmed).is_some();
            let marker = list_marker(line.text, !list.is_empty());
            if starts_block || marker.is_some() {
                self.flush_paragraph(&mut para);
            }
            if starts_block {
                self.flush_list(&mut list);
            }

            if trimmed == "{{{" {
                self.flush_list(&mut list);
                let mut j = i + 1;
                let mut body = Vec::new();
                let mut closed = false;
                while j < lines.len() {
                    if lines[j].text.trim() == "}}}" {
                        closed = true;
                        break;
                    }
                    body.push(lines[j].text);
                    j += 1;
                }
                if !closed {
                    self.doc.issues.push(ParseIssue::new(
                        Span::new(line.start, self.src.len()),
                        IssueKind::Malformed,
                        "preformatted block has no closing '}}}'",
                    ));
                }
                self.doc.blocks.push(Block::Preformatted(body.join("\n")));
                i = j + 1;
                continue;
            }
            if let Some(inner) = self.whole_line_nowiki(trimmed) {
                self.flush_list(&mut list);
                self.doc.blocks.push(Block::Preformatted(inner.to_string()));
                i += 1;
                continue;
            }
            if is_rule(trimmed) {
                self.flush_list(&mut list);
                self.doc.blocks.push(Block::HorizontalRule);
                i += 1;
                continue;
            }
            if trimmed.starts_with('=') {
                self.flush_list(&mut list);
                let lead = line.text.len() - line.text.trim_start().len();
                let level = trimmed.chars().take_while(|&c| c == '=').count();
                let body_start = line.start + lead + level;
                let body = &self.src[body_start..line.start + line.text.len()];
                let body_trim_end = body.trim_end().trim_end_matches('=').trim_end();
                let lead_ws = body_trim_end.len() - body_trim_end.trim_start().len();
                let start = body_start + lead_ws;
                let end = body_start + body_trim_end.len();
                let inlines = self.inlines(start, end.max(start));
                self.doc.blocks.push(Block::Heading {
                    level: level.min(6) as u8,
                    inlines,
                });
                i += 1;
                continue;
            }
            if let Some((ordered, depth, marker_len)) = marker {
                let start = line.start + marker_len;
                let end = line.start + line.text.len();
                let inlines = self.inlines(start, end);
                list.push(RawItem {
                    ordered,
                    depth,
                    inlines: trim_inlines(inlines),
                });
                i += 1;
                continue;
            }
            if let Some(last) = list.last_mut() {
                // Continuation line of a list item.
                let more = self.inlines(line.start, line.start + line.text.len());
                last.inlines.push(Inline::Text(" ".into()));
                last.inlines.extend(more);
                last.inlines = trim_inlines(std::mem::take(&mut last.inlines));
                i += 1;
                continue;
            }
            para = Some(match para {
                Some((s, _)) => (s, line.start + line.text.len()),
                None => (line.start, line.start + line.text.len()),
            });
            i += 1;
        }
        self.flush_paragraph(&mut para);
        self.flush_list(&mut list);
    }

    fn whole_line_nowiki<'s>(&self, trimmed: &'s str) -> Option<&'s str> {
        let inner = trimmed.strip_prefix("{{{")?.strip_suffix("}}}")?;
        (!inner.contains("}}}")).then_some(inner)
    }

    fn flush_paragraph(&mut self, para: &mut Option<(usize, usize)>) {
        if let Some((start, end)) = para.take() {
            let inlines = trim_inlines(self.inlines(start, end));
            if !inlines.is_empty() {
                self.doc.blocks.push(Block::Paragraph(inlines));
            }
        }
    }

    fn flush_list(&mut self, list: &mut Vec<RawItem>) {
        if list.is_empty() {
            return;
        }
        let items = std::mem::take(list);
        let mut iter = items.into_iter().peekable();
        let blocks = build_lists(&mut iter, 1);
        self.doc.blocks.extend(blocks);
    }

    fn inlines(&mut self, start: usize, end: usize) -> Vec<Inline> {
        let mut ip = InlineParser {
            src: self.src,
            pos: start,
            end,
            decls: &mut self.doc.prefix_decls,
            issues: &mut self.doc.issues,
        };
        let (nodes, _) = ip.sequence(&[]);
        merge_text(nodes)
    }
}

fn build_lists(iter: &mut std::iter::Peekable<std::vec::IntoIter<RawItem>>, depth: usize) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut current: Option<(bool, Vec<ListItem>)> = None;
    while let Some(next) = iter.peek() {
        if next.depth < depth {
            break;
        }
        if next.depth > depth {
            let nested = build_lists(iter, depth + 1);
            match current.as_mut().and_then(|(_, items)| items.last_mut()) {
                Some(item) => item.children.extend(nested),
                None => {
                    // Deeper item with no parent: attach an empty parent.
                    let ordered = nested.first().is_some_and(|b| matches!(b, Block::OrderedList(_)));
                    current = Some((
                        ordered,
                        vec![ListItem {
                            inlines: Vec::new(),
                            children: nested,
                        }],
                    ));
                }
            }
            continue;
        }
        let item = iter.next().expect("peeked");
        match &mut current {
            Some((ordered, items)) if *ordered == item.ordered => items.push(ListItem {
                inlines: item.inlines,
                children: Vec::new(),
            }),
            _ => {
                if let Some(done) = current.take() {
                    blocks.push(list_block(done));
                }
                current = Some((
                    item.ordered,
                    vec![ListItem {
                        inlines: item.inlines,
                        children: Vec::new(),
                    }],
                ));
            }
        }
    }
    if let Some(done) = current {
        blocks.push(list_block(done));
    }
    blocks
}

fn list_block((ordered, items): (bool, Vec<ListItem>)) -> Block {
    if ordered {
        Block::OrderedList(items)
    } else {
        Block::UnorderedList(items)
    }
}

fn merge_text(nodes: Vec<Inline>) -> Vec<Inline> {
    let mut out: Vec<Inline> = Vec::with_capacity(nodes.len());
    for n in nodes {
        match (out.last_mut(), n) {
            (_, Inline::Text(t)) if t.is_empty() => {}
            (Some(Inline::Text(prev)), Inline::Text(t)) => prev.push_str(&t),
            (_, n) => out.push(n),
        }
    }
    out
}

/// Strips leading/trailing whitespace from the outer text nodes and drops
/// whitespace-only results.
fn trim_inlines(mut nodes: Vec<Inline>) -> Vec<Inline> {
    if let Some(Inline::Text(t)) = nodes.first_mut() {
        *t = t.trim_start().to_string();
    }
    if let Some(Inline::Text(t)) = nodes.last_mut() {
        *t = t.trim_end().to_string();
    }
    nodes.retain(|n| !matches!(n, Inline::Text(t) if t.is_empty()));
    nodes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Delim {
    Bold,
    Italic,
}

impl Delim {
    fn marker(self) -> &'static str {
        match self {
            Delim::Bold => "**",
            Delim::Italic => "//",
        }
    }
}

struct InlineParser<'a, 'd> {
    src: &'a str,
    pos: usize,
    end: usize,
    decls: &'d mut Vec<PrefixDecl>,
    issues: &'d mut Vec<ParseIssue>,
}

impl<'a> InlineParser<'a, '_> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..self.end]
    }

    fn issue(&mut self, start: usize, end: usize, kind: IssueKind, msg: &str) {
        self.issues.push(ParseIssue::new(Span::new(start, end), kind, msg));
    }

    /// Parses until end of input or until a delimiter in `open` is seen
    /// (consumed). Returns the nodes and the delimiter that stopped parsing.
    fn sequence(&mut self, open: &[Delim]) -> (Vec<Inline>, Option<Delim>) {
        let mut out = Vec::new();
        let mut text = String::new();
        macro_rules! flush {
            () => {
                if !text.is_empty() {
                    out.push(Inline::Text(std::mem::take(&mut text).replace('\r', "")));
                }
            };
        }
        while self.pos < self.end {
            let rest = self.rest();
            let c = rest.chars().next().expect("non-empty");

            if c == '\\' || c == '@' {
                match opener_at(&self.src[..self.end], self.pos) {
                    Opener::Escaped => {
                        text.push_str("@{");
                        self.pos += 3;
                        continue;
                    }
                    Opener::Complete { body_start, end } => {
                        let span = Span::new(self.pos, end);
                        let body = &self.src[body_start..end - 1];
                        self.pos = end;
                        match antiquotation::parse(body, span) {
                            Parsed::Antiquotation(a) => {
                                flush!();
                                out.push(Inline::Antiquotation(a));
                            }
                            Parsed::Prefix(d) => self.decls.push(d),
                            Parsed::Issue(i) => {
                                text.push_str(&self.src[span.start..span.end]);
                                self.issues.push(i);
                            }
                        }
                        continue;
                    }
                    Opener::Unterminated => {
                        self.issue(self.pos, self.end, IssueKind::Unterminated, "antiquotation has no closing '}'");
                        text.push_str("@{");
                        self.pos += 2;
                        continue;
                    }
                    Opener::None => {}
                }
            }

            if rest.starts_with("{{{") {
                let body_start = self.pos + 3;
                if let Some(i) = self.src[body_start..self.end].find("}}}") {
                    // `}}}}` closes at the last run of braces.
                    let mut close = body_start + i;
                    while self.src[close + 3..self.end].starts_with('}') {
                        close += 1;
                    }
                    flush!();
                    out.push(Inline::Nowiki(self.src[body_start..close].to_string()));
                    self.pos = close + 3;
                    continue;
                }
                self.issue(self.pos, self.end, IssueKind::Malformed, "inline nowiki has no closing '}}}'");
            }

            if c == '$' {
                let body_start = self.pos + 1;
                if let Some(i) = self.src[body_start..self.end].find('$') {
                    flush!();
                    out.push(Inline::Math(self.src[body_start..body_start + i].to_string()));
                    self.pos = body_start + i + 1;
                    continue;
                }
                self.issue(self.pos, self.pos + 1, IssueKind::Malformed, "unclosed math '$'");
                text.push('$');
                self.pos += 1;
                continue;
            }

            if rest.starts_with("[[") {
                if let Some(i) = rest.find("]]") {
                    let inner = &rest[2..i];
                    let (target, label) = match inner.split_once('|') {
                        Some((t, l)) => (t.trim().to_string(), Some(l.trim().to_string())),
                        None => (inner.trim().to_string(), None),
                    };
                    if !target.is_empty() {
                        flush!();
                        out.push(Inline::Link { target, label });
                        self.pos += i + 2;
                        continue;
                    }
                }
                self.issue(self.pos, self.pos + 2, IssueKind::Malformed, "malformed link");
                text.push_str("[[");
                self.pos += 2;
                continue;
            }

            let delim = if rest.starts_with("**") {
                Some(Delim::Bold)
            } else if rest.starts_with("//") && !text.ends_with(':') {
                Some(Delim::Italic)
            } else {
                None
            };
            if let Some(d) = delim {
                let start = self.pos;
                self.pos += 2;
                if open.contains(&d) {
                    flush!();
                    return (out, Some(d));
                }
                flush!();
                let mut nested_open = open.to_vec();
                nested_open.push(d);
                let (children, closed_by) = self.sequence(&nested_open);
                if closed_by == Some(d) {
                    out.push(match d {
                        Delim::Bold => Inline::Bold(merge_text(children)),
                        Delim::Italic => Inline::Italic(merge_text(children)),
                    });
                    continue;
                }
                // Unclosed: the marker degrades to text.
                self.issue(start, start + 2, IssueKind::Malformed, &format!("unclosed '{}'", d.marker()));
                out.push(Inline::Text(d.marker().to_string()));
                out.extend(children);
                if let Some(outer) = closed_by {
                    return (out, Some(outer));
                }
                continue;
            }

            text.push(c);
            self.pos += c.len_utf8();
        }
        flush!();
        (out, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Inline,
    Placeholder,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("no inclusion provided for antiquotation at {0}")]
    MissingInclusion(Span),
}

/// Renders a page body. In inline mode `inclusions` must map the span of
/// every antiquotation node to its HTML.
pub fn render_narrative(
    doc: &NarrativeDoc,
    inclusions: &BTreeMap<Span, String>,
    mode: RenderMode,
) -> Result<String, RenderError> {
    let r = Renderer { inclusions, mode };
    let mut out = String::new();
    for b in &doc.blocks {
        r.block(b, &mut out)?;
    }
    Ok(out)
}

struct Renderer<'a> {
    inclusions: &'a BTreeMap<Span, String>,
    mode: RenderMode,
}

impl Renderer<'_> {
    fn block(&self, b: &Block, out: &mut String) -> Result<(), RenderError> {
        match b {
            Block::Heading { level, inlines } => {
                let _ = write!(out, "<h{level}>");
                self.inlines(inlines, out)?;
                let _ = writeln!(out, "</h{level}>");
            }
            Block::Paragraph(inlines) => {
                // A `p` cannot hold the `div` wrappers of inclusions.
                let mut found = Vec::new();
                collect_inlines(inlines, &mut found);
                let (open, close) = if found.is_empty() {
                    ("<p>", "</p>\n")
                } else {
                    ("<div class=\"agora-paragraph\">", "</div>\n")
                };
                out.push_str(open);
                self.inlines(inlines, out)?;
                out.push_str(close);
            }
            Block::UnorderedList(items) => self.list("ul", items, out)?,
            Block::OrderedList(items) => self.list("ol", items, out)?,
            Block::Preformatted(raw) => {
                let _ = writeln!(out, "<pre>{}</pre>", escape_text(raw));
            }
            Block::HorizontalRule => out.push_str("<hr/>\n"),
        }
        Ok(())
    }

    fn list(&self, tag: &str, items: &[ListItem], out: &mut String) -> Result<(), RenderError> {
        let _ = writeln!(out, "<{tag}>");
        for item in items {
            out.push_str("<li>");
            self.inlines(&item.inlines, out)?;
            if !item.children.is_empty() {
                out.push('\n');
                for c in &item.children {
                    self.block(c, out)?;
                }
            }
            out.push_str("</li>\n");
        }
        let _ = writeln!(out, "</{tag}>");
        Ok(())
    }

    fn inlines(&self, inlines: &[Inline], out: &mut String) -> Result<(), RenderError> {
        for i in inlines {
            match i {
                Inline::Text(t) => out.push_str(&escape_text(t)),
                Inline::Bold(c) => {
                    out.push_str("<strong>");
                    self.inlines(c, out)?;
                    out.push_str("</strong>");
                }
                Inline::Italic(c) => {
                    out.push_str("<em>");
                    self.inlines(c, out)?;
                    out.push_str("</em>");
                }
                Inline::Link { target, label } => {
                    let _ = write!(
                        out,
                        "<a href=\"{}\">{}</a>",
                        encode_attr(&link_href(target)),
                        escape_text(label.as_deref().unwrap_or(target))
                    );
                }
                Inline::Math(src) => {
                    let _ = write!(out, "<span class=\"math\">{}</span>", escape_text(src));
                }
                Inline::Nowiki(src) => {
                    let _ = write!(out, "<code>{}</code>", escape_text(src));
                }
                Inline::Antiquotation(a) => self.antiquotation(a, out)?,
            }
        }
        Ok(())
    }

    fn antiquotation(&self, a: &Antiquotation, out: &mut String) -> Result<(), RenderError> {
        let reference = encode_attr(&a.target.to_string());
        match self.mode {
            RenderMode::Placeholder => {
                let _ = write!(
                    out,
                    "<div class=\"agora-placeholder\" data-type=\"{}\" data-ref=\"{}\" data-options=\"{}\"></div>",
                    encode_attr(&a.ty.to_string()),
                    reference,
                    encode_attr(&a.options.join(","))
                );
            }
            RenderMode::Inline => {
                let html = self
                    .inclusions
                    .get(&a.span)
                    .ok_or(RenderError::MissingInclusion(a.span))?;
                let _ = write!(out, "<div class=\"agora-include\" data-ref=\"{reference}\">{html}</div>");
            }
        }
        Ok(())
    }
}

/// Wiki page links without a scheme or extension point at the rendered page.
fn link_href(target: &str) -> String {
    let is_external = target.contains("://") || target.starts_with("mailto:");
    let (path, frag) = match target.split_once('#') {
        Some((p, f)) => (p, Some(f)),
        None => (target, None),
    };
    let last_segment = path.rsplit('/').next().unwrap_or(path);
    if is_external || path.is_empty() || last_segment.contains('.') {
        return target.to_string();
    }
    match frag {
        Some(f) => format!("{path}.html#{f}"),
        None => format!("{path}.html"),
    }
}
