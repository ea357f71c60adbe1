//! A small, lenient HTML/XHTML tree.
//!
//! Proof-assistant exports mix HTML and XHTML conventions (self-closing
//! `<span/>`, unknown attributes on inline elements, unclosed tags). The
//! parser here keeps text nodes and attribute values exactly as written in
//! the source and never normalizes entities, so serializing a parsed tree
//! reproduces every text byte of the input.

use std::fmt::Write as _;

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style"];

const BLOCK_ELEMENTS: &[&str] = &[
    "address", "article", "aside", "blockquote", "dd", "details", "dialog", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "header", "hr", "li", "main", "nav", "ol", "p", "pre", "section", "table", "ul",
];

pub fn is_void(name: &str) -> bool {
    VOID_ELEMENTS.contains(&name)
}

pub fn is_block(name: &str) -> bool {
    BLOCK_ELEMENTS.contains(&name)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attr {
    pub name: String,
    /// Raw value as written in the source (entities undecoded); `None` for
    /// a bare boolean attribute.
    pub value: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<Attr>,
    pub children: Vec<Node>,
    /// Written as `<name .../>` in the source.
    pub self_closing: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Element(Element),
    Text(String),
    Comment(String),
    /// `<!DOCTYPE ...>` and other markup declarations, stored without the
    /// surrounding `<!` and `>`.
    Declaration(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HtmlDoc {
    pub nodes: Vec<Node>,
}

impl Element {
    pub fn new(name: &str) -> Self {
        Element {
            name: name.to_ascii_lowercase(),
            attrs: Vec::new(),
            children: Vec::new(),
            self_closing: false,
        }
    }

    pub fn with_attr(mut self, name: &str, value: &str) -> Self {
        self.set_attr(name, value);
        self
    }

    /// Raw (entity-encoded) attribute value.
    pub fn attr_raw(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|a| a.name.eq_ignore_ascii_case(name))
            .map(|a| a.value.as_deref().unwrap_or(""))
    }

    /// Attribute value with character references decoded.
    pub fn attr(&self, name: &str) -> Option<String> {
        self.attr_raw(name).map(decode_entities)
    }

    pub fn has_attr(&self, name: &str) -> bool {
        self.attr_raw(name).is_some()
    }

    /// Sets an attribute from a decoded value, encoding it for output.
    pub fn set_attr(&mut self, name: &str, value: &str) {
        let encoded = encode_attr(value);
        match self
            .attrs
            .iter_mut()
            .find(|a| a.name.eq_ignore_ascii_case(name))
        {
            Some(a) => a.value = Some(encoded),
            None => self.attrs.push(Attr {
                name: name.to_ascii_lowercase(),
                value: Some(encoded),
            }),
        }
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.attr("class")
            .is_some_and(|c| c.split_ascii_whitespace().any(|t| t == class))
    }

    pub fn text_content(&self) -> String {
        let mut out = String::new();
        collect_text(&self.children, &mut out);
        out
    }

    /// True when any descendant is a block-level element.
    pub fn contains_block(&self) -> bool {
        nodes_contain_block(&self.children)
    }

    /// Depth-first search over descendants (excluding `self`).
    pub fn find_descendant<'a>(&'a self, pred: &impl Fn(&Element) -> bool) -> Option<&'a Element> {
        find_in(&self.children, pred)
    }

    pub fn to_html(&self) -> String {
        let mut out = String::new();
        write_element(self, &mut out);
        out
    }
}

pub fn nodes_contain_block(nodes: &[Node]) -> bool {
    nodes.iter().any(|n| match n {
        Node::Element(e) => is_block(&e.name) || e.contains_block(),
        _ => false,
    })
}

fn find_in<'a>(nodes: &'a [Node], pred: &impl Fn(&Element) -> bool) -> Option<&'a Element> {
    for node in nodes {
        if let Node::Element(e) = node {
            if pred(e) {
                return Some(e);
            }
            if let Some(found) = find_in(&e.children, pred) {
                return Some(found);
            }
        }
    }
    None
}

pub fn collect_text(nodes: &[Node], out: &mut String) {
    for node in nodes {
        match node {
            Node::Text(t) => out.push_str(t),
            Node::Element(e) => collect_text(&e.children, out),
            Node::Comment(_) | Node::Declaration(_) => {}
        }
    }
}

impl HtmlDoc {
    pub fn parse(source: &str) -> Self {
        HtmlDoc {
            nodes: parse_nodes(source),
        }
    }

    pub fn to_html(&self) -> String {
        serialize_nodes(&self.nodes)
    }

    /// Concatenation of every text node in document order.
    pub fn text_content(&self) -> String {
        let mut out = String::new();
        collect_text(&self.nodes, &mut out);
        out
    }

    /// Pre-order walk over every element.
    pub fn elements(&self) -> Vec<&Element> {
        let mut out = Vec::new();
        fn walk<'a>(nodes: &'a [Node], out: &mut Vec<&'a Element>) {
            for n in nodes {
                if let Node::Element(e) = n {
                    out.push(e);
                    walk(&e.children, out);
                }
            }
        }
        walk(&self.nodes, &mut out);
        out
    }

    /// The `href` of the first `<base>` element, if any.
    pub fn base_href(&self) -> Option<String> {
        self.elements()
            .into_iter()
            .find(|e| e.name == "base" && e.has_attr("href"))
            .and_then(|e| e.attr("href"))
    }
}

pub fn serialize_nodes(nodes: &[Node]) -> String {
    let mut out = String::new();
    for n in nodes {
        write_node(n, &mut out);
    }
    out
}

fn write_node(node: &Node, out: &mut String) {
    match node {
        Node::Element(e) => write_element(e, out),
        Node::Text(t) => out.push_str(t),
        Node::Comment(c) => {
            let _ = write!(out, "<!--{c}-->");
        }
        Node::Declaration(d) => {
            let _ = write!(out, "<!{d}>");
        }
    }
}

fn write_element(e: &Element, out: &mut String) {
    out.push('<');
    out.push_str(&e.name);
    for a in &e.attrs {
        out.push(' ');
        out.push_str(&a.name);
        if let Some(v) = &a.value {
            let quote = if v.contains('"') { '\'' } else { '"' };
            out.push('=');
            out.push(quote);
            out.push_str(v);
            out.push(quote);
        }
    }
    if e.self_closing && e.children.is_empty() {
        out.push_str("/>");
        return;
    }
    out.push('>');
    if is_void(&e.name) && e.children.is_empty() {
        return;
    }
    for c in &e.children {
        write_node(c, out);
    }
    out.push_str("</");
    out.push_str(&e.name);
    out.push('>');
}

/// Escapes text for use in HTML content.
pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

/// Escapes a value for a double-quoted attribute.
pub fn encode_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Decodes the named references HTML exports commonly emit, plus numeric
/// references. Unknown references are left as written.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let end = rest[1..]
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '#'))
            .map(|i| i + 1);
        let decoded = match end {
            Some(end) if rest[end..].starts_with(';') => {
                decode_reference(&rest[1..end]).map(|c| (c, end + 1))
            }
            _ => None,
        };
        match decoded {
            Some((c, len)) => {
                out.push(c);
                rest = &rest[len..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_reference(name: &str) -> Option<char> {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        return char::from_u32(code);
    }
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        _ => return None,
    })
}

enum Token {
    Start {
        name: String,
        attrs: Vec<Attr>,
        self_closing: bool,
    },
    End(String),
    Text(String),
    Comment(String),
    Declaration(String),
}

struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
    raw_until: Option<String>,
}

impl<'a> Tokenizer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn next_token(&mut self) -> Option<Token> {
        if self.pos >= self.src.len() {
            return None;
        }
        if let Some(name) = self.raw_until.take() {
            let rest = self.rest();
            let close = format!("</{name}");
            let end = find_ascii_ci(rest, &close).unwrap_or(rest.len());
            if end > 0 {
                self.pos += end;
                return Some(Token::Text(rest[..end].to_string()));
            }
        }
        let rest = self.rest();
        if let Some(inner) = rest.strip_prefix("<!--") {
            let (body, len) = match inner.find("-->") {
                Some(e) => (&inner[..e], e + 7),
                None => (inner, rest.len()),
            };
            self.pos += len;
            return Some(Token::Comment(body.to_string()));
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            let end = rest.find('>').unwrap_or(rest.len());
            let body = rest[2.min(end)..end].to_string();
            self.pos += (end + 1).min(rest.len());
            return Some(if rest.starts_with("<?") {
                Token::Comment(format!("?{body}"))
            } else {
                Token::Declaration(body)
            });
        }
        if let Some(after) = rest.strip_prefix("</") {
            if after.starts_with(|c: char| c.is_ascii_alphabetic()) {
                let end = after.find('>').unwrap_or(after.len());
                let name = after[..end]
                    .trim()
                    .split_ascii_whitespace()
                    .next()
                    .unwrap_or("")
                    .to_ascii_lowercase();
                self.pos += (2 + end + 1).min(rest.len());
                return Some(Token::End(name));
            }
        }
        if rest.starts_with('<') && rest[1..].starts_with(|c: char| c.is_ascii_alphabetic()) {
            if let Some(tok) = self.start_tag() {
                return Some(tok);
            }
        }
        // Text runs to the next '<' that can open markup.
        let mut end = 1;
        while end < rest.len() {
            if rest[end..].starts_with('<') {
                let after = &rest[end + 1..];
                if after.starts_with(|c: char| c.is_ascii_alphabetic() || c == '/' || c == '!' || c == '?') {
                    break;
                }
            }
            end += rest[end..].chars().next().map_or(1, char::len_utf8);
        }
        self.pos += end;
        Some(Token::Text(rest[..end].to_string()))
    }

    fn start_tag(&mut self) -> Option<Token> {
        let rest = self.rest();
        let bytes = rest.as_bytes();
        let mut i = 1;
        while i < bytes.len() && !matches!(bytes[i], b' ' | b'\t' | b'\n' | b'\r' | b'\x0c' | b'/' | b'>') {
            i += 1;
        }
        let name = rest[1..i].to_ascii_lowercase();
        let mut attrs = Vec::new();
        let mut self_closing = false;
        loop {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i >= bytes.len() {
                // Unterminated tag: treat the rest as text.
                return None;
            }
            match bytes[i] {
                b'>' => {
                    i += 1;
                    break;
                }
                b'/' => {
                    if bytes.get(i + 1) == Some(&b'>') {
                        self_closing = true;
                        i += 2;
                        break;
                    }
                    i += 1;
                    continue;
                }
                _ => {}
            }
            let start = i;
            while i < bytes.len() && !matches!(bytes[i], b' ' | b'\t' | b'\n' | b'\r' | b'\x0c' | b'/' | b'>' | b'=') {
                i += 1;
            }
            let attr_name = rest[start..i].to_ascii_lowercase();
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            let mut value = None;
            if j < bytes.len() && bytes[j] == b'=' {
                j += 1;
                while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'"' || bytes[j] == b'\'') {
                    let q = bytes[j];
                    let vstart = j + 1;
                    let vend = rest[vstart..].find(q as char).map(|k| vstart + k)?;
                    value = Some(rest[vstart..vend].to_string());
                    i = vend + 1;
                } else {
                    let vstart = j;
                    while j < bytes.len() && !bytes[j].is_ascii_whitespace() && bytes[j] != b'>' {
                        j += 1;
                    }
                    value = Some(rest[vstart..j].to_string());
                    i = j;
                }
            }
            if !attr_name.is_empty() && !attrs.iter().any(|a: &Attr| a.name == attr_name) {
                attrs.push(Attr {
                    name: attr_name,
                    value,
                });
            }
        }
        self.pos += i;
        if !self_closing && RAW_TEXT_ELEMENTS.contains(&name.as_str()) {
            self.raw_until = Some(name.clone());
        }
        Some(Token::Start {
            name,
            attrs,
            self_closing,
        })
    }
}

fn find_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Parses a document or fragment into a node list. Never fails: stray end
/// tags are dropped, unclosed elements are closed at end of input, and an
/// end tag closes every element opened after its matching start tag.
pub fn parse_nodes(source: &str) -> Vec<Node> {
    let mut tok = Tokenizer {
        src: source,
        pos: 0,
        raw_until: None,
    };
    let mut root: Vec<Node> = Vec::new();
    let mut stack: Vec<Element> = Vec::new();

    fn push(stack: &mut [Element], root: &mut Vec<Node>, node: Node) {
        match stack.last_mut() {
            Some(parent) => parent.children.push(node),
            None => root.push(node),
        }
    }

    while let Some(t) = tok.next_token() {
        match t {
            Token::Text(s) => {
                // Adjacent text tokens (e.g. a lone '<') are merged so that
                // re-parsing a serialization yields the same tree.
                let parent_children = match stack.last_mut() {
                    Some(p) => &mut p.children,
                    None => &mut root,
                };
                if let Some(Node::Text(prev)) = parent_children.last_mut() {
                    prev.push_str(&s);
                } else {
                    parent_children.push(Node::Text(s));
                }
            }
            Token::Comment(c) => push(&mut stack, &mut root, Node::Comment(c)),
            Token::Declaration(d) => push(&mut stack, &mut root, Node::Declaration(d)),
            Token::Start {
                name,
                attrs,
                self_closing,
            } => {
                let el = Element {
                    name,
                    attrs,
                    children: Vec::new(),
                    self_closing,
                };
                if self_closing || is_void(&el.name) {
                    push(&mut stack, &mut root, Node::Element(el));
                } else {
                    stack.push(el);
                }
            }
            Token::End(name) => {
                if let Some(idx) = stack.iter().rposition(|e| e.name == name) {
                    while stack.len() > idx {
                        let el = stack.pop().expect("non-empty stack");
                        push(&mut stack, &mut root, Node::Element(el));
                    }
                }
            }
        }
    }
    while let Some(el) = stack.pop() {
        push(&mut stack, &mut root, Node::Element(el));
    }
    root
}
