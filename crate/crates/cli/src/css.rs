//! Scoping of copied stylesheets under the inclusion wrapper class.

pub const SCOPE: &str = ".agora-include";

/// Prefixes every selector of `css` with `.agora-include `. Rules nested in
/// `@media` and `@supports` are scoped too; other at-rules and comments
/// are kept as they are.
pub fn scope_css(css: &str) -> String {
    let mut out = String::with_capacity(css.len() + css.len() / 4);
    scope_block(css, &mut out);
    out
}

fn scope_block(css: &str, out: &mut String) {
    let mut rest = css;
    while !rest.is_empty() {
        let ws = rest.len() - rest.trim_start().len();
        out.push_str(&rest[..ws]);
        rest = &rest[ws..];
        if rest.is_empty() {
            break;
        }
        if rest.starts_with("/*") {
            let end = rest[2..].find("*/").map_or(rest.len(), |i| i + 4);
            out.push_str(&rest[..end]);
            rest = &rest[end..];
            continue;
        }
        let Some(open) = find_outside_strings(rest, |c| c == '{' || c == ';') else {
            out.push_str(rest);
            break;
        };
        let prelude = &rest[..open];
        if rest.as_bytes()[open] == b';' {
            out.push_str(&rest[..=open]);
            rest = &rest[open + 1..];
            continue;
        }
        let close = matching_brace(rest, open);
        let body = &rest[open + 1..close.min(rest.len())];
        let tail = if close < rest.len() { "}" } else { "" };
        let at = prelude.trim_start().to_ascii_lowercase();
        if at.starts_with("@media") || at.starts_with("@supports") || at.starts_with("@layer") {
            out.push_str(prelude);
            out.push('{');
            scope_block(body, out);
            out.push_str(tail);
        } else if at.starts_with('@') {
            out.push_str(&rest[..open + 1]);
            out.push_str(body);
            out.push_str(tail);
        } else {
            out.push_str(&scope_selectors(prelude));
            out.push('{');
            out.push_str(body);
            out.push_str(tail);
        }
        rest = &rest[(close + 1).min(rest.len())..];
    }
}

fn scope_selectors(prelude: &str) -> String {
    let trailing = &prelude[prelude.trim_end().len()..];
    let list: Vec<String> = prelude
        .trim_end()
        .split(',')
        .map(|sel| {
            let sel = sel.trim();
            if sel.starts_with(SCOPE) {
                sel.to_string()
            } else {
                format!("{SCOPE} {sel}")
            }
        })
        .collect();
    format!("{}{trailing}", list.join(", "))
}

fn find_outside_strings(s: &str, pred: impl Fn(char) -> bool) -> Option<usize> {
    let mut quote = None;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        match quote {
            Some(q) => {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None if c == '"' || c == '\'' => quote = Some(c),
            None if pred(c) => return Some(i),
            None => {}
        }
    }
    None
}

/// Index of the `}` matching the `{` at `open` (or `s.len()` if unbalanced).
fn matching_brace(s: &str, open: usize) -> usize {
    let mut depth = 0usize;
    let mut pos = open;
    loop {
        match find_outside_strings(&s[pos..], |c| c == '{' || c == '}') {
            None => return s.len(),
            Some(i) => {
                let at = pos + i;
                if s.as_bytes()[at] == b'{' {
                    depth += 1;
                } else {
                    depth -= 1;
                    if depth == 0 {
                        return at;
                    }
                }
                pos = at + 1;
            }
        }
    }
}
