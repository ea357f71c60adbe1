#![allow(dead_code)]

use agora_core::annotator::{annotate, TypeMapping};
use agora_core::antiquotation::{parse_all, scan, Parsed};
use agora_core::harvester::{harvest, Predicate};
use agora_core::html::escape_text;
use agora_core::resolver::{resolve, rewrite_links, Corpus};
use agora_core::vocabulary::subsumes;
use agora_core::{HtmlDoc, Iri, OmdocType, PrefixEnv, RelationType, ResolutionResult};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

/// Runs `test` on `cases` generated values.
fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

// Antiquotations.

#[derive(Debug, Clone)]
struct AqModel {
    ty: String,
    location: String,
    fragment: Option<String>,
    options: Vec<String>,
}

impl AqModel {
    fn reference(&self) -> String {
        match &self.fragment {
            Some(f) => format!("{}#{f}", self.location),
            None => self.location.clone(),
        }
    }

    fn source(&self, separator: &str) -> String {
        let mut s = format!("@{{{} {}", self.ty, self.reference());
        if !self.options.is_empty() {
            s.push_str(&format!(" [{}]", self.options.join(separator)));
        }
        s.push('}');
        s
    }
}

fn ident() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_]{0,8}"
}

fn aq_model() -> impl Strategy<Value = AqModel> {
    let ty = (prop_oneof!["oo", "owl", "rdfs", "mml", "ex2"], ident()).prop_map(|(p, l)| format!("{p}:{l}"));
    let location = prop_oneof![
        ident(),
        (ident(), ident()).prop_map(|(a, b)| format!("{a}/{b}")),
        "[a-z0-9_]{1,8}".prop_map(|l| format!("mml:{l}.html")),
        ("[a-z]{1,8}", "[a-z0-9]{0,6}").prop_map(|(h, p)| format!("http://{h}.example/{p}")),
    ];
    let fragment = prop::option::of(ident());
    let options = prop::collection::vec(
        ("[a-z]{1,8}", prop::option::of("[a-z0-9]{1,4}"))
            .prop_map(|(k, v)| v.map_or(k.clone(), |v| format!("{k}={v}"))),
        0..4,
    );
    (ty, location, fragment, options).prop_map(|(ty, location, fragment, options)| AqModel {
        ty,
        location,
        fragment,
        options,
    })
}

pub fn antiquotation_round_trip(cases: u32) -> Result<(), String> {
    check(cases, (aq_model(), any::<bool>()), |(m, comma)| {
        let src = m.source(if comma { "," } else { " " });
        let (parsed, issues) = parse_all(&src);
        prop_assert!(issues.is_empty(), "{:?}", issues);
        prop_assert_eq!(parsed.len(), 1);
        let Parsed::Antiquotation(a) = &parsed[0] else {
            return Err(TestCaseError::fail(format!("not an antiquotation: {:?}", parsed[0])));
        };
        prop_assert_eq!(a.ty.to_string(), m.ty.clone());
        prop_assert_eq!(a.target.to_string(), m.reference());
        prop_assert_eq!(&a.options, &m.options);
        prop_assert_eq!((a.span.start, a.span.end), (0, src.len()));

        let printed = a.to_string();
        let (again, _) = parse_all(&printed);
        let Parsed::Antiquotation(b) = &again[0] else {
            return Err(TestCaseError::fail("reparse failed"));
        };
        prop_assert!(a.same_content(b));
        prop_assert_eq!(b.to_string(), printed);
        Ok(())
    })
}

pub fn scan_spans_increase(cases: u32) -> Result<(), String> {
    let pieces = prop::collection::vec(
        prop_oneof![
            "[a-z {}\\\\.]{0,12}".prop_map(|s| s),
            aq_model().prop_map(|m| m.source(",")),
            Just("\\@{".to_string()),
        ],
        0..8,
    );
    check(cases, pieces, |pieces| {
        let text: String = pieces.concat();
        let result = scan(&text);
        let mut last_end = 0;
        for occ in &result.occurrences {
            prop_assert!(occ.span.start >= last_end);
            prop_assert!(occ.span.start < occ.span.end && occ.span.end <= text.len());
            let slice = &text[occ.span.start..occ.span.end];
            prop_assert!(slice.starts_with("@{") && slice.ends_with('}'), "{:?}", slice);
            last_end = occ.span.end;
        }
        Ok(())
    })
}

// Coqdoc-style documents.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Lemma,
    Theorem,
    Definition,
    Example,
    Require,
}

impl Kind {
    fn keyword(self) -> &'static str {
        match self {
            Kind::Lemma => "Lemma",
            Kind::Theorem => "Theorem",
            Kind::Definition => "Definition",
            Kind::Example => "Example",
            Kind::Require => "Require",
        }
    }

    fn token(self) -> Option<&'static str> {
        match self {
            Kind::Lemma => Some("lemma"),
            Kind::Theorem => Some("thm"),
            Kind::Definition => Some("definition"),
            Kind::Example => Some("example"),
            Kind::Require => None,
        }
    }

    fn is_assertion(self) -> bool {
        matches!(self, Kind::Lemma | Kind::Theorem)
    }
}

#[derive(Debug, Clone)]
struct Command {
    kind: Kind,
    body: Vec<String>,
    proof: Option<(usize, &'static str)>,
}

fn body_token() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,5}".prop_map(|v| format!("<span class=\"id\" type=\"var\">{v}</span>")),
        Just(" -&gt; ".to_string()),
        Just(", ".to_string()),
        Just(" = ".to_string()),
        Just(" x.y ".to_string()),
        Just(" [1..n] ".to_string()),
        Just("&nbsp;".to_string()),
        Just("<br/>\n".to_string()),
        "[0-9]{1,3}".prop_map(|n| format!(" {n} ")),
    ]
}

fn command() -> impl Strategy<Value = Command> {
    let kind = prop_oneof![
        Just(Kind::Lemma),
        Just(Kind::Theorem),
        Just(Kind::Definition),
        Just(Kind::Example),
        Just(Kind::Require)
    ];
    let end = prop_oneof![Just("Qed"), Just("Defined"), Just("Admitted"), Just("Abort")];
    (
        kind,
        prop::collection::vec(body_token(), 0..5),
        prop::option::of((0usize..3, end)),
    )
        .prop_map(|(kind, body, proof)| Command {
            proof: if kind == Kind::Require { None } else { proof },
            kind,
            body,
        })
}

fn render_commands(cmds: &[Command]) -> String {
    let mut html = String::from("<div class=\"code\">\n");
    for (i, c) in cmds.iter().enumerate() {
        html.push_str(&format!("<span class=\"id\" type=\"keyword\">{}</span> ", c.kind.keyword()));
        match c.kind.token() {
            Some(token) => html.push_str(&format!(
                "<a name=\"n{i}\"><span class=\"id\" type=\"{token}\">n{i}</span></a> : "
            )),
            None => html.push_str(&format!(
                "<a class=\"idref\" href=\"Lib{i}.html#\"><span class=\"id\" type=\"library\">Lib{i}</span></a>"
            )),
        }
        html.push_str(&c.body.concat());
        html.push_str(".<br/>\n");
        if let Some((tactics, end)) = c.proof {
            html.push_str("<span class=\"id\" type=\"keyword\">Proof</span>.<br/>\n");
            for _ in 0..tactics {
                html.push_str("&nbsp;&nbsp;<span class=\"id\" type=\"tactic\">auto</span>.<br/>\n");
            }
            html.push_str(&format!("<span class=\"id\" type=\"keyword\">{end}</span>.<br/>\n"));
        }
    }
    html.push_str("</div>\n");
    html
}

fn commands() -> impl Strategy<Value = Vec<Command>> {
    prop::collection::vec(command(), 0..7)
}

pub fn annotation_preserves_text(cases: u32) -> Result<(), String> {
    check(cases, commands(), |cmds| {
        let doc = HtmlDoc::parse(&render_commands(&cmds));
        let annotated = annotate(doc.clone(), &TypeMapping::default());
        prop_assert_eq!(annotated.doc.text_content(), doc.text_content());
        Ok(())
    })
}

pub fn annotation_is_idempotent(cases: u32) -> Result<(), String> {
    check(cases, commands(), |cmds| {
        let once = annotate(HtmlDoc::parse(&render_commands(&cmds)), &TypeMapping::default()).doc;
        let twice = annotate(once.clone(), &TypeMapping::default()).doc;
        prop_assert_eq!(twice.to_html(), once.to_html());
        Ok(())
    })
}

pub fn harvest_counts_typed_groups(cases: u32) -> Result<(), String> {
    check(cases, commands(), |cmds| {
        let annotated = annotate(HtmlDoc::parse(&render_commands(&cmds)), &TypeMapping::default());
        let base = Iri::new("http://coq.example/P.html").unwrap();
        let frags = harvest(&annotated.doc, &base);

        // Counted from the generator's model, not from the annotator.
        let statements = cmds.iter().filter(|c| c.kind.token().is_some()).count();
        let proofs = cmds.iter().filter(|c| c.proof.is_some()).count();
        let linked: Vec<String> = cmds
            .iter()
            .enumerate()
            .filter(|(_, c)| c.proof.is_some() && c.kind.is_assertion())
            .map(|(i, _)| format!("http://coq.example/P.html#n{i}"))
            .collect();

        let typed_wrappers = annotated.doc.elements().iter().filter(|e| e.has_attr("typeof")).count();
        prop_assert_eq!(frags.len(), typed_wrappers);
        prop_assert_eq!(frags.len(), statements + proofs);
        let proves: Vec<String> = frags
            .iter()
            .flat_map(|f| f.relations.iter())
            .filter(|(p, _)| *p == Predicate::Known(RelationType::Proves))
            .map(|(_, o)| o.to_string())
            .collect();
        prop_assert_eq!(proves, linked);
        Ok(())
    })
}

// Link rewriting.

/// Reference resolution examples published in RFC 3986 (normal and
/// abnormal), against base `http://a/b/c/d;p?q`.
pub const RFC3986_VECTORS: &[(&str, &str)] = &[
    ("g:h", "g:h"),
    ("g", "http://a/b/c/g"),
    ("./g", "http://a/b/c/g"),
    ("g/", "http://a/b/c/g/"),
    ("/g", "http://a/g"),
    ("//g", "http://g"),
    ("?y", "http://a/b/c/d;p?y"),
    ("g?y", "http://a/b/c/g?y"),
    ("#s", "http://a/b/c/d;p?q#s"),
    ("g#s", "http://a/b/c/g#s"),
    ("g?y#s", "http://a/b/c/g?y#s"),
    (";x", "http://a/b/c/;x"),
    ("g;x", "http://a/b/c/g;x"),
    ("g;x?y#s", "http://a/b/c/g;x?y#s"),
    ("", "http://a/b/c/d;p?q"),
    (".", "http://a/b/c/"),
    ("./", "http://a/b/c/"),
    ("..", "http://a/b/"),
    ("../", "http://a/b/"),
    ("../g", "http://a/b/g"),
    ("../..", "http://a/"),
    ("../../", "http://a/"),
    ("../../g", "http://a/g"),
    ("../../../g", "http://a/g"),
    ("../../../../g", "http://a/g"),
    ("/./g", "http://a/g"),
    ("/../g", "http://a/g"),
    ("g.", "http://a/b/c/g."),
    (".g", "http://a/b/c/.g"),
    ("g..", "http://a/b/c/g.."),
    ("..g", "http://a/b/c/..g"),
    ("./../g", "http://a/b/g"),
    ("./g/.", "http://a/b/c/g/"),
    ("g/./h", "http://a/b/c/g/h"),
    ("g/../h", "http://a/b/c/h"),
    ("g;x=1/./y", "http://a/b/c/g;x=1/y"),
    ("g;x=1/../y", "http://a/b/c/y"),
    ("g?y/./x", "http://a/b/c/g?y/./x"),
    ("g?y/../x", "http://a/b/c/g?y/../x"),
    ("g#s/./x", "http://a/b/c/g#s/./x"),
    ("g#s/../x", "http://a/b/c/g#s/../x"),
    ("http:g", "http:g"),
];

pub fn rewrite_links_follows_rfc3986() -> Result<(), String> {
    let base = Iri::new("http://a/b/c/d;p?q").unwrap();
    for (reference, expected) in RFC3986_VECTORS {
        let html = format!("<a href=\"{reference}\">x</a><img src=\"{reference}\"/>");
        let want = format!("<a href=\"{expected}\">x</a><img src=\"{expected}\"/>");
        let got = rewrite_links(&html, &base);
        if got != want {
            return Err(format!("reference {reference:?}: got {got}, want {want}"));
        }
    }
    Ok(())
}

fn relative_ref() -> impl Strategy<Value = String> {
    let segment = prop_oneof!["[a-z]{1,4}", Just(".".to_string()), Just("..".to_string()), Just("g;x=1".to_string())];
    (
        prop::option::of(Just("/")),
        prop::collection::vec(segment, 0..5),
        prop::option::of("[a-z=&]{0,6}"),
        prop::option::of("[A-Za-z0-9]{0,4}"),
    )
        .prop_map(|(root, segs, q, f)| {
            let mut s = format!("{}{}", root.unwrap_or(""), segs.join("/"));
            if let Some(q) = q {
                s.push('?');
                s.push_str(&q.replace('&', "&amp;"));
            }
            if let Some(f) = f {
                s.push('#');
                s.push_str(&f);
            }
            s
        })
}

fn base_iri() -> impl Strategy<Value = Iri> {
    prop_oneof![
        Just("http://a/b/c/d;p?q"),
        Just("http://mizar.example/html/binom.html"),
        Just("https://wiki.example/"),
        Just("file:///srv/site/coq/Page.html"),
    ]
    .prop_map(|b| Iri::new(b).unwrap())
}

fn link_html() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            relative_ref().prop_map(|r| format!("<a href=\"{r}\">l</a>")),
            relative_ref().prop_map(|r| format!("<img src=\"{r}\"/>")),
            "[a-z &<]{0,8}".prop_map(|t| escape_text(&t)),
            Just("<a href=\"http://dbpedia.org/resource/X\">d</a>".to_string()),
            Just("<span rel=\"oo:proves\" resource=\"#T1\"/>".to_string()),
        ],
        0..6,
    )
    .prop_map(|parts| format!("<div about=\"#T\" typeof=\"oo:Theorem\">{}</div>", parts.concat()))
}

pub fn rewrite_links_is_idempotent(cases: u32) -> Result<(), String> {
    check(cases, (link_html(), base_iri()), |(html, base)| {
        let once = rewrite_links(&html, &base);
        prop_assert_eq!(rewrite_links(&once, &base), once.clone());
        for e in HtmlDoc::parse(&once).elements() {
            for attr in ["href", "src"] {
                if let Some(v) = e.attr(attr) {
                    prop_assert!(agora_core::uri::is_absolute(&v), "{} = {}", attr, v);
                }
            }
        }
        Ok(())
    })
}

pub fn rewrite_links_keeps_absolute_fragments_verbatim(cases: u32) -> Result<(), String> {
    check(cases, (link_html(), base_iri()), |(html, base)| {
        let absolute = rewrite_links(&html, &base);
        let other = Iri::new("http://elsewhere.example/x/y").unwrap();
        prop_assert_eq!(rewrite_links(&absolute, &other), absolute);
        Ok(())
    })
}

// Subsumption monotonicity of resolve.

fn omdoc_type() -> impl Strategy<Value = OmdocType> {
    prop::sample::select(OmdocType::ALL.to_vec())
}

pub fn resolve_is_monotone_under_subsumption(cases: u32) -> Result<(), String> {
    let inputs = (
        prop::collection::vec(omdoc_type(), 1..5),
        prop::collection::vec(0usize..3, 1..5),
        omdoc_type(),
        0usize..3,
    );
    check(cases, inputs, |(types, ids, wanted, lookup)| {
        let mut body = String::new();
        for (ty, id) in types.iter().zip(&ids) {
            body.push_str(&format!("<div about=\"#f{id}\" typeof=\"{}\">x{id}</div>", ty.curie()));
        }
        let mut corpus = Corpus::offline();
        corpus.add_local("Page", HtmlDoc::parse(&body), Iri::new("http://wiki.example/Page.html").unwrap());
        let env = PrefixEnv::builtins();
        let aq = |t: OmdocType| {
            let src = format!("@{{{} Page#f{lookup}}}", t.curie());
            match parse_all(&src).0.remove(0) {
                Parsed::Antiquotation(a) => a,
                other => panic!("{other:?}"),
            }
        };
        let result = resolve(&aq(wanted), &env, &corpus);
        if let ResolutionResult::Resolved { ty, .. } = &result {
            prop_assert!(subsumes(wanted, *ty));
            for ancestor in wanted.ancestors() {
                prop_assert_eq!(&resolve(&aq(ancestor), &env, &corpus), &result);
            }
        }
        // Determinism on a fixed corpus.
        prop_assert_eq!(resolve(&aq(wanted), &env, &corpus), result);
        Ok(())
    })
}

/// A randomized property checked on a given number of cases.
pub type Property = fn(u32) -> Result<(), String>;

pub const PROPERTIES: &[(&str, Property)] = &[
    ("antiquotation round trip", antiquotation_round_trip),
    ("scan spans increase", scan_spans_increase),
    ("annotation preserves text", annotation_preserves_text),
    ("annotation is idempotent", annotation_is_idempotent),
    ("harvest counts typed groups", harvest_counts_typed_groups),
    ("rewrite_links is idempotent", rewrite_links_is_idempotent),
    ("rewrite_links keeps absolute links", rewrite_links_keeps_absolute_fragments_verbatim),
    ("resolve is monotone under subsumption", resolve_is_monotone_under_subsumption),
];
