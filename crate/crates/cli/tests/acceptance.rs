//! One PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.

mod common;

#[path = "../../core/tests/support/properties.rs"]
mod properties;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use agora_core::annotator::{annotate, TypeMapping};
use agora_core::harvester::{harvest, triples, Predicate};
use agora_core::html::{self, HtmlDoc, Node};
use agora_core::narrative::{parse_narrative, render_narrative};
use agora_core::resolver::{self, Corpus, FetchError, Fetcher, PageCache};
use agora_core::{Iri, OmdocType, PrefixEnv, RelationType, RenderMode, ResolutionResult};
use common::{agora, fig1_project, fixtures, stdout, TestServer};

const GOLDEN_TIME_LIMIT: Duration = Duration::from_secs(1);
const SUITE_TIME_LIMIT: Duration = Duration::from_secs(30);
const MIN_PROPERTY_CASES: u32 = 200;
const PROPERTY_CASES: u32 = 256;
const MIN_RFC_VECTORS: usize = 30;

const MML: &str = "http://mizar.cs.ualberta.ca/~mptp/7.12.02_4.178.1142/html";

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let detail = f()?;
    let elapsed = start.elapsed();
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))?;
    Ok(format!("{detail}; {} ms", elapsed.as_millis()))
}

fn coqdoc_golden() -> Outcome {
    timed(GOLDEN_TIME_LIMIT, || {
        let source = HtmlDoc::parse(&fs::read_to_string(fixtures().join("poly_id.html")).unwrap());
        let annotated = annotate(source.clone(), &TypeMapping::default());
        ensure(annotated.doc.text_content() == source.text_content(), || "text content changed".into())?;
        let base = Iri::new("http://coq.example/Poly.html").unwrap();
        let frags = harvest(&annotated.doc, &base);
        ensure(frags.len() == 1, || format!("{} fragments", frags.len()))?;
        ensure(frags[0].id() == Some("poly_id"), || format!("subject {}", frags[0].subject))?;
        ensure(frags[0].known_type() == Some(OmdocType::Lemma), || format!("type {:?}", frags[0].ty))?;
        Ok("1 fragment #poly_id typed Lemma, text unchanged".into())
    })
}

fn mizar_golden() -> Outcome {
    timed(GOLDEN_TIME_LIMIT, || {
        let doc = HtmlDoc::parse(&fs::read_to_string(fixtures().join("mizar_listing.html")).unwrap());
        let base = Iri::new(format!("{MML}/brouwer.html")).unwrap();
        let frags = harvest(&doc, &base);
        ensure(frags.len() == 2, || format!("{} fragments", frags.len()))?;
        let (t14, pf23) = (&frags[0], &frags[1]);
        ensure(t14.id() == Some("T14") && t14.known_type() == Some(OmdocType::Theorem), || "T14".into())?;
        ensure(
            t14.relations
                == [(
                    Predicate::Known(RelationType::SameAs),
                    Iri::new("http://dbpedia.org/resource/Brouwer_Fixed_Point_Theorem").unwrap(),
                )],
            || format!("T14 relations {:?}", t14.relations),
        )?;
        ensure(pf23.id() == Some("PF23") && pf23.known_type() == Some(OmdocType::Proof), || "PF23".into())?;
        ensure(
            pf23.relations == [(Predicate::Known(RelationType::Proves), t14.subject.clone())],
            || format!("PF23 relations {:?}", pf23.relations),
        )?;
        let n = triples(&frags).len();
        ensure(n == 4, || format!("{n} triples"))?;
        Ok("T14 Theorem sameAs Brouwer, PF23 Proof proves T14, 4 triples".into())
    })
}

/// Serves the Mizar fixture directory for the `mml` prefix.
struct FixtureFetcher;

impl Fetcher for FixtureFetcher {
    fn fetch(&self, iri: &Iri) -> Result<Vec<u8>, FetchError> {
        let name = iri
            .without_fragment()
            .strip_prefix(&format!("{MML}/"))
            .ok_or_else(|| FetchError::NotFound(iri.to_string()))?;
        fs::read(fixtures().join("fig1/remote/html").join(name)).map_err(|_| FetchError::NotFound(iri.to_string()))
    }
}

/// The markup with `href` and `src` removed, to compare modulo link rewriting.
fn without_links(fragment: &str) -> String {
    fn strip(nodes: &mut [Node]) {
        for n in nodes {
            if let Node::Element(e) = n {
                e.attrs.retain(|a| a.name != "href" && a.name != "src");
                strip(&mut e.children);
            }
        }
    }
    let mut nodes = html::parse_nodes(fragment);
    strip(&mut nodes);
    html::serialize_nodes(&nodes)
}

fn binomial_resolution_golden() -> Outcome {
    let coq = fs::read_to_string(fixtures().join("fig1/coq/CoqBinomialCoefficient.html")).unwrap();
    let coq_base = Iri::new("http://wiki.example/CoqBinomialCoefficient.html").unwrap();
    let mut corpus = Corpus::new(Box::new(FixtureFetcher), PageCache::in_memory());
    let annotated = annotate(HtmlDoc::parse(&coq), &TypeMapping::default()).doc;
    corpus.add_local("CoqBinomialCoefficient", annotated.clone(), coq_base.clone());

    let text = format!(
        "@{{prefix mml={MML}}}\n= Binomial =\nSee @{{oo:Definition CoqBinomialCoefficient#C}}.\n\n@{{oo:Definition mml:binom.html#D22}}\n"
    );
    let doc = parse_narrative(&text);
    ensure(doc.issues.is_empty(), || format!("{:?}", doc.issues))?;
    let mut env = PrefixEnv::builtins();
    for d in &doc.prefix_decls {
        let base = agora_cli::config::normalize_prefix_base(d.base.as_str());
        env.bind(&d.name, Iri::new(base).unwrap()).map_err(|e| e.to_string())?;
    }

    let sources = [
        (harvest(&annotated, &coq_base), "C"),
        (
            harvest(
                &HtmlDoc::parse(&fs::read_to_string(fixtures().join("fig1/remote/html/binom.html")).unwrap()),
                &Iri::new(format!("{MML}/binom.html")).unwrap(),
            ),
            "D22",
        ),
    ];
    let mut inclusions = BTreeMap::new();
    for (a, (frags, id)) in doc.antiquotations().into_iter().zip(&sources) {
        let result = resolver::resolve(a, &env, &corpus);
        let ResolutionResult::Resolved { html, ty, subject } = &result else {
            return Err(format!("{a} did not resolve: {result:?}"));
        };
        ensure(*ty == OmdocType::Definition, || format!("{a}: type {ty}"))?;
        ensure(subject.fragment() == Some(*id), || format!("{a}: subject {subject}"))?;
        let source = frags.iter().find(|f| f.id() == Some(*id)).expect("fixture fragment");
        ensure(without_links(html) == without_links(&source.html), || format!("{a}: not verbatim"))?;
        inclusions.insert(a.span, html.clone());
    }
    let page = render_narrative(&doc, &inclusions, RenderMode::Inline).map_err(|e| e.to_string())?;
    for html in inclusions.values() {
        ensure(page.contains(html.as_str()), || "rendered page lacks an inclusion".into())?;
    }
    ensure(page.contains(&format!("href=\"{MML}/nat_1.html#NM1\"")), || "mml link not absolute".into())?;
    Ok("both antiquotations Resolved as Definition; page embeds both fragments verbatim modulo links".into())
}

fn not_found_behaviour() -> Outcome {
    let a = match agora_core::antiquotation::parse_all("@{oo:Definition mml:nopage.html#D99}").0.remove(0) {
        agora_core::antiquotation::Parsed::Antiquotation(a) => a,
        other => return Err(format!("{other:?}")),
    };
    let span = resolver::render_not_found(&a, &resolver::NotFoundReason::NoFragment);
    let parsed = HtmlDoc::parse(&span);
    let el = parsed.elements()[0];
    ensure(el.name == "span" && el.has_class("agora-unresolved"), || span.clone())?;
    ensure(el.text_content() == "mml:nopage.html#D99?", || span.clone())?;
    ensure(resolver::UNRESOLVED_CSS.contains("color: red"), || "stylesheet".into())?;

    let dir = tempfile::TempDir::new().unwrap();
    let root = dir.path();
    fs::create_dir_all(root.join("formal")).unwrap();
    fs::create_dir_all(root.join("wiki")).unwrap();
    fs::write(root.join("formal/Page.html"), r##"<div about="#C" typeof="oo:Definition">c</div>"##).unwrap();
    fs::write(root.join("wiki/Index.creole"), "See @{oo:Definition Page#Missing}.\n").unwrap();
    fs::write(root.join("agora.conf"), "narratives = wiki\nformal = formal\n").unwrap();
    let check = agora(&["check"], root);
    ensure(check.status.code() == Some(1), || format!("check exited {:?}", check.status.code()))?;
    ensure(stdout(&check).contains("unresolved Page#Missing: NoFragment"), || stdout(&check))?;
    agora(&["build", "--allow-unresolved"], root);
    let page = fs::read_to_string(root.join("site/Index.html")).unwrap();
    ensure(
        page.contains(r#"<span class="agora-unresolved" title="NoFragment">Page#Missing?</span>"#),
        || "built page lacks the unresolved span".into(),
    )?;
    Ok("red `REF?` span rendered; check exits 1".into())
}

fn property_suite() -> Outcome {
    ensure(PROPERTY_CASES >= MIN_PROPERTY_CASES, || "too few cases".into())?;
    ensure(properties::RFC3986_VECTORS.len() >= MIN_RFC_VECTORS, || "RFC table too small".into())?;
    timed(SUITE_TIME_LIMIT, || {
        properties::rewrite_links_follows_rfc3986()?;
        for (name, property) in properties::PROPERTIES {
            property(PROPERTY_CASES).map_err(|e| format!("{name}: {e}"))?;
        }
        Ok(format!(
            "{} properties x {PROPERTY_CASES} cases, {} RFC 3986 vectors",
            properties::PROPERTIES.len(),
            properties::RFC3986_VECTORS.len()
        ))
    })
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    walk(dir, dir)
}

fn walk(root: &Path, dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(root, &path));
        } else {
            out.insert(path.strip_prefix(root).unwrap().display().to_string(), fs::read(&path).unwrap());
        }
    }
    out
}

fn end_to_end() -> Outcome {
    let server = TestServer::start(fixtures().join("fig1/remote"));
    let dir = tempfile::TempDir::new().unwrap();
    let config = fig1_project(dir.path(), &server.url);
    let config = config.to_str().unwrap();

    let first = agora(&["--config", config, "build"], dir.path());
    ensure(first.status.code() == Some(0), || format!("first build: {}", stdout(&first)))?;
    ensure(stdout(&first).contains("0 unresolved"), || stdout(&first))?;
    let site1 = read_tree(&dir.path().join("site"));
    let second = agora(&["--config", config, "build"], dir.path());
    ensure(second.status.code() == Some(0), || format!("second build: {}", stdout(&second)))?;
    let site2 = read_tree(&dir.path().join("site"));
    ensure(site1 == site2, || "builds differ".into())?;

    let page = String::from_utf8(site1["BinomialCoefficient.html"].clone()).unwrap();
    ensure(!page.contains("agora-unresolved\""), || "page has unresolved references".into())?;
    let includes = page.matches("class=\"agora-include\"").count();
    ensure(includes == 4, || format!("{includes} inclusions"))?;
    Ok(format!(
        "{} files byte-identical across two builds, {includes} inclusions, 0 unresolved, {} remote fetch(es)",
        site1.len(),
        server.requests()
    ))
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("Coqdoc listing annotates to one Lemma fragment #poly_id", coqdoc_golden),
        ("Mizar listing harvests to 2 fragments and 4 triples", mizar_golden),
        ("binomial and mml antiquotations resolve and embed verbatim", binomial_resolution_golden),
        ("missing fragment renders as unresolved span and fails check", not_found_behaviour),
        ("property suite within time budget", property_suite),
        ("binomial wiki project builds reproducibly with zero unresolved", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        match criterion() {
            Ok(detail) => println!("PASS [{}] {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
