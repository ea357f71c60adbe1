//! Transclusion of annotated formal mathematics into wiki narratives.
//!
//! The pipeline has two halves. On the formal side, [`annotator`] turns
//! Coqdoc-style HTML into HTML+RDFa typed with the OMDoc ontology, and
//! [`harvester`] reads such annotations back from any page. On the
//! narrative side, [`narrative`] parses Creole text with
//! [`antiquotation`]s, and [`resolver`] dereferences each antiquotation to
//! the verbatim HTML of the item it names.

pub mod annotator;
pub mod antiquotation;
pub mod harvester;
pub mod html;
pub mod narrative;
pub mod resolver;
pub mod uri;
pub mod vocabulary;

pub use antiquotation::{Antiquotation, ParseIssue, PrefixDecl, RefTarget, Span};
pub use harvester::{AnnotatedFragment, Triple};
pub use html::HtmlDoc;
pub use narrative::{NarrativeDoc, RenderMode};
pub use resolver::ResolutionResult;
pub use vocabulary::{Curie, Iri, OmdocType, PrefixEnv, RelationType};
