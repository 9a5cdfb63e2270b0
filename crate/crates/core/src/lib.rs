//! Directed linguistic-style coordination on threaded discussions.
//!
//! A corpus of reply trees is ingested ([`corpus`]), utterances are marked
//! with function-word categories ([`lexicon`]), speakers are split into role
//! groups ([`roles`]), and coordination is scored per speaker
//! ([`coordination`]) and compared between groups ([`hypotheses`]).

pub mod coordination;
pub mod corpus;
pub mod error;
pub mod hypotheses;
pub mod lexicon;
pub mod roles;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use coordination::{AggregateKind, Analysis, CoordinationParams, CoordinationScore, SupportRule};
pub use corpus::{ingest, ingest_reader, ingest_str, Corpus, DeltaMode, IngestOptions, Scope};
pub use error::{Error, Result};
pub use hypotheses::{HypothesisConfig, HypothesisResult, HypothesisSpec, TTestVariant};
pub use lexicon::{load_lexicon, Lexicon, MarkerSet};
pub use roles::{build_groups, DummyId, DummyUser, GroupName, Roles};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/lexicon.md")]
    mod lexicon {}
    #[doc = include_str!("../../../book/src/coordination.md")]
    mod coordination {}
    #[doc = include_str!("../../../book/src/roles.md")]
    mod roles {}
    #[doc = include_str!("../../../book/src/hypotheses.md")]
    mod hypotheses {}
    #[doc = include_str!("../../../book/src/synth.md")]
    mod synth {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
