//! Domain types, corpus and frame ingestion, the suggestion engine and
//! evaluation metrics for X-AMR annotation.

pub mod corpus;
pub mod exec;
pub mod frames;
pub mod lemma;
pub mod metrics;
pub mod roleset;
pub mod suggest;
pub mod time;
pub mod xamr;

pub use corpus::{assign_split, ingest_corpus, load_corpus, Corpus, Mention, Span, Split, SplitConfig};
pub use exec::Execution;
pub use frames::{load_frames, search_rolesets, FrameIndex};
pub use roleset::{Role, Roleset, RolesetId};
pub use time::{parse_time, TimeRef};
pub use xamr::{validate_xamr, xamr_match, ArgValue, EntityRef, XAmr};
