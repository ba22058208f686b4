//! Model-in-the-loop suggestions: embeddings, the argument store and
//! annotator decisions.

pub mod decision;
pub mod embed;
pub mod store;

pub use decision::{annotations_from_decisions, apply_decision, replay, Action, Decision, DecisionError, DecisionLog};
pub use embed::{cosine, embed, Embedding, EmbeddingProvider, HashingEmbedder};
pub use store::{default_selection, ArgumentStore, Slot, SlotValue, StoreError, StoreScope, Suggestion};
