//! Two-step retrieval-augmented X-AMR extraction: prompt construction,
//! response parsing, candidate retrieval, and a provider-agnostic client.

pub mod cache;
pub mod client;
pub mod describe;
pub mod http;
pub mod pipeline;
pub mod prompt;
pub mod response;

pub use cache::{prompt_key, ResponseCache};
pub use client::{ClientError, DecodingParams, LlmClient, MockClient, RecordingClient};
pub use describe::{select_candidates, EventDescription};
pub use http::{HttpClient, HttpConfig, API_KEY_ENV};
pub use pipeline::{run_pipeline, Failure, PipelineOptions, PipelineOutput, PipelineStats, Stage};
pub use prompt::{build_prompt_a, build_prompt_b, mark_trigger, PromptA, PromptB};
pub use response::{parse_response_a, parse_response_b, render_response, LlmResponse, LlmResponseA, ResponseError};
