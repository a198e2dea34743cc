//! Prompt construction, the chat-completion gateway and code extraction.

mod extract;
mod gateway;
mod prompt;

pub use extract::{extract_code, looks_like_code};
pub use gateway::{connect, Gateway, GatewayError, HttpGateway, MockPlaylist, ModelConfig, DEFAULT_API_KEY_ENV};
pub use prompt::{
    build_correction_prompt, build_specification_prompt, default_task, estimate_tokens, PromptBundle, PromptError,
    PromptKind, PromptSection, SectionLabel, ACC_TASK, CAEM_TASK, DEFAULT_CONTEXT,
};
