//! Business-plan authoring engine: the plan document model, a replayable
//! LLM gateway, website/chat ingestion, few-shot draft generation,
//! exploit/explore suggestions with click-to-apply edits, expert-question
//! preparation and deterministic export.

pub mod corpus;
pub mod export;
pub mod gateway;
pub mod generator;
pub mod ingest;
pub mod markup;
pub mod model;
pub mod pitch;
pub mod suggest;

#[cfg(any(test, feature = "testing"))]
pub mod testing;
