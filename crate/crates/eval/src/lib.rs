//! Scoring for editing tasks: a replay oracle over scene states, colour-layout
//! embedding similarities, and a client for an external image judge.

pub mod judge;
pub mod metrics;
pub mod report;
pub mod symbolic;

pub use judge::{parse_score, JudgeClient, JudgeConfig, JudgeError, JudgeTask};
pub use metrics::{direction_similarity, embed, image_similarity, similarity_metrics, Embedding, Similarity};
pub use report::{write_summary_csv, EvalReport};
pub use symbolic::{observable_steps, replay_instructions, score_instructions, score_state, Status, SymbolicScore, Verdict};
