//! Candidate serialization and parallel verification.

mod chunk;
mod engine;
mod intersect_path;

pub use chunk::{CandidateChunk, ChunkBuilder, ChunkEntry, FLAG_BYTES, INDEX_BYTES, MIN_CHUNK_BUDGET};
pub use engine::{
    auto_choice, average_probe_size, check_pair, reduce_counts, strategy_a, strategy_b, strategy_c,
    verify_pair_count, ChunkReport, EngineConfig, OutputMode, PairCheck, Strategy, VerificationEngine,
    VerificationOutput, Verified, VerifyStats, AUTO_SMALL_SET_LIMIT, MAX_GROUP_SIZE,
};
pub use intersect_path::{
    diagonal_spacing, intersect_path_partitions, intersect_path_partitions_into, partition_count, path_split,
    Partition,
};
