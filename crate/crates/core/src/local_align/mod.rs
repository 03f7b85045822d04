//! Local alignment: DTW between feature sequences and blank-interleaved
//! note-state Viterbi decoding of corrected note boundaries.

mod beam;
mod dtw;
mod graph;
mod segments;
mod viterbi;

pub use beam::{beam_variants, BeamResult, VARIANT_INTERVALS};
pub use dtw::{cosine_distance, dtw, DtwResult};
pub use graph::{build_graph, build_observation, text_symbol, NoteStateGraph, ObservationMatrix, State, StateMode, TEXT_ALPHABET};
pub use segments::{align_by_segments, SegmentAlignment, SegmentOutcome};
pub use viterbi::{path_log_likelihood, viterbi_align, Alignment, Observations, ViterbiConfig};
