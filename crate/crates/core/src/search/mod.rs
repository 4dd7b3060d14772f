//! Beam search over decoder outputs, with grammar and execution
//! constraints for programs and plain character decoding for induction.

mod beam;
mod program;

pub use beam::{beam_search, BeamConfig, Constraint, Decoder, Hypothesis, Unconstrained};
pub use program::{
    induce_with, max_program_tokens, synthesize_with,
    dp_prefix_check, induce, select_program, synthesize, InductionOptions, ProgramConstraint, ProgramState,
    SelectionMetric, SynthesisOptions, SynthesisResult,
};
