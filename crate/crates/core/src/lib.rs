//! Dependency parsing with structured belief propagation.
//!
//! The whole pipeline (potentials, loopy BP with a projective-tree factor,
//! beliefs, decoding and loss) is differentiable, so models can be trained
//! against the approximate inference they will be decoded with.

pub mod backprop;
pub mod bp;
pub mod conllx;
pub mod eisner;
pub mod error;
pub mod factor_graph;
pub mod features;
pub mod hypergraph;
pub mod model_file;
pub mod objectives;
pub mod pipeline;
pub mod pruning;
pub mod sentence;
pub mod synth;
pub mod trainer;
pub mod tree;

#[cfg(test)]
mod testutil;

pub use eisner::{build_parse_hypergraph, edge_marginals, viterbi_tree, ArcMarginals, EdgeWeightMatrix, EisnerChart};
pub use error::{Error, Result};
pub use hypergraph::{Hypergraph, HypergraphAdjoints, HypergraphBuilder, InsideOutside};
pub use tree::{ArcMask, DepTree, ProjTree};
pub use features::{hash_index, FactorDescriptor, FeatureExtractor, FeatureSet, HashedFeatureVector, SentenceAtoms};
pub use sentence::{AnnotatedSentence, CoarseTagMap, Token};
pub use factor_graph::{factor_potential, Instance, ExplicitFactor, FactorConfig, FactorGraph, FactorKind, FeatureTable, ModelParams};
pub use bp::{compute_beliefs, run_bp, send_explicit_factor_message, send_ptree_messages, BeliefSet, BpResult, MessageSet, PtreeState, Tape};
pub use backprop::{backward_pass, backward_ptree_message, BpSeeds};
pub use objectives::{
    annealed_risk, cll_loss_and_gradient, directed_dependency_error, l2_distance, mbr_decode, objective_gradient,
    AnnealSchedule, Objective, SparseGradient, TargetBeliefs,
};
pub use conllx::{evaluate_uas, projectivize, read_conllx, write_conllx, ConllSentence, UasReport};
pub use pruning::{select_parents, Direction, LengthBoundTable, Pruner};
pub use trainer::{adagrad_update, tune_learning_rate, AdaGrad, EpochRecord, Example, TrainConfig, TrainObjective, TrainOutcome};
pub use model_file::{load_model, save_model};
pub use pipeline::{parse_corpus, train_pipeline, ParserModel, PipelineConfig, PipelineOutcome, PruneStats};
