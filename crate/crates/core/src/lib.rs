//! Inference of hierarchical (ultrametric) structure in directed weighted
//! networks, optionally embedded in geographic space.
//!
//! Observed flows are explained by a multiplicative model
//! `m(a,b) = w_out(a) * w_in(b) * f(h(a,b)) * g(d(a,b))` where h is a
//! valid hierarchical distance realized as a dendrogram, f(h) = 1/h - 1,
//! and g is a per-distance-bin deterrence (absent for generic networks).
//! Fitting alternates closed-form weight updates with a greedy search
//! over ultrametric-preserving hierarchy edits; community partitions at
//! any resolution are sections of the fitted hierarchy.

#![forbid(unsafe_code)]

pub mod error;
pub mod export;
pub mod fit;
pub mod graph;
pub mod hierarchy;
pub mod model;
pub mod newick;

pub use error::{Error, Result};
pub use fit::{
    enumerate_moves, fit, fit_weights, greedy_step, optimal_level_value, update_g, update_w_in,
    update_w_out, FitConfig, FitMode, FitReport, Move, MoveRecord, WeightFitOutcome,
};
pub use graph::{
    build_distance_matrix, great_circle_distance, parse_distance_csv, parse_edge_csv,
    parse_nodes_csv, write_edge_csv, BinSpec, CsvOptions, DistanceMatrix, FlowNetwork, GeoPoint,
    NodeRecord, EARTH_RADIUS_KM,
};
pub use hierarchy::{
    default_ladder, partition_agreement, random_hierarchy, validate_ultrametric, CutResult,
    Hierarchy, Partition, UltrametricViolation,
};
pub use model::{
    deterrence, model_value, objective, sample_poisson_network, ModelParams, ObjectiveKind,
    ObjectiveSpec, WEIGHT_FLOOR,
};
pub use newick::{from_newick, to_dot, to_newick};
