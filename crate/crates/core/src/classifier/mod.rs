//! DTW ensemble distance, KNN identification, and evaluation sweeps.

mod dtw;
mod eval;
mod knn;

pub use dtw::{dtw_distance, dtw_distance_banded};
pub use eval::{
    evaluate_identification, ConfusionMatrix, DistanceMatrix, EvalProtocol, EvalReport, SubjectSweepRow, TrainSweepRow,
};
pub use knn::{ensemble_distance, knn_classify, nearest, vote, Gallery, IdentificationResult};
