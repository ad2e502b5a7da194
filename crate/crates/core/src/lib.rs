//! UMAP built from first principles, together with a laboratory that checks
//! numerically that its objective, initialization and optimizer amount to
//! spectral clustering on the fuzzy k-NN graph.
//!
//! Pipeline:
//!
//! ```text
//! DataMatrix --knn_search--> KnnGraph --smooth_knn_params/directed_weights--> DirectedWeights
//!            --symmetrize--> SimilarityGraph --spectral_init--> Embedding --optimize--> Embedding
//! ```
//!
//! The [`lab`] module re-derives each link of the equivalence (Gaussian
//! exactness, Cauchy first-order behaviour, spectral optimality, the
//! negative-sampling expectation) and reports measured residuals.

pub mod data;
pub mod error;
pub mod fuzzy;
pub mod kernel;
pub mod knn;
pub mod lab;
pub mod objective;
pub mod sgd;
pub mod spectra;

pub use data::{DataMatrix, LabeledDataset};
pub use error::{Error, Result};
pub use fuzzy::{DirectedWeights, SimilarityGraph, SmoothKnnParams};
pub use kernel::{KernelFamily, KernelParams, MinDistFit};
pub use knn::{KnnGraph, Metric};
pub use objective::LossReport;
pub use sgd::{Embedding, OptimizerConfig, Provenance};
pub use spectra::{LaplacianPair, Partition, SpectralSolution};
