//! Compositional binary codes for collaborative filtering.
//!
//! Every user and item is represented by `G` short binary code components and
//! a sparse, non-negative weight per component. A rating is predicted as
//!
//! ```text
//! r(i, j) = sum_k  eta_i[k] * xi_j[k] * <b_i[k], d_j[k]>
//! ```
//!
//! where each inner product of ±1 codes is evaluated with XOR + popcount and
//! components with a zero weight on either side are skipped entirely.
//!
//! The crate covers the whole pipeline:
//!
//! * [`data`]: rating parsing, filtering, per-user splits, sparse matrix
//! * [`mf`]: real-valued matrix factorization (baseline and distance latents)
//! * [`weights`]: anchors, arc-cosine distance, Epanechnikov weights, integer scaling
//! * [`coding`]: packed codes, Hamming inner products, the predictor and objective
//! * [`solver`]: relaxed initialization, discrete coordinate descent, orthogonal updates
//! * [`retrieval`]: bit-packed top-k scans with an integer-weight fast path
//! * [`eval`]: NDCG@K and the experiment harness
//! * [`model_io`]: the little-endian model file

pub mod coding;
pub mod data;
pub mod error;
pub mod eval;
pub mod kmeans;
pub mod mf;
pub mod model_io;
pub mod retrieval;
pub mod solver;
pub mod synthetic;
pub mod weights;

pub use coding::{binary_inner_product, CccfModel, PackedCodes};
pub use data::{RatingTriples, RatingsMatrix, Split};
pub use error::{CccfError, Result};
pub use eval::{ndcg_at_k, EvalReport, Gain};
pub use mf::{LatentFactors, MfConfig};
pub use retrieval::{RetrievalIndex, ScoreKind, TopKResult};
pub use solver::{AuxOrthogonal, LinearTerm, TrainConfig, TrainOutput};
pub use weights::{AnchorSet, DistanceScale, IntegerWeights, WeightMode, WeightVectors};
