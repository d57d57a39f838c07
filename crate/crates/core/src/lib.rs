//! Structured prediction for binary image segmentation with supermodular
//! losses.
//!
//! The crate trains max-margin segmentation models whose pairwise weights
//! stay submodular, so test-time inference is an exact graph cut. Training
//! losses may be supermodular — rewarding clustered mistakes — and the
//! loss-augmented inference inside the cutting-plane trainer is handled by a
//! consensus splitting (ADMM) that alternates between a graph-cut MAP step
//! and an exact loss-maximization step.
//!
//! Module map:
//!
//! * [`model`] — grids, labelings, the joint feature map, energy tables;
//! * [`maxflow`] — Dinic max-flow and submodular energy minimization;
//! * [`losses`] — Hamming, adjacent-misprediction, squared-cardinality,
//!   containment, and IoU losses with set-function adapters;
//! * [`solvers`] — exact augmented-loss maximizers per capability class;
//! * [`admm`] — the split loss-augmented inference loop;
//! * [`minnorm`] — Fujishige–Wolfe minimum-norm-point baseline;
//! * [`ssvm`] — n-slack cutting-plane training and prediction;
//! * [`oracle`] — brute-force references and property checkers;
//! * [`synth`], [`raster`], [`experiment`], [`bench`] — data generation,
//!   image I/O, experiment orchestration, and timing harness.
//!
//! The `parallel` feature (on by default) runs constraint generation,
//! enumeration scans, and experiment splits on a rayon pool; disabling it
//! yields a dependency-light sequential build with identical results.

pub mod admm;
pub mod error;
pub mod losses;
pub mod maxflow;
pub mod minnorm;
pub mod model;
pub mod oracle;
pub mod setfn;
pub mod bench;
pub mod experiment;
pub mod raster;
pub mod solvers;
pub mod ssvm;
pub mod synth;

pub use error::{Error, Result};
pub use model::{EdgeSet, EnergyModel, GridShape, Labeling, UnaryFeatures, WeightVector};
