//! Cross-persistence toolkit.
//!
//! Computes cross-barcodes of point-cloud pairs (Vietoris-Rips filtrations on
//! the union of two clouds with distances inside the right cloud zeroed),
//! summarizes them (MTD, persistence entropy, persistence images), estimates
//! densities of MTD values and compares them through the overlap functional,
//! trains Cross-RipsNet predictors of cross-persistence densities, and builds
//! topological feature vectors for time-series classification.
//!
//! The modules mirror the pipeline:
//!
//! * [`geometry`] - point clouds, distance matrices, noise, delay embedding, PCA.
//! * [`filtration`] - Vietoris-Rips and cross Vietoris-Rips filtrations.
//! * [`persistence`] - boundary-matrix reduction and cross-barcodes.
//! * [`summaries`] - MTD, entropy, persistence images, expected densities.
//! * [`stats`] - 1-D KDE, overlap, MTD-density distinction, noise sweeps.
//! * [`crossripsnet`] - the permutation-invariant density predictor.
//! * [`topgen`] - time-series features and a logistic classifier.
//!
//! ```
//! use crosspers::geometry::PointCloud;
//! use crosspers::persistence::{cross_barcode, MaxScale};
//! use crosspers::summaries::mtd;
//!
//! let p = PointCloud::new(vec![vec![0.0, 0.0]]).unwrap();
//! let q = PointCloud::new(vec![vec![3.0, 4.0]]).unwrap();
//! let h0 = cross_barcode(&p, &q, 0, MaxScale::Auto).unwrap();
//! assert_eq!(mtd(&h0), 5.0);
//! ```

pub mod crossripsnet;
pub mod error;
pub mod filtration;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod persistence;
pub mod rng;
pub mod stats;
pub mod summaries;
pub mod synth;
pub mod topgen;

pub use error::{Error, Result};

/// Version string embedded in every report written by the CLI.
pub const VERSION: &str = concat!("crosspers ", env!("CARGO_PKG_VERSION"));
