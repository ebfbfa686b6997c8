//! Optical chemical structure recognition.
//!
//! The crate turns depictions of small molecules into molecular graphs with a
//! segmentation network followed by three candidate classifiers, and it ships
//! everything needed to train those networks from scratch on synthetic data:
//!
//! * [`molgraph`]: the graph model, validation, a lattice-based molecule
//!   generator, a SMILES subset reader/writer and a V2000 MOLfile writer.
//! * [`render`]: deterministic rasterization with pixelwise atom, bond and
//!   charge label maps, PGM I/O and dataset generation.
//! * [`nn`]: a small dense tensor engine with dilated and depthwise-separable
//!   convolutions, reverse-mode gradients, cross-entropy losses, Adam and the
//!   `CGW1` weight container.
//! * [`networks`]: the segmentation network, the classifier networks, input
//!   window assembly and training loops.
//! * [`assembler`]: candidate generation and the two-phase graph builder.
//! * [`datasets`]: classifier training sets built from rendered data.
//! * [`eval`]: F1 scores, whole-graph error rates and rank correlation.
//! * [`pipeline`]: the on-disk workflow behind the `ocsr` binary.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod assembler;
pub mod config;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod grid;
pub mod molgraph;
pub mod networks;
pub mod nn;
pub mod pipeline;
pub mod render;
pub mod vocab;

pub use error::{Error, Result};
pub use grid::Grid;
pub use molgraph::{Atom, Bond, BondKind, Element, MolGraph, Pixel};
pub use vocab::{BondClass, Vocabulary};
