//! Nested simple random walks as pathwise approximations of Brownian motion
//! and of continuous local martingales.
//!
//! Everything here is exact: walk values are integers in dyadic space units,
//! times are integers in micro-ticks of a fine clock, and suprema of
//! piecewise-linear differences are returned as reduced rationals. Floating
//! point only shows up in [`bounds`].
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod bounds;
pub mod dyadic;
pub mod embedding;
pub mod error;
pub mod generators;
pub mod rng;
pub mod twist;

pub use dyadic::{
    sup_distance, sup_distance_step, Dyadic, DyadicPath, Level, MicroClock, Origin, PlPath,
    QuasiInverse, Ratio, StepPath, StoppingSequence, TimeChange, TimeUnit,
};
pub use embedding::{
    composed_times, discrete_qvar, embedded_walk, martingale_crossing_times, skorohod_times,
    DiscreteQV, EmbeddedWalk,
};
pub use error::Error;
pub use generators::{
    assemble_martingale, gen_durations, Coverage, GeneratorKind, GeneratorSpec,
    MartingaleInstance, QvMap, WalkSource,
};
pub use twist::{
    build_nested, even_crossing_times, generate_step_matrix, twist, NestedWalkFamily, StepMatrix,
};
