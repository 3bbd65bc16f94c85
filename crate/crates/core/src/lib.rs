pub mod augmentation;
pub mod cascade;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod io;
pub mod raster;
pub mod regression;
pub mod shape;
pub mod subspace;
pub mod synthetic;
