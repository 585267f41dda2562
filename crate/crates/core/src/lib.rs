pub mod birkhoff;
pub mod diophantine;
pub mod dynamics;
pub mod error;
pub mod lab;
pub mod model;
pub mod ode;
pub mod poly;
pub mod scalar;
pub mod sdm;

pub use error::{Error, Result};
