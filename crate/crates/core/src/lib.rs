//! Exact measures on `[0, 1)`, partition densities, and an adaptive
//! refinement engine that approximates Radon–Nikodym derivatives.

pub mod decomposition;
pub mod engine;
pub mod error;
pub mod fcc;
pub mod interval_set;
pub mod io;
pub mod measures;
pub mod partition;
pub mod polynomial;
pub mod rational;
pub mod sampling;
pub mod simple_function;

pub use error::{Error, Result};
pub use interval_set::IntervalSet;
pub use measures::{MassOptions, MassResult, MeasureSpec};
pub use partition::Partition;
pub use rational::Rational;
pub use simple_function::SimpleFunction;
