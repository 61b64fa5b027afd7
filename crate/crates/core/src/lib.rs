//! Observation-driven correction of gridded NWP surface winds.
//!
//! Recent in-situ observations, each paired with the NWP value at its
//! location, are encoded by a masked self-attention stack; target points
//! carrying their own NWP forecast query that encoding through
//! cross-attention, and the network predicts the forecast error at each
//! target. The corrected wind is the NWP baseline plus that error.

pub mod attention;
pub mod autodiff;
pub mod data;
pub mod encodings;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod model;
pub mod geo;
pub mod inference;
pub mod platform;
pub mod seed;
pub mod synthetic;
pub mod tensor;
pub mod training;
pub mod time;
pub mod wind;

pub use error::{Error, Result};
pub use exec::ExecMode;
pub use geo::{GeoBox, GeoCoord};
pub use platform::PlatformType;
pub use tensor::Mat;
pub use time::TimeStamp;
pub use wind::WindVector;
