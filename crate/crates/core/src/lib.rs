//! Hybrid vision sensor ISP: RAW quad-Bayer mosaics with embedded event
//! pixels, dark calibration, demosaicing, color correction and event analytics.

pub mod calibration;
pub mod color;
pub mod demosaic;
pub mod error;
pub mod events;
pub mod frame_io;
pub mod metrics;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
