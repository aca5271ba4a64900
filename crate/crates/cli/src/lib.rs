//! Command-line frontend for the registration library: text file formats,
//! the JSON result document, a benchmark harness, and the `turboreg` binary
//! surface (register / synth / eval / bench / diag-stability).

pub mod bench;
pub mod document;
pub mod formats;

mod app;

pub use app::run;
