//! Binary file formats: PPM images and the tensor weight container.

pub mod container;
pub mod ppm;

pub use container::{read_container, write_container, Entry, WeightContainer};
pub use ppm::{read_ppm, write_ppm};
