//! PNG images, the binary weight file, and dataset folders.

mod dataset;
mod image;
mod weights;

pub use dataset::{scan_dataset, DatasetEntry, DatasetScan};
pub use image::{load_png, png_dimensions, save_png};
pub(crate) use image::write_atomically;
pub use weights::{decode_weights, encode_weights, read_weights, write_weights, FORMAT_VERSION, MAGIC};
