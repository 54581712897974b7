//! Sinograms and parallel-beam filtered back projection.

mod fbp;
mod fft;
mod sinogram;
mod volume;

pub use fbp::{check_coverage, fbp_slice, ramp_response, FilterKind, FilterSpec, SliceGrid};
pub use fft::{fft_in_place, Complex};
pub use sinogram::{to_sinogram, Sinogram, DEFAULT_EPSILON};
pub use volume::{reconstruct_volume, Volume};
