//! Non-Local Means denoising with two neighbour-selection rules.
//!
//! Classic NLM collects the `N_n` patches of a search window that are closest
//! to the (noisy) reference patch. Because the reference carries noise, those
//! nearest neighbours share its noise and their average is pulled towards the
//! noisy value. Statistical nearest neighbours (SNN) instead rank candidates by
//! how close their squared distance is to `o * 2σ²`, the distance expected
//! between two noisy copies of the same patch.
//!
//! Modules:
//! - [`image`]: raster type, mirror padding, patch distance.
//! - [`params`]: NLM configuration and validation.
//! - [`search`]: NN / SNN neighbour collection in a search window.
//! - [`filter`]: weights, per-patch estimates and whole-image denoising.
//! - [`toymodel`]: analytic bias/variance of the 1×1-patch estimator and its
//!   Monte-Carlo check.
//! - [`noise`]: white noise, Bayer mosaicing, Malvar demosaicing and the
//!   colored-noise pipeline.
//! - [`metrics`]: PSNR and SSIM.
//! - [`io`]: PNG / PGM / PPM decoding and encoding.
//! - [`bench`]: parameter sweeps over image sets with CSV output.

pub mod bench;
pub mod error;
pub mod filter;
pub mod image;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod params;
pub mod search;
pub mod toymodel;

pub use crate::error::{Error, Result};
pub use crate::filter::{denoise_image, denoise_patch, nlm_weight, PatchEstimate};
pub use crate::image::{pad_mirror, patch_sq_distance, Image, PatchRef};
pub use crate::metrics::{psnr, ssim, QualityReport};
pub use crate::params::NlmParams;
pub use crate::search::{collect_nn, collect_snn, Neighbor, NeighborSet, Strategy};
