//! Neuromorphic tactile texture classification.
//!
//! A 4×4 tactile sensor slides over a texture. Each taxel's analog trace is
//! low-pass filtered and normalized ([`signal`]), turned into spikes by an
//! Izhikevich regular-spiking neuron ([`neuron`]), and binned into a
//! rows × cols × time response volume ([`volume`]). Gray-level co-occurrence
//! statistics of that volume ([`glcm`]) feed a k-nearest-neighbour
//! classifier ([`classify`]). A single-taxel baseline built on classic spike
//! train statistics lives in [`spikestats`]; [`harness`] runs the comparison
//! studies end to end.
//!
//! ```
//! use neurotex::{glcm, neuron, signal, volume};
//!
//! let texture = signal::TextureParams {
//!     spatial_period_mm: 3.25,
//!     amplitude: 0.6,
//!     ..Default::default()
//! };
//! let geometry = signal::GridGeometry::default();
//! let trace = signal::generate_trace(&texture, geometry, 10.0, 20.0, 1000.0, 0.01, 7)?;
//! let trace = signal::preprocess(&trace, signal::DEFAULT_CUTOFF_HZ)?;
//! let spikes = neuron::encode_array(&trace, &neuron::NeuronParams::default())?;
//!
//! let vol = volume::build_volume(&spikes, volume::DEFAULT_BIN_S)?;
//! let q = volume::fit_quantizer(std::slice::from_ref(&vol), volume::DEFAULT_LEVELS)?;
//! let f = glcm::glcm_features(&vol, glcm::GlcmMode::Glcm3d, &q, &glcm::default_offsets())?;
//! assert!(f.asm > 0.0 && f.asm <= 1.0);
//! # Ok::<(), neurotex::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
mod error;
pub mod glcm;
pub mod harness;
pub mod neuron;
pub mod seed;
pub mod signal;
pub mod spikestats;
pub mod volume;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/signals.md")]
    mod signals {}
    #[doc = include_str!("../../../book/src/neuron.md")]
    mod neuron {}
    #[doc = include_str!("../../../book/src/spike-statistics.md")]
    mod spike_statistics {}
    #[doc = include_str!("../../../book/src/volumes-and-glcm.md")]
    mod volumes_and_glcm {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
