//! Reconstruction of images from scattered Fourier samples by variably scaled
//! kernel interpolation followed by projected Landweber iteration.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod error;
pub mod fourier;
pub mod freq_domain;
pub mod kernels;
pub mod landweber;
pub mod parametric;
pub mod vsk_interp;

pub use dataio::{EnergyChannel, ImageFormat, Phantom, VisibilitySet};
pub use error::{Error, Result};
pub use fourier::SpectralTransform;
pub use freq_domain::{build_mask, DomainShape, FrequencyDomain, Grid, Region, Taper, WindowConfig};
pub use kernels::{KernelConfig, KernelFamily, ScalingSamples};
pub use landweber::{BandLimited, ImageGrid, LandweberConfig, LandweberTrace, StopReason, StopTolerance};
pub use parametric::{ChainResult, ChannelSequence, ParametricModel, ScalingStrategy};
pub use vsk_interp::{ComplexInterpolant, ComplexScaling, Interpolant, NodeSet};
