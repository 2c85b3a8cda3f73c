//! Operator learning with the U-Net enhanced wavelet neural operator.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense `f64` tensors with reverse-mode autodiff.
//! * [`wavelet`]: periodized multilevel Daubechies DWT in 1-D and 2-D.
//! * [`model`]: the network (lifting, enhanced wavelet layers, projection).
//! * [`train`]: relative-L2 loss, Adam, step-decay schedule, training loop.
//! * [`data`]: PDE dataset generators and the binary container format.
//! * [`bias`]: the spectral-bias experiment with adaptive activations.
//! * [`plot`]: dependency-free SVG line plots and heatmaps.
//!
//! [`par`] switches between rayon and sequential loops; [`rng`] provides
//! the named seeded streams every random draw comes from. [`alloc`] tunes
//! the system allocator for the many short-lived tensor buffers.

pub mod alloc;
pub mod bias;
pub mod data;
pub mod model;
pub mod par;
pub mod plot;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod wavelet;
