//! Detection-support toolkit: box regression losses with analytic gradients,
//! reference forward kernels for GAM attention and the SPPCSPC block,
//! detection evaluation, and a label-aware augmentation pipeline.

pub mod augment;
pub mod boxgeom;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gam;
pub mod golden;
pub mod gradcheck;
pub mod reference;
pub mod report;
pub mod rng;
pub mod sppcspc;
pub mod tensor;

pub use boxgeom::{eiou_loss, enclosing_box, focal_eiou_loss, iou, BBox, LossConfig, LossOutput};
pub use error::{Error, Result};
pub use tensor::Tensor4;
