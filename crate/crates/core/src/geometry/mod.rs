//! Boxes, masks and frames, plus the cropping and sampling primitives the
//! cascade stages share.

mod bbox;
mod crop;
mod raster;
mod sampling;

pub use bbox::{expand_box, iou, rasterized_iou, BoundingBox, PixelRect};
pub use crop::{crop_resize, crop_resize_mask, paste_back, paste_footprint};
pub use raster::{enclosing_box, BinaryMask, Frame, LabelMap, ProbabilityMap};
pub use sampling::{
    degrade_mask, degrade_mask_with, gaussian_box_samples, random_shift, DegradeConfig,
    GaussianSampleConfig,
};
