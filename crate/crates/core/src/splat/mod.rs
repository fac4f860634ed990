//! Gaussian-splat scene representation and differentiable rendering.

mod gaussian;
mod image;
mod loss;
mod ply;
mod render;

pub use gaussian::{
    logit, normalized_quaternion, quaternion_matrix, quaternion_matrix_partials, sigmoid,
    GaussianMap, GaussianPrimitive,
};
pub use image::{Image, TVGF_MAGIC};
pub use loss::{image_loss, image_loss_with_grad, l1, ssim, ssim_with_grad};
pub use ply::{ply_string, read_ply, write_ply};
pub use render::{
    map_gradients, pose_gradient, project_gaussian, render, PrimitiveGrad, ProjectedSplat,
    Rasterizer, RenderGradients, RenderOptions, RenderedView,
};
