//! Depth-guided bundle sampling for image-based novel view synthesis.
//!
//! Adjacent target-view rays are grouped into K×K bundles. Each bundle is
//! modelled as a cone and sampled with inscribed spheres placed inside a
//! per-bundle depth range; the number of spheres adapts to how wide that
//! range is. Spheres are encoded from pre-filtered source-view mipmaps
//! (a joint bundle feature) and from full-resolution per-ray lookups (a
//! ray-specific feature), then volume rendered into a coarse and a fine map
//! that are summed into the output image.
//!
//! The learned components of a full system (feature extractor, depth
//! network, radiance MLP, neural decoder) are replaced by analytic,
//! deterministic stand-ins so that every stage can be checked against an
//! independent oracle.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod pyramid;
pub mod radiance;
pub mod renderer;
pub mod sampler;

pub use camera::{Camera, CameraDesc, PixelFootprint, Projection, Ray};
pub use error::{Error, Result};
pub use grid::Grid;
pub use harness::scene::{Rig, SceneSpec, SyntheticScene};
pub use pyramid::{Mipmap, SphereEncoding};
pub use radiance::{AnalyticField, BundleFeatures, ConstantField, FieldProvider, RadianceSample};
pub use renderer::{render_oracle, render_view, RenderConfig, RenderReport, SourceView};
pub use sampler::{Bundle, Cone, DepthRange, PlenopticBounds, Sphere};
