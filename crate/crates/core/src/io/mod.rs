//! File formats: binary tensors, PGM images, a flat dotted-key text grammar,
//! and the rig/scene/weights files built on top of it.

pub mod keyval;
pub mod pgm;
pub mod rig;
pub mod scene;
pub mod tensor;
pub mod weights;
