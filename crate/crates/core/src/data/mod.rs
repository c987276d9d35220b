//! Frame sequences, the bicubic degradation model, synthetic clips and file I/O.

pub mod io;
pub mod resize;
pub mod sequence;
pub mod synth;

pub use io::{
    list_frames, list_maps, load_image, load_manifest, load_map, load_sequence, save_image, save_map, save_sequence,
    BitDepth, ImageFormat, ManifestEntry, MAP_EXT, SIDECAR,
};
pub use resize::{bicubic_resize, bicubic_upsample, cubic_kernel, degrade};
pub use sequence::{FrameSequence, TargetAnnotation};
pub use synth::{synth_sequence, Background, Motion, SynthSpec, TargetModel, TargetShape};
