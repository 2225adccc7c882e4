//! 2D masks: raster and RLE codecs, per-prompt records, and providers.

mod oracle;
mod provider;
mod raster;
mod record;
mod rle;

pub use oracle::{
    mix64, noise_draw, prompt_jitter_unit, JitterScope, NoiseDraw, NoiseSpec, SyntheticOracle,
};
pub use provider::{enforce_contract, ContractReport, MaskProvider, PixelPrompt, ProviderError};
pub use raster::BinaryMask;
pub use record::{BBox, MaskRecord, RecordError};
pub use rle::{Rle, RleError};
