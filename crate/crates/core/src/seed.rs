//! Sample-id derivation.
//!
//! A sample id is a bijective 64-bit mix of a counter that packs the term
//! index (high 24 bits) and the sample index (low 40 bits), offset by a
//! mixed base seed:
//!
//! ```text
//! counter   = (term << 40) | sample_index
//! sample_id = mix64(counter + mix64(base_seed))      (wrapping add)
//! ```
//!
//! `mix64` is the SplitMix64 finalizer, a bijection on `u64`. For a fixed
//! base seed the map `(term, sample_index) -> sample_id` is therefore
//! injective, so ids never repeat within a run. Term 0 is reserved for pilot
//! ensembles.

use crate::error::{Error, Result};

pub const SAMPLE_INDEX_BITS: u32 = 40;
pub const MAX_TERM: u32 = (1 << (64 - SAMPLE_INDEX_BITS)) - 1;
pub const MAX_SAMPLE_INDEX: u64 = (1 << SAMPLE_INDEX_BITS) - 1;

/// Term index used for pilot runs.
pub const PILOT_TERM: u32 = 0;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn sample_id(base_seed: u64, term: u32, sample_index: u64) -> Result<u64> {
    if term > MAX_TERM {
        return Err(Error::InvalidInput(format!("term index {term} exceeds {MAX_TERM}")));
    }
    if sample_index > MAX_SAMPLE_INDEX {
        return Err(Error::InvalidInput(format!("sample index {sample_index} exceeds {MAX_SAMPLE_INDEX}")));
    }
    let counter = (u64::from(term) << SAMPLE_INDEX_BITS) | sample_index;
    Ok(mix64(counter.wrapping_add(mix64(base_seed))))
}
