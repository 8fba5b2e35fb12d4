/// Independent RNG streams derived from one experiment seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    DataTrain = 1,
    DataTest = 2,
    OriginalInit = 3,
    OriginalShuffle = 4,
    RetrainInit = 5,
    RetrainShuffle = 6,
    Shadow = 7,
    Multiclass = 8,
}

/// SplitMix64 finaliser over `(seed, stream, index)`.
pub(crate) fn mix(seed: u64, stream: Stream, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add((stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
