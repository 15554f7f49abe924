//! Seed splitting.
//!
//! Every random stream of a run is seeded by
//! `derive_seed(master, tag, index)`:
//!
//! ```text
//! s0 = splitmix64(master)
//! s1 = splitmix64(s0 ^ fnv1a64(tag))
//! s  = splitmix64(s1 ^ index)
//! ```
//!
//! Streams are keyed by what they feed (network initialization, task
//! sampling, point sampling) and never by the arm being trained, so adding
//! or removing arms leaves the randomness of the others untouched and all
//! arms of a seed see the same held-out tasks and points.

/// Initialization shared by the meta-trained arms.
pub const META_INIT: &str = "meta-init";
/// Task draws and per-task point seeds during meta-training.
pub const META_TRAIN: &str = "meta-train";
/// Held-out evaluation tasks, indexed by task.
pub const EVAL_TASKS: &str = "eval-tasks";
/// Fresh weights of the random arm, indexed by task.
pub const RANDOM_INIT: &str = "random-init";
/// Fine-tuning collocation and boundary points, indexed by task.
pub const FINETUNE_POINTS: &str = "finetune-points";
pub const DENOISE_TASK: &str = "denoise-task";
pub const DENOISE_INIT: &str = "denoise-init";
pub const DENOISE_POINTS: &str = "denoise-points";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let s0 = splitmix64(master);
    let s1 = splitmix64(s0 ^ fnv1a64(tag.as_bytes()));
    splitmix64(s1 ^ index)
}
