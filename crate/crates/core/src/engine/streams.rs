//! Hierarchical random streams keyed by purpose and entity ids.

use rand::rngs::SmallRng;
use rand::SeedableRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Placement = 1,
    Shadowing = 2,
    Mac = 3,
    Reception = 4,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream `(master, purpose, ids…)`.
pub fn derive_seed(master: u64, purpose: Purpose, ids: &[u64]) -> u64 {
    let mut h = splitmix(master ^ splitmix(purpose as u64));
    for &id in ids {
        h = splitmix(h ^ splitmix(id.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(master: u64, purpose: Purpose, ids: &[u64]) -> SmallRng {
    SmallRng::seed_from_u64(derive_seed(master, purpose, ids))
}
