//! Seed derivation. Every random stream is a pure function of the root seed
//! and a path of (role, index) pairs, so results do not depend on how trials
//! or columns are scheduled.

/// Tags separating the random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Trial,
    Dictionary,
    Mask,
    Signal,
    Attempt,
    Noise,
    Rademacher,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Trial => 0x7472_6961_6c00_0001,
            Role::Dictionary => 0x6469_6374_0000_0002,
            Role::Mask => 0x6d61_736b_0000_0003,
            Role::Signal => 0x7369_676e_0000_0004,
            Role::Attempt => 0x6174_746d_0000_0005,
            Role::Noise => 0x6e6f_6973_0000_0006,
            Role::Rademacher => 0x7261_6465_0000_0007,
        }
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, role: Role, index: u64) -> u64 {
    mix(mix(seed ^ role.tag()).wrapping_add(index))
}

pub fn trial_seed(root: u64, trial: u64) -> u64 {
    derive(root, Role::Trial, trial)
}
