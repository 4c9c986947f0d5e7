//! Counter-based 64-bit generator with named substreams.
//!
//! Each draw is `mix(key + counter * GOLDEN)` where `mix` is the SplitMix64
//! finalizer. A substream key is derived from the master seed and a label,
//! so streams are independent of each other's consumption: drawing more
//! pointer noise never perturbs target assignment.

use serde::{Deserialize, Serialize};

use crate::detmath;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Fixed stream labels.
pub mod streams {
    pub const COURSE: &str = "course";
    pub const SCENE: &str = "scene";
    pub const TASK: &str = "task";
    pub const REASSIGN: &str = "reassign-delay";
    pub const POINTER: &str = "pointer-noise";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamRng {
    key: u64,
    counter: u64,
}

impl StreamRng {
    pub fn substream(master_seed: u64, label: &str) -> Self {
        Self {
            key: mix64(mix64(master_seed) ^ label_hash(label)),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let x = self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN));
        self.counter = self.counter.wrapping_add(1);
        mix64(x)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]`; returns `lo` for a degenerate interval.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.next_f64();
        if hi <= lo {
            lo
        } else {
            (lo + u * (hi - lo)).min(hi)
        }
    }

    /// Unbiased integer in `[0, n)`. Panics when `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Standard normal via Box-Muller (one output per pair of uniforms).
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        detmath::sqrt(-2.0 * detmath::ln(u1)) * detmath::cos(2.0 * std::f64::consts::PI * u2)
    }

    pub fn draws(&self) -> u64 {
        self.counter
    }
}
