//! Seeded random stream used everywhere randomness is needed.
//!
//! All sampling in the crate draws from [`SeededStream`], a ChaCha8 stream
//! keyed by a `u64` seed. Uniforms come from the top 53 bits of each 64-bit
//! word and normals from Box–Muller applied to those uniforms, so a seed
//! pins every generated matrix bit-for-bit and the construction is easy to
//! replicate outside Rust.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Deterministic random stream with uniform and standard-normal draws.
pub struct SeededStream {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SeededStream {
    /// Creates a stream from a 64-bit seed.
    pub fn new(seed: u64) -> Self {
        SeededStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform draw in `[0, 1)` with 53-bit resolution.
    pub fn next_uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.rng.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform draw in the half-open interval `(lo, hi]`.
    pub fn next_uniform_open_closed(&mut self, lo: f64, hi: f64) -> f64 {
        // 1 - u lies in (0, 1], so the result can reach hi but never lo.
        lo + (hi - lo) * (1.0 - self.next_uniform())
    }

    /// Standard normal draw (Box–Muller; pairs are cached).
    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.next_uniform(); // (0, 1], keeps ln finite
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Standard lognormal draw: exp of a standard normal.
    pub fn next_standard_lognormal(&mut self) -> f64 {
        self.next_standard_normal().exp()
    }
}
