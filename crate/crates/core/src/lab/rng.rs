//! Counter-based SplitMix64 ("splitmix64-ctr").
//!
//! Draw `i` of stream `(seed, stream)` is
//!
//! ```text
//! base  = mix(seed) ^ mix(stream ^ 0xD1B54A32D192ED03)
//! x_i   = mix(base + (i + 1) * 0x9E3779B97F4A7C15)      (wrapping)
//! mix(z): z = (z ^ z>>30) * 0xBF58476D1CE4E5B9
//!         z = (z ^ z>>27) * 0x94D049BB133111EB
//!         z ^ z>>31
//! ```
//!
//! Uniform doubles use the top 53 bits: `(x >> 11) * 2^-53`. Everything is
//! plain 64-bit integer arithmetic, so any language reproduces the streams.

pub const ALGORITHM: &str = "splitmix64-ctr";

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_SALT: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct CounterRng {
    base: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            base: mix(seed) ^ mix(stream ^ STREAM_SALT),
            counter: 0,
        }
    }

    /// Value of draw `i` without advancing.
    pub fn at(&self, i: u64) -> u64 {
        mix(self.base.wrapping_add(i.wrapping_add(1).wrapping_mul(GAMMA)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let x = self.at(self.counter);
        self.counter += 1;
        x
    }

    /// Uniform on `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[a, b)`.
    pub fn uniform(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.next_f64()
    }

    /// Standard normal by Box–Muller (one value per two uniforms).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `0..n` (`n > 0`), by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Uniform point of the open simplex `{x_i >= 0, Σ x_i < 1}` in `n`
    /// dimensions (sorted uniforms, spacings).
    pub fn simplex_interior(&mut self, n: usize) -> Vec<f64> {
        let mut u: Vec<f64> = (0..n).map(|_| self.next_f64()).collect();
        u.sort_by(f64::total_cmp);
        let mut out = Vec::with_capacity(n);
        let mut prev = 0.0;
        for x in u {
            out.push(x - prev);
            prev = x;
        }
        out
    }
}
