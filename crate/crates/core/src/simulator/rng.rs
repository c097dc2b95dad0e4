//! The simulator's noise source, fixed so any implementation can reproduce
//! a stream bit for bit.
//!
//! * seeding: `state = splitmix64(seed)`, replaced by `0x9E3779B97F4A7C15`
//!   if that yields zero;
//! * step (xorshift64*): `x ^= x >> 12; x ^= x << 25; x ^= x >> 27;`
//!   output `x * 0x2545F4914F6CDD1D` (wrapping);
//! * uniform in `(0, 1]`: `((out >> 11) + 1) * 2^-53`;
//! * normal: Box-Muller on two consecutive uniforms `u1, u2`,
//!   `sqrt(-2 ln u1) * cos(2π u2)`; the sine branch is discarded.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let s = splitmix64(seed);
        Self { state: if s == 0 { GOLDEN } else { s } }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn gaussian(&mut self, std: f64) -> f64 {
        if std == 0.0 {
            0.0
        } else {
            std * self.normal()
        }
    }
}
