//! Seeded value-noise textures.

/// Two-octave value noise: random lattice values blended with a smoothstep,
/// mapped to roughly `[40, 215]`. Continuous in `(x, y)`, so sub-pixel camera
/// motion renders without resampling artifacts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueNoise {
    seed: u64,
    scale: f64,
}

impl ValueNoise {
    pub fn new(seed: u64, scale: f64) -> Self {
        assert!(scale > 0.0, "texture scale must be positive");
        Self { seed, scale }
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let coarse = self.octave(x / self.scale, y / self.scale, 0);
        let fine = self.octave(2.0 * x / self.scale, 2.0 * y / self.scale, 1);
        40.0 + 175.0 * (0.65 * coarse + 0.35 * fine)
    }

    fn octave(&self, x: f64, y: f64, octave: u64) -> f64 {
        let (xf, yf) = (x.floor(), y.floor());
        let (ix, iy) = (xf as i64, yf as i64);
        let (fx, fy) = (smooth(x - xf), smooth(y - yf));
        let v = |dx: i64, dy: i64| self.lattice(ix + dx, iy + dy, octave);
        let top = v(0, 0) * (1.0 - fx) + v(1, 0) * fx;
        let bot = v(0, 1) * (1.0 - fx) + v(1, 1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    fn lattice(&self, ix: i64, iy: i64, octave: u64) -> f64 {
        let mut h = self.seed ^ octave.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        h ^= (ix as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = mix(h);
        h ^= (iy as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = mix(h);
        (h >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_bounded_and_continuous() {
        let a = ValueNoise::new(3, 12.0);
        let b = ValueNoise::new(3, 12.0);
        let c = ValueNoise::new(4, 12.0);
        let mut differs = false;
        for i in 0..500 {
            let (x, y) = (i as f64 * 1.37, i as f64 * 0.71 - 40.0);
            let v = a.sample(x, y);
            assert_eq!(v, b.sample(x, y));
            assert!((40.0..=215.0).contains(&v));
            assert!((v - a.sample(x + 1e-6, y)).abs() < 1e-3);
            differs |= v != c.sample(x, y);
        }
        assert!(differs);
    }
}
