//! Deterministic random streams for simulations and tests.
//!
//! Output files must be bitwise reproducible for a fixed seed, independent of
//! crate versions and thread scheduling, so the generator and the Poisson
//! sampler live here instead of behind an external dependency. Streams are
//! derived from (seed, stream index) counters so parallel workers draw
//! identical values regardless of execution order.

use num_complex::Complex64;

use crate::linalg::StateVector;

/// SplitMix64: tiny, fast, passes BigCrush; fine for noise synthesis.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for worker `index` under a campaign `seed`.
    pub fn stream(seed: u64, index: u64) -> Self {
        let mut rng = Self::new(seed ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        // Scramble so nearby (seed, index) pairs decorrelate immediately.
        rng.next_u64();
        rng.next_u64();
        rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Poisson draw by inversion, searching outward from the mode.
    ///
    /// Exact for any finite mean (expected cost O(sqrt(mean))); extreme means
    /// fall back to a rounded Gaussian where the discreteness is irrelevant.
    pub fn next_poisson(&mut self, mean: f64) -> u64 {
        assert!(mean.is_finite() && mean >= 0.0, "poisson mean must be finite and >= 0");
        if mean == 0.0 {
            return 0;
        }
        if mean > 1e7 {
            let draw = mean + mean.sqrt() * self.next_gaussian();
            return draw.round().max(0.0) as u64;
        }
        let mode = mean.floor();
        let ln_p_mode = mode * mean.ln() - mean - ln_factorial(mode as u64);
        let p_mode = ln_p_mode.exp();

        let u = self.next_f64();
        let mut acc = p_mode;
        if u < acc {
            return mode as u64;
        }
        // Walk outward from the mode, alternating sides while both remain.
        let mut p_up = p_mode;
        let mut k_up = mode;
        let mut p_down = p_mode;
        let mut k_down = mode;
        loop {
            let advanced_up = {
                p_up *= mean / (k_up + 1.0);
                k_up += 1.0;
                acc += p_up;
                if u < acc {
                    return k_up as u64;
                }
                p_up > 0.0
            };
            let advanced_down = if k_down >= 1.0 {
                p_down *= k_down / mean;
                k_down -= 1.0;
                acc += p_down;
                if u < acc {
                    return k_down as u64;
                }
                p_down > 0.0
            } else {
                false
            };
            if !advanced_up && !advanced_down {
                // Accumulated mass ~1 up to roundoff; return the mode.
                return mode as u64;
            }
        }
    }

    /// Haar-ish random pure state: complex Gaussian amplitudes, normalized.
    pub fn next_state(&mut self, dim: usize) -> StateVector {
        let amplitudes: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(self.next_gaussian(), self.next_gaussian()))
            .collect();
        StateVector::new(amplitudes).expect("gaussian amplitudes are finite and nonzero")
    }
}

/// ln(k!) — exact table for small k, Stirling series beyond.
fn ln_factorial(k: u64) -> f64 {
    const TABLE: [f64; 21] = [
        0.0,
        0.0,
        std::f64::consts::LN_2,
        1.791_759_469_228_055,
        3.178_053_830_347_946,
        4.787_491_742_782_046,
        6.579_251_212_010_101,
        8.525_161_361_065_415,
        10.604_602_902_745_25,
        12.801_827_480_081_469,
        15.104_412_573_075_516,
        17.502_307_845_873_887,
        19.987_214_495_661_885,
        22.552_163_853_123_42,
        25.191_221_182_738_68,
        27.899_271_383_840_89,
        30.671_860_106_080_675,
        33.505_073_450_136_89,
        36.395_445_208_033_05,
        39.339_884_187_199_495,
        42.335_616_460_753_485,
    ];
    if k <= 20 {
        return TABLE[k as usize];
    }
    let n = k as f64;
    let n2 = n * n;
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    (n + 0.5) * n.ln() - n + 0.5 * ln_2pi + 1.0 / (12.0 * n) - 1.0 / (360.0 * n * n2)
        + 1.0 / (1260.0 * n * n2 * n2)
        - 1.0 / (1680.0 * n * n2 * n2 * n2)
}
