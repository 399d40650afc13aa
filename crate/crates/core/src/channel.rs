//! Quasi-static Rayleigh block fading with additive complex Gaussian noise.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::{axpy, CMatrix};
use crate::rng::complex_gaussian;
use crate::transmitter::TransmitSignal;

/// Noise variance per complex sample for a unit-energy `B`-bit message:
/// `Eb/N0 = 1 / (B σ²)`.
pub fn sigma2_from_ebn0(ebn0_db: f64, message_bits: usize) -> f64 {
    1.0 / (message_bits as f64 * libm::pow(10.0, ebn0_db / 10.0))
}

pub fn ebn0_from_sigma2(sigma2: f64, message_bits: usize) -> f64 {
    10.0 * libm::log10(1.0 / (message_bits as f64 * sigma2))
}

/// Fading gains `H` (`K × M`, user `k` in row `k`), i.i.d. `CN(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    gains: CMatrix,
}

impl ChannelRealization {
    pub fn draw<R: Rng + ?Sized>(users: usize, antennas: usize, rng: &mut R) -> Self {
        ChannelRealization { gains: CMatrix::from_fn(users, antennas, |_, _| complex_gaussian(rng, 1.0)) }
    }

    pub fn from_gains(gains: CMatrix) -> Self {
        ChannelRealization { gains }
    }

    pub fn gains(&self) -> &CMatrix {
        &self.gains
    }

    pub fn users(&self) -> usize {
        self.gains.rows()
    }

    pub fn antennas(&self) -> usize {
        self.gains.cols()
    }
}

/// Received block `Y` (`n × M`, row-major) with the pilot rows first.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    data: CMatrix,
    pilot_len: usize,
}

impl Observation {
    pub fn new(data: CMatrix, pilot_len: usize) -> Self {
        assert!(pilot_len <= data.rows(), "pilot longer than block");
        Observation { data, pilot_len }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn channel_uses(&self) -> usize {
        self.data.rows()
    }

    pub fn antennas(&self) -> usize {
        self.data.cols()
    }

    pub fn pilot_len(&self) -> usize {
        self.pilot_len
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        self.data.row(r)
    }

    /// Rows `0..n_p`, flattened.
    pub fn pilot_rows(&self) -> &[Complex64] {
        &self.data.as_slice()[..self.pilot_len * self.antennas()]
    }

    /// Rows `n_p..n`, flattened.
    pub fn payload_rows(&self) -> &[Complex64] {
        &self.data.as_slice()[self.pilot_len * self.antennas()..]
    }

    pub fn energy(&self) -> f64 {
        self.data.energy()
    }
}

/// `Y = Σ_k x_k h_k^T` without noise.
///
/// # Panics
/// If the number of signals differs from the users in `channel`, or the
/// signals differ in length.
pub fn superimpose(signals: &[&[Complex64]], channel: &CMatrix, pilot_len: usize) -> Observation {
    assert_eq!(signals.len(), channel.rows(), "one channel row per signal");
    let n = signals.first().map_or(0, |s| s.len());
    let m = channel.cols();
    let mut y = CMatrix::zeros(n, m);
    for (k, x) in signals.iter().enumerate() {
        assert_eq!(x.len(), n, "signal length");
        let h = channel.row(k);
        for (r, &xr) in x.iter().enumerate() {
            axpy(y.row_mut(r), xr, h);
        }
    }
    Observation::new(y, pilot_len)
}

/// Adds i.i.d. `CN(0, σ²)` noise drawn row by row.
pub fn add_noise<R: Rng + ?Sized>(y: &mut Observation, sigma2: f64, rng: &mut R) {
    for z in y.data.as_mut_slice() {
        *z += complex_gaussian(rng, sigma2);
    }
}

/// One channel block: superposition through `channel` plus noise.
pub fn transmit<R: Rng + ?Sized>(
    signals: &[TransmitSignal],
    channel: &ChannelRealization,
    sigma2: f64,
    noise_rng: &mut R,
) -> Observation {
    let pilot_len = signals.first().map_or(0, |s| s.pilot().len());
    let views: Vec<&[Complex64]> = signals.iter().map(|s| s.samples()).collect();
    let mut y = superimpose(&views, channel.gains(), pilot_len);
    add_noise(&mut y, sigma2, noise_rng);
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn noise_variance_convention() {
        // -12.05 dB at B = 100.
        assert!((sigma2_from_ebn0(-12.05, 100) - 0.160_324).abs() < 1e-5);
        assert!((sigma2_from_ebn0(0.0, 100) - 0.01).abs() < 1e-15);
        assert!((ebn0_from_sigma2(sigma2_from_ebn0(-11.3, 100), 100) + 11.3).abs() < 1e-12);
    }

    #[test]
    fn superposition_is_linear_and_matches_outer_products() {
        let mut rng = stream(3, Stream::Fading);
        let h = ChannelRealization::draw(3, 4, &mut rng);
        let x: Vec<Vec<Complex64>> =
            (0..3).map(|_| (0..6).map(|_| complex_gaussian(&mut rng, 1.0)).collect()).collect();
        let views: Vec<&[Complex64]> = x.iter().map(|v| v.as_slice()).collect();
        let y = superimpose(&views, h.gains(), 2);
        for r in 0..6 {
            for m in 0..4 {
                let direct: Complex64 = (0..3).map(|k| x[k][r] * h.gains()[(k, m)]).sum();
                assert!((y.matrix()[(r, m)] - direct).norm() < 1e-12);
            }
        }
        assert_eq!(y.pilot_rows().len(), 8);
        assert_eq!(y.payload_rows().len(), 16);
    }

    #[test]
    fn fading_and_noise_statistics() {
        let mut rng = stream(4, Stream::Fading);
        let h = ChannelRealization::draw(200, 500, &mut rng);
        let p = h.gains().energy() / 100_000.0;
        assert!((p - 1.0).abs() < 0.02, "{p}");
        let mut y = Observation::new(CMatrix::zeros(1000, 100), 10);
        add_noise(&mut y, 0.25, &mut stream(4, Stream::Noise));
        let v = y.energy() / 100_000.0;
        assert!((v - 0.25).abs() < 0.005, "{v}");
    }

    #[test]
    fn empty_block() {
        let h = ChannelRealization::from_gains(CMatrix::zeros(0, 3));
        let y = transmit(&[], &h, 1.0, &mut stream(0, Stream::Noise));
        assert_eq!(y.channel_uses(), 0);
    }
}
