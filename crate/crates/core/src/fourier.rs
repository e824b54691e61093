//! Centered, unitary discrete Fourier transforms.
//!
//! Sample `j` of an axis sits at `x_j = (j − n/2)·dx` and sample `m` of its
//! conjugate at `k_m = (m − n/2)·dk` with `dk = 2π/(n·dx)`. Arrays are always
//! stored in this physical order; the half-length rotation that maps it onto
//! the FFT order happens only around the transform call.
//!
//! Forward: `F[m] = n^{-1/2} Σ_j f[j] exp(−i k_m x_j)`.
//! Inverse: `f[j] = n^{-1/2} Σ_m F[m] exp(+i k_m x_j)`.

use std::sync::Arc;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// x → k, kernel `exp(−i k x)`.
    Forward,
    /// k → x, kernel `exp(+i k x)`.
    Inverse,
}

/// A planned centered transform of a fixed length.
#[derive(Clone)]
pub struct CenteredDft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for CenteredDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CenteredDft").field("n", &self.n).finish()
    }
}

impl CenteredDft {
    /// `n` must be even so the zero sample sits at index `n/2`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2 && n % 2 == 0, "centered DFT length must be even, got {n}");
        let mut planner = FftPlanner::new();
        CenteredDft {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn process(&self, data: &mut [Complex64], direction: Direction) {
        assert_eq!(data.len(), self.n);
        let half = self.n / 2;
        // For even n the forward and inverse shifts are the same rotation.
        data.rotate_left(half);
        match direction {
            Direction::Forward => self.forward.process(data),
            Direction::Inverse => self.inverse.process(data),
        }
        data.rotate_left(half);
        for v in data.iter_mut() {
            *v *= self.scale;
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.process(data, Direction::Forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.process(data, Direction::Inverse);
    }
}

/// Transforms every lane of `field` along `axis` (0 = rows index, i.e. the
/// signal axis; 1 = the idler axis). Lanes are independent, so the result does
/// not depend on how rayon schedules them.
pub fn transform_axis(field: &mut Array2<Complex64>, axis: usize, direction: Direction) {
    let n = field.len_of(Axis(axis));
    let dft = CenteredDft::new(n);
    // Lanes along `axis` are obtained by iterating over the other axis.
    let other = Axis(1 - axis);
    field.axis_iter_mut(other).into_par_iter().for_each_init(
        || vec![Complex64::new(0.0, 0.0); n],
        |buf, mut lane| {
            if let Some(slice) = lane.as_slice_mut() {
                dft.process(slice, direction);
            } else {
                for (b, v) in buf.iter_mut().zip(lane.iter()) {
                    *b = *v;
                }
                dft.process(buf, direction);
                for (v, b) in lane.iter_mut().zip(buf.iter()) {
                    *v = *b;
                }
            }
        },
    );
}

/// Two-dimensional transform (both axes).
pub fn transform_2d(field: &mut Array2<Complex64>, direction: Direction) {
    transform_axis(field, 0, direction);
    transform_axis(field, 1, direction);
}

/// Squared L2 norm with a fixed summation order.
pub fn norm_sqr(values: impl IntoIterator<Item = Complex64>) -> f64 {
    pairwise_sum(&values.into_iter().map(|v| v.norm_sqr()).collect::<Vec<_>>())
}

/// Pairwise (tree-ordered) summation; the order depends only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn direct_dft(f: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = f.len();
        let h = (n / 2) as f64;
        (0..n)
            .map(|m| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, v) in f.iter().enumerate() {
                    let phase = sign * 2.0 * PI * (m as f64 - h) * (j as f64 - h) / n as f64;
                    acc += v * Complex64::from_polar(1.0, phase);
                }
                acc / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn matches_direct_centered_sum() {
        let n = 64;
        let f: Vec<Complex64> =
            (0..n).map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos())).collect();
        let mut fw = f.clone();
        CenteredDft::new(n).forward(&mut fw);
        let expected = direct_dft(&f, -1.0);
        for (a, b) in fw.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut inv = f.clone();
        CenteredDft::new(n).inverse(&mut inv);
        let expected = direct_dft(&f, 1.0);
        for (a, b) in inv.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn centered_gaussian_maps_to_real_gaussian() {
        let n = 256;
        let dx = 0.1;
        let mut f: Vec<Complex64> = (0..n)
            .map(|j| {
                let x = (j as f64 - (n / 2) as f64) * dx;
                Complex64::new((-x * x / 2.0).exp(), 0.0)
            })
            .collect();
        CenteredDft::new(n).forward(&mut f);
        // A centered real even input has a real even spectrum.
        for m in 1..n / 2 {
            assert!(f[n / 2 + m].im.abs() < 1e-12);
            assert!((f[n / 2 + m] - f[n / 2 - m]).norm() < 1e-12);
        }
        assert!(f[n / 2].re > 0.0);
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(seed in proptest::collection::vec(-1.0f64..1.0, 2 * 128)) {
            let f: Vec<Complex64> = seed.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
            let dft = CenteredDft::new(f.len());
            let mut g = f.clone();
            dft.forward(&mut g);
            let n0 = norm_sqr(f.iter().copied());
            let n1 = norm_sqr(g.iter().copied());
            prop_assert!((n0 - n1).abs() <= 1e-12 * n0.max(1e-300));
            dft.inverse(&mut g);
            let scale = n0.sqrt();
            for (a, b) in f.iter().zip(&g) {
                prop_assert!((a - b).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn axis_transforms_match_per_lane_transforms() {
        let (ns, ni) = (8, 16);
        let mut field = Array2::from_shape_fn((ns, ni), |(i, j)| {
            Complex64::new((i * 3 + j) as f64 % 5.0, (i + 2 * j) as f64 % 3.0)
        });
        let orig = field.clone();
        transform_axis(&mut field, 0, Direction::Forward);
        let dft = CenteredDft::new(ns);
        for j in 0..ni {
            let mut col: Vec<_> = orig.column(j).to_vec();
            dft.forward(&mut col);
            for i in 0..ns {
                assert!((col[i] - field[[i, j]]).norm() < 1e-12);
            }
        }
        transform_axis(&mut field, 0, Direction::Inverse);
        transform_2d(&mut field, Direction::Forward);
        transform_2d(&mut field, Direction::Inverse);
        for (a, b) in field.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let v = vec![0.1; 10_000];
        assert!((pairwise_sum(&v) - 1000.0).abs() < 1e-10);
    }
}
