//! Complex-vector kernels shared by the rest of the crate.
//!
//! Transforms are unitary in both directions (1/sqrt(N) scaling), so
//! Parseval holds exactly and a forward/inverse pair is the identity.
//! Any length is accepted; `rustfft` picks a mixed-radix, Rader or
//! Bluestein plan depending on the factorisation of N.

use std::cell::RefCell;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

pub type C64 = Complex64;

/// An owned complex sequence (time samples or subcarrier weights).
pub type ComplexSeq = Vec<Complex64>;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Planned unitary DFT of a fixed length, reusable across calls.
#[derive(Clone)]
pub struct UnitaryDft {
    len: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for UnitaryDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryDft").field("len", &self.len).finish()
    }
}

impl UnitaryDft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return invalid("transform length must be at least 1");
        }
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(len), p.plan_fft_inverse(len))
        });
        Ok(Self {
            len,
            scale: 1.0 / (len as f64).sqrt(),
            forward,
            inverse,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// X_k = (1/sqrt(N)) sum_i x_i exp(-j 2 pi i k / N), in place.
    pub fn forward(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        self.forward.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// x_i = (1/sqrt(N)) sum_k X_k exp(+j 2 pi i k / N), in place.
    pub fn inverse(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        self.inverse.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }
}

pub fn dft_unitary(x: &[C64]) -> Result<ComplexSeq> {
    let plan = UnitaryDft::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward(&mut out);
    Ok(out)
}

pub fn idft_unitary(x: &[C64]) -> Result<ComplexSeq> {
    let plan = UnitaryDft::new(x.len())?;
    let mut out = x.to_vec();
    plan.inverse(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDirection {
    Left,
    Right,
}

/// Cyclic shift; `positions` is reduced modulo the length.
pub fn cyclic_shift(x: &[C64], positions: usize, direction: ShiftDirection) -> ComplexSeq {
    let mut out = x.to_vec();
    if out.is_empty() {
        return out;
    }
    let p = positions % out.len();
    match direction {
        ShiftDirection::Left => out.rotate_left(p),
        ShiftDirection::Right => out.rotate_right(p),
    }
    out
}

/// Direct-form linear convolution, output length `x.len() + h.len() - 1`.
pub fn linear_convolve(x: &[C64], h: &[C64]) -> Result<ComplexSeq> {
    if x.is_empty() || h.is_empty() {
        return invalid("convolution operands must be non-empty");
    }
    let mut out = vec![C64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == C64::new(0.0, 0.0) {
            continue;
        }
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    Ok(out)
}

/// Oversampled time waveform of a subcarrier weight vector: zero-pad to
/// `L*N` (zeros appended after bin N-1) and take the `L*N`-point unitary IDFT.
pub fn oversampled_waveform(weights: &[C64], oversampling: usize) -> Result<ComplexSeq> {
    if oversampling == 0 {
        return invalid("oversampling factor must be at least 1");
    }
    let mut buf = vec![C64::new(0.0, 0.0); weights.len() * oversampling];
    buf[..weights.len()].copy_from_slice(weights);
    let plan = UnitaryDft::new(buf.len())?;
    plan.inverse(&mut buf);
    Ok(buf)
}

/// Peak-to-average power ratio (dB) of a sample window.
pub fn papr_of_samples(samples: &[C64]) -> Result<f64> {
    if samples.is_empty() {
        return invalid("PAPR window is empty");
    }
    let (peak, sum) = samples.iter().fold((0.0f64, 0.0f64), |(pk, s), v| {
        let p = v.norm_sqr();
        (pk.max(p), s + p)
    });
    let mean = sum / samples.len() as f64;
    Ok(10.0 * (peak / mean).log10())
}

/// PAPR (dB) of the `oversampling`-times oversampled time signal of
/// `weights`, restricted to `window` (given in base-rate samples and
/// scaled by the oversampling factor).
pub fn papr_db(weights: &[C64], oversampling: usize, window: Range<usize>) -> Result<f64> {
    if window.is_empty() {
        return invalid("PAPR window is empty");
    }
    if window.end > weights.len() {
        return invalid(format!(
            "PAPR window end {} exceeds sequence length {}",
            window.end,
            weights.len()
        ));
    }
    let wave = oversampled_waveform(weights, oversampling)?;
    papr_of_samples(&wave[window.start * oversampling..window.end * oversampling])
}

pub fn energy(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn is_finite(x: &[C64]) -> bool {
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn direct_dft(x: &[C64], sign: f64) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, &v)| v * C64::from_polar(1.0, sign * 2.0 * PI * (i * k) as f64 / n as f64))
                    .sum::<C64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut x = vec![C64::new(0.0, 0.0); 4];
        x[0] = C64::new(1.0, 0.0);
        let spec = dft_unitary(&x).unwrap();
        for v in spec {
            assert!((v - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
        let back = idft_unitary(&[C64::new(0.5, 0.0); 4]).unwrap();
        assert!(max_diff(&back, &x) < 1e-15);
    }

    #[test]
    fn matches_direct_summation() {
        for &n in &[1usize, 7, 16, 302, 309] {
            let x = random_vec(n, n as u64);
            assert!(max_diff(&dft_unitary(&x).unwrap(), &direct_dft(&x, -1.0)) < 1e-12);
            assert!(max_diff(&idft_unitary(&x).unwrap(), &direct_dft(&x, 1.0)) < 1e-12);
        }
    }

    #[test]
    fn empty_input_rejected() {
        assert!(dft_unitary(&[]).is_err());
        assert!(idft_unitary(&[]).is_err());
        assert!(linear_convolve(&[], &[C64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn cyclic_shift_examples() {
        let v: Vec<C64> = (0..4).map(|i| C64::new(i as f64, 0.0)).collect();
        let l = cyclic_shift(&v, 1, ShiftDirection::Left);
        assert_eq!(l.iter().map(|c| c.re).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 0.0]);
        assert_eq!(cyclic_shift(&v, 4, ShiftDirection::Right), v);
        let x = random_vec(7, 3);
        for p in 0..7 {
            assert_eq!(
                cyclic_shift(&x, p, ShiftDirection::Left),
                cyclic_shift(&x, 7 - p, ShiftDirection::Right)
            );
        }
    }

    #[test]
    fn convolution_examples() {
        let one = C64::new(1.0, 0.0);
        let x = random_vec(9, 1);
        assert_eq!(linear_convolve(&x, &[one]).unwrap(), x);
        let r = linear_convolve(&[one, one], &[one, one]).unwrap();
        assert_eq!(r.iter().map(|c| c.re).collect::<Vec<_>>(), vec![1.0, 2.0, 1.0]);
        let h = random_vec(5, 2);
        let got = linear_convolve(&x, &h).unwrap();
        let mut want = vec![C64::new(0.0, 0.0); 13];
        for n in 0..13 {
            for k in 0..9 {
                if n >= k && n - k < 5 {
                    want[n] += x[k] * h[n - k];
                }
            }
        }
        assert!(max_diff(&got, &want) < 1e-12);
    }

    #[test]
    fn papr_examples() {
        // constant-modulus time samples at L = 1
        let n = 40;
        let time: Vec<C64> = (0..n).map(|i| C64::from_polar(1.0, 0.3 * (i * i) as f64)).collect();
        let spec = dft_unitary(&time).unwrap();
        assert!(papr_db(&spec, 1, 0..n).unwrap().abs() < 1e-9);

        let mut time = vec![C64::new(0.0, 0.0); 50];
        time[20] = C64::new(2.0, -1.0);
        let spec = dft_unitary(&time).unwrap();
        let got = papr_db(&spec, 1, 5..38).unwrap();
        assert!((got - 10.0 * 33f64.log10()).abs() < 1e-9);

        assert!(papr_db(&spec, 4, 7..7).is_err());
    }
}
