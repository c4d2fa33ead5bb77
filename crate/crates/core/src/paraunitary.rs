//! Closed-form pulse sets with exactly flat total spectral power.
//!
//! The `P x P` polyphase matrix of the pulse set is built as
//! `S(z) = scale * prod_l (I - v_l v_l^H + z^-1 v_l v_l^H) * V`, which is
//! paraunitary for any unitary `V` and unit vectors `v_l`. Reading the
//! polyphase components back into time samples gives `P` pulses whose
//! powers sum to the same value on every subcarrier.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cod::{design_for, place_pulses};
use crate::dsp::{dft_unitary, ComplexSeq, C64};
use crate::error::{invalid, Error, Result};
use crate::layout::Layout;
use crate::waveform::WaveformSet;

const MAGIC: &[u8; 8] = b"CPOFDMF1";

#[derive(Debug, Clone, PartialEq)]
pub struct ParaunitaryFactors {
    pub order: usize,
    pub unitary: DMatrix<C64>,
    pub vectors: Vec<DVector<C64>>,
    pub scale: f64,
}

/// Number of degree-one factors that fit in a non-zero length of `nonzero_len`.
pub fn factor_count(order: usize, nonzero_len: usize) -> usize {
    (nonzero_len - order) / order
}

/// Per-coefficient scale giving `sum_p |S_k^(p)|^2 = 1/(N T)` and pulse
/// energy `1/(T P)`.
pub fn default_scale(subcarriers: usize, num_tx: usize, order: usize) -> f64 {
    1.0 / ((subcarriers * num_tx * order) as f64).sqrt()
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

impl ParaunitaryFactors {
    pub fn new(unitary: DMatrix<C64>, vectors: Vec<DVector<C64>>, scale: f64) -> Result<Self> {
        let order = unitary.nrows();
        if order == 0 || unitary.ncols() != order {
            return invalid("unitary factor must be square and non-empty");
        }
        let dev = (&unitary * unitary.adjoint() - DMatrix::identity(order, order)).norm();
        if dev > 1e-9 {
            return invalid(format!("constant factor is not unitary (deviation {dev:.3e})"));
        }
        for (l, v) in vectors.iter().enumerate() {
            if v.len() != order {
                return invalid(format!("vector {l} has length {}, expected {order}", v.len()));
            }
            if (v.norm() - 1.0).abs() > 1e-9 {
                return invalid(format!("vector {l} does not have unit norm"));
            }
        }
        Ok(Self { order, unitary, vectors, scale })
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.order as u32).to_le_bytes())?;
        w.write_all(&(self.vectors.len() as u32).to_le_bytes())?;
        w.write_all(&self.scale.to_le_bytes())?;
        for c in self.unitary.iter().chain(self.vectors.iter().flat_map(|v| v.iter())) {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a paraunitary factor container".into()));
        }
        let mut u = [0u8; 4];
        r.read_exact(&mut u)?;
        let order = u32::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let count = u32::from_le_bytes(u) as usize;
        let mut f = [0u8; 8];
        r.read_exact(&mut f)?;
        let scale = f64::from_le_bytes(f);
        let mut next = || -> Result<C64> {
            let mut b = [0u8; 16];
            r.read_exact(&mut b)?;
            Ok(C64::new(
                f64::from_le_bytes(b[..8].try_into().unwrap()),
                f64::from_le_bytes(b[8..].try_into().unwrap()),
            ))
        };
        let mut data = Vec::with_capacity(order * order);
        for _ in 0..order * order {
            data.push(next()?);
        }
        let unitary = DMatrix::from_vec(order, order, data);
        let mut vectors = Vec::with_capacity(count);
        for _ in 0..count {
            let mut v = Vec::with_capacity(order);
            for _ in 0..order {
                v.push(next()?);
            }
            vectors.push(DVector::from_vec(v));
        }
        Self::new(unitary, vectors, scale)
    }
}

/// Seeded factors: `V` from a QR-orthonormalised complex Gaussian matrix
/// (column phases fixed by the diagonal of `R`), each `v_l` a normalised
/// complex Gaussian vector. `floor((N_t - P)/P)` vectors are drawn.
pub fn random_factors(order: usize, nonzero_len: usize, subcarriers: usize, num_tx: usize, seed: u64) -> Result<ParaunitaryFactors> {
    if order == 0 {
        return invalid("filterbank order must be at least 1");
    }
    if nonzero_len < order {
        return invalid(format!("non-zero length {nonzero_len} is shorter than the order {order}"));
    }
    if num_tx == 0 || subcarriers == 0 {
        return invalid("transmitter and subcarrier counts must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(order, order, |_, _| gaussian(&mut rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for c in 0..order {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(c);
        col *= phase;
    }
    let vectors = (0..factor_count(order, nonzero_len))
        .map(|_| {
            let v = DVector::from_fn(order, |_, _| gaussian(&mut rng));
            let n = v.norm();
            v / C64::new(n, 0.0)
        })
        .collect();
    ParaunitaryFactors::new(q, vectors, default_scale(subcarriers, num_tx, order))
}

/// `S(z) = sum_d coeffs[d] z^-d`; rows index pulses, columns polyphase phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyphaseMatrix {
    pub coeffs: Vec<DMatrix<C64>>,
}

impl PolyphaseMatrix {
    pub fn order(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn evaluate(&self, z: C64) -> DMatrix<C64> {
        let zinv = z.inv();
        let mut acc = DMatrix::zeros(self.order(), self.order());
        let mut pow = C64::new(1.0, 0.0);
        for c in &self.coeffs {
            acc += c * pow;
            pow *= zinv;
        }
        acc
    }
}

/// Expands the factor product into explicit polynomial coefficients.
pub fn synthesize_polyphase(f: &ParaunitaryFactors) -> PolyphaseMatrix {
    let p = f.order;
    let mut acc: Vec<DMatrix<C64>> = vec![DMatrix::identity(p, p)];
    for v in &f.vectors {
        let proj = v * v.adjoint();
        let keep = DMatrix::identity(p, p) - &proj;
        let mut next = vec![DMatrix::zeros(p, p); acc.len() + 1];
        for (d, a) in acc.iter().enumerate() {
            next[d] += a * &keep;
            next[d + 1] += a * &proj;
        }
        acc = next;
    }
    let scale = C64::new(f.scale, 0.0);
    PolyphaseMatrix {
        coeffs: acc.into_iter().map(|a| a * &f.unitary * scale).collect(),
    }
}

/// Maps the polyphase matrix to `P` frequency-domain pulses of length `N`:
/// `s^(p)[first + P i + q] = sqrt(N) * coeffs[i][(p, q)]`, zero elsewhere.
pub fn polyphase_to_pulses(pm: &PolyphaseMatrix, layout: Layout) -> Result<Vec<ComplexSeq>> {
    let n = layout.subcarriers;
    let p = pm.order();
    let first = layout.cp_len();
    let span = p * (pm.degree() + 1);
    let last_allowed = n.checked_sub(first).filter(|&l| l >= first);
    let Some(last_allowed) = last_allowed else {
        return invalid(format!("layout leaves no non-zero samples (first index {first}, N = {n})"));
    };
    if first + span - 1 > last_allowed {
        return invalid(format!(
            "polyphase support {span} samples starting at {first} ends at {} > N - cp_len = {last_allowed}",
            first + span - 1
        ));
    }
    let root_n = (n as f64).sqrt();
    (0..p)
        .map(|row| {
            let mut t = vec![C64::new(0.0, 0.0); n];
            for (i, c) in pm.coeffs.iter().enumerate() {
                for q in 0..p {
                    t[first + p * i + q] = c[(row, q)] * root_n;
                }
            }
            dft_unitary(&t)
        })
        .collect()
}

/// Convenience: seeded factors through to frequency-domain pulses.
pub fn paraunitary_pulses(order: usize, layout: Layout, num_tx: usize, seed: u64) -> Result<Vec<ComplexSeq>> {
    let f = random_factors(order, layout.nonzero_len(), layout.subcarriers, num_tx, seed)?;
    polyphase_to_pulses(&synthesize_polyphase(&f), layout)
}

/// Paraunitary base pulses placed on the orthogonal design for `num_tx`.
pub fn paraunitary_set(layout: Layout, num_tx: usize, seed: u64) -> Result<WaveformSet> {
    let design = design_for(num_tx)?;
    let base = paraunitary_pulses(design.num_vars(), layout, num_tx, seed)?;
    place_pulses(&design, layout, &base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn random_factors_are_valid_and_deterministic() {
        let a = random_factors(4, 33, 302, 2, 7).unwrap();
        let b = random_factors(4, 33, 302, 2, 7).unwrap();
        assert_eq!(a, b);
        assert!((&a.unitary * a.unitary.adjoint() - DMatrix::identity(4, 4)).norm() < 1e-12);
        assert_eq!(a.vectors.len(), 7);
        for v in &a.vectors {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(random_factors(4, 3, 302, 2, 7).is_err());
    }

    #[test]
    fn order_one_factor_count() {
        for nt in 1..6 {
            let f = random_factors(1, nt, 16, 1, 3).unwrap();
            assert_eq!(f.vectors.len(), nt - 1);
            assert!((f.unitary[(0, 0)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_product_is_constant() {
        let f = ParaunitaryFactors::new(DMatrix::identity(3, 3), vec![], 0.5).unwrap();
        let pm = synthesize_polyphase(&f);
        assert_eq!(pm.degree(), 0);
        assert_eq!(pm.coeffs[0], DMatrix::identity(3, 3) * C64::new(0.5, 0.0));
    }

    #[test]
    fn single_factor_hand_expansion() {
        let v = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let f = ParaunitaryFactors::new(DMatrix::identity(2, 2), vec![v], 0.25).unwrap();
        let pm = synthesize_polyphase(&f);
        let s = C64::new(0.25, 0.0);
        let zero = C64::new(0.0, 0.0);
        assert_eq!(pm.coeffs[0], DMatrix::from_row_slice(2, 2, &[zero, zero, zero, s]));
        assert_eq!(pm.coeffs[1], DMatrix::from_row_slice(2, 2, &[s, zero, zero, zero]));
    }

    #[test]
    fn paraunitary_on_unit_circle() {
        let f = random_factors(3, 40, 309, 2, 11).unwrap();
        let pm = synthesize_polyphase(&f);
        let c = f.scale * f.scale;
        for i in 0..64 {
            let z = C64::from_polar(1.0, 2.0 * PI * i as f64 / 64.0);
            let s = pm.evaluate(z);
            let g = &s * s.adjoint();
            assert!((g - DMatrix::identity(3, 3) * C64::new(c, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_identity_gives_impulses() {
        let layout = Layout::new(40, 4, 2).unwrap();
        let f = ParaunitaryFactors::new(DMatrix::identity(2, 2), vec![], 0.3).unwrap();
        let pulses = polyphase_to_pulses(&synthesize_polyphase(&f), layout).unwrap();
        for (q, pulse) in pulses.iter().enumerate() {
            let t = crate::dsp::idft_unitary(pulse).unwrap();
            for (i, v) in t.iter().enumerate() {
                let want = if i == layout.cp_len() + q { 0.3 * 40f64.sqrt() } else { 0.0 };
                assert!((v.re - want).abs() < 1e-12 && v.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn support_stays_inside_window() {
        // N = 64, first non-zero index 10 -> support [10, 54]
        let layout = Layout::new(64, 8, 3).unwrap();
        assert_eq!(layout.cp_len(), 10);
        let pulses = paraunitary_pulses(2, layout, 1, 4).unwrap();
        for pulse in &pulses {
            let t = crate::dsp::idft_unitary(pulse).unwrap();
            for (i, v) in t.iter().enumerate() {
                if !(10..=54).contains(&i) {
                    assert!(v.norm() < 1e-13, "sample {i} = {v}");
                }
            }
        }
    }

    #[test]
    fn pulses_match_polyphase_evaluation() {
        // S^(p)(W_k) = W_k^-first sum_q W_k^-q S_q^(p)(W_k^P), with the 1/sqrt(N)
        // of the polyphase definition folded into the coefficients.
        let layout = Layout::new(50, 5, 3).unwrap();
        let f = random_factors(2, layout.nonzero_len(), 50, 2, 9).unwrap();
        let pm = synthesize_polyphase(&f);
        let pulses = polyphase_to_pulses(&pm, layout).unwrap();
        for k in 0..50 {
            let w = C64::from_polar(1.0, 2.0 * PI * k as f64 / 50.0);
            let poly = pm.evaluate(w.powu(2));
            for (p, pulse) in pulses.iter().enumerate() {
                let mut v = C64::new(0.0, 0.0);
                for q in 0..2 {
                    v += w.powi(-(q as i32)) * poly[(p, q)];
                }
                v *= w.powi(-(layout.cp_len() as i32));
                assert!((v - pulse[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_total_power() {
        let layout = Layout::new(302, 96, 40).unwrap();
        for order in [2, 4] {
            let pulses = paraunitary_pulses(order, layout, 2, 1).unwrap();
            for k in 0..302 {
                let total: f64 = pulses.iter().map(|s| s[k].norm_sqr()).sum();
                assert!((total - 1.0 / 604.0).abs() < 1e-12);
            }
            for s in &pulses {
                assert!((crate::dsp::energy(s) - 1.0 / (2.0 * order as f64)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn overflowing_support_rejected() {
        let layout = Layout::new(64, 8, 3).unwrap();
        let v = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let f = ParaunitaryFactors::new(DMatrix::identity(2, 2), vec![v; 30], 0.1).unwrap();
        let err = polyphase_to_pulses(&synthesize_polyphase(&f), layout).unwrap_err();
        assert!(err.to_string().contains("N - cp_len"));
    }

    #[test]
    fn factor_container_round_trip() {
        let f = random_factors(3, 40, 309, 2, 2).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(ParaunitaryFactors::read_binary(buf.as_slice()).unwrap(), f);
    }
}
