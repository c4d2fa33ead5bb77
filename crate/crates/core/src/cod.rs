//! Complex orthogonal designs and pulse placement across transmitters.
//!
//! A design `X` (transmitters x pulse slots) with entries in
//! `{0, +-x_i, +-conj(x_i)}` satisfies `X X^H = (sum |x_i|^2) I`. Using the
//! per-subcarrier weights of the first transmitter as the variables makes
//! every subcarrier matrix `S_k` flat-unitary, independent of any delays.

use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::{idft_unitary, ComplexSeq, C64};
use crate::error::{invalid, Result};
use crate::layout::Layout;
use crate::waveform::WaveformSet;

/// Absolute tolerance for the zero head/tail check on base pulses.
pub const ZERO_CONDITION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entry {
    Zero,
    /// `+-x_var` or `+-conj(x_var)`; `var` is 0-based.
    Term { var: usize, negated: bool, conjugated: bool },
}

impl Entry {
    const fn var(var: usize) -> Self {
        Entry::Term { var, negated: false, conjugated: false }
    }
    const fn neg(var: usize) -> Self {
        Entry::Term { var, negated: true, conjugated: false }
    }
    const fn conj(var: usize) -> Self {
        Entry::Term { var, negated: false, conjugated: true }
    }
    const fn neg_conj(var: usize) -> Self {
        Entry::Term { var, negated: true, conjugated: true }
    }

    pub fn apply(&self, x: &[C64]) -> C64 {
        match *self {
            Entry::Zero => C64::new(0.0, 0.0),
            Entry::Term { var, negated, conjugated } => {
                let v = if conjugated { x[var].conj() } else { x[var] };
                if negated {
                    -v
                } else {
                    v
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthogonalDesign {
    rows: usize,
    cols: usize,
    num_vars: usize,
    entries: Vec<Entry>,
}

impl OrthogonalDesign {
    /// Validates shape and that every row uses each variable exactly once.
    /// The orthogonality identity itself is checked by [`verify_cod`].
    pub fn new(rows: usize, cols: usize, num_vars: usize, entries: Vec<Entry>) -> Result<Self> {
        if rows == 0 || cols == 0 || num_vars == 0 {
            return invalid("design dimensions must be positive");
        }
        if entries.len() != rows * cols {
            return invalid(format!("expected {} entries, got {}", rows * cols, entries.len()));
        }
        for r in 0..rows {
            let mut seen = vec![0usize; num_vars];
            for e in &entries[r * cols..(r + 1) * cols] {
                if let Entry::Term { var, .. } = *e {
                    if var >= num_vars {
                        return invalid(format!("row {r} references variable {var} >= {num_vars}"));
                    }
                    seen[var] += 1;
                }
            }
            if let Some(v) = seen.iter().position(|&c| c != 1) {
                return invalid(format!(
                    "row {r} uses variable {v} {} times; each must appear exactly once",
                    seen[v]
                ));
            }
        }
        Ok(Self { rows, cols, num_vars, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn entry(&self, row: usize, col: usize) -> Entry {
        self.entries[row * self.cols + col]
    }

    /// Returns a copy with a single row kept out, e.g. a 3-transmitter
    /// design from the 4x4 one.
    pub fn without_row(&self, row: usize) -> Result<Self> {
        if row >= self.rows || self.rows == 1 {
            return invalid("cannot remove that row");
        }
        let entries = (0..self.rows)
            .filter(|&r| r != row)
            .flat_map(|r| self.entries[r * self.cols..(r + 1) * self.cols].iter().copied())
            .collect();
        Self::new(self.rows - 1, self.cols, self.num_vars, entries)
    }

    /// Numeric matrix for one assignment of the variables.
    pub fn evaluate(&self, x: &[C64]) -> DMatrix<C64> {
        assert_eq!(x.len(), self.num_vars, "assignment length mismatch");
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.entry(r, c).apply(x))
    }

    /// Column of the first row holding each variable (where transmitter 1
    /// sends the corresponding base pulse as-is).
    pub fn base_columns(&self) -> Vec<usize> {
        let mut cols = vec![usize::MAX; self.num_vars];
        for c in 0..self.cols {
            if let Entry::Term { var, .. } = self.entry(0, c) {
                cols[var] = c;
            }
        }
        cols
    }
}

/// 1x1 design for a single transmitter.
pub fn trivial_design() -> OrthogonalDesign {
    OrthogonalDesign::new(1, 1, 1, vec![Entry::var(0)]).expect("static design")
}

/// `[[x1, x2], [-x2*, x1*]]`.
pub fn alamouti_design() -> OrthogonalDesign {
    OrthogonalDesign::new(
        2,
        2,
        2,
        vec![Entry::var(0), Entry::var(1), Entry::neg_conj(1), Entry::conj(0)],
    )
    .expect("static design")
}

/// The rate-3/4 design for four transmitters with one structural zero per row.
#[rustfmt::skip]
pub fn cod4_design() -> OrthogonalDesign {
    use Entry::Zero;
    OrthogonalDesign::new(
        4,
        4,
        3,
        vec![
            Entry::var(0), Entry::var(1), Entry::var(2), Zero,
            Entry::neg_conj(1), Entry::conj(0), Zero, Entry::var(2),
            Entry::neg_conj(2), Zero, Entry::conj(0), Entry::neg(1),
            Zero, Entry::neg_conj(2), Entry::conj(1), Entry::var(0),
        ],
    )
    .expect("static design")
}

/// Shipped design for 1 to 4 transmitters; three transmitters use the
/// four-transmitter design with its last row removed.
pub fn design_for(num_tx: usize) -> Result<OrthogonalDesign> {
    match num_tx {
        1 => Ok(trivial_design()),
        2 => Ok(alamouti_design()),
        3 => cod4_design().without_row(3),
        4 => Ok(cod4_design()),
        0 => invalid("transmitter count must be at least 1"),
        _ => invalid(format!("no orthogonal design shipped for {num_tx} transmitters (1..=4 supported)")),
    }
}

/// Achievable rate `P0/P = (ceil(T/2) + 1) / (2 ceil(T/2))`, 1 for a single transmitter.
pub fn cod_rate(num_tx: usize) -> Result<Ratio<u64>> {
    match num_tx {
        0 => invalid("transmitter count must be at least 1"),
        1 => Ok(Ratio::from_integer(1)),
        t => {
            let h = t.div_ceil(2) as u64;
            Ok(Ratio::new(h + 1, 2 * h))
        }
    }
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Largest Frobenius deviation `||X X^H - (sum |x_i|^2) I||` over `trials`
/// random complex Gaussian assignments.
pub fn verify_cod(design: &OrthogonalDesign, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials.max(1) {
        let x: Vec<C64> = (0..design.num_vars).map(|_| complex_gaussian(&mut rng)).collect();
        let m = design.evaluate(&x);
        let gram = &m * m.adjoint();
        let power: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let target = DMatrix::<C64>::identity(design.rows, design.rows) * C64::new(power, 0.0);
        worst = worst.max((gram - target).norm());
    }
    worst
}

/// Places base pulses (frequency weights of transmitter 1, one per design
/// variable) across all transmitters according to `design`.
///
/// Each base pulse must vanish outside the layout support in time, so the
/// conjugate (time-reversed) copies keep the zero head and tail.
pub fn place_pulses(design: &OrthogonalDesign, layout: Layout, base_pulses: &[ComplexSeq]) -> Result<WaveformSet> {
    let n = layout.subcarriers;
    if base_pulses.len() != design.num_vars {
        return invalid(format!(
            "design needs {} base pulses, got {}",
            design.num_vars,
            base_pulses.len()
        ));
    }
    let mut base_time = Vec::with_capacity(base_pulses.len());
    for (i, pulse) in base_pulses.iter().enumerate() {
        if pulse.len() != n {
            return invalid(format!("base pulse {i} has length {}, expected {n}", pulse.len()));
        }
        let t = idft_unitary(pulse)?;
        let v = layout.zero_violation(&t);
        if v > ZERO_CONDITION_TOL {
            return invalid(format!(
                "base pulse {i} is not zero outside samples {:?} (max |s| = {v:.3e}); \
                 its time-reversed copy would break the zero head/tail",
                layout.support()
            ));
        }
        base_time.push(t);
    }

    let zero = vec![C64::new(0.0, 0.0); n];
    let mut freq = Vec::with_capacity(design.rows * design.cols);
    let mut time = Vec::with_capacity(design.rows * design.cols);
    for r in 0..design.rows {
        for c in 0..design.cols {
            match design.entry(r, c) {
                Entry::Zero => {
                    freq.push(zero.clone());
                    time.push(zero.clone());
                }
                Entry::Term { var, negated, conjugated } => {
                    let sign = if negated { -1.0 } else { 1.0 };
                    let (f, t): (ComplexSeq, ComplexSeq) = if conjugated {
                        // conj in frequency == conj + reversal s[(N - i) mod N] in time
                        let bt = &base_time[var];
                        (
                            base_pulses[var].iter().map(|v| v.conj() * sign).collect(),
                            (0..n).map(|i| bt[(n - i) % n].conj() * sign).collect(),
                        )
                    } else {
                        (
                            base_pulses[var].iter().map(|v| v * sign).collect(),
                            base_time[var].iter().map(|v| v * sign).collect(),
                        )
                    };
                    freq.push(f);
                    time.push(t);
                }
            }
        }
    }
    WaveformSet::from_parts(layout, design.rows, design.cols, design.num_vars, freq, time)
}

/// Places `base_pulses` in consecutive groups of `design.num_vars()`, one
/// design block per group, and stacks the blocks along the pulse axis.
pub fn place_blocks(design: &OrthogonalDesign, layout: Layout, base_pulses: &[ComplexSeq]) -> Result<WaveformSet> {
    let v = design.num_vars;
    if base_pulses.is_empty() || base_pulses.len() % v != 0 {
        return invalid(format!(
            "base pulse count {} is not a positive multiple of {v}",
            base_pulses.len()
        ));
    }
    let blocks = base_pulses
        .chunks(v)
        .map(|chunk| place_pulses(design, layout, chunk))
        .collect::<Result<Vec<_>>>()?;
    if blocks.len() == 1 {
        return Ok(blocks.into_iter().next().expect("one block"));
    }
    let (t, cols) = (design.rows, design.cols);
    let mut freq = Vec::with_capacity(t * cols * blocks.len());
    let mut time = Vec::with_capacity(freq.capacity());
    for a in 0..t {
        for b in &blocks {
            for p in 0..cols {
                freq.push(b.freq(a, p).to_vec());
                time.push(b.time(a, p).to_vec());
            }
        }
    }
    WaveformSet::from_parts(layout, t, cols * blocks.len(), v * blocks.len(), freq, time)
}

/// Largest entry of `S_k S_k^H - c_k I` over all subcarriers, with `c_k` the
/// mean squared row norm at `k`.
pub fn verify_flat_unitary(ws: &WaveformSet) -> f64 {
    let t = ws.num_tx();
    (0..ws.subcarriers())
        .map(|k| {
            let s = ws.subcarrier_matrix(k);
            let gram = &s * s.adjoint();
            let c = gram.diagonal().iter().map(|v| v.re).sum::<f64>() / t as f64;
            let dev = gram - DMatrix::<C64>::identity(t, t) * C64::new(c, 0.0);
            dev.iter().map(|v| v.norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::dft_unitary;
    use rand::Rng;

    #[test]
    fn stacked_blocks_stay_flat_unitary() {
        let layout = Layout::new(64, 6, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base: Vec<ComplexSeq> = (0..4)
            .map(|_| {
                let mut t = vec![C64::new(0.0, 0.0); 64];
                for v in &mut t[layout.support()] {
                    *v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
                crate::dsp::dft_unitary(&t).unwrap()
            })
            .collect();
        let ws = place_blocks(&alamouti_design(), layout, &base).unwrap();
        assert_eq!((ws.num_tx(), ws.num_pulses(), ws.num_vars()), (2, 4, 4));
        let scale = ws.power_profile(0).iter().cloned().fold(0.0, f64::max);
        assert!(verify_flat_unitary(&ws) < 1e-12 * scale);
        assert!(ws.zero_violation() < 1e-12);
        assert!(place_blocks(&alamouti_design(), layout, &base[..3]).is_err());
    }

    #[test]
    fn alamouti_examples() {
        let d = alamouti_design();
        let one = C64::new(1.0, 0.0);
        let m = d.evaluate(&[one, C64::new(0.0, 0.0)]);
        assert!((&m * m.adjoint() - DMatrix::identity(2, 2)).norm() < 1e-15);

        let x = [C64::new(1.0, 1.0), C64::new(2.0, -1.0)];
        let m = d.evaluate(&x);
        let g = &m * m.adjoint();
        assert!((g - DMatrix::identity(2, 2) * C64::new(7.0, 0.0)).norm() < 1e-14);
        assert_eq!(d.entry(1, 0), Entry::neg_conj(1));
    }

    #[test]
    fn cod4_structure() {
        let d = cod4_design();
        for r in 0..4 {
            let zeros = (0..4).filter(|&c| d.entry(r, c) == Entry::Zero).count();
            assert_eq!(zeros, 1);
        }
        let m = d.evaluate(&[C64::new(0.0, 0.0); 3]);
        assert!(m.iter().all(|v| *v == C64::new(0.0, 0.0)));
        assert!(verify_cod(&d, 200, 5) < 1e-12);
        assert!(verify_cod(&alamouti_design(), 200, 5) < 1e-12);
        assert!(verify_cod(&design_for(3).unwrap(), 200, 5) < 1e-12);
    }

    #[test]
    fn rates() {
        assert_eq!(cod_rate(1).unwrap(), Ratio::from_integer(1));
        assert_eq!(cod_rate(2).unwrap(), Ratio::from_integer(1));
        assert_eq!(cod_rate(3).unwrap(), Ratio::new(3, 4));
        assert_eq!(cod_rate(4).unwrap(), Ratio::new(3, 4));
        assert!(cod_rate(0).is_err());
    }

    #[test]
    fn corrupted_design_detected() {
        let mut entries: Vec<Entry> = (0..2).flat_map(|r| (0..2).map(move |c| (r, c))).map(|(r, c)| alamouti_design().entry(r, c)).collect();
        entries[2] = Entry::conj(1); // flip sign of -x2*
        let bad = OrthogonalDesign::new(2, 2, 2, entries).unwrap();
        assert!(verify_cod(&bad, 1, 9) > 0.1);
    }

    #[test]
    fn repeated_variable_rejected() {
        let e = vec![Entry::var(0), Entry::var(0)];
        assert!(OrthogonalDesign::new(1, 2, 1, e).is_err());
        assert!(design_for(5).is_err());
    }

    fn random_base(layout: Layout, seed: u64) -> ComplexSeq {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = vec![C64::new(0.0, 0.0); layout.subcarriers];
        for i in layout.support() {
            t[i] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        dft_unitary(&t).unwrap()
    }

    #[test]
    fn alamouti_time_domain_relations() {
        let layout = Layout::new(64, 8, 4).unwrap();
        let base = vec![random_base(layout, 1), random_base(layout, 2)];
        let ws = place_pulses(&alamouti_design(), layout, &base).unwrap();
        let n = 64;
        let s10 = idft_unitary(&base[0]).unwrap();
        let s11 = idft_unitary(&base[1]).unwrap();
        for i in 0..n {
            assert!((ws.time(1, 0)[i] + s11[(n - i) % n].conj()).norm() < 1e-12);
            assert!((ws.time(1, 1)[i] - s10[(n - i) % n].conj()).norm() < 1e-12);
        }
        // stored time sequences agree with the IDFT of the stored weights
        for a in 0..2 {
            for p in 0..2 {
                let t = idft_unitary(ws.freq(a, p)).unwrap();
                assert!(t.iter().zip(ws.time(a, p)).all(|(x, y)| (x - y).norm() < 1e-12));
            }
        }
        assert!(ws.zero_violation() < 1e-12);
    }

    #[test]
    fn cod4_placement_is_flat_unitary() {
        let layout = Layout::new(64, 8, 4).unwrap();
        let base: Vec<_> = (0..3).map(|s| random_base(layout, 10 + s)).collect();
        let ws = place_pulses(&cod4_design(), layout, &base).unwrap();
        assert!(verify_flat_unitary(&ws) < 1e-12);
        // c_k equals the first transmitter's power profile
        let prof = ws.power_profile(0);
        for k in 0..64 {
            let s = ws.subcarrier_matrix(k);
            let g = &s * s.adjoint();
            for a in 0..4 {
                assert!((g[(a, a)].re - prof[k]).abs() < 1e-12);
            }
        }
        // power preserved by negation / conjugation / reversal
        for a in 1..4 {
            let p = ws.power_profile(a);
            assert!(p.iter().zip(&prof).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn zero_base_pulses_give_zero_set() {
        let layout = Layout::new(32, 4, 2).unwrap();
        let base = vec![vec![C64::new(0.0, 0.0); 32]; 2];
        let ws = place_pulses(&alamouti_design(), layout, &base).unwrap();
        for a in 0..2 {
            for p in 0..2 {
                assert!(ws.freq(a, p).iter().all(|v| v.norm() == 0.0));
            }
        }
    }

    #[test]
    fn rejects_pulse_with_nonzero_tail() {
        let layout = Layout::new(32, 4, 2).unwrap();
        let mut t = vec![C64::new(0.0, 0.0); 32];
        t[10] = C64::new(1.0, 0.0);
        t[30] = C64::new(0.5, 0.0); // inside the reversal guard
        let bad = dft_unitary(&t).unwrap();
        let good = random_base(layout, 3);
        let err = place_pulses(&alamouti_design(), layout, &[good, bad]).unwrap_err();
        assert!(err.to_string().contains("time-reversed"));
    }

    #[test]
    fn flat_unitary_deviation_examples() {
        let layout = Layout::new(4, 1, 0).unwrap();
        let row = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(2.0, 0.0), C64::new(0.5, 0.5)];
        // two identical rows over a single pulse: gram = c [[1,1],[1,1]]
        let ws = WaveformSet::from_freq(layout, 2, 1, 1, vec![row.clone(), row.clone()]).unwrap();
        let c_max = row.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        assert!((verify_flat_unitary(&ws) - c_max).abs() < 1e-12);
        let single = WaveformSet::from_freq(layout, 1, 1, 1, vec![row]).unwrap();
        assert_eq!(verify_flat_unitary(&single), 0.0);
    }
}
