//! Multi-transmitter pulse sets and their on-disk forms.
//!
//! Binary container layout (little endian):
//!
//! ```text
//! magic   b"CPOFDMW1"
//! u32 x6  N, num_tx, num_pulses, num_vars, eta_max, M
//! f64 x2  (re, im) frequency weights, ordered tx, pulse, subcarrier
//! f64 x2  (re, im) time samples, same ordering
//! ```

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::dsp::{energy, idft_unitary, ComplexSeq, C64};
use crate::error::{invalid, Error, Result};
use crate::layout::Layout;

const MAGIC: &[u8; 8] = b"CPOFDMW1";

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    layout: Layout,
    num_tx: usize,
    num_pulses: usize,
    num_vars: usize,
    freq: Vec<ComplexSeq>,
    time: Vec<ComplexSeq>,
}

impl WaveformSet {
    /// Builds a set from frequency weights indexed `[tx * num_pulses + pulse]`;
    /// time sequences are the unitary IDFTs.
    pub fn from_freq(
        layout: Layout,
        num_tx: usize,
        num_pulses: usize,
        num_vars: usize,
        freq: Vec<ComplexSeq>,
    ) -> Result<Self> {
        let time = freq
            .iter()
            .map(|f| idft_unitary(f))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(layout, num_tx, num_pulses, num_vars, freq, time)
    }

    pub fn from_parts(
        layout: Layout,
        num_tx: usize,
        num_pulses: usize,
        num_vars: usize,
        freq: Vec<ComplexSeq>,
        time: Vec<ComplexSeq>,
    ) -> Result<Self> {
        if num_tx == 0 || num_pulses == 0 {
            return invalid("waveform set needs at least one transmitter and one pulse");
        }
        if num_vars > num_pulses {
            return invalid("non-zero pulse count exceeds pulse count");
        }
        let count = num_tx * num_pulses;
        if freq.len() != count || time.len() != count {
            return invalid(format!("expected {count} sequences per domain"));
        }
        let n = layout.subcarriers;
        if freq.iter().chain(&time).any(|s| s.len() != n) {
            return invalid(format!("every sequence must have {n} entries"));
        }
        Ok(Self {
            layout,
            num_tx,
            num_pulses,
            num_vars,
            freq,
            time,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn num_tx(&self) -> usize {
        self.num_tx
    }

    pub fn num_pulses(&self) -> usize {
        self.num_pulses
    }

    /// Number of non-zero pulses per transmitter.
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn subcarriers(&self) -> usize {
        self.layout.subcarriers
    }

    pub fn freq(&self, tx: usize, pulse: usize) -> &[C64] {
        &self.freq[tx * self.num_pulses + pulse]
    }

    pub fn time(&self, tx: usize, pulse: usize) -> &[C64] {
        &self.time[tx * self.num_pulses + pulse]
    }

    /// The `num_tx x num_pulses` weighting matrix at subcarrier `k`.
    pub fn subcarrier_matrix(&self, k: usize) -> DMatrix<C64> {
        DMatrix::from_fn(self.num_tx, self.num_pulses, |a, p| self.freq(a, p)[k])
    }

    /// `sum_p |S_{tx,k}^(p)|^2` for every subcarrier.
    pub fn power_profile(&self, tx: usize) -> Vec<f64> {
        (0..self.subcarriers())
            .map(|k| (0..self.num_pulses).map(|p| self.freq(tx, p)[k].norm_sqr()).sum())
            .collect()
    }

    pub fn pulse_energy(&self, tx: usize, pulse: usize) -> f64 {
        energy(self.freq(tx, pulse))
    }

    /// Worst zero-condition violation over every time sequence.
    pub fn zero_violation(&self) -> f64 {
        self.time
            .iter()
            .map(|t| self.layout.zero_violation(t))
            .fold(0.0, f64::max)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [
            self.layout.subcarriers,
            self.num_tx,
            self.num_pulses,
            self.num_vars,
            self.layout.eta_max,
            self.layout.range_cells,
        ] {
            let v = u32::try_from(v).map_err(|_| Error::Format("header field exceeds u32".into()))?;
            w.write_all(&v.to_le_bytes())?;
        }
        for seq in self.freq.iter().chain(&self.time) {
            for c in seq {
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a waveform container".into()));
        }
        let mut header = [0usize; 6];
        for h in header.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *h = u32::from_le_bytes(b) as usize;
        }
        let [n, num_tx, num_pulses, num_vars, eta_max, m] = header;
        let layout = Layout::new(n, m, eta_max)?;
        let count = num_tx
            .checked_mul(num_pulses)
            .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
        let mut read_seqs = || -> Result<Vec<ComplexSeq>> {
            (0..count)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            let mut b = [0u8; 16];
                            r.read_exact(&mut b)?;
                            let re = f64::from_le_bytes(b[..8].try_into().unwrap());
                            let im = f64::from_le_bytes(b[8..].try_into().unwrap());
                            Ok(C64::new(re, im))
                        })
                        .collect()
                })
                .collect()
        };
        let freq = read_seqs()?;
        let time = read_seqs()?;
        Self::from_parts(layout, num_tx, num_pulses, num_vars, freq, time)
    }

    /// Columnar CSV: `k,tx,pulse,re,im` (transmitters and pulses 0-based).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "tx", "pulse", "re", "im"]).map_err(csv_err)?;
        for k in 0..self.subcarriers() {
            for a in 0..self.num_tx {
                for p in 0..self.num_pulses {
                    let v = self.freq(a, p)[k];
                    out.write_record(&[
                        k.to_string(),
                        a.to_string(),
                        p.to_string(),
                        format!("{:e}", v.re),
                        format!("{:e}", v.im),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`WaveformSet::write_csv`]; the layout and
    /// the non-zero pulse count are not part of that format.
    pub fn read_csv<R: Read>(r: R, layout: Layout, num_vars: usize) -> Result<Self> {
        let mut rows = Vec::new();
        let mut reader = csv::Reader::from_reader(r);
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let field = |i: usize| -> Result<&str> {
                rec.get(i)
                    .ok_or_else(|| Error::Format(format!("line {}: missing column {i}", line + 2)))
            };
            let parse_usize = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", line + 2)))
            };
            let parse_f64 = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", line + 2)))
            };
            rows.push((
                parse_usize(field(0)?)?,
                parse_usize(field(1)?)?,
                parse_usize(field(2)?)?,
                C64::new(parse_f64(field(3)?)?, parse_f64(field(4)?)?),
            ));
        }
        let num_tx = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let num_pulses = rows.iter().map(|r| r.2 + 1).max().unwrap_or(0);
        let n = layout.subcarriers;
        if rows.len() != num_tx * num_pulses * n {
            return Err(Error::Format(format!(
                "expected {} rows for {num_tx} transmitters, {num_pulses} pulses and {n} subcarriers, found {}",
                num_tx * num_pulses * n,
                rows.len()
            )));
        }
        let mut freq = vec![vec![C64::new(0.0, 0.0); n]; num_tx * num_pulses];
        for (k, a, p, v) in rows {
            if k >= n {
                return Err(Error::Format(format!("subcarrier index {k} out of range")));
            }
            freq[a * num_pulses + p][k] = v;
        }
        Self::from_freq(layout, num_tx, num_pulses, num_vars, freq)
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
