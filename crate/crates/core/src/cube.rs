use serde::Serialize;

/// Dense receiver x transmitter x range-cell array.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cube<T> {
    num_rx: usize,
    num_tx: usize,
    cells: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Cube<T> {
    pub fn zeros(num_rx: usize, num_tx: usize, cells: usize) -> Self {
        Self {
            num_rx,
            num_tx,
            cells,
            data: vec![T::default(); num_rx * num_tx * cells],
        }
    }

    pub fn from_fn(num_rx: usize, num_tx: usize, cells: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(num_rx * num_tx * cells);
        for b in 0..num_rx {
            for a in 0..num_tx {
                for m in 0..cells {
                    data.push(f(b, a, m));
                }
            }
        }
        Self { num_rx, num_tx, cells, data }
    }

    pub fn num_rx(&self) -> usize {
        self.num_rx
    }

    pub fn num_tx(&self) -> usize {
        self.num_tx
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn get(&self, rx: usize, tx: usize, cell: usize) -> T {
        self.data[self.offset(rx, tx) + cell]
    }

    pub fn set(&mut self, rx: usize, tx: usize, cell: usize, v: T) {
        let o = self.offset(rx, tx);
        self.data[o + cell] = v;
    }

    /// All cells of one receiver/transmitter pair.
    pub fn pair(&self, rx: usize, tx: usize) -> &[T] {
        let o = self.offset(rx, tx);
        &self.data[o..o + self.cells]
    }

    pub fn pair_mut(&mut self, rx: usize, tx: usize) -> &mut [T] {
        let o = self.offset(rx, tx);
        &mut self.data[o..o + self.cells]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn same_shape<U>(&self, other: &Cube<U>) -> bool {
        self.num_rx == other.num_rx && self.num_tx == other.num_tx && self.cells == other.cells
    }

    fn offset(&self, rx: usize, tx: usize) -> usize {
        assert!(rx < self.num_rx && tx < self.num_tx, "pair ({rx}, {tx}) out of range");
        (rx * self.num_tx + tx) * self.cells
    }
}
