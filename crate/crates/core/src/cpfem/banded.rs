//! Banded storage and LU without pivoting for FE stiffness matrices.

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    /// n×n with half-bandwidth `bw`.
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + j + self.bw - i
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Solve in place; the matrix is overwritten by its LU factors.
    /// Returns None on a zero or non-finite pivot.
    pub fn solve_in_place(&mut self, rhs: &mut [f64]) -> Option<()> {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        for k in 0..n {
            let pivot = self.data[k * w + bw];
            if pivot == 0.0 || !pivot.is_finite() {
                return None;
            }
            let end = (k + bw + 1).min(n);
            for i in k + 1..end {
                let ik = i * w + k + bw - i;
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                for j in k + 1..end {
                    let kj = k * w + j + bw - k;
                    let ij = i * w + j + bw - i;
                    self.data[ij] -= l * self.data[kj];
                }
                rhs[i] -= l * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let end = (k + bw + 1).min(n);
            let mut s = rhs[k];
            for j in k + 1..end {
                s -= self.data[k * w + j + bw - k] * rhs[j];
            }
            rhs[k] = s / self.data[k * w + bw];
        }
        rhs.iter().all(|v| v.is_finite()).then_some(())
    }
}
