//! Banded LU factorization with partial pivoting.
//!
//! Column-major band storage with room for the `kl` extra super-diagonals
//! produced by row interchanges; element (i, j) lives at
//! `j·ldab + kl + ku + i − j`.

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot(pub usize);

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            data: vec![0.0; ldab * n],
            ipiv: vec![0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.data.fill(0.0);
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    /// Adds `v` to entry (i, j), which must lie inside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i <= j + self.kl && j <= i + self.ku, "({i}, {j}) outside band");
        let p = self.pos(i, j);
        self.data[p] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i > j + self.kl || j > i + self.ku {
            0.0
        } else {
            self.data[self.pos(i, j)]
        }
    }

    /// Zeroes row and column `i` and puts 1 on the diagonal.
    pub fn pin(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl.max(self.ku));
        let hi = (i + self.kl.max(self.ku)).min(self.n - 1);
        for j in lo..=hi {
            if i <= j + self.kl && j <= i + self.ku {
                let p = self.pos(i, j);
                self.data[p] = 0.0;
            }
            if j <= i + self.kl && i <= j + self.ku {
                let p = self.pos(j, i);
                self.data[p] = 0.0;
            }
        }
        let p = self.pos(i, i);
        self.data[p] = 1.0;
    }

    /// y = A·x using the unfactored entries.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.data[self.pos(i, j)] * x[j];
            }
        }
    }

    /// In-place LU; fails on an exactly zero pivot.
    pub fn factor(&mut self) -> Result<(), SingularPivot> {
        let (n, kl) = (self.n, self.kl);
        let kv = self.kl + self.ku;
        let ldab = self.ldab;
        let mut ju = 0usize;
        let mut singular = None;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut jp = 0;
            let mut best = self.data[col].abs();
            for r in 1..=km {
                let v = self.data[col + r].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                singular.get_or_insert(j);
                continue;
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let top = c * ldab + kv + j - c;
                    self.data.swap(top, top + jp);
                }
            }
            if km > 0 {
                let inv = 1.0 / self.data[col];
                for r in 1..=km {
                    self.data[col + r] *= inv;
                }
                let (head, tail) = self.data.split_at_mut((j + 1) * ldab);
                let lcol = &head[col + 1..=col + km];
                for c in j + 1..=ju {
                    let top = (c - j - 1) * ldab + kv + j - c;
                    let t = tail[top];
                    if t != 0.0 {
                        let dst = &mut tail[top + 1..=top + km];
                        for (d, l) in dst.iter_mut().zip(lcol) {
                            *d -= l * t;
                        }
                    }
                }
            }
        }
        match singular {
            Some(j) => Err(SingularPivot(j)),
            None => Ok(()),
        }
    }

    /// Solves A·x = b in place after [`factor`](Self::factor).
    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl) = (self.n, self.kl);
        let kv = self.kl + self.ku;
        let ldab = self.ldab;
        for j in 0..n.saturating_sub(1) {
            let lm = kl.min(n - 1 - j);
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                let col = j * ldab + kv;
                for r in 1..=lm {
                    b[j + r] -= self.data[col + r] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ldab + kv;
            b[j] /= self.data[col];
            let bj = b[j];
            if bj != 0.0 {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    b[i] -= self.data[col + i - j] * bj;
                }
            }
        }
    }
}
