//! Unordered-pair indexing and a streaming pairwise summation.

/// Number of unordered pairs over `n` units.
#[inline]
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of the pair `(i, j)`, `i < j`, in a packed lower-triangular table.
#[inline]
pub fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    j * (j - 1) / 2 + i
}

/// Inverse of [`tri_index`].
pub fn tri_pair(index: usize) -> (usize, usize) {
    // Largest j with j(j-1)/2 <= index.
    let mut j = ((1.0 + (1.0 + 8.0 * index as f64).sqrt()) / 2.0) as usize;
    while j * (j - 1) / 2 > index {
        j -= 1;
    }
    while (j + 1) * j / 2 <= index {
        j += 1;
    }
    (index - j * (j - 1) / 2, j)
}

const BLOCK: u32 = 64;

/// Pairwise (tree) summation over a stream: values are summed naively in
/// blocks of 64, and block totals are combined like a binary counter, so
/// the rounding error grows with `log(count)` rather than `count`.
#[derive(Debug, Default, Clone)]
pub struct PairwiseSum {
    block: f64,
    in_block: u32,
    stack: Vec<(u32, f64)>,
}

impl PairwiseSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        self.block += x;
        self.in_block += 1;
        if self.in_block == BLOCK {
            let mut level = 0;
            let mut s = std::mem::take(&mut self.block);
            self.in_block = 0;
            while let Some(&(l, v)) = self.stack.last() {
                if l != level {
                    break;
                }
                self.stack.pop();
                s += v;
                level += 1;
            }
            self.stack.push((level, s));
        }
    }

    pub fn total(&self) -> f64 {
        self.stack
            .iter()
            .rev()
            .fold(self.block, |acc, &(_, v)| acc + v)
    }
}

impl Extend<f64> for PairwiseSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for PairwiseSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = PairwiseSum::default();
        s.extend(iter);
        s
    }
}
