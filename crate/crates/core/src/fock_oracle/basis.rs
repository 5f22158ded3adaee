//! Occupation-multiset basis for the truncated fiber Fock space: sector
//! enumeration and combinatorial (lexicographic) ranking.

/// Binomial coefficients `C(n, k)` for `n <= n_max`, `k <= k_max`.
pub struct BinomialTable {
    k_max: usize,
    rows: Vec<u64>,
}

impl BinomialTable {
    pub fn new(n_max: usize, k_max: usize) -> Self {
        let mut rows = vec![0u64; (n_max + 1) * (k_max + 1)];
        for n in 0..=n_max {
            rows[n * (k_max + 1)] = 1;
            for k in 1..=k_max.min(n) {
                let above = rows[(n - 1) * (k_max + 1) + k];
                let left = rows[(n - 1) * (k_max + 1) + k - 1];
                rows[n * (k_max + 1) + k] = above + left;
            }
        }
        Self { k_max, rows }
    }

    pub fn c(&self, n: usize, k: usize) -> u64 {
        if k > self.k_max || k > n {
            return 0;
        }
        self.rows[n * (self.k_max + 1) + k]
    }
}

/// Number of size-`n` multisets over `m` symbols: `C(m + n - 1, n)`.
pub fn multiset_count(bin: &BinomialTable, m: usize, n: usize) -> u64 {
    if n == 0 {
        1
    } else {
        bin.c(m + n - 1, n)
    }
}

/// Basis of one boson-number sector: sorted (non-decreasing) index tuples of
/// length `n` over `m` modes, in lexicographic order.
pub struct SectorBasis {
    pub m: usize,
    pub n: usize,
}

impl SectorBasis {
    pub fn len(&self, bin: &BinomialTable) -> u64 {
        multiset_count(bin, self.m, self.n)
    }

    /// Lexicographic rank of a sorted tuple.
    pub fn rank(&self, bin: &BinomialTable, tuple: &[usize]) -> u64 {
        debug_assert_eq!(tuple.len(), self.n);
        let mut rank = 0u64;
        let mut prev = 0usize;
        for (t, &c) in tuple.iter().enumerate() {
            let rem = self.n - t - 1;
            for v in prev..c {
                // remaining positions draw from values >= v
                rank += multiset_count(bin, self.m - v, rem);
            }
            prev = c;
        }
        rank
    }

    /// Advance `tuple` to its lexicographic successor; false at the end.
    pub fn next(&self, tuple: &mut [usize]) -> bool {
        for i in (0..tuple.len()).rev() {
            if tuple[i] < self.m - 1 {
                let v = tuple[i] + 1;
                for slot in tuple[i..].iter_mut() {
                    *slot = v;
                }
                return true;
            }
        }
        false
    }
}
