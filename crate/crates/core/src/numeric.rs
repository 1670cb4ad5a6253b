//! Small numeric helpers shared across modules: compensated summation,
//! mixed-radix database indexing and a dense linear solve.

use std::sync::atomic::{AtomicUsize, Ordering};

/// Default cap on the number of dense probability entries (`alphabet^n`).
pub const DEFAULT_SIZE_CAP: usize = 1 << 20;

static SIZE_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_SIZE_CAP);

/// Current process-wide cap on dense distribution size.
pub fn size_cap() -> usize {
    SIZE_CAP.load(Ordering::Relaxed)
}

/// Override the dense distribution size cap for this process.
pub fn set_size_cap(cap: usize) {
    SIZE_CAP.store(cap.max(1), Ordering::Relaxed);
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = KahanSum::new();
    for x in iter {
        acc.add(x);
    }
    acc.value()
}

/// `base^exp`, or `None` on overflow.
pub fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Digit `i` of `index` in base `alphabet` (coordinate 0 is least significant).
#[inline]
pub fn digit(index: usize, i: usize, alphabet: usize) -> usize {
    if alphabet == 2 {
        (index >> i) & 1
    } else {
        (index / alphabet.pow(i as u32)) % alphabet
    }
}

/// Replace digit `i` of `index` with `value`.
#[inline]
pub fn with_digit(index: usize, i: usize, value: usize, alphabet: usize) -> usize {
    let place = alphabet.pow(i as u32);
    let old = (index / place) % alphabet;
    index - old * place + value * place
}

/// Insert `value` as digit `i` into an index over `n - 1` coordinates,
/// shifting the higher digits up by one place.
#[inline]
pub fn insert_digit(rest: usize, i: usize, value: usize, alphabet: usize) -> usize {
    let place = alphabet.pow(i as u32);
    let low = rest % place;
    let high = rest / place;
    high * place * alphabet + value * place + low
}

/// Remove digit `i`, the inverse of [`insert_digit`].
#[inline]
pub fn remove_digit(index: usize, i: usize, alphabet: usize) -> usize {
    let place = alphabet.pow(i as u32);
    let low = index % place;
    let high = index / (place * alphabet);
    high * place + low
}

pub fn digits(index: usize, n: usize, alphabet: usize) -> Vec<usize> {
    (0..n).map(|i| digit(index, i, alphabet)).collect()
}

pub fn index_of(digits: &[usize], alphabet: usize) -> usize {
    digits.iter().rev().fold(0, |acc, &d| acc * alphabet + d)
}

/// Hamming weight of a binary index restricted to `n` coordinates.
#[inline]
pub fn popcount(index: usize) -> u32 {
    index.count_ones()
}

/// `ln(e^a + e^b)` without overflow.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Round to 12 significant digits (the CLI's output precision).
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Solve `a * X = b` for square `a` by Gaussian elimination with partial
/// pivoting. `b` may have several right-hand-side columns. Returns `None` when
/// a pivot falls below `1e-14` times the largest entry seen in its column.
pub fn solve_dense(a: &[Vec<f64>], b: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    if b.len() != n {
        return None;
    }
    let k = b.first().map_or(0, Vec::len);
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| row.iter().chain(rhs.iter()).copied().collect())
        .collect();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n).max_by(|&r1, &r2| m[r1][col].abs().total_cmp(&m[r2][col].abs()))?;
        if m[pivot][col].abs() < 1e-14 * scale {
            return None;
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col] / p;
            if f == 0.0 {
                continue;
            }
            for c in col..n + k {
                let v = m[col][c];
                m[row][c] -= f * v;
            }
        }
    }
    Some(
        (0..n)
            .map(|r| (0..k).map(|c| m[r][n + c] / m[r][r]).collect())
            .collect(),
    )
}

pub fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|c| kahan_sum((0..inner).map(|k| row[k] * b[k][c])))
                .collect()
        })
        .collect()
}

pub fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| kahan_sum(row.iter().zip(v).map(|(x, y)| x * y)))
        .collect()
}
