//! Barycentric lattice sweeps over the probability simplex.
//!
//! A grid of step `h = 1/k` on the simplex of dimension `n` enumerates all
//! weight vectors `c/k` with `c` a composition of `k` into `n` nonnegative
//! parts. Sweeps parallelize over the first coordinate; merges must be
//! associative and commutative so results do not depend on the schedule.

use rayon::prelude::*;

/// Number of grid points: `C(k+n-1, n-1)`.
pub fn grid_size(n: usize, k: u32) -> u128 {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..(n as u128 - 1) {
        num *= k as u128 + i + 1;
        den *= i + 1;
    }
    num / den
}

/// Grid resolution from a requested step: `k = ceil(1/h)`.
pub fn steps_from_h(h: f64) -> u32 {
    assert!(h > 0.0 && h <= 1.0, "grid step must be in (0, 1]");
    (1.0 / h).ceil() as u32
}

fn visit_rest(prefix: &mut Vec<u32>, remaining: u32, slots: usize, f: &mut impl FnMut(&[u32])) {
    if slots == 1 {
        prefix.push(remaining);
        f(prefix);
        prefix.pop();
        return;
    }
    for c in 0..=remaining {
        prefix.push(c);
        visit_rest(prefix, remaining - c, slots - 1, f);
        prefix.pop();
    }
}

/// Sequential sweep calling `f` with each composition of `k` into `n` parts.
pub fn for_each_composition(n: usize, k: u32, mut f: impl FnMut(&[u32])) {
    assert!(n >= 1);
    let mut prefix = Vec::with_capacity(n);
    visit_rest(&mut prefix, k, n, &mut f);
}

/// Parallel fold over all grid points, chunked by the first coordinate.
/// `fold` consumes weight vectors (already divided by `k`); `merge` must be
/// associative and commutative.
pub fn par_fold_grid<T>(
    n: usize,
    k: u32,
    identity: T,
    fold: impl Fn(T, &[f64]) -> T + Sync,
    merge: impl Fn(T, T) -> T + Sync + Send,
) -> T
where
    T: Send + Sync + Clone,
{
    assert!(n >= 1);
    if n == 1 {
        return fold(identity, &[1.0]);
    }
    (0..=k)
        .into_par_iter()
        .map(|c0| {
            let mut acc = identity.clone();
            let mut w = vec![0.0; n];
            let mut prefix = Vec::with_capacity(n - 1);
            visit_rest(&mut prefix, k - c0, n - 1, &mut |rest| {
                w[0] = c0 as f64 / k as f64;
                for (slot, &c) in w[1..].iter_mut().zip(rest) {
                    *slot = c as f64 / k as f64;
                }
                let mut tmp = identity.clone();
                std::mem::swap(&mut acc, &mut tmp);
                acc = fold(tmp, &w);
            });
            acc
        })
        .reduce(|| identity.clone(), merge)
}
