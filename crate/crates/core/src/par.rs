//! Execution strategy for the data-parallel inner loops.
//!
//! Every batch loop in the crate goes through [`map_indexed`], which keeps
//! output order fixed so that reductions over the results are deterministic
//! no matter how work was scheduled. With the `parallel` feature disabled the
//! parallel strategy silently runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Maps a slice in order.
pub fn map_slice<A, T, F>(exec: Execution, items: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Sync + Send,
{
    map_indexed(exec, items.len(), |i| f(&items[i]))
}

/// Splits `0..n` into contiguous chunks and maps each chunk. Chunk boundaries
/// depend only on `n` and `chunk`, never on the thread count.
pub fn map_chunks<T, F>(exec: Execution, n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    map_indexed(exec, count, |c| {
        let lo = c * chunk;
        f(lo..(lo + chunk).min(n))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_indexed(Execution::Sequential, 1000, |i| i * i);
        let par = map_indexed(Execution::Parallel, 1000, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn chunks_cover_range() {
        let spans = map_chunks(Execution::Parallel, 10, 3, |r| (r.start, r.end));
        assert_eq!(spans, vec![(0, 3), (3, 6), (6, 9), (9, 10)]);
        assert!(map_chunks(Execution::Sequential, 0, 3, |r| r.len()).is_empty());
    }
}
