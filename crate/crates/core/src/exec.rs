//! Sequential / data-parallel execution of independent batch items.
//!
//! Every batch path in the crate (dataset labeling, Monte Carlo trials,
//! grid-search cells, held-out evaluation) goes through [`map_indexed`].
//! Work is split into items whose results depend only on their index, so the
//! output is identical whichever strategy runs it.

/// How a batch of independent items is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses the rayon global pool when the `parallel` feature is enabled,
    /// otherwise falls back to [`Exec::Sequential`].
    #[default]
    Parallel,
}

impl Exec {
    /// True when this strategy actually fans out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Applies `f` to every element of `items`, preserving order.
pub fn map_slice<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_indexed(exec, items.len(), |i| f(&items[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_indexed(Exec::Sequential, 10_000, f);
        let b = map_indexed(Exec::Parallel, 10_000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn slice_order_is_preserved() {
        let xs: Vec<u32> = (0..257).rev().collect();
        let ys = map_slice(Exec::Parallel, &xs, |x| x * 2);
        assert_eq!(ys[0], 512);
        assert_eq!(ys[256], 0);
    }
}
