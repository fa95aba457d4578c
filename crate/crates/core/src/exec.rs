//! Sequential or data-parallel execution of independent searches.
//!
//! With the `parallel` feature disabled, [`Exec::Parallel`] silently runs
//! sequentially, so callers never need to cfg-gate.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Smallest `i < n` with `f(i)` defined, together with its value.
    pub fn find_first<T, F>(self, n: usize, f: F) -> Option<(usize, T)>
    where
        T: Send,
        F: Fn(usize) -> Option<T> + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().find_map_first(|i| f(i).map(|t| (i, t)))
            }
            _ => (0..n).find_map(|i| f(i).map(|t| (i, t))),
        }
    }

    /// `f` applied to `0..n`, in order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        for ex in [Exec::Sequential, Exec::Parallel] {
            let hit = ex.find_first(1000, |i| (i * i % 97 == 3).then_some(i * 2));
            let want = (0..1000).find(|i| i * i % 97 == 3).map(|i| (i, i * 2));
            assert_eq!(hit, want);
            assert_eq!(ex.map(5, |i| i + 1), vec![1, 2, 3, 4, 5]);
        }
    }
}
