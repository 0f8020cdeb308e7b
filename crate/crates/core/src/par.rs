//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] uses
//! rayon; without it every call runs sequentially. Results never depend on
//! the execution mode: every parallel operation here is either an
//! element-wise map or a reduction with an associative, commutative and exact
//! combiner.

/// Vectors shorter than this are always updated sequentially.
pub const PAR_MIN_LEN: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

impl Execution {
    /// `Parallel` when the crate was built with rayon, `Sequential` otherwise.
    pub fn best_available() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `out[i] = f(i)` for every index.
    #[allow(unused_variables)]
    pub fn fill_indexed<F>(self, out: &mut [f64], f: F)
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            if self.is_parallel() && out.len() >= PAR_MIN_LEN {
                out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
                return;
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(i);
        }
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            if self.is_parallel() {
                return items.par_iter().map(f).collect();
            }
        }
        items.iter().map(f).collect()
    }

    /// Maps `f` over `0..len` and folds the results with `combine`.
    pub fn map_reduce<U, F, R>(self, len: usize, f: F, combine: R) -> Option<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
        R: Fn(U, U) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            if self.is_parallel() {
                return (0..len).into_par_iter().map(f).reduce_with(combine);
            }
        }
        (0..len).map(f).reduce(combine)
    }
}
