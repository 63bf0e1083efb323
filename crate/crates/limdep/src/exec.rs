//! Execution mode for data-parallel kernels.
//!
//! Hot loops (tree building, population generation, contour cells) are
//! written against [`map_indexed`], which runs them on the rayon pool when
//! the `parallel` feature is enabled and falls back to a plain loop
//! otherwise. Every kernel produces output indexed by task id, so results
//! are identical across modes and thread counts.

/// How to run a batch of independent tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Plain sequential loop.
    Sequential,
    /// rayon work-stealing pool.
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Mode {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Mode::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Mode::Sequential
        }
    }
}

/// Run `f(0..count)` and collect the results in task order.
pub fn map_indexed<T, F>(mode: Mode, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        Mode::Sequential => (0..count).map(f).collect(),
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let seq = map_indexed(Mode::Sequential, 100, |i| i * i);
        assert_eq!(seq, (0..100).map(|i| i * i).collect::<Vec<_>>());
        #[cfg(feature = "parallel")]
        {
            let par = map_indexed(Mode::Parallel, 100, |i| i * i);
            assert_eq!(seq, par);
        }
    }
}
