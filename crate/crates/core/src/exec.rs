//! Execution policy for data-parallel loops.
//!
//! With the `parallel` feature (on by default) [`Exec::Parallel`] runs on a
//! rayon pool; without it every policy degrades to a plain sequential loop.
//! Results are always returned in index order, so the policy never changes
//! an output.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// `workers: None` uses rayon's global pool.
    #[default]
    Parallel,
    Workers(usize),
}

impl Exec {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            Some(1) => Exec::Sequential,
            Some(n) => Exec::Workers(n),
            None => Exec::Parallel,
        }
    }

    /// Map `f` over `0..n`, collecting in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => par_map(n, &f),
            #[cfg(feature = "parallel")]
            Exec::Workers(workers) => match rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
            {
                Ok(pool) => pool.install(|| par_map(n, &f)),
                Err(_) => par_map(n, &f),
            },
            #[cfg(not(feature = "parallel"))]
            _ => (0..n).map(f).collect(),
        }
    }

    /// Like [`Exec::map`] for fallible tasks; the reported error is the one
    /// with the lowest index.
    pub fn try_map<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, f: &F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_and_keep_order() {
        let f = |i: usize| (i as f64).sqrt() * 3.0;
        let seq = Exec::Sequential.map(1000, f);
        assert_eq!(seq, Exec::Parallel.map(1000, f));
        assert_eq!(seq, Exec::Workers(3).map(1000, f));
    }

    #[test]
    fn try_map_reports_lowest_index_error() {
        let r: Result<Vec<usize>, usize> =
            Exec::Workers(4).try_map(100, |i| if i % 17 == 16 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(16));
    }
}
