//! Execution seam for the data-parallel inner loops.
//!
//! With the `parallel` feature (default), [`map`] fans jobs out over the
//! rayon thread pool; without it the crate builds with no rayon dependency
//! and [`map`] degrades to a plain sequential map. Output order always
//! matches input order, so results are identical either way.

#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Always-sequential map with the same signature as [`map`]; the benches
/// use it as the baseline when comparing execution strategies.
pub fn map_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let jobs: Vec<u64> = (0..1000).collect();
        let par = map(jobs.clone(), |x| x * x);
        let seq = map_seq(jobs, |x| x * x);
        assert_eq!(par, seq);
    }
}
