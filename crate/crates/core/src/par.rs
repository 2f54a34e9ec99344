//! Ordered fan-out over scoped threads. Results always come back in input
//! order, so reductions over them are independent of the thread count.

use std::num::NonZeroUsize;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "MICROGEXT_THREADS";

/// Number of worker threads to use: `MICROGEXT_THREADS` if set to a
/// positive integer, otherwise the available parallelism.
pub fn thread_budget() -> usize {
    let available = std::thread::available_parallelism()
        .map(NonZeroUsize::get)
        .unwrap_or(1);
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n,
        _ => available,
    }
}

/// Applies `f` to every item using up to `threads` workers and returns the
/// results in input order.
pub fn ordered_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let per = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(per)
            .enumerate()
            .map(|(c, chunk)| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .enumerate()
                        .map(|(i, t)| f(c * per + i, t))
                        .collect::<Vec<R>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u32> = (0..101).collect();
        for threads in [1, 2, 7, 200] {
            let out = ordered_map(&items, threads, |i, v| (i, v * 2));
            assert_eq!(out.len(), 101);
            assert!(out.iter().enumerate().all(|(k, (i, v))| k == *i && *v == 2 * k as u32));
        }
        assert!(ordered_map(&[] as &[u32], 4, |_, v| *v).is_empty());
    }
}
