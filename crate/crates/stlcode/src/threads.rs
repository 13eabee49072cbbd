//! Row-level parallelism for encoding. Results are identical to serial
//! execution because each row is a pure function of the shared read-only
//! inputs; the thread count only partitions the work.

use crate::error::Result;

/// Thread cap from `STLCODE_THREADS`; 0, absent, or unparsable means serial.
pub fn row_encode_threads() -> usize {
    std::env::var("STLCODE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

/// Apply `f` to every row index in `0..rows`, using up to `threads` OS
/// threads, and return the outputs in row order. On failure the error of the
/// lowest failing row is returned, so the outcome does not depend on thread
/// scheduling.
pub fn map_rows<T, F>(rows: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let threads = threads.max(1).min(rows.max(1));
    if threads == 1 {
        return (0..rows).map(f).collect();
    }

    let chunk = rows.div_ceil(threads);
    let mut results: Vec<std::result::Result<Vec<T>, (usize, crate::Error)>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let start = t * chunk;
            let end = ((t + 1) * chunk).min(rows);
            let f = &f;
            handles.push(scope.spawn(move || {
                let mut out = Vec::with_capacity(end.saturating_sub(start));
                for i in start..end {
                    match f(i) {
                        Ok(v) => out.push(v),
                        Err(e) => return Err((i, e)),
                    }
                }
                Ok(out)
            }));
        }
        for h in handles {
            results.push(h.join().expect("row worker panicked"));
        }
    });

    let mut merged = Vec::with_capacity(rows);
    let mut first_err: Option<(usize, crate::Error)> = None;
    for r in results {
        match r {
            Ok(mut chunk_out) => merged.append(&mut chunk_out),
            Err((i, e)) => {
                if first_err.as_ref().map_or(true, |(fi, _)| i < *fi) {
                    first_err = Some((i, e));
                }
            }
        }
    }
    match first_err {
        Some((_, e)) => Err(e),
        None => Ok(merged),
    }
}
