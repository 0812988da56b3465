//! Multi-seed fan-out. Jobs run on a small scoped-thread pool; results come
//! back in input order, so downstream aggregation and file output never
//! depend on scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use qaug::error::{Error, Result};

/// Worker count: `QAUG_THREADS` when set, otherwise the machine's available
/// parallelism, never more than the job count.
pub fn thread_budget(n_jobs: usize) -> usize {
    let capped = std::env::var("QAUG_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1);
    let hardware = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    capped.unwrap_or(hardware).min(n_jobs.max(1))
}

/// Run `work` over every input, preserving input order in the output.
/// The first failing job (by input order) decides the returned error.
pub fn run_parallel<T, R, F>(inputs: &[T], work: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    let threads = thread_budget(inputs.len());
    if threads <= 1 {
        return inputs.iter().map(&work).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R>>>> =
        (0..inputs.len()).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= inputs.len() {
                    break;
                }
                let result = work(&inputs[i]);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .map_err(|_| Error::Numeric("worker thread panicked".into()))?
                .expect("every job slot is filled before scope exit")
        })
        .collect()
}
