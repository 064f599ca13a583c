//! A small bounded work pool: a fixed set of worker threads drains a job
//! queue while results stream back to the caller's thread, keeping side
//! effects (ledger appends) on a single writer.

use std::sync::mpsc;
use std::sync::Mutex;

/// Runs `worker` over every unit with at most `max_parallel` calls in
/// flight. `sink` observes each (index, result) pair on the calling thread,
/// in completion order.
pub fn bounded_map<U, R>(
    units: &[U],
    max_parallel: usize,
    worker: impl Fn(&U) -> R + Sync,
    mut sink: impl FnMut(usize, R),
) where
    U: Sync,
    R: Send,
{
    let workers = max_parallel.max(1).min(units.len());
    if workers == 0 {
        return;
    }
    let (job_tx, job_rx) = mpsc::channel::<usize>();
    let job_rx = Mutex::new(job_rx);
    let (result_tx, result_rx) = mpsc::channel::<(usize, R)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let result_tx = result_tx.clone();
            let job_rx = &job_rx;
            let worker = &worker;
            scope.spawn(move || loop {
                let job = job_rx.lock().expect("job queue lock").recv();
                match job {
                    Ok(i) => {
                        if result_tx.send((i, worker(&units[i]))).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            });
        }
        for i in 0..units.len() {
            job_tx.send(i).expect("workers outlive the queue");
        }
        drop(job_tx);
        drop(result_tx);
        for (i, result) in result_rx {
            sink(i, result);
        }
    });
}
