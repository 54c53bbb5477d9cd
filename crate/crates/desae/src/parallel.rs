//! Bounded, order-preserving parallel map for embarrassingly parallel
//! per-structure work. Results come back in input order regardless of the
//! thread count, so reports are byte-identical for any `--threads`.

pub fn ordered_map<T, R, F>(items: Vec<T>, threads: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let threads = threads.max(1);
    if threads == 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let jobs: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(jobs);
    let mut slots: Vec<Option<R>> = std::iter::repeat_with(|| None)
        .take(queue.lock().unwrap().len())
        .collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop();
                let Some((idx, item)) = job else { break };
                let out = f(item);
                results.lock().unwrap()[idx] = Some(out);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("worker filled slot")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_across_thread_counts() {
        let items: Vec<u64> = (0..50).collect();
        let single = ordered_map(items.clone(), 1, |x| x * x);
        let multi = ordered_map(items, 4, |x| x * x);
        assert_eq!(single, multi);
        assert_eq!(single[7], 49);
    }
}
