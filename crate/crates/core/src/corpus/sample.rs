use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform reservoir sample of `min(n, len)` items, returned in stream order.
///
/// Pure in `(items, n, seed)`.
pub fn sample_records<T, I>(items: I, n: usize, seed: u64) -> Vec<T>
where
    I: IntoIterator<Item = T>,
{
    if n == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reservoir: Vec<(usize, T)> = Vec::with_capacity(n);
    for (i, item) in items.into_iter().enumerate() {
        if i < n {
            reservoir.push((i, item));
        } else {
            let j = rng.gen_range(0..=i);
            if j < n {
                reservoir[j] = (i, item);
            }
        }
    }
    reservoir.sort_by_key(|(i, _)| *i);
    reservoir.into_iter().map(|(_, item)| item).collect()
}
