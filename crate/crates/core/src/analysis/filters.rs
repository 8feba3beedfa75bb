/// Running median over an odd window, edges padded by replicating the end
/// samples.
pub fn median_filter(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 || window <= 1 {
        return x.to_vec();
    }
    let half = window / 2;
    let at = |i: isize| x[i.clamp(0, n as isize - 1) as usize];
    let mut sorted: Vec<f64> = (-(half as isize)..=half as isize).map(at).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n);
    for i in 0..n as isize {
        out.push(sorted[half]);
        let leaving = at(i - half as isize);
        let entering = at(i + half as isize + 1);
        let pos = sorted.partition_point(|v| v.total_cmp(&leaving).is_lt());
        sorted.remove(pos);
        let ins = sorted.partition_point(|v| v.total_cmp(&entering).is_lt());
        sorted.insert(ins, entering);
    }
    out
}

/// Mean over a window of fixed length `window`, centered where possible and
/// shifted inward near the ends so every output averages the same number of
/// samples.
pub fn moving_mean(x: &[f64], window: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let w = window.clamp(1, n);
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(w / 2).min(n - w);
            (prefix[start + w] - prefix[start]) / w as f64
        })
        .collect()
}
