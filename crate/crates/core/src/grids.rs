//! Parameter grids shared by the sweeps and the dictionaries.

use crate::error::{invalid, Result};

/// `n` points from `start` to `stop` inclusive, equally spaced in log scale.
/// The endpoints are returned exactly.
pub fn log_space(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > start && stop.is_finite()) {
        return invalid(format!(
            "log grid needs 0 < start < stop, got [{start}, {stop}]"
        ));
    }
    if n < 2 {
        return invalid("log grid needs at least two points");
    }
    let (lo, hi) = (start.log10(), stop.log10());
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| match i {
            0 => start,
            i if i == n - 1 => stop,
            i => 10f64.powf(lo + step * i as f64),
        })
        .collect())
}

/// `n` equally spaced points covering `[start, stop]` inclusive.
pub fn lin_space(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        stop
                    } else {
                        start + step * i as f64
                    }
                })
                .collect()
        }
    }
}
