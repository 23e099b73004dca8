use crate::error::{Error, Result};

/// Applies the first-difference operator `d` times.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::insufficient(format!("cannot difference {} samples {d} times", series.len())));
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Inverts `d` differences of a continuation, given the last `d` original
/// observations preceding it.
pub fn undifference(diffed: &[f64], anchor: &[f64], d: usize) -> Result<Vec<f64>> {
    if anchor.len() != d {
        return Err(Error::invalid(format!("undifference needs {d} anchor values, got {}", anchor.len())));
    }
    // Last value of each differencing level 0..d at the anchor's end.
    let mut level_tails = Vec::with_capacity(d);
    let mut level = anchor.to_vec();
    for _ in 0..d {
        level_tails.push(*level.last().expect("level is non-empty"));
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let mut out = diffed.to_vec();
    for tail in level_tails.into_iter().rev() {
        let mut acc = tail;
        for v in out.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    Ok(out)
}
