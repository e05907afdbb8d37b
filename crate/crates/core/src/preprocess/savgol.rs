//! Savitzky-Golay smoothing with polynomial-fit edge handling.

use nalgebra::DMatrix;

use super::{PreprocessError, Result};

/// Convolution weights of one window position.
///
/// Row `p` of the returned matrix holds the weights that evaluate the
/// least-squares polynomial of degree `rank`, fitted over a window of `win`
/// samples, at window offset `p`.
fn window_weights(win: usize, rank: usize) -> DMatrix<f64> {
    let half = (win / 2) as f64;
    // Abscissae scaled into [-1, 1] keep the Vandermonde matrix well conditioned.
    let scale = if half > 0.0 { half } else { 1.0 };
    let abscissa = |k: usize| (k as f64 - half) / scale;
    let vander = DMatrix::from_fn(win, rank + 1, |k, j| abscissa(k).powi(j as i32));
    let pinv = vander
        .clone()
        .svd(true, true)
        .pseudo_inverse(1e-13)
        .expect("svd was computed with both factors");
    &vander * pinv
}

/// Smooths `seq` with a Savitzky-Golay filter.
///
/// Interior points use the polynomial fitted over the centred window. The
/// first and last `win / 2` points are evaluated on the polynomial fitted
/// over the first or last full window. Output length equals input length.
pub fn savgol_smooth(seq: &[f64], win: usize, rank: usize) -> Result<Vec<f64>> {
    if win % 2 == 0 {
        return Err(PreprocessError::EvenWindow(win));
    }
    if win > seq.len() {
        return Err(PreprocessError::WindowTooLarge {
            win,
            len: seq.len(),
        });
    }
    if rank >= win {
        return Err(PreprocessError::RankTooHigh { rank, win });
    }
    let n = seq.len();
    let half = win / 2;
    let weights = window_weights(win, rank);
    let apply = |row: usize, start: usize| -> f64 {
        (0..win).map(|k| weights[(row, k)] * seq[start + k]).sum()
    };

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let value = if i < half {
            apply(i, 0)
        } else if i + half >= n {
            let start = n - win;
            apply(i - start, start)
        } else {
            apply(half, i - half)
        };
        out.push(value);
    }
    Ok(out)
}
