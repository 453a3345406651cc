//! Price indicators aligned to their input: `out[i]` uses `closes[..=i]`
//! only, `None` during warm-up.

/// Mean taken as an offset from the first value, so a constant run averages
/// to exactly that constant.
fn anchored_mean(values: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let n = values.len() as f64;
    let mut it = values;
    let first = it.clone().next().expect("non-empty window");
    first + it.by_ref().map(|v| v - first).sum::<f64>() / n
}

/// Simple moving average over `closes[i-window+1..=i]`.
///
/// Each window is summed directly rather than with a running sum, so a value
/// depends on nothing outside its window.
pub fn compute_sma(closes: &[f64], window: usize) -> Vec<Option<f64>> {
    assert!(window >= 1, "sma window must be >= 1");
    (0..closes.len())
        .map(|i| (i + 1 >= window).then(|| anchored_mean(closes[i + 1 - window..=i].iter().copied())))
        .collect()
}

/// EMA with multiplier `2/(n+1)`, seeded by the SMA of the first `n` defined
/// values of `values`.
pub fn compute_ema(values: &[Option<f64>], n: usize) -> Vec<Option<f64>> {
    assert!(n >= 1, "ema length must be >= 1");
    let mut out = vec![None; values.len()];
    let Some(start) = values.iter().position(Option::is_some) else {
        return out;
    };
    if values.len() - start < n {
        return out;
    }
    let alpha = 2.0 / (n as f64 + 1.0);
    let seed_end = start + n - 1;
    let seed = anchored_mean(values[start..=seed_end].iter().map(|v| v.expect("defined run")));
    out[seed_end] = Some(seed);
    let mut prev = seed;
    for i in seed_end + 1..values.len() {
        let x = values[i].expect("defined run");
        prev += alpha * (x - prev);
        out[i] = Some(prev);
    }
    out
}

/// Wilder RSI. Seed averages are the simple means of the first `period`
/// deltas, so the first value lands at index `period`.
///
/// When both averages are zero (flat prices) the oscillator reads 50.
pub fn compute_rsi(closes: &[f64], period: usize) -> Vec<Option<f64>> {
    assert!(period >= 1, "rsi period must be >= 1");
    let mut out = vec![None; closes.len()];
    if closes.len() <= period {
        return out;
    }
    let split = |d: f64| if d > 0.0 { (d, 0.0) } else { (0.0, -d) };
    let p = period as f64;
    let (mut gain, mut loss) = (1..=period).fold((0.0, 0.0), |(g, l), i| {
        let (up, down) = split(closes[i] - closes[i - 1]);
        (g + up, l + down)
    });
    gain /= p;
    loss /= p;
    out[period] = Some(rsi_value(gain, loss));
    for i in period + 1..closes.len() {
        let (up, down) = split(closes[i] - closes[i - 1]);
        gain = (gain * (p - 1.0) + up) / p;
        loss = (loss * (p - 1.0) + down) / p;
        out[i] = Some(rsi_value(gain, loss));
    }
    out
}

fn rsi_value(avg_gain: f64, avg_loss: f64) -> f64 {
    match (avg_gain == 0.0, avg_loss == 0.0) {
        (true, true) => 50.0,
        (_, true) => 100.0,
        (true, _) => 0.0,
        _ => 100.0 - 100.0 / (1.0 + avg_gain / avg_loss),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Macd {
    pub line: Vec<Option<f64>>,
    pub signal: Vec<Option<f64>>,
    pub histogram: Vec<Option<f64>>,
}

/// MACD line, signal line and histogram. The first fully defined index is
/// `slow + signal - 2`.
pub fn compute_macd(closes: &[f64], fast: usize, slow: usize, signal: usize) -> Macd {
    assert!(fast < slow, "macd fast length must be below slow length");
    let values: Vec<Option<f64>> = closes.iter().copied().map(Some).collect();
    let ema_fast = compute_ema(&values, fast);
    let ema_slow = compute_ema(&values, slow);
    let line: Vec<Option<f64>> = ema_fast
        .iter()
        .zip(&ema_slow)
        .map(|(f, s)| Some((*f)? - (*s)?))
        .collect();
    let signal_line = compute_ema(&line, signal);
    let histogram = line
        .iter()
        .zip(&signal_line)
        .map(|(l, s)| Some((*l)? - (*s)?))
        .collect();
    Macd {
        line: line
            .iter()
            .zip(&signal_line)
            .map(|(l, s)| s.and(*l))
            .collect(),
        signal: signal_line,
        histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 30-point fixture; expected values come from an independent
    /// step-by-step Wilder recursion run outside this crate.
    const FIXTURE: [f64; 30] = [
        0.50, 0.52, 0.51, 0.55, 0.54, 0.56, 0.53, 0.57, 0.60, 0.58, 0.59, 0.62, 0.61, 0.59,
        0.63, 0.66, 0.64, 0.65, 0.61, 0.60, 0.62, 0.64, 0.67, 0.66, 0.68, 0.65, 0.63, 0.66,
        0.69, 0.70,
    ];

    #[test]
    fn sma_hand_case() {
        assert_eq!(compute_sma(&[1.0, 2.0, 3.0], 3), vec![None, None, Some(2.0)]);
    }

    #[test]
    fn sma_identity_window_and_constants() {
        let xs = [0.3, 0.7, 0.1];
        let out: Vec<f64> = compute_sma(&xs, 1).into_iter().map(Option::unwrap).collect();
        assert_eq!(out, xs);
        let c = compute_sma(&[0.4; 9], 4);
        assert!(c[3..].iter().all(|v| *v == Some(0.4)));
    }

    #[test]
    fn sma_longer_than_series_is_undefined() {
        assert!(compute_sma(&[1.0, 2.0], 3).iter().all(Option::is_none));
    }

    #[test]
    fn rsi_monotone_series() {
        let up: Vec<f64> = (0..40).map(|i| 1.0 + i as f64 * 0.01).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        let ru = compute_rsi(&up, 14);
        let rd = compute_rsi(&down, 14);
        assert!(ru[..14].iter().all(Option::is_none));
        assert!(ru[14..].iter().all(|v| *v == Some(100.0)));
        assert!(rd[14..].iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn rsi_alternating_seed_is_fifty() {
        let xs: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { 1.25 }).collect();
        let r = compute_rsi(&xs, 14);
        assert_eq!(r[14], Some(50.0));
    }

    #[test]
    fn rsi_too_short_is_undefined() {
        assert!(compute_rsi(&[1.0; 14], 14).iter().all(Option::is_none));
    }

    #[test]
    fn rsi_matches_pinned_wilder_fixture() {
        let r = compute_rsi(&FIXTURE, 14);
        let expected = [
            (14, 69.69696969696969),
            (15, 72.39915074309978),
            (20, 61.50941638640149),
            (25, 60.99096208065449),
            (29, 65.78419790037668),
        ];
        for (i, want) in expected {
            let got = r[i].unwrap();
            assert!((got - want).abs() < 1e-9, "rsi[{i}] = {got}, want {want}");
        }
    }

    #[test]
    fn macd_constant_series_is_zero() {
        let m = compute_macd(&[0.42; 60], 12, 26, 9);
        for i in 0..60 {
            if i < 33 {
                assert!(m.line[i].is_none() && m.signal[i].is_none());
            } else {
                assert!(m.line[i].unwrap().abs() < 1e-15);
                assert!(m.signal[i].unwrap().abs() < 1e-15);
                assert!(m.histogram[i].unwrap().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn macd_ramp_converges_to_half_length_difference() {
        // An SMA-seeded EMA of a ramp with slope d trails it by (n-1)/2 * d,
        // so the line is d * (slow - fast) / 2 and the histogram vanishes.
        let d = 0.01;
        let ramp: Vec<f64> = (0..60).map(|t| t as f64 * d).collect();
        let m = compute_macd(&ramp, 12, 26, 9);
        for i in 33..60 {
            assert!((m.line[i].unwrap() - d * 7.0).abs() < 1e-12);
            assert!(m.histogram[i].unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn macd_matches_pinned_ema_recursion() {
        let m = compute_macd(&FIXTURE, 3, 6, 4);
        let expected = [
            (8, 0.019024234693877484, 0.014555165816326543),
            (15, 0.01793196735260083, 0.013884815783606943),
            (29, 0.012899921124073899, 0.008522264787991628),
        ];
        assert!(m.line[7].is_none());
        for (i, line, signal) in expected {
            assert!((m.line[i].unwrap() - line).abs() < 1e-12, "line[{i}]");
            assert!((m.signal[i].unwrap() - signal).abs() < 1e-12, "signal[{i}]");
        }
    }

    #[test]
    #[should_panic]
    fn macd_rejects_fast_equal_slow() {
        compute_macd(&FIXTURE, 12, 12, 9);
    }
}
