//! Resampling, z-scoring and annotation rasterization.

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::Real;

/// One scored event, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventAnnotation {
    pub onset: f64,
    pub duration: f64,
    pub scorer_id: u32,
}

/// Per-sample regime labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTrack {
    pub labels: Vec<usize>,
    pub sample_rate: f64,
}

impl LabelTrack {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Passband edge as a fraction of the output Nyquist frequency.
const PASSBAND: f64 = 0.8;
const STOPBAND_DB: f64 = 80.0;

fn rate_ratio(rate_in: f64, rate_out: f64) -> Result<(usize, usize)> {
    for r in [rate_in, rate_out] {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidRate(format!("{r} Hz")));
        }
    }
    if rate_out > rate_in {
        return Err(Error::InvalidRate(format!("cannot upsample {rate_in} Hz to {rate_out} Hz")));
    }
    // Rates are taken at millihertz resolution.
    let a = (rate_in * 1e3).round() as u64;
    let b = (rate_out * 1e3).round() as u64;
    if a == 0 || b == 0 || ((a as f64) / 1e3 - rate_in).abs() > 1e-9 * rate_in || ((b as f64) / 1e3 - rate_out).abs() > 1e-9 * rate_out {
        return Err(Error::InvalidRate(format!("{rate_in} Hz / {rate_out} Hz is not a millihertz ratio")));
    }
    let g = a.gcd(&b);
    Ok(((b / g) as usize, (a / g) as usize))
}

/// Zeroth order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Rational-factor polyphase resampling with a zero-phase Kaiser-windowed
/// sinc low-pass.
///
/// Tones below 0.8 × the output Nyquist frequency pass unchanged; the
/// stopband (≥ 80 dB) starts at the output Nyquist frequency. The filter is
/// centred, so output sample `m` sits exactly at time `m / rate_out` and
/// label tracks rasterized at the output rate stay aligned. The signal is
/// extended by odd reflection at both ends and every polyphase branch is
/// normalized to unit DC gain.
pub fn resample<F: Real>(series: &[F], rate_in: f64, rate_out: f64) -> Result<Vec<F>> {
    if let Some(i) = series.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let (up, down) = rate_ratio(rate_in, rate_out)?;
    if up == down || series.is_empty() {
        return Ok(series.to_vec());
    }
    let fs_up = rate_in * up as f64;
    let nyq_out = rate_out / 2.0;
    let cutoff = 0.5 * (PASSBAND * nyq_out + nyq_out);
    let transition = (1.0 - PASSBAND) * nyq_out;
    let dw = 2.0 * std::f64::consts::PI * transition / fs_up;
    let taps = ((STOPBAND_DB - 7.95) / (2.285 * dw)).ceil() as usize + 1;
    let half = taps.div_ceil(2) as isize;
    let beta = 0.1102 * (STOPBAND_DB - 8.7);
    let i0_beta = bessel_i0(beta);
    let fc = cutoff / fs_up;
    let kernel: Vec<f64> = (-half..=half)
        .map(|u| {
            let u = u as f64;
            let r = u / half as f64;
            let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            let x = 2.0 * fc * u;
            let sinc = if x == 0.0 { 1.0 } else { (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x) };
            2.0 * fc * sinc * window
        })
        .collect();

    let n = series.len() as isize;
    let x: Vec<f64> = series.iter().map(|v| v.as_f64()).collect();
    let ext = |j: isize| -> f64 {
        if j < 0 {
            let r = -j;
            if r < n { 2.0 * x[0] - x[r as usize] } else { x[0] }
        } else if j >= n {
            let r = 2 * (n - 1) - j;
            if r >= 0 { 2.0 * x[(n - 1) as usize] - x[r as usize] } else { x[(n - 1) as usize] }
        } else {
            x[j as usize]
        }
    };

    let (up_i, down_i) = (up as isize, down as isize);
    let n_out = (series.len() * up).div_ceil(down);
    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out as isize {
        let pos = m * down_i;
        // input samples j with |pos − j·up| ≤ half
        let j_lo = (pos - half).div_euclid(up_i) + if (pos - half).rem_euclid(up_i) == 0 { 0 } else { 1 };
        let j_hi = (pos + half).div_euclid(up_i);
        let mut acc = 0.0;
        let mut gain = 0.0;
        for j in j_lo..=j_hi {
            let h = kernel[(pos - j * up_i + half) as usize];
            acc += h * ext(j);
            gain += h;
        }
        out.push(F::lit(acc / gain));
    }
    Ok(out)
}

/// Subtracts the mean and divides by the population standard deviation.
pub fn zscore<F: Real>(series: &[F]) -> Result<Vec<F>> {
    if series.len() < 2 {
        return Err(Error::InvalidArgument(format!("z-score needs at least 2 samples, got {}", series.len())));
    }
    if let Some(i) = series.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let n = F::lit(series.len() as f64);
    let mean = series.iter().copied().sum::<F>() / n;
    let var = series.iter().map(|&x| (x - mean).powi(2)).sum::<F>() / n;
    if !(var > F::zero()) {
        return Err(Error::ZeroVariance);
    }
    let sd = var.sqrt();
    Ok(series.iter().map(|&x| (x - mean) / sd).collect())
}

/// Labels sample `n` with 1 iff `n / rate` lies in `[onset, onset + duration)`
/// for some event. Returns the track and the number of events that ran past
/// the end of the recording and were clipped.
pub fn events_to_labels(events: &[EventAnnotation], sample_rate: f64, n_samples: usize) -> Result<(LabelTrack, usize)> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidRate(format!("{sample_rate} Hz")));
    }
    let mut labels = vec![0usize; n_samples];
    let mut clipped = 0;
    let eps = 1e-9;
    for ev in events {
        if !(ev.onset >= 0.0 && ev.duration > 0.0) {
            return Err(Error::InvalidArgument(format!("event onset={} duration={}", ev.onset, ev.duration)));
        }
        let start = (ev.onset * sample_rate - eps).ceil().max(0.0) as usize;
        let end_f = ((ev.onset + ev.duration) * sample_rate - eps).ceil();
        let end = if end_f > n_samples as f64 {
            clipped += 1;
            n_samples
        } else {
            end_f as usize
        };
        for l in labels.iter_mut().take(end).skip(start) {
            *l = 1;
        }
    }
    Ok((LabelTrack { labels, sample_rate }, clipped))
}

/// Per-sample union of several scorers' tracks.
pub fn merge_expert_labels(tracks: &[LabelTrack]) -> Result<LabelTrack> {
    let first = tracks.first().ok_or(Error::EmptyBatch)?;
    let mut out = first.clone();
    for t in &tracks[1..] {
        if t.len() != out.len() {
            return Err(Error::LengthMismatch { expected: out.len(), got: t.len() });
        }
        for (o, &l) in out.labels.iter_mut().zip(&t.labels) {
            *o = (*o).max(l);
        }
    }
    Ok(out)
}
