//! Plain-text file formats shared by the command-line tools.
//!
//! - Signal files hold one value per line, or `time,value` pairs (the time
//!   column is ignored). Lines starting with `#` are headers; a
//!   `# rate=<Hz>` header records the sample rate.
//! - Annotation files hold `onset_seconds,duration_seconds[,scorer_id]`
//!   per line; the scorer id defaults to 1.
//! - Label files hold one integer label per line with a rate header. Truth
//!   files written by the simulator add `,counter,tau` columns; label
//!   readers only use the first column.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::{EventAnnotation, LabelTrack};
use crate::HiddenPath;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

fn fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect()
}

/// Header lines, data lines with their 1-based line numbers.
fn scan(text: &str) -> (Vec<&str>, Vec<(usize, &str)>) {
    let mut headers = Vec::new();
    let mut data = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            headers.push(h.trim());
        } else {
            data.push((i + 1, line));
        }
    }
    (headers, data)
}

fn header_rate(path: &Path, headers: &[&str]) -> Result<Option<f64>> {
    for h in headers {
        if let Some(v) = h.strip_prefix("rate=") {
            let rate: f64 = v.trim().parse().map_err(|_| parse_err(path, 0, format!("bad rate header `{h}`")))?;
            if !(rate.is_finite() && rate > 0.0) {
                return Err(parse_err(path, 0, format!("bad rate header `{h}`")));
            }
            return Ok(Some(rate));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalFile {
    pub samples: Vec<f64>,
    pub rate: Option<f64>,
}

pub fn read_signal(path: impl AsRef<Path>) -> Result<SignalFile> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let (headers, data) = scan(&text);
    let rate = header_rate(path, &headers)?;
    let mut samples = Vec::with_capacity(data.len());
    for (ln, line) in data {
        let f = fields(line);
        let value = match f.as_slice() {
            [v] | [_, v] => v,
            _ => return Err(parse_err(path, ln, format!("expected 1 or 2 columns, got {}", f.len()))),
        };
        let x: f64 = value.parse().map_err(|_| parse_err(path, ln, format!("not a number: `{value}`")))?;
        if !x.is_finite() {
            return Err(parse_err(path, ln, "non-finite sample"));
        }
        samples.push(x);
    }
    Ok(SignalFile { samples, rate })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, w: BufWriter<fs::File>) -> Result<()> {
    w.into_inner().map_err(|e| Error::io(path, e.into_error()))?.sync_all().map_err(|e| Error::io(path, e))
}

/// Writes a processed sequence: rate header plus one value per line.
pub fn write_sequence(path: impl AsRef<Path>, samples: &[f64], rate: f64) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut go = || -> std::io::Result<()> {
        writeln!(w, "# rate={rate}")?;
        for x in samples {
            writeln!(w, "{x}")?;
        }
        Ok(())
    };
    go().map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<EventAnnotation>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let (_, data) = scan(&text);
    let mut out = Vec::new();
    for (ln, line) in data {
        let f = fields(line);
        if !(2..=3).contains(&f.len()) {
            return Err(parse_err(path, ln, "expected onset,duration[,scorer_id]"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(path, ln, format!("not a number: `{s}`")));
        let onset = num(f[0])?;
        let duration = num(f[1])?;
        let scorer_id = match f.get(2) {
            Some(s) => s.parse().map_err(|_| parse_err(path, ln, format!("bad scorer id `{s}`")))?,
            None => 1,
        };
        if !(onset >= 0.0 && duration > 0.0 && onset.is_finite() && duration.is_finite()) {
            return Err(parse_err(path, ln, "onset must be >= 0 and duration > 0"));
        }
        out.push(EventAnnotation { onset, duration, scorer_id });
    }
    Ok(out)
}

pub fn write_labels(path: impl AsRef<Path>, track: &LabelTrack) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut go = || -> std::io::Result<()> {
        writeln!(w, "# rate={}", track.sample_rate)?;
        for l in &track.labels {
            writeln!(w, "{l}")?;
        }
        Ok(())
    };
    go().map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

/// Reads a label or truth file. `fallback_rate` is used when the file has
/// no rate header.
pub fn read_labels(path: impl AsRef<Path>, fallback_rate: Option<f64>) -> Result<LabelTrack> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let (headers, data) = scan(&text);
    let rate = header_rate(path, &headers)?
        .or(fallback_rate)
        .ok_or_else(|| parse_err(path, 0, "no `# rate=` header and no rate given"))?;
    let mut labels = Vec::with_capacity(data.len());
    for (ln, line) in data {
        let first = fields(line)[0];
        labels.push(first.parse().map_err(|_| parse_err(path, ln, format!("not a label: `{first}`")))?);
    }
    Ok(LabelTrack { labels, sample_rate: rate })
}

/// Writes `label,counter,tau` lines for a simulated path.
pub fn write_truth(path: impl AsRef<Path>, hidden: &HiddenPath<f64>, rate: f64) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut go = || -> std::io::Result<()> {
        writeln!(w, "# rate={rate}")?;
        writeln!(w, "# columns=label,counter,tau")?;
        for n in 0..hidden.len() {
            let tau = hidden.tau.as_ref().map_or(1.0, |t| t[n]);
            writeln!(w, "{},{},{}", hidden.z[n], hidden.d[n], tau)?;
        }
        Ok(())
    };
    go().map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<(HiddenPath<f64>, Option<f64>)> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let (headers, data) = scan(&text);
    let rate = header_rate(path, &headers)?;
    let (mut z, mut d, mut tau) = (Vec::new(), Vec::new(), Vec::new());
    for (ln, line) in data {
        let f = fields(line);
        if f.len() != 3 {
            return Err(parse_err(path, ln, "expected label,counter,tau"));
        }
        let bad = |s: &str| parse_err(path, ln, format!("bad value `{s}`"));
        z.push(f[0].parse().map_err(|_| bad(f[0]))?);
        d.push(f[1].parse().map_err(|_| bad(f[1]))?);
        tau.push(f[2].parse().map_err(|_| bad(f[2]))?);
    }
    Ok((HiddenPath { z, d, tau: Some(tau) }, rate))
}

/// Writes one row of `K` comma-separated probabilities per sample.
pub fn write_posteriors(path: impl AsRef<Path>, rows: &[Vec<f64>], rate: f64) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut go = || -> std::io::Result<()> {
        writeln!(w, "# rate={rate}")?;
        for r in rows {
            let cells: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    };
    go().map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str, body: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("rarhsmm-formats-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn signal_one_and_two_columns() {
        let p = tmp("a.txt", "# recorded\n# rate=200\n1.5\n-2\n\n3e-1\n");
        let s = read_signal(&p).unwrap();
        assert_eq!(s.samples, vec![1.5, -2.0, 0.3]);
        assert_eq!(s.rate, Some(200.0));
        let p = tmp("b.txt", "0.0,4\n0.005, 5\n0.010 6\n");
        assert_eq!(read_signal(&p).unwrap().samples, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn signal_errors_carry_line_numbers() {
        let p = tmp("c.txt", "# rate=50\n1\nabc\n");
        let e = read_signal(&p).unwrap_err().to_string();
        assert!(e.contains(":3:"), "{e}");
        let e = read_signal("/nonexistent/x.txt").unwrap_err().to_string();
        assert!(e.contains("/nonexistent/x.txt"), "{e}");
    }

    #[test]
    fn annotations() {
        let p = tmp("ann.csv", "# onset,duration,scorer\n1.0,0.5\n2.5,1.0,2\n");
        let a = read_annotations(&p).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].scorer_id, 1);
        assert_eq!(a[1], EventAnnotation { onset: 2.5, duration: 1.0, scorer_id: 2 });
        let p = tmp("bad.csv", "1.0,-1\n");
        assert!(read_annotations(&p).is_err());
    }

    #[test]
    fn labels_and_truth_round_trip() {
        let dir = std::env::temp_dir().join(format!("rarhsmm-formats-rt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let track = LabelTrack { labels: vec![0, 1, 1, 0], sample_rate: 50.0 };
        write_labels(dir.join("l.txt"), &track).unwrap();
        assert_eq!(read_labels(dir.join("l.txt"), None).unwrap(), track);
        let path = HiddenPath { z: vec![0, 1, 1], d: vec![1, 2, 1], tau: Some(vec![1.0, 0.25, 3.5]) };
        write_truth(dir.join("t.txt"), &path, 50.0).unwrap();
        let (back, rate) = read_truth(dir.join("t.txt")).unwrap();
        assert_eq!(back, path);
        assert_eq!(rate, Some(50.0));
        assert_eq!(read_labels(dir.join("t.txt"), None).unwrap().labels, vec![0, 1, 1]);
        let seq = [0.1, -2.5, 1e-300];
        write_sequence(dir.join("s.txt"), &seq, 50.0).unwrap();
        let s = read_signal(dir.join("s.txt")).unwrap();
        assert_eq!(s.samples, seq);
    }
}
