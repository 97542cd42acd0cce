//! CSV formats for pilots, channels and diagnostics.
//!
//! Floats are written with 17 significant digits so files round-trip
//! exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{BandPlan, CsiKind, CsiMatrix, HandshakeSamples};
use crate::splicer::RelativeCirEstimate;

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value {s:?}")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value {s:?}")))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers()?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header {:?}, found {:?}",
            expected.join(","),
            h.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// `band,subcarrier,re,im` preceded by a `# kind=<kind>` line.
pub fn write_csi<W: Write>(mut out: W, csi: &CsiMatrix, plan: &BandPlan) -> Result<()> {
    csi.check_plan(plan)?;
    writeln!(out, "# kind={}", csi.kind().as_str())?;
    writeln!(out, "band,subcarrier,re,im")?;
    for m in 0..plan.num_bands() {
        for (v, n) in csi.band(m).iter().zip(plan.indices()) {
            writeln!(out, "{m},{n},{},{}", fmt(v.re), fmt(v.im))?;
        }
    }
    Ok(())
}

pub fn read_csi<R: Read>(input: R, plan: &BandPlan) -> Result<CsiMatrix> {
    let mut buf = BufReader::new(input);
    let mut first = String::new();
    buf.read_line(&mut first)?;
    let kind = first
        .trim()
        .strip_prefix("# kind=")
        .and_then(CsiKind::parse)
        .ok_or_else(|| Error::Parse(format!("missing or unknown kind line {:?}", first.trim())))?;
    let mut rdr = reader(buf);
    check_header(&mut rdr, &["band", "subcarrier", "re", "im"])?;
    let mut values = vec![Complex64::new(0.0, 0.0); plan.total_subcarriers()];
    let mut seen = vec![false; values.len()];
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Parse(format!("expected 4 fields, found {}", rec.len())));
        }
        let m = parse_usize(&rec[0], "band")?;
        let n: i64 = rec[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad subcarrier value {:?}", &rec[1])))?;
        if m >= plan.num_bands() || n.unsigned_abs() as i64 > plan.half_width() {
            return Err(Error::Parse(format!("sample ({m}, {n}) lies outside the band plan")));
        }
        let idx = m * plan.subcarriers() + plan.position(n);
        values[idx] = Complex64::new(parse_f64(&rec[2], "re")?, parse_f64(&rec[3], "im")?);
        seen[idx] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse(format!(
            "missing sample for band {} subcarrier {}",
            missing / plan.subcarriers(),
            (missing % plan.subcarriers()) as i64 - plan.half_width()
        )));
    }
    CsiMatrix::from_values(plan, values, kind)
}

/// `band,tx_re,tx_im,rx_re,rx_im`.
pub fn write_handshake<W: Write>(mut out: W, samples: &HandshakeSamples) -> Result<()> {
    writeln!(out, "band,tx_re,tx_im,rx_re,rx_im")?;
    for (m, (a, b)) in samples.tx.iter().zip(&samples.rx).enumerate() {
        writeln!(out, "{m},{},{},{},{}", fmt(a.re), fmt(a.im), fmt(b.re), fmt(b.im))?;
    }
    Ok(())
}

pub fn read_handshake<R: Read>(input: R) -> Result<HandshakeSamples> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["band", "tx_re", "tx_im", "rx_re", "rx_im"])?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::Parse(format!("expected 5 fields, found {}", rec.len())));
        }
        let m = parse_usize(&rec[0], "band")?;
        let tx = Complex64::new(parse_f64(&rec[1], "tx_re")?, parse_f64(&rec[2], "tx_im")?);
        let rx = Complex64::new(parse_f64(&rec[3], "rx_re")?, parse_f64(&rec[4], "rx_im")?);
        rows.push((m, tx, rx));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        return Err(Error::Parse("handshake bands must be numbered 0..M without gaps".into()));
    }
    HandshakeSamples::new(rows.iter().map(|r| r.1).collect(), rows.iter().map(|r| r.2).collect())
}

/// `delay_s,gain_re,gain_im`.
pub fn write_cir<W: Write>(mut out: W, taps: &[(f64, Complex64)]) -> Result<()> {
    writeln!(out, "delay_s,gain_re,gain_im")?;
    for (d, g) in taps {
        writeln!(out, "{},{},{}", fmt(*d), fmt(g.re), fmt(g.im))?;
    }
    Ok(())
}

pub fn read_cir<R: Read>(input: R) -> Result<Vec<(f64, Complex64)>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["delay_s", "gain_re", "gain_im"])?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Parse(format!("expected 3 fields, found {}", rec.len())));
            }
            Ok((
                parse_f64(&rec[0], "delay_s")?,
                Complex64::new(parse_f64(&rec[1], "gain_re")?, parse_f64(&rec[2], "gain_im")?),
            ))
        })
        .collect()
}

/// `grid_index,delay_s,gain_re,gain_im` with physical gains.
pub fn write_relative_cir<W: Write>(mut out: W, est: &RelativeCirEstimate) -> Result<()> {
    writeln!(out, "grid_index,delay_s,gain_re,gain_im")?;
    for (i, g) in est.taps() {
        writeln!(out, "{i},{},{},{}", fmt(est.delay(i)), fmt(g.re), fmt(g.im))?;
    }
    Ok(())
}

/// `tau_s,abs_Q` for one band's dual polynomial sampled uniformly over `[0, 1/f_s)`.
pub fn write_dual<W: Write>(mut out: W, modulus: &[f64], plan: &BandPlan) -> Result<()> {
    writeln!(out, "tau_s,abs_Q")?;
    let step = plan.max_delay() / modulus.len() as f64;
    for (k, q) in modulus.iter().enumerate() {
        writeln!(out, "{},{}", fmt(k as f64 * step), fmt(*q))?;
    }
    Ok(())
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    Ok(std::io::BufWriter::new(File::create(path)?))
}

pub fn open(path: &Path) -> Result<File> {
    Ok(File::open(path)?)
}
