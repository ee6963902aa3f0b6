//! Bit-stable file emission: trace CSV with 17-significant-digit values so
//! every f64 survives a round trip, and flat key/value run summaries.

use std::io::{self, Write};

use alq_core::sim::{RunSummary, Trace};

/// Write the trace as CSV: header row of channel names, then one row per
/// decimated tick. LF line endings, `.` decimal separator, 17 significant
/// digits.
pub fn write_trace_csv(trace: &Trace, out: &mut impl Write, decimate: usize) -> io::Result<()> {
    debug_assert!(decimate > 0);
    write!(out, "t")?;
    for (name, _) in &trace.channels {
        write!(out, ",{name}")?;
    }
    out.write_all(b"\n")?;
    let mut k = 0;
    while k < trace.t.len() {
        write!(out, "{:.16e}", trace.t[k])?;
        for (_, values) in &trace.channels {
            write!(out, ",{:.16e}", values[k])?;
        }
        out.write_all(b"\n")?;
        k += decimate;
    }
    Ok(())
}

/// Parse a trace CSV produced by [`write_trace_csv`] back into memory.
pub fn parse_trace_csv(text: &str) -> Result<Trace, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let mut cols = header.split(',');
    if cols.next() != Some("t") {
        return Err("first column must be t".into());
    }
    let names: Vec<String> = cols.map(String::from).collect();
    let mut t = Vec::new();
    let mut channels: Vec<(String, Vec<f64>)> =
        names.into_iter().map(|n| (n, Vec::new())).collect();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let tv: f64 = fields
            .next()
            .ok_or_else(|| format!("line {}: missing t", lineno + 2))?
            .parse()
            .map_err(|e| format!("line {}: {e}", lineno + 2))?;
        t.push(tv);
        for (slot, field) in channels.iter_mut().zip(fields) {
            slot.1.push(
                field
                    .parse()
                    .map_err(|e| format!("line {}: {e}", lineno + 2))?,
            );
        }
    }
    if channels.iter().any(|(_, v)| v.len() != t.len()) {
        return Err("ragged rows".into());
    }
    Ok(Trace { t, channels })
}

/// One metric per line, `name = value`.
pub fn write_summary(summary: &RunSummary, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "final_theta_err = {:.16e}", summary.final_theta_err)?;
    writeln!(out, "final_eref_err = {:.16e}", summary.final_eref_err)?;
    writeln!(out, "monotone_fraction = {:.16e}", summary.monotone_fraction)?;
    writeln!(out, "omega_peak = {:.16e}", summary.omega_peak)?;
    match summary.activation_time {
        Some(t) => writeln!(out, "activation_time = {t:.16e}")?,
        None => writeln!(out, "activation_time = none")?,
    }
    writeln!(out, "cost_adaptive = {:.16e}", summary.cost_adaptive)?;
    writeln!(out, "cost_ideal = {:.16e}", summary.cost_ideal)?;
    writeln!(out, "overflow = {}", summary.overflow_flag)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_writes_header_only() {
        let trace = Trace {
            t: vec![],
            channels: vec![("x0".into(), vec![]), ("u0".into(), vec![])],
        };
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf, 100).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x0,u0\n");
    }

    #[test]
    fn csv_round_trips_bit_exactly() {
        let values = vec![
            0.1,
            -1.0 / 3.0,
            2.0f64.sqrt() * 1e-300,
            std::f64::consts::PI * 1e255,
            -0.0,
            5e-324,
        ];
        let trace = Trace {
            t: (0..values.len()).map(|k| k as f64 * 1e-4).collect(),
            channels: vec![("v".into(), values.clone())],
        };
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf, 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let back = parse_trace_csv(&text).unwrap();
        for (a, b) in back.channels[0].1.iter().zip(&values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn decimation_keeps_every_kth_row() {
        let trace = Trace {
            t: (0..1000).map(|k| k as f64).collect(),
            channels: vec![("v".into(), vec![1.0; 1000])],
        };
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf, 100).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 10);
    }
}
