//! CSV emission and parsing for benchmark records.
//!
//! Fixed column order, locale-independent decimal formatting. Floats use
//! Rust's shortest round-trip representation, so parse(emit(records))
//! reproduces every field.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::bench::runner::BenchRecord;
use crate::error::{Error, Result};
use crate::instrument::{ExecPath, OpCounters};
use crate::layer::PrimitiveKind;

pub const CSV_HEADER: &str = "experiment,primitive,path,groups,kernel,input_width,in_channels,\
out_channels,dec_input,dec_weight,dec_output,seed,repeats,macs_theoretical,params,\
latency_mean_ns,latency_std_ns,mul_count,add_sub_count,abs_count,loads,stores";

fn format_record(r: &BenchRecord) -> String {
    let mut line = String::new();
    write!(
        line,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.experiment,
        r.primitive,
        r.path,
        r.groups,
        r.kernel,
        r.input_width,
        r.in_channels,
        r.out_channels,
        r.dec_input,
        r.dec_weight,
        r.dec_output,
        r.seed,
        r.repeats,
        r.macs_theoretical,
        r.params,
        r.latency_mean_ns,
        r.latency_std_ns,
        r.counters.mul,
        r.counters.add_sub,
        r.counters.abs_ops,
        r.counters.loads,
        r.counters.stores,
    )
    .expect("writing to a String cannot fail");
    line
}

/// Writes header plus one row per record.
pub fn write_csv<W: Write>(records: &[BenchRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", format_record(r))?;
    }
    Ok(())
}

pub fn write_csv_file(records: &[BenchRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    write_csv(records, &mut buf).map_err(|e| Error::io(path, e))?;
    buf.flush().map_err(|e| Error::io(path, e))
}

fn parse_field<T: std::str::FromStr>(fields: &[&str], idx: usize, line_no: usize) -> Result<T> {
    fields[idx]
        .parse()
        .map_err(|_| Error::Parse(format!("line {line_no}: bad value '{}' in column {idx}", fields[idx])))
}

/// Parses CSV text produced by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse(format!("unexpected CSV header: {header}")));
        }
        None => return Err(Error::Parse("empty CSV".to_string())),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 22 {
            return Err(Error::Parse(format!("line {}: expected 22 fields, got {}", i + 1, fields.len())));
        }
        let n = i + 1;
        records.push(BenchRecord {
            experiment: parse_field(&fields, 0, n)?,
            primitive: PrimitiveKind::parse(fields[1])?,
            path: ExecPath::parse(fields[2])?,
            groups: parse_field(&fields, 3, n)?,
            kernel: parse_field(&fields, 4, n)?,
            input_width: parse_field(&fields, 5, n)?,
            in_channels: parse_field(&fields, 6, n)?,
            out_channels: parse_field(&fields, 7, n)?,
            dec_input: parse_field(&fields, 8, n)?,
            dec_weight: parse_field(&fields, 9, n)?,
            dec_output: parse_field(&fields, 10, n)?,
            seed: parse_field(&fields, 11, n)?,
            repeats: parse_field(&fields, 12, n)?,
            macs_theoretical: parse_field(&fields, 13, n)?,
            params: parse_field(&fields, 14, n)?,
            latency_mean_ns: parse_field(&fields, 15, n)?,
            latency_std_ns: parse_field(&fields, 16, n)?,
            counters: OpCounters {
                mul: parse_field(&fields, 17, n)?,
                add_sub: parse_field(&fields, 18, n)?,
                abs_ops: parse_field(&fields, 19, n)?,
                loads: parse_field(&fields, 20, n)?,
                stores: parse_field(&fields, 21, n)?,
            },
        });
    }
    Ok(records)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<BenchRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_record(seed: u64) -> BenchRecord {
        BenchRecord {
            experiment: 3,
            primitive: PrimitiveKind::Grouped,
            path: ExecPath::Fast,
            groups: 2,
            kernel: 3,
            input_width: 16,
            in_channels: 16,
            out_channels: 16,
            dec_input: 3,
            dec_weight: 3,
            dec_output: 3,
            seed,
            repeats: 50,
            macs_theoretical: 294_912,
            params: 1_152,
            latency_mean_ns: 123456.789,
            latency_std_ns: 321.0625,
            counters: OpCounters { mul: 294_912, add_sub: 294_912, abs_ops: 0, loads: 400_000, stores: 9_000 },
        }
    }

    #[test]
    fn empty_record_list_writes_header_only() {
        let mut out = Vec::new();
        write_csv(&[], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.trim_end(), CSV_HEADER);
        assert_eq!(parse_csv(&text).unwrap(), vec![]);
    }

    #[test]
    fn single_record_round_trips() {
        let records = vec![sample_record(42)];
        let mut out = Vec::new();
        write_csv(&records, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(parse_csv(&text).unwrap(), records);
    }

    #[test]
    fn header_mismatch_rejected() {
        assert!(matches!(parse_csv("bogus,header\n1,2\n"), Err(Error::Parse(_))));
    }

    proptest! {
        #[test]
        fn arbitrary_records_round_trip(
            seeds in proptest::collection::vec(any::<u64>(), 0..8),
            mean in 0.0f64..1e9,
            std in 0.0f64..1e6,
        ) {
            let records: Vec<BenchRecord> = seeds
                .iter()
                .map(|&s| {
                    let mut r = sample_record(s);
                    r.latency_mean_ns = mean;
                    r.latency_std_ns = std;
                    r
                })
                .collect();
            let mut out = Vec::new();
            write_csv(&records, &mut out).unwrap();
            let parsed = parse_csv(&String::from_utf8(out).unwrap()).unwrap();
            prop_assert_eq!(parsed, records);
        }
    }
}
