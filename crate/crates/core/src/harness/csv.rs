use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::MetricsRow;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "scheme,N_I,snr_db,blocks,error_blocks,bler,mean_runtime_per_block,mean_inversion_count";

/// Shortest decimal that round-trips `x` rounded to `digits` significant
/// digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses");
    format!("{rounded}")
}

fn fields(r: &MetricsRow) -> [String; 8] {
    [
        r.scheme.clone(),
        r.iterations.to_string(),
        format_sig(r.snr_db, 6),
        r.blocks.to_string(),
        r.error_blocks.to_string(),
        format_sig(r.bler, 6),
        format_sig(r.mean_runtime_per_block, 6),
        format_sig(r.mean_inversion_count, 6),
    ]
}

/// One CSV line without the trailing newline.
pub fn format_row(r: &MetricsRow) -> String {
    fields(r).join(",")
}

fn io_error(path: &str, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_string(),
        source: e.into(),
    }
}

/// Writes the header and all rows to `out`.
pub fn write_csv<W: Write>(rows: &[MetricsRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record(fields(r))?;
    }
    w.flush()
}

pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let file = super::create_file(path)?;
    write_csv(rows, file).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Incremental CSV output: the header on creation, then one flushed line per
/// row.
pub struct CsvWriter {
    path: PathBuf,
    out: csv::Writer<File>,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let mut out = csv::Writer::from_path(path).map_err(|e| io_error(&display, e))?;
        out.write_record(CSV_HEADER.split(','))
            .map_err(|e| io_error(&display, e))?;
        out.flush().map_err(|source| Error::Io {
            path: display,
            source,
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn write_row(&mut self, row: &MetricsRow) -> Result<()> {
        let path = self.path.display().to_string();
        self.out
            .write_record(fields(row))
            .map_err(|e| io_error(&path, e))?;
        self.out
            .flush()
            .map_err(|source| Error::Io { path, source })
    }
}

/// Parses text produced by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Config(format!("CSV header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Config(format!("CSV: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> MetricsRow {
        MetricsRow {
            scheme: "idd".into(),
            iterations: 3,
            snr_db: 10.5,
            blocks: 300,
            error_blocks: 7,
            bler: 7.0 / 300.0,
            mean_runtime_per_block: 1.234_567_89e-3,
            mean_inversion_count: 3.0,
        }
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(7.0 / 300.0, 6), "0.0233333");
        assert_eq!(format_sig(123_456_789.0, 6), "123457000");
        assert_eq!(format_sig(0.0, 6), "0");
        assert_eq!(format_sig(3.0, 6), "3");
        assert_eq!(format_sig(-2.5e-7, 6), "-0.00000025");
    }

    #[test]
    fn header_only_and_single_row() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
        let mut buf = Vec::new();
        write_csv(&[row()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n'));
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "idd,3,10.5,300,7,0.0233333,0.00123457,3"
        );
    }

    #[test]
    fn parse_back() {
        let r = row();
        let mut buf = Vec::new();
        write_csv(&[r.clone(), r.clone()], &mut buf).unwrap();
        let parsed = parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(parsed.len(), 2);
        let p = &parsed[0];
        assert_eq!(
            (p.scheme.as_str(), p.iterations, p.blocks, p.error_blocks),
            ("idd", 3, 300, 7)
        );
        assert!((p.bler - r.bler).abs() <= 5e-6 * r.bler);
        assert!(
            (p.mean_runtime_per_block - r.mean_runtime_per_block).abs()
                <= 5e-6 * r.mean_runtime_per_block
        );
        assert!(parse_csv("nope\n").is_err());
    }
}
