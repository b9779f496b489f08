//! CSV output shared by the command line tool and the examples.
//!
//! Every table has a header row, numbers printed with 17 significant
//! digits, and a trailing `# config-hash: <sha256>` comment naming the
//! configuration that produced it.

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Result;

/// `x` with 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// An in-memory table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    /// Row of numbers.
    pub fn push(&mut self, row: &[f64]) {
        self.push_text(row.iter().map(|x| num(*x)).collect());
    }

    /// Row of preformatted cells.
    pub fn push_text(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The CSV text, ending with the hash comment.
    pub fn render(&self, config_hash: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in std::iter::once(&self.header).chain(&self.rows) {
            w.write_record(r).expect("writing to memory");
        }
        let mut out = String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 cells");
        out.push_str("# config-hash: ");
        out.push_str(config_hash);
        out.push('\n');
        out
    }

    pub fn write_to<W: Write + ?Sized>(&self, w: &mut W, config_hash: &str) -> Result<()> {
        w.write_all(self.render(config_hash).as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: &Path, config_hash: &str) -> Result<()> {
        std::fs::write(path, self.render(config_hash))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [std::f64::consts::PI, -1e-300, 0.1 + 0.2, 12345.678] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["t", "a"]);
        t.push(&[0.5, 2.0]);
        let s = t.render("abc");
        assert_eq!(s, "t,a\n5.0000000000000000e-1,2.0000000000000000e0\n# config-hash: abc\n");
        assert_eq!(sha256_hex(b"").len(), 64);
        assert!(sha256_hex(b"").starts_with("e3b0c442"));
    }
}
