//! Tab-separated field tables.

use std::io::{self, Write};

/// Named columns with one row per node or sample; coordinates come first and
/// the value last.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{}", self.header.join("\t"))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| decimal(v)).collect();
            writeln!(out, "{}", cells.join("\t"))?;
        }
        Ok(())
    }
}

/// Plain decimal text with 12 significant digits.
pub fn decimal(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let digits = (11 - exp).clamp(0, 40) as usize;
    let s = format!("{v:.digits$}");
    // Rounding can carry into a new leading digit.
    let s = if s
        .trim_start_matches('-')
        .replace('.', "")
        .trim_start_matches('0')
        .len()
        > 12
        && digits > 0
    {
        format!("{v:.prec$}", prec = digits - 1)
    } else {
        s
    };
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(decimal(1.3103706971044482), "1.3103706971");
        assert_eq!(decimal(-0.000123456789012345), "-0.000123456789012");
        assert_eq!(decimal(123456.7890123456), "123456.789012");
        assert_eq!(decimal(9.99999999999999), "10");
        assert_eq!(decimal(0.0), "0");
        assert_eq!(decimal(2.5), "2.5");
        assert_eq!(decimal(f64::INFINITY), "inf");
    }

    #[test]
    fn header_then_rows() {
        let mut t = Table::new("t", &["x", "u"]);
        t.push(vec![-1.0, 0.5]);
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x\tu\n-1\t0.5\n");
    }
}
