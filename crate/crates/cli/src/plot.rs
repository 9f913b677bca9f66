//! CSV plot data. Column headers are fixed per subcommand and listed in the README.

use std::io::Write;

use ratdyn::SpherePoint;

use crate::exit::Failure;

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Table { headers: headers.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// Formats a float so it round-trips exactly.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// `(re, im)` columns; infinity is written as `inf, 0`.
pub fn point(x: &SpherePoint) -> [String; 2] {
    match x.to_complex() {
        Some(z) => [num(z.re), num(z.im)],
        None => ["inf".into(), "0.0".into()],
    }
}

pub fn emit(table: &Table, format: &str, out: impl Write) -> Result<(), Failure> {
    if format != "csv" {
        return Err(Failure::usage(format!("unsupported plot format {format:?} (only csv)")));
    }
    let io = |e: csv::Error| Failure::usage(format!("writing csv: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.headers).map_err(io)?;
    for r in &table.rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| Failure::usage(format!("writing csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        emit(&Table::new(&["checkpoint", "oscillation_diameter"]), "csv", &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "checkpoint,oscillation_diameter\n");
    }

    #[test]
    fn other_formats_are_refused() {
        assert!(emit(&Table::default(), "png", Vec::new()).is_err());
    }
}
