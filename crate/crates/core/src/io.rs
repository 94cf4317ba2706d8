//! Deterministic artifact serialization: JSON with fixed key order and
//! floats at 17 significant digits, plus fixed-header CSV rows.

use serde::Serialize;

use crate::Result;

struct SigFigFormatter;

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize to JSON with struct-declaration key order and every float at
/// 17 significant digits, so identical inputs produce byte-identical text.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFigFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serializer emits utf-8"))
}

/// 17-significant-digit float text used in CSV artifacts.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// One CSV line from already-formatted cells.
pub fn csv_line(cells: &[String]) -> String {
    cells.join(",")
}
