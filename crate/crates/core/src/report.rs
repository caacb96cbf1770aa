//! Stable serialization helpers shared by every artifact writer.

use serde::Serialize;

/// Formats a float with 17 significant digits, the shortest width that
/// round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Serializer for `f64` fields that writes the 17-digit string form.
pub fn ser_f64<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_f64(*x))
}

pub fn ser_f64_vec<S: serde::Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&fmt_f64(*x))?;
    }
    seq.end()
}

pub fn ser_opt_f64<S: serde::Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&fmt_f64(*v)),
        None => s.serialize_none(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}

/// Minimal CSV writer: fixed header, quoted text cells.
#[derive(Debug)]
pub struct Csv {
    comment: String,
    writer: csv::Writer<Vec<u8>>,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { comment: String::new(), writer, columns: header.len() }
    }

    /// Prepends a `# ...` comment line (used to echo the run config).
    pub fn with_comment(mut self, comment: &str) -> Self {
        for line in comment.lines() {
            self.comment.push_str("# ");
            self.comment.push_str(line);
            self.comment.push('\n');
        }
        self
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "CSV row width mismatch");
        self.writer.write_record(cells).expect("in-memory write");
    }

    pub fn finish(self) -> String {
        let body = self.writer.into_inner().expect("in-memory flush");
        self.comment + &String::from_utf8(body).expect("cells are UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_17_digits() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.25] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.8), "8.0000000000000004e-1");
    }

    #[test]
    fn csv_quotes_structured_cells() {
        let mut csv = Csv::new(&["g", "n"]);
        csv.row(&["(1,2)".into(), "3".into()]);
        assert_eq!(csv.with_comment("seed 7").finish(), "# seed 7\ng,n\n\"(1,2)\",3\n");
    }
}
