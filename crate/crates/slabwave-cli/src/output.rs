//! CSV and JSON emission. Every number passes a finiteness guard first;
//! files are written whole after the computation finishes.

use crate::error::CliError;
use serde_json::Value;
use std::path::{Path, PathBuf};

/// Shortest round-trip text, exponent form outside [1e-4, 1e15).
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
    footer: Vec<String>,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Csv { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new(), footer: Vec::new() }
    }

    pub fn row(&mut self, r: Vec<f64>) {
        debug_assert_eq!(r.len(), self.header.len());
        self.rows.push(r);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.footer.push(line.into());
    }

    pub fn render(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::new(2, format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for (i, r) in self.rows.iter().enumerate() {
            if let Some((c, x)) = r.iter().enumerate().find(|(_, x)| !x.is_finite()) {
                return Err(CliError::new(6, format!("non-finite value {x} in row {i}, column `{}`", self.header[c])));
            }
            w.write_record(r.iter().map(|&x| fmt_num(x))).map_err(io)?;
        }
        let mut text = String::from_utf8(w.into_inner().map_err(|e| CliError::new(2, format!("csv: {e}")))?)
            .expect("csv output is UTF-8");
        for f in &self.footer {
            text.push_str("# ");
            text.push_str(f);
            text.push('\n');
        }
        Ok(text)
    }
}

/// Finite-number JSON value; non-finite input is an error rather than null.
pub fn num(x: f64) -> Result<Value, CliError> {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| CliError::new(6, format!("non-finite value {x} in JSON output")))
}

/// Rejects nulls anywhere in `v` (serde_json turns NaN into null).
pub fn check_json(v: &Value, path: &str) -> Result<(), CliError> {
    match v {
        Value::Null => Err(CliError::new(6, format!("null or non-finite value at `{path}` in JSON output"))),
        Value::Array(a) => a.iter().enumerate().try_for_each(|(i, x)| check_json(x, &format!("{path}[{i}]"))),
        Value::Object(o) => o.iter().try_for_each(|(k, x)| check_json(x, &format!("{path}.{k}"))),
        _ => Ok(()),
    }
}

pub fn render_json(v: &Value) -> Result<String, CliError> {
    check_json(v, "$")?;
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::new(6, format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub struct OutDir {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutDir {
    pub fn new(dir: &Path) -> Self {
        OutDir { dir: dir.to_path_buf(), written: Vec::new() }
    }

    pub fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir.display().to_string(), e))?;
        let p = self.dir.join(name);
        std::fs::write(&p, text).map_err(|e| CliError::io(&p.display().to_string(), e))?;
        self.written.push(p);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.5, -2.25e-7, 6.02e23, 1e-300, 123456.789, -0.0001] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn guards_reject_non_finite() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(vec![1.0, f64::NAN]);
        assert!(c.render().unwrap_err().message.contains("`b`"));
        assert!(num(f64::INFINITY).is_err());
        let v = serde_json::json!({"x": [1.0, null]});
        assert!(render_json(&v).unwrap_err().message.contains("$.x[1]"));
    }

    #[test]
    fn footer_is_commented() {
        let mut c = Csv::new(&["t"]);
        c.row(vec![0.5]);
        c.note("done");
        assert_eq!(c.render().unwrap(), "t\n0.5\n# done\n");
    }
}
