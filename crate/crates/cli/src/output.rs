//! Deterministic output: JSON and CSV with 17 significant digits.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// `{:.16e}`: 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON formatter that prints floats with 17 significant digits and
/// non-finite floats as `null`.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            w.write_all(fmt_f64(v).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Output directory with provenance stamped into every file.
pub struct OutDir {
    pub dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
}

/// Header fields shared by every JSON record.
#[derive(Serialize)]
struct Record<'a, T: Serialize> {
    config_hash: &'a str,
    toolkit_version: &'a str,
    seed: u64,
    command: &'a str,
    result: &'a T,
}

impl OutDir {
    pub fn new(dir: &Path, config_hash: String, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), config_hash, seed })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, command: &str, result: &T) -> Result<PathBuf> {
        let rec = Record {
            config_hash: &self.config_hash,
            toolkit_version: quasirigid::VERSION,
            seed: self.seed,
            command,
            result,
        };
        let path = self.path(name);
        std::fs::write(&path, to_json(&rec)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// CSV with a `# config_hash=…` comment line before the header.
    pub fn write_csv(&self, name: &str, header: &str, rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut text = format!("# config_hash={}\n{header}\n", self.config_hash);
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let path = self.path(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_17_digits() {
        for v in [0.1, 1.0 / 3.0, 2f64.sqrt() * 1e-300, -7.25e17] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        let json =
            String::from_utf8(to_json(&serde_json::json!({"x": 0.1, "n": 3, "bad": f64::NAN})).unwrap()).unwrap();
        assert!(json.contains("\"x\": 1.0000000000000001e-1"), "{json}");
        assert!(json.contains("\"n\": 3"));
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["x"], 0.1);
        assert!(back["bad"].is_null());
    }
}
