//! Bin-series files and CSV tables.
//!
//! Canonical bin files are compact JSON objects `{"h":0.02,"counts":[0,1,3]}`
//! followed by a newline. Raw text files hold whitespace-separated counts and
//! need the bin width from the command line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use decompound::BinSeries;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BinFile {
    h: f64,
    counts: Vec<u64>,
}

/// Parses canonical JSON, or raw whitespace-separated counts when `raw_h`
/// is given and the text is not a JSON object.
pub fn parse_bins(text: &str, raw_h: Option<f64>) -> Result<BinSeries> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let file: BinFile = serde_json::from_str(text).map_err(|e| anyhow!("malformed bin file: {e}"))?;
        return BinSeries::new(file.h, file.counts).map_err(|e| anyhow!("invalid bin file: {e}"));
    }
    let h = raw_h.ok_or_else(|| anyhow!("raw count files need the bin width (--h)"))?;
    let mut counts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            let c = tok
                .parse::<u64>()
                .map_err(|_| anyhow!("line {}: invalid count '{tok}'", i + 1))?;
            counts.push(c);
        }
    }
    BinSeries::new(h, counts).map_err(|e| anyhow!("invalid raw counts: {e}"))
}

pub fn read_bins(path: &Path, raw_h: Option<f64>) -> Result<BinSeries> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_bins(&text, raw_h).with_context(|| format!("in {}", path.display()))
}

pub fn format_bins(bins: &BinSeries) -> String {
    let file = BinFile {
        h: bins.h(),
        counts: bins.counts().to_vec(),
    };
    let mut s = serde_json::to_string(&file).expect("finite bin width");
    s.push('\n');
    s
}

pub fn write_bins(path: &Path, bins: &BinSeries) -> Result<()> {
    write_text(path, &format_bins(bins))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// `x` rounded to 9 significant digits, in its shortest decimal form.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let r: f64 = format!("{x:.8e}").parse().expect("round trip");
    if r != 0.0 && !(1e-4..1e15).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// CSV table with a header line.
pub struct Csv {
    out: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self {
            out: format!("{header}\n"),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.out, "{}", fields.join(","));
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Comma-separated list of numbers, e.g. `40,10,4,3,1`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| anyhow!("invalid list entry '{t}'")))
        .collect::<Result<Vec<_>>>()
        .and_then(|v| if v.is_empty() { bail!("empty list") } else { Ok(v) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json() {
        let b = parse_bins(r#"{"h":0.02,"counts":[0,1,3]}"#, None).unwrap();
        assert_eq!(b.h(), 0.02);
        assert_eq!(b.counts(), &[0, 1, 3]);
        assert_eq!(format_bins(&b), "{\"h\":0.02,\"counts\":[0,1,3]}\n");
    }

    #[test]
    fn raw_text() {
        let b = parse_bins("0 1\n3\n", Some(0.02)).unwrap();
        assert_eq!(b.counts(), &[0, 1, 3]);
        assert!(parse_bins("0 1\n3\n", None).is_err());
        let e = parse_bins("0 1\n-3\n", Some(0.02)).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn malformed_files() {
        for bad in [
            r#"{"h":0.02,"counts":[0,-1]}"#,
            r#"{"counts":[0,1]}"#,
            r#"{"h":0.0,"counts":[0,1]}"#,
            r#"{"h":0.02,"counts":[0,1]"#,
        ] {
            assert!(parse_bins(bad, None).is_err(), "{bad}");
        }
        let e = parse_bins("{\"h\":0.02,\n\"counts\":[0,-1]}", None).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn number_formatting() {
        assert_eq!(num(0.125), "0.125");
        assert_eq!(num(1.0 / 3.0), "0.333333333");
        assert_eq!(num(123456789012.0), "123456789000");
        assert_eq!(num(-2.0), "-2");
        assert_eq!(num(2.506241223e-200), "2.50624122e-200");
        assert_eq!(num(0.0), "0");
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<f64>("40,10, 4").unwrap(), vec![40.0, 10.0, 4.0]);
        assert!(parse_list::<f64>("1,x").is_err());
        assert!(parse_list::<usize>("").is_err());
    }
}
