//! CSV tables with a provenance line, numeric formatting and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use skycomp::scenario::RawConfig;

/// Significant digits of every floating-point cell.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Formats `v` with [`SIGNIFICANT_DIGITS`] significant digits. Plain decimal
/// notation is used for magnitudes in `[1e-4, 1e9)`, scientific otherwise.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let body = if exp >= 0 {
        let split = exp as usize + 1;
        let (int, frac) = digits.split_at(split);
        if frac.is_empty() {
            int.to_string()
        } else {
            format!("{int}.{frac}")
        }
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    format!("{sign}{body}")
}

/// Hex SHA-256 of the canonical JSON form of a configuration.
pub fn config_hash(raw: &RawConfig) -> String {
    let digest = Sha256::digest(raw.to_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Experiment label written into the provenance line.
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(experiment: &str, raw: &RawConfig, seed: u64, header: &[&str]) -> Self {
        Table {
            experiment: experiment.into(),
            config_hash: config_hash(raw),
            seed,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn provenance(&self) -> String {
        format!(
            "# skycomp {} config_sha256={} seed={}",
            self.experiment, self.config_hash, self.seed
        )
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn body(rows: &[Vec<String>]) -> String {
        rows.iter().map(|r| r.join(",") + "\n").collect()
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n{}", self.provenance(), self.header.join(","), Self::body(&self.rows))
    }

    /// Writes the table atomically to `path`.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    /// Writes every segment (one sweep point each) to its own part file, then
    /// concatenates the parts in order into `path`. The part directory is
    /// removed afterwards.
    pub fn write_segments(&self, path: &Path, segments: &[Vec<Vec<String>>]) -> std::io::Result<()> {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
        let parts_dir = path.with_file_name(format!(".{stem}.parts"));
        fs::create_dir_all(&parts_dir)?;
        let parts: Vec<PathBuf> = (0..segments.len())
            .map(|i| parts_dir.join(format!("{i:04}.csv")))
            .collect();
        for (seg, part) in segments.iter().zip(&parts) {
            write_atomic(part, Self::body(seg).as_bytes())?;
        }
        let mut text = format!("{}\n{}\n", self.provenance(), self.header.join(","));
        for part in &parts {
            text.push_str(&fs::read_to_string(part)?);
        }
        write_atomic(path, text.as_bytes())?;
        fs::remove_dir_all(&parts_dir)
    }
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Parses a CSV written by [`Table::to_csv`] back into header and rows,
/// skipping comment lines.
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}
