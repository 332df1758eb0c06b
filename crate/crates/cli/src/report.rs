//! Text reports: `#` provenance lines, `key=value` lines and `[name]` ... `[end]`
//! CSV blocks.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use maxfactor::factor_model::{fmt_real, parse_param_file, ParamFile};
use maxfactor::{Error, Result};

/// Builder for a report file.
pub struct Report {
    text: String,
}

impl Report {
    /// Starts a report with its provenance header.
    pub fn new(command: &str, flags: &[(&str, String)]) -> Self {
        let mut r = Report { text: String::new() };
        r.text.push_str(&provenance(command, flags));
        r
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key}={value}");
    }

    pub fn real(&mut self, key: &str, value: f64) {
        self.kv(key, fmt_real(value));
    }

    pub fn opt_real(&mut self, key: &str, value: Option<f64>) {
        match value {
            Some(v) => self.real(key, v),
            None => self.kv(key, "absent"),
        }
    }

    pub fn section(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) {
        let _ = writeln!(self.text, "[{name}]");
        let _ = writeln!(self.text, "{}", header.join(","));
        for row in rows {
            let _ = writeln!(self.text, "{}", row.join(","));
        }
        self.text.push_str("[end]\n");
    }

    /// A labelled square matrix block.
    pub fn matrix(&mut self, name: &str, labels: &[String], values: &[Vec<String>]) {
        let mut header = vec!["category".to_string()];
        header.extend(labels.iter().cloned());
        let rows: Vec<Vec<String>> = labels
            .iter()
            .zip(values)
            .map(|(l, row)| std::iter::once(l.clone()).chain(row.iter().cloned()).collect())
            .collect();
        self.section(name, &header, &rows);
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// `# maxfactor <version>` and `# <command> --flag=value ...` lines.
pub fn provenance(command: &str, flags: &[(&str, String)]) -> String {
    let mut s = format!("# maxfactor {}\n# {command}", env!("CARGO_PKG_VERSION"));
    for (name, value) in flags {
        let _ = write!(s, " --{name}={value}");
    }
    s.push('\n');
    s
}

/// `key=value` pairs outside blocks, in file order.
pub fn key_values(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut in_block = false;
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            in_block = line != "[end]";
            continue;
        }
        if in_block {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    out
}

pub fn lookup<'a>(kv: &'a [(String, String)], key: &str) -> Option<&'a str> {
    kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Model and parameters stored in a fit report.
pub fn read_fit(text: &str) -> Result<ParamFile> {
    let kv = key_values(text);
    if lookup(&kv, "kind") != Some("fit") {
        return Err(Error::Config("not a fit report (expected `kind=fit`)".into()));
    }
    let mut params = String::new();
    for (k, v) in &kv {
        let keep = matches!(k.as_str(), "family" | "k")
            || ["mu.", "sigma.", "tau.", "nu."].iter().any(|p| k.starts_with(p));
        if keep {
            let _ = writeln!(params, "{k}={v}");
        }
    }
    parse_param_file(&params)
}

/// Writes `contents` through a temporary file in the target directory and
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_are_skipped() {
        let mut r = Report::new("fit", &[("seed", "3".into())]);
        r.kv("kind", "fit");
        r.section("x", &["a".into(), "b".into()], &[vec!["1".into(), "k=v".into()]]);
        r.real("after", 0.5);
        let text = r.finish();
        assert!(text.starts_with("# maxfactor "));
        assert!(text.contains("# fit --seed=3\n"));
        let kv = key_values(&text);
        assert_eq!(kv.len(), 2);
        assert_eq!(lookup(&kv, "after"), Some("0.5"));
    }
}
