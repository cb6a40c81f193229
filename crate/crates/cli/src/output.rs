use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Artifact sink rooted at the output directory. The directory is created
/// on the first write, so a run that writes nothing leaves nothing behind.
pub struct Out {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

/// Fixed 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub enum Cell {
    F(f64),
    I(usize),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl Out {
    pub fn new(dir: PathBuf) -> Self {
        Out { dir, written: Vec::new() }
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).with_context(|| format!("cannot create {}", self.dir.display()))?;
        let p = self.dir.join(name);
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<()> {
        let mut s = header.join(",");
        s.push('\n');
        for row in rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match c {
                    Cell::F(v) => s.push_str(&num(*v)),
                    Cell::I(v) => write!(s, "{v}").unwrap(),
                    Cell::S(v) => s.push_str(v),
                }
            }
            s.push('\n');
        }
        let p = self.path(name)?;
        write(&p, &s)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        let p = self.path(name)?;
        write(&p, &s)
    }
}

fn write(p: &Path, s: &str) -> Result<()> {
    fs::write(p, s).with_context(|| format!("cannot write {}", p.display()))
}
