//! Line-oriented `key = value` text with optional `[section]` headers.
//!
//! `#` starts a comment. Entries before the first header belong to an
//! unnamed top-level section.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// Empty for the top-level section.
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KvDocument {
    pub path: PathBuf,
    pub sections: Vec<Section>,
}

impl KvDocument {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut sections = vec![Section {
            name: String::new(),
            line: 0,
            entries: Vec::new(),
        }];
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("unterminated section header `{line}`"),
                })?;
                sections.push(Section {
                    name: name.trim().to_string(),
                    line: line_no,
                    entries: Vec::new(),
                });
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: "empty key".into(),
                });
            }
            let section = sections.last_mut().expect("top-level section exists");
            if section.entries.iter().any(|e| e.key == key) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: v.trim().to_string(),
                line: line_no,
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            sections,
        })
    }

    pub fn top(&self) -> &Section {
        &self.sections[0]
    }

    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().skip(1).filter(move |s| s.name == name)
    }

    pub fn error(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    /// Parses `entry.value` as `V`, reporting the entry's line on failure.
    pub fn value<V: std::str::FromStr>(&self, entry: &Entry) -> Result<V> {
        entry.value.parse().map_err(|_| {
            self.error(
                entry.line,
                format!("invalid value `{}` for `{}`", entry.value, entry.key),
            )
        })
    }

    /// Parses a comma-separated list.
    pub fn list<V: std::str::FromStr>(&self, entry: &Entry) -> Result<Vec<V>> {
        entry
            .value
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    self.error(
                        entry.line,
                        format!("invalid list item `{}` for `{}`", s.trim(), entry.key),
                    )
                })
            })
            .collect()
    }

    pub fn pair(&self, entry: &Entry) -> Result<(f64, f64)> {
        let v: Vec<f64> = self.list(entry)?;
        match v.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(self.error(entry.line, format!("`{}` expects two numbers", entry.key))),
        }
    }
}
