//! Structured log lines on standard error: `LEVEL key=value ...`.

use std::fmt::Display;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Info,
    Warn,
    Error,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Info => "INFO",
            Level::Warn => "WARN",
            Level::Error => "ERROR",
        }
    }
}

/// Formats one line. Values containing whitespace, quotes or `=` are quoted.
pub fn format_line(level: Level, fields: &[(&str, &dyn Display)]) -> String {
    let mut line = String::from(level.as_str());
    for (k, v) in fields {
        let v = v.to_string();
        line.push(' ');
        line.push_str(k);
        line.push('=');
        if v.is_empty() || v.contains(|c: char| c.is_whitespace() || c == '"' || c == '=') {
            line.push_str(&format!("{v:?}"));
        } else {
            line.push_str(&v);
        }
    }
    line
}

pub fn emit(level: Level, fields: &[(&str, &dyn Display)]) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{}", format_line(level, fields));
}

pub fn info(fields: &[(&str, &dyn Display)]) {
    emit(Level::Info, fields);
}

pub fn warn(fields: &[(&str, &dyn Display)]) {
    emit(Level::Warn, fields);
}
