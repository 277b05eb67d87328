//! Structured event log shared by the controllers and the simulator.
//!
//! One line per protocol action:
//! `t=<ms> <actor> <action> key=value ...`, fields in emission order.

use std::fmt::Display;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    now_ms: u64,
    lines: Vec<String>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_time(&mut self, now_ms: u64) {
        self.now_ms = now_ms;
    }

    pub fn now(&self) -> u64 {
        self.now_ms
    }

    pub fn record(&mut self, actor: &str, action: &str, fields: &[(&str, &dyn Display)]) {
        let mut line = format!("t={} {actor} {action}", self.now_ms);
        for (k, v) in fields {
            line.push(' ');
            line.push_str(k);
            line.push('=');
            line.push_str(&v.to_string());
        }
        self.lines.push(line);
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// The whole log, newline-terminated.
    pub fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }
}

/// Renders a node path as `a>b>c`.
pub fn path_str<T: Display>(nodes: &[T]) -> String {
    nodes.iter().map(ToString::to_string).collect::<Vec<_>>().join(">")
}
