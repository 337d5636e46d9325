//! Deterministic `key = value` reports grouped under `[section]` markers.

use std::fmt::Write as _;

/// Reals carry 17 significant digits so reports diff bitwise across runs
/// and parse back to the exact double.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    /// Appends to the named section, opening it if it is not the current
    /// tail section. Insertion order is the output order.
    pub fn push(&mut self, section: &str, key: &str, value: impl Into<String>) {
        let open = match self.sections.last() {
            Some((name, _)) => name == section,
            None => false,
        };
        if !open {
            self.sections.push((section.to_string(), Vec::new()));
        }
        let entries = &mut self.sections.last_mut().expect("just opened").1;
        entries.push((key.to_string(), value.into()));
    }

    pub fn push_real(&mut self, section: &str, key: &str, value: f64) {
        self.push(section, key, fmt_real(value));
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .filter(|(name, _)| name == section)
            .flat_map(|(_, entries)| entries.iter())
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, entries) in &self.sections {
            let _ = writeln!(out, "[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}
