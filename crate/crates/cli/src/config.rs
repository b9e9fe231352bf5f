use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

/// A command-line value that yields to the config file only when unset.
pub trait Fill {
    fn fill(&mut self, from_config: Self);
}

impl<T> Fill for Option<T> {
    fn fill(&mut self, from_config: Self) {
        if self.is_none() {
            *self = from_config;
        }
    }
}

impl<T> Fill for Vec<T> {
    fn fill(&mut self, from_config: Self) {
        if self.is_empty() {
            *self = from_config;
        }
    }
}

impl Fill for bool {
    fn fill(&mut self, from_config: Self) {
        *self |= from_config;
    }
}

pub trait Layered: Sized {
    fn under(self, config: Self) -> Self;
}

/// Implements [`Layered`] by filling each listed field.
#[macro_export]
macro_rules! layered {
    ($t:ty { $($field:ident),* $(,)? }) => {
        impl $crate::config::Layered for $t {
            fn under(mut self, config: Self) -> Self {
                $( $crate::config::Fill::fill(&mut self.$field, config.$field); )*
                self
            }
        }
    };
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{what} {}: {e}", path.display())))
}

/// Command-line arguments with config-file values underneath.
pub fn layer<T: Layered + DeserializeOwned>(args: T, config: Option<&Path>) -> Result<T, CliError> {
    match config {
        Some(path) => Ok(args.under(read_json(path, "config file")?)),
        None => Ok(args),
    }
}

pub fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::usage(format!("missing --{flag}")))
}

/// The given directory, or `runs/<command>-<unix time>-seed<seed>`; created
/// either way.
pub fn out_dir(out: Option<PathBuf>, command: &str, seed: Option<u64>) -> Result<PathBuf, CliError> {
    let dir = out.unwrap_or_else(|| {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let seed = seed.map_or(String::new(), |s| format!("-seed{s}"));
        PathBuf::from("runs").join(format!("{command}-{now}{seed}"))
    });
    fs::create_dir_all(&dir).map_err(|e| CliError::runtime(format!("creating {}: {e}", dir.display())))?;
    Ok(dir)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))
}

/// Files given directly, plus the `*.<ext>` files of given directories in
/// name order.
pub fn expand_inputs(paths: &[PathBuf], ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.to_string_lossy().ends_with(ext))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::usage(format!("{} does not exist", p.display())));
        }
    }
    Ok(out)
}

/// Shortest round-trip rendering, as in the feature CSV.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        a: Option<u32>,
        b: Vec<String>,
        c: bool,
    }

    layered!(Demo { a, b, c });

    #[test]
    fn flags_win_over_config() {
        let cli = Demo {
            a: Some(1),
            b: vec![],
            c: false,
        };
        let cfg = Demo {
            a: Some(2),
            b: vec!["x".into()],
            c: true,
        };
        assert_eq!(
            cli.under(cfg),
            Demo {
                a: Some(1),
                b: vec!["x".into()],
                c: true
            }
        );
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"a": 1, "zzz": 2}"#).unwrap();
        assert!(matches!(layer(Demo::default(), Some(&p)), Err(CliError::Usage(_))));
    }
}
