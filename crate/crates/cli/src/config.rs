//! Merges command-line flags over an optional `key = value` file and records
//! the values actually used.

use std::fmt::Display;
use std::str::FromStr;

use datamask::corpus::KvConfig;
use datamask::{Error, Result};

pub struct Resolver {
    file: KvConfig,
    effective: KvConfig,
}

impl Resolver {
    pub fn new(path: Option<&str>) -> Result<Self> {
        let file = match path {
            Some(p) => KvConfig::load(p)?,
            None => KvConfig::new(),
        };
        Ok(Resolver {
            file,
            effective: KvConfig::new(),
        })
    }

    pub fn effective(&self) -> &KvConfig {
        &self.effective
    }

    /// Flag value, else file value, else `None`.
    pub fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file.get_parsed(key)?,
        };
        if let Some(v) = &v {
            self.effective.insert(key, v);
        }
        Ok(v)
    }

    pub fn or<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T> {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.effective.insert(key, &v);
        Ok(v)
    }

    pub fn req<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        self.opt(key, flag)?
            .ok_or_else(|| Error::Invalid(format!("missing required --{key}")))
    }

    /// A switch is on if given on the command line or set true in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool> {
        let v = self.or(key, flag.then_some(true), false)?;
        Ok(v)
    }

    /// Comma-separated list; an empty flag list falls back to the file.
    pub fn list<T: FromStr + Display>(&mut self, key: &str, flag: Vec<T>) -> Result<Vec<T>> {
        let v = if !flag.is_empty() {
            flag
        } else {
            match self.file.get(key) {
                None => Vec::new(),
                Some(s) => s
                    .split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse()
                            .map_err(|_| Error::Invalid(format!("cannot parse `{key} = {s}`")))
                    })
                    .collect::<Result<_>>()?,
            }
        };
        let joined: Vec<String> = v.iter().map(ToString::to_string).collect();
        self.effective.insert(key, joined.join(","));
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn with_file(text: &str) -> (tempfile::NamedTempFile, Resolver) {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        let r = Resolver::new(Some(f.path().to_str().unwrap())).unwrap();
        (f, r)
    }

    #[test]
    fn flags_override_file() {
        let (_f, mut r) = with_file("lambda = 0.3\nepochs = 50\nsizes = 10, 20\n");
        assert_eq!(r.or("lambda", Some(0.7), 0.5).unwrap(), 0.7);
        assert_eq!(r.or("epochs", None::<usize>, 1).unwrap(), 50);
        assert_eq!(r.or("G", None::<usize>, 128).unwrap(), 128);
        assert_eq!(r.list::<usize>("sizes", vec![]).unwrap(), vec![10, 20]);
        assert!(r.req::<u64>("seed", None).is_err());
        let eff = r.effective();
        assert_eq!(eff.get("lambda"), Some("0.7"));
        assert_eq!(eff.get("epochs"), Some("50"));
        assert_eq!(eff.get("G"), Some("128"));
        assert_eq!(eff.get("sizes"), Some("10,20"));
    }

    #[test]
    fn malformed_file_value_is_a_config_error() {
        let (_f, mut r) = with_file("epochs = many\n");
        let e = r.opt::<usize>("epochs", None).unwrap_err();
        assert_eq!(e.category().exit_code(), 2);
    }

    #[test]
    fn switch_from_file() {
        let (_f, mut r) = with_file("sample-final = true\n");
        assert!(r.switch("sample-final", false).unwrap());
        let mut r = Resolver::new(None).unwrap();
        assert!(!r.switch("sample-final", false).unwrap());
    }
}
