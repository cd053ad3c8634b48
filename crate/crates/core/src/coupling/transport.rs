//! File-based exchange of the wheel/rail interface values.
//!
//! One side writes `force_<n>.txt`, the other answers with `disp_<n>.txt`.
//! Every file holds a single decimal value, is written to a temporary name
//! and renamed into place, and is deleted by its reader. `error.txt` and
//! `stop.txt` let either side abort the exchange.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

const ERROR_FILE: &str = "error.txt";
const STOP_FILE: &str = "stop.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Channel {
    Force,
    Displacement,
}

impl Channel {
    fn file_name(self, step: usize) -> String {
        match self {
            Channel::Force => format!("force_{step}.txt"),
            Channel::Displacement => format!("disp_{step}.txt"),
        }
    }
}

/// Outcome of waiting for a value.
pub(crate) enum Received {
    Value(f64),
    /// The peer asked to stop (client side ended early).
    Stopped,
}

#[derive(Debug)]
pub(crate) struct ExchangeDir {
    dir: PathBuf,
    timeout: Duration,
}

impl ExchangeDir {
    pub(crate) fn new(dir: &Path, timeout: Duration) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for name in [ERROR_FILE, STOP_FILE] {
            let path = dir.join(name);
            if path.exists() {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(ExchangeDir {
            dir: dir.to_path_buf(),
            timeout,
        })
    }

    pub(crate) fn send(&self, channel: Channel, step: usize, value: f64) -> Result<()> {
        let name = channel.file_name(step);
        let tmp = self.dir.join(format!("{name}.tmp"));
        // `{:e}` prints the shortest representation that parses back exactly.
        fs::write(&tmp, format!("{value:e}\n")).map_err(|e| Error::io(&tmp, e))?;
        let target = self.dir.join(name);
        fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))
    }

    pub(crate) fn receive(&self, channel: Channel, step: usize) -> Result<Received> {
        let path = self.dir.join(channel.file_name(step));
        let start = Instant::now();
        let mut polls: u64 = 0;
        loop {
            match fs::read_to_string(&path) {
                Ok(text) => {
                    fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
                    let value = text
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Transport(format!("{}: cannot parse `{}`", path.display(), text.trim())))?;
                    return Ok(Received::Value(value));
                }
                Err(e) if e.kind() == ErrorKind::NotFound => {}
                Err(e) => return Err(Error::io(&path, e)),
            }
            polls += 1;
            if polls.is_multiple_of(64) {
                if let Ok(message) = fs::read_to_string(self.dir.join(ERROR_FILE)) {
                    return Err(Error::Transport(format!("peer failed: {}", message.trim())));
                }
                if self.dir.join(STOP_FILE).exists() {
                    return Ok(Received::Stopped);
                }
                if start.elapsed() > self.timeout {
                    return Err(Error::Transport(format!(
                        "timed out after {:?} waiting for {}",
                        self.timeout,
                        path.display()
                    )));
                }
            }
            std::thread::yield_now();
        }
    }

    pub(crate) fn signal_error(&self, message: &str) {
        let _ = fs::write(self.dir.join(ERROR_FILE), message);
    }

    pub(crate) fn signal_stop(&self) {
        let _ = fs::write(self.dir.join(STOP_FILE), "");
    }

    /// Removes every exchange file left behind.
    pub(crate) fn clear(&self) {
        if let Ok(entries) = fs::read_dir(&self.dir) {
            for entry in entries.flatten() {
                let name = entry.file_name();
                let name = name.to_string_lossy();
                let ours =
                    name.starts_with("force_") || name.starts_with("disp_") || name == ERROR_FILE || name == STOP_FILE;
                if ours {
                    let _ = fs::remove_file(entry.path());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let ex = ExchangeDir::new(dir.path(), Duration::from_secs(5)).unwrap();
        for (k, v) in [0.1, -1.2345678901234567e-7, f64::MIN_POSITIVE, 8.4366e4]
            .into_iter()
            .enumerate()
        {
            ex.send(Channel::Force, k, v).unwrap();
            match ex.receive(Channel::Force, k).unwrap() {
                Received::Value(got) => assert_eq!(got.to_bits(), v.to_bits()),
                Received::Stopped => panic!("unexpected stop"),
            }
            assert!(!dir.path().join(format!("force_{k}.txt")).exists());
        }
    }

    #[test]
    fn timeout_and_peer_error() {
        let dir = tempfile::tempdir().unwrap();
        let ex = ExchangeDir::new(dir.path(), Duration::from_millis(20)).unwrap();
        assert!(matches!(ex.receive(Channel::Displacement, 0), Err(Error::Transport(_))));
        ex.signal_error("boom");
        let err = ex.receive(Channel::Displacement, 0).err().unwrap();
        assert!(err.to_string().contains("boom"));
    }

    #[test]
    fn stop_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let ex = ExchangeDir::new(dir.path(), Duration::from_secs(5)).unwrap();
        ex.signal_stop();
        assert!(matches!(ex.receive(Channel::Force, 3).unwrap(), Received::Stopped));
    }
}
