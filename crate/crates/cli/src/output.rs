use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Write through a sibling temp file and rename on success, so readers never see partial output.
pub fn write_atomic<F>(path: &Path, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> trigreg::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let wrap = |e: io::Error| CliError::File {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    {
        let mut buf = io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf).map_err(CliError::file(path))?;
        buf.flush().map_err(wrap)?;
    }
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

/// File when a path is given, standard output otherwise.
pub fn emit<F>(path: Option<&Path>, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> trigreg::Result<()>,
{
    match path {
        Some(p) => write_atomic(p, fill),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            fill(&mut lock)?;
            lock.flush().map_err(trigreg::Error::from)?;
            Ok(())
        }
    }
}

pub fn write_json<T: serde::Serialize + ?Sized>(
    w: &mut dyn Write,
    value: &T,
) -> trigreg::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::File {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    trigreg::error::parse_json(&text).map_err(CliError::file(path))
}
