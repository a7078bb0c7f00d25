use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Provenance written at the top of every output file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Meta {
    pub tool: String,
    pub command: String,
    pub seed: u64,
    pub config: String,
}

impl Meta {
    pub fn new(command: &str, seed: u64, config_hash: String) -> Self {
        Meta {
            tool: format!("gridscen {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            seed,
            config: config_hash,
        }
    }
}

/// Collects the files one command writes.
pub struct Outputs {
    pub dir: PathBuf,
    pub meta: Meta,
    pub written: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

impl Outputs {
    pub fn new(dir: PathBuf, meta: Meta) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Outputs {
            dir,
            meta,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Delimited table preceded by `# key=value` header lines.
    pub fn csv<I, R>(&mut self, name: &str, columns: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let path = self.path(name);
        let mut out = create(&path)?;
        let m = &self.meta;
        let header = format!(
            "# tool={}\n# command={}\n# seed={}\n# config={}\n",
            m.tool, m.command, m.seed, m.config
        );
        out.write_all(header.as_bytes()).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv {
            path: path.clone(),
            message: e.to_string(),
        };
        w.write_record(columns).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Pretty JSON object `{"meta": .., "data": ..}`.
    pub fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let doc = serde_json::json!({ "meta": &self.meta, "data": data });
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Registers a file written by other means (the compact store).
    pub fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }
}

/// Shortest representation that reads back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Reads the `data` member of a JSON output file.
pub fn read_json_data<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.display().to_string())
        } else {
            Error::io(path, e)
        }
    })?;
    #[derive(serde::Deserialize)]
    struct Doc<T> {
        data: T,
    }
    serde_json::from_str::<Doc<T>>(&text)
        .map(|d| d.data)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Deserializes the rows of a delimited output file, skipping `#` lines.
pub fn read_csv_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.display().to_string())
        } else {
            Error::io(path, e)
        }
    })?;
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}
