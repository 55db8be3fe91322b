//! Per-invocation bookkeeping: input and output digests, seeds, timings, and
//! the JSON run manifest written at the end.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use wildset_core::seed;

use crate::config::PipelineConfig;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub role: String,
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub config: PipelineConfig,
    /// SHA-256 of the resolved config as canonical JSON, flags applied.
    pub config_sha256: String,
    pub root_seed: Option<u64>,
    pub derived_seeds: BTreeMap<String, u64>,
    pub threads: Option<usize>,
    pub parallel: bool,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub details: BTreeMap<String, Value>,
    pub timings_ms: BTreeMap<String, f64>,
}

pub struct Run {
    pub config: PipelineConfig,
    command: String,
    argv: Vec<String>,
    threads: Option<usize>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    seeds: BTreeMap<String, u64>,
    details: BTreeMap<String, Value>,
    timings: BTreeMap<String, f64>,
    started: Instant,
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let mut f = BufReader::new(File::open(path)?);
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut n = 0u64;
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        h.update(&buf[..k]);
        n += k as u64;
    }
    Ok((n, hex::encode(h.finalize())))
}

impl Run {
    pub fn new(command: &str, argv: Vec<String>, config: PipelineConfig, threads: Option<usize>) -> Self {
        Self {
            config,
            command: command.to_string(),
            argv,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: BTreeMap::new(),
            details: BTreeMap::new(),
            timings: BTreeMap::new(),
            started: Instant::now(),
        }
    }

    /// Checks that `path` exists and records its digest. `role` names the
    /// flag so that errors point at it.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        if !path.is_file() {
            bail!("{role}: no such file {}", path.display());
        }
        let (bytes, sha256) = sha256_file(path).with_context(|| format!("{role}: {}", path.display()))?;
        self.inputs.push(FileDigest { role: role.to_string(), path: path.to_path_buf(), bytes, sha256 });
        Ok(())
    }

    pub fn open(&mut self, role: &str, path: &Path) -> Result<BufReader<File>> {
        self.input(role, path)?;
        Ok(BufReader::new(File::open(path).with_context(|| format!("{role}: {}", path.display()))?))
    }

    /// Writes an output file through `f` and records its digest.
    pub fn write(
        &mut self,
        role: &str,
        path: &Path,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let file = File::create(path).with_context(|| format!("{role}: cannot create {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).with_context(|| format!("{role}: writing {}", path.display()))?;
        w.flush()?;
        drop(w);
        let (bytes, sha256) = sha256_file(path)?;
        self.outputs.push(FileDigest { role: role.to_string(), path: path.to_path_buf(), bytes, sha256 });
        Ok(())
    }

    /// Writes to `path` when given, otherwise to standard output.
    pub fn write_or_print(
        &mut self,
        role: &str,
        path: Option<&Path>,
        f: impl FnOnce(&mut dyn Write) -> Result<()>,
    ) -> Result<()> {
        match path {
            Some(p) => self.write(role, p, |w| f(w)),
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                f(&mut lock)?;
                lock.flush()?;
                Ok(())
            }
        }
    }

    /// The seed for `label`, derived from the root seed.
    pub fn seed(&mut self, label: &str) -> Result<u64> {
        let root = self
            .config
            .seed
            .ok_or_else(|| anyhow!("seed: no root seed; set `seed` in the config file or pass --seed"))?;
        let s = seed::derive(root, label);
        self.seeds.insert(label.to_string(), s);
        Ok(s)
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_string(), serde_json::to_value(value).expect("details serialize"));
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.insert(stage.to_string(), t.elapsed().as_secs_f64() * 1e3);
        out
    }

    /// Writes the manifest to `path`, or next to the first output file. Runs
    /// that only print to standard output have no manifest unless `path` is
    /// given.
    pub fn finish(mut self, path: Option<&Path>) -> Result<Option<PathBuf>> {
        self.timings.insert("total".into(), self.started.elapsed().as_secs_f64() * 1e3);
        let target = match (path, self.outputs.first()) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(o)) => {
                let mut s = o.path.clone().into_os_string();
                s.push(".manifest.json");
                PathBuf::from(s)
            }
            (None, None) => return Ok(None),
        };
        let config_json = serde_json::to_vec(&self.config)?;
        let manifest = Manifest {
            tool: "wildset".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command,
            argv: self.argv,
            config_sha256: hex::encode(Sha256::digest(&config_json)),
            root_seed: self.config.seed,
            config: self.config,
            derived_seeds: self.seeds,
            threads: self.threads,
            parallel: wildset_core::par::is_parallel(),
            inputs: self.inputs,
            outputs: self.outputs,
            details: self.details,
            timings_ms: self.timings,
        };
        let mut w = BufWriter::new(
            File::create(&target).with_context(|| format!("--manifest: cannot create {}", target.display()))?,
        );
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(Some(target))
    }
}
