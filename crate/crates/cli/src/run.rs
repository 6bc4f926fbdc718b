//! Per-invocation state: the configuration, the seed and the output
//! directory, which is filled in a staging directory and renamed into place
//! only when the command succeeds.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use spectral_spde::io::{self, Config};

use crate::error::{CliError, CliResult, Context};

pub struct Run {
    pub command: &'static str,
    pub cfg: Config,
    /// Directory that relative paths in the configuration refer to.
    base: PathBuf,
    seed: Option<u64>,
    out: PathBuf,
    staging: PathBuf,
    files: Vec<String>,
    finished: bool,
}

pub struct RunArgs<'a> {
    pub config: Option<&'a Path>,
    pub overrides: &'a [String],
    pub seed: Option<u64>,
    pub out: Option<&'a Path>,
}

impl Run {
    pub fn start(command: &'static str, args: RunArgs<'_>) -> CliResult<Self> {
        let (mut cfg, base) = match args.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
                let cfg = Config::parse(&text)
                    .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (cfg, base)
            }
            None => (Config::default(), PathBuf::new()),
        };
        for kv in args.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim());
        }
        let out = args
            .out
            .ok_or_else(|| CliError::usage("--out DIR is required"))?
            .to_path_buf();
        if out.exists() {
            return Err(CliError::usage(format!(
                "output directory {} already exists",
                out.display()
            )));
        }
        let name = out
            .file_name()
            .ok_or_else(|| CliError::usage(format!("invalid output path {}", out.display())))?
            .to_string_lossy()
            .into_owned();
        let staging = out.with_file_name(format!(".{name}.partial-{}", std::process::id()));
        fs::create_dir_all(&staging).data("creating the staging directory")?;
        Ok(Run {
            command,
            cfg,
            base,
            seed: args.seed,
            out,
            staging,
            files: Vec::new(),
            finished: false,
        })
    }

    /// The seed; stochastic commands cannot run without one.
    pub fn seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::usage(format!("{} needs --seed", self.command)))
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.cfg.require(key)?)
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.cfg.get_or(key, default)?)
    }

    pub fn flag(&self, key: &str, default: bool) -> CliResult<bool> {
        self.get_or(key, default)
    }

    /// A path from the configuration, resolved against the config's directory.
    pub fn path(&self, key: &str) -> CliResult<PathBuf> {
        let s = self
            .cfg
            .get_str(key)
            .ok_or_else(|| CliError::usage(format!("missing required key {key:?}")))?;
        Ok(self.resolve(s))
    }

    pub fn resolve(&self, s: &str) -> PathBuf {
        let p = Path::new(s);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn target(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.staging.join(name)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let p = self.target(name);
        fs::write(p, text).data(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let p = self.target(name);
        fs::write(p, bytes).data(name)
    }

    /// A file that is left out of the manifest because its content varies
    /// between runs, such as wall-clock timings.
    pub fn write_untracked(&mut self, name: &str, text: &str) -> CliResult<()> {
        fs::write(self.staging.join(name), text).data(name)
    }

    pub fn save_csv(&mut self, name: &str, m: &Array2<f64>) -> CliResult<()> {
        let p = self.target(name);
        io::save_csv_matrix(&p, m).data(name)
    }

    pub fn save_spte(&mut self, name: &str, n: usize, m: &Array2<f64>) -> CliResult<()> {
        let p = self.target(name);
        io::save_spte(&p, n, m).data(name)
    }

    /// Writes the config echo and the manifest, then moves the staging
    /// directory to its final name.
    pub fn finish(mut self) -> CliResult<()> {
        let mut echo = self.cfg.clone();
        if let Some(s) = self.seed {
            echo.set("seed", s);
        }
        let echo_text = echo.to_text();
        self.write_text("config.txt", &echo_text)?;

        let mut manifest = format!(
            "command = {}\nversion = {}\n",
            self.command,
            env!("CARGO_PKG_VERSION")
        );
        if let Some(s) = self.seed {
            manifest.push_str(&format!("seed = {s}\n"));
        }
        let mut files = self.files.clone();
        files.sort();
        for f in &files {
            let len = fs::metadata(self.staging.join(f)).data(f)?.len();
            manifest.push_str(&format!("file.{f} = {len}\n"));
        }
        fs::write(self.staging.join("manifest.txt"), manifest).data("manifest.txt")?;
        fs::rename(&self.staging, &self.out).data("moving the output into place")?;
        self.finished = true;
        Ok(())
    }
}

impl Drop for Run {
    fn drop(&mut self) {
        if !self.finished {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}
