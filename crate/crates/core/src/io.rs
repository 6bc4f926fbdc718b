//! File formats: the SPTE field container, CSV matrices, key=value configs
//! and station tables.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{Result, SpdeError};
use crate::spde_model::SpdeParams;

pub const SPTE_MAGIC: &[u8; 4] = b"SPTE";

/// Writes `T` row-major `n × n` fields: magic, `u32 n`, `u32 T`, then `f64`s.
pub fn write_spte<W: Write>(w: &mut W, n: usize, fields: &Array2<f64>) -> Result<()> {
    if fields.ncols() != n * n {
        return Err(SpdeError::invalid(format!(
            "fields have {} columns, expected {}",
            fields.ncols(),
            n * n
        )));
    }
    w.write_all(SPTE_MAGIC)?;
    w.write_u32::<LE>(n as u32)?;
    w.write_u32::<LE>(fields.nrows() as u32)?;
    for &v in fields.iter() {
        w.write_f64::<LE>(v)?;
    }
    Ok(())
}

/// Returns `(n, fields)` with `fields` of shape `T × n²`.
pub fn read_spte<R: Read>(r: &mut R) -> Result<(usize, Array2<f64>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SPTE_MAGIC {
        return Err(parse_err(0, "header", "not an SPTE file"));
    }
    let n = r.read_u32::<LE>()? as usize;
    let t = r.read_u32::<LE>()? as usize;
    let mut v = vec![0.0; t * n * n];
    r.read_f64_into::<LE>(&mut v)?;
    let a = Array2::from_shape_vec((t, n * n), v).map_err(|e| SpdeError::invalid(e.to_string()))?;
    Ok((n, a))
}

pub fn save_spte(path: &Path, n: usize, fields: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_spte(&mut w, n, fields)?;
    w.flush()?;
    Ok(())
}

pub fn load_spte(path: &Path) -> Result<(usize, Array2<f64>)> {
    read_spte(&mut BufReader::new(File::open(path)?))
}

fn parse_err(line: usize, key: &str, msg: impl Into<String>) -> SpdeError {
    SpdeError::Parse {
        line,
        key: key.to_string(),
        message: msg.into(),
    }
}

/// Writes a matrix as comma-separated rows with round-trip float formatting.
/// NaN is written as an empty field.
pub fn write_csv_matrix<W: Write>(w: &mut W, m: &Array2<f64>) -> Result<()> {
    for row in m.rows() {
        let line: Vec<String> = row
            .iter()
            .map(|v| if v.is_nan() { String::new() } else { format!("{v:?}") })
            .collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_csv_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn read_csv_matrix<R: Read>(r: R) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                let f = f.trim();
                if f.is_empty() {
                    Ok(f64::NAN)
                } else {
                    f.parse::<f64>()
                        .map_err(|e| parse_err(i + 1, "value", format!("{f:?}: {e}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(i + 1, "row", "ragged CSV matrix"));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, |r| r.len());
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), cols), flat).map_err(|e| SpdeError::invalid(e.to_string()))
}

pub fn load_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    read_csv_matrix(File::open(path)?)
}

/// A flat `key = value` configuration. `#` starts a comment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, line, "expected key = value"))?;
            let k = k.trim().to_string();
            if k.is_empty() {
                return Err(parse_err(i + 1, "", "empty key"));
            }
            if entries.insert(k.clone(), (v.trim().to_string(), i + 1)).is_some() {
                return Err(parse_err(i + 1, &k, "duplicate key"));
            }
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Option<Result<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.entries.get(key).map(|(v, line)| {
            v.parse::<T>()
                .map_err(|e| parse_err(*line, key, format!("{v:?}: {e}")))
        })
    }

    /// A required value; a missing key is a parse error naming the key.
    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse_value(key)
            .unwrap_or_else(|| Err(parse_err(0, key, "missing required key")))
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse_value(key).unwrap_or(Ok(default))
    }

    /// Reads the nine model parameters; all keys are required.
    pub fn params(&self) -> Result<SpdeParams> {
        let p = SpdeParams {
            rho0: self.require("rho0")?,
            sigma2: self.require("sigma2")?,
            zeta: self.require("zeta")?,
            rho1: self.require("rho1")?,
            gamma: self.require("gamma")?,
            psi: self.require("psi")?,
            mu: [self.require("mu_x")?, self.require("mu_y")?],
            tau2: self.require("tau2")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn set_params(&mut self, p: &SpdeParams) {
        for (k, v) in crate::spde_model::PARAM_NAMES.iter().zip(p.to_array()) {
            self.set(k, format!("{v:?}"));
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, (v, _)) in &self.entries {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

/// Station observations arranged as `T × m` tables.
#[derive(Clone, Debug, PartialEq)]
pub struct StationTable {
    pub station_ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    /// NaN marks missing.
    pub rain: Array2<f64>,
    pub nwp: Array2<f64>,
}

pub const STATION_HEADER: [&str; 6] = ["time_index", "station_id", "x", "y", "rain_mm", "nwp_mm"];

pub fn write_station_csv<W: Write>(w: W, table: &StationTable) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(STATION_HEADER).map_err(csv_err)?;
    for t in 0..table.rain.nrows() {
        for (j, id) in table.station_ids.iter().enumerate() {
            let rain = table.rain[[t, j]];
            let nwp = table.nwp[[t, j]];
            wr.write_record([
                t.to_string(),
                id.clone(),
                format!("{:?}", table.coords[j][0]),
                format!("{:?}", table.coords[j][1]),
                if rain.is_nan() { String::new() } else { format!("{rain:?}") },
                if nwp.is_nan() { String::new() } else { format!("{nwp:?}") },
            ])
            .map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> SpdeError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(line, "csv", e.to_string())
}

/// Reads a station table. Stations are ordered by first appearance; times
/// run from 0 to the largest `time_index`, and absent rows count as missing.
pub fn read_station_csv<R: Read>(r: R) -> Result<StationTable> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers().map_err(csv_err)?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, name, "missing column"))
    };
    let (ct, cs, cx, cy, cr, cn) = (
        col("time_index")?,
        col("station_id")?,
        col("x")?,
        col("y")?,
        col("rain_mm")?,
        col("nwp_mm")?,
    );
    let mut ids: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut coords: Vec<[f64; 2]> = Vec::new();
    let mut recs: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut max_t = 0usize;
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let num = |c: usize, key: &str| -> Result<f64> {
            let f = rec.get(c).unwrap_or("");
            if f.is_empty() {
                return Ok(f64::NAN);
            }
            f.parse::<f64>().map_err(|e| parse_err(line, key, format!("{f:?}: {e}")))
        };
        let t: usize = rec
            .get(ct)
            .unwrap_or("")
            .parse()
            .map_err(|e| parse_err(line, "time_index", format!("{e}")))?;
        let id = rec.get(cs).unwrap_or("").to_string();
        let (x, y) = (num(cx, "x")?, num(cy, "y")?);
        if x.is_nan() || y.is_nan() {
            return Err(parse_err(line, "x", "station coordinates are required"));
        }
        let j = match index.get(&id) {
            Some(&j) => {
                if coords[j] != [x, y] {
                    return Err(parse_err(line, "x", format!("station {id} moved")));
                }
                j
            }
            None => {
                index.insert(id.clone(), ids.len());
                ids.push(id);
                coords.push([x, y]);
                ids.len() - 1
            }
        };
        max_t = max_t.max(t);
        recs.push((t, j, num(cr, "rain_mm")?, num(cn, "nwp_mm")?));
    }
    if ids.is_empty() {
        return Err(parse_err(0, "csv", "no station records"));
    }
    let mut rain = Array2::from_elem((max_t + 1, ids.len()), f64::NAN);
    let mut nwp = Array2::from_elem((max_t + 1, ids.len()), f64::NAN);
    for (t, j, r, n) in recs {
        rain[[t, j]] = r;
        nwp[[t, j]] = n;
    }
    Ok(StationTable {
        station_ids: ids,
        coords,
        rain,
        nwp,
    })
}
