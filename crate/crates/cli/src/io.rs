//! Observation ingestion and the `RKGRID1` grid file format.
//!
//! A grid file is a plain-text header of `key=value` lines, starting with
//! the magic line `RKGRID1` and ending with an empty line, followed by the
//! payload: every field in turn, each `m1 × m2` values row-major with `x`
//! fastest, as little-endian IEEE-754 doubles.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::{info, warn};
use rapidkrig_core::{Point, Rect};

use crate::error::{CliError, Result};

pub const MAGIC: &str = "RKGRID1";
pub const FORMAT_VERSION: u32 = 1;

/// Observations read from a delimited text file.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub locations: Vec<Point<f64>>,
    pub z: Vec<f64>,
    /// Any columns besides `x`, `y`, `z`, in file order.
    pub extra: Vec<(String, Vec<f64>)>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn bounding_box(&self) -> Option<Rect<f64>> {
        Rect::bounding(&self.locations)
    }
}

/// Reads `x`, `y`, `z` (plus any extra numeric columns) from a file with a
/// header row. Fields are separated by commas if the header contains one,
/// otherwise by whitespace.
pub fn load_observations(path: &Path) -> Result<Observations> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let obs = parse_observations(&text)?;
    match obs.bounding_box() {
        Some(b) => info!(
            "read {} observations from {}; x in [{}, {}], y in [{}, {}]",
            obs.len(),
            path.display(),
            b.xmin,
            b.xmax,
            b.ymin,
            b.ymax
        ),
        None => info!("read {} observations from {}", obs.len(), path.display()),
    }
    Ok(obs)
}

/// Parses observation text; see [`load_observations`].
pub fn parse_observations(text: &str) -> Result<Observations> {
    let header_line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| CliError::Domain("observation file is empty".into()))?;
    let rows: Vec<Vec<String>> = if header_line.contains(',') {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        rdr.records()
            .map(|r| {
                r.map(|rec| rec.iter().map(str::to_owned).collect())
                    .map_err(|e| CliError::Domain(format!("malformed delimited text: {e}")))
            })
            .collect::<Result<_>>()?
    } else {
        text.lines()
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect()
    };
    let mut rows = rows.into_iter().filter(|r: &Vec<String>| r.iter().any(|f| !f.is_empty()));
    let header = rows.next().expect("a non-empty line exists");
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| CliError::Domain(format!("required column '{name}' is missing from the header")))
    };
    let (ix, iy, iz) = (col("x")?, col("y")?, col("z")?);
    let extra_cols: Vec<usize> = (0..header.len()).filter(|c| ![ix, iy, iz].contains(c)).collect();

    let mut obs = Observations {
        locations: Vec::new(),
        z: Vec::new(),
        extra: extra_cols.iter().map(|&c| (header[c].clone(), Vec::new())).collect(),
    };
    for (r, row) in rows.enumerate() {
        let line = r + 2;
        if row.len() != header.len() {
            return Err(CliError::Domain(format!(
                "data row {line} has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        let num = |c: usize| {
            row[c].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                CliError::Domain(format!(
                    "non-numeric value '{}' in column '{}' on data row {line}",
                    row[c], header[c]
                ))
            })
        };
        obs.locations.push(Point::new(num(ix)?, num(iy)?));
        obs.z.push(num(iz)?);
        for (k, &c) in extra_cols.iter().enumerate() {
            obs.extra[k].1.push(num(c)?);
        }
    }
    if obs.is_empty() {
        return Err(CliError::Domain("observation file has a header but no data".into()));
    }
    let mut seen = HashSet::new();
    let dups = obs
        .locations
        .iter()
        .filter(|p| !seen.insert((p.x.to_bits(), p.y.to_bits())))
        .count();
    if dups > 0 {
        warn!("{dups} observations repeat an earlier location exactly; they are kept");
    }
    Ok(obs)
}

/// A set of gridded fields with self-describing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    pub dims: (usize, usize),
    pub origin: (f64, f64),
    pub spacing: (f64, f64),
    pub field_names: Vec<String>,
    /// Everything else (model parameters, seed, method, …), written sorted.
    pub meta: BTreeMap<String, String>,
    /// `field_names.len()` blocks of `m1·m2` values.
    pub payload: Vec<f64>,
}

impl GridOutput {
    pub fn field(&self, k: usize) -> &[f64] {
        let len = self.dims.0 * self.dims.1;
        &self.payload[k * len..(k + 1) * len]
    }

    pub fn field_by_name(&self, name: &str) -> Option<&[f64]> {
        self.field_names.iter().position(|n| n == name).map(|k| self.field(k))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let expected = self.dims.0 * self.dims.1 * self.field_names.len();
        assert_eq!(self.payload.len(), expected, "payload does not match dims and fields");
        let mut head = String::new();
        head.push_str(MAGIC);
        head.push('\n');
        head.push_str(&format!("version={FORMAT_VERSION}\n"));
        head.push_str(&format!("dims={} {}\n", self.dims.0, self.dims.1));
        head.push_str(&format!("origin={} {}\n", self.origin.0, self.origin.1));
        head.push_str(&format!("spacing={} {}\n", self.spacing.0, self.spacing.1));
        head.push_str(&format!("fields={}\n", self.field_names.join(",")));
        for (k, v) in &self.meta {
            head.push_str(&format!("{k}={v}\n"));
        }
        head.push('\n');
        w.write_all(head.as_bytes())?;
        let mut bytes = Vec::with_capacity(8 * self.payload.len());
        for v in &self.payload {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        w.flush()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path)
            .map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let bad = |msg: String| CliError::Domain(format!("not a valid {MAGIC} file: {msg}"));
        let mut r = BufReader::new(r);
        let mut line = String::new();
        let next_line = |r: &mut BufReader<_>, line: &mut String| -> Result<()> {
            line.clear();
            r.read_line(line).map_err(|e| CliError::io("reading grid header", e))?;
            Ok(())
        };
        next_line(&mut r, &mut line)?;
        if line.trim_end() != MAGIC {
            return Err(bad("missing magic line".into()));
        }
        let mut kv = BTreeMap::new();
        loop {
            next_line(&mut r, &mut line)?;
            if line.is_empty() {
                return Err(bad("header is not terminated by a blank line".into()));
            }
            let l = line.trim_end_matches(['\n', '\r']);
            if l.is_empty() {
                break;
            }
            let (k, v) = l.split_once('=').ok_or_else(|| bad(format!("header line '{l}'")))?;
            kv.insert(k.to_owned(), v.to_owned());
        }
        let mut take = |k: &str| kv.remove(k).ok_or_else(|| bad(format!("header key '{k}' is missing")));
        let version: u32 = take("version")?.parse().map_err(|_| bad("version".into()))?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let pair_usize = |s: String| -> Result<(usize, usize)> {
            let mut it = s.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => Err(bad(format!("expected two integers, got '{s}'"))),
            }
        };
        let pair_f64 = |s: String| -> Result<(f64, f64)> {
            let mut it = s.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => Err(bad(format!("expected two numbers, got '{s}'"))),
            }
        };
        let dims = pair_usize(take("dims")?)?;
        let origin = pair_f64(take("origin")?)?;
        let spacing = pair_f64(take("spacing")?)?;
        let fields = take("fields")?;
        let field_names: Vec<String> = if fields.is_empty() {
            Vec::new()
        } else {
            fields.split(',').map(str::to_owned).collect()
        };
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| CliError::io("reading grid payload", e))?;
        let expected = dims.0 * dims.1 * field_names.len();
        if bytes.len() != 8 * expected {
            return Err(bad(format!(
                "payload has {} bytes, expected {}",
                bytes.len(),
                8 * expected
            )));
        }
        let payload = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Self {
            dims,
            origin,
            spacing,
            field_names,
            meta: kv,
            payload,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)
            .map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
        Self::read_from(file)
    }
}
