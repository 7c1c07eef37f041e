use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use fracvol::sim::MarketPath;
use serde::Serialize;

/// Offending lines found while reading a price file.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestError {
    pub path: String,
    /// `(line, problem)` for the first offending lines, at most ten.
    pub lines: Vec<(usize, String)>,
    pub total: usize,
}

const MAX_REPORTED: usize = 10;

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} offending line(s)", self.path, self.total)?;
        for (line, msg) in &self.lines {
            write!(f, "\n  line {line}: {msg}")?;
        }
        if self.total > self.lines.len() {
            write!(f, "\n  ... {} more", self.total - self.lines.len())?;
        }
        Ok(())
    }
}

impl std::error::Error for IngestError {}

impl IngestError {
    fn single(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Self { path: path.to_string(), lines: vec![(line, msg.into())], total: 1 }
    }
}

/// Read a `t,price` CSV (an optional `logvol` column is kept, other columns
/// are ignored).
pub fn ingest_prices(path: impl AsRef<Path>) -> Result<MarketPath, IngestError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| IngestError::single(&name, 0, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| IngestError::single(&name, 1, e.to_string()))?.clone();
    let col = |want: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(want));
    let (Some(ti), Some(pi)) = (col("t"), col("price")) else {
        return Err(IngestError::single(
            &name,
            1,
            format!(
                "header must name `t` and `price` columns, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    };
    let li = col("logvol");

    let mut path_out = MarketPath { times: vec![], prices: vec![], logvol: vec![], seed: 0 };
    let mut problems = Vec::new();
    let mut total = 0;
    let mut flag = |line: usize, msg: String, problems: &mut Vec<(usize, String)>| {
        total += 1;
        if problems.len() < MAX_REPORTED {
            problems.push((line, msg));
        }
    };
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                flag(line, e.to_string(), &mut problems);
                continue;
            }
        };
        let field = |j: usize| rec.get(j).map(str::trim).unwrap_or("");
        let t = field(ti).parse::<f64>();
        let p = field(pi).parse::<f64>();
        let (t, p) = match (t, p) {
            (Ok(t), Ok(p)) => (t, p),
            _ => {
                flag(line, format!("cannot parse t = `{}`, price = `{}`", field(ti), field(pi)), &mut problems);
                continue;
            }
        };
        if !(p > 0.0 && p.is_finite()) {
            flag(line, format!("price {p} is not positive"), &mut problems);
        }
        if let Some(&prev) = path_out.times.last() {
            if !(t > prev) {
                flag(line, format!("t = {t} does not increase (previous {prev})"), &mut problems);
            }
        }
        path_out.times.push(t);
        path_out.prices.push(p);
        path_out.logvol.push(li.and_then(|j| field(j).parse().ok()).unwrap_or(f64::NAN));
    }
    if total > 0 {
        return Err(IngestError { path: name, lines: problems, total });
    }
    if path_out.times.is_empty() {
        return Err(IngestError::single(&name, 2, "no data rows"));
    }
    Ok(path_out)
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        for r in rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

#[derive(Serialize)]
struct PathRow {
    t: f64,
    price: f64,
    logvol: f64,
}

#[derive(Serialize)]
struct EnsembleRow {
    path: usize,
    t: f64,
    price: f64,
    logvol: f64,
}

pub fn write_paths(out: &Path, paths: &[MarketPath]) -> anyhow::Result<()> {
    if let [single] = paths {
        let rows = (0..single.len()).map(|i| PathRow {
            t: single.times[i],
            price: single.prices[i],
            logvol: single.logvol[i],
        });
        write_csv(out, rows)
    } else {
        let rows = paths.iter().enumerate().flat_map(|(p, m)| {
            (0..m.len()).map(move |i| EnsembleRow { path: p, t: m.times[i], price: m.prices[i], logvol: m.logvol[i] })
        });
        write_csv(out, rows)
    }
}
