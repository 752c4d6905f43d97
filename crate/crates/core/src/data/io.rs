//! Corpus directory layout:
//!
//! ```text
//! <root>/meta.csv               key,value rows: frame_period_seconds, audio_dim, video_dim, text_dim
//! <root>/<subject>/audio.csv    one row per frame, no header
//! <root>/<subject>/video.csv
//! <root>/<subject>/text.csv
//! <root>/<subject>/labels.csv   header `frame,arousal,valence,liking`
//! ```
//!
//! UTF-8, comma separated, `.` as decimal mark.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Corpus, SubjectRecord};
use crate::domain::{Dimension, FeatureDims, Modality};
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const META_FILE: &str = "meta.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const LABELS_HEADER: [&str; 4] = ["frame", "arousal", "valence", "liking"];

fn feature_file(m: Modality) -> String {
    format!("{}.csv", m.name())
}

fn load_err(path: &Path, line: usize, detail: impl Into<String>) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        line,
        detail: detail.into(),
    }
}

/// Shortest text that parses back to the same `f64`.
pub(crate) fn fmt_f64(out: &mut String, v: f64) {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        let _ = write!(out, "{v:e}");
    } else {
        let _ = write!(out, "{v}");
    }
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| load_err(path, 0, format!("cannot open: {e}")))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .from_reader(file))
}

fn parse_cell(path: &Path, line: usize, col: usize, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| load_err(path, line, format!("column {}: '{cell}' is not a number", col + 1)))?;
    if !v.is_finite() {
        return Err(load_err(path, line, format!("column {}: non-finite value", col + 1)));
    }
    Ok(v)
}

fn read_features(path: &Path, cols: usize) -> Result<Matrix> {
    let mut rdr = reader(path, false)?;
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| load_err(path, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != cols {
            return Err(load_err(
                path,
                line,
                format!("expected {cols} columns, found {}", rec.len()),
            ));
        }
        for (c, cell) in rec.iter().enumerate() {
            data.push(parse_cell(path, line, c, cell)?);
        }
        rows += 1;
    }
    Matrix::from_vec(rows, cols, data)
}

fn read_labels(path: &Path) -> Result<[Vec<f64>; 3]> {
    let mut rdr = reader(path, true)?;
    let header = rdr.headers().map_err(|e| load_err(path, 1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != LABELS_HEADER {
        return Err(load_err(
            path,
            1,
            format!("header must be '{}', found '{}'", LABELS_HEADER.join(","), names.join(",")),
        ));
    }
    let mut out: [Vec<f64>; 3] = Default::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| load_err(path, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 4 {
            return Err(load_err(path, line, format!("expected 4 columns, found {}", rec.len())));
        }
        let frame: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| load_err(path, line, format!("frame index '{}' is not an integer", &rec[0])))?;
        if frame != i {
            return Err(load_err(path, line, format!("expected frame {i}, found {frame}")));
        }
        for d in Dimension::ALL {
            out[d.index()].push(parse_cell(path, line, d.index() + 1, &rec[d.index() + 1])?);
        }
    }
    Ok(out)
}

fn read_meta(path: &Path) -> Result<(f64, FeatureDims)> {
    let mut rdr = reader(path, true)?;
    let mut period = None;
    let mut dims = [None; 3];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| load_err(path, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(load_err(path, line, "expected key,value"));
        }
        let (key, value) = (rec[0].trim(), rec[1].trim());
        let int = || -> Result<usize> {
            value
                .parse()
                .map_err(|_| load_err(path, line, format!("{key}: '{value}' is not a positive integer")))
        };
        match key {
            "frame_period_seconds" => period = Some(parse_cell(path, line, 1, value)?),
            "audio_dim" => dims[0] = Some(int()?),
            "video_dim" => dims[1] = Some(int()?),
            "text_dim" => dims[2] = Some(int()?),
            other => return Err(load_err(path, line, format!("unknown key '{other}'"))),
        }
    }
    let missing = |k: &str| load_err(path, 0, format!("missing key '{k}'"));
    let period = period.ok_or_else(|| missing("frame_period_seconds"))?;
    let dims = FeatureDims::new(
        dims[0].ok_or_else(|| missing("audio_dim"))?,
        dims[1].ok_or_else(|| missing("video_dim"))?,
        dims[2].ok_or_else(|| missing("text_dim"))?,
    )
    .map_err(|e| load_err(path, 0, e.to_string()))?;
    Ok((period, dims))
}

/// Reads and validates a corpus directory. Subjects are returned sorted by id.
pub fn load_corpus(root: impl AsRef<Path>) -> Result<Corpus> {
    let root = root.as_ref();
    let (period, dims) = read_meta(&root.join(META_FILE))?;

    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(load_err(root, 0, "no subject directories"));
    }

    let mut subjects = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let id = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| load_err(&dir, 0, "subject directory name is not UTF-8"))?
            .to_string();
        let labels_path = dir.join(LABELS_FILE);
        let labels = read_labels(&labels_path)?;
        let frames = labels[0].len();
        let mut feats = Vec::with_capacity(3);
        for m in Modality::ALL {
            let path = dir.join(feature_file(m));
            let f = read_features(&path, dims.get(m))?;
            if f.rows() != frames {
                return Err(load_err(
                    &path,
                    0,
                    format!("{} frames, but {} has {frames}", f.rows(), labels_path.display()),
                ));
            }
            feats.push(f);
        }
        let [a, v, t]: [Matrix; 3] = feats.try_into().expect("three modalities");
        let record = SubjectRecord {
            id,
            features: [a, v, t],
            labels,
        };
        record.validate(&dims).map_err(|e| load_err(&dir, 0, e.to_string()))?;
        subjects.push(record);
    }
    Corpus::new(period, dims, subjects)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_all(w: &mut BufWriter<fs::File>, path: &Path, s: &str) -> Result<()> {
    w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes `corpus` under `root` in the layout documented at module level.
pub fn write_corpus(corpus: &Corpus, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;

    let meta_path = root.join(META_FILE);
    let mut meta = String::from("key,value\nframe_period_seconds,");
    fmt_f64(&mut meta, corpus.frame_period());
    let dims = corpus.dims();
    let _ = write!(
        meta,
        "\naudio_dim,{}\nvideo_dim,{}\ntext_dim,{}\n",
        dims.audio, dims.video, dims.text
    );
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;

    for s in corpus.subjects() {
        let dir = root.join(&s.id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for m in Modality::ALL {
            let path = dir.join(feature_file(m));
            let mut w = create(&path)?;
            let f = s.features(m);
            let mut line = String::new();
            for r in 0..f.rows() {
                line.clear();
                for (c, v) in f.row(r).iter().enumerate() {
                    if c > 0 {
                        line.push(',');
                    }
                    fmt_f64(&mut line, *v);
                }
                line.push('\n');
                write_all(&mut w, &path, &line)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join(LABELS_FILE);
        let mut w = create(&path)?;
        let mut text = LABELS_HEADER.join(",");
        text.push('\n');
        for i in 0..s.frames() {
            let _ = write!(text, "{i}");
            for d in Dimension::ALL {
                text.push(',');
                fmt_f64(&mut text, s.labels(d)[i]);
            }
            text.push('\n');
        }
        write_all(&mut w, &path, &text)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
