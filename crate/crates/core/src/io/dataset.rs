//! Calibration set as CSV: `sample,position,modality,embed_index`.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::{csv_writer, parse_error};
use crate::data::CalibrationSet;
use crate::engine::{Modality, Token, TokenSequence};
use crate::error::Result;

pub fn write_dataset<W: Write>(set: &CalibrationSet, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["sample", "position", "modality", "embed_index"])?;
    for (j, s) in set.samples().iter().enumerate() {
        for (i, t) in s.tokens().iter().enumerate() {
            out.write_record([j.to_string(), i.to_string(), t.modality.to_string(), t.embed_index.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R, context: &str) -> Result<CalibrationSet> {
    let mut reader = csv::ReaderBuilder::new().from_reader(r);
    let headers = reader.headers()?.clone();
    if headers != vec!["sample", "position", "modality", "embed_index"] {
        return Err(parse_error(context, format!("unexpected header {headers:?}")));
    }
    let mut samples: Vec<Vec<Token>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let at = |field: &str| format!("{context}: record {} field `{field}`", line + 1);
        let sample: usize = rec[0].parse().map_err(|e| parse_error(at("sample"), e))?;
        let position: usize = rec[1].parse().map_err(|e| parse_error(at("position"), e))?;
        let modality: Modality = rec[2].parse().map_err(|e| parse_error(at("modality"), e))?;
        let embed_index: u32 = rec[3].parse().map_err(|e| parse_error(at("embed_index"), e))?;
        if sample == samples.len() {
            samples.push(Vec::new());
        } else if sample + 1 != samples.len() {
            return Err(parse_error(at("sample"), "samples must be contiguous and ascending"));
        }
        let seq = samples.last_mut().expect("pushed above");
        if position != seq.len() {
            return Err(parse_error(at("position"), "positions must start at 0 and be contiguous"));
        }
        seq.push(Token { modality, embed_index });
    }
    let samples = samples.into_iter().map(TokenSequence::new).collect::<Result<Vec<_>>>()?;
    CalibrationSet::new(samples)
}

pub fn save_dataset(set: &CalibrationSet, path: &Path) -> Result<()> {
    write_dataset(set, File::create(path)?)
}

pub fn load_dataset(path: &Path) -> Result<CalibrationSet> {
    read_dataset(BufReader::new(File::open(path)?), &path.display().to_string())
}
