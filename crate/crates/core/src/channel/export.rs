//! Plain-text CSV form of a [`MimoChannel`].
//!
//! ```text
//! # f_c_hz=10000000000
//! # bandwidth_hz=102400000
//! # subcarrier_spacing_hz=400000
//! # n_rx=2
//! # n_tx=2
//! k,r,t,re,im
//! 0,0,0,1.5e-4,-2.25e-5
//! ...
//! ```
//!
//! Rows are ordered by subcarrier, then Rx element, then Tx element.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::MimoChannel;
use crate::{Error, Result};

pub fn write_channel_csv<W: Write>(mut writer: W, channel: &MimoChannel) -> Result<()> {
    writeln!(writer, "# f_c_hz={}", channel.f_c)?;
    writeln!(writer, "# bandwidth_hz={}", channel.bandwidth)?;
    writeln!(writer, "# subcarrier_spacing_hz={}", channel.subcarrier_spacing)?;
    writeln!(writer, "# n_rx={}", channel.n_rx())?;
    writeln!(writer, "# n_tx={}", channel.n_tx())?;
    writeln!(writer, "k,r,t,re,im")?;
    for (k, m) in channel.h.iter().enumerate() {
        for r in 0..m.nrows() {
            for t in 0..m.ncols() {
                let v = m[(r, t)];
                writeln!(writer, "{k},{r},{t},{},{}", v.re, v.im)?;
            }
        }
    }
    Ok(())
}

pub fn read_channel_csv<R: Read>(reader: R) -> Result<MimoChannel> {
    let bad = |msg: &str| Error::InvalidChannel(format!("channel CSV: {msg}"));
    let mut meta = std::collections::BTreeMap::new();
    let mut header_seen = false;
    let mut entries = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                let v: f64 = v.trim().parse().map_err(|_| bad("bad metadata value"))?;
                meta.insert(k.trim().to_string(), v);
            }
            continue;
        }
        if !header_seen {
            if line != "k,r,t,re,im" {
                return Err(bad("missing `k,r,t,re,im` header"));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|_| bad("bad index"));
        let val = |s: &str| s.parse::<f64>().map_err(|_| bad("bad value"));
        entries.push((
            idx(fields[0])?,
            idx(fields[1])?,
            idx(fields[2])?,
            Complex64::new(val(fields[3])?, val(fields[4])?),
        ));
    }
    let get = |k: &str| meta.get(k).copied().ok_or_else(|| bad(&format!("missing `{k}`")));
    let n_rx = get("n_rx")? as usize;
    let n_tx = get("n_tx")? as usize;
    let n_f = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let mut h = vec![DMatrix::zeros(n_rx, n_tx); n_f];
    for (k, r, t, v) in entries {
        if r >= n_rx || t >= n_tx {
            return Err(bad("element index out of range"));
        }
        h[k][(r, t)] = v;
    }
    MimoChannel::new(h, get("f_c_hz")?, get("bandwidth_hz")?, get("subcarrier_spacing_hz")?)
}
