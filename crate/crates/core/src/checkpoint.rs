//! Text checkpoints of parameter tensors.
//!
//! ```text
//! KANFE1
//! tensors <count>
//! <name> <rank> <dim_1> ... <dim_rank>
//! <value> <value> ...            <- row-major, one line per tensor
//! ...
//! ```
//!
//! Values are printed as the shortest decimal that parses back to the same
//! `f64`, so checkpoints of `f64` and `f32` models reload bit-exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::nn::Parameterized;
use crate::scalar::Scalar;

pub const MAGIC: &str = "KANFE1";

pub fn save_checkpoint<T: Scalar, P: Parameterized<T>, W: Write>(model: &P, mut w: W) -> Result<()> {
    let params = model.params();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "tensors {}", params.len())?;
    for p in &params {
        let dims: Vec<String> = p.shape.iter().map(usize::to_string).collect();
        writeln!(w, "{} {} {}", p.name, p.shape.len(), dims.join(" "))?;
        let values: Vec<String> = p.data.iter().map(|v| v.to_f64_lossy().to_string()).collect();
        writeln!(w, "{}", values.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Loads values into an already-built model, checking every name and shape.
pub fn load_checkpoint<T: Scalar, P: Parameterized<T>, R: BufRead>(model: &mut P, r: R) -> Result<()> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> { lines.next().ok_or_else(|| bad(format!("missing {what}")))?.map_err(Error::from) };
    if next("magic")?.trim() != MAGIC {
        return Err(bad(format!("not a {MAGIC} checkpoint")));
    }
    let expected: Vec<(String, Vec<usize>)> = model.params().iter().map(|p| (p.name.clone(), p.shape.clone())).collect();
    let count_line = next("tensor count")?;
    let count: usize = count_line
        .strip_prefix("tensors ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| bad(format!("bad tensor count line {count_line:?}")))?;
    if count != expected.len() {
        return Err(bad(format!("checkpoint has {count} tensors, model has {}", expected.len())));
    }
    let mut values = Vec::with_capacity(count);
    for (name, shape) in &expected {
        let header = next("tensor header")?;
        let mut parts = header.split_whitespace();
        let got_name = parts.next().unwrap_or_default();
        let dims: Vec<usize> = parts.skip(1).map(|d| d.parse().map_err(|_| bad(format!("bad dimension {d:?}")))).collect::<Result<_>>()?;
        if got_name != name || &dims != shape {
            return Err(bad(format!("expected {name} {shape:?}, found {got_name} {dims:?}")));
        }
        let data: Vec<T> = next("tensor values")?
            .split_whitespace()
            .map(|v| v.parse::<f64>().map(T::from_f64_lossy).map_err(|_| bad(format!("bad value {v:?} in {name}"))))
            .collect::<Result<_>>()?;
        if data.len() != shape.iter().product::<usize>() {
            return Err(bad(format!("{name}: expected {} values, found {}", shape.iter().product::<usize>(), data.len())));
        }
        values.push(data);
    }
    for (dst, src) in model.params_mut().into_iter().zip(values) {
        dst.copy_from_slice(&src);
    }
    Ok(())
}
