//! Plain-text parameter checkpoints.
//!
//! ```text
//! frodo-params v1
//! <name> <rank> <dim_0> ... <dim_{rank-1}>
//! <value> <value> ...
//! ```
//! Entries appear in name order; values are row-major and written in the
//! shortest form that parses back to the same bits.

use std::io::{BufRead, Write};

use super::params::ParamSet;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &str = "frodo-params v1";

pub fn write_checkpoint<T: Scalar, W: Write>(params: &ParamSet<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    for (name, t) in params.iter() {
        write!(out, "{name} {}", t.rank())?;
        for d in t.shape() {
            write!(out, " {d}")?;
        }
        writeln!(out)?;
        let values: Vec<String> = t.data().iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", values.join(" "))?;
    }
    Ok(())
}

pub fn read_checkpoint<T: Scalar, R: BufRead>(input: R) -> Result<ParamSet<T>> {
    let err = |line: usize, msg: &str| Error::Checkpoint {
        line,
        msg: msg.to_string(),
    };
    let mut lines = input.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((i, Err(e))) => Err(err(i + 1, &e.to_string())),
            None => Err(err(0, &format!("unexpected end of input, expected {what}"))),
        }
    };
    let (_, magic) = next("header")?;
    if magic.trim() != MAGIC {
        return Err(err(1, "bad header"));
    }
    let mut params = ParamSet::new();
    loop {
        let (lineno, header) = match next("entry") {
            Ok(h) => h,
            Err(Error::Checkpoint { line: 0, .. }) => break,
            Err(e) => return Err(e),
        };
        if header.trim().is_empty() {
            continue;
        }
        let mut fields = header.split_whitespace();
        let name = fields.next().ok_or_else(|| err(lineno, "missing name"))?;
        let rank: usize = fields
            .next()
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| err(lineno, "bad rank"))?;
        let shape: Vec<usize> = fields
            .map(|d| d.parse().map_err(|_| err(lineno, "bad dimension")))
            .collect::<Result<_>>()?;
        if shape.len() != rank {
            return Err(err(lineno, "rank does not match dimensions"));
        }
        let (vline, values) = next("values")?;
        let data: Vec<T> = values
            .split_whitespace()
            .map(|v| v.parse::<T>().map_err(|_| err(vline, "bad value")))
            .collect::<Result<_>>()?;
        let t = Tensor::new(shape, data).map_err(|e| err(vline, &e.to_string()))?;
        params
            .insert(name, t)
            .map_err(|e| err(lineno, &e.to_string()))?;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, AgentNetwork, Head};

    #[test]
    fn round_trip_is_bit_exact() {
        let net = AgentNetwork::new(5, vec![7], Head::ActorCritic { num_actions: 3 });
        let p: ParamSet<f64> = init_params(&net, 11);
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        let q: ParamSet<f64> = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint::<f64, _>("nope\n".as_bytes()).is_err());
        let bad = format!("{MAGIC}\nw 2 2 2\n1 2 3\n");
        assert!(read_checkpoint::<f64, _>(bad.as_bytes()).is_err());
    }
}
