//! Binary snapshots of a running chain.
//!
//! Layout (little endian): the magic `SPMC1`, then the iteration counter,
//! θ, b, λ, α, the latent values, the proposal with its adaptation history,
//! the acceptance tallies, the retained draws and the log-likelihood trace.
//! Matrices are stored as `u64 rows, u64 cols` followed by row-major `f64`s.

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use super::chain::{ChainState, PosteriorSample, Tallies};
use super::proposal::{AdaptiveProposal, Welford};
use crate::error::{Result, SpdeError};
use crate::spde_model::SpdeParams;

pub const MAGIC: &[u8; 5] = b"SPMC1";

/// Everything needed to continue a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub state: ChainState,
    pub sample: PosteriorSample,
    pub loglik_trace: Vec<f64>,
}

fn put_vec<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    w.write_u64::<LE>(v.len() as u64)?;
    for &x in v {
        w.write_f64::<LE>(x)?;
    }
    Ok(())
}

fn get_vec<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = r.read_u64::<LE>()? as usize;
    if n > 1 << 34 {
        return Err(SpdeError::Parse {
            line: 0,
            key: "checkpoint".into(),
            message: format!("implausible vector length {n}"),
        });
    }
    let mut v = vec![0.0; n];
    r.read_f64_into::<LE>(&mut v)?;
    Ok(v)
}

fn put_mat<W: Write>(w: &mut W, m: &Array2<f64>) -> std::io::Result<()> {
    w.write_u64::<LE>(m.nrows() as u64)?;
    w.write_u64::<LE>(m.ncols() as u64)?;
    for &x in m.iter() {
        w.write_f64::<LE>(x)?;
    }
    Ok(())
}

fn get_mat<R: Read>(r: &mut R) -> Result<Array2<f64>> {
    let rows = r.read_u64::<LE>()? as usize;
    let cols = r.read_u64::<LE>()? as usize;
    let mut v = vec![0.0; rows * cols];
    r.read_f64_into::<LE>(&mut v)?;
    Array2::from_shape_vec((rows, cols), v).map_err(|e| SpdeError::invalid(e.to_string()))
}

fn put_rows<W: Write>(w: &mut W, rows: &[Vec<f64>]) -> std::io::Result<()> {
    w.write_u64::<LE>(rows.len() as u64)?;
    for r in rows {
        put_vec(w, r)?;
    }
    Ok(())
}

fn get_rows<R: Read>(r: &mut R) -> Result<Vec<Vec<f64>>> {
    let n = r.read_u64::<LE>()? as usize;
    (0..n).map(|_| get_vec(r)).collect()
}

pub fn write_checkpoint<W: Write>(w: &mut W, ck: &Checkpoint) -> Result<()> {
    let s = &ck.state;
    w.write_all(MAGIC)?;
    w.write_u64::<LE>(s.iteration)?;
    put_vec(w, &s.theta.to_array())?;
    put_vec(w, &s.b)?;
    w.write_f64::<LE>(s.lambda)?;
    put_mat(w, &s.alpha)?;
    put_mat(w, &s.w)?;
    let p = &s.proposal;
    w.write_u64::<LE>(p.dim as u64)?;
    put_vec(w, &p.cov)?;
    w.write_f64::<LE>(p.log_scale)?;
    w.write_f64::<LE>(p.jitter)?;
    w.write_u64::<LE>(p.scale_updates)?;
    w.write_u64::<LE>(p.history.count)?;
    put_vec(w, &p.history.mean)?;
    put_vec(w, &p.history.m2)?;
    let t = &s.tallies;
    for v in [
        t.joint_accepted,
        t.joint_proposed,
        t.joint_accepted_post,
        t.joint_proposed_post,
        t.lambda_accepted,
        t.lambda_proposed,
        t.window_accepted,
        t.window_proposed,
    ] {
        w.write_u64::<LE>(v)?;
    }
    w.write_u64::<LE>(ck.sample.names.len() as u64)?;
    for n in &ck.sample.names {
        w.write_u64::<LE>(n.len() as u64)?;
        w.write_all(n.as_bytes())?;
    }
    put_rows(w, &ck.sample.draws)?;
    put_rows(w, &ck.sample.final_alpha)?;
    put_vec(w, &ck.loglik_trace)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SpdeError::Parse {
            line: 0,
            key: "header".into(),
            message: "not a chain checkpoint (bad magic)".into(),
        });
    }
    let iteration = r.read_u64::<LE>()?;
    let th = get_vec(r)?;
    let theta: [f64; 9] = th.try_into().map_err(|_| SpdeError::Parse {
        line: 0,
        key: "theta".into(),
        message: "expected nine parameters".into(),
    })?;
    let b = get_vec(r)?;
    let lambda = r.read_f64::<LE>()?;
    let alpha = get_mat(r)?;
    let wv = get_mat(r)?;
    let dim = r.read_u64::<LE>()? as usize;
    let cov = get_vec(r)?;
    let log_scale = r.read_f64::<LE>()?;
    let jitter = r.read_f64::<LE>()?;
    let scale_updates = r.read_u64::<LE>()?;
    let count = r.read_u64::<LE>()?;
    let mean = get_vec(r)?;
    let m2 = get_vec(r)?;
    let mut tv = [0u64; 8];
    for v in tv.iter_mut() {
        *v = r.read_u64::<LE>()?;
    }
    let n_names = r.read_u64::<LE>()? as usize;
    let mut names = Vec::with_capacity(n_names);
    for _ in 0..n_names {
        let len = r.read_u64::<LE>()? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        names.push(String::from_utf8(buf).map_err(|e| SpdeError::invalid(e.to_string()))?);
    }
    let draws = get_rows(r)?;
    let final_alpha = get_rows(r)?;
    let loglik_trace = get_vec(r)?;
    Ok(Checkpoint {
        state: ChainState {
            iteration,
            theta: SpdeParams::from_array(&theta),
            b,
            lambda,
            alpha,
            w: wv,
            proposal: AdaptiveProposal {
                dim,
                cov,
                log_scale,
                jitter,
                history: Welford { count, mean, m2 },
                scale_updates,
            },
            tallies: Tallies {
                joint_accepted: tv[0],
                joint_proposed: tv[1],
                joint_accepted_post: tv[2],
                joint_proposed_post: tv[3],
                lambda_accepted: tv[4],
                lambda_proposed: tv[5],
                window_accepted: tv[6],
                window_proposed: tv[7],
            },
        },
        sample: PosteriorSample {
            names,
            draws,
            final_alpha,
        },
        loglik_trace,
    })
}

impl super::chain::Sampler {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            state: self.state.clone(),
            sample: self.sample.clone(),
            loglik_trace: self.loglik_trace.clone(),
        }
    }
}
