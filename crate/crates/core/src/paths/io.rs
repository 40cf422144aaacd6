//! Binary ensemble files.
//!
//! Layout (little endian): the 8-byte magic `FPKENS01`, then `N`, `K` (steps),
//! `d` as `u64`, `dt` as `f64`, `seed` and `stride` as `u64`, then the
//! recorded states as row-major `f64` (`N × R × d`, `R` the number of
//! recorded times).

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::ensemble::{step_count, PathEnsemble};
use super::PathsError;

const MAGIC: &[u8; 8] = b"FPKENS01";

pub fn write_ensemble(path: &Path, ens: &PathEnsemble) -> Result<(), PathsError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    for v in [ens.n_paths as u64, ens.n_steps as u64, ens.dim as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&ens.dt.to_le_bytes())?;
    w.write_all(&ens.seed.to_le_bytes())?;
    w.write_all(&(ens.stride as u64).to_le_bytes())?;
    for v in &ens.states {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64, PathsError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads an ensemble back. Only the recorded states survive a round trip:
/// tracked integrals are dropped and running maxima are recomputed from the
/// recorded states alone.
pub fn read_ensemble(path: &Path) -> Result<PathEnsemble, PathsError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(PathsError::Format("bad magic".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let k = read_u64(&mut r)? as usize;
    let d = read_u64(&mut r)? as usize;
    let dt = f64::from_bits(read_u64(&mut r)?);
    let seed = read_u64(&mut r)?;
    let stride = read_u64(&mut r)? as usize;
    if n == 0 || d == 0 || stride == 0 || step_count(dt, k as f64 * dt)? != k {
        return Err(PathsError::Format(format!("inconsistent header N={n}, K={k}, d={d}, dt={dt}, stride={stride}")));
    }
    let mut steps: Vec<usize> = (0..=k).step_by(stride).collect();
    if *steps.last().unwrap() != k {
        steps.push(k);
    }
    let rec = steps.len();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * rec * d * 8 {
        return Err(PathsError::Format(format!("payload has {} bytes, header implies {}", bytes.len(), n * rec * d * 8)));
    }
    let states: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let mut max_norm_sq = vec![0.0; n * rec];
    let mut blown = vec![false; n];
    for i in 0..n {
        let mut m = 0.0f64;
        for j in 0..rec {
            let x = &states[(i * rec + j) * d..(i * rec + j + 1) * d];
            m = m.max(x.iter().map(|v| v * v).sum());
            max_norm_sq[i * rec + j] = m;
        }
        blown[i] = states[i * rec * d..(i + 1) * rec * d].iter().any(|v| !v.is_finite());
    }
    Ok(PathEnsemble {
        n_paths: n,
        dim: d,
        dt,
        n_steps: k,
        seed,
        stride,
        record_steps: steps,
        states,
        max_norm_sq,
        tracked_labels: Vec::new(),
        integrals: Vec::new(),
        blown,
        max_clip: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{builtin_field, Params};
    use crate::paths::{simulate, InitialLaw, SimConfig};

    #[test]
    fn states_round_trip_exactly() {
        let f = builtin_field("ou", &Params::new()).unwrap();
        let law = InitialLaw::Gaussian { mean: vec![0.0], var: 1.0 };
        let cfg = SimConfig { n_paths: 1000, dt: 1e-2, horizon: 0.55, seed: 5, record_stride: 10 };
        let ens = simulate(&f, &law, &cfg, &[]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ens.bin");
        write_ensemble(&p, &ens).unwrap();
        let back = read_ensemble(&p).unwrap();
        assert_eq!(back.states, ens.states);
        assert_eq!(back.record_times(), ens.record_times());
        assert_eq!((back.seed(), back.stride(), back.n_steps()), (5, 10, 55));
        std::fs::write(&p, b"garbage!").unwrap();
        assert!(read_ensemble(&p).is_err());
    }
}
