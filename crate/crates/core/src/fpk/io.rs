//! On-disk flows: a directory holding `header.json` and one
//! `node_NNNNN.csv` per time node (`cell,density`, cells in index order).

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FpkError, Grid, MarginalFlow};

pub const SCHEMA: &str = "fpklab-flow/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    schema: String,
    grid: Grid,
    times: Vec<f64>,
    leak: Vec<f64>,
    floored: Vec<f64>,
}

fn node_name(k: usize) -> String {
    format!("node_{k:05}.csv")
}

pub fn write_flow(dir: &Path, flow: &MarginalFlow) -> Result<(), FpkError> {
    fs::create_dir_all(dir)?;
    let header = Header {
        schema: SCHEMA.into(),
        grid: *flow.grid(),
        times: flow.times().to_vec(),
        leak: flow.leak().to_vec(),
        floored: flow.floored().to_vec(),
    };
    let json = serde_json::to_string_pretty(&header).map_err(|e| FpkError::Format(e.to_string()))?;
    fs::write(dir.join("header.json"), json)?;
    for k in 0..flow.len() {
        let mut w = BufWriter::new(fs::File::create(dir.join(node_name(k)))?);
        writeln!(w, "cell,density")?;
        for (i, v) in flow.density(k).iter().enumerate() {
            writeln!(w, "{i},{v}")?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn read_flow(dir: &Path) -> Result<MarginalFlow, FpkError> {
    let text = fs::read_to_string(dir.join("header.json"))?;
    let h: Header = serde_json::from_str(&text).map_err(|e| FpkError::Format(format!("header: {e}")))?;
    if h.schema != SCHEMA {
        return Err(FpkError::Format(format!("schema '{}' is not {SCHEMA}", h.schema)));
    }
    h.grid.validate()?;
    let n = h.grid.len();
    let mut dens = Vec::with_capacity(h.times.len());
    for k in 0..h.times.len() {
        let name = node_name(k);
        let file = BufReader::new(fs::File::open(dir.join(&name))?);
        let mut lines = file.lines();
        match lines.next() {
            Some(Ok(l)) if l.trim() == "cell,density" => {}
            _ => return Err(FpkError::Format(format!("{name}: missing 'cell,density' header"))),
        }
        let mut d = Vec::with_capacity(n);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (i, v) = line.split_once(',').ok_or_else(|| FpkError::Format(format!("{name}:{}: expected two columns", row + 2)))?;
            let i: usize = i.trim().parse().map_err(|_| FpkError::Format(format!("{name}:{}: bad cell index", row + 2)))?;
            if i != d.len() {
                return Err(FpkError::Format(format!("{name}:{}: cells out of order", row + 2)));
            }
            d.push(v.trim().parse::<f64>().map_err(|_| FpkError::Format(format!("{name}:{}: bad density", row + 2)))?);
        }
        if d.len() != n {
            return Err(FpkError::Format(format!("{name}: {} cells, grid has {n}", d.len())));
        }
        dens.push(d);
    }
    MarginalFlow::new(h.grid, h.times, dens, h.leak, h.floored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpk::Boundary;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = Grid::new(2, 3.0, 16, Boundary::Absorbing).unwrap();
        let a = g.gaussian(&[0.1, -0.3], 0.7).unwrap();
        let b = g.sample_density(|x| (x[0] * 1.3).cos().powi(2) + 1e-300).unwrap();
        let flow = MarginalFlow::new(g, vec![0.0, 1.0 / 3.0], vec![a, b], vec![0.0, 1e-17], vec![0.0, 3e-20]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_flow(dir.path(), &flow).unwrap();
        assert_eq!(read_flow(dir.path()).unwrap(), flow);
    }

    #[test]
    fn truncated_node_is_format_error() {
        let g = Grid::new(1, 1.0, 16, Boundary::Reflecting).unwrap();
        let flow = MarginalFlow::stationary(g, vec![0.5; 16], vec![0.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_flow(dir.path(), &flow).unwrap();
        fs::write(dir.path().join("node_00000.csv"), "cell,density\n0,0.5\n").unwrap();
        assert!(matches!(read_flow(dir.path()), Err(FpkError::Format(_))));
    }
}
