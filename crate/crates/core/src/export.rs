//! Plot-ready CSV tables for witness sequences and trajectories.

use std::io::Write;

use crate::flow::Trajectory;
use crate::scan::WitnessSequence;

fn header(first: &str, n: usize, rest: &[&str]) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((1..=n).map(|i| format!("x_{i}")))
        .chain(rest.iter().map(|s| s.to_string()))
        .collect()
}

/// Columns `radius, x_1..x_n, f, quantity`.
pub fn write_witness_csv<W: Write>(w: &WitnessSequence, out: W) -> csv::Result<()> {
    let n = w.points.first().map_or(0, |p| p.len());
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(header("radius", n, &["f", "quantity"]))?;
    for k in 0..w.points.len() {
        let mut row = vec![w.radii[k]];
        row.extend_from_slice(&w.points[k]);
        row.extend([w.f_values[k], w.quantity_values[k]]);
        csv.write_record(row.iter().map(|v| v.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

/// Columns `t, x_1..x_n, f, g, norm`.
pub fn write_trajectory_csv<W: Write>(t: &Trajectory, out: W) -> csv::Result<()> {
    let n = t.points.first().map_or(0, |p| p.len());
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(header("t", n, &["f", "g", "norm"]))?;
    for row in t.rows() {
        csv.write_record(row.iter().map(|v| v.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_columns() {
        let w = WitnessSequence {
            seed_index: 3,
            radii: vec![10.0, 20.0],
            points: vec![vec![10.0, 0.0], vec![20.0, 0.5]],
            f_values: vec![0.0, 0.00125],
            quantity_values: vec![0.099, 0.05],
            probed: 2,
        };
        let mut buf = Vec::new();
        write_witness_csv(&w, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "radius,x_1,x_2,f,quantity");
        assert_eq!(lines[2], "20,20,0.5,0.00125,0.05");
    }
}
