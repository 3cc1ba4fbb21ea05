//! On-disk formats: CSV for measures, plans, potentials and map samples,
//! flat JSON for solve reports. All floats are printed with 17 significant
//! digits so round-trips are bit-faithful.

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::solver::{Plan, SolveReport};
use crate::transport_map::MapSample;
use std::io::{BufRead, Write};
use std::path::Path;

/// 17 significant digits; parses back to the identical f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `dim,n` header, then one `x_1,..,x_d,weight` row per atom.
pub fn write_measure_csv<W: Write>(w: &mut W, m: &DiscreteMeasure) -> Result<()> {
    writeln!(w, "{},{}", m.dim(), m.len())?;
    for i in 0..m.len() {
        for k in 0..m.dim() {
            write!(w, "{},", fmt_f64(m.point(i)[k]))?;
        }
        writeln!(w, "{}", fmt_f64(m.weight(i)))?;
    }
    Ok(())
}

pub fn read_measure_csv<R: BufRead>(r: R) -> Result<DiscreteMeasure> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty measure file".into()))??;
    let mut it = header.split(',');
    let dim: usize = parse(it.next(), "dim")?;
    let n: usize = parse(it.next(), "n")?;
    let mut points = Vec::with_capacity(n * dim);
    let mut weights = Vec::with_capacity(n);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} fields per row, got {}",
                dim + 1,
                fields.len()
            )));
        }
        for f in &fields[..dim] {
            points.push(parse(Some(f), "coordinate")?);
        }
        weights.push(parse(Some(fields[dim]), "weight")?);
    }
    if weights.len() != n {
        return Err(Error::InvalidInput(format!(
            "header promised {n} atoms, file has {}",
            weights.len()
        )));
    }
    DiscreteMeasure::new(dim, points, weights, 0.0, (0.0, 0.0))
}

fn parse<T: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<T> {
    s.and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::InvalidInput(format!("bad {what} field")))
}

/// `x_index,y_index,Z` rows over the stored (nonzero for sparse) entries.
pub fn write_plan_csv<W: Write>(w: &mut W, plan: &Plan) -> Result<()> {
    writeln!(w, "x_index,y_index,Z")?;
    for i in 0..plan.n_rows() {
        let mut res = Ok(());
        plan.for_each_in_row(i, |j, z| {
            if res.is_ok() {
                res = writeln!(w, "{i},{j},{}", fmt_f64(z)).map_err(Error::from);
            }
        });
        res?;
    }
    Ok(())
}

/// `index,<name>` rows for one potential vector.
pub fn write_potential_csv<W: Write>(w: &mut W, name: &str, values: &[f64]) -> Result<()> {
    writeln!(w, "index,{name}")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{}", fmt_f64(*v))?;
    }
    Ok(())
}

/// `x_1..x_d,T_1..T_d,mass,support_radius` rows.
pub fn write_map_samples_csv<W: Write>(w: &mut W, samples: &[MapSample]) -> Result<()> {
    if samples.is_empty() {
        return Ok(());
    }
    let d = samples[0].x.len();
    let xs: Vec<String> = (1..=d).map(|k| format!("x_{k}")).collect();
    let ts: Vec<String> = (1..=d).map(|k| format!("T_{k}")).collect();
    writeln!(w, "{},{},mass,support_radius", xs.join(","), ts.join(","))?;
    for s in samples {
        let mut fields: Vec<String> = s.x.iter().map(|v| fmt_f64(*v)).collect();
        fields.extend(s.t_of_x.iter().map(|v| fmt_f64(*v)));
        fields.push(fmt_f64(s.weight_mass));
        fields.push(fmt_f64(s.support_radius));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Flat JSON object with keys iterations, residual, primal, dual, gap, wall_ms.
pub fn write_report_json(path: &Path, report: &SolveReport) -> Result<()> {
    let s = serde_json::to_string_pretty(report)?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

/// Exact baselines share the map-sample conventions:
/// `x_1..x_d,T_1..T_d,f` rows under a `cost` header line.
pub fn write_exact_solution_csv<W: Write>(
    w: &mut W,
    sol: &crate::baseline::ExactSolution,
) -> Result<()> {
    writeln!(w, "cost,{}", fmt_f64(sol.cost))?;
    if sol.map_samples.is_empty() {
        return Ok(());
    }
    let d = sol.map_samples[0].0.len();
    let xs: Vec<String> = (1..=d).map(|k| format!("x_{k}")).collect();
    let ts: Vec<String> = (1..=d).map(|k| format!("T_{k}")).collect();
    writeln!(w, "{},{},f", xs.join(","), ts.join(","))?;
    for ((x, t), f) in sol.map_samples.iter().zip(&sol.potential_f) {
        let mut fields: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
        fields.extend(t.iter().map(|v| fmt_f64(*v)));
        fields.push(fmt_f64(*f));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::uniform_on_box;
    use proptest::prelude::*;

    #[test]
    fn measure_round_trip() {
        let m = uniform_on_box(2, &[0.0, 0.0], &[1.0, 1.0], 4).unwrap();
        let mut buf = Vec::new();
        write_measure_csv(&mut buf, &m).unwrap();
        let back = read_measure_csv(&buf[..]).unwrap();
        assert_eq!(back.dim(), 2);
        assert_eq!(back.len(), 16);
        for i in 0..m.len() {
            assert_eq!(m.point(i), back.point(i));
            assert_eq!(m.weight(i), back.weight(i));
        }
    }

    #[test]
    fn exact_solution_csv_shape() {
        let l = uniform_on_box(1, &[0.0], &[1.0], 4).unwrap();
        let m = uniform_on_box(1, &[1.0], &[2.0], 4).unwrap();
        let sol = crate::baseline::exact_1d(&l, &m).unwrap();
        let mut buf = Vec::new();
        write_exact_solution_csv(&mut buf, &sol).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cost,"));
        assert_eq!(text.lines().count(), 2 + 4);
    }

    proptest! {
        #[test]
        fn f64_formatting_is_lossless(x in proptest::num::f64::NORMAL) {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(x, back);
        }
    }
}
