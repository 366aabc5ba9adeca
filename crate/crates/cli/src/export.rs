//! CSV dumps for external plotting and probe exchange.

use std::io::{Read, Write};

use mtwv_core::geometry::{image_domain, Side};
use mtwv_core::mtw::MTWEvaluation;
use mtwv_core::synthetic::{default_t_grid, ComparisonFunction, Probe};
use mtwv_core::{CostModel, Error, ImageDomain, Vector};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad probe row {row}: {msg}")]
    BadRow { row: usize, msg: String },
}

const MIN_RESOLUTION: usize = 16;

fn coords(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect()
}

fn push_vec(row: &mut Vec<String>, v: &Vector) {
    row.extend(v.iter().map(|c| format!("{c:e}")));
}

/// `resolution × resolution` values of the probe's `F` over the bounding box of
/// `Y*_{x₀}`. Points outside the image get an empty value and `inside = 0`.
pub fn export_level_set_grid<W: Write>(cost: &CostModel, probe: &Probe, resolution: usize, out: W) -> Result<(), ExportError> {
    if cost.dim() != 2 {
        return Err(Error::UnsupportedDimension(cost.dim()).into());
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::UnsupportedResolution(resolution).into());
    }
    let img = image_domain(cost, &probe.x0, Side::X, 64)?;
    let f = ComparisonFunction::for_probe(cost, probe)?;
    let (lo, hi) = &img.bbox;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "v1", "v2", "F", "inside"])?;
    let step = |i: usize, k: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / (resolution - 1) as f64;
    for row in 0..resolution {
        for col in 0..resolution {
            let v = Vector::from_vec(vec![step(col, 0), step(row, 1)]);
            let (value, inside) = match f.eval(&v) {
                Ok(x) => (format!("{x:e}"), "1"),
                Err(_) => (String::new(), "0"),
            };
            w.write_record([row.to_string(), col.to_string(), format!("{:e}", v[0]), format!("{:e}", v[1]), value, inside.into()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Boundary samples of an image domain with their preimages, then the inball center.
pub fn export_image_points<W: Write>(img: &ImageDomain, out: W) -> Result<(), ExportError> {
    let dim = img.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["kind".to_string(), "index".to_string()];
    header.extend(coords("p", dim));
    header.extend(coords("z", dim));
    w.write_record(&header)?;
    let rows = img
        .boundary_samples
        .iter()
        .zip(&img.boundary_preimages)
        .map(|(p, z)| ("boundary", p, z))
        .chain(std::iter::once(("inball-center", &img.inball_center, &img.inball_preimage)));
    for (i, (kind, p, z)) in rows.enumerate() {
        let mut row = vec![kind.to_string(), i.to_string()];
        push_vec(&mut row, p);
        push_vec(&mut row, z);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row `(x, p, ξ, η, value, step_p)` per evaluation.
pub fn export_a3_scan<W: Write>(evaluations: &[MTWEvaluation], out: W) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    let dim = evaluations.first().map_or(2, |e| e.x.len());
    let mut header: Vec<String> = Vec::new();
    for p in ["x", "p", "xi", "eta"] {
        header.extend(coords(p, dim));
    }
    header.extend(["value".to_string(), "step_p".to_string()]);
    w.write_record(&header)?;
    for e in evaluations {
        let mut row = Vec::with_capacity(header.len());
        for v in [&e.x, &e.p, &e.xi, &e.eta] {
            push_vec(&mut row, v);
        }
        row.push(format!("{:e}", e.value));
        row.push(format!("{:e}", e.step_p));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Probe endpoints `(x0, x1, v0, v1)`; the `t` grid is not stored.
pub fn write_probes<W: Write>(probes: &[Probe], out: W) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    let dim = probes.first().map_or(2, |p| p.x0.len());
    let mut header: Vec<String> = Vec::new();
    for p in ["x0_", "x1_", "v0_", "v1_"] {
        header.extend(coords(p, dim));
    }
    w.write_record(&header)?;
    for p in probes {
        let mut row = Vec::with_capacity(header.len());
        for v in [&p.x0, &p.x1, &p.v0, &p.v1] {
            push_vec(&mut row, v);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Probes written by [`write_probes`], with the default `t` grid.
pub fn read_probes<R: Read>(input: R) -> Result<Vec<Probe>, ExportError> {
    let mut r = csv::Reader::from_reader(input);
    let width = r.headers()?.len();
    if width == 0 || width % 4 != 0 {
        return Err(ExportError::BadRow { row: 0, msg: format!("{width} columns is not a multiple of 4") });
    }
    let dim = width / 4;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| ExportError::BadRow { row: i + 1, msg: e.to_string() })?;
        let part = |k: usize| Vector::from_column_slice(&vals[k * dim..(k + 1) * dim]);
        let mut p = Probe::new(part(0), part(1), part(2), part(3));
        p.t_grid = default_t_grid();
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mtwv_core::cost::{build_cost, CostParams};
    use mtwv_core::synthetic::{generate_probes, ProbeStrategy};

    fn cost(name: &str) -> CostModel {
        build_cost(name, &CostParams::default(), None).unwrap()
    }

    #[test]
    fn probes_round_trip_bitwise() {
        let c = cost("log");
        let probes = generate_probes(&c, 16, 3, ProbeStrategy::Uniform).unwrap();
        let mut buf = Vec::new();
        write_probes(&probes, &mut buf).unwrap();
        assert_eq!(read_probes(&buf[..]).unwrap(), probes);
    }

    #[test]
    fn bilinear_grid_is_linear() {
        let c = cost("bilinear");
        let probe = generate_probes(&c, 1, 0, ProbeStrategy::Uniform).unwrap().remove(0);
        let mut buf = Vec::new();
        export_level_set_grid(&c, &probe, 16, &mut buf).unwrap();
        let mut r = csv::Reader::from_reader(&buf[..]);
        let g = &probe.x1 - &probe.x0;
        let mut n = 0;
        for rec in r.records() {
            let rec = rec.unwrap();
            let v = Vector::from_vec(vec![rec[2].parse().unwrap(), rec[3].parse().unwrap()]);
            let f: f64 = rec[4].parse().unwrap();
            assert!((f - g.dot(&v)).abs() <= 1e-12);
            n += 1;
        }
        assert_eq!(n, 256);
    }

    #[test]
    fn grid_preconditions() {
        let c = cost("bilinear");
        let probe = generate_probes(&c, 1, 0, ProbeStrategy::Uniform).unwrap().remove(0);
        let err = export_level_set_grid(&c, &probe, 8, Vec::new()).unwrap_err();
        assert!(matches!(err, ExportError::Core(Error::UnsupportedResolution(8))));
    }
}
