//! State file formats (versioned plain text, bit-exact float round trips),
//! CSV emission and deterministic SVG rendering.

use std::fmt::Write as _;
use std::path::Path;

use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::grid::GridPartition;
use crate::lattice::Lattice;
use crate::optimizer::RunTrace;
use crate::poly::{Cell, Edge, PolyPartition, SignedEdge};

pub const PARTITION_MAGIC: &str = "peritile-partition v1";
pub const GRID_MAGIC: &str = "peritile-grid v1";

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("bad float {tok:?}") })
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("bad integer {tok:?}") })
}

fn parse_i64(tok: &str, line: usize) -> Result<i64> {
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("bad integer {tok:?}") })
}

// ---- polygonal partitions ----------------------------------------------------

pub fn partition_to_string(p: &PolyPartition) -> String {
    let (b1, b2) = p.lattice.basis2();
    let mut s = String::new();
    let _ = writeln!(s, "{PARTITION_MAGIC}");
    let _ = writeln!(
        s,
        "lattice {} {} {} {}",
        fmt_f64(b1.x),
        fmt_f64(b1.y),
        fmt_f64(b2.x),
        fmt_f64(b2.y)
    );
    let _ = writeln!(s, "vertices {}", p.vertices.len());
    for v in &p.vertices {
        let _ = writeln!(s, "{} {}", fmt_f64(v.x), fmt_f64(v.y));
    }
    let _ = writeln!(s, "edges {}", p.edges.len());
    for e in &p.edges {
        let _ = write!(
            s,
            "{} {} {} {} {}",
            e.tail,
            e.head,
            e.wrap[0],
            e.wrap[1],
            e.samples.len()
        );
        for q in &e.samples {
            let _ = write!(s, " {} {}", fmt_f64(q.x), fmt_f64(q.y));
        }
        s.push('\n');
    }
    let _ = writeln!(s, "cells {}", p.cells.len());
    for c in &p.cells {
        let _ = write!(s, "{} {}", fmt_f64(c.target_volume), c.loop_edges.len());
        for se in &c.loop_edges {
            let signed = if se.forward { se.edge as i64 + 1 } else { -(se.edge as i64 + 1) };
            let _ = write!(s, " {signed}");
        }
        s.push('\n');
    }
    s
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.iter.by_ref() {
            if !l.trim().is_empty() {
                return Ok((i + 1, l.trim()));
            }
        }
        Err(Error::Parse { line: 0, msg: "unexpected end of file".into() })
    }
}

fn expect_header<'a>(lines: &mut Lines<'a>, key: &str) -> Result<(usize, Vec<&'a str>)> {
    let (ln, l) = lines.next()?;
    let mut toks = l.split_whitespace();
    match toks.next() {
        Some(k) if k == key => Ok((ln, toks.collect())),
        other => Err(Error::Parse { line: ln, msg: format!("expected {key:?}, found {other:?}") }),
    }
}

pub fn partition_from_str(text: &str) -> Result<PolyPartition> {
    let mut lines = Lines { iter: text.lines().enumerate() };
    let (ln, magic) = lines.next()?;
    if magic != PARTITION_MAGIC {
        return Err(Error::Parse { line: ln, msg: format!("bad magic {magic:?}") });
    }
    let (ln, toks) = expect_header(&mut lines, "lattice")?;
    if toks.len() != 4 {
        return Err(Error::Parse { line: ln, msg: "lattice needs 4 floats".into() });
    }
    let b: Vec<f64> = toks.iter().map(|t| parse_f64(t, ln)).collect::<Result<_>>()?;
    let lattice = Lattice::from_cols_2d(Vec2::new(b[0], b[1]), Vec2::new(b[2], b[3]))?;
    let (ln, toks) = expect_header(&mut lines, "vertices")?;
    let nv = parse_usize(toks.first().copied().unwrap_or(""), ln)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next()?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 2 {
            return Err(Error::Parse { line: ln, msg: "vertex needs 2 floats".into() });
        }
        vertices.push(Vec2::new(parse_f64(t[0], ln)?, parse_f64(t[1], ln)?));
    }
    let (ln, toks) = expect_header(&mut lines, "edges")?;
    let ne = parse_usize(toks.first().copied().unwrap_or(""), ln)?;
    let mut edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, l) = lines.next()?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 5 {
            return Err(Error::Parse { line: ln, msg: "edge needs tail head w0 w1 k".into() });
        }
        let k = parse_usize(t[4], ln)?;
        if t.len() != 5 + 2 * k {
            return Err(Error::Parse { line: ln, msg: format!("edge expects {k} sample pairs") });
        }
        let mut samples = Vec::with_capacity(k);
        for j in 0..k {
            samples.push(Vec2::new(
                parse_f64(t[5 + 2 * j], ln)?,
                parse_f64(t[6 + 2 * j], ln)?,
            ));
        }
        edges.push(Edge {
            tail: parse_usize(t[0], ln)?,
            head: parse_usize(t[1], ln)?,
            wrap: [parse_i64(t[2], ln)?, parse_i64(t[3], ln)?],
            samples,
        });
    }
    let (ln, toks) = expect_header(&mut lines, "cells")?;
    let nc = parse_usize(toks.first().copied().unwrap_or(""), ln)?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, l) = lines.next()?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 2 {
            return Err(Error::Parse { line: ln, msg: "cell needs volume and loop".into() });
        }
        let target_volume = parse_f64(t[0], ln)?;
        let m = parse_usize(t[1], ln)?;
        if t.len() != 2 + m {
            return Err(Error::Parse { line: ln, msg: format!("cell expects {m} loop entries") });
        }
        let mut loop_edges = Vec::with_capacity(m);
        for tok in &t[2..] {
            let v = parse_i64(tok, ln)?;
            if v == 0 {
                return Err(Error::Parse { line: ln, msg: "loop entry 0 is invalid".into() });
            }
            loop_edges.push(SignedEdge { edge: (v.unsigned_abs() - 1) as usize, forward: v > 0 });
        }
        cells.push(Cell { loop_edges, target_volume });
    }
    let p = PolyPartition { lattice, vertices, edges, cells };
    p.validate()?;
    Ok(p)
}

pub fn write_partition(path: &Path, p: &PolyPartition) -> Result<()> {
    std::fs::write(path, partition_to_string(p))?;
    Ok(())
}

pub fn read_partition(path: &Path) -> Result<PolyPartition> {
    partition_from_str(&std::fs::read_to_string(path)?)
}

// ---- grids -------------------------------------------------------------------

pub fn grid_to_string(g: &GridPartition) -> String {
    let (b1, b2) = g.lattice.basis2();
    let mut s = String::new();
    let _ = writeln!(s, "{GRID_MAGIC}");
    let _ = writeln!(
        s,
        "lattice {} {} {} {}",
        fmt_f64(b1.x),
        fmt_f64(b1.y),
        fmt_f64(b2.x),
        fmt_f64(b2.y)
    );
    let _ = writeln!(s, "resolution {}", g.resolution);
    let _ = writeln!(s, "labels {}", g.num_labels);
    for row in 0..g.resolution {
        let line: Vec<String> = (0..g.resolution)
            .map(|col| g.labels[g.index(row, col)].to_string())
            .collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn grid_from_str(text: &str) -> Result<GridPartition> {
    let mut lines = Lines { iter: text.lines().enumerate() };
    let (ln, magic) = lines.next()?;
    if magic != GRID_MAGIC {
        return Err(Error::Parse { line: ln, msg: format!("bad magic {magic:?}") });
    }
    let (ln, toks) = expect_header(&mut lines, "lattice")?;
    if toks.len() != 4 {
        return Err(Error::Parse { line: ln, msg: "lattice needs 4 floats".into() });
    }
    let b: Vec<f64> = toks.iter().map(|t| parse_f64(t, ln)).collect::<Result<_>>()?;
    let lattice = Lattice::from_cols_2d(Vec2::new(b[0], b[1]), Vec2::new(b[2], b[3]))?;
    let (ln, toks) = expect_header(&mut lines, "resolution")?;
    let n = parse_usize(toks.first().copied().unwrap_or(""), ln)?;
    let (ln, toks) = expect_header(&mut lines, "labels")?;
    let num_labels = parse_usize(toks.first().copied().unwrap_or(""), ln)?;
    let mut labels = Vec::with_capacity(n * n);
    for _ in 0..n {
        let (ln, l) = lines.next()?;
        let row: Vec<u32> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse { line: ln, msg: format!("bad label {t:?}") }))
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(Error::Parse { line: ln, msg: format!("expected {n} labels per row") });
        }
        labels.extend(row);
    }
    GridPartition::new(lattice, n, labels, num_labels)
}

pub fn write_grid(path: &Path, g: &GridPartition) -> Result<()> {
    std::fs::write(path, grid_to_string(g))?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<GridPartition> {
    grid_from_str(&std::fs::read_to_string(path)?)
}

// ---- CSV ---------------------------------------------------------------------

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// One row per cell plus a totals row.
pub fn breakdown_csv(e: &EnergyBreakdown) -> String {
    let mut rows: Vec<Vec<String>> = e
        .per_cell
        .iter()
        .enumerate()
        .map(|(i, &(area, per, pen))| {
            vec![i.to_string(), fmt_f64(area), fmt_f64(per), fmt_f64(pen)]
        })
        .collect();
    rows.push(vec![
        "total".into(),
        fmt_f64(e.mu_term),
        fmt_f64(e.half_sum_perimeters),
        fmt_f64(e.penalty_term),
    ]);
    rows.push(vec![
        "energy".into(),
        fmt_f64(e.total),
        fmt_f64(e.constraint_residual),
        String::new(),
    ]);
    csv(&["cell", "area", "perimeter", "penalty"], &rows)
}

pub fn trace_csv(t: &RunTrace) -> String {
    let rows: Vec<Vec<String>> = t
        .entries
        .iter()
        .map(|e| {
            vec![
                e.iter.to_string(),
                fmt_f64(e.energy),
                fmt_f64(e.volume_residual),
                fmt_f64(e.grad_norm),
                e.event.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv(&["iter", "energy", "volume_residual", "grad_norm", "event"], &rows)
}

// ---- SVG ---------------------------------------------------------------------

fn color(i: usize, n: usize) -> String {
    let hue = 360 * i / n.max(1);
    format!("hsl({hue},60%,72%)")
}

fn svg_open(b1: Vec2, b2: Vec2) -> (String, f64) {
    // Bounding box of the 3x3 tile block.
    let corners: Vec<Vec2> = (-1..=2)
        .flat_map(|i| (-1..=2).map(move |j| b1 * i as f64 + b2 * j as f64))
        .collect();
    let minx = corners.iter().map(|c| c.x).fold(f64::INFINITY, f64::min);
    let maxx = corners.iter().map(|c| c.x).fold(f64::NEG_INFINITY, f64::max);
    let miny = corners.iter().map(|c| c.y).fold(f64::INFINITY, f64::min);
    let maxy = corners.iter().map(|c| c.y).fold(f64::NEG_INFINITY, f64::max);
    let scale = 600.0 / (maxx - minx).max(maxy - miny);
    let head = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.4} {:.4} {:.4} {:.4}\">\n",
        minx * scale,
        miny * scale,
        (maxx - minx) * scale,
        (maxy - miny) * scale
    );
    (head, scale)
}

/// Deterministic 3x3 periodic tiling rendering.
pub fn partition_svg(p: &PolyPartition, junction_markers: bool) -> Result<String> {
    let (b1, b2) = p.lattice.basis2();
    let (mut s, scale) = svg_open(b1, b2);
    let n = p.cell_count();
    for i in -1..=1i64 {
        for j in -1..=1i64 {
            let off = b1 * i as f64 + b2 * j as f64;
            for ci in 0..n {
                let poly = p.cell_polygon(ci)?;
                let pts: Vec<String> = poly
                    .iter()
                    .map(|q| format!("{:.4},{:.4}", (q.x + off.x) * scale, (q.y + off.y) * scale))
                    .collect();
                let _ = writeln!(
                    s,
                    "<polygon points=\"{}\" fill=\"{}\" stroke=\"black\" stroke-width=\"1\"/>",
                    pts.join(" "),
                    color(ci, n)
                );
            }
        }
    }
    if junction_markers {
        for jn in p.junction_list() {
            let c = p.frac_to_cart(p.vertices[jn.vertex]);
            for i in -1..=1i64 {
                for j in -1..=1i64 {
                    let off = b1 * i as f64 + b2 * j as f64;
                    let _ = writeln!(
                        s,
                        "<circle cx=\"{:.4}\" cy=\"{:.4}\" r=\"3\" fill=\"red\"/>",
                        (c.x + off.x) * scale,
                        (c.y + off.y) * scale
                    );
                }
            }
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Pixel raster rendering of a grid state, 3x3 tiled.
pub fn grid_svg(g: &GridPartition) -> String {
    let (b1, b2) = g.lattice.basis2();
    let (mut s, scale) = svg_open(b1, b2);
    let n = g.resolution;
    for i in -1..=1i64 {
        for j in -1..=1i64 {
            let off = b1 * i as f64 + b2 * j as f64;
            for row in 0..n {
                for col in 0..n {
                    let f0 = Vec2::new(col as f64 / n as f64, row as f64 / n as f64);
                    let f1 = Vec2::new((col + 1) as f64 / n as f64, (row + 1) as f64 / n as f64);
                    let corners = [
                        Vec2::new(f0.x, f0.y),
                        Vec2::new(f1.x, f0.y),
                        Vec2::new(f1.x, f1.y),
                        Vec2::new(f0.x, f1.y),
                    ];
                    let pts: Vec<String> = corners
                        .iter()
                        .map(|&f| {
                            let c = g.lattice.to_cartesian(f) + off;
                            format!("{:.4},{:.4}", c.x * scale, c.y * scale)
                        })
                        .collect();
                    let lab = g.labels[g.index(row, col)] as usize;
                    let _ = writeln!(
                        s,
                        "<polygon points=\"{}\" fill=\"{}\"/>",
                        pts.join(" "),
                        color(lab - 1, g.num_labels)
                    );
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{honeycomb, stretched_hex_domain};
    use crate::energy::{evaluate_poly, EnergyModel, PerimeterKind};

    #[test]
    fn partition_round_trip_is_bit_exact() {
        for p in [honeycomb(4).unwrap(), stretched_hex_domain(&[1.17, 0.83]).unwrap()] {
            let text = partition_to_string(&p);
            let q = partition_from_str(&text).unwrap();
            assert_eq!(p, q);
            let model =
                EnergyModel::constrained(PerimeterKind::Classical, 0.0, p.target_volumes())
                    .unwrap();
            let e1 = evaluate_poly(&p, &model).unwrap();
            let e2 = evaluate_poly(&q, &model).unwrap();
            assert_eq!(e1.total.to_bits(), e2.total.to_bits());
            // Writing again reproduces the identical file.
            assert_eq!(text, partition_to_string(&q));
        }
    }

    #[test]
    fn grid_round_trip_is_bit_exact() {
        let n = 6;
        let labels: Vec<u32> = (0..n * n).map(|i| 1 + (i % 3) as u32).collect();
        let g = GridPartition::new(
            Lattice::from_cols_2d(Vec2::new(1.3, 0.21), Vec2::new(-0.4, 0.95)).unwrap(),
            n,
            labels,
            3,
        )
        .unwrap();
        let text = grid_to_string(&g);
        let h = grid_from_str(&text).unwrap();
        assert_eq!(g, h);
        assert_eq!(text, grid_to_string(&h));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = partition_from_str("nonsense").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
        let p = honeycomb(1).unwrap();
        let text = partition_to_string(&p);
        let broken = text.replacen("vertices", "vortices", 1);
        match partition_from_str(&broken).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn float_formatting_has_17_significant_digits() {
        for x in [1.0, std::f64::consts::PI, 2.0 * 12f64.powf(0.25), 1e-7, -3.25e17] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(x.to_bits(), back.to_bits(), "{s}");
            let digits = s
                .trim_start_matches('-')
                .split('e')
                .next()
                .unwrap()
                .chars()
                .filter(|c| c.is_ascii_digit())
                .count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn svg_is_deterministic() {
        let p = honeycomb(2).unwrap();
        let a = partition_svg(&p, true).unwrap();
        let b = partition_svg(&p, true).unwrap();
        assert_eq!(a, b);
        // 9 tiles x 2 cells plus junction markers.
        assert_eq!(a.matches("<polygon").count(), 18);
        assert!(a.matches("<circle").count() > 0);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
    }

    #[test]
    fn csv_emits_cells_and_totals() {
        let p = honeycomb(2).unwrap();
        let model =
            EnergyModel::constrained(PerimeterKind::Classical, 0.0, vec![1.0, 1.0]).unwrap();
        let e = evaluate_poly(&p, &model).unwrap();
        let text = breakdown_csv(&e);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "cell,area,perimeter,penalty");
        assert_eq!(lines.len(), 1 + 2 + 2);
        assert!(lines[1].starts_with("0,"));
    }
}
