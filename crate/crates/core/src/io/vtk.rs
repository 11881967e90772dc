//! Legacy ASCII VTK `STRUCTURED_POINTS` output.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::field::DenseField;
use crate::grid::{GridGeometry, NodeIndex, SparseBlockGrid};
use crate::scalar::Real;

/// Name of the integer array marking stored nodes.
pub const MASK_ARRAY: &str = "active";

fn fmt_value<T: Real>(v: T, out: &mut String) {
    let x = v.to_f64_lossy();
    if x.is_nan() {
        out.push_str("nan");
    } else if T::BYTES == 4 {
        let _ = write!(out, "{:.8e}", x as f32);
    } else {
        let _ = write!(out, "{x:.16e}");
    }
}

fn vtk_type<T: Real>() -> &'static str {
    if T::BYTES == 4 {
        "float"
    } else {
        "double"
    }
}

fn header<T: Real>(geo: &GridGeometry<T>, title: &str) -> String {
    let s = geo.size();
    let o = geo.origin();
    let h = geo.spacing();
    let f = |v: T| v.to_f64_lossy();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    format!(
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET STRUCTURED_POINTS\n\
         DIMENSIONS {} {} {}\nORIGIN {:e} {:e} {:e}\nSPACING {:e} {:e} {:e}\nPOINT_DATA {}\n",
        s[0],
        s[1],
        s[2],
        f(o[0]),
        f(o[1]),
        f(o[2]),
        f(h[0]),
        f(h[1]),
        f(h[2]),
        geo.node_count()
    )
}

/// VTK point order: x fastest.
fn vtk_order<T: Real>(geo: &GridGeometry<T>) -> impl Iterator<Item = NodeIndex> {
    let s = geo.size();
    (0..s[2]).flat_map(move |k| {
        (0..s[1]).flat_map(move |j| (0..s[0]).map(move |i| NodeIndex([i, j, k])))
    })
}

fn push_scalars(out: &mut String, name: &str, ty: &str) {
    let _ = writeln!(out, "SCALARS {name} {ty} 1\nLOOKUP_TABLE default");
}

/// Writes the named channels of `grid`; inactive nodes get `blank`.
pub fn write_grid_vtk<T: Real, S: AsRef<str>>(
    out: impl Write,
    grid: &SparseBlockGrid<T>,
    channel_names: &[S],
    blank: T,
    title: &str,
) -> Result<()> {
    let geo = grid.geometry();
    let ids = channel_names
        .iter()
        .map(|n| Ok((n.as_ref(), grid.property(n.as_ref())?)))
        .collect::<Result<Vec<_>>>()?;
    let order: Vec<(NodeIndex, Option<(usize, usize)>)> =
        vtk_order(geo).map(|i| (i, grid.locate_active(i))).collect();
    let v = grid.chunk_volume();
    let mut s = header(geo, title);
    for (name, pid) in ids {
        push_scalars(&mut s, name, vtk_type::<T>());
        let data = grid.channel(pid);
        for (_, loc) in &order {
            let val = loc.map_or(blank, |(slot, off)| data[slot * v + off]);
            fmt_value(val, &mut s);
            s.push('\n');
        }
    }
    push_scalars(&mut s, MASK_ARRAY, "int");
    for (_, loc) in &order {
        s.push_str(if loc.is_some() { "1\n" } else { "0\n" });
    }
    write_all(out, s)
}

/// Writes a dense field as a single scalar array.
pub fn write_field_vtk<T: Real>(
    out: impl Write,
    field: &DenseField<T>,
    name: &str,
    title: &str,
) -> Result<()> {
    let geo = field.geometry();
    let mut s = header(geo, title);
    push_scalars(&mut s, name, vtk_type::<T>());
    for idx in vtk_order(geo) {
        fmt_value(field.get(idx), &mut s);
        s.push('\n');
    }
    write_all(out, s)
}

fn write_all(mut out: impl Write, s: String) -> Result<()> {
    out.write_all(s.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Parsed legacy VTK structured-points file (as written by this module).
#[derive(Debug, Clone, PartialEq)]
pub struct VtkData {
    pub dimensions: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    /// Arrays in file order; values in VTK point order (x fastest).
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl VtkData {
    pub fn array(&self, name: &str) -> Option<&[f64]> {
        self.arrays
            .iter()
            .find(|a| a.0 == name)
            .map(|a| a.1.as_slice())
    }

    /// VTK point index of a node.
    pub fn point(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.dimensions[1] + idx[1]) * self.dimensions[0] + idx[0]
    }
}

pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let bad = |d: &str| Error::format("VTK", d.to_string());
    let mut lines = text.lines();
    if !lines
        .next()
        .is_some_and(|l| l.starts_with("# vtk DataFile"))
    {
        return Err(bad("missing version line"));
    }
    lines.next();
    if lines.next() != Some("ASCII") || lines.next() != Some("DATASET STRUCTURED_POINTS") {
        return Err(bad("not an ASCII structured-points file"));
    }
    let mut triple = |key: &str| -> Result<[f64; 3]> {
        let l = lines.next().ok_or_else(|| bad("truncated header"))?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(bad(&format!("expected {key}")));
        }
        let v: Vec<f64> = it
            .map(|t| t.parse().map_err(|_| bad("bad number")))
            .collect::<Result<_>>()?;
        v.try_into().map_err(|_| bad("expected three values"))
    };
    let dims = triple("DIMENSIONS")?;
    let origin = triple("ORIGIN")?;
    let spacing = triple("SPACING")?;
    let n = lines
        .next()
        .and_then(|l| l.strip_prefix("POINT_DATA "))
        .and_then(|t| t.trim().parse::<usize>().ok())
        .ok_or_else(|| bad("missing POINT_DATA"))?;
    let mut arrays = Vec::new();
    while let Some(l) = lines.next() {
        if l.trim().is_empty() {
            continue;
        }
        let name = l
            .strip_prefix("SCALARS ")
            .and_then(|r| r.split_whitespace().next())
            .ok_or_else(|| bad("expected SCALARS"))?
            .to_string();
        lines.next();
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let t = lines.next().ok_or_else(|| bad("truncated array"))?.trim();
            vals.push(t.parse::<f64>().map_err(|_| bad("bad value"))?);
        }
        arrays.push((name, vals));
    }
    Ok(VtkData {
        dimensions: [dims[0] as usize, dims[1] as usize, dims[2] as usize],
        origin,
        spacing,
        arrays,
    })
}
