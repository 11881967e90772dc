//! Binary mask readers: raw byte volume + JSON sidecar, ASCII PGM stacks.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VoxelMask;

/// JSON sidecar describing a raw mask volume.
///
/// `size` and `voxel_size` are listed in x, y(, z) order; `axis_order`
/// names the file's axes from slowest to fastest varying.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMaskHeader {
    pub size: Vec<usize>,
    pub voxel_size: Vec<f64>,
    #[serde(default)]
    pub axis_order: Option<String>,
}

impl RawMaskHeader {
    fn validate(&self) -> Result<Vec<usize>> {
        let d = self.size.len();
        if !(d == 2 || d == 3) {
            return Err(sidecar("size", format!("expected 2 or 3 entries, got {d}")));
        }
        if self.size.contains(&0) {
            return Err(sidecar("size", "entries must be positive"));
        }
        if self.voxel_size.len() != d {
            return Err(sidecar(
                "voxel_size",
                format!(
                    "expected {d} entries to match size, got {}",
                    self.voxel_size.len()
                ),
            ));
        }
        if self.voxel_size.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(sidecar("voxel_size", "entries must be positive and finite"));
        }
        let order =
            self.axis_order
                .clone()
                .unwrap_or_else(|| if d == 3 { "zyx".into() } else { "yx".into() });
        let perm: Vec<usize> = order
            .chars()
            .map(|c| match c {
                'x' => Ok(0),
                'y' => Ok(1),
                'z' => Ok(2),
                _ => Err(sidecar(
                    "axis_order",
                    format!("unknown axis `{c}` in `{order}`"),
                )),
            })
            .collect::<Result<_>>()?;
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        if sorted != (0..d).collect::<Vec<_>>() {
            return Err(sidecar(
                "axis_order",
                format!("`{order}` must name each of the {d} axes exactly once"),
            ));
        }
        Ok(perm)
    }
}

fn sidecar(field: &str, detail: impl Into<String>) -> Error {
    Error::Format {
        what: "mask sidecar",
        detail: format!("field `{field}`: {}", detail.into()),
    }
}

/// Decodes raw bytes (one per voxel, nonzero = phase) laid out per `header`.
pub fn decode_raw_mask(bytes: &[u8], header: &RawMaskHeader) -> Result<VoxelMask> {
    let perm = header.validate()?;
    let size = &header.size;
    let n: usize = size.iter().product();
    if bytes.len() != n {
        return Err(Error::format(
            "raw mask",
            format!(
                "{} bytes on disk, sidecar size {size:?} needs {n}",
                bytes.len()
            ),
        ));
    }
    let d = size.len();
    // file strides in terms of x, y, z
    let mut file_stride = [0usize; 3];
    let mut s = 1;
    for &axis in perm.iter().rev() {
        file_stride[axis] = s;
        s *= size[axis];
    }
    let mut bits = Vec::with_capacity(n);
    let sz = [size[0], size[1], if d == 3 { size[2] } else { 1 }];
    for i in 0..sz[0] {
        for j in 0..sz[1] {
            for k in 0..sz[2] {
                let f = i * file_stride[0] + j * file_stride[1] + k * file_stride[2];
                bits.push(bytes[f] != 0);
            }
        }
    }
    VoxelMask::new(size, &header.voxel_size, bits)
}

/// Sidecar path for a raw file: `volume.raw` -> `volume.json`.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

/// Reads `path` and its sidecar (`sidecar` or the `.json` next to it).
pub fn read_raw_mask(path: &Path, sidecar_file: Option<&Path>) -> Result<VoxelMask> {
    let side = sidecar_file
        .map(Path::to_path_buf)
        .unwrap_or_else(|| sidecar_path(path));
    let text = fs::read_to_string(&side)
        .map_err(|e| Error::input(format!("cannot read mask sidecar {}: {e}", side.display())))?;
    let header: RawMaskHeader = serde_json::from_str(&text).map_err(|e| Error::Format {
        what: "mask sidecar",
        detail: e.to_string(),
    })?;
    let bytes = fs::read(path)
        .map_err(|e| Error::input(format!("cannot read mask {}: {e}", path.display())))?;
    decode_raw_mask(&bytes, &header)
}

/// Writes `mask` as raw bytes in `zyx` (or `yx`) order plus its sidecar.
pub fn write_raw_mask(path: &Path, mask: &VoxelMask) -> Result<()> {
    let size = mask.size();
    let d = size.len();
    let sz = [size[0], size[1], if d == 3 { size[2] } else { 1 }];
    let mut bytes = vec![0u8; mask.bits().len()];
    let mut lin = 0;
    for i in 0..sz[0] {
        for j in 0..sz[1] {
            for k in 0..sz[2] {
                let f = (k * sz[1] + j) * sz[0] + i;
                bytes[f] = mask.bits()[lin] as u8;
                lin += 1;
            }
        }
    }
    fs::write(path, bytes)?;
    let header = RawMaskHeader {
        size: size.to_vec(),
        voxel_size: mask.voxel_size().to_vec(),
        axis_order: Some(if d == 3 { "zyx".into() } else { "yx".into() }),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

/// One or more concatenated ASCII `P2` images; each image is a z-slice with
/// width along x and height along y. Values above zero mark the phase.
pub fn parse_pgm_stack(text: &str) -> Result<Vec<(usize, usize, Vec<bool>)>> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .peekable();
    let bad = |d: String| Error::format("PGM", d);
    let mut slices = Vec::new();
    while let Some(magic) = tokens.next() {
        if magic != "P2" {
            return Err(bad(format!("expected `P2`, found `{magic}`")));
        }
        let mut num = |what: &str| -> Result<usize> {
            let t = tokens
                .next()
                .ok_or_else(|| bad(format!("missing {what}")))?;
            t.parse().map_err(|_| bad(format!("invalid {what} `{t}`")))
        };
        let w = num("width")?;
        let h = num("height")?;
        let maxval = num("maxval")?;
        if w == 0 || h == 0 || maxval == 0 {
            return Err(bad("width, height and maxval must be positive".into()));
        }
        let mut bits = vec![false; w * h];
        for row in 0..h {
            for col in 0..w {
                let v = num("pixel")?;
                if v > maxval {
                    return Err(bad(format!("pixel {v} exceeds maxval {maxval}")));
                }
                bits[row * w + col] = v > 0;
            }
        }
        slices.push((w, h, bits));
    }
    if slices.is_empty() {
        return Err(bad("no images".into()));
    }
    Ok(slices)
}

/// PGM input as a mask: one image gives a 2D mask, several a 3D stack.
/// `path` may be a file or a directory of `.pgm` files (sorted by name).
pub fn read_pgm_mask(path: &Path, voxel_size: f64) -> Result<VoxelMask> {
    let mut slices = Vec::new();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
            .collect();
        files.sort();
        for f in files {
            slices.extend(parse_pgm_stack(&fs::read_to_string(&f)?)?);
        }
        if slices.is_empty() {
            return Err(Error::input(format!("no .pgm files in {}", path.display())));
        }
    } else {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
        slices = parse_pgm_stack(&text)?;
    }
    pgm_slices_to_mask(slices, voxel_size)
}

fn pgm_slices_to_mask(
    slices: Vec<(usize, usize, Vec<bool>)>,
    voxel_size: f64,
) -> Result<VoxelMask> {
    let (w, h) = (slices[0].0, slices[0].1);
    if slices.iter().any(|s| s.0 != w || s.1 != h) {
        return Err(Error::format("PGM", "slices differ in size"));
    }
    let nz = slices.len();
    let mut bits = Vec::with_capacity(w * h * nz);
    for x in 0..w {
        for y in 0..h {
            if nz == 1 {
                bits.push(slices[0].2[y * w + x]);
            } else {
                for s in &slices {
                    bits.push(s.2[y * w + x]);
                }
            }
        }
    }
    if nz == 1 {
        VoxelMask::new(&[w, h], &[voxel_size; 2], bits)
    } else {
        VoxelMask::new(&[w, h, nz], &[voxel_size; 3], bits)
    }
}

/// Encodes `mask` as a stack of P2 images (one per z-slice).
pub fn to_pgm_stack(mask: &VoxelMask) -> String {
    let size = mask.size();
    let (w, h) = (size[0], size[1]);
    let nz = if size.len() == 3 { size[2] } else { 1 };
    let mut s = String::new();
    for z in 0..nz {
        s.push_str(&format!("P2\n{w} {h}\n1\n"));
        for y in 0..h {
            let row: Vec<&str> = (0..w)
                .map(|x| {
                    if mask.bits()[(x * h + y) * nz + z] {
                        "1"
                    } else {
                        "0"
                    }
                })
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
    }
    s
}
