//! Geometry sources to signed distance fields and sparse grids.

use std::fs;
use std::path::Path;

use poresim::geometry::synthetic::SyntheticGeometry;
use poresim::geometry::{
    build_sparse_grid, filter_thin_features, mask_geometry, mask_to_indicator, phase_phi_min,
    populate_diffusion_channel, VoxelMask,
};
use poresim::grid::channels;
use poresim::grid::snapshot::{decode_grid, peek_precision};
use poresim::io::mask::{read_pgm_mask, read_raw_mask};
use poresim::levelset::{redistance_indicator, sussman_redistance, RedistanceDiagnostics};
use poresim::solver::apply_initial_condition;
use poresim::{DenseField, Error, GridGeometry, Precision, Real, Result, SparseBlockGrid};

use crate::config::{InputSpec, PipelineConfig};

/// Precision a run will use: the file's for grid snapshots, the config's otherwise.
pub fn effective_precision(cfg: &PipelineConfig) -> Result<Precision> {
    match &cfg.input {
        Some(InputSpec::Grid { path }) => {
            let head = read_head(path)?;
            let p = peek_precision(&head)?;
            if p != cfg.precision {
                log::info!(
                    "using {p:?} from the grid snapshot instead of the configured {:?}",
                    cfg.precision
                );
            }
            Ok(p)
        }
        _ => Ok(cfg.precision),
    }
}

fn read_head(path: &Path) -> Result<Vec<u8>> {
    use std::io::Read;
    let mut buf = Vec::with_capacity(16);
    fs::File::open(path)?.take(16).read_to_end(&mut buf)?;
    Ok(buf)
}

/// Voxel mask of a mask-type input, or `None` for SDF, grid and analytic inputs.
pub fn load_mask(input: &InputSpec) -> Result<Option<VoxelMask>> {
    Ok(match input {
        InputSpec::Raw { path, sidecar } => Some(read_raw_mask(path, sidecar.as_deref())?),
        InputSpec::Pgm { path, voxel_size } => Some(read_pgm_mask(path, *voxel_size)?),
        InputSpec::Synthetic {
            geometry,
            size,
            voxel_size,
            voxelize: true,
        } => Some(geometry.mask(size, &voxel_sizes(size, voxel_size))?),
        _ => None,
    })
}

fn voxel_sizes(size: &[usize], voxel_size: &Option<Vec<f64>>) -> Vec<f64> {
    voxel_size.clone().unwrap_or_else(|| vec![1.0; size.len()])
}

/// Reads a `DFLD` snapshot of either precision as `T`.
pub fn load_sdf<T: Real>(path: &Path) -> Result<DenseField<T>> {
    let data = fs::read(path)?;
    match peek_precision(&data)? {
        Precision::F32 => cast_field(&DenseField::<f32>::decode(&data)?),
        Precision::F64 => cast_field(&DenseField::<f64>::decode(&data)?),
    }
}

fn cast_field<S: Real, T: Real>(f: &DenseField<S>) -> Result<DenseField<T>> {
    let g = f.geometry();
    let cast = |v: &[S]| -> Vec<T> { v.iter().map(|x| T::lit(x.to_f64_lossy())).collect() };
    let geo = GridGeometry::new(
        &g.size()[..g.dims()],
        &cast(&g.spacing()),
        &cast(&g.origin()),
    )?;
    DenseField::from_vec(geo, cast(f.data()))
}

/// Indicator, thin-feature filter and redistancing of a mask.
pub fn sdf_from_mask<T: Real>(
    mask: &VoxelMask,
    cfg: &PipelineConfig,
) -> Result<(DenseField<T>, RedistanceDiagnostics)> {
    let indicator = mask_to_indicator::<T>(mask)?;
    let indicator = if cfg.min_thickness_cells > 1 {
        filter_thin_features(&indicator, cfg.min_thickness_cells)
    } else {
        indicator
    };
    let (sdf, diag) = redistance_indicator(&indicator, &cfg.levelset)?;
    if !diag.converged {
        log::warn!(
            "redistancing stopped after {} iterations with residual {:.3e} h",
            diag.iterations,
            diag.final_residual
        );
    }
    Ok((sdf, diag))
}

/// SDF of the configured input. Redistancing diagnostics are returned when
/// a mask was redistanced, or when `assume_sdf` re-runs an existing SDF.
pub fn build_sdf<T: Real>(
    cfg: &PipelineConfig,
    assume_sdf: bool,
) -> Result<(DenseField<T>, Option<RedistanceDiagnostics>)> {
    let input = cfg.require_input()?;
    if let Some(mask) = load_mask(input)? {
        if assume_sdf {
            return Err(Error::Input(
                "--assume-sdf needs an SDF input (.dfld or analytic synthetic)".into(),
            ));
        }
        let (sdf, diag) = sdf_from_mask(&mask, cfg)?;
        return Ok((sdf, Some(diag)));
    }
    let sdf = match input {
        InputSpec::Sdf { path } => load_sdf(path)?,
        InputSpec::Synthetic {
            geometry,
            size,
            voxel_size,
            ..
        } => analytic_sdf(geometry, size, &voxel_sizes(size, voxel_size))?,
        InputSpec::Grid { .. } => {
            return Err(Error::Input(
                "field `input`: a grid snapshot has no dense SDF".into(),
            ))
        }
        InputSpec::Raw { .. } | InputSpec::Pgm { .. } => unreachable!("masks handled above"),
    };
    if assume_sdf {
        let (sdf, diag) = sussman_redistance(&sdf, &cfg.levelset)?;
        return Ok((sdf, Some(diag)));
    }
    Ok((sdf, None))
}

/// Analytic SDF sampled at voxel centres.
pub fn analytic_sdf<T: Real>(
    geometry: &SyntheticGeometry,
    size: &[usize],
    voxel_size: &[f64],
) -> Result<DenseField<T>> {
    geometry.sdf_field(&mask_geometry::<T>(size, voxel_size)?)
}

/// Sparse grid with `phi`, `D` and initial `u` filled in.
pub fn build_grid<T: Real>(cfg: &PipelineConfig) -> Result<SparseBlockGrid<T>> {
    let mut grid = match cfg.require_input()? {
        InputSpec::Grid { path } => {
            let grid: SparseBlockGrid<T> = decode_grid(&fs::read(path)?)?;
            for name in channels::STANDARD {
                grid.property(name).map_err(|_| {
                    Error::Input(format!("grid snapshot lacks the `{name}` channel"))
                })?;
            }
            grid
        }
        _ => {
            let (sdf, _) = build_sdf::<T>(cfg, false)?;
            build_sparse_grid(&sdf, cfg.phase_band, &channels::STANDARD)?
        }
    };
    let h = grid.geometry().h().to_f64_lossy();
    let phi_min = phase_phi_min(&grid)?.to_f64_lossy();
    populate_diffusion_channel(&mut grid, &cfg.diffusion.profile(h, phi_min)?)?;
    if let Some(ic) = &cfg.initial_condition {
        apply_initial_condition(&mut grid, ic)?;
    } else if !matches!(cfg.input, Some(InputSpec::Grid { .. })) {
        log::debug!("no initial condition given; u starts at zero");
    }
    Ok(grid)
}
