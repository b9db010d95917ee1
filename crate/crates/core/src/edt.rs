//! Exact squared Euclidean distance transform on anisotropic grids.
//!
//! Separable lower-envelope-of-parabolas method (Felzenszwalb &
//! Huttenlocher), one pass per axis. Sites with infinite cost are skipped so
//! rows with no site stay infinite until a later axis fills them in.

use crate::error::{Error, Result};
use crate::volume::MaskVolume;

/// 1D transform of `f` in place. `spacing` is the physical step along the line.
fn transform_line(f: &mut [f64], spacing: f64, sites: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    let n = f.len();
    sites.clear();
    bounds.clear();

    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let xq = q as f64 * spacing;
        loop {
            let Some(&p) = sites.last() else {
                sites.push(q);
                bounds.push(f64::NEG_INFINITY);
                break;
            };
            let xp = p as f64 * spacing;
            let s = ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
            if s <= *bounds.last().unwrap() {
                sites.pop();
                bounds.pop();
            } else {
                sites.push(q);
                bounds.push(s);
                break;
            }
        }
    }
    if sites.is_empty() {
        return;
    }

    let values: Vec<f64> = sites.iter().map(|&s| f[s]).collect();
    let mut k = 0;
    for (i, out) in f.iter_mut().enumerate() {
        let x = i as f64 * spacing;
        while k + 1 < sites.len() && bounds[k + 1] < x {
            k += 1;
        }
        let d = (i as f64 - sites[k] as f64) * spacing;
        *out = values[k] + d * d;
    }
}

/// Squared distance (mm²) from every voxel to the nearest site, where
/// `is_site[i]` marks the zero-cost voxels. Returns `None` with no sites.
pub fn edt_sq_sites(dims: [usize; 3], spacing: [f64; 3], is_site: &[bool]) -> Option<Vec<f64>> {
    if !is_site.iter().any(|&s| s) {
        return None;
    }
    let [nx, ny, nz] = dims;
    let mut field: Vec<f64> = is_site
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();

    let mut sites = Vec::new();
    let mut bounds = Vec::new();
    let mut line = Vec::new();

    // x: contiguous rows
    for row in field.chunks_mut(nx) {
        transform_line(row, spacing[0], &mut sites, &mut bounds);
    }
    // y
    for z in 0..nz {
        for x in 0..nx {
            line.clear();
            line.extend((0..ny).map(|y| field[x + nx * (y + ny * z)]));
            transform_line(&mut line, spacing[1], &mut sites, &mut bounds);
            for (y, v) in line.iter().enumerate() {
                field[x + nx * (y + ny * z)] = *v;
            }
        }
    }
    // z
    for y in 0..ny {
        for x in 0..nx {
            line.clear();
            line.extend((0..nz).map(|z| field[x + nx * (y + ny * z)]));
            transform_line(&mut line, spacing[2], &mut sites, &mut bounds);
            for (z, v) in line.iter().enumerate() {
                field[x + nx * (y + ny * z)] = *v;
            }
        }
    }
    Some(field)
}

/// Squared distance from every voxel to the nearest boundary voxel of `vol`.
pub fn edt_sq(vol: &MaskVolume) -> Result<Vec<f64>> {
    let mut is_site = vec![false; vol.len()];
    for i in vol.boundary_indices() {
        is_site[i] = true;
    }
    edt_sq_sites(vol.dims(), vol.spacing(), &is_site).ok_or(Error::EmptyMask("no boundary voxels"))
}
