use std::io::Write;

use super::convergence_rate;
use crate::adaptivity::AdaptTrace;
use crate::error::Result;
use crate::estimator::LocalIndicators;
use crate::geometry::PolyMesh;
use crate::solver::{Discretization, SystemState};

pub const TRACE_CSV_HEADER: &str = "level,dofs,err,theta,eff,rate_err,rate_theta,marked,picard_iters";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.10e}"))
}

pub fn write_trace_csv<W: Write>(trace: &AdaptTrace, mut w: W) -> Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    let dofs: Vec<usize> = trace.levels.iter().map(|l| l.dofs).collect();
    let thetas: Vec<f64> = trace.levels.iter().map(|l| l.theta()).collect();
    let rt = convergence_rate(&dofs, &thetas).ok();
    let errs: Option<Vec<f64>> = trace.levels.iter().map(|l| l.err).collect();
    let re = errs.and_then(|e| convergence_rate(&dofs, &e).ok());
    for (i, l) in trace.levels.iter().enumerate() {
        let pick = |r: &Option<Vec<f64>>| if i == 0 { None } else { r.as_ref().map(|v| v[i - 1]) };
        writeln!(
            w,
            "{},{},{},{:.10e},{},{},{},{},{}",
            l.level,
            l.dofs,
            opt(l.err),
            l.theta(),
            opt(l.eff()),
            opt(pick(&re)),
            opt(pick(&rt)),
            l.marked.len(),
            l.picard.iterations
        )?;
    }
    Ok(())
}

/// Legacy VTK polydata: vertex values of `u` (nodal DoFs) and of `p`,
/// `phi`, `zeta` averaged from the adjacent cell polynomials, plus cell
/// means and `Theta_E^2`.
pub fn write_vtk<W: Write>(
    disc: &Discretization,
    state: &SystemState,
    locals: &[LocalIndicators],
    mut w: W,
) -> Result<()> {
    let mesh = &disc.mesh;
    let nv = mesh.num_vertices();
    let nc = mesh.num_cells();
    writeln!(w, "# vtk DataFile Version 3.0\nvem-sad solution\nASCII\nDATASET POLYDATA")?;
    writeln!(w, "POINTS {nv} double")?;
    for p in mesh.vertices() {
        writeln!(w, "{:.12e} {:.12e} 0", p.x, p.y)?;
    }
    let size: usize = mesh.cells().iter().map(|c| c.len() + 1).sum();
    writeln!(w, "POLYGONS {nc} {size}")?;
    for c in mesh.cells() {
        let ids: Vec<String> = c.vertices.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{} {}", c.len(), ids.join(" "))?;
    }
    let mut pv = vec![0.0; nv];
    let mut phiv = vec![0.0; nv];
    let mut zv = vec![[0.0; 2]; nv];
    let mut count = vec![0usize; nv];
    let mut p_mean = vec![0.0; nc];
    let mut phi_mean = vec![0.0; nc];
    for c in 0..nc {
        let cd = &disc.cells[c];
        let p = state.p_coeffs(disc, c);
        let phi = state.phi_coeffs(disc, c);
        let z = state.flux_coeffs(disc, c);
        let nk2 = cd.diffusion.basis.len();
        let eb = &cd.elasticity.basis;
        let db = &cd.diffusion.basis;
        for &v in &mesh.cell(c).vertices {
            let x = mesh.vertex(v);
            pv[v] += eb.value(p.as_slice(), x);
            phiv[v] += db.value(phi.as_slice(), x);
            zv[v][0] += db.value(&z.as_slice()[..nk2], x);
            zv[v][1] += db.value(&z.as_slice()[nk2..], x);
            count[v] += 1;
        }
        let area = cd.frame.area;
        p_mean[c] = cd.rule.iter().map(|(x, wt)| wt * eb.value(p.as_slice(), x)).sum::<f64>() / area;
        phi_mean[c] = cd.rule.iter().map(|(x, wt)| wt * db.value(phi.as_slice(), x)).sum::<f64>() / area;
    }
    writeln!(w, "POINT_DATA {nv}")?;
    writeln!(w, "VECTORS u double")?;
    for v in 0..nv {
        writeln!(w, "{:.12e} {:.12e} 0", state.u[2 * v], state.u[2 * v + 1])?;
    }
    let avg = |a: f64, v: usize| a / count[v].max(1) as f64;
    writeln!(w, "VECTORS zeta double")?;
    for v in 0..nv {
        writeln!(w, "{:.12e} {:.12e} 0", avg(zv[v][0], v), avg(zv[v][1], v))?;
    }
    for (name, vals) in [("p", &pv), ("phi", &phiv)] {
        writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
        for v in 0..nv {
            writeln!(w, "{:.12e}", avg(vals[v], v))?;
        }
    }
    writeln!(w, "CELL_DATA {nc}")?;
    let theta: Vec<f64> = (0..nc).map(|c| locals.get(c).map_or(0.0, |l| l.theta_sq)).collect();
    for (name, vals) in [("p_mean", &p_mean), ("phi_mean", &phi_mean), ("theta_sq", &theta)] {
        writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
        for v in vals.iter() {
            writeln!(w, "{v:.12e}")?;
        }
    }
    Ok(())
}

fn color(t: f64) -> String {
    // blue -> red through white
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (s, s, 1.0)
    } else {
        let s = (1.0 - t) / 0.5;
        (1.0, s, s)
    };
    format!("#{:02x}{:02x}{:02x}", (r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8)
}

/// Mesh outline with cells filled by `Theta_E`, scaled linearly between the
/// smallest and largest value.
pub fn write_svg_mesh<W: Write>(mesh: &PolyMesh, locals: &[LocalIndicators], mut w: W) -> Result<()> {
    let vs = mesh.vertices();
    let (mut lo, mut hi) = (vs[0], vs[0]);
    for p in vs {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    let size = 800.0;
    let scale = size / (hi.x - lo.x).max(hi.y - lo.y);
    let theta: Vec<f64> = (0..mesh.num_cells()).map(|c| locals.get(c).map_or(0.0, |l| l.theta_sq.sqrt())).collect();
    let tmin = theta.iter().copied().fold(f64::INFINITY, f64::min);
    let tmax = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if tmax > tmin { tmax - tmin } else { 1.0 };
    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0}\" height=\"{1:.0}\" viewBox=\"0 0 {0:.3} {1:.3}\">",
        (hi.x - lo.x) * scale,
        (hi.y - lo.y) * scale
    )?;
    writeln!(w, "<!-- theta_min={tmin:.6e} theta_max={tmax:.6e} -->")?;
    for (c, cell) in mesh.cells().iter().enumerate() {
        let pts: Vec<String> = cell
            .vertices
            .iter()
            .map(|&v| {
                let p = mesh.vertex(v);
                format!("{:.3},{:.3}", (p.x - lo.x) * scale, (hi.y - p.y) * scale)
            })
            .collect();
        writeln!(
            w,
            "<polygon points=\"{}\" fill=\"{}\" stroke=\"black\" stroke-width=\"0.5\"/>",
            pts.join(" "),
            color((theta[c] - tmin) / span)
        )?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}
