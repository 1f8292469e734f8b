//! Artifact writers: convergence logs, energy summaries, plot-ready density
//! matrices.

use crate::fieldfile;
use spings::physics::{
    check_existence_conditions, virial_from_breakdown, Check, EnergyBreakdown,
};
use spings::solver::{ConvergenceRecord, Termination};
use spings::{PhysicsParams, SpinorField};
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: &str =
    "iter,energy,energy_diff,residual_inf,wavefn_diff_inf,theta,beta,backtracks,elapsed_seconds";

pub fn write_convergence_csv(path: &Path, record: &ConvergenceRecord) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{CSV_HEADER}")?;
    for r in &record.rows {
        writeln!(
            f,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.6}",
            r.iter,
            r.energy,
            r.energy_diff,
            r.residual_inf,
            r.wavefn_diff_inf,
            r.theta,
            r.beta,
            r.backtracks,
            r.elapsed_seconds
        )?;
    }
    f.flush()
}

pub fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIters => "max-iterations",
        Termination::Stalled => "stalled",
    }
}

/// Pointwise densities `|phi_l|^2` of the three components.
pub fn densities(field: &SpinorField) -> [Vec<f64>; 3] {
    let mk = |l: usize| field.component(l).iter().map(|z| z.norm_sqr()).collect();
    [mk(0), mk(1), mk(2)]
}

/// Total discrete mass `h^d sum (rho_1 + rho_0 + rho_-1)`.
pub fn total_mass(field: &SpinorField) -> f64 {
    let d = densities(field);
    let mut acc = 0.0;
    for c in &d {
        acc += c.iter().sum::<f64>();
    }
    acc * field.grid().cell_volume()
}

/// Component densities as plain-text matrices, one row per grid line along
/// the first axis (2-d only).
pub fn write_density_text(dir: &Path, field: &SpinorField) -> std::io::Result<()> {
    let nx = field.grid().points()[0];
    let names = ["density_p1.txt", "density_0.txt", "density_m1.txt"];
    for (l, name) in names.iter().enumerate() {
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
        for row in field.component(l).chunks(nx) {
            let mut first = true;
            for z in row {
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{:.16e}", z.norm_sqr())?;
                first = false;
            }
            writeln!(f)?;
        }
        f.flush()?;
    }
    Ok(())
}

/// 3-d density volume in the binary field format (densities stored as the
/// real parts) plus the isosurface thresholds used for rendering.
pub fn write_density_volume(dir: &Path, field: &SpinorField) -> anyhow::Result<()> {
    let d = densities(field);
    let comps = [
        d[0].iter().map(|&x| spings::C64::new(x, 0.0)).collect(),
        d[1].iter().map(|&x| spings::C64::new(x, 0.0)).collect(),
        d[2].iter().map(|&x| spings::C64::new(x, 0.0)).collect(),
    ];
    let vol = SpinorField::from_components(field.grid().clone(), comps)?;
    fieldfile::write_field(&dir.join("density.spgs"), &vol)?;
    let mut f = std::fs::File::create(dir.join("isosurface_thresholds.txt"))?;
    writeln!(f, "1e-4")?;
    writeln!(f, "2e-5")?;
    Ok(())
}

fn check_text(c: &Check) -> String {
    match c {
        Check::Pass => "pass".into(),
        Check::Warn(m) => format!("warn: {m}"),
        Check::Indeterminate(m) => format!("indeterminate: {m}"),
    }
}

pub struct Summary<'a> {
    pub method: &'a str,
    pub breakdown: &'a EnergyBreakdown,
    pub field: &'a SpinorField,
    pub params: &'a PhysicsParams,
    pub termination: Termination,
    pub iterations: usize,
    pub residual_inf: f64,
}

pub fn render_summary(s: &Summary) -> String {
    let b = s.breakdown;
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    line("method", s.method.to_string());
    line("termination", termination_name(s.termination).to_string());
    line("iterations", s.iterations.to_string());
    line("energy_total", format!("{:.16e}", b.total));
    line("energy_kinetic", format!("{:.16e}", b.kin));
    line("energy_potential", format!("{:.16e}", b.pot));
    line("energy_spin", format!("{:.16e}", b.spin));
    line("energy_rotation", format!("{:.16e}", b.rot));
    line("energy_soc", format!("{:.16e}", b.soc));
    line("chemical_potential", format!("{:.16e}", b.mu));
    line("residual_inf", format!("{:.3e}", s.residual_inf));
    let dim = s.field.grid().dim();
    if s.params.trap.harmonic_freqs(dim).is_some() {
        line(
            "virial_residual",
            format!("{:.3e}", virial_from_breakdown(b, dim)),
        );
    }
    if s.params.trap.is_radially_symmetric() {
        line("soc_energy_nonpositive", format!("{}", b.soc <= 1e-10));
    }
    line("norm_error", format!("{:.3e}", (s.field.norm() - 1.0).abs()));
    line("density_mass", format!("{:.16}", total_mass(s.field)));
    let report = check_existence_conditions(s.params);
    line("existence_rotation", check_text(&report.rotation));
    line("existence_interaction", check_text(&report.interaction));
    out
}
