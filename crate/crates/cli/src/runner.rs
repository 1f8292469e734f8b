//! Subcommand implementations. Each returns the process exit code:
//! 0 on success, 2 for configuration or input errors, 3 when a solve did not
//! converge (artifacts are still written).

use crate::config::{GuessPlan, Method, RunConfig};
use crate::fieldfile;
use crate::output::{self, Summary};
use spings::field::SpinorField;
use spings::grid::GridSpec;
use spings::guess::{all_triples, identical_triples, make_spinor_guess, sweep_guesses, SweepMethod};
use spings::multigrid::{cm_pcg_solve, MultigridPlan};
use spings::pgf::pgf_solve;
use spings::physics::{self, phase_align, virial_from_breakdown, EnergyBreakdown};
use spings::solver::{pcg_solve, ConvergenceRecord, Termination};
use spings::spectral::restrict_sample;
use std::io::Write;
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

fn residual_inf(field: &SpinorField, cfg: &RunConfig) -> anyhow::Result<f64> {
    Ok(physics::residual(field, &cfg.params)?.sup_norm())
}

fn emit_state(
    dir: &Path,
    cfg: &RunConfig,
    method: &str,
    field: &SpinorField,
    breakdown: &EnergyBreakdown,
    records: &[ConvergenceRecord],
    termination: Termination,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    if cfg.emit.field {
        fieldfile::write_field(&dir.join("field.spgs"), field)?;
    }
    if cfg.emit.csv {
        if records.len() > 1 {
            for (k, r) in records.iter().enumerate() {
                output::write_convergence_csv(&dir.join(format!("convergence_level{k}.csv")), r)?;
            }
        }
        if let Some(last) = records.last() {
            output::write_convergence_csv(&dir.join("convergence.csv"), last)?;
        }
    }
    if cfg.emit.summary {
        let iterations = records.iter().map(|r| r.iterations()).sum();
        let summary = output::render_summary(&Summary {
            method,
            breakdown,
            field,
            params: &cfg.params,
            termination,
            iterations,
            residual_inf: residual_inf(field, cfg)?,
        });
        std::fs::write(dir.join("summary.txt"), &summary)?;
        print!("{summary}");
    }
    if cfg.emit.density {
        if field.grid().dim() == 2 {
            output::write_density_text(dir, field)?;
        } else {
            output::write_density_volume(dir, field)?;
        }
    }
    Ok(())
}

fn solve_triple(
    cfg: &RunConfig,
    tags: [spings::guess::GuessKind; 3],
) -> anyhow::Result<(SpinorField, EnergyBreakdown, Vec<ConvergenceRecord>)> {
    match cfg.method {
        Method::Pcg => {
            let phi0 = make_spinor_guess(tags, &cfg.grid, &cfg.params)?;
            let out = pcg_solve(&phi0, &cfg.params, &cfg.solver)?;
            Ok((out.field, out.breakdown, vec![out.record]))
        }
        Method::CmPcg => {
            let coarse = cfg.coarsest_grid().expect("validated at load");
            let plan = MultigridPlan::between(&coarse, &cfg.grid, &cfg.solver)?;
            let phi0 = make_spinor_guess(tags, &coarse, &cfg.params)?;
            let out = cm_pcg_solve(&phi0, &cfg.params, &plan)?;
            Ok((out.field, out.breakdown, out.records))
        }
        Method::Pgf => {
            let phi0 = make_spinor_guess(tags, &cfg.grid, &cfg.params)?;
            let out = pgf_solve(&phi0, &cfg.params, cfg.dt.expect("validated at load"), &cfg.solver)?;
            Ok((out.field, out.breakdown, vec![out.record]))
        }
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Pcg => "pcg",
        Method::CmPcg => "cm_pcg",
        Method::Pgf => "pgf",
    }
}

pub fn run_solve(cfg: &RunConfig, output_dir: Option<&Path>) -> anyhow::Result<i32> {
    let GuessPlan::Triple(tags) = &cfg.guesses else {
        eprintln!("solve needs [guesses] tags = <t1> <t2> <t3>; use the sweep subcommand for sweeps");
        return Ok(EXIT_CONFIG);
    };
    let dir = output_dir.unwrap_or(&cfg.output_dir).to_path_buf();
    let (field, breakdown, records) = solve_triple(cfg, *tags)?;
    let termination = records
        .iter()
        .map(|r| r.termination)
        .find(|t| *t != Termination::Converged)
        .unwrap_or(Termination::Converged);
    emit_state(
        &dir,
        cfg,
        method_name(cfg.method),
        &field,
        &breakdown,
        &records,
        termination,
    )?;
    Ok(if termination == Termination::Converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn run_sweep(cfg: &RunConfig, output_dir: Option<&Path>) -> anyhow::Result<i32> {
    let (triples, tags_desc) = match &cfg.guesses {
        GuessPlan::SweepIdentical(set) => (identical_triples(set), "identical"),
        GuessPlan::SweepAll(set) => (all_triples(set), "all"),
        GuessPlan::Triple(t) => (vec![*t], "single"),
    };
    let dir = output_dir.unwrap_or(&cfg.output_dir).to_path_buf();
    std::fs::create_dir_all(&dir)?;
    let (method, guess_grid) = match cfg.method {
        Method::CmPcg => {
            let coarse = cfg.coarsest_grid().expect("validated at load");
            let plan = MultigridPlan::between(&coarse, &cfg.grid, &cfg.solver)?;
            (SweepMethod::Cascade(plan), coarse)
        }
        Method::Pcg => (SweepMethod::Fixed(cfg.solver.clone()), cfg.grid.clone()),
        Method::Pgf => {
            eprintln!("sweep supports pcg and cm_pcg methods");
            return Ok(EXIT_CONFIG);
        }
    };
    let sweep = sweep_guesses(&triples, &guess_grid, &cfg.params, &method)?;

    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("sweep_table.csv"))?);
    writeln!(f, "guess_p1,guess_0,guess_m1,energy,iterations,converged,error")?;
    for e in &sweep.table {
        writeln!(
            f,
            "{},{},{},{:.16e},{},{},{}",
            e.tags[0],
            e.tags[1],
            e.tags[2],
            e.energy,
            e.iterations,
            e.converged,
            e.error.as_deref().unwrap_or("")
        )?;
    }
    f.flush()?;
    drop(f);

    let best = &sweep.table[sweep.best_index];
    println!(
        "sweep ({tags_desc}, {} guesses): lowest energy {:.6} from ({}, {}, {})",
        sweep.table.len(),
        sweep.breakdown.total,
        best.tags[0],
        best.tags[1],
        best.tags[2]
    );
    let records: Vec<ConvergenceRecord> = Vec::new();
    emit_state(
        &dir,
        cfg,
        method_name(cfg.method),
        &sweep.field,
        &sweep.breakdown,
        &records,
        if best.converged {
            Termination::Converged
        } else {
            Termination::MaxIters
        },
    )?;
    Ok(if sweep.table.iter().any(|e| e.converged) {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn run_compare(cfg: &RunConfig, output_dir: Option<&Path>) -> anyhow::Result<i32> {
    if !cfg.compare_pgf {
        eprintln!("compare requires 'compare_pgf = on' in [solver]");
        return Ok(EXIT_CONFIG);
    }
    let Some(dt) = cfg.dt else {
        eprintln!("compare requires 'dt' in [solver]");
        return Ok(EXIT_CONFIG);
    };
    let GuessPlan::Triple(tags) = &cfg.guesses else {
        eprintln!("compare needs [guesses] tags = <t1> <t2> <t3>");
        return Ok(EXIT_CONFIG);
    };
    let dir = output_dir.unwrap_or(&cfg.output_dir).to_path_buf();
    std::fs::create_dir_all(&dir)?;

    let phi0 = make_spinor_guess(*tags, &cfg.grid, &cfg.params)?;
    let pcg = pcg_solve(&phi0, &cfg.params, &cfg.solver)?;
    let pgf = pgf_solve(&phi0, &cfg.params, dt, &cfg.solver)?;
    let e_ref = pcg.breakdown.total.min(pgf.breakdown.total);

    let rows = pcg.record.rows.len().max(pgf.record.rows.len());
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("compare.csv"))?);
    writeln!(
        f,
        "iter,pcg_energy_error,pcg_residual_inf,pgf_energy_error,pgf_residual_inf"
    )?;
    for i in 0..rows {
        write!(f, "{}", i + 1)?;
        match pcg.record.rows.get(i) {
            Some(r) => write!(f, ",{:.16e},{:.16e}", (r.energy - e_ref).abs(), r.residual_inf)?,
            None => write!(f, ",,")?,
        }
        match pgf.record.rows.get(i) {
            Some(r) => writeln!(f, ",{:.16e},{:.16e}", (r.energy - e_ref).abs(), r.residual_inf)?,
            None => writeln!(f, ",,")?,
        }
    }
    f.flush()?;
    drop(f);

    let ratio = pcg.record.iterations() as f64 / pgf.record.iterations() as f64;
    let diff = (pcg.breakdown.total - pgf.breakdown.total).abs();
    let summary = format!(
        "pcg_iterations = {}\npgf_iterations = {}\niteration_ratio = {:.6}\n\
         pcg_energy = {:.16e}\npgf_energy = {:.16e}\nenergy_agreement = {:.3e}\n\
         pcg_converged = {}\npgf_converged = {}\n",
        pcg.record.iterations(),
        pgf.record.iterations(),
        ratio,
        pcg.breakdown.total,
        pgf.breakdown.total,
        diff,
        pcg.record.converged(),
        pgf.record.converged(),
    );
    std::fs::write(dir.join("compare_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(if pcg.record.converged() && pgf.record.converged() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn run_diagnose(field_path: &Path, cfg: &RunConfig) -> anyhow::Result<i32> {
    let field = match fieldfile::read_field(field_path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("cannot read field file: {e}");
            return Ok(EXIT_CONFIG);
        }
    };
    if field.grid() != &cfg.grid {
        eprintln!(
            "grid mismatch: field file has {:?} points on half-widths {:?}, config has {:?} / {:?}",
            field.grid().points(),
            field.grid().half_width(),
            cfg.grid.points(),
            cfg.grid.half_width()
        );
        return Ok(EXIT_CONFIG);
    }
    let breakdown = physics::energy(&field, &cfg.params)?;
    let summary = output::render_summary(&Summary {
        method: "diagnose",
        breakdown: &breakdown,
        field: &field,
        params: &cfg.params,
        termination: Termination::Converged,
        iterations: 0,
        residual_inf: residual_inf(&field, cfg)?,
    });
    print!("{summary}");
    Ok(EXIT_OK)
}

/// Mesh-halving accuracy study: solve on each grid from the coarsest to the
/// configured one, compare against a reference state (from file, or computed
/// on a grid with doubled points), and tabulate the errors.
pub fn run_study(
    cfg: &RunConfig,
    reference: Option<&Path>,
    output_dir: Option<&Path>,
) -> anyhow::Result<i32> {
    let GuessPlan::Triple(tags) = &cfg.guesses else {
        eprintln!("convergence-study needs [guesses] tags = <t1> <t2> <t3>");
        return Ok(EXIT_CONFIG);
    };
    let Some(coarse) = cfg.coarsest_grid() else {
        eprintln!("convergence-study requires coarsest_points in [grid]");
        return Ok(EXIT_CONFIG);
    };
    let dir = output_dir.unwrap_or(&cfg.output_dir).to_path_buf();
    std::fs::create_dir_all(&dir)?;

    let cascade_to = |finest: &GridSpec| -> anyhow::Result<(SpinorField, EnergyBreakdown, bool)> {
        let plan = MultigridPlan::between(&coarse, finest, &cfg.solver)?;
        let phi0 = make_spinor_guess(*tags, &coarse, &cfg.params)?;
        let out = cm_pcg_solve(&phi0, &cfg.params, &plan)?;
        let conv = out.converged();
        Ok((out.field, out.breakdown, conv))
    };

    let (ref_field, ref_breakdown) = match reference {
        Some(p) => {
            let f = match fieldfile::read_field(p) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("cannot read reference field: {e}");
                    return Ok(EXIT_CONFIG);
                }
            };
            let b = physics::energy(&f, &cfg.params)?;
            (f, b)
        }
        None => {
            let doubled: Vec<usize> = cfg.grid.points().iter().map(|n| n * 2).collect();
            let ref_grid = GridSpec::new(cfg.grid.dim(), cfg.grid.half_width(), &doubled)?;
            let (f, b, _) = cascade_to(&ref_grid)?;
            fieldfile::write_field(&dir.join("reference.spgs"), &f)?;
            (f, b)
        }
    };

    let mut all_converged = true;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("study.csv"))?);
    writeln!(f, "points,mesh,E_h,energy_error,mu_error,virial_residual")?;
    println!("points,mesh,E_h,energy_error,mu_error,virial_residual");
    let mut pts = coarse.points().to_vec();
    loop {
        let grid = GridSpec::new(cfg.grid.dim(), cfg.grid.half_width(), &pts)?;
        let (field, b, conv) = cascade_to(&grid)?;
        all_converged &= conv;
        let restricted = restrict_sample(&ref_field, &grid)?;
        let (_, e_h) = phase_align(&field, &restricted)?;
        let line = format!(
            "{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            pts[0],
            grid.mesh()[0],
            e_h,
            (b.total - ref_breakdown.total).abs(),
            (b.mu - ref_breakdown.mu).abs(),
            virial_from_breakdown(&b, grid.dim())
        );
        writeln!(f, "{line}")?;
        println!("{line}");
        if pts == cfg.grid.points() {
            break;
        }
        for p in &mut pts {
            *p *= 2;
        }
    }
    f.flush()?;
    Ok(if all_converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
