use spings::grid::GridSpec;
use spings::guess::{make_spinor_guess, GuessKind};
use spings::physics::PhysicsParams;
use spings::potential::TrapPotential;
use spings::solver::{pcg_solve, SolverConfig, StopRule};
use std::time::Instant;

fn main() {
    // Example-2 setup: Case 2 on [-12,12]^2 with N = 128, stop3 at 1e-14.
    let grid = GridSpec::square(2, 12.0, 128).unwrap();
    let params = PhysicsParams {
        c0: 100.0, c1: 1.0, omega: 0.3, gamma_soc: 0.3,
        trap: TrapPotential::harmonic_isotropic(2),
    };
    let cfg = SolverConfig::default().with_stop(StopRule::energy_diff(1e-14));
    for tag in [GuessKind::A, GuessKind::B, GuessKind::C, GuessKind::E] {
        let phi0 = make_spinor_guess([tag; 3], &grid, &params).unwrap();
        let t = Instant::now();
        let out = pcg_solve(&phi0, &params, &cfg).unwrap();
        println!(
            "pcg guess {tag}: E = {:.10} iters = {} ({:?}, {:.1} s)",
            out.breakdown.total, out.record.iterations(), out.record.termination,
            t.elapsed().as_secs_f64()
        );
    }
}
