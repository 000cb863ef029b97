//! Lift the reduced Calogero-Moser solution and rebuild a trajectory from
//! the reduced flow plus the group motion.

use hjreduce::grid;
use hjreduce::hj::{solve_reduced_1d, BranchSign};
use hjreduce::phase_space::HamiltonianSystem;
use hjreduce::reconstruction::{
    chart_grid, gamma_relatedness, integrate_projected, lift_solution, reconstruct_trajectory,
    trajectory_distance, verify_lift,
};
use hjreduce::reduction::{reduce, QuotientChart};
use hjreduce::symmetry::{MomentumValue, TranslationAction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2) + 1/(q1-q2)^2")?;
    let a = TranslationAction::new(2, &[vec![1.0, 1.0]])?;
    let chart = QuotientChart::new(&a, &sys.coords().q, &["q".into()], &["p".into()])?;
    let mut rng = grid::rng(grid::DEFAULT_SEED);

    for mu in [0.0, 0.6] {
        let mu = MomentumValue(vec![mu]);
        let r = reduce(&sys, &chart, &mu, &mut rng)?;
        let sol = solve_reduced_1d(
            r.hamiltonian(),
            "q",
            "p",
            2.0,
            (0.8, 5.0),
            BranchSign::Positive,
            2001,
        )?;
        let gamma = lift_solution(&sol.form, &chart, &mu, None)?;
        let pts = chart_grid(&chart, &[(1.0, 5.0)], &[(-2.0, 2.0)], 50)?;
        let rep = verify_lift(&sys, &gamma, &chart, &mu, &pts, &mut rng)?;

        let traj = reconstruct_trajectory(&sys, &r, &sol.form, &[2.0], 1.0, 1e-3)?;
        let q0 = traj.samples[0].point.q.clone();
        let direct = integrate_projected(&sys, &gamma, &q0, 1.0, 1e-3)?;
        let end = traj.last().unwrap();
        println!("mu = {:?}", mu.0);
        println!(
            "  hj residual {:.3e}, momentum residual {:.3e}",
            rep.hj.max_dev, rep.momentum_residual
        );
        println!("  q(1) = {:?}", end.point.q);
        println!(
            "  distance to direct flow {:.3e}",
            trajectory_distance(&traj, &direct, true)?
        );
        println!(
            "  gamma-relatedness       {:.3e}",
            gamma_relatedness(&sys, &gamma, &q0, 1.0, 1e-3)?
        );
    }
    Ok(())
}
