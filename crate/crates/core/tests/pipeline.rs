use prlab_core::analysis::{flatness_iterate, tail_fit};
use prlab_core::contact::{curvature_field, FieldSet};
use prlab_core::counterexample::lepsilon_growth;
use prlab_core::grid::{Grid, GridFn};
use prlab_core::operators::{sample_family_2d, Operator};
use prlab_core::rng;
use prlab_core::solver::{solve_dirichlet, DiscreteProblem, Iteration, Scheme};
use prlab_core::symmat::Ellipticity;
use prlab_core::testfns::{sample_normalized, HarmonicPoly, TrigPoly};

fn ell() -> Ellipticity {
    Ellipticity::new(1.0, 2.0).unwrap()
}

#[test]
fn solve_then_measure_curvature() {
    let grid = Grid::ball(2, 16, 1.0).unwrap();
    let t = TrigPoly::random(2, 2, 4, &mut rng::stream(7, 0));
    let g = sample_normalized(&grid, 1.0, |x| t.eval(x)).unwrap();
    let op = Operator::isaacs_smoothed(sample_family_2d(ell()), ell(), 0.05).unwrap();
    let p = DiscreteProblem::new(op, g, None, Scheme::MonotoneFrames).unwrap();
    let s = solve_dirichlet(&p, 1e-10, 200, Iteration::Newton).unwrap();
    assert!(s.converged);
    // Maximum principle: F(0) = 0 and the data are bounded by 1.
    assert!(s.u.sup_abs() <= 1.0 + 1e-9);

    let f = curvature_field(&s.u, 0.5, 1e6, FieldSet::THETA).unwrap();
    assert!(f.theta_lower.iter().chain(&f.theta_upper).all(|v| v.is_finite() && *v >= 0.0));
    let fit = tail_fit(&f.theta(), s.u.sup_abs(), 1.0, 1e6);
    // Either a bounded sentinel or a genuine fit; never a silent NaN.
    if let Ok(fit) = fit {
        assert!(fit.bounded || fit.epsilon_hat.is_finite());
    }

    let round = GridFn::from_csv(&grid, &s.u.to_csv()).unwrap();
    assert_eq!(round.values(), s.u.values());
}

#[test]
fn solved_harmonic_cubic_is_flat() {
    let grid = Grid::ball(2, 64, 1.0).unwrap();
    let p = HarmonicPoly::cubic(0.1);
    let g = GridFn::sample(&grid, |x| p.eval(x)).unwrap();
    let prob = DiscreteProblem::new(Operator::laplacian(2), g, None, Scheme::MonotoneFrames).unwrap();
    let s = solve_dirichlet(&prob, 1e-12, 50, Iteration::Newton).unwrap();
    assert!(s.converged);
    let t = flatness_iterate(&s.u, &Operator::laplacian(2), 0.5, 0.5, 16, 1.0).unwrap();
    assert!(t.hypothesis_met);
    assert!(!t.ratios().is_empty());
    assert!(t.ratios_within(1.1), "{:?} vs {}", t.ratios(), t.target_ratio);
}

#[test]
fn coarse_lepsilon_run_is_well_formed() {
    let rep = lepsilon_growth(3.0, Ellipticity::new(1.0, 4.0).unwrap(), 0.5, &[0.4, 0.2], 32, 1e9).unwrap();
    assert_eq!(rep.rows.len(), 2);
    assert_eq!(rep.growth_factors.len(), 1);
    assert!(rep.rows.iter().all(|r| r.integral.is_finite() && r.integral > 0.0));
    assert!((rep.conjectured_exponent - 0.4).abs() < 1e-12);
    assert!(rep.rows.iter().all(|r| r.continuum_reference.is_finite() && r.clamp_radius < r.radius));
}
