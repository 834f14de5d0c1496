//! End-to-end pipeline checks across module boundaries: realized rounding
//! quality against the relaxation bound, baseline orderings, and the layered
//! route on a graph with no series-parallel parse.

use sospath::combinatorics::approx_factor;
use sospath::graph::{recognize_series_parallel, CostVector, Graph};
use sospath::instances::{gen_random_sp_sized, CostLaw};
use sospath::oracles::{brute_force_opt, l1_baseline, walk_lp_power_mean};
use sospath::poly::lp_objective;
use sospath::rng::Streams;
use sospath::rounding::{round_series_parallel, solve_lp_shortest_path};
use sospath::sdp::{build_relaxation, solve, SolveOptions, SolveStatus};
use sospath::Tolerances;

const SEED: u64 = 808;

#[test]
fn sp_route_rounding_meets_the_bell_factor() {
    // On a random series-parallel corpus: the exact mean sampled cost obeys
    // the depth-indexed Bell bound, and the realized best-of-20 stays under
    // the matching factor times the relaxation bound (fixed seed).
    let streams = Streams::new(SEED);
    let law = CostLaw::DyadicUnit { denominator: 64 };
    for i in 0..8u64 {
        let mut rng = streams.substream(1, i);
        let order = (i % 3) as u32;
        let (g, d) = gen_random_sp_sized::<f64, _>(order, 3, 2, &law, 12, &mut rng).unwrap();
        let p = 2u32;
        let problem = build_relaxation(&g, p, 4, &[]).unwrap();
        let result = solve(&problem, SolveOptions::default()).unwrap();
        assert_eq!(result.status, SolveStatus::Converged);

        let objective = result.pe.evaluate(&lp_objective(&g, p).unwrap()).unwrap();
        let mean_pow = walk_lp_power_mean(&g, &result.pe, p).unwrap();
        let factor_pow = sospath::combinatorics::bell(d.order() as usize, p as usize);
        let bound = num_traits::ToPrimitive::to_f64(&factor_pow).unwrap() * objective;
        assert!(
            mean_pow <= bound + 1e-6,
            "instance {i}: mean {mean_pow} > bell bound {bound}"
        );

        let mut best = f64::INFINITY;
        for trial in 0..20u64 {
            let mut trial_rng = streams.substream(100 + i, trial);
            let path =
                round_series_parallel(&g, &result.pe, &Tolerances::default(), &mut trial_rng)
                    .unwrap();
            best = best.min(path.lp(p));
        }
        let sos_bound = result.objective.max(0.0).powf(1.0 / p as f64);
        let factor = approx_factor(d.order().max(1) as usize, p as usize).unwrap();
        assert!(
            best <= factor * sos_bound + 1e-6,
            "instance {i}: best {best} vs factor {factor} x bound {sos_bound}"
        );

        // Relaxation is a lower bound on the optimum; the scalarized baseline
        // never beats the true optimum.
        let (_, opt) = brute_force_opt(&g, p).unwrap();
        assert!(result.objective <= opt.powi(2) + 1e-6 * (1.0 + opt.powi(2)));
        let baseline = l1_baseline(&g).unwrap();
        assert!(baseline.lp(p) >= opt - 1e-9);
    }
}

#[test]
fn layered_route_handles_a_non_series_parallel_graph() {
    // Chordal diamond: no series-parallel parse exists, so the layered route
    // is the only one available; its bound and rounded cost stay consistent.
    let mut g: Graph<f64> = Graph::new(4, 2, 0, 3);
    g.add_edge(0, 1, CostVector::new(vec![1.0, 0.0]));
    g.add_edge(0, 2, CostVector::new(vec![0.0, 1.0]));
    g.add_edge(1, 3, CostVector::new(vec![0.0, 1.0]));
    g.add_edge(2, 3, CostVector::new(vec![1.0, 0.0]));
    g.add_edge(1, 2, CostVector::new(vec![0.25, 0.25]));
    g.validate().unwrap();
    assert!(recognize_series_parallel(&g).is_err());

    let streams = Streams::new(SEED);
    let run =
        solve_lp_shortest_path(&g, 2, 0.45, 20, &streams, SolveOptions::default()).unwrap();
    let (_, opt) = brute_force_opt(&g, 2).unwrap();
    // Soundness and achievability: bound below OPT, best trial above OPT,
    // and within the depth-one factor of the bound.
    assert!(run.sos_bound <= opt + 1e-6);
    assert!(run.best_cost >= opt - 1e-9);
    let factor = approx_factor(1, 2).unwrap();
    assert!(
        run.best_cost <= factor * run.sos_bound + 1e-6,
        "best {} vs factor {} x bound {}",
        run.best_cost,
        factor,
        run.sos_bound
    );
}

#[test]
fn baseline_ratio_respects_dimension_bound() {
    // The scalarized baseline is an ℓ^{1-1/p} approximation; check the ratio
    // against the brute-force optimum across a small corpus.
    let streams = Streams::new(SEED);
    let law = CostLaw::DyadicUnit { denominator: 32 };
    for i in 0..10u64 {
        let mut rng = streams.substream(7, i);
        let dim = 1 + (i as usize % 4);
        let (g, _) =
            gen_random_sp_sized::<f64, _>((i % 3) as u32, 3, dim, &law, 12, &mut rng).unwrap();
        for p in [2u32, 3] {
            let Ok((_, opt)) = brute_force_opt(&g, p) else {
                continue;
            };
            if opt < 1e-9 {
                continue;
            }
            let baseline = l1_baseline(&g).unwrap().lp(p);
            let cap = (dim as f64).powf(1.0 - 1.0 / p as f64);
            assert!(
                baseline / opt <= cap + 1e-9,
                "instance {i} p={p}: ratio {} vs cap {cap}",
                baseline / opt
            );
        }
    }
}
