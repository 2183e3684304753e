//! Finite-sample behaviour on simulated panels. These take a few minutes.

use binife::estimator::{fit, FitConfig};
use binife::simulation::{gen_dgp, replication_seed, rmse_f, run_replication, Dgp, DgpSpec, TailCase};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[test]
fn factor_space_error_shrinks_with_t() {
    let cfg = FitConfig {
        n_starts: 2,
        ..FitConfig::with_factors(2)
    };
    let medians: Vec<f64> = [30usize, 60, 120]
        .iter()
        .map(|&t| {
            let dists = (0..20)
                .map(|rep| {
                    let spec = DgpSpec::new(TailCase::LightTail, Dgp::Dgp1, 60, t, replication_seed(31, rep));
                    let sim = gen_dgp(&spec).unwrap();
                    let res = fit(&sim.data, spec.case.link(), &cfg).unwrap();
                    rmse_f(&res.params.f, &sim.truth.f).unwrap()
                })
                .collect();
            median(dists)
        })
        .collect();
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn slope_error_shrinks_with_t_in_paired_replications() {
    let cfg = FitConfig {
        n_starts: 2,
        ..FitConfig::default()
    };
    let short = DgpSpec::new(TailCase::LightTail, Dgp::Dgp1, 50, 50, 404);
    let long = DgpSpec { t: 150, ..short };
    let rmse = |spec: &DgpSpec, rep: usize| {
        let r = run_replication(spec, rep, &cfg, 3).unwrap();
        ((&r.b_hat - &r.b_true).norm_squared() / spec.n as f64).sqrt()
    };
    let reps = 20;
    let better = (0..reps).filter(|&rep| rmse(&long, rep) < rmse(&short, rep)).count();
    assert!(better * 10 >= reps * 9, "{better}/{reps}");
}
