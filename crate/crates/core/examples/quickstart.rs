//! Simulate a panel, choose the number of factors, and summarize the fit.

use binife::inference::{ape, mean_group_result};
use binife::selector::select_num_factors;
use binife::simulation::{gen_dgp, Dgp, DgpSpec, TailCase};
use binife::FitConfig;

fn main() -> binife::Result<()> {
    let spec = DgpSpec::new(TailCase::LightTail, Dgp::Dgp1, 40, 40, 1);
    let sim = gen_dgp(&spec)?;
    let sel = select_num_factors(&sim.data, spec.case.link(), &FitConfig::default(), 3)?;
    for (d, ic) in &sel.ic_values {
        println!("IC({d}) = {ic:.5}");
    }
    let fit = sel.chosen_fit();
    println!("chosen d = {}, log-likelihood = {:.3}", sel.chosen_d, fit.loglik);

    let mg = mean_group_result(&sim.data, fit, None)?;
    let true_mean: Vec<f64> = (0..spec.d_beta).map(|k| sim.truth.b.column(k).mean()).collect();
    println!("mean-group slopes {:.3?} (true {:.3?})", mg.beta_bar, true_mean);

    let partial = ape(&sim.data, fit)?;
    println!("average partial effect of x1 for unit 0: {:.4}", partial.delta[(0, 0)]);
    Ok(())
}
