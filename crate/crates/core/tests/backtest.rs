use binife::estimator::FitConfig;
use binife::portfolio::{day_weights, planted_signal_market, BacktestConfig, FactorChoice, Strategy, WINDOW};

#[test]
fn weights_ignore_data_from_the_trading_day_onward() {
    let market = planted_signal_market(6, WINDOW + 4, 11).unwrap();
    let cfg = BacktestConfig {
        fit: FitConfig {
            n_starts: 1,
            epsilon: 1e-4,
            ..FitConfig::default()
        },
        ..BacktestConfig::default()
    };
    let start = 2;
    let trade_day = start + WINDOW;
    let mut future = market.clone();
    for day in trade_day..future.n_days() {
        for i in 0..future.n_stocks() {
            future.returns[(i, day)] = -3.0 * future.returns[(i, day)] + 0.07;
        }
        future.log_vix[day] += 5.0;
        future.rfi[day] = 0.5;
    }
    for strategy in [
        Strategy::Ife(FactorChoice::Fixed(1)),
        Strategy::Fe,
        Strategy::Ew,
        Strategy::Cm,
    ] {
        let a = day_weights(&market, strategy, &cfg, start).unwrap();
        let b = day_weights(&future, strategy, &cfg, start).unwrap();
        assert_eq!(a, b, "{strategy}");
    }

    // The last training day does matter.
    let mut past = market.clone();
    for i in 0..past.n_stocks() {
        past.returns[(i, trade_day - 1)] *= -1.0;
    }
    let a = day_weights(&market, Strategy::Cm, &cfg, start).unwrap();
    let b = day_weights(&past, Strategy::Cm, &cfg, start).unwrap();
    assert_ne!(a, b);
}
