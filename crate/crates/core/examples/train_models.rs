//! Fit OLS, ridge, a random forest and gradient boosting on a chronological
//! split and compare held-out MSE / R^2.
//!
//! cargo run --release --example train_models

use factorforge::factors::{compute_factors, FactorConfig};
use factorforge::ingest::clean;
use factorforge::models::{evaluate, BoostingConfig, ForestConfig, Model, ModelSpec};
use factorforge::selection::{chronological_split, feature_matrix};
use factorforge::synth::{generate, SynthConfig};

fn main() -> factorforge::Result<()> {
    let data = generate(&SynthConfig {
        n_stocks: 100,
        n_months: 60,
        signal_strength: 0.5,
        ..SynthConfig::default()
    })?;
    let fp = compute_factors(&clean(&data.prices), &FactorConfig::default())?;
    let features: Vec<String> = ["RollingVolatility", "TurnoverRatio", "VolatilityDynamics", "LogMarketCap"]
        .map(String::from)
        .to_vec();
    let (train, test) = chronological_split(&fp, 0.8)?;
    let x_train = feature_matrix(&fp, &features, &train)?;
    let x_test = feature_matrix(&fp, &features, &test)?;
    let y_train: Vec<f64> = train.iter().map(|&i| fp.ret[i]).collect();
    let y_test: Vec<f64> = test.iter().map(|&i| fp.ret[i]).collect();

    let specs = [
        ModelSpec::Ols,
        ModelSpec::Ridge { alpha: 1.0 },
        ModelSpec::RandomForest(ForestConfig::default()),
        ModelSpec::GradientBoosting(BoostingConfig::default()),
    ];
    println!("{:<20} {:>12} {:>10}", "model", "test mse", "test r2");
    for spec in specs {
        let model = spec.fit(&x_train, &y_train)?;
        let m = evaluate(&y_test, &model.predict(&x_test)?)?;
        println!("{:<20} {:>12.6} {:>10.4}", spec.name(), m.mse, m.r2);

        // JSON round trip is exact.
        let back = Model::from_json(&model.to_json()?)?;
        assert_eq!(back.predict(&x_test)?, model.predict(&x_test)?);
    }
    Ok(())
}
