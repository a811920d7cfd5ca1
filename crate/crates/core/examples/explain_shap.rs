//! Exact TreeSHAP attributions for a random forest, checked against the
//! brute-force Shapley oracle on one tree.
//!
//! cargo run --release --example explain_shap

use factorforge::explain::{brute_force_shapley, impurity_importance, shap_summary, tree_shap, tree_shap_single};
use factorforge::models::{fit_random_forest, ForestConfig, Matrix, Model};
use factorforge::rng::Xoshiro256StarStar;

fn main() -> factorforge::Result<()> {
    // y = 3*x0 + x1*x2 + noise; x3 is irrelevant.
    let mut rng = Xoshiro256StarStar::seed_from_u64(7);
    let rows: Vec<Vec<f64>> = (0..800).map(|_| (0..4).map(|_| rng.next_f64()).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + r[1] * r[2] + 0.05 * rng.normal()).collect();
    let x = Matrix::from_rows(&rows)?;
    let forest = fit_random_forest(&x, &y, &ForestConfig { n_estimators: 50, ..ForestConfig::default() })?;
    let model = Model::RandomForest(forest);

    let e = tree_shap(&model, &rows[0])?;
    println!("row 0: prediction {:.4}", model.predict_row(&rows[0])?);
    println!("       base {:.4} + phi {:?} = {:.4}", e.base_value, e.phi, e.total());

    if let Model::RandomForest(f) = &model {
        let fast = tree_shap_single(&f.trees[0], &rows[0]).phi;
        let slow = brute_force_shapley(&f.trees[0], &rows[0])?;
        let gap = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("tree 0: TreeSHAP vs brute force max gap {gap:.2e}");
    }

    let summary = shap_summary(&model, &x, &x)?;
    let importance = impurity_importance(&model)?;
    println!("{:<8} {:>14} {:>12}", "feature", "mean |SHAP|", "impurity");
    for j in 0..4 {
        println!("x{j:<7} {:>14.4} {:>12.4}", summary.mean_abs_shap[j], importance.importance[j]);
    }
    println!("max local accuracy error {:.2e}", summary.max_local_accuracy_error);
    Ok(())
}
