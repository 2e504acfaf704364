//! A trained planner reproduces the expert on episodes it never saw.

use follower::config::Config;
use follower::exec::Exec;
use follower::pipeline;

#[test]
fn held_out_expert_trace_is_cloned() {
    let cfg = Config::default();
    let train_set = pipeline::generate(&cfg, 2500, 7, Exec::default()).unwrap();
    let held_out = pipeline::generate(&cfg, 600, 1234, Exec::default()).unwrap();
    let model = pipeline::train(&train_set, &cfg, 7, None).unwrap().model;

    let n = held_out.len() as f64;
    let (mut v_mae, mut w_mse) = (0.0, 0.0);
    for row in &held_out.rows {
        let pred = model.predict(&row.input);
        v_mae += (pred.v - row.v).abs() / n;
        w_mse += (pred.w - row.w).powi(2) / n;
    }
    assert!(v_mae <= 0.10, "v MAE {v_mae}");
    assert!(w_mse <= 0.0055, "w MSE {w_mse}");
}
