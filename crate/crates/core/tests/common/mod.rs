#![allow(dead_code)]

pub mod naive;

use chrono::NaiveDate;
use factorforge::ingest::{ObservationRow, Panel};
use factorforge::rng::Xoshiro256StarStar;

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// Month-end dates starting at January 2000.
pub fn month_end(k: usize) -> NaiveDate {
    let y = 2000 + (k / 12) as i32;
    let m = (k % 12) as u32 + 1;
    let first_next = if m == 12 { date(y + 1, 1, 1) } else { date(y, m + 1, 1) };
    first_next.pred_opt().unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// One security's random price path with flat stretches so zero
/// denominators and zero-variance windows actually occur.
pub fn random_security(rng: &mut Xoshiro256StarStar, permno: i64, n: usize) -> Vec<ObservationRow> {
    let mut p = 20.0 + 80.0 * rng.next_f64();
    let shrout = 1e3 + 1e5 * rng.next_f64();
    let mut rows = Vec::with_capacity(n);
    let mut prev = p;
    for t in 0..n {
        let flat = rng.next_f64() < 0.15;
        if !flat {
            p *= (0.08 * rng.normal()).exp();
        }
        let vol = if rng.next_f64() < 0.05 { 0.0 } else { 1e3 + 1e6 * rng.next_f64() };
        let ret = if t == 0 { 0.0 } else { p / prev - 1.0 };
        rows.push(ObservationRow {
            permno,
            date: month_end(t),
            prc: p,
            ret,
            vol,
            shrout,
        });
        prev = p;
    }
    rows
}

pub fn random_panel(seed: u64, n_securities: usize, n: usize) -> Panel {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let rows = (0..n_securities)
        .flat_map(|s| random_security(&mut rng, 100 + s as i64, n))
        .collect();
    Panel::new(rows)
}

/// Dense least squares via the normal equations with an intercept,
/// solved by Gaussian elimination with partial pivoting.
/// Returns `(intercept, coefficients)`; `alpha` penalizes the slopes only.
pub fn normal_equation_solve(rows: &[Vec<f64>], y: &[f64], alpha: f64) -> (f64, Vec<f64>) {
    let n = rows.len();
    let p = rows[0].len();
    let mx: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let my = y.iter().sum::<f64>() / n as f64;
    let mut a = vec![vec![0.0; p + 1]; p];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            let xi = r[i] - mx[i];
            for j in 0..p {
                a[i][j] += xi * (r[j] - mx[j]);
            }
            a[i][p] += xi * (yi - my);
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += alpha;
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for i in col + 1..p {
            let f = a[i][col] / a[col][col];
            for j in col..=p {
                a[i][j] -= f * a[col][j];
            }
        }
    }
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| a[i][j] * beta[j]).sum();
        beta[i] = (a[i][p] - s) / a[i][i];
    }
    let intercept = my - mx.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    (intercept, beta)
}

/// Random tree up to `max_depth` over `p` features with consistent covers
/// (children's covers sum to the parent's). Features may repeat on a path.
pub fn random_tree(rng: &mut Xoshiro256StarStar, max_depth: usize, p: usize, cover: u64) -> factorforge::models::TreeNode {
    use factorforge::models::TreeNode;
    if max_depth == 0 || cover < 2 || rng.next_f64() < 0.2 {
        return TreeNode::Leaf {
            value: 10.0 * rng.normal(),
            n: cover,
        };
    }
    let left_n = 1 + rng.below((cover - 1) as usize) as u64;
    TreeNode::Split {
        feature: rng.below(p),
        threshold: rng.normal(),
        n: cover,
        gain: rng.next_f64(),
        left: Box::new(random_tree(rng, max_depth - 1, p, left_n)),
        right: Box::new(random_tree(rng, max_depth - 1, p, cover - left_n)),
    }
}

/// Expected tree output when features in `known` are fixed to `x` and the
/// rest follow the training cover: the tree-conditional value function.
pub fn conditional_value(t: &factorforge::models::TreeNode, x: &[f64], known: &[bool]) -> f64 {
    use factorforge::models::TreeNode;
    match t {
        TreeNode::Leaf { value, .. } => *value,
        TreeNode::Split {
            feature,
            threshold,
            n,
            left,
            right,
            ..
        } => {
            if known[*feature] {
                conditional_value(if x[*feature] <= *threshold { left } else { right }, x, known)
            } else {
                (left.cover() as f64 * conditional_value(left, x, known)
                    + right.cover() as f64 * conditional_value(right, x, known))
                    / *n as f64
            }
        }
    }
}

/// Shapley values as the average marginal contribution over all `p!`
/// feature orderings.
pub fn permutation_shapley(t: &factorforge::models::TreeNode, x: &[f64]) -> Vec<f64> {
    fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.clone();
            let head = rest.remove(i);
            for mut tail in permutations(rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }
    let p = x.len();
    let perms = permutations((0..p).collect());
    let mut phi = vec![0.0; p];
    for order in &perms {
        let mut known = vec![false; p];
        let mut prev = conditional_value(t, x, &known);
        for &f in order {
            known[f] = true;
            let v = conditional_value(t, x, &known);
            phi[f] += v - prev;
            prev = v;
        }
    }
    phi.iter_mut().for_each(|v| *v /= perms.len() as f64);
    phi
}

/// Three securities over 38 months with `ret = 2 * Signal` on every row.
/// Months 36 and 37 carry the hand-picked test-month signals; earlier months
/// vary smoothly so the regression is well determined.
pub fn backtest_fixture() -> factorforge::factors::FactorPanel {
    use factorforge::factors::FactorPanel;
    let test_signals = [[0.03, -0.01, 0.02], [-0.02, 0.025, 0.01]];
    let mut keys = Vec::new();
    let mut signal = Vec::new();
    for s in 0..3usize {
        for t in 0..38usize {
            keys.push((s as i64 + 1, month_end(t)));
            signal.push(if t >= 36 {
                test_signals[t - 36][s]
            } else {
                0.01 * ((s * 7 + t) as f64 * 0.9).sin()
            });
        }
    }
    let ret = signal.iter().map(|v| 2.0 * v).collect();
    let mut fp = FactorPanel::new(keys, ret);
    fp.push_column("Signal", signal);
    fp
}
