//! Position-correlation analysis of encoder outputs.

use super::harness::{build_eval_input, EvalTarget};
use super::EvalError;
use crate::data::UserSequence;
use crate::model::{encode, ModelConfig, ModelParameters, Phase};
use crate::numerics::Tape;

/// Mean over qualifying users of the pairwise Pearson correlation (across
/// the hidden dimension) between final-layer outputs at positions
/// `0..positions`. Position 0 is the [UID] slot. A user qualifies when its
/// prediction input holds at least `positions - 1` real items.
pub fn correlation_matrix(
    sequences: &[UserSequence],
    params: &ModelParameters,
    model_cfg: &ModelConfig,
    positions: usize,
) -> Result<Vec<Vec<f64>>, EvalError> {
    if positions < 2 || positions > model_cfg.max_len - 1 {
        return Err(EvalError::InvalidConfig(format!(
            "positions {positions} must lie in 2..={}",
            model_cfg.max_len - 1
        )));
    }
    let num_items = params.num_items();
    let mut acc = vec![vec![0.0; positions]; positions];
    let mut qualifying = 0usize;

    for seq in sequences {
        let (window, mask_pos) = build_eval_input(seq, EvalTarget::Test, model_cfg.max_len, num_items);
        let real_items = mask_pos - 1;
        if real_items < positions - 1 {
            continue;
        }
        let mut tape = Tape::new();
        let vars = params.bind_frozen(&mut tape);
        let h = encode(&mut tape, &vars, &window, model_cfg, num_items, &mut Phase::Eval)?;
        let out = tape.value(h);
        for i in 0..positions {
            for j in 0..positions {
                acc[i][j] += pearson(out.row(i), out.row(j));
            }
        }
        qualifying += 1;
    }

    if qualifying < 2 {
        return Err(EvalError::TooFewQualifyingUsers { found: qualifying, needed: 2 });
    }
    for row in &mut acc {
        for v in row {
            *v /= qualifying as f64;
        }
    }
    Ok(acc)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx < 1e-24 || vy < 1e-24 {
        // Degenerate (constant) vector: correlation undefined, report zero.
        return if std::ptr::eq(x, y) { 1.0 } else { 0.0 };
    }
    cov / (vx.sqrt() * vy.sqrt())
}

/// Row-major text grid with a header of position labels.
pub fn format_correlation_grid(matrix: &[Vec<f64>]) -> String {
    let mut s = String::new();
    let labels: Vec<String> = (0..matrix.len()).map(|i| format!("pos_{i}")).collect();
    s.push_str(&labels.join(" "));
    s.push('\n');
    for row in matrix {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}
