//! Ranking metrics for a single relevant item.

/// Pessimistic rank of the ground truth, whose score sits at `scores[0]`:
/// ties push the truth after every equal-scored negative.
pub fn rank_of_truth(scores: &[f64]) -> usize {
    assert!(!scores.is_empty(), "need at least the ground-truth score");
    let truth = scores[0];
    1 + scores[1..].iter().filter(|&&s| s >= truth).count()
}

/// `(hr, ndcg, mrr)` for one user given the 1-based rank of the truth.
/// NDCG uses the single-relevant-item form `1/log2(rank+1)` inside the top
/// `k` and zero outside; MRR is unclipped.
pub fn compute_metrics(rank: usize, k: usize) -> (f64, f64, f64) {
    assert!(rank >= 1, "ranks are 1-based");
    let hit = rank <= k;
    let hr = if hit { 1.0 } else { 0.0 };
    let ndcg = if hit { 1.0 / ((rank + 1) as f64).log2() } else { 0.0 };
    let mrr = 1.0 / rank as f64;
    (hr, ndcg, mrr)
}

/// Per-user means over the evaluated population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingMetrics {
    pub hr_at_k: f64,
    pub ndcg_at_k: f64,
    pub mrr: f64,
    pub num_users_evaluated: usize,
}

/// Human-readable table plus the machine-readable key-value block.
pub fn format_metrics_report(m: &RankingMetrics, k: usize) -> String {
    let mut s = String::new();
    s.push_str("metric      value\n");
    s.push_str(&format!("hr@{k:<9} {:.6}\n", m.hr_at_k));
    s.push_str(&format!("ndcg@{k:<7} {:.6}\n", m.ndcg_at_k));
    s.push_str(&format!("mrr         {:.6}\n", m.mrr));
    s.push_str(&format!("users       {}\n", m.num_users_evaluated));
    s.push('\n');
    s.push_str(&format!("hr@{k}={:.6}\n", m.hr_at_k));
    s.push_str(&format!("ndcg@{k}={:.6}\n", m.ndcg_at_k));
    s.push_str(&format!("mrr={:.6}\n", m.mrr));
    s.push_str(&format!("users={}\n", m.num_users_evaluated));
    s
}
