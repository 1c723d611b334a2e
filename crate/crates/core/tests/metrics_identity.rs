use issuebert::corpus::IssueLabel;
use issuebert::metrics::{
    class_metrics, micro_average, micro_f_exact, micro_precision_exact, micro_recall_exact, ConfusionMatrix, Exact,
};
use issuebert::rng::SeededRng;

fn random_matrix(rng: &mut SeededRng) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    let scale = [3, 50, 10_000, 1_000_000][rng.below(4)];
    for a in IssueLabel::ALL {
        for p in IssueLabel::ALL {
            // Occasional empty cells and rows.
            let n = if rng.uniform() < 0.2 { 0 } else { rng.below(scale) as u64 };
            m.counts[a.index()][p.index()] = n;
        }
    }
    if m.total() == 0 {
        m.counts[0][1] = 1;
    }
    m
}

#[test]
fn micro_scores_coincide_exactly() {
    let mut rng = SeededRng::new(2022);
    for _ in 0..1000 {
        let m = random_matrix(&mut rng);
        assert_eq!(m.sum_fp(), m.sum_fn());
        let r = micro_recall_exact(&m).unwrap();
        let p = micro_precision_exact(&m).unwrap();
        let f = micro_f_exact(&m).unwrap();
        assert_eq!(r, p);
        assert_eq!(p, f);
        assert_eq!(r, Exact::new(m.sum_tp() as u128, m.total() as u128));
        let float = micro_average(&m).unwrap();
        assert!((float - m.sum_tp() as f64 / m.total() as f64).abs() < 1e-15);
    }
}

/// Per-class scores from a loop over the raw confusion entries.
#[test]
fn class_scores_match_counting_oracle() {
    let mut rng = SeededRng::new(5);
    for _ in 0..200 {
        let m = random_matrix(&mut rng);
        for c in IssueLabel::ALL {
            let k = c.index();
            let tp = m.counts[k][k] as f64;
            let row: f64 = (0..3).map(|j| m.counts[k][j] as f64).sum();
            let col: f64 = (0..3).map(|i| m.counts[i][k] as f64).sum();
            let r = if row == 0.0 { 0.0 } else { tp / row };
            let p = if col == 0.0 { 0.0 } else { tp / col };
            let f = if r + p == 0.0 { 0.0 } else { 2.0 * r * p / (r + p) };
            let s = class_metrics(&m, c);
            assert!((s.recall - r).abs() < 1e-15 && (s.precision - p).abs() < 1e-15 && (s.f_score - f).abs() < 1e-15);
        }
    }
}
