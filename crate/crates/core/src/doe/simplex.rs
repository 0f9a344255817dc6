//! Euclidean projection onto `{w >= lower, sum(w - lower) <= cap}`.

/// Projects `w` onto the shifted, capped simplex. Sort-based, `O(s log s)`.
pub fn simplex_project(w: &[f64], lower: &[f64], cap: f64) -> Vec<f64> {
    assert_eq!(w.len(), lower.len(), "simplex_project: length mismatch");
    if !(cap > 0.0) {
        return lower.to_vec();
    }
    let u: Vec<f64> = w.iter().zip(lower).map(|(a, b)| a - b).collect();
    let clipped_sum: f64 = u.iter().map(|x| x.max(0.0)).sum();
    if clipped_sum <= cap {
        return u.iter().zip(lower).map(|(x, l)| l + x.max(0.0)).collect();
    }
    let mut sorted = u.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, x) in sorted.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - cap) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    u.iter()
        .zip(lower)
        .map(|(x, l)| l + (x - theta).max(0.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_points_are_fixed() {
        let lower = [1.0, 0.0, 2.0];
        let w = [1.5, 0.2, 2.1];
        assert_eq!(simplex_project(&w, &lower, 1.0), w.to_vec());
    }

    #[test]
    fn zero_cap_returns_lower() {
        let lower = [1.0, 0.0, 2.0];
        assert_eq!(
            simplex_project(&[5.0, -3.0, 9.0], &lower, 0.0),
            lower.to_vec()
        );
    }

    #[test]
    fn clips_below_lower() {
        let p = simplex_project(&[-1.0, 0.5], &[0.0, 0.0], 1.0);
        assert_eq!(p, vec![0.0, 0.5]);
    }

    #[test]
    fn lands_on_budget_face() {
        let p = simplex_project(&[3.0, 1.0], &[0.0, 0.0], 1.0);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] == 0.0);
        let p = simplex_project(&[2.0, 2.0, 0.0], &[1.0, 1.0, 0.0], 1.0);
        assert!((p[0] - 1.5).abs() < 1e-15 && (p[1] - 1.5).abs() < 1e-15 && p[2] == 0.0);
    }
}
