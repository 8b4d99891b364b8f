//! Slope fits and 1-D clustering used to turn sweeps into candidates.

/// Least-squares slope of `ln q` against `ln r`. Zero quantities are
/// floored so that an exactly vanishing quantity reads as steep decay.
pub fn log_slope(radii: &[f64], quantities: &[f64]) -> Option<f64> {
    if radii.len() != quantities.len() || radii.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = quantities.iter().map(|q| q.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Single-linkage clusters of `values`, returned as index groups in
/// increasing value order. Neighbours closer than
/// `max(1e-3, 1e-2·spread)` share a cluster.
pub fn single_linkage(values: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let Some((&first, &last)) = order.first().zip(order.last()) else {
        return Vec::new();
    };
    let gap = 1e-3f64.max(1e-2 * (values[last] - values[first]));
    let mut clusters: Vec<Vec<usize>> = vec![vec![first]];
    for w in order.windows(2) {
        if values[w[1]] - values[w[0]] > gap {
            clusters.push(Vec::new());
        }
        clusters.last_mut().expect("non-empty").push(w[1]);
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let r = [10.0, 20.0, 40.0, 80.0];
        let q: Vec<f64> = r.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        assert!((log_slope(&r, &q).unwrap() + 1.5).abs() < 1e-12);
        assert!(log_slope(&r[..1], &q[..1]).is_none());
        assert!(log_slope(&r, &[0.0; 4]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn clusters_split_on_gaps() {
        let v = [0.0, 1.0, 1e-4, 1.0005, -2e-4, 5.0];
        let c = single_linkage(&v);
        assert_eq!(c, vec![vec![4, 0, 2], vec![1, 3], vec![5]]);
        assert!(single_linkage(&[]).is_empty());
        // spread 100 gives a gap of 1
        let c = single_linkage(&[0.0, 0.9, 100.0]);
        assert_eq!(c.len(), 2);
    }
}
