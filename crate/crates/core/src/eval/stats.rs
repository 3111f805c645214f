use super::EvalError;

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Sample standard deviation (n - 1 denominator); undefined below two values.
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Pearson correlation, computed in two passes around the means.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 2 {
        return Err(EvalError::Precondition(format!("pearson needs at least 2 points, got {}", x.len())));
    }
    let mx = mean(x).expect("nonempty");
    let my = mean(y).expect("nonempty");
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::DegenerateSeries);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    /// The definition written out term by term, sharing no code with `pearson`.
    fn oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let xbar = x.iter().fold(0.0, |acc, v| acc + v) / n;
        let ybar = y.iter().fold(0.0, |acc, v| acc + v) / n;
        let dx: Vec<f64> = x.iter().map(|v| v - xbar).collect();
        let dy: Vec<f64> = y.iter().map(|v| v - ybar).collect();
        let num: f64 = (0..x.len()).map(|i| dx[i] * dy[i]).sum();
        let sx: f64 = dx.iter().map(|d| d * d).sum::<f64>().sqrt();
        let sy: f64 = dy.iter().map(|d| d * d).sum::<f64>().sqrt();
        num / (sx * sy)
    }

    #[test]
    fn examples() {
        let x = [1.0, 2.0, 3.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(pearson(&x, &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(pearson(&x, &[2.0, 2.0, 2.0]), Err(EvalError::DegenerateSeries)));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert_eq!(sample_sd(&[4.0]), None);
        assert!((sample_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap() - 2.138089935299395).abs() < 1e-12);
    }

    fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (proptest::collection::vec(-100.0f64..100.0, n), proptest::collection::vec(-100.0f64..100.0, n))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn matches_oracle_and_invariances((x, y) in series(), a in 0.01f64..50.0, b in -100.0f64..100.0) {
            let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
            prop_assume!(!constant(&x) && !constant(&y));
            let r = pearson(&x, &y).unwrap();
            prop_assert!(r.abs() <= 1.0 + 1e-12);
            prop_assert!((r - oracle(&x, &y)).abs() < 1e-12, "{} vs {}", r, oracle(&x, &y));
            let shifted: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&shifted, &y).unwrap() - r).abs() < 1e-12);
        }
    }
}
