use statrs::distribution::{ContinuousCDF, StudentsT};

use super::HarnessError;

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        MeanStd {
            mean: mean(xs),
            std: std_dev(xs),
        }
    }
}

/// Pearson correlation, accumulated in one pass with running co-moments.
pub fn pearson<X, Y>(x: &[X], y: &[Y]) -> Result<f64, HarnessError>
where
    X: Copy + Into<f64>,
    Y: Copy + Into<f64>,
{
    if x.len() != y.len() || x.len() < 2 {
        return Err(HarnessError::Statistics("pearson needs two equal-length vectors of length ≥ 2".into()));
    }
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        let (a, b) = (a.into(), b.into());
        let n = (i + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(HarnessError::Statistics("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

impl TTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p < alpha
    }
}

/// Two-sample t-test without assuming equal variances.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest, HarnessError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(HarnessError::Statistics("t-test needs at least two samples per group".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (std_dev(a).powi(2) / na, std_dev(b).powi(2) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        let p = if diff == 0.0 { 1.0 } else { 0.0 };
        return Ok(TTest {
            t: if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY },
            df: na + nb - 2.0,
            p,
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| HarnessError::Statistics(e.to_string()))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTest { t, df, p })
}
