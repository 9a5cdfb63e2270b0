use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    /// Unequal variances, Welch–Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Pooled variance, `n1 + n2 - 2` degrees of freedom.
    Student,
}

impl FromStr for TTestVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "welch" => Ok(TTestVariant::Welch),
            "student" => Ok(TTestVariant::Student),
            other => Err(Error::InvalidConfig(format!("unknown t-test variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, if xs.len() > 1 { ss / (n - 1.0) } else { f64::NAN })
}

/// Standard error of the mean, defined for two or more values.
pub fn std_error(xs: &[f64]) -> Option<f64> {
    (xs.len() >= 2).then(|| {
        let (_, var) = mean_var(xs);
        (var / xs.len() as f64).sqrt()
    })
}

/// Two-sided tail probability `P(|T| >= |t|)` of Student's t with `df`
/// degrees of freedom, through the regularized incomplete beta function.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(f64::MIN_POSITIVE, 1.0)
}

pub fn t_test(sample1: &[f64], sample2: &[f64], variant: TTestVariant) -> Result<TTest> {
    if sample1.len() < 2 || sample2.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least two values per sample, got {} and {}",
            sample1.len(),
            sample2.len()
        )));
    }
    let (n1, n2) = (sample1.len() as f64, sample2.len() as f64);
    let (m1, v1) = mean_var(sample1);
    let (m2, v2) = mean_var(sample2);
    if v1 == 0.0 && v2 == 0.0 {
        return Err(Error::DegenerateSample("both samples have zero variance".into()));
    }
    let (se, df) = match variant {
        TTestVariant::Welch => {
            let (a, b) = (v1 / n1, v2 / n2);
            let df = (a + b) * (a + b) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
            ((a + b).sqrt(), df)
        }
        TTestVariant::Student => {
            let df = n1 + n2 - 2.0;
            let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / df;
            ((pooled * (1.0 / n1 + 1.0 / n2)).sqrt(), df)
        }
    };
    let t = (m1 - m2) / se;
    Ok(TTest {
        t,
        df,
        p: two_sided_p(t, df),
    })
}

/// `***` below 0.001, `**` below 0.01, `*` below 0.05.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_samples() {
        let s = [0.1, 0.2, 0.3];
        let r = t_test(&s, &s, TTestVariant::Welch).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
    }

    #[test]
    fn shifted_by_one() {
        let r = t_test(&[1., 2., 3., 4., 5.], &[2., 3., 4., 5., 6.], TTestVariant::Welch).unwrap();
        assert!((r.t + 1.0).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
        assert!((r.p - 0.34659350708733416).abs() < 1e-9, "{}", r.p);
    }

    #[test]
    fn student_uses_pooled_df() {
        let r = t_test(&[1., 2., 3.], &[2., 4., 6., 8.], TTestVariant::Student).unwrap();
        assert_eq!(r.df, 5.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(t_test(&[1.0], &[1.0, 2.0], TTestVariant::Welch), Err(Error::DegenerateSample(_))));
        assert!(matches!(t_test(&[1.0, 1.0], &[2.0, 2.0], TTestVariant::Student), Err(Error::DegenerateSample(_))));
        // one constant sample is fine
        assert!(t_test(&[1.0, 1.0], &[2.0, 3.0], TTestVariant::Welch).is_ok());
    }

    #[test]
    fn star_boundaries_are_strict() {
        assert_eq!(stars(0.05), "");
        assert_eq!(stars(0.049_999), "*");
        assert_eq!(stars(0.01), "*");
        assert_eq!(stars(0.001), "**");
        assert_eq!(stars(0.000_999), "***");
        assert_eq!(stars(1.0), "");
    }

    #[test]
    fn t_of_four_with_sixty_df_is_three_stars() {
        let p = two_sided_p(4.0, 60.0);
        assert!(p < 0.001 && p > 1.0e-4, "{p}");
        assert_eq!(stars(p), "***");
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 2..30)
    }

    proptest! {
        #[test]
        fn swapping_samples_negates_t(a in sample(), b in sample(), student in any::<bool>()) {
            let v = if student { TTestVariant::Student } else { TTestVariant::Welch };
            if let (Ok(x), Ok(y)) = (t_test(&a, &b, v), t_test(&b, &a, v)) {
                prop_assert_eq!(x.t, -y.t);
                prop_assert_eq!(x.p, y.p);
                prop_assert_eq!(x.df, y.df);
            }
        }

        #[test]
        fn positive_scaling_keeps_the_test(a in sample(), b in sample(), c in 0.01f64..100.0, student in any::<bool>()) {
            let v = if student { TTestVariant::Student } else { TTestVariant::Welch };
            let sa: Vec<f64> = a.iter().map(|x| x * c).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * c).collect();
            if let (Ok(x), Ok(y)) = (t_test(&a, &b, v), t_test(&sa, &sb, v)) {
                prop_assert!((x.t - y.t).abs() <= 1e-9 * x.t.abs().max(1.0));
                prop_assert!((x.p - y.p).abs() <= 1e-9);
                let near_threshold = [0.05, 0.01, 0.001].iter().any(|th| (x.p - th).abs() < 1e-8);
                if !near_threshold {
                    prop_assert_eq!(stars(x.p), stars(y.p));
                }
            }
        }

        #[test]
        fn p_in_unit_interval_and_monotone(t in 0.0f64..20.0, dt in 0.001f64..5.0, df in 1.0f64..500.0) {
            let p0 = two_sided_p(t, df);
            let p1 = two_sided_p(t + dt, df);
            prop_assert!(p0 > 0.0 && p0 <= 1.0);
            prop_assert!(p1 <= p0);
        }
    }
}
