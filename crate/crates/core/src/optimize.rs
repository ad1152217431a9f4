//! Scalar helpers generic over the float type: golden-section minimization
//! and least-squares line fits.

use num_traits::Float;

/// Outcome of [`golden_section`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldenResult<T> {
    pub x: T,
    pub fx: T,
    pub evaluations: usize,
    /// The minimizer sits against the left or right end of the bracket.
    pub at_lower: bool,
    pub at_upper: bool,
}

/// Golden-section search for the minimum of a unimodal (quasiconvex) `f`
/// on `[a, b]`, stopping when the bracket is narrower than `xtol`.
///
/// When `f` is flat at the minimum, the smallest evaluated `x` whose value
/// is within `1e-9` (relative) of the best value is returned.
pub fn golden_section<T, E, F>(mut f: F, a: T, b: T, xtol: T, max_evals: usize) -> Result<GoldenResult<T>, E>
where
    T: Float,
    F: FnMut(T) -> Result<T, E>,
{
    let two = T::one() + T::one();
    let five = two * two + T::one();
    let resp = (T::from(3.0).unwrap() - five.sqrt()) / two;
    let (a0, b0) = (a, b);
    let (mut a, mut b) = (a, b);
    let mut x1 = a + resp * (b - a);
    let mut x2 = b - resp * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut seen = vec![(x1, f1), (x2, f2)];
    while seen.len() < max_evals && (b - a) > xtol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + resp * (b - a);
            f1 = f(x1)?;
            seen.push((x1, f1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - resp * (b - a);
            f2 = f(x2)?;
            seen.push((x2, f2));
        }
    }
    let best = seen
        .iter()
        .map(|p| p.1)
        .fold(T::infinity(), |m, v| if v < m { v } else { m });
    let slack = T::from(1e-9).unwrap() * best.abs().max(T::min_positive_value());
    let (x, fx) = seen
        .iter()
        .filter(|p| p.1 <= best + slack)
        .fold((T::infinity(), best), |acc, p| if p.0 < acc.0 { *p } else { acc });
    let edge = (b0 - a0) * T::from(1e-3).unwrap();
    Ok(GoldenResult {
        x,
        fx,
        evaluations: seen.len(),
        at_lower: x - a0 <= edge.max(xtol * two),
        at_upper: b0 - x <= edge.max(xtol * two),
    })
}

/// Ordinary least-squares line `y = slope t + intercept` with the rms residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    pub rms: T,
}

pub fn fit_line<T: Float>(t: &[T], y: &[T]) -> Option<LineFit<T>> {
    let n = t.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = T::from(n).unwrap();
    let tm = t.iter().fold(T::zero(), |s, &v| s + v) / nf;
    let ym = y.iter().fold(T::zero(), |s, &v| s + v) / nf;
    let mut stt = T::zero();
    let mut sty = T::zero();
    for (&ti, &yi) in t.iter().zip(y) {
        stt = stt + (ti - tm) * (ti - tm);
        sty = sty + (ti - tm) * (yi - ym);
    }
    if stt == T::zero() {
        return None;
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let ss = t.iter().zip(y).fold(T::zero(), |s, (&ti, &yi)| {
        let r = yi - (slope * ti + intercept);
        s + r * r
    });
    Some(LineFit {
        slope,
        intercept,
        rms: (ss / nf).sqrt(),
    })
}
