//! Solver results, traces and their text renderings.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::solve::Bounds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Vi,
    BviNaive,
    Bvi,
    Brtdp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Vi, Method::BviNaive, Method::Bvi, Method::Brtdp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vi => "vi",
            Method::BviNaive => "bvi-naive",
            Method::Bvi => "bvi",
            Method::Brtdp => "brtdp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected vi, bvi-naive, bvi or brtdp)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// `U(s₀) − L(s₀) < ε`.
    Converged,
    /// Classic value iteration: the max-norm change fell below δ.
    DeltaReached,
    /// Iteration or trial budget exhausted.
    IterationLimit,
}

/// One row of a BVI trace (`iter,L_init,U_init,gap,deflate_calls`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterRow {
    pub iter: u64,
    pub lower: f64,
    pub upper: f64,
    pub deflate_calls: u64,
}

/// One row of a BRTDP trace (`trial,visited,L_init,U_init`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialRow {
    pub trial: u64,
    pub visited: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Trace {
    Iterations(Vec<IterRow>),
    Trials(Vec<TrialRow>),
}

impl Trace {
    pub const ITER_HEADER: &'static str = "iter,L_init,U_init,gap,deflate_calls";
    pub const TRIAL_HEADER: &'static str = "trial,visited,L_init,U_init";

    pub fn len(&self) -> usize {
        match self {
            Trace::Iterations(r) => r.len(),
            Trace::Trials(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            Trace::Iterations(rows) => {
                out.push_str(Self::ITER_HEADER);
                out.push('\n');
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        r.iter,
                        fmt_sig(r.lower),
                        fmt_sig(r.upper),
                        fmt_sig(r.upper - r.lower),
                        r.deflate_calls
                    ));
                }
            }
            Trace::Trials(rows) => {
                out.push_str(Self::TRIAL_HEADER);
                out.push('\n');
                for r in rows {
                    out.push_str(&format!("{},{},{},{}\n", r.trial, r.visited, fmt_sig(r.lower), fmt_sig(r.upper)));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    /// Bellman sweeps for the iterative methods, trials for BRTDP.
    pub iterations: u64,
    /// `(L(s₀), U(s₀))`.
    pub bounds_at_initial: (f64, f64),
    pub epsilon: f64,
    pub converged: bool,
    pub stop: StopReason,
    /// Number of DEFLATE(T) applications.
    pub deflate_calls: u64,
    /// Candidate simple end components found in the last deflating phase,
    /// not counting target and sink.
    pub msec_count_last: usize,
    pub explored_states: usize,
    pub wall_time: Duration,
    pub trace: Option<Trace>,
    pub bounds: Bounds,
}

impl SolveReport {
    pub fn lower(&self) -> f64 {
        self.bounds_at_initial.0
    }

    pub fn upper(&self) -> f64 {
        self.bounds_at_initial.1
    }

    pub fn gap(&self) -> f64 {
        self.upper() - self.lower()
    }

    /// Midpoint of the final interval at the initial state.
    pub fn estimate(&self) -> f64 {
        0.5 * (self.lower() + self.upper())
    }

    pub fn summary_fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("method", self.method.name().to_string()),
            ("iterations", self.iterations.to_string()),
            ("L", fmt_sig(self.lower())),
            ("U", fmt_sig(self.upper())),
            ("gap", fmt_sig(self.gap())),
            ("time_ms", fmt_sig(self.wall_time.as_secs_f64() * 1e3)),
            ("explored", self.explored_states.to_string()),
            ("msecs", self.msec_count_last.to_string()),
            ("deflates", self.deflate_calls.to_string()),
        ]
    }

    /// The machine-readable `key=value` line.
    pub fn summary_line(&self) -> String {
        self.summary_fields().iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
    }
}

/// Formats like C's `%.12g`: twelve significant digits, trailing zeros
/// removed, exponent notation outside `[1e-5, 1e12)`.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(0.5), "0.5");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_sig(1e-8), "1e-08");
        assert_eq!(fmt_sig(1.5e-7), "1.5e-07");
        assert_eq!(fmt_sig(0.0001), "0.0001");
        assert_eq!(fmt_sig(123456.0), "123456");
        assert_eq!(fmt_sig(1e12), "1e+12");
        assert_eq!(fmt_sig(0.9999999999999), "1");
        assert_eq!(fmt_sig(-0.25), "-0.25");
    }

    #[test]
    fn methods_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("pi".parse::<Method>().is_err());
    }
}
