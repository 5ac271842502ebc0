use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metric::TOL;

/// A nondecreasing function on `[0, ∞)` tending to infinity.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlFn {
    /// `a·t + b` with `a > 0`.
    Affine { a: f64, b: f64 },
    /// Linear interpolation through `points` (constant before the first),
    /// continued with `slope > 0` after the last.
    Table { points: Vec<(f64, f64)>, slope: f64 },
}

impl ControlFn {
    pub fn affine(a: f64, b: f64) -> Result<ControlFn> {
        let f = ControlFn::Affine { a, b };
        f.validate()?;
        Ok(f)
    }

    pub fn table(points: Vec<(f64, f64)>, slope: f64) -> Result<ControlFn> {
        let f = ControlFn::Table { points, slope };
        f.validate()?;
        Ok(f)
    }

    pub fn identity() -> ControlFn {
        ControlFn::Affine { a: 1.0, b: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ControlFn::Affine { a, b } => {
                if !(a.is_finite() && b.is_finite() && *a > 0.0) {
                    return Err(invalid(format!("affine control needs a > 0, got a={a}, b={b}")));
                }
            }
            ControlFn::Table { points, slope } => {
                if points.is_empty() {
                    return Err(invalid("control table needs at least one sample"));
                }
                if !(slope.is_finite() && *slope > 0.0) {
                    return Err(invalid(format!("terminal slope must be positive, got {slope}")));
                }
                if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite() || *t < 0.0) {
                    return Err(invalid("control samples must be finite with t >= 0"));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(invalid("control sample points must increase strictly"));
                    }
                    if w[1].1 < w[0].1 {
                        return Err(invalid("control table must be nondecreasing"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ControlFn::Affine { a, b } => a * t + b,
            ControlFn::Table { points, slope } => {
                let (t0, v0) = points[0];
                if t <= t0 {
                    return v0;
                }
                for w in points.windows(2) {
                    let ((ta, va), (tb, vb)) = (w[0], w[1]);
                    if t <= tb {
                        return va + (vb - va) * (t - ta) / (tb - ta);
                    }
                }
                let (tl, vl) = points[points.len() - 1];
                vl + slope * (t - tl)
            }
        }
    }

    /// The same function plus a constant.
    pub fn shifted(&self, by: f64) -> ControlFn {
        match self {
            ControlFn::Affine { a, b } => ControlFn::Affine { a: *a, b: b + by },
            ControlFn::Table { points, slope } => ControlFn::Table {
                points: points.iter().map(|&(t, v)| (t, v + by)).collect(),
                slope: *slope,
            },
        }
    }
}

impl fmt::Display for ControlFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlFn::Affine { a, b } => write!(f, "affine:{a},{b}"),
            ControlFn::Table { points, slope } => {
                f.write_str("table:")?;
                for (i, (t, v)) in points.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "({t},{v})")?;
                }
                write!(f, ",{slope}")
            }
        }
    }
}

fn number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| invalid(format!("not a number: {s:?}")))
}

impl FromStr for ControlFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<ControlFn> {
        let s = s.trim();
        if let Some(body) = s.strip_prefix("affine:") {
            let (a, b) = body
                .split_once(',')
                .ok_or_else(|| invalid("affine control is written affine:a,b"))?;
            return ControlFn::affine(number(a)?, number(b)?);
        }
        if let Some(body) = s.strip_prefix("table:") {
            let close = body
                .rfind(')')
                .ok_or_else(|| invalid("table control is written table:(t,v);...,slope"))?;
            let slope = body[close + 1..]
                .trim()
                .strip_prefix(',')
                .ok_or_else(|| invalid("table control needs a terminal slope"))?;
            let points = body[..=close]
                .split(';')
                .map(|p| {
                    let inner = p
                        .trim()
                        .strip_prefix('(')
                        .and_then(|p| p.strip_suffix(')'))
                        .ok_or_else(|| invalid(format!("bad table sample {p:?}")))?;
                    let (t, v) = inner
                        .split_once(',')
                        .ok_or_else(|| invalid(format!("bad table sample {p:?}")))?;
                    Ok((number(t)?, number(v)?))
                })
                .collect::<Result<Vec<_>>>()?;
            return ControlFn::table(points, number(slope)?);
        }
        Err(invalid(format!("unknown control {s:?}; use affine:a,b or table:...")))
    }
}

/// Upper control, lower control and density radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ControlFile", into = "ControlFile")]
pub struct ControlData {
    pub rho_plus: ControlFn,
    pub rho_minus: ControlFn,
    pub c: f64,
}

#[derive(Serialize, Deserialize)]
struct ControlFile {
    rho_plus: String,
    rho_minus: String,
    c: f64,
}

impl TryFrom<ControlFile> for ControlData {
    type Error = Error;

    fn try_from(f: ControlFile) -> Result<Self> {
        ControlData::new(f.rho_plus.parse()?, f.rho_minus.parse()?, f.c)
    }
}

impl From<ControlData> for ControlFile {
    fn from(c: ControlData) -> Self {
        ControlFile {
            rho_plus: c.rho_plus.to_string(),
            rho_minus: c.rho_minus.to_string(),
            c: c.c,
        }
    }
}

impl ControlData {
    pub fn new(rho_plus: ControlFn, rho_minus: ControlFn, c: f64) -> Result<ControlData> {
        rho_plus.validate()?;
        rho_minus.validate()?;
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid(format!("density radius must be >= 0, got {c}")));
        }
        Ok(ControlData {
            rho_plus,
            rho_minus,
            c,
        })
    }

    /// `ρ₊ = ρ₋ = t`, `c = 0`.
    pub fn isometric() -> ControlData {
        ControlData {
            rho_plus: ControlFn::identity(),
            rho_minus: ControlFn::identity(),
            c: 0.0,
        }
    }

    pub fn upper(&self, t: f64) -> f64 {
        self.rho_plus.eval(t)
    }

    pub fn lower(&self, t: f64) -> f64 {
        self.rho_minus.eval(t)
    }

    /// `⌈ρ₊(r)⌉`, never negative.
    pub fn upper_ceil(&self, r: u32) -> u32 {
        (self.upper(r as f64) - TOL).ceil().max(0.0) as u32
    }

    /// Fails if `ρ₋(t) > ρ₊(t)` at one of the given distances.
    pub fn check_ordered(&self, distances: impl IntoIterator<Item = f64>) -> Result<()> {
        for t in distances {
            if self.lower(t) > self.upper(t) + TOL {
                return Err(invalid(format!(
                    "lower control exceeds upper control at t={t}: {} > {}",
                    self.lower(t),
                    self.upper(t)
                )));
            }
        }
        Ok(())
    }

    /// Controls satisfied by a map after its collisions are separated in a
    /// tag product: distances grow by at most one, and so does the density
    /// radius.
    pub fn tag_adjusted(&self) -> ControlData {
        ControlData {
            rho_plus: self.rho_plus.shifted(1.0),
            rho_minus: self.rho_minus.clone(),
            c: self.c + 1.0,
        }
    }
}

impl fmt::Display for ControlData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.rho_plus, self.rho_minus, self.c)
    }
}

impl FromStr for ControlData {
    type Err = Error;

    /// Parses `ρ₊/ρ₋/c`, e.g. `affine:2,0/affine:0.5,0/1`.
    fn from_str(s: &str) -> Result<ControlData> {
        let parts: Vec<&str> = s.split('/').collect();
        let [p, m, c] = parts[..] else {
            return Err(invalid("controls are written rho_plus/rho_minus/c"));
        };
        ControlData::new(p.parse()?, m.parse()?, number(c)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_roundtrip() {
        for s in [
            "affine:1,0/affine:1,0/0",
            "affine:2,0/affine:0.5,0/1",
            "table:(0,0);(1,3);(4,5),2/affine:1,-1/1.5",
        ] {
            let c: ControlData = s.parse().unwrap();
            assert_eq!(c.to_string(), s);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<ControlData>(&json).unwrap(), c);
        }
    }

    #[test]
    fn table_evaluation() {
        let f: ControlFn = "table:(1,2);(3,6),0.5".parse().unwrap();
        assert_eq!(f.eval(0.0), 2.0);
        assert_eq!(f.eval(2.0), 4.0);
        assert_eq!(f.eval(3.0), 6.0);
        assert_eq!(f.eval(5.0), 7.0);
    }

    #[test]
    fn rejects_bad_controls() {
        for s in [
            "affine:0,1",
            "affine:-1,0",
            "table:(0,1);(1,0),1",
            "table:(0,1);(0,2),1",
            "table:(0,0),0",
            "table:(0,0)",
            "linear:1",
        ] {
            assert!(s.parse::<ControlFn>().is_err(), "{s}");
        }
        assert!("affine:1,0/affine:1,0/-1".parse::<ControlData>().is_err());
        assert!("affine:1,0/affine:1,0".parse::<ControlData>().is_err());
    }

    #[test]
    fn ceiling_and_order() {
        let c: ControlData = "affine:1.5,0/affine:1,0/0".parse().unwrap();
        assert_eq!(c.upper_ceil(1), 2);
        assert_eq!(c.upper_ceil(2), 3);
        assert!(c.check_ordered([1.0, 2.0]).is_ok());
        let bad: ControlData = "affine:1,0/affine:2,0/0".parse().unwrap();
        assert!(bad.check_ordered([1.0]).is_err());
    }
}
