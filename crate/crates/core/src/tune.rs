//! Coarse-to-fine grid search for a single pooling parameter.
//!
//! Phase 1 walks from `start` in steps of `coarse_step` while the objective
//! does not decrease. If the very first upward step already decreases, it
//! walks downward instead. Phase 2 scans the bracket
//! `[best - coarse, best + coarse]` (clipped to bounds) in steps of
//! `fine_step`. The best evaluated point wins; ties go to the point evaluated
//! first.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Protocol;
use crate::pooling::PoolingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TunedParameter {
    #[serde(rename = "p")]
    P,
    #[serde(rename = "p_r")]
    RegionalPower,
    #[serde(rename = "p_ms")]
    ScalePower,
    #[serde(rename = "alpha")]
    Alpha,
}

impl TunedParameter {
    pub fn apply(&self, cfg: &mut PoolingConfig, value: f64) {
        match self {
            TunedParameter::P => cfg.p = value,
            TunedParameter::RegionalPower => cfg.p_r = value,
            TunedParameter::ScalePower => cfg.p_ms = value,
            TunedParameter::Alpha => cfg.alpha = value,
        }
    }
}

impl fmt::Display for TunedParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TunedParameter::P => "p",
            TunedParameter::RegionalPower => "p_r",
            TunedParameter::ScalePower => "p_ms",
            TunedParameter::Alpha => "alpha",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneSpec {
    pub parameter: TunedParameter,
    pub start: f64,
    pub coarse_step: f64,
    pub fine_step: f64,
    pub lower: f64,
    pub upper: f64,
    pub protocol: Protocol,
    /// Walk below `start` when the first upward step loses. Off reproduces
    /// a strictly upward walk.
    pub bidirectional: bool,
    /// Also try `+∞` (only meaningful for `p_ms`).
    pub include_infinity: bool,
}

impl TuneSpec {
    /// Defaults for each parameter. Powers start low and walk up; the ReLU
    /// threshold lives on a much finer scale.
    pub fn for_parameter(parameter: TunedParameter) -> Self {
        let base = TuneSpec {
            parameter,
            start: 1.0,
            coarse_step: 1.0,
            fine_step: 0.1,
            lower: 1.0,
            upper: 20.0,
            protocol: Protocol::Medium,
            bidirectional: true,
            include_infinity: false,
        };
        match parameter {
            TunedParameter::P => TuneSpec { start: 3.0, ..base },
            TunedParameter::RegionalPower => base,
            TunedParameter::ScalePower => TuneSpec {
                include_infinity: true,
                ..base
            },
            TunedParameter::Alpha => TuneSpec {
                start: 0.0,
                coarse_step: 0.01,
                fine_step: 0.001,
                lower: 0.0,
                upper: 0.2,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::EmptyBracket(format!(
                "bounds [{}, {}]",
                self.lower, self.upper
            )));
        }
        if !(self.start >= self.lower && self.start <= self.upper) {
            return Err(Error::EmptyBracket(format!(
                "start {} outside [{}, {}]",
                self.start, self.lower, self.upper
            )));
        }
        if !(self.fine_step > 0.0 && self.fine_step < self.coarse_step && self.coarse_step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < fine_step < coarse_step, got {} and {}",
                self.fine_step, self.coarse_step
            )));
        }
        Ok(())
    }
}

/// JSON form: only `parameter` is required, the rest falls back to
/// [`TuneSpec::for_parameter`].
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TuneSpecRepr {
    parameter: TunedParameter,
    start: Option<f64>,
    coarse_step: Option<f64>,
    fine_step: Option<f64>,
    lower: Option<f64>,
    upper: Option<f64>,
    protocol: Option<Protocol>,
    bidirectional: Option<bool>,
    include_infinity: Option<bool>,
}

impl<'de> Deserialize<'de> for TuneSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TuneSpecRepr::deserialize(d)?;
        let base = TuneSpec::for_parameter(r.parameter);
        Ok(TuneSpec {
            parameter: r.parameter,
            start: r.start.unwrap_or(base.start),
            coarse_step: r.coarse_step.unwrap_or(base.coarse_step),
            fine_step: r.fine_step.unwrap_or(base.fine_step),
            lower: r.lower.unwrap_or(base.lower),
            upper: r.upper.unwrap_or(base.upper),
            protocol: r.protocol.unwrap_or(base.protocol),
            bidirectional: r.bidirectional.unwrap_or(base.bidirectional),
            include_infinity: r.include_infinity.unwrap_or(base.include_infinity),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub value: f64,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best_value: f64,
    pub best_map: f64,
    /// Every evaluated point, in evaluation order.
    pub trace: Vec<TracePoint>,
}

impl TuneOutcome {
    /// `value,map` rows; infinity is written as `inf`.
    pub fn trace_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
        w.write_record(["value", "map"]).map_err(err)?;
        for p in &self.trace {
            let value = if p.value.is_infinite() {
                "inf".to_string()
            } else {
                p.value.to_string()
            };
            w.write_record([value, p.map.to_string()]).map_err(err)?;
        }
        w.into_inner()
            .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))
    }
}

struct Search<F> {
    objective: F,
    trace: Vec<TracePoint>,
    memo: HashMap<i64, f64>,
}

impl<F: FnMut(f64) -> Result<f64>> Search<F> {
    fn key(x: f64) -> i64 {
        if x.is_infinite() {
            i64::MAX
        } else {
            (x * 1e9).round() as i64
        }
    }

    fn eval(&mut self, x: f64) -> Result<f64> {
        if let Some(&v) = self.memo.get(&Self::key(x)) {
            return Ok(v);
        }
        let v = (self.objective)(x)?;
        if v.is_nan() {
            return Err(Error::InvalidConfig(format!("objective returned NaN at {x}")));
        }
        self.memo.insert(Self::key(x), v);
        self.trace.push(TracePoint { value: x, map: v });
        Ok(v)
    }

    /// Walks `start + i·step` (negative `step` walks down) until the
    /// objective drops or the bound is hit. Returns whether it moved.
    fn walk(&mut self, start: f64, f_start: f64, step: f64, bound: f64) -> Result<bool> {
        let mut cur_f = f_start;
        let mut cur = start;
        let mut moved = false;
        for i in 1.. {
            let raw = start + i as f64 * step;
            let x = if step > 0.0 { raw.min(bound) } else { raw.max(bound) };
            if x == cur {
                break;
            }
            let fx = self.eval(x)?;
            if fx < cur_f {
                break;
            }
            moved = true;
            cur = x;
            cur_f = fx;
        }
        Ok(moved)
    }

    fn best(&self) -> Option<TracePoint> {
        self.trace.iter().copied().fold(None, |best, p| match best {
            Some(b) if b.map >= p.map => Some(b),
            _ => Some(p),
        })
    }
}

pub fn tune_parameter<F>(spec: &TuneSpec, evaluate_at: F) -> Result<TuneOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    spec.validate()?;
    let mut s = Search {
        objective: evaluate_at,
        trace: Vec::new(),
        memo: HashMap::new(),
    };

    let f0 = s.eval(spec.start)?;
    let moved_up = s.walk(spec.start, f0, spec.coarse_step, spec.upper)?;
    if spec.bidirectional && !moved_up {
        s.walk(spec.start, f0, -spec.coarse_step, spec.lower)?;
    }
    let coarse_best = s.best().ok_or(Error::EmptyInput)?.value;

    let lo = (coarse_best - spec.coarse_step).max(spec.lower);
    let hi = (coarse_best + spec.coarse_step).min(spec.upper);
    if lo > hi {
        return Err(Error::EmptyBracket(format!("fine bracket [{lo}, {hi}]")));
    }
    let n = (spec.coarse_step / spec.fine_step).round() as i64;
    let eps = spec.fine_step * 1e-6;
    let mut grid: Vec<f64> = (-n..=n)
        .map(|j| coarse_best + j as f64 * spec.fine_step)
        .filter(|&x| x >= lo - eps && x <= hi + eps)
        .map(|x| x.clamp(spec.lower, spec.upper))
        .collect();
    if grid.first().is_none_or(|&x| x - lo > eps) {
        grid.insert(0, lo);
    }
    if grid.last().is_none_or(|&x| hi - x > eps) {
        grid.push(hi);
    }
    for x in grid {
        s.eval(x)?;
    }
    if spec.include_infinity {
        s.eval(f64::INFINITY)?;
    }

    let best = s.best().ok_or(Error::EmptyInput)?;
    Ok(TuneOutcome {
        best_value: best.value,
        best_map: best.map,
        trace: s.trace,
    })
}
