//! Valuation distributions, virtual values and ironing.
//!
//! Every bidder's value is drawn independently from a
//! [`ValuationDistribution`]. The revenue-relevant transform of a value is
//! its virtual value `v - (1 - F(v)) / f(v)`; when that function is not
//! monotone it is replaced by the slope of the least concave majorant of
//! the revenue curve `R(q) = q * F^{-1}(1 - q)` in quantile space
//! ([`ValuationDistribution::iron`]).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of quantile grid cells used for ironing.
pub const DEFAULT_GRID_SIZE: usize = 4096;

/// Default rank-scaled perturbation that makes ironed curves strictly increasing.
pub const DEFAULT_STRICTNESS: f64 = 1e-9;

const MIN_GRID_SIZE: usize = 16;
const MHR_TOLERANCE: f64 = 1e-9;

/// Serializable description of a distribution, as found in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionKind {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Exponential with the given rate on `[0, hi]`; `hi` absent means unbounded.
    TruncatedExponential {
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
    /// Continuous CDF interpolating `(value, cdf)` breakpoints.
    PiecewiseLinearCdf { breakpoints: Vec<[f64; 2]> },
    /// Step CDF of observed values.
    Empirical { values: Vec<f64> },
}

/// A validated one-dimensional valuation distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionKind", into = "DistributionKind")]
pub struct ValuationDistribution {
    kind: DistributionKind,
}

impl TryFrom<DistributionKind> for ValuationDistribution {
    type Error = Error;

    fn try_from(kind: DistributionKind) -> Result<Self> {
        ValuationDistribution::new(kind)
    }
}

impl From<ValuationDistribution> for DistributionKind {
    fn from(d: ValuationDistribution) -> Self {
        d.kind
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidDistribution(msg.into())
}

impl ValuationDistribution {
    pub fn new(kind: DistributionKind) -> Result<Self> {
        let kind = match kind {
            DistributionKind::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 {
                    return Err(bad(format!("uniform bounds must be finite and nonnegative, got [{lo}, {hi}]")));
                }
                if lo >= hi {
                    return Err(bad(format!("degenerate uniform support [{lo}, {hi}]")));
                }
                DistributionKind::Uniform { lo, hi }
            }
            DistributionKind::TruncatedExponential { rate, hi } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(bad(format!("exponential rate must be positive, got {rate}")));
                }
                let hi = match hi {
                    Some(h) if h.is_infinite() && h > 0.0 => None,
                    Some(h) if !(h.is_finite() && h > 0.0) => {
                        return Err(bad(format!("exponential truncation point must be positive, got {h}")))
                    }
                    other => other,
                };
                DistributionKind::TruncatedExponential { rate, hi }
            }
            DistributionKind::PiecewiseLinearCdf { breakpoints } => {
                DistributionKind::PiecewiseLinearCdf { breakpoints: normalize_breakpoints(breakpoints)? }
            }
            DistributionKind::Empirical { mut values } => {
                if values.is_empty() {
                    return Err(bad("empirical distribution needs at least one value"));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(bad(format!("empirical values must be finite and nonnegative, got {v}")));
                }
                values.sort_by(f64::total_cmp);
                DistributionKind::Empirical { values }
            }
        };
        Ok(ValuationDistribution { kind })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(DistributionKind::Uniform { lo, hi })
    }

    /// Unbounded exponential distribution.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(DistributionKind::TruncatedExponential { rate, hi: None })
    }

    pub fn truncated_exponential(rate: f64, hi: f64) -> Result<Self> {
        Self::new(DistributionKind::TruncatedExponential { rate, hi: Some(hi) })
    }

    pub fn piecewise_linear_cdf(breakpoints: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(DistributionKind::PiecewiseLinearCdf { breakpoints })
    }

    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        Self::new(DistributionKind::Empirical { values })
    }

    /// Equal-weight mixture of uniforms on disjoint intervals, encoded as a
    /// piecewise-linear CDF.
    pub fn uniform_mixture(intervals: &[(f64, f64)]) -> Result<Self> {
        if intervals.is_empty() {
            return Err(bad("mixture needs at least one interval"));
        }
        let w = 1.0 / intervals.len() as f64;
        let mut bps: Vec<[f64; 2]> = Vec::with_capacity(2 * intervals.len());
        let mut mass = 0.0;
        for (k, &(lo, hi)) in intervals.iter().enumerate() {
            if bps.last().is_none_or(|last| last[0] < lo) {
                bps.push([lo, mass]);
            }
            mass = if k + 1 == intervals.len() { 1.0 } else { mass + w };
            bps.push([hi, mass]);
        }
        Self::piecewise_linear_cdf(bps)
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn support_lo(&self) -> f64 {
        match &self.kind {
            DistributionKind::Uniform { lo, .. } => *lo,
            DistributionKind::TruncatedExponential { .. } => 0.0,
            DistributionKind::PiecewiseLinearCdf { breakpoints } => breakpoints[0][0],
            DistributionKind::Empirical { values } => values[0],
        }
    }

    /// Upper end of the support; `f64::INFINITY` for unbounded distributions.
    pub fn support_hi(&self) -> f64 {
        match &self.kind {
            DistributionKind::Uniform { hi, .. } => *hi,
            DistributionKind::TruncatedExponential { hi, .. } => hi.unwrap_or(f64::INFINITY),
            DistributionKind::PiecewiseLinearCdf { breakpoints } => breakpoints[breakpoints.len() - 1][0],
            DistributionKind::Empirical { values } => values[values.len() - 1],
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.support_hi().is_finite()
    }

    /// True when all mass sits on a single point.
    pub fn is_point_mass(&self) -> bool {
        self.support_lo() == self.support_hi()
    }

    pub fn cdf(&self, v: f64) -> f64 {
        match &self.kind {
            DistributionKind::Uniform { lo, hi } => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            DistributionKind::TruncatedExponential { rate, hi } => {
                if v <= 0.0 {
                    return 0.0;
                }
                match hi {
                    Some(h) if v >= *h => 1.0,
                    Some(h) => (-(-rate * v).exp_m1() / -(-rate * h).exp_m1()).min(1.0),
                    None => -(-rate * v).exp_m1(),
                }
            }
            DistributionKind::PiecewiseLinearCdf { breakpoints } => {
                let last = breakpoints.len() - 1;
                if v <= breakpoints[0][0] {
                    return 0.0;
                }
                if v >= breakpoints[last][0] {
                    return 1.0;
                }
                let k = breakpoints.partition_point(|b| b[0] <= v) - 1;
                let [v0, f0] = breakpoints[k];
                let [v1, f1] = breakpoints[k + 1];
                f0 + (v - v0) / (v1 - v0) * (f1 - f0)
            }
            DistributionKind::Empirical { values } => {
                values.partition_point(|x| *x <= v) as f64 / values.len() as f64
            }
        }
    }

    /// Probability of a value strictly above `v`, computed without cancellation
    /// where a closed form exists.
    pub fn survival(&self, v: f64) -> f64 {
        match &self.kind {
            DistributionKind::Uniform { lo, hi } => ((hi - v) / (hi - lo)).clamp(0.0, 1.0),
            DistributionKind::TruncatedExponential { rate, hi } => {
                if v <= 0.0 {
                    return 1.0;
                }
                match hi {
                    Some(h) if v >= *h => 0.0,
                    Some(h) => ((-rate * v).exp() - (-rate * h).exp()) / -(-rate * h).exp_m1(),
                    None => (-rate * v).exp(),
                }
            }
            _ => 1.0 - self.cdf(v),
        }
    }

    /// Density at `v`; `None` for distributions without one (empirical).
    ///
    /// Piecewise-linear densities are right-continuous, except at the top
    /// breakpoint where the last segment's slope is used.
    pub fn pdf(&self, v: f64) -> Option<f64> {
        match &self.kind {
            DistributionKind::Uniform { lo, hi } => {
                Some(if v >= *lo && v <= *hi { 1.0 / (hi - lo) } else { 0.0 })
            }
            DistributionKind::TruncatedExponential { rate, hi } => {
                if v < 0.0 || hi.is_some_and(|h| v > h) {
                    return Some(0.0);
                }
                let z = hi.map_or(1.0, |h| -(-rate * h).exp_m1());
                Some(rate * (-rate * v).exp() / z)
            }
            DistributionKind::PiecewiseLinearCdf { breakpoints } => {
                let last = breakpoints.len() - 1;
                if v < breakpoints[0][0] || v > breakpoints[last][0] {
                    return Some(0.0);
                }
                let k = (breakpoints.partition_point(|b| b[0] <= v) - 1).min(last - 1);
                let [v0, f0] = breakpoints[k];
                let [v1, f1] = breakpoints[k + 1];
                Some((f1 - f0) / (v1 - v0))
            }
            DistributionKind::Empirical { .. } => None,
        }
    }

    /// Least `v` with `cdf(v) >= u`. For empirical distributions a `u` falling
    /// exactly between two atoms returns their midpoint.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.kind {
            DistributionKind::Uniform { lo, hi } => lo + u * (hi - lo),
            DistributionKind::TruncatedExponential { rate, hi } => {
                let z = hi.map_or(1.0, |h| -(-rate * h).exp_m1());
                let v = -(-u * z).ln_1p() / rate;
                match hi {
                    Some(h) => v.min(*h),
                    None => v,
                }
            }
            DistributionKind::PiecewiseLinearCdf { breakpoints } => {
                if u <= 0.0 {
                    return breakpoints[0][0];
                }
                let j = breakpoints.partition_point(|b| b[1] < u).min(breakpoints.len() - 1);
                let [v0, f0] = breakpoints[j - 1];
                let [v1, f1] = breakpoints[j];
                (v0 + (u - f0) / (f1 - f0) * (v1 - v0)).clamp(v0, v1)
            }
            DistributionKind::Empirical { values } => {
                let m = values.len();
                let x = u * m as f64;
                let k = x.ceil();
                if k == x && k >= 1.0 && (k as usize) < m {
                    let k = k as usize;
                    return 0.5 * (values[k - 1] + values[k]);
                }
                values[(k as usize).clamp(1, m) - 1]
            }
        }
    }

    /// Largest `v` with `cdf(v) <= u`; differs from [`Self::quantile`] only
    /// where the CDF is flat, i.e. across gaps in the support.
    fn upper_quantile(&self, u: f64) -> f64 {
        match &self.kind {
            DistributionKind::PiecewiseLinearCdf { breakpoints } if u > 0.0 && u < 1.0 => {
                let j = breakpoints.partition_point(|b| b[1] <= u).clamp(1, breakpoints.len() - 1);
                let [v0, f0] = breakpoints[j - 1];
                let [v1, f1] = breakpoints[j];
                (v0 + (u - f0) / (f1 - f0) * (v1 - v0)).clamp(v0, v1)
            }
            _ => self.quantile(u),
        }
    }

    /// Inverse-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    /// Raw virtual value `v - (1 - F(v)) / f(v)`.
    pub fn virtual_value(&self, v: f64) -> Result<f64> {
        if !(v >= self.support_lo() && v <= self.support_hi()) {
            return Err(Error::InvalidParameter(format!(
                "value {v} outside support [{}, {}]",
                self.support_lo(),
                self.support_hi()
            )));
        }
        if let DistributionKind::TruncatedExponential { rate, hi } = &self.kind {
            // (1 - F) / f has the closed form (1 - e^{-rate (hi - v)}) / rate.
            let inv_hazard = match hi {
                Some(h) => -(-rate * (h - v)).exp_m1() / rate,
                None => 1.0 / rate,
            };
            return Ok(v - inv_hazard);
        }
        match self.pdf(v) {
            Some(f) if f > 0.0 => Ok(v - self.survival(v) / f),
            _ => Err(Error::UndefinedVirtualValue(v)),
        }
    }

    /// Hazard rate `f / (1 - F)` where both are positive.
    pub fn hazard_rate(&self, v: f64) -> Option<f64> {
        let s = self.survival(v);
        let f = self.pdf(v)?;
        (s > 1e-12).then(|| f / s)
    }

    /// True iff the hazard rate is nondecreasing on a uniform value grid.
    /// Empirical distributions have no density and are never MHR.
    pub fn check_mhr(&self, grid_size: usize) -> bool {
        if matches!(self.kind, DistributionKind::Empirical { .. }) {
            return false;
        }
        let g = grid_size.max(MIN_GRID_SIZE);
        let lo = self.support_lo();
        let top = if self.is_bounded() {
            self.support_hi()
        } else {
            self.quantile(1.0 - 1.0 / g as f64)
        };
        let mut prev: Option<f64> = None;
        for k in 0..g {
            let v = lo + (top - lo) * k as f64 / g as f64;
            let Some(h) = self.hazard_rate(v) else { continue };
            if let Some(p) = prev {
                if h < p - MHR_TOLERANCE * p.abs().max(1.0) {
                    return false;
                }
            }
            prev = Some(h);
        }
        true
    }

    /// Irons the virtual value function on a `grid_size`-cell quantile grid
    /// with the default strictness perturbation.
    pub fn iron(&self, grid_size: usize) -> Result<VirtualValueCurve> {
        self.iron_with(grid_size, DEFAULT_STRICTNESS)
    }

    pub fn iron_with(&self, grid_size: usize, strictness: f64) -> Result<VirtualValueCurve> {
        if grid_size < MIN_GRID_SIZE {
            return Err(Error::InvalidParameter(format!(
                "ironing grid must have at least {MIN_GRID_SIZE} cells, got {grid_size}"
            )));
        }
        if !(strictness.is_finite() && strictness >= 0.0) {
            return Err(Error::InvalidParameter(format!("strictness must be nonnegative, got {strictness}")));
        }
        VirtualValueCurve::build(self.clone(), grid_size, strictness)
    }
}

fn normalize_breakpoints(mut bps: Vec<[f64; 2]>) -> Result<Vec<[f64; 2]>> {
    if bps.len() < 2 {
        return Err(bad("piecewise-linear CDF needs at least two breakpoints"));
    }
    for w in bps.windows(2) {
        if !(w[0][0] < w[1][0]) {
            return Err(bad("breakpoint values must be strictly increasing"));
        }
        if w[1][1] < w[0][1] {
            return Err(bad("breakpoint CDF values must be nondecreasing"));
        }
    }
    if bps.iter().any(|b| !b[0].is_finite() || b[0] < 0.0 || !(0.0..=1.0 + 1e-9).contains(&b[1])) {
        return Err(bad("breakpoints must have finite nonnegative values and CDF values in [0, 1]"));
    }
    let first = bps[0][1];
    let last = bps[bps.len() - 1][1];
    if first.abs() > 1e-9 || (last - 1.0).abs() > 1e-9 {
        return Err(bad("piecewise-linear CDF must start at 0 and end at 1"));
    }
    bps[0][1] = 0.0;
    let n = bps.len();
    bps[n - 1][1] = 1.0;
    // Trim massless segments at either end so the support is tight.
    let start = bps.iter().rposition(|b| b[1] == 0.0).unwrap_or(0);
    let end = bps.iter().position(|b| b[1] >= 1.0).unwrap_or(n - 1);
    Ok(bps[start..=end].to_vec())
}

/// Ironed virtual value function of one distribution.
///
/// `quantile_grid[k]` is the midpoint of grid cell `k` (quantile `q` is the
/// sale probability `1 - F(v)`), and `ironed_phi[k]` the slope of the concave
/// majorant on that cell plus the strictness term `strictness_epsilon * (G - 1 - k)`.
/// Evaluation at a value uses the closed-form virtual value outside ironed
/// intervals when a density exists, and the majorant slope elsewhere.
#[derive(Debug, Clone)]
pub struct VirtualValueCurve {
    dist: ValuationDistribution,
    grid_size: usize,
    pub quantile_grid: Vec<f64>,
    pub ironed_phi: Vec<f64>,
    pub strictness_epsilon: f64,
    revenue: Vec<f64>,
    majorant: Vec<f64>,
    /// Quantile intervals `[q_a, q_b)` on which the majorant lies strictly above the revenue curve.
    ironed_intervals: Vec<(f64, f64)>,
    degenerate: bool,
}

impl VirtualValueCurve {
    fn build(dist: ValuationDistribution, g: usize, strictness: f64) -> Result<Self> {
        let gf = g as f64;
        let qs: Vec<f64> = (0..=g).map(|k| k as f64 / gf).collect();
        let revenue: Vec<f64> = qs
            .iter()
            .map(|&q| if q == 0.0 { 0.0 } else { q * dist.upper_quantile(1.0 - q) })
            .collect();
        if revenue.iter().any(|r| !r.is_finite()) {
            return Err(bad("revenue curve is not finite on the quantile grid"));
        }

        let hull = upper_hull(&qs, &revenue);
        let mut majorant = vec![0.0; g + 1];
        for w in hull.windows(2) {
            let (a, b) = (w[0], w[1]);
            let slope = (revenue[b] - revenue[a]) / (qs[b] - qs[a]);
            for k in a..=b {
                majorant[k] = revenue[a] + slope * (qs[k] - qs[a]);
            }
        }

        let scale = revenue.iter().fold(1.0f64, |m, r| m.max(r.abs()));
        let tol = 1e-10 * scale;
        let mut ironed_intervals = Vec::new();
        for w in hull.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b > a + 1 && (a + 1..b).any(|k| majorant[k] - revenue[k] > tol) {
                ironed_intervals.push((qs[a], qs[b]));
            }
        }

        let quantile_grid: Vec<f64> = (0..g).map(|k| (k as f64 + 0.5) / gf).collect();
        let ironed_phi: Vec<f64> = (0..g)
            .map(|k| (majorant[k + 1] - majorant[k]) * gf + strictness * (g - 1 - k) as f64)
            .collect();

        Ok(VirtualValueCurve {
            degenerate: dist.is_point_mass(),
            dist,
            grid_size: g,
            quantile_grid,
            ironed_phi,
            strictness_epsilon: strictness,
            revenue,
            majorant,
            ironed_intervals,
        })
    }

    pub fn distribution(&self) -> &ValuationDistribution {
        &self.dist
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Point-mass distributions iron to the constant curve at the atom.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Revenue curve `R(k / G)` for `k = 0..=G`.
    pub fn revenue_curve(&self) -> &[f64] {
        &self.revenue
    }

    /// Least concave majorant of the revenue curve on the same grid.
    pub fn majorant(&self) -> &[f64] {
        &self.majorant
    }

    pub fn ironed_intervals(&self) -> &[(f64, f64)] {
        &self.ironed_intervals
    }

    fn strictness_at(&self, q: f64) -> f64 {
        self.strictness_epsilon * (self.grid_size as f64 * (1.0 - q) - 0.5).max(0.0)
    }

    fn in_ironed_interval(&self, q: f64) -> bool {
        let k = self.ironed_intervals.partition_point(|iv| iv.1 <= q);
        k < self.ironed_intervals.len() && self.ironed_intervals[k].0 <= q
    }

    fn raw_slope(&self, k: usize) -> f64 {
        self.ironed_phi[k] - self.strictness_epsilon * (self.grid_size - 1 - k) as f64
    }

    /// Majorant slope at quantile `q`, interpolated between cell midpoints.
    fn interpolated_slope(&self, q: f64) -> f64 {
        let g = self.grid_size;
        let x = q * g as f64 - 0.5;
        if x <= 0.0 {
            return self.raw_slope(0);
        }
        if x >= (g - 1) as f64 {
            return self.raw_slope(g - 1);
        }
        let k = x.floor() as usize;
        let frac = x - k as f64;
        self.raw_slope(k) * (1.0 - frac) + self.raw_slope(k + 1) * frac
    }

    /// Ironed virtual value at `v`, clamped to the support.
    pub fn ironed_value(&self, v: f64) -> f64 {
        if self.degenerate {
            return self.dist.support_lo();
        }
        let v = v.clamp(self.dist.support_lo(), self.dist.support_hi());
        let q = self.dist.survival(v);
        let base = if self.in_ironed_interval(q) {
            let k = ((q * self.grid_size as f64) as usize).min(self.grid_size - 1);
            self.raw_slope(k)
        } else {
            match self.dist.virtual_value(v) {
                Ok(phi) => phi,
                Err(_) => self.interpolated_slope(q),
            }
        };
        base + self.strictness_at(q)
    }

    /// Least value whose ironed virtual value reaches `target`, found by
    /// bisection. Returns the support bottom when `target` is at or below the
    /// curve's minimum and the support top when it exceeds the maximum
    /// (`f64::INFINITY` for unbounded supports that never reach it).
    pub fn inverse_virtual(&self, target: f64) -> f64 {
        let lo = self.dist.support_lo();
        if self.ironed_value(lo) >= target {
            return lo;
        }
        let hi = if self.dist.is_bounded() {
            let hi = self.dist.support_hi();
            if self.ironed_value(hi) < target {
                return hi;
            }
            hi
        } else {
            let mut h = self.dist.quantile(0.5).max(lo + 1.0);
            while self.ironed_value(h) < target {
                h *= 2.0;
                if h > 1e300 {
                    return f64::INFINITY;
                }
            }
            h
        };
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.ironed_value(mid) >= target {
                b = mid;
            } else {
                a = mid;
            }
        }
        b
    }
}

/// Indices of the upper convex hull of points sorted by x (monotone chain).
fn upper_hull(xs: &[f64], ys: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for p in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (xs[b] - xs[a]) * (ys[p] - ys[a]) - (ys[b] - ys[a]) * (xs[p] - xs[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Independent product of per-bidder distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPrior {
    bidders: Vec<ValuationDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h_bound: Option<f64>,
}

impl ProductPrior {
    pub fn new(bidders: Vec<ValuationDistribution>, h_bound: Option<f64>) -> Result<Self> {
        if bidders.is_empty() {
            return Err(bad("prior needs at least one bidder"));
        }
        if let Some(h) = h_bound {
            if !(h.is_finite() && h > 0.0) {
                return Err(bad(format!("support bound H must be positive and finite, got {h}")));
            }
            for (i, d) in bidders.iter().enumerate() {
                if d.support_hi() > h {
                    return Err(bad(format!(
                        "bidder {i} has support top {} above H = {h}",
                        d.support_hi()
                    )));
                }
            }
        }
        Ok(ProductPrior { bidders, h_bound })
    }

    /// `n` copies of one distribution, with `H` set to its support top when bounded.
    pub fn iid(dist: ValuationDistribution, n: usize) -> Result<Self> {
        let h = dist.is_bounded().then(|| dist.support_hi());
        Self::new(vec![dist; n], h)
    }

    /// Product prior with `H` taken as the largest bidder support top (absent if any is unbounded).
    pub fn with_tight_bound(bidders: Vec<ValuationDistribution>) -> Result<Self> {
        let h = bidders
            .iter()
            .map(|d| d.support_hi())
            .try_fold(0.0f64, |m, h| h.is_finite().then(|| m.max(h)));
        Self::new(bidders, h)
    }

    pub fn n(&self) -> usize {
        self.bidders.len()
    }

    pub fn bidders(&self) -> &[ValuationDistribution] {
        &self.bidders
    }

    pub fn bidder(&self, i: usize) -> &ValuationDistribution {
        &self.bidders[i]
    }

    pub fn h_bound(&self) -> Option<f64> {
        self.h_bound
    }

    /// `H`, or a parameter error for priors without a support bound.
    pub fn require_bounded(&self) -> Result<f64> {
        self.h_bound
            .ok_or_else(|| Error::InvalidParameter("construction requires a bounded prior (set h_bound)".into()))
    }

    /// One valuation profile, one inverse-transform draw per bidder.
    pub fn sample_profile<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bidders.iter().map(|d| d.sample(rng)).collect()
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (slot, d) in out.iter_mut().zip(&self.bidders) {
            *slot = d.sample(rng);
        }
    }

    pub fn ironed_curves(&self, grid_size: usize) -> Result<Vec<VirtualValueCurve>> {
        self.bidders.iter().map(|d| d.iron(grid_size)).collect()
    }

    /// Indices of bidders whose distribution fails the MHR check.
    pub fn non_mhr_bidders(&self, grid_size: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.bidders[i].check_mhr(grid_size)).collect()
    }
}
