//! The calculus of rate functions: extended-real convex increasing
//! left-continuous functions on `[0,∞)` vanishing at zero, their monotone
//! conjugates `α^⊛(s) = sup_{t≥0}{st − α(t)}`, inf-convolutions and convex
//! regularizations.
//!
//! Closed-form conjugate pairs are dispatched from a table
//! (`quadratic ↔ quadratic`, `sqrt-form ↔ bernstein`,
//! `linear ↔ threshold`, `zero ↔ threshold(0)`); everything else goes
//! through an exact piecewise-linear Legendre transform on an adaptively
//! refined sample grid. `+∞` is the IEEE infinity, never a large float.

use crate::{Error, Result};

/// Behaviour beyond the last sample knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// `+∞` strictly beyond the last knot (the finite domain ends there).
    Infinite,
    /// Continues linearly with the given slope.
    Linear(f64),
}

/// Guard for grid points that land a rounding error past the last knot.
fn beyond(x: f64, end: f64) -> bool {
    x > end + 1e-12 * (1.0 + end.abs())
}

/// A piecewise-linear function on `[0, t_last]` with an explicit tail.
/// Knot abscissae are strictly increasing and start at 0; values are finite.
#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    t: Vec<f64>,
    v: Vec<f64>,
    tail: Tail,
}

impl PiecewiseLinear {
    pub fn new(t: Vec<f64>, v: Vec<f64>, tail: Tail) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::Empty("piecewise-linear knots"));
        }
        if t.len() != v.len() {
            return Err(Error::DimensionMismatch(t.len(), v.len()));
        }
        if t[0] != 0.0 {
            return Err(Error::Domain(format!("first knot must be 0, got {}", t[0])));
        }
        for w in t.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Domain("knots must be strictly increasing".into()));
            }
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("knot values must be finite".into()));
        }
        if let Tail::Linear(m) = tail {
            if !m.is_finite() {
                return Err(Error::Domain("tail slope must be finite".into()));
            }
        }
        Ok(PiecewiseLinear { t, v, tail })
    }

    pub fn constant_zero() -> Self {
        PiecewiseLinear { t: vec![0.0], v: vec![0.0], tail: Tail::Linear(0.0) }
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.t, &self.v)
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn t_last(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn v_last(&self) -> f64 {
        *self.v.last().unwrap()
    }

    /// Supremum of the (finite) domain.
    pub fn domain_sup(&self) -> f64 {
        match self.tail {
            Tail::Infinite => self.t_last(),
            Tail::Linear(_) => f64::INFINITY,
        }
    }

    /// Asymptotic slope `lim α(t)/t` (`+∞` for a bounded domain).
    pub fn sup_slope(&self) -> f64 {
        match self.tail {
            Tail::Infinite => f64::INFINITY,
            Tail::Linear(m) => m,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        assert!(x >= 0.0, "piecewise-linear eval at negative {x}");
        if x.is_infinite() {
            return match self.tail {
                Tail::Infinite => f64::INFINITY,
                Tail::Linear(m) if m > 0.0 => f64::INFINITY,
                Tail::Linear(_) => self.v_last(),
            };
        }
        let end = self.t_last();
        if beyond(x, end) {
            return match self.tail {
                Tail::Infinite => f64::INFINITY,
                Tail::Linear(m) => self.v_last() + m * (x - end),
            };
        }
        let x = x.min(end);
        match self.t.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => self.v[i],
            Err(i) => {
                // x strictly between t[i-1] and t[i]
                let (t0, t1) = (self.t[i - 1], self.t[i]);
                let (v0, v1) = (self.v[i - 1], self.v[i]);
                v0 + (v1 - v0) * (x - t0) / (t1 - t0)
            }
        }
    }

    /// Indices of the lower convex hull of the knots (greatest convex
    /// minorant, slopes strictly increasing between retained vertices).
    fn hull_indices(&self) -> Vec<usize> {
        let mut h: Vec<usize> = Vec::with_capacity(self.t.len());
        for i in 0..self.t.len() {
            while h.len() >= 2 {
                let a = h[h.len() - 2];
                let b = h[h.len() - 1];
                // keep b only if slope(a,b) < slope(b,i)
                let lhs = (self.v[b] - self.v[a]) * (self.t[i] - self.t[b]);
                let rhs = (self.v[i] - self.v[b]) * (self.t[b] - self.t[a]);
                if lhs >= rhs {
                    h.pop();
                } else {
                    break;
                }
            }
            h.push(i);
        }
        h
    }

    /// Hull vertices with the linear tail folded in: a function continuing
    /// with slope `m` cannot have a minorant ending steeper than `m`, so
    /// trailing vertices are popped until the last hull slope is at most `m`.
    fn hull_with_tail(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.hull_indices();
        let mut t: Vec<f64> = h.iter().map(|&i| self.t[i]).collect();
        let mut v: Vec<f64> = h.iter().map(|&i| self.v[i]).collect();
        if let Tail::Linear(m) = self.tail {
            while t.len() >= 2 {
                let k = t.len();
                let slope = (v[k - 1] - v[k - 2]) / (t[k - 1] - t[k - 2]);
                if slope > m {
                    t.pop();
                    v.pop();
                } else {
                    break;
                }
            }
        }
        (t, v)
    }

    /// Greatest convex minorant as a piecewise-linear function.
    pub fn convex_minorant(&self) -> PiecewiseLinear {
        let (t, v) = self.hull_with_tail();
        PiecewiseLinear { t, v, tail: self.tail }
    }

    /// Exact monotone conjugate `sup_{t≥0}{st − f(t)}` of the piecewise
    /// linear function (equivalently of its convex minorant). Requires
    /// `f(0) = 0` so that the conjugate again vanishes at 0.
    pub fn monotone_conjugate(&self) -> Result<PiecewiseLinear> {
        if self.v[0].abs() > 1e-9 {
            return Err(Error::NotClassC(format!(
                "conjugate needs value 0 at 0, got {}",
                self.v[0]
            )));
        }
        // Hull vertices (tail folded in) and the increasing slopes between
        // them; nondecreasing input means nonnegative slopes up to rounding.
        let (ht, hv) = self.hull_with_tail();
        let hv: Vec<f64> = hv.into_iter().map(|x| x.max(0.0)).collect();
        let slopes: Vec<f64> = ht
            .windows(2)
            .zip(hv.windows(2))
            .map(|(tt, vv)| ((vv[1] - vv[0]) / (tt[1] - tt[0])).max(0.0))
            .collect();

        // Conjugate knots sit at the hull slopes; between consecutive
        // slopes the argmax is the hull vertex, so the conjugate is linear
        // with that vertex abscissa as its slope. Values accumulate by the
        // slope recursion, which keeps the output convex to the last bit
        // even when the direct formula s·t − v would cancel catastrophically.
        let mut ct = vec![0.0];
        let mut cv = vec![0.0];
        let mut arg = vec![0.0f64]; // hull abscissa acting as slope past each knot
        for (j, &s) in slopes.iter().enumerate() {
            if cv[cv.len() - 1] > VALUE_CAP {
                break;
            }
            let last = *ct.last().unwrap();
            if s > last + 1e-12 * (1.0 + last) {
                let k = ct.len() - 1;
                let value = cv[k] + arg[k] * (s - ct[k]);
                ct.push(s);
                cv.push(value);
                arg.push(ht[j + 1]);
            } else {
                // Near-equal slope: the later (larger) abscissa takes over.
                let k = arg.len() - 1;
                arg[k] = ht[j + 1];
            }
        }
        let tail = match self.tail {
            Tail::Infinite => Tail::Linear(ht[ht.len() - 1]),
            Tail::Linear(m) => {
                let m = m.max(0.0);
                let last = *ct.last().unwrap();
                if m > last + 1e-12 * (1.0 + last) {
                    let k = ct.len() - 1;
                    let value = cv[k] + arg[k] * (m - ct[k]);
                    ct.push(m);
                    cv.push(value);
                }
                Tail::Infinite
            }
        };
        PiecewiseLinear::new(ct, cv, tail)
    }

    /// Pointwise sum, defined on the intersection of the finite domains.
    pub fn add(&self, other: &PiecewiseLinear) -> PiecewiseLinear {
        let end = self.domain_sup().min(other.domain_sup());
        let mut ts: Vec<f64> = Vec::with_capacity(self.t.len() + other.t.len());
        ts.extend(self.t.iter().copied().filter(|&x| x <= end));
        ts.extend(other.t.iter().copied().filter(|&x| x <= end));
        if end.is_finite() {
            ts.push(end);
        }
        ts.sort_by(|a, b| a.total_cmp(b));
        ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + b.abs()));
        let vs: Vec<f64> = ts.iter().map(|&x| self.eval(x) + other.eval(x)).collect();
        let tail = match (self.tail, other.tail) {
            (Tail::Linear(a), Tail::Linear(b)) => Tail::Linear(a + b),
            _ => Tail::Infinite,
        };
        PiecewiseLinear { t: ts, v: vs, tail }
    }

    /// Sup-norm distance to another piecewise-linear function over a grid
    /// of both knot sets (∞ mismatches count only if one side is finite).
    pub fn sup_distance(&self, other: &PiecewiseLinear, t_hi: f64) -> f64 {
        let mut grid: Vec<f64> = self
            .t
            .iter()
            .chain(other.t.iter())
            .copied()
            .filter(|&x| x <= t_hi)
            .collect();
        grid.push(t_hi);
        grid.sort_by(|a, b| a.total_cmp(b));
        let mut worst: f64 = 0.0;
        for &x in &grid {
            let a = self.eval(x);
            let b = other.eval(x);
            let d = if a.is_infinite() && b.is_infinite() { 0.0 } else { (a - b).abs() };
            worst = worst.max(d);
        }
        worst
    }
}

const VALUE_CAP: f64 = 1e12;

/// Closed-form tags plus combinators. `Sampled` is the numeric workhorse.
#[derive(Debug, Clone)]
enum Form {
    /// `0`
    Zero,
    /// `a·t`, `a > 0`
    Linear(f64),
    /// `a·t²`, `a > 0`
    Quadratic(f64),
    /// `(√(t/m + 1) − 1)²`, `m > 0`
    SqrtForm(f64),
    /// `(m·s)² / (1 − m·s)` on `[0, 1/m)`, `m > 0`
    Bernstein(f64),
    /// `0` on `[0, a]`, `+∞` beyond (left continuous at `a`)
    Threshold(f64),
    /// `c_out · f(c_in · t)`
    Scaled { c_out: f64, c_in: f64, inner: Box<RateFunction> },
    /// `max(0, c_out · f(c_in · t) − k)`, `k ≥ 0`
    FloorShift { c_out: f64, c_in: f64, k: f64, inner: Box<RateFunction> },
    /// pointwise maximum
    MaxOf(Vec<RateFunction>),
    Sampled(PiecewiseLinear),
}

/// An extended-real increasing convex left-continuous function on `[0,∞)`
/// with value 0 at 0, evaluable exactly (closed forms) or by piecewise
/// linear interpolation (sampled form).
#[derive(Debug, Clone)]
pub struct RateFunction {
    form: Form,
}

impl RateFunction {
    pub fn zero() -> Self {
        RateFunction { form: Form::Zero }
    }

    pub fn linear(a: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::NotClassC(format!("linear slope {a}")));
        }
        Ok(if a == 0.0 {
            Self::zero()
        } else {
            RateFunction { form: Form::Linear(a) }
        })
    }

    pub fn quadratic(a: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::NotClassC(format!("quadratic coefficient {a}")));
        }
        Ok(if a == 0.0 {
            Self::zero()
        } else {
            RateFunction { form: Form::Quadratic(a) }
        })
    }

    /// `t²/2`, the total-variation rate of the Pinsker inequality.
    pub fn pinsker() -> Self {
        Self::quadratic(0.5).unwrap()
    }

    /// `(√(t/m + 1) − 1)²`; behaves like `t²/(4m²)` near zero and like
    /// `t/m` at infinity.
    pub fn sqrt_form(m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::NotClassC(format!("sqrt-form scale {m}")));
        }
        Ok(RateFunction { form: Form::SqrtForm(m) })
    }

    /// `(m·s)²/(1 − m·s)` on `[0, 1/m)`, the conjugate of [`Self::sqrt_form`].
    pub fn bernstein(m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::NotClassC(format!("bernstein scale {m}")));
        }
        Ok(RateFunction { form: Form::Bernstein(m) })
    }

    /// `0` on `[0, a]`, `+∞` beyond.
    pub fn threshold(a: f64) -> Result<Self> {
        if !(a >= 0.0) {
            return Err(Error::NotClassC(format!("threshold {a}")));
        }
        Ok(RateFunction { form: Form::Threshold(a) })
    }

    /// `t ↦ c_out · f(c_in · t)` for positive scales.
    pub fn scaled(c_out: f64, c_in: f64, inner: RateFunction) -> Result<Self> {
        if !(c_out > 0.0 && c_in > 0.0) {
            return Err(Error::NotClassC(format!("scales ({c_out}, {c_in})")));
        }
        Ok(RateFunction { form: Form::Scaled { c_out, c_in, inner: Box::new(inner) } })
    }

    /// `t ↦ max(0, c_out · f(c_in · t) − k)` with `k ≥ 0`.
    pub fn floor_shift(c_out: f64, c_in: f64, k: f64, inner: RateFunction) -> Result<Self> {
        if !(c_out > 0.0 && c_in > 0.0) {
            return Err(Error::NotClassC(format!("scales ({c_out}, {c_in})")));
        }
        if !(k >= 0.0) {
            return Err(Error::NotClassC(format!("floor shift {k} must be >= 0")));
        }
        Ok(RateFunction {
            form: Form::FloorShift { c_out, c_in, k, inner: Box::new(inner) },
        })
    }

    pub fn pointwise_max(a: RateFunction, b: RateFunction) -> Self {
        Self::max_of(vec![a, b])
    }

    pub fn max_of(items: Vec<RateFunction>) -> Self {
        let mut flat = Vec::with_capacity(items.len());
        for it in items {
            match it.form {
                Form::MaxOf(inner) => flat.extend(inner),
                Form::Zero => {}
                _ => flat.push(it),
            }
        }
        match flat.len() {
            0 => Self::zero(),
            1 => flat.pop().unwrap(),
            _ => RateFunction { form: Form::MaxOf(flat) },
        }
    }

    /// Sampled form: breakpoints with piecewise-linear interpolation and an
    /// explicit tail. The values must be nondecreasing with `v(0) = 0`;
    /// convexity is required by the class but only checked on demand
    /// (sampled Cramér transforms of negative-mean variables may start
    /// above zero and are carried by the same representation).
    pub fn from_samples(t: Vec<f64>, v: Vec<f64>, tail: Tail) -> Result<Self> {
        let pl = PiecewiseLinear::new(t, v, tail)?;
        if pl.v[0] < -1e-12 {
            return Err(Error::NotClassC(format!("negative value {} at 0", pl.v[0])));
        }
        for w in pl.v.windows(2) {
            if w[1] < w[0] - 1e-9 * (1.0 + w[0].abs()) {
                return Err(Error::NotClassC("sampled values must be nondecreasing".into()));
            }
        }
        Ok(RateFunction { form: Form::Sampled(pl) })
    }

    pub fn from_piecewise(pl: PiecewiseLinear) -> Self {
        RateFunction { form: Form::Sampled(pl) }
    }

    pub fn as_piecewise(&self) -> Option<&PiecewiseLinear> {
        match &self.form {
            Form::Sampled(pl) => Some(pl),
            _ => None,
        }
    }

    /// An exact piecewise-linear representation, when the form has one.
    fn exact_piecewise(&self) -> Option<PiecewiseLinear> {
        match &self.form {
            Form::Sampled(pl) => Some(pl.clone()),
            Form::Zero => Some(PiecewiseLinear::constant_zero()),
            Form::Linear(a) => {
                PiecewiseLinear::new(vec![0.0], vec![0.0], Tail::Linear(*a)).ok()
            }
            Form::Threshold(a) => {
                if *a > 0.0 {
                    PiecewiseLinear::new(vec![0.0, *a], vec![0.0, 0.0], Tail::Infinite).ok()
                } else {
                    PiecewiseLinear::new(vec![0.0], vec![0.0], Tail::Infinite).ok()
                }
            }
            Form::Scaled { c_out, c_in, inner } => {
                let pl = inner.exact_piecewise()?;
                let (t, v) = pl.knots();
                let t: Vec<f64> = t.iter().map(|x| x / c_in).collect();
                let v: Vec<f64> = v.iter().map(|x| x * c_out).collect();
                let tail = match pl.tail() {
                    Tail::Infinite => Tail::Infinite,
                    Tail::Linear(m) => Tail::Linear(c_out * c_in * m),
                };
                PiecewiseLinear::new(t, v, tail).ok()
            }
            _ => None,
        }
    }

    /// Structural membership check for the class of convex increasing
    /// left-continuous functions vanishing at 0.
    pub fn is_class_c(&self) -> bool {
        match &self.form {
            Form::Zero
            | Form::Linear(_)
            | Form::Quadratic(_)
            | Form::SqrtForm(_)
            | Form::Bernstein(_)
            | Form::Threshold(_) => true,
            Form::Scaled { inner, .. } | Form::FloorShift { inner, .. } => inner.is_class_c(),
            Form::MaxOf(items) => items.iter().all(|f| f.is_class_c()),
            Form::Sampled(pl) => {
                if pl.v[0].abs() > 1e-9 {
                    return false;
                }
                // Each measured slope carries cancellation noise of order
                // ulp(v)/Δt; a slope may sit below its predecessor by the
                // combined noise without breaking convexity.
                let mut prev_slope = f64::NEG_INFINITY;
                let mut prev_noise = 0.0f64;
                for (tt, vv) in pl.t.windows(2).zip(pl.v.windows(2)) {
                    let dt = tt[1] - tt[0];
                    let s = (vv[1] - vv[0]) / dt;
                    let noise = 1e-15 * (1.0 + vv[0].abs().max(vv[1].abs())) / dt;
                    let tol = 1e-10 * (1.0 + prev_slope.abs()) + prev_noise + noise;
                    if s < prev_slope - tol || s < -tol {
                        return false;
                    }
                    if s > prev_slope {
                        prev_slope = s;
                        prev_noise = noise;
                    }
                }
                match pl.tail {
                    Tail::Infinite => true,
                    Tail::Linear(m) => {
                        m >= prev_slope.max(0.0) - 1e-10 * (1.0 + prev_slope.abs()) - prev_noise
                    }
                }
            }
        }
    }

    pub fn require_class_c(&self) -> Result<()> {
        if self.is_class_c() {
            Ok(())
        } else {
            Err(Error::NotClassC("function violates the convex class invariants".into()))
        }
    }

    /// Evaluation; `+∞` outside the finite domain. Panics on negative `t`.
    pub fn eval(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "rate function evaluated at negative {t}");
        match &self.form {
            Form::Zero => 0.0,
            Form::Linear(a) => a * t,
            Form::Quadratic(a) => a * t * t,
            Form::SqrtForm(m) => {
                if t.is_infinite() {
                    return f64::INFINITY;
                }
                let r = (t / m + 1.0).sqrt() - 1.0;
                r * r
            }
            Form::Bernstein(m) => {
                let ms = m * t;
                if ms >= 1.0 {
                    f64::INFINITY
                } else {
                    ms * ms / (1.0 - ms)
                }
            }
            Form::Threshold(a) => {
                if beyond(t, *a) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Form::Scaled { c_out, c_in, inner } => c_out * inner.eval(c_in * t),
            Form::FloorShift { c_out, c_in, k, inner } => {
                let x = inner.eval(c_in * t);
                if x.is_infinite() {
                    f64::INFINITY
                } else {
                    (c_out * x - k).max(0.0)
                }
            }
            Form::MaxOf(items) => items.iter().map(|f| f.eval(t)).fold(0.0, f64::max),
            Form::Sampled(pl) => pl.eval(t),
        }
    }

    /// Supremum of the finite domain (`+∞` when the function is finite
    /// everywhere).
    pub fn domain_sup(&self) -> f64 {
        match &self.form {
            Form::Zero | Form::Linear(_) | Form::Quadratic(_) | Form::SqrtForm(_) => f64::INFINITY,
            Form::Bernstein(m) => 1.0 / m,
            Form::Threshold(a) => *a,
            Form::Scaled { c_in, inner, .. } => inner.domain_sup() / c_in,
            Form::FloorShift { c_in, inner, .. } => inner.domain_sup() / c_in,
            Form::MaxOf(items) => items.iter().map(|f| f.domain_sup()).fold(f64::INFINITY, f64::min),
            Form::Sampled(pl) => pl.domain_sup(),
        }
    }

    /// Asymptotic slope `lim_{t→∞} α(t)/t ∈ [0, ∞]`; the conjugate is
    /// finite strictly below it.
    pub fn sup_slope(&self) -> f64 {
        match &self.form {
            Form::Zero => 0.0,
            Form::Linear(a) => *a,
            Form::Quadratic(_) | Form::Bernstein(_) | Form::Threshold(_) => f64::INFINITY,
            Form::SqrtForm(m) => 1.0 / m,
            Form::Scaled { c_out, c_in, inner } => c_out * c_in * inner.sup_slope(),
            Form::FloorShift { c_out, c_in, inner, .. } => c_out * c_in * inner.sup_slope(),
            Form::MaxOf(items) => items.iter().map(|f| f.sup_slope()).fold(0.0, f64::max),
            Form::Sampled(pl) => pl.sup_slope(),
        }
    }

    /// Limit value at `+∞`.
    pub fn sup_value(&self) -> f64 {
        if self.domain_sup().is_finite() {
            return f64::INFINITY;
        }
        if self.sup_slope() > 0.0 {
            return f64::INFINITY;
        }
        match &self.form {
            Form::Sampled(pl) => pl.v_last(),
            Form::MaxOf(items) => items.iter().map(|f| f.sup_value()).fold(0.0, f64::max),
            Form::Scaled { c_out, inner, .. } => c_out * inner.sup_value(),
            Form::FloorShift { c_out, k, inner, .. } => (c_out * inner.sup_value() - k).max(0.0),
            _ => 0.0,
        }
    }

    /// Monotone conjugate `α^⊛(s) = sup_{t≥0}{st − α(t)}`. Closed-form
    /// pairs come from the dispatch table; other forms are sampled and
    /// conjugated exactly as piecewise-linear data.
    pub fn monotone_conjugate(&self) -> Result<RateFunction> {
        self.require_class_c()?;
        Ok(match &self.form {
            Form::Zero => Self::threshold(0.0)?,
            Form::Threshold(a) => Self::linear(*a)?,
            Form::Linear(a) => Self::threshold(*a)?,
            Form::Quadratic(a) => Self::quadratic(1.0 / (4.0 * a))?,
            Form::SqrtForm(m) => Self::bernstein(*m)?,
            Form::Bernstein(m) => Self::sqrt_form(*m)?,
            Form::Scaled { c_out, c_in, inner } => Self::scaled(
                *c_out,
                1.0 / (c_out * c_in),
                inner.monotone_conjugate()?,
            )?,
            _ => {
                let pl = self.sample(None)?;
                RateFunction::from_piecewise(pl.monotone_conjugate()?)
            }
        })
    }

    /// Generalized inverse `inf{t ≥ 0 : α(t) ≥ y}`.
    pub fn generalized_inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("inverse level {y} must be >= 0")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        match &self.form {
            Form::Zero => {
                return Err(Error::Domain(format!("level {y} exceeds sup of the zero function")))
            }
            Form::Linear(a) => return Ok(y / a),
            Form::Quadratic(a) => return Ok((y / a).sqrt()),
            Form::SqrtForm(m) => return Ok(m * (y + 2.0 * y.sqrt())),
            Form::Threshold(a) => return Ok(*a),
            _ => {}
        }
        // Bracket the level, then bisect.
        let sup = self.domain_sup();
        let mut hi = if sup.is_finite() { sup } else { 1.0 };
        if !sup.is_finite() {
            let mut grow = 0;
            while self.eval(hi) < y {
                hi *= 2.0;
                grow += 1;
                if grow > 200 {
                    return Err(Error::Domain(format!("level {y} exceeds sup {}", self.eval(hi))));
                }
            }
        } else if self.eval(sup) < y {
            // The jump to +∞ at the domain end covers the level.
            return Ok(sup);
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-10 * (1.0 + hi.abs()) {
                break;
            }
        }
        Ok(hi)
    }

    /// Adaptive piecewise-linear sample of the function. The grid starts
    /// uniform (1025 points) on `[0, t_hi]` and cells are bisected until the
    /// chord error drops below an absolute tolerance; values blowing up are
    /// capped and the domain truncated there.
    pub fn sample(&self, t_hi: Option<f64>) -> Result<PiecewiseLinear> {
        if let Form::Sampled(pl) = &self.form {
            if t_hi.is_none() {
                return Ok(pl.clone());
            }
        }
        let sup = self.domain_sup();
        let hi = match t_hi {
            Some(h) => {
                if !(h > 0.0) {
                    return Err(Error::Domain(format!("sample upper end {h}")));
                }
                h.min(sup)
            }
            None => {
                if sup.is_finite() {
                    sup
                } else {
                    // Grow until the local slope is large or the function is
                    // essentially linear (its asymptotic slope is reached).
                    let target = self.sup_slope();
                    let mut h = 1.0;
                    for _ in 0..60 {
                        let s = (self.eval(h) - self.eval(0.5 * h)) / (0.5 * h);
                        if self.eval(h) >= VALUE_CAP
                            || s >= 1e8
                            || (target.is_finite() && s >= target * (1.0 - 1e-9))
                        {
                            break;
                        }
                        h *= 2.0;
                    }
                    h
                }
            }
        };

        // Error at a large value v only perturbs the conjugate at
        // comparably large slopes, so the tolerance scales with v².
        let tol = |v: f64| 1e-9 * (1.0 + v * v);
        let f = |t: f64| self.eval(t);
        let refined = adaptive_knots(&f, hi, VALUE_CAP, &tol);
        if refined.len() < 2 {
            // The function is +∞ immediately after 0 on this scale.
            return PiecewiseLinear::new(vec![0.0], vec![self.eval(0.0).min(VALUE_CAP)], Tail::Infinite);
        }
        let last_t = refined.last().unwrap().0;
        let tail = if sup.is_finite() && sup <= hi {
            Tail::Infinite
        } else if self.eval(last_t) >= VALUE_CAP {
            Tail::Infinite
        } else {
            let slope_end = {
                let k = refined.len();
                let (ta, va) = refined[k - 2];
                let (tb, vb) = refined[k - 1];
                (vb - va) / (tb - ta)
            };
            let asym = self.sup_slope();
            Tail::Linear(if asym.is_finite() { asym.max(slope_end) } else { slope_end })
        };
        let (t, v): (Vec<f64>, Vec<f64>) = refined.into_iter().unzip();
        PiecewiseLinear::new(t, v, tail)
    }
}

/// Shared adaptive sampler: base grid on `[0, hi]`, values capped, the
/// blow-up edge chased geometrically, then chord-error refinement with a
/// caller-supplied tolerance profile.
fn adaptive_knots(
    f: &dyn Fn(f64) -> f64,
    hi: f64,
    cap: f64,
    tol: &dyn Fn(f64) -> f64,
) -> Vec<(f64, f64)> {
    let base = 1024usize;
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(base + 1);
    let mut cut = hi;
    for i in 0..=base {
        let t = hi * i as f64 / base as f64;
        let v = f(t);
        if !v.is_finite() || v > cap {
            cut = t;
            break;
        }
        knots.push((t, v));
    }
    if knots.is_empty() {
        return vec![(0.0, f(0.0).min(cap))];
    }
    if knots.len() == 1 || cut < hi || !f(hi).is_finite() || f(hi) > cap {
        // Push the knot edge toward the blow-up point.
        let mut lo = knots.last().unwrap().0;
        let mut hi_cut = cut;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi_cut);
            let v = f(mid);
            if v.is_finite() && v <= cap {
                knots.push((mid, v));
                lo = mid;
            } else {
                hi_cut = mid;
            }
            if hi_cut - lo < 1e-12 * (1.0 + hi_cut.abs()) {
                break;
            }
        }
    }
    if knots.len() < 2 {
        return knots;
    }
    let mut stack: Vec<(f64, f64, f64, f64, u32)> = knots
        .windows(2)
        .map(|w| (w[0].0, w[0].1, w[1].0, w[1].1, 0u32))
        .collect();
    let mut refined: Vec<(f64, f64)> = vec![*knots.last().unwrap()];
    while let Some((t0, v0, t1, v1, depth)) = stack.pop() {
        let tm = 0.5 * (t0 + t1);
        let vm = f(tm);
        let chord = 0.5 * (v0 + v1);
        if depth < 30
            && vm.is_finite()
            && (vm - chord).abs() > tol(vm)
            && t1 - t0 > 1e-12 * (1.0 + t1.abs())
            && refined.len() + stack.len() < 400_000
        {
            stack.push((t0, v0, tm, vm, depth + 1));
            stack.push((tm, vm, t1, v1, depth + 1));
        } else {
            refined.push((t0, v0));
        }
    }
    refined.sort_by(|x, y| x.0.total_cmp(&y.0));
    refined.dedup_by(|x, y| (x.0 - y.0).abs() <= 1e-15 * (1.0 + y.0.abs()));
    refined
}

/// Inf-convolution `α₁□α₂(t) = inf{α₁(t₁)+α₂(t₂) : t₁+t₂ = t}`, computed
/// through the conjugate identity `(α₁□α₂)^⊛ = α₁^⊛ + α₂^⊛`: both
/// conjugates are added and the sum conjugated back. The sum is handled
/// exactly when both conjugates are piecewise linear; otherwise it is
/// evaluated as an exact closure of the closed forms and sampled once.
/// Closed-form shortcuts cover the zero, linear and quadratic cases.
pub fn inf_convolution(a: &RateFunction, b: &RateFunction) -> Result<RateFunction> {
    a.require_class_c()?;
    b.require_class_c()?;
    match (&a.form, &b.form) {
        (Form::Zero, _) | (_, Form::Zero) => return Ok(RateFunction::zero()),
        (Form::Linear(x), Form::Linear(y)) => return RateFunction::linear(x.min(*y)),
        (Form::Quadratic(x), Form::Quadratic(y)) => {
            return RateFunction::quadratic(x * y / (x + y))
        }
        _ => {}
    }
    let ca = a.monotone_conjugate()?;
    let cb = b.monotone_conjugate()?;
    if let (Some(pa), Some(pb)) = (ca.exact_piecewise(), cb.exact_piecewise()) {
        let sum = pa.add(&pb);
        return Ok(RateFunction::from_piecewise(sum.monotone_conjugate()?));
    }

    let h = |s: f64| ca.eval(s) + cb.eval(s);
    let s_sup = ca.domain_sup().min(cb.domain_sup());
    let s_hi = if s_sup.is_finite() {
        s_sup
    } else {
        // Both conjugates finite everywhere: grow until the sum's slope
        // approaches its limit (the sum of the input domain ends).
        let target = a.domain_sup() + b.domain_sup();
        let mut s = 1.0;
        for _ in 0..60 {
            let slope = (h(s) - h(0.5 * s)) / (0.5 * s);
            if h(s) >= VALUE_CAP
                || slope >= 1e8
                || (target.is_finite() && slope >= target * (1.0 - 1e-9))
            {
                break;
            }
            s *= 2.0;
        }
        s
    };
    // Accuracy matters where the rates are statistically meaningful; the
    // tolerance tightens quadratically there and floors at 1e-9.
    let tol = |v: f64| (2.5e-11 * (1.0 + v * v)).max(1e-9);
    let knots = adaptive_knots(&h, s_hi, 1e7, &tol);
    let last = knots.last().copied().unwrap_or((0.0, 0.0));
    let tail = if s_sup.is_finite() || h(last.0) >= 1e7 {
        Tail::Infinite
    } else {
        let k = knots.len();
        let slope_end = if k >= 2 {
            (knots[k - 1].1 - knots[k - 2].1) / (knots[k - 1].0 - knots[k - 2].0)
        } else {
            0.0
        };
        Tail::Linear(slope_end)
    };
    let (t, v): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
    let sum = PiecewiseLinear::new(t, v, tail)?;
    Ok(RateFunction::from_piecewise(sum.monotone_conjugate()?))
}

/// An increasing left-continuous function on `[0,∞)` with value 0 at 0,
/// carried as sampled piecewise-linear data; convexity is not required.
#[derive(Debug, Clone)]
pub struct IncreasingFunction {
    pl: PiecewiseLinear,
}

impl IncreasingFunction {
    pub fn new(pl: PiecewiseLinear) -> Result<Self> {
        if pl.v[0].abs() > 1e-9 {
            return Err(Error::Domain(format!("value at 0 must be 0, got {}", pl.v[0])));
        }
        for w in pl.v.windows(2) {
            if w[1] < w[0] - 1e-9 * (1.0 + w[0].abs()) {
                return Err(Error::Domain("values must be nondecreasing".into()));
            }
        }
        Ok(IncreasingFunction { pl })
    }

    pub fn from_samples(t: Vec<f64>, v: Vec<f64>, tail: Tail) -> Result<Self> {
        Self::new(PiecewiseLinear::new(t, v, tail)?)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.pl.eval(t)
    }

    pub fn piecewise(&self) -> &PiecewiseLinear {
        &self.pl
    }

    /// Greatest convex lower-semicontinuous minorant, computed as the double
    /// monotone conjugate of the sampled data.
    pub fn convex_regularization(&self) -> Result<RateFunction> {
        let reg = self.pl.monotone_conjugate()?.monotone_conjugate()?;
        Ok(RateFunction::from_piecewise(reg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| hi * i as f64 / n as f64).collect()
    }

    // Dense 1-D grid oracle for the monotone conjugate.
    fn conjugate_oracle(f: &RateFunction, s: f64, t_hi: f64) -> f64 {
        grid(t_hi, 200_000)
            .into_iter()
            .map(|t| {
                let v = f.eval(t);
                if v.is_finite() { s * t - v } else { f64::NEG_INFINITY }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn eval_closed_forms() {
        assert_eq!(RateFunction::zero().eval(7.0), 0.0);
        assert_eq!(RateFunction::pinsker().eval(2.0), 2.0);
        let sq = RateFunction::sqrt_form(1.0).unwrap();
        assert!((sq.eval(3.0) - 1.0).abs() < 1e-15);
        let th = RateFunction::threshold(1.0).unwrap();
        assert_eq!(th.eval(1.0), 0.0);
        assert_eq!(th.eval(1.0 + 1e-9), f64::INFINITY);
    }

    #[test]
    fn conjugate_table_pairs() {
        // Pinsker is self-conjugate.
        let p = RateFunction::pinsker();
        let c = p.monotone_conjugate().unwrap();
        for s in grid(5.0, 57) {
            assert!((c.eval(s) - s * s / 2.0).abs() < 1e-12);
        }
        // sqrt-form <-> bernstein, checked against the dense grid oracle.
        let m = 0.7;
        let sq = RateFunction::sqrt_form(m).unwrap();
        let c = sq.monotone_conjugate().unwrap();
        for s in [0.1, 0.5, 1.0, 1.3] {
            let expect = if m * s < 1.0 {
                (m * s).powi(2) / (1.0 - m * s)
            } else {
                f64::INFINITY
            };
            if expect.is_finite() {
                assert!((c.eval(s) - expect).abs() < 1e-12);
                let ora = conjugate_oracle(&sq, s, 4000.0);
                assert!((c.eval(s) - ora).abs() < 1e-4, "s={s}: {} vs {ora}", c.eval(s));
            } else {
                assert_eq!(c.eval(s), f64::INFINITY);
            }
        }
        // zero conjugates to the indicator at 0.
        let z = RateFunction::zero().monotone_conjugate().unwrap();
        assert_eq!(z.eval(0.0), 0.0);
        assert_eq!(z.eval(1e-6), f64::INFINITY);
    }

    #[test]
    fn conjugate_involution_closed_forms() {
        let suite = vec![
            RateFunction::pinsker(),
            RateFunction::quadratic(2.5).unwrap(),
            RateFunction::linear(1.2).unwrap(),
            RateFunction::sqrt_form(0.4).unwrap(),
            RateFunction::threshold(2.0).unwrap(),
            RateFunction::zero(),
        ];
        for f in suite {
            let back = f.monotone_conjugate().unwrap().monotone_conjugate().unwrap();
            for t in grid(3.0, 47) {
                let a = f.eval(t);
                let b = back.eval(t);
                if a.is_finite() {
                    assert!((a - b).abs() < 1e-9, "t={t}: {a} vs {b}");
                } else {
                    assert!(b.is_infinite() || b > 1e9);
                }
            }
        }
    }

    #[test]
    fn piecewise_conjugate_is_exact_on_pl_data() {
        // A convex piecewise-linear function round-trips exactly.
        let pl = PiecewiseLinear::new(
            vec![0.0, 1.0, 2.0, 4.0],
            vec![0.0, 0.5, 2.0, 8.0],
            Tail::Linear(4.0),
        )
        .unwrap();
        let back = pl.monotone_conjugate().unwrap().monotone_conjugate().unwrap();
        for t in grid(4.0, 101) {
            assert!((pl.eval(t) - back.eval(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn inf_convolution_identities() {
        // alpha □ zero = zero
        let a = RateFunction::pinsker();
        let r = inf_convolution(&a, &RateFunction::zero()).unwrap();
        for t in grid(3.0, 13) {
            assert_eq!(r.eval(t), 0.0);
        }
        // t² □ t² = t²/2
        let q = RateFunction::quadratic(1.0).unwrap();
        let r = inf_convolution(&q, &q).unwrap();
        for t in grid(3.0, 13) {
            assert!((r.eval(t) - t * t / 2.0).abs() < 1e-12);
        }
        // Pinsker □ Pinsker at t=2 is 1.
        let r = inf_convolution(&RateFunction::pinsker(), &RateFunction::pinsker()).unwrap();
        assert!((r.eval(2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nfold_self_convolution_matches_scaling() {
        // alpha □ alpha □ alpha = 3 alpha(t/3) for the sqrt form.
        let a = RateFunction::sqrt_form(1.0).unwrap();
        let two = inf_convolution(&a, &a).unwrap();
        let three = inf_convolution(&two, &a).unwrap();
        let scaled = RateFunction::scaled(3.0, 1.0 / 3.0, a.clone()).unwrap();
        for t in grid(10.0, 101) {
            let x = three.eval(t);
            let y = scaled.eval(t);
            assert!((x - y).abs() < 1e-6, "t={t}: {x} vs {y}");
        }
    }

    #[test]
    fn scaled_conjugate_table() {
        // (n a(t/n))^⊛ = n a^⊛(s)
        let a = RateFunction::sqrt_form(0.8).unwrap();
        let n = 4.0;
        let scaled = RateFunction::scaled(n, 1.0 / n, a.clone()).unwrap();
        let cs = scaled.monotone_conjugate().unwrap();
        let ca = a.monotone_conjugate().unwrap();
        for s in grid(1.0, 31) {
            let x = cs.eval(s);
            let y = n * ca.eval(s);
            if y.is_finite() {
                assert!((x - y).abs() < 1e-10, "s={s}: {x} vs {y}");
            } else {
                assert!(x.is_infinite());
            }
        }
    }

    #[test]
    fn pointwise_max_cases() {
        let a = RateFunction::pinsker();
        let m = RateFunction::pointwise_max(a.clone(), RateFunction::zero());
        assert!((m.eval(2.0) - 2.0).abs() < 1e-15);
        let m = RateFunction::pointwise_max(a.clone(), a.clone());
        assert!((m.eval(2.0) - 2.0).abs() < 1e-15);
        // max(t²/2, max(0, t−1)) at t = 4 is 8.
        let shifted = RateFunction::floor_shift(1.0, 1.0, 1.0, RateFunction::linear(1.0).unwrap())
            .unwrap();
        let m = RateFunction::pointwise_max(RateFunction::pinsker(), shifted);
        assert!((m.eval(4.0) - 8.0).abs() < 1e-15);
    }

    #[test]
    fn generalized_inverse_cases() {
        let p = RateFunction::pinsker();
        assert_eq!(p.generalized_inverse(0.0).unwrap(), 0.0);
        assert!((p.generalized_inverse(2.0).unwrap() - 2.0).abs() < 1e-12);
        let sq = RateFunction::sqrt_form(1.0).unwrap();
        assert!((sq.generalized_inverse(1.0).unwrap() - 3.0).abs() < 1e-12);
        // On sampled data bisection reaches the same level.
        let pl = sq.sample(Some(10.0)).unwrap();
        let f = RateFunction::from_piecewise(pl);
        assert!((f.generalized_inverse(1.0).unwrap() - 3.0).abs() < 1e-6);
        assert!(RateFunction::zero().generalized_inverse(1.0).is_err());
    }

    #[test]
    fn convex_regularization_cases() {
        // A convex input is a fixed point.
        let q = RateFunction::pinsker().sample(Some(4.0)).unwrap();
        let f = IncreasingFunction::new(q.clone()).unwrap();
        let r = f.convex_regularization().unwrap();
        for t in grid(4.0, 41) {
            assert!((r.eval(t) - q.eval(t)).abs() < 1e-6);
        }
        // Step function 0 on [0,1], 1 on (1, 3], domain [0,3]: the
        // regularization is the positive part of the chord to (3, 1).
        let step = IncreasingFunction::from_samples(
            vec![0.0, 1.0, 1.0 + 1e-9, 3.0],
            vec![0.0, 0.0, 1.0, 1.0],
            Tail::Infinite,
        )
        .unwrap();
        let r = step.convex_regularization().unwrap();
        for t in grid(3.0, 31) {
            let hull = (0.5 * (t - 1.0)).max(0.0);
            assert!((r.eval(t) - hull).abs() < 1e-6, "t={t}: {} vs {hull}", r.eval(t));
        }
        assert!(r.is_class_c());
        // below the input
        for t in grid(3.0, 31) {
            assert!(r.eval(t) <= step.eval(t) + 1e-12);
        }
        // zero stays zero
        let z = IncreasingFunction::from_samples(vec![0.0, 1.0], vec![0.0, 0.0], Tail::Linear(0.0))
            .unwrap();
        let r = z.convex_regularization().unwrap();
        assert_eq!(r.eval(0.7), 0.0);
    }

    #[test]
    fn order_reversal_of_conjugates() {
        // alpha <= beta pointwise implies beta^⊛ <= alpha^⊛.
        let a = RateFunction::quadratic(0.5).unwrap();
        let b = RateFunction::quadratic(1.5).unwrap();
        let ca = a.monotone_conjugate().unwrap();
        let cb = b.monotone_conjugate().unwrap();
        for s in grid(4.0, 41) {
            assert!(cb.eval(s) <= ca.eval(s) + 1e-12);
        }
    }

    prop_compose! {
        // Random convex increasing piecewise-linear function in the class.
        fn random_class_c()(slopes in prop::collection::vec(0.0f64..3.0, 2..8),
                            steps in prop::collection::vec(0.05f64..1.5, 2..8),
                            inf_tail in any::<bool>()) -> PiecewiseLinear {
            let k = slopes.len().min(steps.len());
            let mut slopes = slopes[..k].to_vec();
            slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut t = vec![0.0];
            let mut v = vec![0.0];
            for i in 0..k {
                let dt = steps[i];
                t.push(t[i] + dt);
                v.push(v[i] + slopes[i] * dt);
            }
            let tail = if inf_tail { Tail::Infinite } else { Tail::Linear(slopes[k-1] + 0.5) };
            PiecewiseLinear::new(t, v, tail).unwrap()
        }
    }

    proptest! {
        #[test]
        fn involution_on_random_class_functions(pl in random_class_c()) {
            let f = RateFunction::from_piecewise(pl.clone());
            prop_assert!(f.is_class_c());
            let back = f.monotone_conjugate().unwrap().monotone_conjugate().unwrap();
            let hi = pl.t_last();
            for t in grid(hi, 64) {
                prop_assert!((pl.eval(t) - back.eval(t)).abs() < 1e-9,
                    "t={} orig={} back={}", t, pl.eval(t), back.eval(t));
            }
        }

        #[test]
        fn infconv_conjugate_identity(a in random_class_c(), b in random_class_c()) {
            // (a □ b)^⊛ = a^⊛ + b^⊛
            let fa = RateFunction::from_piecewise(a);
            let fb = RateFunction::from_piecewise(b);
            let conv = inf_convolution(&fa, &fb).unwrap();
            let lhs = conv.monotone_conjugate().unwrap();
            let ra = fa.monotone_conjugate().unwrap();
            let rb = fb.monotone_conjugate().unwrap();
            for s in grid(3.0, 64) {
                let l = lhs.eval(s);
                let r = ra.eval(s) + rb.eval(s);
                if r.is_finite() {
                    prop_assert!((l - r).abs() < 1e-8, "s={s}: {l} vs {r}");
                } else {
                    prop_assert!(l.is_infinite() || l > 1e9);
                }
            }
        }

        #[test]
        fn infconv_commutes(a in random_class_c(), b in random_class_c()) {
            let fa = RateFunction::from_piecewise(a);
            let fb = RateFunction::from_piecewise(b);
            let ab = inf_convolution(&fa, &fb).unwrap();
            let ba = inf_convolution(&fb, &fa).unwrap();
            for t in grid(2.0, 32) {
                let x = ab.eval(t);
                let y = ba.eval(t);
                if x.is_finite() || y.is_finite() {
                    prop_assert!((x - y).abs() < 1e-8);
                }
            }
        }

        #[test]
        fn regularization_below_and_convex(pl in random_class_c()) {
            // Perturb convexity by taking pointwise max with a step-ish bump,
            // then regularize: result must sit below and be convex.
            let f = IncreasingFunction::new(pl.clone()).unwrap();
            let r = f.convex_regularization().unwrap();
            for t in grid(pl.t_last(), 33) {
                prop_assert!(r.eval(t) <= pl.eval(t) + 1e-9);
            }
            prop_assert!(r.is_class_c());
        }
    }
}
