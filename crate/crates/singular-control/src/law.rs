//! Singular control laws: region partitions of the augmented space and the
//! ray projection that generates the control.
//!
//! A law splits `Q` into an open waiting region `W` and its closed action
//! complement. Control pushes the state along the ray `(x - a, t, y + a)`;
//! the projection increment is the smallest `a >= 0` landing in the closure
//! of `W`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

use crate::model::AugmentedState;

/// Default cap on the projection search. Exceeding it signals an
/// inadmissible law instead of looping forever.
pub const DEFAULT_A_MAX: f64 = 1e6;

/// Absolute tolerance (in the increment `a`) of the projection bisection.
pub const PROJECTION_TOL: f64 = 1e-10;

/// Default half-width of the interior probe used by sign-region laws.
pub const DEFAULT_EPS_INT: f64 = 1e-8;

/// Step of the linear phase of the projection scan for sign-region laws.
const SCAN_STEP: f64 = 0.0625;
/// Number of linear scan steps before switching to geometric growth.
const SCAN_LINEAR_STEPS: usize = 64;

/// Classification of a state under a control law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Inside the open waiting region: no control is exerted.
    Waiting,
    /// In the closed complement: the state is instantaneously pushed back.
    Action,
}

/// Boundary of a threshold law as a function of `(t, y)`.
pub enum Boundary {
    Constant(f64),
    /// Bilinear interpolation over a rectangular `(t, y)` grid with constant
    /// extrapolation outside the node range.
    Table(BoundaryTable),
    Custom(Box<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Boundary {
    fn eval(&self, t: f64, y: f64) -> f64 {
        match self {
            Boundary::Constant(b) => *b,
            Boundary::Table(table) => table.eval(t, y),
            Boundary::Custom(f) => f(t, y),
        }
    }

    /// Whether the boundary provably does not depend on `y`, in which case
    /// the projection has the closed form `max(0, x - b(t))`.
    fn constant_in_y(&self) -> bool {
        match self {
            Boundary::Constant(_) => true,
            Boundary::Table(table) => table.ys.len() == 1,
            Boundary::Custom(_) => false,
        }
    }

    /// Infimum of the boundary where it can be read off the representation;
    /// `None` for opaque closures. A finite lower bound is the documented
    /// admissibility precondition for threshold laws.
    pub fn lower_bound(&self) -> Option<f64> {
        match self {
            Boundary::Constant(b) => Some(*b),
            Boundary::Table(table) => table
                .values
                .iter()
                .copied()
                .fold(None, |acc: Option<f64>, v| {
                    Some(acc.map_or(v, |m| m.min(v)))
                }),
            Boundary::Custom(_) => None,
        }
    }
}

/// Piecewise-linear boundary table over a rectangular `(t, y)` grid.
///
/// Built from `(t, y, b)` rows; every `(t, y)` combination of the node sets
/// must be present exactly once.
pub struct BoundaryTable {
    ts: Vec<f64>,
    ys: Vec<f64>,
    /// Row-major `values[i_t * ys.len() + i_y]`.
    values: Vec<f64>,
}

impl BoundaryTable {
    pub fn from_rows(rows: &[(f64, f64, f64)]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParams("boundary table is empty".into()));
        }
        let mut ts: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for &(t, y, _) in rows {
            if !ts.contains(&t) {
                ts.push(t);
            }
            if !ys.contains(&y) {
                ys.push(y);
            }
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if rows.len() != ts.len() * ys.len() {
            return Err(Error::InvalidParams(format!(
                "boundary table must cover a full {}x{} grid, got {} rows",
                ts.len(),
                ys.len(),
                rows.len()
            )));
        }
        let mut values = alloc::vec![f64::NAN; ts.len() * ys.len()];
        for &(t, y, b) in rows {
            let it = ts.iter().position(|&v| v == t).unwrap();
            let iy = ys.iter().position(|&v| v == y).unwrap();
            let slot = &mut values[it * ys.len() + iy];
            if !slot.is_nan() {
                return Err(Error::InvalidParams(format!(
                    "duplicate boundary table node (t = {t}, y = {y})"
                )));
            }
            *slot = b;
        }
        Ok(Self { ts, ys, values })
    }

    fn eval(&self, t: f64, y: f64) -> f64 {
        let n = self.ys.len();
        let at = |i: usize, j: usize| self.values[i * n + j];
        let row = |i: usize| {
            if n == 1 {
                at(i, 0)
            } else {
                let (iy, wy) = Self::locate(&self.ys, y);
                at(i, iy) * (1.0 - wy) + at(i, iy + 1) * wy
            }
        };
        if self.ts.len() == 1 {
            row(0)
        } else {
            let (it, wt) = Self::locate(&self.ts, t);
            row(it) * (1.0 - wt) + row(it + 1) * wt
        }
    }

    /// Interval index and interpolation weight, clamped to the node range.
    fn locate(nodes: &[f64], v: f64) -> (usize, f64) {
        if nodes.len() == 1 || v <= nodes[0] {
            return (0, 0.0);
        }
        let last = nodes.len() - 1;
        if v >= nodes[last] {
            return (last - 1, 1.0);
        }
        let mut i = 0;
        while nodes[i + 1] < v {
            i += 1;
        }
        let w = (v - nodes[i]) / (nodes[i + 1] - nodes[i]);
        (i, w)
    }
}

/// Waiting region `{x < boundary(t, y)}`; action on and above the boundary.
pub struct ThresholdLaw {
    pub boundary: Boundary,
}

type SignFn = Box<dyn Fn(&AugmentedState) -> f64 + Send + Sync>;

/// Waiting region `int({q1 <= 0 and q0 >= 0})`, the region-iteration update.
///
/// The interior operator is approximated by requiring the sign conditions to
/// hold at `(x - eps, t, y)` and `(x + eps, t, y)`; states exactly on a sign
/// boundary therefore classify as action, matching the closed complement.
pub struct GridSignLaw {
    q0: SignFn,
    q1: SignFn,
    eps_int: f64,
}

impl GridSignLaw {
    fn condition(&self, s: &AugmentedState) -> bool {
        (self.q1)(s) <= 0.0 && (self.q0)(s) >= 0.0
    }

    fn waiting(&self, s: &AugmentedState) -> bool {
        let lo = AugmentedState { x: s.x - self.eps_int, ..*s };
        let hi = AugmentedState { x: s.x + self.eps_int, ..*s };
        self.condition(&lo) && self.condition(&hi)
    }
}

enum LawKind {
    Threshold(ThresholdLaw),
    GridSign(GridSignLaw),
}

/// A singular control law together with its projection search cap.
pub struct ControlLaw {
    kind: LawKind,
    a_max: f64,
}

impl ControlLaw {
    /// Threshold law with a constant boundary.
    pub fn threshold(b: f64) -> Self {
        Self::threshold_boundary(Boundary::Constant(b))
    }

    /// Threshold law with an arbitrary boundary representation.
    pub fn threshold_boundary(boundary: Boundary) -> Self {
        Self {
            kind: LawKind::Threshold(ThresholdLaw { boundary }),
            a_max: DEFAULT_A_MAX,
        }
    }

    /// Sign-region law with the default interior probe width.
    pub fn from_sign_pair(q0: SignFn, q1: SignFn) -> Self {
        Self::from_sign_pair_with_eps(q0, q1, DEFAULT_EPS_INT)
    }

    pub fn from_sign_pair_with_eps(q0: SignFn, q1: SignFn, eps_int: f64) -> Self {
        Self {
            kind: LawKind::GridSign(GridSignLaw { q0, q1, eps_int }),
            a_max: DEFAULT_A_MAX,
        }
    }

    /// Replaces the projection search cap (default [`DEFAULT_A_MAX`]).
    pub fn with_a_max(mut self, a_max: f64) -> Self {
        self.a_max = a_max;
        self
    }

    /// Boundary value for threshold laws; `None` for sign-region laws.
    pub fn threshold_boundary_at(&self, t: f64, y: f64) -> Option<f64> {
        match &self.kind {
            LawKind::Threshold(law) => Some(law.boundary.eval(t, y)),
            LawKind::GridSign(_) => None,
        }
    }

    /// Classifies a state. Deterministic; boundary states are action.
    pub fn classify(&self, s: &AugmentedState) -> Region {
        let waiting = match &self.kind {
            LawKind::Threshold(law) => s.x < law.boundary.eval(s.t, s.y),
            LawKind::GridSign(law) => law.waiting(s),
        };
        if waiting {
            Region::Waiting
        } else {
            Region::Action
        }
    }

    /// Smallest `a >= 0` such that `(x - a, t, y + a)` lies in the closure of
    /// the waiting region; `0` when the state is already there.
    ///
    /// Constant-in-`y` threshold boundaries are solved exactly; otherwise the
    /// first crossing is bracketed along the ray and bisected to
    /// [`PROJECTION_TOL`]. Exhausting `a_max` yields [`Error::NoProjection`].
    pub fn projection_increment(&self, s: &AugmentedState) -> Result<f64> {
        match &self.kind {
            LawKind::Threshold(law) => self.project_threshold(law, s),
            LawKind::GridSign(law) => self.project_gridsign(law, s),
        }
    }

    fn project_threshold(&self, law: &ThresholdLaw, s: &AugmentedState) -> Result<f64> {
        if law.boundary.constant_in_y() {
            let b = law.boundary.eval(s.t, s.y);
            return Ok((s.x - b).max(0.0));
        }
        // gap(a) = (x - a) - b(t, y + a); the waiting closure is gap <= 0
        let gap = |a: f64| (s.x - a) - law.boundary.eval(s.t, s.y + a);
        if gap(0.0) <= 0.0 {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut hi = SCAN_STEP;
        loop {
            if hi > self.a_max {
                if gap(self.a_max) > 0.0 {
                    return Err(Error::NoProjection {
                        state: *s,
                        a_max: self.a_max,
                    });
                }
                hi = self.a_max;
                break;
            }
            if gap(hi) <= 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        Ok(bisect_transition(|a| gap(a) <= 0.0, lo, hi))
    }

    fn project_gridsign(&self, law: &GridSignLaw, s: &AugmentedState) -> Result<f64> {
        let inside = |a: f64| law.waiting(&s.pushed(a));
        if inside(0.0) {
            return Ok(0.0);
        }
        // Linear scan first so nearby waiting intervals are not skipped, then
        // geometric growth to detect inadmissibility within a_max.
        let mut lo = 0.0;
        let mut found = None;
        for k in 1..=SCAN_LINEAR_STEPS {
            let a = k as f64 * SCAN_STEP;
            if a > self.a_max {
                break;
            }
            if inside(a) {
                found = Some((lo, a));
                break;
            }
            lo = a;
        }
        if found.is_none() {
            let mut hi = SCAN_LINEAR_STEPS as f64 * SCAN_STEP;
            while found.is_none() {
                let next = (hi * 2.0).min(self.a_max);
                if inside(next) {
                    found = Some((hi, next));
                    break;
                }
                if next >= self.a_max {
                    return Err(Error::NoProjection {
                        state: *s,
                        a_max: self.a_max,
                    });
                }
                hi = next;
            }
        }
        let (lo, hi) = found.unwrap();
        Ok(bisect_transition(inside, lo, hi))
    }
}

/// Region-iteration law from a `(q0, q1)` pair: waiting region
/// `int({q1 <= 0 and q0 >= 0})` with the default interior probe.
///
/// Construction never fails; an empty waiting region surfaces later as
/// [`Error::NoProjection`] from the projection.
pub fn improved_law(q0: SignFn, q1: SignFn) -> ControlLaw {
    ControlLaw::from_sign_pair(q0, q1)
}

/// Bisects the transition of a monotone-in-`a` indicator on `[lo, hi]`,
/// where `inside(hi)` holds and `inside(lo)` does not.
fn bisect_transition(inside: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    debug_assert!(lo < hi);
    let mut iterations = 0;
    while hi - lo > PROJECTION_TOL && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    0.5 * (lo + hi)
}
