//! Finite domains and propagators.
//!
//! Propagators are written against [`DomStore`] so they can run over the
//! VM's per-space variables or over a plain vector in tests.

use std::fmt;

pub const SUP: i64 = 134_217_726;

/// A finite set of non-negative integers as sorted, disjoint, non-adjacent
/// closed intervals.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FDomain {
    ivs: Vec<(i64, i64)>,
}

impl fmt::Debug for FDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (lo, hi)) in self.ivs.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if lo == hi {
                write!(f, "{lo}")?;
            } else {
                write!(f, "{lo}#{hi}")?;
            }
        }
        f.write_str("}")
    }
}

impl FDomain {
    pub fn full() -> FDomain {
        FDomain::range(0, SUP)
    }

    pub fn empty() -> FDomain {
        FDomain { ivs: Vec::new() }
    }

    /// `[lo, hi]` clipped to `[0, SUP]`.
    pub fn range(lo: i64, hi: i64) -> FDomain {
        let (lo, hi) = (lo.max(0), hi.min(SUP));
        if lo > hi {
            FDomain::empty()
        } else {
            FDomain { ivs: vec![(lo, hi)] }
        }
    }

    pub fn singleton(v: i64) -> FDomain {
        FDomain::range(v, v)
    }

    pub fn from_values(values: impl IntoIterator<Item = i64>) -> FDomain {
        let mut vs: Vec<i64> = values.into_iter().filter(|v| (0..=SUP).contains(v)).collect();
        vs.sort_unstable();
        vs.dedup();
        let mut ivs: Vec<(i64, i64)> = Vec::new();
        for v in vs {
            match ivs.last_mut() {
                Some(last) if last.1 + 1 == v => last.1 = v,
                _ => ivs.push((v, v)),
            }
        }
        FDomain { ivs }
    }

    pub fn is_empty(&self) -> bool {
        self.ivs.is_empty()
    }

    pub fn size(&self) -> u64 {
        self.ivs.iter().map(|(l, h)| (h - l + 1) as u64).sum()
    }

    pub fn min(&self) -> i64 {
        self.ivs[0].0
    }

    pub fn max(&self) -> i64 {
        self.ivs[self.ivs.len() - 1].1
    }

    pub fn value(&self) -> Option<i64> {
        match self.ivs.as_slice() {
            [(l, h)] if l == h => Some(*l),
            _ => None,
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.ivs
            .binary_search_by(|(l, h)| {
                if *h < v {
                    std::cmp::Ordering::Less
                } else if *l > v {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .is_ok()
    }

    pub fn intervals(&self) -> &[(i64, i64)] {
        &self.ivs
    }

    pub fn values(&self) -> impl Iterator<Item = i64> + '_ {
        self.ivs.iter().flat_map(|(l, h)| *l..=*h)
    }

    pub fn intersect(&self, other: &FDomain) -> FDomain {
        let mut ivs = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.ivs.len() && j < other.ivs.len() {
            let (a, b) = self.ivs[i];
            let (c, d) = other.ivs[j];
            let lo = a.max(c);
            let hi = b.min(d);
            if lo <= hi {
                ivs.push((lo, hi));
            }
            if b < d {
                i += 1;
            } else {
                j += 1;
            }
        }
        FDomain { ivs }
    }

    pub fn clamp(&self, lo: i64, hi: i64) -> FDomain {
        self.intersect(&FDomain::range(lo, hi))
    }

    pub fn remove(&self, v: i64) -> FDomain {
        let mut ivs = Vec::with_capacity(self.ivs.len() + 1);
        for &(l, h) in &self.ivs {
            if v < l || v > h {
                ivs.push((l, h));
            } else {
                if l < v {
                    ivs.push((l, v - 1));
                }
                if v < h {
                    ivs.push((v + 1, h));
                }
            }
        }
        FDomain { ivs }
    }

    pub fn union(&self, other: &FDomain) -> FDomain {
        let mut all: Vec<(i64, i64)> = self.ivs.iter().chain(&other.ivs).copied().collect();
        all.sort_unstable();
        let mut ivs: Vec<(i64, i64)> = Vec::with_capacity(all.len());
        for (l, h) in all {
            match ivs.last_mut() {
                Some(last) if l <= last.1 + 1 => last.1 = last.1.max(h),
                _ => ivs.push((l, h)),
            }
        }
        FDomain { ivs }
    }

    pub fn is_subset(&self, other: &FDomain) -> bool {
        self.intersect(other) == *self
    }
}

/// Propagation detected an inconsistency.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Fail;

/// Domain access for propagators. Narrowing to a singleton determines the
/// variable; narrowing to nothing is a failure.
pub trait DomStore {
    type Var: Copy + Eq + fmt::Debug;

    fn dom(&mut self, v: Self::Var) -> FDomain;

    /// Replaces the domain of `v` by `d`, which the caller guarantees is a
    /// subset of the current one.
    fn narrow(&mut self, v: Self::Var, d: FDomain) -> Result<(), Fail>;
}

fn tighten<S: DomStore>(s: &mut S, v: S::Var, d: FDomain, changed: &mut bool) -> Result<(), Fail> {
    let cur = s.dom(v);
    let next = cur.intersect(&d);
    if next.is_empty() {
        return Err(Fail);
    }
    if next != cur {
        *changed = true;
        s.narrow(v, next)?;
    }
    Ok(())
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Relation {
    Eq,
    Le,
}

#[derive(Clone, Debug)]
pub enum Constraint<V> {
    /// `sum(coefs[i] * vars[i]) rel c`
    Linear {
        coefs: Vec<i64>,
        vars: Vec<V>,
        rel: Relation,
        c: i64,
    },
    /// `z = x * y` over non-negative domains
    Times { x: V, y: V, z: V },
    Distinct(Vec<V>),
    /// `x != y`
    Neq(V, V),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Outcome {
    Active,
    Entailed,
}

impl<V: Copy + Eq + fmt::Debug> Constraint<V> {
    pub fn map_vars<W>(&self, mut f: impl FnMut(V) -> W) -> Constraint<W> {
        match self {
            Constraint::Linear {
                coefs,
                vars,
                rel,
                c,
            } => Constraint::Linear {
                coefs: coefs.clone(),
                vars: vars.iter().map(|v| f(*v)).collect(),
                rel: rel.clone(),
                c: *c,
            },
            Constraint::Times { x, y, z } => Constraint::Times {
                x: f(*x),
                y: f(*y),
                z: f(*z),
            },
            Constraint::Distinct(vars) => Constraint::Distinct(vars.iter().map(|v| f(*v)).collect()),
            Constraint::Neq(x, y) => Constraint::Neq(f(*x), f(*y)),
        }
    }

    pub fn vars(&self) -> Vec<V> {
        match self {
            Constraint::Linear { vars, .. } | Constraint::Distinct(vars) => vars.clone(),
            Constraint::Times { x, y, z } => vec![*x, *y, *z],
            Constraint::Neq(x, y) => vec![*x, *y],
        }
    }

    /// Runs the propagator to its own fixpoint.
    pub fn propagate<S: DomStore<Var = V>>(&self, s: &mut S) -> Result<Outcome, Fail> {
        match self {
            Constraint::Linear {
                coefs,
                vars,
                rel,
                c,
            } => linear(s, coefs, vars, rel, *c),
            Constraint::Times { x, y, z } => times(s, *x, *y, *z),
            Constraint::Distinct(vars) => distinct(s, vars),
            Constraint::Neq(x, y) => neq(s, *x, *y),
        }
    }

    /// Whether a full assignment satisfies the constraint.
    pub fn holds(&self, value: impl Fn(V) -> i64) -> bool {
        match self {
            Constraint::Linear {
                coefs,
                vars,
                rel,
                c,
            } => {
                let sum: i128 = coefs
                    .iter()
                    .zip(vars)
                    .map(|(a, v)| *a as i128 * value(*v) as i128)
                    .sum();
                match rel {
                    Relation::Eq => sum == *c as i128,
                    Relation::Le => sum <= *c as i128,
                }
            }
            Constraint::Times { x, y, z } => {
                value(*x) as i128 * value(*y) as i128 == value(*z) as i128
            }
            Constraint::Distinct(vars) => {
                let mut vs: Vec<i64> = vars.iter().map(|v| value(*v)).collect();
                vs.sort_unstable();
                vs.windows(2).all(|w| w[0] != w[1])
            }
            Constraint::Neq(x, y) => value(*x) != value(*y),
        }
    }
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

fn to_i64(v: i128) -> i64 {
    v.clamp(i64::MIN as i128 / 4, i64::MAX as i128 / 4) as i64
}

fn linear<S: DomStore>(
    s: &mut S,
    coefs: &[i64],
    vars: &[S::Var],
    rel: &Relation,
    c: i64,
) -> Result<Outcome, Fail> {
    let c = c as i128;
    loop {
        let doms: Vec<FDomain> = vars.iter().map(|v| s.dom(*v)).collect();
        // Contribution bounds of each term.
        let lo: Vec<i128> = coefs
            .iter()
            .zip(&doms)
            .map(|(a, d)| {
                let a = *a as i128;
                if a >= 0 {
                    a * d.min() as i128
                } else {
                    a * d.max() as i128
                }
            })
            .collect();
        let hi: Vec<i128> = coefs
            .iter()
            .zip(&doms)
            .map(|(a, d)| {
                let a = *a as i128;
                if a >= 0 {
                    a * d.max() as i128
                } else {
                    a * d.min() as i128
                }
            })
            .collect();
        let sum_lo: i128 = lo.iter().sum();
        let sum_hi: i128 = hi.iter().sum();
        if sum_lo > c || (*rel == Relation::Eq && sum_hi < c) {
            return Err(Fail);
        }
        if *rel == Relation::Le && sum_hi <= c {
            return Ok(Outcome::Entailed);
        }
        let mut changed = false;
        for (i, v) in vars.iter().enumerate() {
            let a = coefs[i] as i128;
            if a == 0 {
                continue;
            }
            // a*x <= c - (sum_lo - lo_i)
            let upper = c - (sum_lo - lo[i]);
            // a*x >= c - (sum_hi - hi_i) for equalities
            let lower = (*rel == Relation::Eq).then(|| c - (sum_hi - hi[i]));
            let (mut xl, mut xh) = (i128::MIN, i128::MAX);
            if a > 0 {
                xh = div_floor(upper, a);
                if let Some(l) = lower {
                    xl = div_ceil(l, a);
                }
            } else {
                xl = div_ceil(upper, a);
                if let Some(l) = lower {
                    xh = div_floor(l, a);
                }
            }
            if xl > xh {
                return Err(Fail);
            }
            tighten(s, *v, FDomain::range(to_i64(xl), to_i64(xh)), &mut changed)?;
        }
        if !changed {
            break;
        }
    }
    let all_det = vars.iter().all(|v| s.dom(*v).value().is_some());
    Ok(if all_det {
        Outcome::Entailed
    } else {
        Outcome::Active
    })
}

fn times<S: DomStore>(s: &mut S, x: S::Var, y: S::Var, z: S::Var) -> Result<Outcome, Fail> {
    loop {
        let (dx, dy, dz) = (s.dom(x), s.dom(y), s.dom(z));
        let mut changed = false;
        let (xl, xh) = (dx.min() as i128, dx.max() as i128);
        let (yl, yh) = (dy.min() as i128, dy.max() as i128);
        let (zl, zh) = (dz.min() as i128, dz.max() as i128);
        tighten(
            s,
            z,
            FDomain::range(to_i64(xl * yl), to_i64(xh * yh)),
            &mut changed,
        )?;
        // x in [ceil(zl / yh), floor(zh / yl)], each bound only when the divisor is positive.
        let mut bound = |s: &mut S, v: S::Var, ol: i128, oh: i128| -> Result<(), Fail> {
            let lo = if oh > 0 { div_ceil(zl, oh) } else { 0 };
            let hi = if ol > 0 { div_floor(zh, ol) } else { SUP as i128 };
            if lo > hi {
                return Err(Fail);
            }
            tighten(s, v, FDomain::range(to_i64(lo), to_i64(hi)), &mut changed)
        };
        bound(s, x, yl, yh)?;
        bound(s, y, xl, xh)?;
        if !changed {
            break;
        }
    }
    let (dx, dy, dz) = (s.dom(x), s.dom(y), s.dom(z));
    match (dx.value(), dy.value(), dz.value()) {
        (Some(a), Some(b), Some(c)) => {
            if a as i128 * b as i128 == c as i128 {
                Ok(Outcome::Entailed)
            } else {
                Err(Fail)
            }
        }
        _ => Ok(Outcome::Active),
    }
}

fn distinct<S: DomStore>(s: &mut S, vars: &[S::Var]) -> Result<Outcome, Fail> {
    let mut done = vec![false; vars.len()];
    loop {
        let mut progress = false;
        for i in 0..vars.len() {
            if done[i] {
                continue;
            }
            let Some(v) = s.dom(vars[i]).value() else {
                continue;
            };
            done[i] = true;
            progress = true;
            for (j, w) in vars.iter().enumerate() {
                if j != i {
                    let d = s.dom(*w);
                    if d.contains(v) {
                        let r = d.remove(v);
                        if r.is_empty() {
                            return Err(Fail);
                        }
                        s.narrow(*w, r)?;
                    }
                }
            }
        }
        if !progress {
            break;
        }
    }
    let mut union = FDomain::empty();
    for v in vars {
        union = union.union(&s.dom(*v));
    }
    if union.size() < vars.len() as u64 {
        return Err(Fail);
    }
    Ok(if done.iter().all(|d| *d) {
        Outcome::Entailed
    } else {
        Outcome::Active
    })
}

fn neq<S: DomStore>(s: &mut S, x: S::Var, y: S::Var) -> Result<Outcome, Fail> {
    let (dx, dy) = (s.dom(x), s.dom(y));
    match (dx.value(), dy.value()) {
        (Some(a), Some(b)) => {
            if a == b {
                Err(Fail)
            } else {
                Ok(Outcome::Entailed)
            }
        }
        (Some(a), None) => {
            let r = dy.remove(a);
            if r.is_empty() {
                return Err(Fail);
            }
            if r != dy {
                s.narrow(y, r)?;
            }
            Ok(Outcome::Entailed)
        }
        (None, Some(b)) => {
            let r = dx.remove(b);
            if r.is_empty() {
                return Err(Fail);
            }
            if r != dx {
                s.narrow(x, r)?;
            }
            Ok(Outcome::Entailed)
        }
        (None, None) => Ok(Outcome::Active),
    }
}

/// First-fail selection: the undetermined domain of smallest size, earliest
/// on ties.
pub fn select_first_fail<'a>(doms: impl IntoIterator<Item = &'a FDomain>) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, d) in doms.into_iter().enumerate() {
        let n = d.size();
        if n > 1 && best.map_or(true, |(_, m)| n < m) {
            best = Some((i, n));
        }
    }
    best.map(|(i, _)| i)
}

/// A store over a vector of domains, indexed by position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VecStore(pub Vec<FDomain>);

impl DomStore for VecStore {
    type Var = usize;

    fn dom(&mut self, v: usize) -> FDomain {
        self.0[v].clone()
    }

    fn narrow(&mut self, v: usize, d: FDomain) -> Result<(), Fail> {
        if d.is_empty() {
            return Err(Fail);
        }
        self.0[v] = d;
        Ok(())
    }
}

/// Runs the constraints until none of them narrows anything.
pub fn fixpoint(store: &mut VecStore, cs: &[Constraint<usize>]) -> Result<(), Fail> {
    let mut entailed = vec![false; cs.len()];
    loop {
        let before = store.clone();
        for (i, c) in cs.iter().enumerate() {
            if !entailed[i] && c.propagate(store)? == Outcome::Entailed {
                entailed[i] = true;
            }
        }
        if *store == before {
            return Ok(());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(ds: &[(i64, i64)]) -> VecStore {
        VecStore(ds.iter().map(|(l, h)| FDomain::range(*l, *h)).collect())
    }

    fn lin(coefs: &[i64], rel: Relation, c: i64) -> Constraint<usize> {
        Constraint::Linear {
            coefs: coefs.to_vec(),
            vars: (0..coefs.len()).collect(),
            rel,
            c,
        }
    }

    #[test]
    fn domain_operations() {
        let d = FDomain::range(0, 9).clamp(1, 9);
        assert_eq!(d, FDomain::range(1, 9));
        assert!(FDomain::range(1, 3).clamp(5, 9).is_empty());
        let d = FDomain::range(4, 9).clamp(1, 4);
        assert_eq!(d.value(), Some(4));
        let d = FDomain::range(1, 5).remove(3);
        assert_eq!(d.intervals(), &[(1, 2), (4, 5)]);
        assert_eq!(d.size(), 4);
        assert!(!d.contains(3) && d.contains(4));
    }

    #[test]
    fn linear_sum_prunes_to_bounds() {
        let mut s = store(&[(0, 9), (0, 9)]);
        fixpoint(&mut s, &[lin(&[1, 1], Relation::Eq, 2)]).unwrap();
        assert_eq!(s.0, vec![FDomain::range(0, 2), FDomain::range(0, 2)]);
    }

    #[test]
    fn two_digit_number() {
        // 10*B + C - BC = 0
        let mut s = store(&[(1, 9), (1, 9), (0, SUP)]);
        fixpoint(&mut s, &[lin(&[10, 1, -1], Relation::Eq, 0)]).unwrap();
        assert_eq!(s.0[2], FDomain::range(11, 99));
    }

    #[test]
    fn difference_zero() {
        let mut s = store(&[(3, 5), (4, 8)]);
        fixpoint(&mut s, &[lin(&[1, -1], Relation::Eq, 0)]).unwrap();
        assert_eq!(s.0, vec![FDomain::range(4, 5), FDomain::range(4, 5)]);
    }

    #[test]
    fn product_bounds() {
        let t = Constraint::Times { x: 0, y: 1, z: 2 };
        let mut s = store(&[(2, 3), (4, 5), (0, SUP)]);
        fixpoint(&mut s, &[t.clone()]).unwrap();
        assert_eq!(s.0[2], FDomain::range(8, 15));

        let mut s = store(&[(0, SUP), (4, 4), (8, 8)]);
        fixpoint(&mut s, &[t.clone()]).unwrap();
        assert_eq!(s.0[0], FDomain::singleton(2));

        // min x = 0: the first pass bounds y only from below, using max x.
        // Once y >= 1 is known, x >= 1 follows and y gets its upper bound.
        let mut s = store(&[(0, 3), (0, SUP), (1, 9)]);
        fixpoint(&mut s, &[t]).unwrap();
        assert_eq!(s.0[0], FDomain::range(1, 3));
        assert_eq!(s.0[1], FDomain::range(1, 9));
    }

    #[test]
    fn distinct_removes_and_counts() {
        let d = Constraint::Distinct(vec![0, 1]);
        let mut s = store(&[(3, 3), (1, 3)]);
        fixpoint(&mut s, &[d]).unwrap();
        assert_eq!(s.0[1], FDomain::range(1, 2));

        let d = Constraint::Distinct(vec![0, 1, 2]);
        let mut s = store(&[(1, 2), (1, 2), (1, 2)]);
        assert_eq!(fixpoint(&mut s, &[d]), Err(Fail));

        let d = Constraint::Distinct(vec![0, 1]);
        let mut s = store(&[(1, 1), (2, 2)]);
        assert_eq!(d.propagate(&mut s), Ok(Outcome::Entailed));
    }

    #[test]
    fn first_fail_choice() {
        let ds = [FDomain::range(0, 2), FDomain::range(0, 1), FDomain::range(0, 8)];
        assert_eq!(select_first_fail(&ds), Some(1));
        let ds = [FDomain::range(0, 1), FDomain::range(5, 6)];
        assert_eq!(select_first_fail(&ds), Some(0));
        let ds = [FDomain::singleton(1)];
        assert_eq!(select_first_fail(&ds), None);
    }

    #[test]
    fn no_constraints_is_quiescent() {
        let mut s = store(&[(0, 3)]);
        fixpoint(&mut s, &[]).unwrap();
        assert_eq!(s.0[0], FDomain::range(0, 3));
    }
}
