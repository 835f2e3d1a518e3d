//! The single-assignment store: variables, bindings seen per space,
//! unification and suspension bookkeeping.

use std::collections::HashSet;
use std::rc::Rc;

use crate::fd::FDomain;
use crate::term::{Env, Record, SpaceId, Term, VarId};
use crate::vm::{Life, PropState, Slot, Susp, TState, VarInfo, Vm};

/// Why a tell did not go through.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Clash {
    /// The constraint is inconsistent with the store.
    Fail,
    /// A by-need variable must be computed before it can be bound.
    Need(VarId),
}

pub type Tell = Result<(), Clash>;

fn rec_ptr(r: &Rc<Record>) -> usize {
    Rc::as_ptr(r) as usize
}

impl Vm {
    pub fn new_var(&mut self, home: SpaceId) -> VarId {
        let id = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo {
            home,
            slot: Slot::Free,
            susp: Vec::new(),
            trigger: None,
            shadows: Vec::new(),
        });
        if home.0 != 0 {
            self.spaces[home.index()].locals.push(id);
        }
        id
    }

    pub fn fresh(&mut self, home: SpaceId) -> Term {
        Term::Var(self.new_var(home))
    }

    pub fn is_ancestor_or_self(&self, anc: SpaceId, s: SpaceId) -> bool {
        let target = self.spaces[anc.index()].depth;
        let mut cur = s;
        loop {
            if cur == anc {
                return true;
            }
            let sp = &self.spaces[cur.index()];
            if sp.depth <= target {
                return false;
            }
            match sp.parent {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// The binding of `v` as seen from space `s`.
    pub fn slot(&self, v: VarId, s: SpaceId) -> &Slot {
        let info = &self.vars[v.index()];
        if info.home == s {
            return &info.slot;
        }
        let mut cur = s;
        loop {
            if cur == info.home {
                return &info.slot;
            }
            let sp = &self.spaces[cur.index()];
            if !sp.overlay.is_empty() {
                if let Some(slot) = sp.overlay.get(&v) {
                    return slot;
                }
            }
            match sp.parent {
                Some(p) => cur = p,
                None => return &self.free,
            }
        }
    }

    pub fn deref(&self, t: &Term, s: SpaceId) -> Term {
        let mut cur = t.clone();
        while let Term::Var(v) = cur {
            match self.slot(v, s) {
                Slot::Bound(next) => cur = next.clone(),
                Slot::Dom(d) => match d.value() {
                    Some(i) => return Term::Int(i),
                    None => return cur,
                },
                Slot::Free => return cur,
            }
        }
        cur
    }

    pub fn is_det(&self, t: &Term, s: SpaceId) -> bool {
        !matches!(self.deref(t, s), Term::Var(_))
    }

    /// Current finite domain of a dereferenced variable; free variables have
    /// the full domain.
    pub fn domain(&self, v: VarId, s: SpaceId) -> FDomain {
        match self.slot(v, s) {
            Slot::Dom(d) => d.clone(),
            _ => FDomain::full(),
        }
    }

    pub fn has_domain(&self, v: VarId, s: SpaceId) -> bool {
        matches!(self.slot(v, s), Slot::Dom(_))
    }

    /// Writes the binding of `v` in space `s` and brings descendants that
    /// shadow `v` back in line.
    pub(crate) fn write_slot(&mut self, v: VarId, s: SpaceId, slot: Slot) {
        let home = self.vars[v.index()].home;
        if home == s {
            self.vars[v.index()].slot = slot;
        } else {
            self.spaces[s.index()].overlay.insert(v, slot);
            let sh = &mut self.vars[v.index()].shadows;
            if !sh.contains(&s) {
                sh.push(s);
            }
        }
        if self.vars[v.index()].shadows.is_empty() {
            return;
        }
        let victims: Vec<SpaceId> = self.vars[v.index()]
            .shadows
            .iter()
            .copied()
            .filter(|d| *d != s && self.is_ancestor_or_self(s, *d))
            .collect();
        for d in victims {
            self.reconcile(v, d);
        }
    }

    /// Space `d` holds its own binding for `v` while an ancestor has just
    /// bound it: drop the private entry and tell it again on top of the new one.
    fn reconcile(&mut self, v: VarId, d: SpaceId) {
        let old = self.spaces[d.index()].overlay.remove(&v);
        self.vars[v.index()].shadows.retain(|x| *x != d);
        if self.spaces[d.index()].life != Life::Live {
            return;
        }
        match old {
            Some(Slot::Bound(t)) => {
                self.spawn_eq(Term::Var(v), t, d);
            }
            Some(Slot::Dom(dom)) => match self.tell_dom(&Term::Var(v), &dom, d) {
                Ok(()) => {}
                Err(Clash::Fail) => self.fail_space(d),
                Err(Clash::Need(x)) => self.fire_trigger(x),
            },
            _ => {}
        }
    }

    /// A thread in `s` running `X=Y`.
    pub(crate) fn spawn_eq(&mut self, x: Term, y: Term, s: SpaceId) {
        let code = self.code.eq.clone();
        let env = Env::empty()
            .bind(self.code.x, x)
            .bind(self.code.y, y);
        self.spawn(code, env, s);
    }

    /// Wakes what waits on `v` in `s` or below. Threads are woken only when
    /// `all` is set; propagators always.
    pub(crate) fn wake_var(&mut self, v: VarId, s: SpaceId, all: bool) {
        if self.vars[v.index()].susp.is_empty() {
            return;
        }
        let list = std::mem::take(&mut self.vars[v.index()].susp);
        let mut keep = Vec::with_capacity(list.len());
        for entry in list {
            match entry {
                Susp::Thread(t) => {
                    let th = &self.threads[t.index()];
                    if !matches!(th.state, TState::Suspended(_)) {
                        continue;
                    }
                    if all && self.is_ancestor_or_self(s, th.space) {
                        self.wake_thread(t);
                    } else {
                        keep.push(entry);
                    }
                }
                Susp::Prop(p) => {
                    let prop = &self.props[p.index()];
                    if prop.state != PropState::Active {
                        continue;
                    }
                    if self.is_ancestor_or_self(s, prop.space) {
                        self.schedule_prop(p);
                    }
                    keep.push(entry);
                }
            }
        }
        let cur = &mut self.vars[v.index()].susp;
        keep.append(cur);
        *cur = keep;
    }

    fn bind_value(&mut self, x: VarId, t: Term, s: SpaceId) -> Tell {
        if self.vars[x.index()].trigger.is_some() {
            return Err(Clash::Need(x));
        }
        if let Slot::Dom(d) = self.slot(x, s) {
            match t {
                Term::Int(i) if d.contains(i) => {}
                _ => return Err(Clash::Fail),
            }
        }
        self.write_slot(x, s, Slot::Bound(t));
        self.wake_var(x, s, true);
        Ok(())
    }

    fn bind_vars(&mut self, x: VarId, y: VarId, s: SpaceId) -> Tell {
        let dx = match self.slot(x, s) {
            Slot::Dom(d) => Some(d.clone()),
            _ => None,
        };
        let dy = match self.slot(y, s) {
            Slot::Dom(d) => Some(d.clone()),
            _ => None,
        };
        let (tx, ty) = (
            self.vars[x.index()].trigger.is_some(),
            self.vars[y.index()].trigger.is_some(),
        );
        let key = |vm: &Vm, v: VarId| (vm.spaces[vm.vars[v.index()].home.index()].depth, v.0);
        // (from, to): `from` becomes a reference to `to`
        let (from, to) = match (dx.is_some(), dy.is_some()) {
            (false, true) => (x, y),
            (true, false) => (y, x),
            _ if tx != ty => {
                if tx {
                    (y, x)
                } else {
                    (x, y)
                }
            }
            _ => {
                if key(self, x) > key(self, y) {
                    (x, y)
                } else {
                    (y, x)
                }
            }
        };
        if let Some(trig) = self.vars[from.index()].trigger.clone() {
            let (fh, th) = (self.vars[from.index()].home, self.vars[to.index()].home);
            if fh == th && self.vars[to.index()].trigger.is_none() {
                self.vars[to.index()].trigger = Some(trig);
                self.vars[from.index()].trigger = None;
            } else {
                return Err(Clash::Need(from));
            }
        }
        let merged = match (dx, dy) {
            (Some(a), Some(b)) => {
                let m = a.intersect(&b);
                if m.is_empty() {
                    return Err(Clash::Fail);
                }
                Some(m)
            }
            _ => None,
        };
        self.write_slot(from, s, Slot::Bound(Term::Var(to)));
        let props: Vec<Susp> = self.vars[from.index()]
            .susp
            .iter()
            .copied()
            .filter(|e| matches!(e, Susp::Prop(_)))
            .collect();
        for e in props {
            if !self.vars[to.index()].susp.contains(&e) {
                self.vars[to.index()].susp.push(e);
            }
        }
        self.wake_var(from, s, true);
        if let Some(m) = merged {
            self.set_domain(to, m, s)?;
        }
        Ok(())
    }

    /// Narrows the domain of the dereferenced variable `v` to `d`, which must
    /// be a subset of its current domain.
    pub(crate) fn set_domain(&mut self, v: VarId, d: FDomain, s: SpaceId) -> Tell {
        if d.is_empty() {
            return Err(Clash::Fail);
        }
        if let Some(i) = d.value() {
            if self.vars[v.index()].trigger.is_some() {
                return Err(Clash::Need(v));
            }
            self.write_slot(v, s, Slot::Bound(Term::Int(i)));
            self.wake_var(v, s, true);
        } else {
            if let Slot::Dom(cur) = self.slot(v, s) {
                if *cur == d {
                    return Ok(());
                }
            }
            self.write_slot(v, s, Slot::Dom(d));
            self.wake_var(v, s, false);
        }
        Ok(())
    }

    /// Tells `t in d`.
    pub fn tell_dom(&mut self, t: &Term, d: &FDomain, s: SpaceId) -> Tell {
        match self.deref(t, s) {
            Term::Int(i) => {
                if d.contains(i) {
                    Ok(())
                } else {
                    Err(Clash::Fail)
                }
            }
            Term::Var(v) => {
                let cur = self.domain(v, s);
                let next = cur.intersect(d);
                if next == cur && self.has_domain(v, s) {
                    return Ok(());
                }
                self.set_domain(v, next, s)
            }
            _ => Err(Clash::Fail),
        }
    }

    /// Unifies two terms in space `s`. Bindings made before a clash stay.
    pub fn unify(&mut self, a: &Term, b: &Term, s: SpaceId) -> Tell {
        let mut work = vec![(a.clone(), b.clone())];
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        while let Some((a, b)) = work.pop() {
            let a = self.deref(&a, s);
            let b = self.deref(&b, s);
            match (&a, &b) {
                (Term::Var(x), Term::Var(y)) => {
                    if x != y {
                        self.bind_vars(*x, *y, s)?;
                    }
                }
                (Term::Var(x), _) => self.bind_value(*x, b.clone(), s)?,
                (_, Term::Var(y)) => self.bind_value(*y, a.clone(), s)?,
                (Term::Record(r1), Term::Record(r2)) => {
                    if Rc::ptr_eq(r1, r2) || !seen.insert((rec_ptr(r1), rec_ptr(r2))) {
                        continue;
                    }
                    if !r1.same_arity(r2) {
                        return Err(Clash::Fail);
                    }
                    for ((_, x), (_, y)) in r1.fields.iter().zip(&r2.fields).rev() {
                        work.push((x.clone(), y.clone()));
                    }
                }
                _ => {
                    if a.same_constant(&b) != Some(true) {
                        return Err(Clash::Fail);
                    }
                }
            }
        }
        Ok(())
    }

    /// Structural equality. `Err(v)` when the answer depends on the unbound `v`.
    pub fn equal(&self, a: &Term, b: &Term, s: SpaceId) -> Result<bool, VarId> {
        let mut work = vec![(a.clone(), b.clone())];
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        let mut pending: Option<VarId> = None;
        while let Some((a, b)) = work.pop() {
            let a = self.deref(&a, s);
            let b = self.deref(&b, s);
            match (&a, &b) {
                (Term::Var(x), Term::Var(y)) if x == y => {}
                (Term::Var(x), Term::Var(y)) => {
                    // distinct domains cannot be equal
                    if self.domain(*x, s).intersect(&self.domain(*y, s)).is_empty() {
                        return Ok(false);
                    }
                    pending.get_or_insert(*x);
                }
                (Term::Var(x), other) | (other, Term::Var(x)) => {
                    let fits = match other {
                        Term::Int(i) => self.domain(*x, s).contains(*i),
                        _ => !self.has_domain(*x, s),
                    };
                    if !fits {
                        return Ok(false);
                    }
                    pending.get_or_insert(*x);
                }
                (Term::Record(r1), Term::Record(r2)) => {
                    if Rc::ptr_eq(r1, r2) || !seen.insert((rec_ptr(r1), rec_ptr(r2))) {
                        continue;
                    }
                    if !r1.same_arity(r2) {
                        return Ok(false);
                    }
                    for ((_, x), (_, y)) in r1.fields.iter().zip(&r2.fields) {
                        work.push((x.clone(), y.clone()));
                    }
                }
                _ => {
                    if a.same_constant(&b) != Some(true) {
                        return Ok(false);
                    }
                }
            }
        }
        match pending {
            Some(v) => Err(v),
            None => Ok(true),
        }
    }

    /// Installs a by-need computation on an unbound variable.
    pub(crate) fn install_trigger(&mut self, v: VarId, p: Term) {
        self.vars[v.index()].trigger = Some(p);
        self.stats.triggers_installed += 1;
        let waiting = self.vars[v.index()]
            .susp
            .iter()
            .any(|e| matches!(e, Susp::Thread(t) if matches!(self.threads[t.index()].state, TState::Suspended(_))));
        if waiting {
            self.fire_trigger(v);
        }
    }

    /// Runs the by-need computation of `v` in a new thread of its home space.
    pub(crate) fn fire_trigger(&mut self, v: VarId) {
        let Some(p) = self.vars[v.index()].trigger.take() else {
            return;
        };
        let home = self.vars[v.index()].home;
        if self.spaces[home.index()].life != Life::Live {
            return;
        }
        self.stats.triggers_fired += 1;
        let code = self.code.trigger.clone();
        let env = Env::empty().bind(self.code.x, Term::Var(v)).bind(self.code.p, p);
        self.spawn(code, env, home);
    }
}
