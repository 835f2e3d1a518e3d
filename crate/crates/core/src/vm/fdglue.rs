//! Finite-domain propagators attached to spaces.

use super::{Prop, PropState, Stop, Susp, Vm, TOP};
use crate::fd::{Constraint, DomStore, FDomain, Fail, Outcome};
use crate::store::Clash;
use crate::term::{PropId, SpaceId, Term};

/// A propagator argument: a store variable or a constant.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FdVar {
    Var(crate::term::VarId),
    Const(i64),
}

/// The domains of one space as seen by a propagator.
struct View<'a> {
    vm: &'a mut Vm,
    space: SpaceId,
}

impl DomStore for View<'_> {
    type Var = FdVar;

    fn dom(&mut self, v: FdVar) -> FDomain {
        match v {
            FdVar::Const(i) => FDomain::singleton(i),
            FdVar::Var(x) => match self.vm.deref(&Term::Var(x), self.space) {
                Term::Int(i) => FDomain::singleton(i),
                Term::Var(y) => self.vm.domain(y, self.space),
                _ => FDomain::empty(),
            },
        }
    }

    fn narrow(&mut self, v: FdVar, d: FDomain) -> Result<(), Fail> {
        let t = match v {
            FdVar::Const(i) => Term::Int(i),
            FdVar::Var(x) => Term::Var(x),
        };
        loop {
            match self.vm.tell_dom(&t, &d, self.space) {
                Ok(()) => return Ok(()),
                Err(Clash::Fail) => return Err(Fail),
                Err(Clash::Need(x)) => self.vm.fire_trigger(x),
            }
        }
    }
}

impl Vm {
    /// Reads a propagator argument, giving free variables the full domain.
    pub(crate) fn fd_arg(&mut self, t: &Term, s: SpaceId) -> Result<FdVar, Stop> {
        match self.deref(t, s) {
            Term::Int(i) => Ok(FdVar::Const(i)),
            Term::Var(v) => {
                if self.vars[v.index()].trigger.is_some() {
                    return Err(Stop::Suspend(v));
                }
                if !self.has_domain(v, s) {
                    let r = self.set_domain(v, FDomain::full(), s);
                    self.told(r, s)?;
                }
                Ok(FdVar::Var(v))
            }
            other => Err(super::error("notFdVar", other)),
        }
    }

    /// Installs a propagator in space `s` and schedules its first run.
    pub(crate) fn post(&mut self, c: Constraint<FdVar>, s: SpaceId) -> PropId {
        let id = PropId(self.props.len() as u32);
        for x in c.vars() {
            if let FdVar::Var(v) = x {
                if let Term::Var(v) = self.deref(&Term::Var(v), s) {
                    let susp = &mut self.vars[v.index()].susp;
                    if !susp.contains(&Susp::Prop(id)) {
                        susp.push(Susp::Prop(id));
                    }
                }
            }
        }
        self.props.push(Prop {
            space: s,
            constraint: c,
            state: PropState::Active,
            queued: false,
        });
        self.spaces[s.index()].props.push(id);
        self.schedule_prop(id);
        id
    }

    /// Runs scheduled propagators until none is left.
    pub(crate) fn run_agenda(&mut self) {
        while let Some(p) = self.pop_agenda() {
            let prop = &mut self.props[p.index()];
            prop.queued = false;
            let s = prop.space;
            if prop.state != PropState::Active || self.spaces[s.index()].life != super::Life::Live {
                continue;
            }
            let c = self.props[p.index()].constraint.clone();
            let r = c.propagate(&mut View { vm: self, space: s });
            match r {
                Ok(Outcome::Entailed) => self.props[p.index()].state = PropState::Entailed,
                Ok(Outcome::Active) => {}
                Err(Fail) => {
                    self.props[p.index()].state = PropState::Dead;
                    if s == TOP {
                        self.signal_top_failure();
                    } else {
                        self.fail_space(s);
                    }
                }
            }
            if s != TOP {
                let sp = &self.spaces[s.index()];
                if sp.active == 0 && sp.life == super::Life::Live {
                    self.dirty.push(s);
                }
            }
        }
    }
}
