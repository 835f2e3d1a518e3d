//! Computation spaces: the seven primitive operations, stability
//! classification, cloning, merging and failure.

use std::collections::HashMap;
use std::rc::Rc;

use crate::ast::kernel::SpaceOp;
use crate::store::Clash;
use crate::term::{Closure, Env, EnvNode, Record, SpaceId, Term, ThreadId, VarId};
use crate::vm::{
    Choice, Exec, FdVar, Frame, Life, Prop, PropState, Slot, Space, Status, Stop, Susp, TState,
    Thread, VarInfo, Vm, TOP,
};

fn err(kind: &str, info: Term) -> Stop {
    crate::vm::error(kind, info)
}

impl Status {
    pub fn to_term(self) -> Term {
        match self {
            Status::Succeeded => Term::atom("succeeded"),
            Status::Alternatives(n) => Term::tuple("alternatives", vec![Term::Int(n)]),
            Status::Failed => Term::atom("failed"),
            Status::Merged => Term::atom("merged"),
            Status::Suspended => Term::atom("suspended"),
        }
    }
}

impl Vm {
    pub fn new_space_under(&mut self, parent: SpaceId) -> SpaceId {
        let id = SpaceId(self.spaces.len() as u32);
        let depth = self.spaces[parent.index()].depth + 1;
        self.spaces.push(Space {
            parent: Some(parent),
            children: Vec::new(),
            depth,
            root: VarId(0),
            overlay: HashMap::new(),
            locals: Vec::new(),
            threads: Default::default(),
            props: Vec::new(),
            choice: None,
            life: Life::Live,
            active: 0,
            status: None,
            ask_waiters: Vec::new(),
        });
        let root = self.new_var(id);
        self.spaces[id.index()].root = root;
        self.spaces[parent.index()].children.push(id);
        id
    }

    /// Every space of the subtree rooted at `s`, parents before children.
    pub fn subtree(&self, s: SpaceId) -> Vec<SpaceId> {
        let mut out = vec![s];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.spaces[out[i].index()].children.iter().copied());
            i += 1;
        }
        out
    }

    /// The cached status, when the space is stable or terminal.
    pub fn status(&self, s: SpaceId) -> Option<Status> {
        let sp = &self.spaces[s.index()];
        match sp.life {
            Life::Failed => Some(Status::Failed),
            Life::Merged => Some(Status::Merged),
            Life::Live => sp.status,
        }
    }

    pub(crate) fn classify(&mut self, s: SpaceId) {
        let sp = &self.spaces[s.index()];
        if sp.life != Life::Live || sp.active > 0 || s == TOP {
            return;
        }
        let depth = sp.depth;
        let mut waiting_outside = false;
        'outer: for d in self.subtree(s) {
            for t in &self.spaces[d.index()].threads {
                if let TState::Suspended(v) = self.threads[t.index()].state {
                    let home = self.vars[v.index()].home;
                    if self.spaces[home.index()].depth < depth {
                        waiting_outside = true;
                        break 'outer;
                    }
                }
            }
        }
        let sp = &self.spaces[s.index()];
        let status = if waiting_outside {
            Status::Suspended
        } else if let Some(c) = &sp.choice {
            Status::Alternatives(c.n)
        } else {
            Status::Succeeded
        };
        self.spaces[s.index()].status = Some(status);
        if status.is_stable() {
            self.answer_waiters(s, status);
        }
    }

    fn answer_waiters(&mut self, s: SpaceId, status: Status) {
        let waiters = std::mem::take(&mut self.spaces[s.index()].ask_waiters);
        let Some(parent) = self.spaces[s.index()].parent else {
            return;
        };
        if self.spaces[parent.index()].life != Life::Live {
            return;
        }
        let answer = status.to_term();
        for w in waiters {
            match self.unify(&w, &answer, parent) {
                Ok(()) => {}
                Err(Clash::Fail) if parent != TOP => self.fail_space(parent),
                Err(Clash::Fail) => {}
                Err(Clash::Need(v)) => {
                    self.fire_trigger(v);
                    self.spawn_eq(w, answer.clone(), parent);
                }
            }
        }
    }

    /// Fails `s` and everything below it: threads and propagators are
    /// discarded and askers are told `failed`.
    pub fn fail_space(&mut self, s: SpaceId) {
        if s == TOP || self.spaces[s.index()].life != Life::Live {
            return;
        }
        let tree = self.subtree(s);
        for d in &tree {
            let threads: Vec<ThreadId> = self.spaces[d.index()].threads.iter().copied().collect();
            for t in threads {
                self.park(t, TState::Done);
            }
            for p in std::mem::take(&mut self.spaces[d.index()].props) {
                self.props[p.index()].state = PropState::Dead;
            }
            let overlay = std::mem::take(&mut self.spaces[d.index()].overlay);
            for v in overlay.keys() {
                self.vars[v.index()].shadows.retain(|x| x != d);
            }
            let sp = &mut self.spaces[d.index()];
            sp.life = Life::Failed;
            sp.status = Some(Status::Failed);
            sp.choice = None;
            sp.children.clear();
            if *d != s {
                sp.ask_waiters.clear();
            }
        }
        if let Some(p) = self.spaces[s.index()].parent {
            self.spaces[p.index()].children.retain(|c| *c != s);
        }
        self.answer_waiters(s, Status::Failed);
    }

    fn child_of(&self, target: &Term, s: SpaceId) -> Result<SpaceId, Stop> {
        match self.deref(target, s) {
            Term::Var(v) => Err(Stop::Suspend(v)),
            Term::Space(id) => {
                if self.spaces[id.index()].parent == Some(s) || self.spaces[id.index()].life == Life::Merged {
                    Ok(id)
                } else {
                    Err(err("spaceNotChild", Term::Space(id)))
                }
            }
            other => Err(err("notSpace", other)),
        }
    }

    fn live_child(&self, target: &Term, s: SpaceId) -> Result<SpaceId, Stop> {
        let id = self.child_of(target, s)?;
        match self.spaces[id.index()].life {
            Life::Live => Ok(id),
            Life::Failed => Err(err("spaceFailed", Term::Space(id))),
            Life::Merged => Err(err("spaceMerged", Term::Space(id))),
        }
    }

    fn proc_arg(&self, p: &Term, s: SpaceId) -> Result<Term, Stop> {
        match self.deref(p, s) {
            Term::Var(v) => Err(Stop::Suspend(v)),
            t @ (Term::Proc(_) | Term::Builtin(_)) => Ok(t),
            other => Err(err("notProcedure", other)),
        }
    }

    /// Starts `{P Root}` in space `target`.
    fn spawn_apply(&mut self, p: Term, target: SpaceId) {
        let root = Term::Var(self.spaces[target.index()].root);
        let code = self.code.apply.clone();
        let env = Env::empty().bind(self.code.p, p).bind(self.code.x, root);
        self.spawn(code, env, target);
    }

    pub(crate) fn space_op(&mut self, t: ThreadId, op: SpaceOp, a: &Term, b: &Term) -> Exec {
        let s = self.threads[t.index()].space;
        let r = self.space_op_inner(t, op, a, b, s);
        if !matches!(r, Err(Stop::Suspend(_))) {
            *self.stats.space_ops.entry(op.name()).or_insert(0) += 1;
            if let Term::Space(target) = self.deref(a, s) {
                if self.is_ancestor_or_self(target, s) {
                    self.stats.inside_ops += 1;
                }
            }
        }
        r
    }

    fn space_op_inner(&mut self, t: ThreadId, op: SpaceOp, a: &Term, b: &Term, s: SpaceId) -> Exec {
        match op {
            SpaceOp::NewSpace => {
                let p = self.proc_arg(a, s)?;
                let id = self.new_space_under(s);
                self.spawn_apply(p, id);
                self.tell_eq(b, &Term::Space(id), s)
            }
            SpaceOp::Choose => {
                if s == TOP {
                    return Err(err("chooseAtTop", Term::nil()));
                }
                let n = match self.deref(a, s) {
                    Term::Var(v) => return Err(Stop::Suspend(v)),
                    Term::Int(n) if n >= 1 => n,
                    other => return Err(err("chooseArity", other)),
                };
                if self.spaces[s.index()].choice.is_some() {
                    return Err(err("secondChoice", Term::Int(n)));
                }
                self.spaces[s.index()].choice = Some(Choice {
                    thread: t,
                    n,
                    result: b.clone(),
                });
                self.stats.choose_events += 1;
                self.trace_event(t, || format!("choose({n})"));
                Err(Stop::Block)
            }
            SpaceOp::Ask => {
                let id = self.child_of(a, s)?;
                match self.status(id) {
                    Some(Status::Merged) => Err(err("spaceMerged", Term::Space(id))),
                    Some(st) if st.is_stable() => self.tell_eq(b, &st.to_term(), s),
                    _ => {
                        self.spaces[id.index()].ask_waiters.push(b.clone());
                        Ok(())
                    }
                }
            }
            SpaceOp::Commit => {
                let id = self.live_child(a, s)?;
                let i = match self.deref(b, s) {
                    Term::Var(v) => return Err(Stop::Suspend(v)),
                    Term::Int(i) => i,
                    other => return Err(err("commitIndex", other)),
                };
                let n = match (self.status(id), &self.spaces[id.index()].choice) {
                    (Some(Status::Alternatives(n)), Some(_)) => n,
                    _ => return Err(err("notDistributable", Term::Space(id))),
                };
                if i < 1 || i > n {
                    return Err(err("commitRange", Term::Int(i)));
                }
                let choice = self.spaces[id.index()].choice.take().unwrap();
                self.stats.commits += 1;
                self.trace_event(choice.thread, || format!("commit({i})"));
                self.make_runnable(choice.thread);
                let r = self.unify(&choice.result, &Term::Int(i), id);
                match r {
                    Ok(()) => {}
                    Err(Clash::Fail) => self.fail_space(id),
                    Err(Clash::Need(v)) => {
                        self.fire_trigger(v);
                        self.spawn_eq(choice.result, Term::Int(i), id);
                    }
                }
                Ok(())
            }
            SpaceOp::Clone => {
                let id = self.live_child(a, s)?;
                self.await_stable(id, s)?;
                let c = self.clone_space(id);
                self.tell_eq(b, &Term::Space(c), s)
            }
            SpaceOp::Inject => {
                let id = self.live_child(a, s)?;
                let p = self.proc_arg(b, s)?;
                self.spawn_apply(p, id);
                Ok(())
            }
            SpaceOp::Merge => {
                let id = self.live_child(a, s)?;
                if self.await_stable(id, s)? != Status::Succeeded {
                    return Err(err("notSucceeded", Term::Space(id)));
                }
                let root = self.merge_space(id, s);
                if s != TOP && self.spaces[s.index()].life != Life::Live {
                    return Ok(());
                }
                self.tell_eq(b, &root, s)
            }
        }
    }

    /// The status of `id` once stable; until then the thread waits on a
    /// variable that the classifier binds.
    fn await_stable(&mut self, id: SpaceId, s: SpaceId) -> Result<Status, Stop> {
        match self.status(id) {
            Some(st) if st.is_stable() => Ok(st),
            _ => {
                let w = self.new_var(s);
                self.spaces[id.index()].ask_waiters.push(Term::Var(w));
                Err(Stop::Suspend(w))
            }
        }
    }

    /// Folds a succeeded child into its parent `p` and returns the root.
    fn merge_space(&mut self, c: SpaceId, p: SpaceId) -> Term {
        let child = &mut self.spaces[c.index()];
        child.life = Life::Merged;
        child.status = Some(Status::Merged);
        let locals = std::mem::take(&mut child.locals);
        let threads = std::mem::take(&mut child.threads);
        let props = std::mem::take(&mut child.props);
        let children = std::mem::take(&mut child.children);
        let overlay = std::mem::take(&mut child.overlay);
        let root = child.root;
        self.spaces[p.index()].children.retain(|x| *x != c);

        for v in &locals {
            self.vars[v.index()].home = p;
        }
        if p != TOP {
            self.spaces[p.index()].locals.extend(locals);
        }
        for t in &threads {
            self.threads[t.index()].space = p;
        }
        self.spaces[p.index()].threads.extend(threads);
        for q in &props {
            self.props[q.index()].space = p;
        }
        self.spaces[p.index()].props.extend(props);
        for k in &children {
            self.spaces[k.index()].parent = Some(p);
            for d in self.subtree(*k) {
                self.spaces[d.index()].depth -= 1;
            }
        }
        self.spaces[p.index()].children.extend(children);

        let mut entries: Vec<(VarId, Slot)> = overlay.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        for (v, _) in &entries {
            self.vars[v.index()].shadows.retain(|x| *x != c);
        }
        for (v, slot) in entries {
            let r = match &slot {
                Slot::Bound(t) => self.unify(&Term::Var(v), t, p),
                Slot::Dom(d) => self.tell_dom(&Term::Var(v), d, p),
                Slot::Free => Ok(()),
            };
            match r {
                Ok(()) => {}
                Err(Clash::Fail) => {
                    if p == TOP {
                        self.signal_top_failure();
                    } else {
                        self.fail_space(p);
                    }
                    break;
                }
                Err(Clash::Need(x)) => {
                    self.fire_trigger(x);
                    if let Slot::Bound(t) = slot {
                        self.spawn_eq(Term::Var(v), t, p);
                    }
                }
            }
        }
        Term::Var(root)
    }

    /// Deep copy of the subtree rooted at `s`, attached to the same parent.
    pub(crate) fn clone_space(&mut self, s: SpaceId) -> SpaceId {
        self.stats.clones += 1;
        let tree = self.subtree(s);
        let mut rn = Renamer::default();
        let base = self.spaces.len() as u32;
        for (i, d) in tree.iter().enumerate() {
            rn.spaces.insert(*d, SpaceId(base + i as u32));
        }
        let mut next_var = self.vars.len() as u32;
        for d in &tree {
            for v in &self.spaces[d.index()].locals {
                rn.vars.insert(*v, VarId(next_var));
                next_var += 1;
            }
        }
        let mut next_thread = self.threads.len() as u32;
        for d in &tree {
            for t in &self.spaces[d.index()].threads {
                rn.threads.insert(*t, ThreadId(next_thread));
                next_thread += 1;
            }
        }

        // variables local to the subtree
        for d in &tree {
            let locals = self.spaces[d.index()].locals.clone();
            for v in locals {
                let info = &self.vars[v.index()];
                let slot = info.slot.clone();
                let trigger = info.trigger.clone();
                let shadows: Vec<SpaceId> = info.shadows.iter().filter_map(|x| rn.spaces.get(x).copied()).collect();
                let home = rn.spaces[&info.home];
                let slot = rn.slot(&slot);
                let trigger = trigger.map(|t| rn.term(&t));
                self.vars.push(VarInfo {
                    home,
                    slot,
                    susp: Vec::new(),
                    trigger,
                    shadows,
                });
            }
        }

        // spaces
        for d in &tree {
            let sp = &self.spaces[d.index()];
            let new_id = rn.spaces[d];
            let mut overlay = HashMap::with_capacity(sp.overlay.len());
            let entries: Vec<(VarId, Slot)> = sp.overlay.iter().map(|(k, v)| (*k, v.clone())).collect();
            let parent = if *d == s { sp.parent } else { sp.parent.map(|p| rn.spaces[&p]) };
            let children: Vec<SpaceId> = sp.children.iter().map(|c| rn.spaces[c]).collect();
            let locals: Vec<VarId> = sp.locals.iter().map(|v| rn.vars[v]).collect();
            let threads = sp.threads.iter().map(|t| rn.threads[t]).collect();
            let choice = sp.choice.as_ref().map(|c| (c.thread, c.n, c.result.clone()));
            let waiters = if *d == s { Vec::new() } else { sp.ask_waiters.clone() };
            let (depth, root, life, status) = (sp.depth, sp.root, sp.life, sp.status);
            for (k, slot) in entries {
                let key = rn.var(k);
                if key == k && !self.vars[k.index()].shadows.contains(&new_id) {
                    self.vars[k.index()].shadows.push(new_id);
                }
                overlay.insert(key, rn.slot(&slot));
            }
            let choice = choice.map(|(t, n, r)| Choice {
                thread: rn.threads[&t],
                n,
                result: rn.term(&r),
            });
            let ask_waiters = waiters.iter().map(|w| rn.term(w)).collect();
            self.spaces.push(Space {
                parent,
                children,
                depth,
                root: rn.var(root),
                overlay,
                locals,
                threads,
                props: Vec::new(),
                choice,
                life,
                active: 0,
                status,
                ask_waiters,
            });
        }
        let root = rn.spaces[&s];
        let parent = self.spaces[s.index()].parent.unwrap();
        self.spaces[parent.index()].children.push(root);

        // threads
        for d in &tree {
            let ts: Vec<ThreadId> = self.spaces[d.index()].threads.iter().copied().collect();
            for t in ts {
                let th = &self.threads[t.index()];
                let stack: Vec<Frame> = th.stack.clone();
                let state = th.state.clone();
                let stack = stack
                    .iter()
                    .map(|f| match f {
                        Frame::Stmt(k, env) => Frame::Stmt(k.clone(), rn.env(env)),
                        Frame::Catch(x, k, env) => Frame::Catch(*x, k.clone(), rn.env(env)),
                    })
                    .collect();
                let new_t = rn.threads[&t];
                let state = match state {
                    TState::Suspended(v) => {
                        let nv = rn.var(v);
                        self.vars[nv.index()].susp.push(Susp::Thread(new_t));
                        TState::Suspended(nv)
                    }
                    other => other,
                };
                debug_assert_eq!(self.threads.len(), new_t.index());
                self.threads.push(Thread {
                    space: rn.spaces[d],
                    stack,
                    state,
                });
            }
        }

        // propagators
        for d in &tree {
            let ps = self.spaces[d.index()].props.clone();
            let new_space = rn.spaces[d];
            for p in ps {
                let prop = &self.props[p.index()];
                if prop.state != PropState::Active {
                    continue;
                }
                let constraint = prop.constraint.map_vars(|x| match x {
                    FdVar::Var(v) => FdVar::Var(rn.var(v)),
                    c => c,
                });
                let state = prop.state;
                let id = crate::term::PropId(self.props.len() as u32);
                for x in constraint.vars() {
                    if let FdVar::Var(v) = x {
                        let susp = &mut self.vars[v.index()].susp;
                        if !susp.contains(&Susp::Prop(id)) {
                            susp.push(Susp::Prop(id));
                        }
                    }
                }
                self.props.push(Prop {
                    space: new_space,
                    constraint,
                    state,
                    queued: false,
                });
                self.spaces[new_space.index()].props.push(id);
            }
        }
        self.stats.threads_spawned += rn.threads.len() as u64;
        root
    }
}

/// Consistent renaming of the variables, spaces and threads of a subtree.
#[derive(Default)]
struct Renamer {
    vars: HashMap<VarId, VarId>,
    spaces: HashMap<SpaceId, SpaceId>,
    threads: HashMap<ThreadId, ThreadId>,
    records: HashMap<usize, Term>,
    procs: HashMap<usize, Term>,
    envs: HashMap<*const EnvNode, Env>,
}

impl Renamer {
    fn var(&self, v: VarId) -> VarId {
        self.vars.get(&v).copied().unwrap_or(v)
    }

    fn slot(&mut self, s: &Slot) -> Slot {
        match s {
            Slot::Bound(t) => Slot::Bound(self.term(t)),
            other => other.clone(),
        }
    }

    fn term(&mut self, t: &Term) -> Term {
        self.term_changed(t).0
    }

    fn term_changed(&mut self, t: &Term) -> (Term, bool) {
        match t {
            Term::Var(v) => match self.vars.get(v) {
                Some(n) => (Term::Var(*n), true),
                None => (t.clone(), false),
            },
            Term::Space(s) => match self.spaces.get(s) {
                Some(n) => (Term::Space(*n), true),
                None => (t.clone(), false),
            },
            Term::Record(r) => {
                let key = Rc::as_ptr(r) as usize;
                if let Some(done) = self.records.get(&key) {
                    return (done.clone(), !matches!(done, Term::Record(d) if Rc::ptr_eq(d, r)));
                }
                let mut changed = false;
                let mut fields = Vec::with_capacity(r.fields.len());
                for (f, x) in &r.fields {
                    let (y, c) = self.term_changed(x);
                    changed |= c;
                    fields.push((*f, y));
                }
                let out = if changed {
                    Term::Record(Rc::new(Record {
                        label: r.label,
                        fields,
                    }))
                } else {
                    t.clone()
                };
                self.records.insert(key, out.clone());
                (out, changed)
            }
            Term::Proc(c) => {
                let key = Rc::as_ptr(c) as usize;
                if let Some(done) = self.procs.get(&key) {
                    return (done.clone(), !matches!(done, Term::Proc(d) if Rc::ptr_eq(d, c)));
                }
                let env = self.env(&c.env);
                let changed = env.ptr() != c.env.ptr();
                let out = if changed {
                    Term::Proc(Rc::new(Closure {
                        name: c.name,
                        params: c.params.clone(),
                        body: c.body.clone(),
                        env,
                    }))
                } else {
                    t.clone()
                };
                self.procs.insert(key, out.clone());
                (out, changed)
            }
            _ => (t.clone(), false),
        }
    }

    fn env(&mut self, env: &Env) -> Env {
        let mut pending: Vec<Rc<EnvNode>> = Vec::new();
        let mut cur = env.0.clone();
        let mut tail = Env::empty();
        while let Some(node) = cur {
            if let Some(done) = self.envs.get(&Rc::as_ptr(&node)) {
                tail = done.clone();
                break;
            }
            cur = node.next.0.clone();
            pending.push(node);
        }
        while let Some(node) = pending.pop() {
            let (value, changed) = self.term_changed(&node.value);
            let out = if !changed && tail.ptr() == node.next.ptr() {
                Env(Some(node.clone()))
            } else {
                tail.bind(node.name, value)
            };
            self.envs.insert(Rc::as_ptr(&node), out.clone());
            tail = out;
        }
        tail
    }
}
