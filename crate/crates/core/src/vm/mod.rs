//! The abstract machine: threads, the scheduler, and the state shared by the
//! store, spaces and propagators.

mod builtins;
mod exec;
mod fdglue;
pub mod render;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::rc::Rc;

use crate::ast::kernel::{Ident, Kernel};
use crate::fd::{Constraint, FDomain};
use crate::symbol::Symbol;
use crate::term::{Env, PropId, SpaceId, Term, ThreadId, VarId};

pub use builtins::{builtin_arity, builtin_name, builtin_names, failure_term};
pub(crate) use exec::error;
pub use fdglue::FdVar;

pub const TOP: SpaceId = SpaceId(0);

#[derive(Clone, Debug)]
pub struct Config {
    /// Reductions a thread may run before it is preempted.
    pub slice: u32,
    /// Total reductions before the run is abandoned.
    pub max_reductions: u64,
    pub trace: bool,
    /// Newly runnable threads go to the front of the run queue.
    pub reverse_queue: bool,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            slice: 1000,
            max_reductions: 400_000_000,
            trace: false,
            reverse_queue: false,
        }
    }
}

/// Binding state of a variable as seen from one space.
#[derive(Clone, Debug)]
pub enum Slot {
    Free,
    Bound(Term),
    Dom(FDomain),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Susp {
    Thread(ThreadId),
    Prop(PropId),
}

#[derive(Debug)]
pub struct VarInfo {
    pub home: SpaceId,
    /// Binding in the home space.
    pub slot: Slot,
    pub susp: Vec<Susp>,
    pub trigger: Option<Term>,
    /// Descendant spaces whose overlay holds an entry for this variable.
    pub shadows: Vec<SpaceId>,
}

#[derive(Clone, Debug)]
pub enum Frame {
    Stmt(Rc<Kernel>, Env),
    Catch(Ident, Rc<Kernel>, Env),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TState {
    Runnable,
    Suspended(VarId),
    /// Waiting in `Choose` for a commit.
    Blocked,
    Done,
}

#[derive(Debug)]
pub struct Thread {
    pub space: SpaceId,
    pub stack: Vec<Frame>,
    pub state: TState,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Status {
    /// Not stable: waits on a binding from an ancestor.
    Suspended,
    Succeeded,
    Alternatives(i64),
    Failed,
    Merged,
}

impl Status {
    pub fn is_stable(self) -> bool {
        !matches!(self, Status::Suspended)
    }
}

#[derive(Debug)]
pub struct Choice {
    pub thread: ThreadId,
    pub n: i64,
    pub result: Term,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Life {
    Live,
    Failed,
    Merged,
}

#[derive(Debug)]
pub struct Space {
    pub parent: Option<SpaceId>,
    pub children: Vec<SpaceId>,
    pub depth: usize,
    pub root: VarId,
    pub overlay: HashMap<VarId, Slot>,
    pub locals: Vec<VarId>,
    pub threads: BTreeSet<ThreadId>,
    pub props: Vec<PropId>,
    pub choice: Option<Choice>,
    pub life: Life,
    /// Runnable threads in this space and its descendants.
    pub active: usize,
    /// Classification computed when the subtree last went quiet.
    pub status: Option<Status>,
    pub ask_waiters: Vec<Term>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PropState {
    Active,
    Entailed,
    Dead,
}

#[derive(Debug)]
pub struct Prop {
    pub space: SpaceId,
    pub constraint: Constraint<FdVar>,
    pub state: PropState,
    pub queued: bool,
}

/// Counters for instrumentation and audits.
#[derive(Clone, Debug, Default)]
pub struct Stats {
    pub reductions: u64,
    pub threads_spawned: u64,
    pub triggers_installed: u64,
    pub triggers_fired: u64,
    pub choose_events: u64,
    pub commits: u64,
    pub clones: u64,
    pub space_ops: BTreeMap<&'static str, u64>,
    /// Space operations issued by threads running inside the space they target
    /// or a descendant of it (engines must stay outside).
    pub inside_ops: u64,
    pub port_sends: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    /// No runnable threads and none suspended at top level.
    Halted,
    /// Top-level threads remain suspended.
    Deadlock(Vec<(ThreadId, VarId)>),
    BudgetExhausted,
}

/// Interruption of a statement.
#[derive(Debug)]
pub enum Stop {
    /// Needs the value of the variable; the statement will be retried.
    Suspend(VarId),
    Raise(Term),
    /// Thread waits for a commit.
    Block,
}

pub type Exec = Result<(), Stop>;

/// Fixed statements the machine spawns on its own behalf.
pub(crate) struct Code {
    pub eq: Rc<Kernel>,
    pub trigger: Rc<Kernel>,
    /// `{P R}`
    pub apply: Rc<Kernel>,
    pub x: Ident,
    pub y: Ident,
    pub p: Ident,
}

impl Code {
    fn new() -> Code {
        let x = Symbol::intern("X");
        let y = Symbol::intern("Y");
        let p = Symbol::intern("P");
        let trigger = Kernel::Local(
            vec![y],
            Rc::new(Kernel::seq(vec![
                Kernel::Apply(p, vec![y]),
                Kernel::Eq(x, y),
            ])),
        );
        Code {
            eq: Rc::new(Kernel::Eq(x, y)),
            trigger: Rc::new(trigger),
            apply: Rc::new(Kernel::Apply(p, vec![x])),
            x,
            y,
            p,
        }
    }
}

pub struct Vm {
    pub config: Config,
    pub vars: Vec<VarInfo>,
    pub spaces: Vec<Space>,
    pub threads: Vec<Thread>,
    pub props: Vec<Prop>,
    pub cells: Vec<Term>,
    pub ports: Vec<Term>,
    pub names: u32,
    pub(crate) queue: VecDeque<ThreadId>,
    pub(crate) agenda: VecDeque<PropId>,
    pub(crate) dirty: Vec<SpaceId>,
    pub log: Vec<String>,
    pub trace: Vec<String>,
    pub stats: Stats,
    /// Exceptions that escaped a top-level thread.
    pub uncaught: Vec<Term>,
    pub globals: Env,
    /// Failure raised by propagation at top level, delivered to the thread
    /// that caused it.
    pub(crate) top_failure: bool,
    pub(crate) code: Code,
    pub(crate) free: Slot,
}

impl Vm {
    pub fn new(config: Config) -> Vm {
        let mut vm = Vm {
            config,
            vars: Vec::new(),
            spaces: Vec::new(),
            threads: Vec::new(),
            props: Vec::new(),
            cells: Vec::new(),
            ports: Vec::new(),
            names: 0,
            queue: VecDeque::new(),
            agenda: VecDeque::new(),
            dirty: Vec::new(),
            log: Vec::new(),
            trace: Vec::new(),
            stats: Stats::default(),
            uncaught: Vec::new(),
            globals: Env::empty(),
            top_failure: false,
            code: Code::new(),
            free: Slot::Free,
        };
        vm.spaces.push(Space {
            parent: None,
            children: Vec::new(),
            depth: 0,
            root: VarId(0),
            overlay: HashMap::new(),
            locals: Vec::new(),
            threads: BTreeSet::new(),
            props: Vec::new(),
            choice: None,
            life: Life::Live,
            active: 0,
            status: None,
            ask_waiters: Vec::new(),
        });
        let root = vm.new_var(TOP);
        vm.spaces[0].root = root;
        builtins::install(&mut vm);
        vm
    }

    pub fn define_global(&mut self, name: &str, value: Term) {
        self.globals = self.globals.bind(Symbol::intern(name), value);
    }

    pub fn global(&self, name: &str) -> Option<Term> {
        self.globals.lookup(Symbol::intern(name)).cloned()
    }

    /// Names bound in the global environment, innermost first.
    pub fn global_names(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        let mut cur = &self.globals.0;
        while let Some(node) = cur {
            out.push(node.name);
            cur = &node.next.0;
        }
        out
    }

    pub fn space(&self, s: SpaceId) -> &Space {
        &self.spaces[s.index()]
    }

    pub fn thread(&self, t: ThreadId) -> &Thread {
        &self.threads[t.index()]
    }

    pub(crate) fn trace_event(&mut self, t: ThreadId, event: impl FnOnce() -> String) {
        if self.config.trace {
            let s = self.threads[t.index()].space;
            let line = format!("T{}@S{} {}", t.0, s.0, event());
            self.trace.push(line);
        }
    }

    /// Starts a thread running `stmt` under `env` in space `s`.
    pub fn spawn(&mut self, stmt: Rc<Kernel>, env: Env, s: SpaceId) -> ThreadId {
        let id = ThreadId(self.threads.len() as u32);
        self.threads.push(Thread {
            space: s,
            stack: vec![Frame::Stmt(stmt, env)],
            state: TState::Done,
        });
        self.spaces[s.index()].threads.insert(id);
        self.stats.threads_spawned += 1;
        self.trace_event(id, || "spawn".into());
        self.make_runnable(id);
        id
    }

    fn adjust_active(&mut self, s: SpaceId, up: bool) {
        let mut cur = Some(s);
        while let Some(sp) = cur {
            let space = &mut self.spaces[sp.index()];
            if up {
                space.active += 1;
                space.status = None;
            } else {
                space.active -= 1;
                if space.active == 0 && sp != TOP {
                    self.dirty.push(sp);
                }
            }
            cur = self.spaces[sp.index()].parent;
        }
    }

    pub(crate) fn make_runnable(&mut self, t: ThreadId) {
        let th = &mut self.threads[t.index()];
        if th.state == TState::Runnable {
            return;
        }
        th.state = TState::Runnable;
        let s = th.space;
        self.adjust_active(s, true);
        if self.config.reverse_queue {
            self.queue.push_front(t);
        } else {
            self.queue.push_back(t);
        }
    }

    /// Moves a runnable thread into a non-runnable state.
    pub(crate) fn park(&mut self, t: ThreadId, state: TState) {
        let th = &mut self.threads[t.index()];
        let was_runnable = th.state == TState::Runnable;
        th.state = state;
        let s = th.space;
        if th.state == TState::Done {
            th.stack = Vec::new();
            self.spaces[s.index()].threads.remove(&t);
        }
        if was_runnable {
            self.adjust_active(s, false);
        }
    }

    /// Wakes a suspended thread; threads in any other state are left alone.
    pub(crate) fn wake_thread(&mut self, t: ThreadId) {
        if matches!(self.threads[t.index()].state, TState::Suspended(_)) {
            self.trace_event(t, || "wake".into());
            self.make_runnable(t);
        }
    }

    pub fn runnable_count(&self) -> usize {
        self.spaces[0].active
    }

    /// Runs until no thread is runnable or the reduction budget is spent.
    pub fn run(&mut self) -> Outcome {
        self.settle();
        while let Some(t) = self.queue.pop_front() {
            if self.threads[t.index()].state != TState::Runnable {
                continue;
            }
            let mut budget = self.config.slice;
            loop {
                if self.stats.reductions >= self.config.max_reductions {
                    self.queue.push_front(t);
                    return Outcome::BudgetExhausted;
                }
                self.stats.reductions += 1;
                self.step(t);
                self.settle();
                if self.threads[t.index()].state != TState::Runnable {
                    break;
                }
                budget -= 1;
                if budget == 0 {
                    self.queue.push_back(t);
                    break;
                }
            }
        }
        let suspended: Vec<(ThreadId, VarId)> = self.spaces[0]
            .threads
            .iter()
            .filter_map(|t| match self.threads[t.index()].state {
                TState::Suspended(v) => Some((*t, v)),
                _ => None,
            })
            .collect();
        if suspended.is_empty() {
            Outcome::Halted
        } else {
            Outcome::Deadlock(suspended)
        }
    }

    /// Propagation and space classification after a reduction.
    fn settle(&mut self) {
        loop {
            self.run_agenda();
            if self.top_failure {
                // no thread to blame
                self.top_failure = false;
                self.uncaught.push(failure_term());
            }
            if self.dirty.is_empty() {
                break;
            }
            let mut dirty = std::mem::take(&mut self.dirty);
            dirty.sort_by_key(|s| (std::cmp::Reverse(self.spaces[s.index()].depth), s.0));
            dirty.dedup();
            for s in dirty {
                self.classify(s);
            }
        }
    }

    /// Executes one kernel statement of thread `t`.
    fn step(&mut self, t: ThreadId) {
        let Some(frame) = self.threads[t.index()].stack.pop() else {
            self.finish(t);
            return;
        };
        let (stmt, env) = match frame {
            Frame::Stmt(k, env) => (k, env),
            Frame::Catch(..) => {
                if self.threads[t.index()].stack.is_empty() {
                    self.finish(t);
                }
                return;
            }
        };
        let r = self.exec(t, &stmt, &env);
        self.run_agenda();
        let r = if self.top_failure {
            self.top_failure = false;
            match r {
                Ok(()) | Err(Stop::Suspend(_)) | Err(Stop::Block) => {
                    Err(Stop::Raise(failure_term()))
                }
                other => other,
            }
        } else {
            r
        };
        match r {
            Ok(()) => {
                if self.threads[t.index()].stack.is_empty()
                    && self.threads[t.index()].state == TState::Runnable
                {
                    self.finish(t);
                }
            }
            Err(Stop::Suspend(v)) => {
                self.threads[t.index()].stack.push(Frame::Stmt(stmt, env));
                self.suspend_on(t, v);
            }
            Err(Stop::Block) => {
                self.park(t, TState::Blocked);
            }
            Err(Stop::Raise(e)) => self.raise(t, e),
        }
    }

    fn finish(&mut self, t: ThreadId) {
        if self.threads[t.index()].state == TState::Done {
            return;
        }
        self.trace_event(t, || "exit".into());
        self.park(t, TState::Done);
    }

    fn suspend_on(&mut self, t: ThreadId, v: VarId) {
        if self.threads[t.index()].state != TState::Runnable {
            return;
        }
        self.trace_event(t, || format!("suspend(_V{})", v.0));
        self.vars[v.index()].susp.push(Susp::Thread(t));
        self.park(t, TState::Suspended(v));
        if self.vars[v.index()].trigger.is_some() {
            self.fire_trigger(v);
        }
    }

    fn raise(&mut self, t: ThreadId, e: Term) {
        self.trace_event(t, || "raise".into());
        loop {
            match self.threads[t.index()].stack.pop() {
                Some(Frame::Catch(x, handler, env)) => {
                    let env = env.bind(x, e);
                    self.threads[t.index()].stack.push(Frame::Stmt(handler, env));
                    if self.threads[t.index()].state != TState::Runnable {
                        self.make_runnable(t);
                    }
                    return;
                }
                Some(Frame::Stmt(..)) => {}
                None => break,
            }
        }
        let s = self.threads[t.index()].space;
        self.trace_event(t, || "exit".into());
        self.park(t, TState::Done);
        if s == TOP {
            self.uncaught.push(e);
        } else {
            self.fail_space(s);
        }
    }

    pub(crate) fn schedule_prop(&mut self, p: PropId) {
        let prop = &mut self.props[p.index()];
        if prop.state == PropState::Active && !prop.queued {
            prop.queued = true;
            self.agenda.push_back(p);
        }
    }

    pub(crate) fn pop_agenda(&mut self) -> Option<PropId> {
        self.agenda.pop_front()
    }

    pub(crate) fn signal_top_failure(&mut self) {
        self.top_failure = true;
    }

    /// Suspended top-level threads with the variable each waits on.
    pub fn blocked_threads(&self) -> Vec<(ThreadId, VarId)> {
        self.spaces[0]
            .threads
            .iter()
            .filter_map(|t| match self.threads[t.index()].state {
                TState::Suspended(v) => Some((*t, v)),
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stdlib::{run_source, RunResult, Session};

    fn run(src: &str) -> (RunResult, Vec<String>) {
        run_source(src, Config::default()).unwrap()
    }

    fn traced(src: &str) -> (Vec<String>, Vec<String>) {
        let mut s = Session::new(Config {
            trace: true,
            ..Config::default()
        });
        s.eval(src).unwrap();
        (std::mem::take(&mut s.vm.log), std::mem::take(&mut s.vm.trace))
    }

    #[test]
    fn exit_outcomes() {
        assert_eq!(run("skip").0, RunResult::Halted);
        assert!(matches!(run("raise a end").0, RunResult::Uncaught(_)));
        assert_eq!(run("local X in case X of a then skip end end").0, RunResult::Deadlock(1));
        let mut cfg = Config::default();
        cfg.max_reductions = 10_000;
        let (r, _) = run_source("declare proc {L} {L} end {L}", cfg).unwrap();
        assert_eq!(r, RunResult::BudgetExhausted);
    }

    #[test]
    fn trace_lines() {
        let (log, trace) = traced("local X in thread X = 1 end {Browse X} end");
        assert_eq!(log, ["1"]);
        let events: Vec<&str> = trace.iter().map(|l| l.split_once(' ').unwrap().1).collect();
        assert!(trace.iter().all(|l| l.starts_with('T') && l.contains("@S0 ")));
        assert!(events.contains(&"spawn"));
        assert!(events.iter().any(|e| e.starts_with("suspend(_V")));
        assert!(events.contains(&"wake"));
        assert_eq!(events.iter().filter(|e| **e == "exit").count(), 2);
    }

    #[test]
    fn choose_and_commit_are_traced() {
        let (_, trace) = traced("{Browse {Search.base.all proc {$ X} choice X = 1 [] X = 2 end end}}");
        assert!(trace.iter().any(|l| l.ends_with(" choose(2)") && !l.contains("@S0 ")));
        assert!(trace.iter().any(|l| l.ends_with(" commit(1)")));
        assert!(trace.iter().any(|l| l.ends_with(" commit(2)")));
    }

    #[test]
    fn top_level_failure_is_an_exception() {
        let (_, log) = run("try 1 = 2 catch failure(debug:_) then {Browse caught} end");
        assert_eq!(log, ["caught"]);
        let (r, _) = run("local X in X = 1 X = 2 end");
        assert!(matches!(r, RunResult::Uncaught(_)));
    }

    #[test]
    fn triggers_fire_once_on_need() {
        let mut s = Session::new(Config::default());
        s.eval(
            "declare X Y in
             {ByNeed proc {$ R} {Browse computing} R = 7 end X}
             {Browse waiting}
             Y = X + X
             {Browse Y}",
        )
        .unwrap();
        assert_eq!(s.vm.log, ["waiting", "computing", "14"]);
        assert_eq!(s.vm.stats.triggers_fired, 1);
    }

    #[test]
    fn unneeded_trigger_never_fires() {
        let mut s = Session::new(Config::default());
        s.eval("declare X in {ByNeed proc {$ R} R = 1 end X} {Browse done}").unwrap();
        assert_eq!(s.vm.stats.triggers_fired, 0);
    }

    #[test]
    fn threads_share_the_processor() {
        let cfg = Config {
            slice: 1,
            ..Config::default()
        };
        let mut s = Session::new(cfg);
        s.eval(
            "declare P Xs in {NewPort Xs P}
             thread {Send P 1} {Send P 2} {Send P 3} end
             thread {Send P a} {Send P b} {Send P c} end",
        )
        .unwrap();
        s.eval("declare in {ForAll [1 2 3 4 5 6] proc {$ I} {Browse {Nth Xs I}} end}").unwrap();
        let log = s.vm.log.clone();
        let nums: Vec<&String> = log.iter().filter(|x| x.parse::<i64>().is_ok()).collect();
        let atoms: Vec<&String> = log.iter().filter(|x| x.parse::<i64>().is_err()).collect();
        assert_eq!(nums, ["1", "2", "3"]);
        assert_eq!(atoms, ["a", "b", "c"]);
        assert_ne!(log[..3], ["1", "2", "3"], "slice 1 interleaves");
    }

    #[test]
    fn cells_are_top_level_only() {
        let (_, log) = run(
            "{Browse {Ask {NewSpace proc {$ X} C = {NewCell 0} in X = C end}}}",
        );
        assert_eq!(log, ["failed"]);
    }
}
