//! SMT-LIB 2 client for an external solver process (`z3 -in` by default).
//!
//! Every query runs inside its own `(push 1)` / `(pop 1)` frame, so the
//! assertion stack is empty between public calls. Models are checked against
//! the query before they are handed out.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use thiserror::Error;

use crate::formula::{Formula, Model, VarId};

/// Environment variable naming the solver binary.
pub const SOLVER_ENV: &str = "ADCL_SMT";
pub const DEFAULT_TIMEOUT_MS: u64 = 2000;
/// How long past its own timeout the solver may stay silent before the
/// process is killed. Nonlinear tactics do not always honour `:timeout`.
const BACKSTOP_GRACE_MS: u64 = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmtResult {
    Sat(Model),
    Unsat,
    Unknown(String),
}

impl SmtResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SmtResult::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SmtResult::Unsat)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entailment {
    Yes,
    /// A model of the antecedent violating the consequent.
    No(Model),
    Unknown(String),
}

impl Entailment {
    pub fn is_yes(&self) -> bool {
        matches!(self, Entailment::Yes)
    }
}

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("cannot start solver `{path}`: {source}")]
    Spawn {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver returned a model that does not satisfy the query: {formula} under {model:?}")]
    InvalidModel { formula: String, model: Model },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub path: PathBuf,
    pub timeout_ms: u64,
}

impl Default for SolverConfig {
    /// `$ADCL_SMT`, falling back to `z3` on the `PATH`.
    fn default() -> Self {
        SolverConfig {
            path: std::env::var_os(SOLVER_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("z3")),
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Logic {
    Lia,
    Nia,
}

impl Logic {
    fn name(self) -> &'static str {
        match self {
            Logic::Lia => "QF_LIA",
            Logic::Nia => "QF_NIA",
        }
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Handle to one solver process. Not shared between threads.
pub struct Solver {
    config: SolverConfig,
    process: Option<Process>,
    logic: Option<Logic>,
    queries: u64,
    deadline: Option<Instant>,
    /// Per-query timeout currently set in the process.
    timeout_ms: u64,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self, SmtError> {
        let mut s = Solver {
            timeout_ms: 0,
            config,
            process: None,
            logic: None,
            queries: 0,
            deadline: None,
        };
        s.start()?;
        Ok(s)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// After `deadline`, queries answer `Unknown` without reaching the
    /// solver; before it, each query's timeout is capped by the time left.
    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    /// Number of `check-sat` calls issued so far.
    pub fn queries(&self) -> u64 {
        self.queries
    }

    fn start(&mut self) -> Result<(), SmtError> {
        self.process = None;
        self.logic = None;
        let spawn_err = |source| SmtError::Spawn {
            path: self.config.path.display().to_string(),
            source,
        };
        let mut child = Command::new(&self.config.path)
            .args(["-in", "-smt2"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(spawn_err)?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        self.process = Some(Process {
            child,
            stdin,
            lines: rx,
        });
        Ok(())
    }

    fn send(&mut self, cmd: &str) -> bool {
        let Some(p) = self.process.as_mut() else { return false };
        p.stdin.write_all(cmd.as_bytes()).is_ok() && p.stdin.flush().is_ok()
    }

    fn read_line(&mut self) -> Result<String, String> {
        let backstop = Duration::from_millis(self.timeout_ms + BACKSTOP_GRACE_MS);
        let Some(p) = self.process.as_ref() else {
            return Err("solver not running".into());
        };
        match p.lines.recv_timeout(backstop) {
            Ok(line) => Ok(line),
            Err(RecvTimeoutError::Timeout) => Err("solver did not answer in time".into()),
            Err(RecvTimeoutError::Disconnected) => Err("solver process exited".into()),
        }
    }

    fn ensure_logic(&mut self, logic: Logic) -> bool {
        if self.logic == Some(logic) {
            return true;
        }
        let cmd = format!(
            "(reset)\n(set-option :produce-models true)\n(set-option :timeout {})\n(set-logic {})\n",
            self.config.timeout_ms,
            logic.name()
        );
        let ok = self.send(&cmd);
        if ok {
            self.logic = Some(logic);
            self.timeout_ms = self.config.timeout_ms;
        }
        ok
    }

    /// Kill and respawn the process after a protocol failure.
    fn recover(&mut self, reason: String) -> Result<SmtResult, SmtError> {
        self.start()?;
        Ok(SmtResult::Unknown(reason))
    }

    /// Satisfiability of `f`; a `Sat` model assigns every variable of `f`.
    pub fn check_sat(&mut self, f: &Formula) -> Result<SmtResult, SmtError> {
        match f {
            Formula::True => return Ok(SmtResult::Sat(Model::new())),
            Formula::False => return Ok(SmtResult::Unsat),
            _ => {}
        }
        let mut timeout_ms = self.config.timeout_ms;
        if let Some(d) = self.deadline {
            let left = d.saturating_duration_since(Instant::now()).as_millis();
            if left == 0 {
                return Ok(SmtResult::Unknown("deadline reached".into()));
            }
            timeout_ms = timeout_ms.min(u64::try_from(left).unwrap_or(u64::MAX));
        }
        self.queries += 1;
        let vars = f.vars();
        let logic = if f.is_linear() { Logic::Lia } else { Logic::Nia };
        if self.process.is_none() {
            self.start()?;
        }
        if !self.ensure_logic(logic) {
            return self.recover("cannot write to solver".into());
        }
        let mut script = String::new();
        if timeout_ms != self.timeout_ms {
            script.push_str(&format!("(set-option :timeout {timeout_ms})\n"));
            self.timeout_ms = timeout_ms;
        }
        script.push_str("(push 1)\n");
        for v in &vars {
            script.push_str(&format!("(declare-const {} Int)\n", quote(&v.smt_name())));
        }
        script.push_str(&format!("(assert {})\n(check-sat)\n", quote_formula(f)));
        if !self.send(&script) {
            return self.recover("cannot write to solver".into());
        }
        let mut errors = Vec::new();
        let answer = loop {
            match self.read_line() {
                Ok(line) => {
                    let line = line.trim();
                    match line {
                        "sat" | "unsat" | "unknown" => break line.to_string(),
                        "" => {}
                        other => errors.push(other.to_string()),
                    }
                }
                Err(reason) => return self.recover(reason),
            }
        };
        let result = if !errors.is_empty() {
            SmtResult::Unknown(errors.join("; "))
        } else {
            match answer.as_str() {
                "unsat" => SmtResult::Unsat,
                "unknown" => SmtResult::Unknown("solver returned unknown".into()),
                _ => match self.read_model(&vars) {
                    Ok(m) => SmtResult::Sat(m),
                    Err(reason) => return self.recover(reason),
                },
            }
        };
        if !self.send("(pop 1)\n") {
            return self.recover("cannot write to solver".into());
        }
        if let SmtResult::Sat(m) = &result {
            if f.evaluate(m) != Ok(true) {
                return Err(SmtError::InvalidModel {
                    formula: f.to_string(),
                    model: m.clone(),
                });
            }
        }
        Ok(result)
    }

    fn read_model(&mut self, vars: &BTreeSet<VarId>) -> Result<Model, String> {
        if !self.send("(get-model)\n") {
            return Err("cannot write to solver".into());
        }
        let mut text = String::new();
        let mut depth = 0i64;
        let mut opened = false;
        loop {
            let line = self.read_line()?;
            for c in line.chars() {
                match c {
                    '(' => {
                        depth += 1;
                        opened = true;
                    }
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            text.push_str(&line);
            text.push('\n');
            if opened && depth <= 0 {
                break;
            }
        }
        let parsed = parse_model(&text)?;
        // Variables the solver left out are unconstrained; any value works.
        Ok(vars
            .iter()
            .map(|v| (v.clone(), parsed.get(v).cloned().unwrap_or_default()))
            .collect())
    }

    /// `phi |= chi`, decided as unsatisfiability of `phi && !chi`.
    pub fn entails(&mut self, phi: &Formula, chi: &Formula) -> Result<Entailment, SmtError> {
        Ok(match self.check_sat(&Formula::and([phi.clone(), chi.negate()]))? {
            SmtResult::Unsat => Entailment::Yes,
            SmtResult::Sat(m) => Entailment::No(m),
            SmtResult::Unknown(r) => Entailment::Unknown(r),
        })
    }

    /// Up to `limit` models of `phi`, each followed by asserting `blocker(m)`.
    pub fn enumerate_models(
        &mut self,
        phi: &Formula,
        blocker: &mut dyn FnMut(&Model) -> Formula,
        limit: usize,
    ) -> Result<Vec<Model>, SmtError> {
        let mut stream = ModelStream::new(phi.clone());
        let mut out = Vec::new();
        while out.len() < limit {
            match stream.next(self)? {
                Some(m) => {
                    stream.block(blocker(&m));
                    out.push(m);
                }
                None => break,
            }
        }
        Ok(out)
    }
}

/// Lazy model enumeration. The blockers live here rather than on the
/// solver stack, so other queries may run between calls to [`next`].
///
/// [`next`]: ModelStream::next
#[derive(Debug, Clone)]
pub struct ModelStream {
    phi: Formula,
    blockers: Vec<Formula>,
    finished: bool,
    unknown: Option<String>,
}

impl ModelStream {
    pub fn new(phi: Formula) -> Self {
        ModelStream {
            phi,
            blockers: Vec::new(),
            finished: false,
            unknown: None,
        }
    }

    pub fn block(&mut self, blocker: Formula) {
        self.blockers.push(blocker);
    }

    /// Set when the stream stopped because the solver gave up.
    pub fn unknown(&self) -> Option<&str> {
        self.unknown.as_deref()
    }

    pub fn next(&mut self, solver: &mut Solver) -> Result<Option<Model>, SmtError> {
        if self.finished {
            return Ok(None);
        }
        let query = Formula::and(std::iter::once(self.phi.clone()).chain(self.blockers.iter().cloned()));
        match solver.check_sat(&query)? {
            SmtResult::Sat(m) => Ok(Some(m)),
            SmtResult::Unsat => {
                self.finished = true;
                Ok(None)
            }
            SmtResult::Unknown(r) => {
                self.finished = true;
                self.unknown = Some(r);
                Ok(None)
            }
        }
    }
}

/// Symbols with `$` are legal SMT-LIB simple symbols, but quoting keeps
/// the output robust for any generated name.
fn quote(name: &str) -> String {
    if name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn quote_formula(f: &Formula) -> String {
    let mut out = f.to_smtlib();
    for v in f.params() {
        let name = v.smt_name();
        let quoted = quote(&name);
        if quoted != name {
            out = replace_symbol(&out, &name, &quoted);
        }
    }
    out
}

/// Replace whole-symbol occurrences of `from`.
fn replace_symbol(text: &str, from: &str, to: &str) -> String {
    let is_sym = |c: char| !(c.is_whitespace() || c == '(' || c == ')');
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(from) {
        let before_ok = rest[..pos].chars().next_back().is_none_or(|c| !is_sym(c));
        let after = &rest[pos + from.len()..];
        let after_ok = after.chars().next().is_none_or(|c| !is_sym(c));
        out.push_str(&rest[..pos]);
        out.push_str(if before_ok && after_ok { to } else { from });
        rest = after;
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(text: &str) -> Result<Vec<Sexp>, String> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let list = stack.pop().ok_or("unbalanced `)`")?;
                stack.last_mut().ok_or("unbalanced `)`")?.push(Sexp::List(list));
            }
            '|' => {
                let mut s = String::new();
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    s.push(c);
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = String::from(c);
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced `(`".into());
    }
    Ok(stack.pop().unwrap())
}

fn parse_int(e: &Sexp) -> Option<BigInt> {
    match e {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(xs) => match xs.as_slice() {
            [Sexp::Atom(minus), inner] if minus == "-" => parse_int(inner).map(|k| -k),
            _ => None,
        },
    }
}

/// Parse a `(get-model)` response: `((define-fun v () Int k) ...)`, with
/// or without a leading `model` atom.
fn parse_model(text: &str) -> Result<Model, String> {
    let top = parse_sexps(text)?;
    let Some(Sexp::List(entries)) = top.into_iter().next() else {
        return Err(format!("unexpected model response: {text}"));
    };
    let mut model = Model::new();
    for e in entries {
        let Sexp::List(parts) = e else { continue };
        match parts.as_slice() {
            [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), Sexp::Atom(sort), value]
                if kw == "define-fun" && args.is_empty() && sort == "Int" =>
            {
                let k = parse_int(value).ok_or_else(|| format!("cannot read value of {name}"))?;
                model.insert(VarId::from_smt_name(name), k);
            }
            [Sexp::Atom(kw), ..] if kw == "error" => return Err(format!("{parts:?}")),
            _ => {}
        }
    }
    Ok(model)
}
