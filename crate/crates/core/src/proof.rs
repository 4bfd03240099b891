//! Proof documents (`adcl-proof/1`) and their independent replay.
//!
//! ```text
//! adcl-proof/1
//! input-hash 3b1f...
//! verdict NO
//! vars x
//! transition t0 original 0 : init -> l1 :: x' = 1
//! transition t1 original 1 : l1 -> l1 :: x' = x + 1 && 1 <= x
//! stem t0
//! loop t1
//! certificate-loop l1 -> l1 :: x' = x + 1 && 1 <= x
//! certificate-psi 1 <= x
//! certificate-update x := x + 1
//! end
//! ```
//!
//! Transitions are listed before they are referenced. Replay rebuilds every
//! transition from the input alone and then re-runs the witness checks.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::accel::{accelerate, Update, UpdateMap};
use crate::formula::{display_term, Formula, Subst, Term};
use crate::fresh;
use crate::engine::{check_witness, NontermWitness, WitnessError};
use crate::nonterm::Certificate;
use crate::parser::{parse, parse_formula, parse_term, ParseError};
use crate::smt::{Entailment, SmtError, Solver, SolverConfig};
use crate::ts::{chain_seq, Location, Provenance, Transition, TransitionSystem};

pub const FORMAT: &str = "adcl-proof/1";

pub fn input_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Derivation {
    Original(usize),
    Implicant(String),
    Accelerate(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct ProofTransition {
    pub id: String,
    pub derivation: Derivation,
    pub transition: Transition,
}

#[derive(Debug, Clone)]
pub struct ProofDocument {
    pub input_hash: String,
    pub names: Vec<String>,
    pub transitions: Vec<ProofTransition>,
    pub stem: Vec<String>,
    pub loop_: Vec<String>,
    pub certificate: Certificate,
    /// Free-form rule log; ignored by replay.
    pub log: Vec<String>,
}

impl ProofDocument {
    pub fn from_witness(input_text: &str, ts: &TransitionSystem, w: &NontermWitness, log: &[String]) -> Self {
        let mut b = Builder {
            ids: HashMap::new(),
            out: Vec::new(),
        };
        let stem = w.stem.iter().map(|t| b.visit(t)).collect();
        let loop_ = w.loop_.iter().map(|t| b.visit(t)).collect();
        ProofDocument {
            input_hash: input_hash(input_text),
            names: ts.names().to_vec(),
            transitions: b.out,
            stem,
            loop_,
            certificate: (*w.certificate).clone(),
            log: log.to_vec(),
        }
    }

    pub fn render(&self) -> String {
        let names = &self.names;
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT}");
        let _ = writeln!(s, "input-hash {}", self.input_hash);
        let _ = writeln!(s, "verdict NO");
        let _ = writeln!(s, "vars {}", names.join(" "));
        for pt in &self.transitions {
            let how = match &pt.derivation {
                Derivation::Original(i) => format!("original {i}"),
                Derivation::Implicant(base) => format!("implicant {base}"),
                Derivation::Accelerate(seq) => format!("accelerate {}", seq.join(" ")),
            };
            let _ = writeln!(s, "transition {} {how} : {}", pt.id, pt.transition.display(names));
        }
        let _ = writeln!(s, "stem {}", self.stem.join(" "));
        let _ = writeln!(s, "loop {}", self.loop_.join(" "));
        let c = &self.certificate;
        let _ = writeln!(s, "certificate-loop {}", c.loop_.display(names));
        let _ = writeln!(s, "certificate-psi {}", c.psi.display(names));
        let update: Vec<String> = c
            .update
            .0
            .iter()
            .zip(names)
            .map(|(u, n)| match u {
                Update::Det(t) => format!("{n} := {}", display_term(t, names)),
                Update::Nondet => format!("{n} := *"),
            })
            .collect();
        let _ = writeln!(s, "certificate-update {}", update.join(" ; "));
        for line in &self.log {
            let _ = writeln!(s, "derivation {line}");
        }
        let _ = writeln!(s, "end");
        s
    }

    pub fn parse(text: &str) -> Result<Self, ReplayError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.trim().to_string()))
                .ok_or_else(|| ReplayError::Syntax(0, format!("missing {what}")))
        };
        let (n, header) = next("header")?;
        if header != FORMAT {
            return Err(ReplayError::Syntax(n, format!("expected `{FORMAT}`")));
        }
        let (n, l) = next("input-hash")?;
        let input_hash = field(n, &l, "input-hash")?.to_string();
        let (n, l) = next("verdict")?;
        if field(n, &l, "verdict")? != "NO" {
            return Err(ReplayError::Syntax(n, "only NO proofs can be replayed".into()));
        }
        let (n, l) = next("vars")?;
        let names: Vec<String> = field(n, &l, "vars")?.split_whitespace().map(String::from).collect();

        let mut doc = ProofDocument {
            input_hash,
            names: names.clone(),
            transitions: Vec::new(),
            stem: Vec::new(),
            loop_: Vec::new(),
            certificate: Certificate {
                loop_: Transition::new(Location::new("_"), Location::new("_"), Formula::True, Provenance::Chained)
                    .unwrap(),
                psi: Formula::False,
                update: UpdateMap(Vec::new()),
            },
            log: Vec::new(),
        };
        let mut seen = [false; 3];
        loop {
            let (n, l) = next("end")?;
            let (kw, rest) = l.split_once(' ').unwrap_or((l.as_str(), ""));
            let rest = rest.trim();
            let perr = |e: ParseError| ReplayError::Syntax(n, e.to_string());
            match kw {
                "end" => break,
                "derivation" => doc.log.push(rest.to_string()),
                "transition" => {
                    let (head, body) = rest
                        .split_once(" : ")
                        .ok_or_else(|| ReplayError::Syntax(n, "expected `:`".into()))?;
                    let mut words = head.split_whitespace();
                    let id = words.next().ok_or_else(|| ReplayError::Syntax(n, "missing id".into()))?;
                    let derivation = match (words.next(), words.collect::<Vec<_>>()) {
                        (Some("original"), args) if args.len() == 1 => Derivation::Original(
                            args[0].parse().map_err(|_| ReplayError::Syntax(n, "bad index".into()))?,
                        ),
                        (Some("implicant"), args) if args.len() == 1 => Derivation::Implicant(args[0].to_string()),
                        (Some("accelerate"), args) if !args.is_empty() => {
                            Derivation::Accelerate(args.iter().map(|s| s.to_string()).collect())
                        }
                        _ => return Err(ReplayError::Syntax(n, "unknown derivation".into())),
                    };
                    let transition = parse_transition(n, body, &names)?;
                    doc.transitions.push(ProofTransition {
                        id: id.to_string(),
                        derivation,
                        transition,
                    });
                }
                "stem" => doc.stem = rest.split_whitespace().map(String::from).collect(),
                "loop" => doc.loop_ = rest.split_whitespace().map(String::from).collect(),
                "certificate-loop" => {
                    doc.certificate.loop_ = parse_transition(n, rest, &names)?;
                    seen[0] = true;
                }
                "certificate-psi" => {
                    doc.certificate.psi = parse_formula(rest, &names, true).map_err(perr)?;
                    seen[1] = true;
                }
                "certificate-update" => {
                    let mut update = vec![Update::Nondet; names.len()];
                    for part in rest.split(';') {
                        let (v, t) = part
                            .split_once(":=")
                            .ok_or_else(|| ReplayError::Syntax(n, "expected `:=`".into()))?;
                        let i = names
                            .iter()
                            .position(|x| x == v.trim())
                            .ok_or_else(|| ReplayError::Syntax(n, format!("unknown variable {}", v.trim())))?;
                        if t.trim() != "*" {
                            update[i] = Update::Det(parse_term(t.trim(), &names, true).map_err(perr)?);
                        }
                    }
                    doc.certificate.update = UpdateMap(update);
                    seen[2] = true;
                }
                other => return Err(ReplayError::Syntax(n, format!("unknown line kind `{other}`"))),
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(ReplayError::Syntax(0, "incomplete certificate".into()));
        }
        Ok(doc)
    }

    /// Re-derive every transition from the input and re-check the witness.
    pub fn replay(&self, input_text: &str, config: &SolverConfig) -> Result<(), ReplayError> {
        if input_hash(input_text) != self.input_hash {
            return Err(ReplayError::HashMismatch);
        }
        let ts = parse(input_text).map_err(ReplayError::Input)?;
        if ts.names() != self.names.as_slice() {
            return Err(ReplayError::VarsMismatch);
        }
        for pt in &self.transitions {
            fresh::observe_formula(&pt.transition.cond);
        }
        fresh::observe_formula(&self.certificate.loop_.cond);
        fresh::observe_formula(&self.certificate.psi);
        let dim = ts.dim();
        let mut solver = Solver::new(config.clone())?;
        let mut table: HashMap<&str, Arc<Transition>> = HashMap::new();
        for pt in &self.transitions {
            let t = &pt.transition;
            let lookup = |id: &str| {
                table
                    .get(id)
                    .cloned()
                    .ok_or_else(|| ReplayError::UnknownId(id.to_string()))
            };
            let provenance = match &pt.derivation {
                Derivation::Original(i) => {
                    let orig = ts
                        .transitions()
                        .get(*i)
                        .ok_or_else(|| ReplayError::NotDerivable(pt.id.clone(), format!("no input transition {i}")))?;
                    if **orig != *t {
                        return Err(ReplayError::NotDerivable(
                            pt.id.clone(),
                            format!("differs from input transition {i}"),
                        ));
                    }
                    Provenance::Original(*i)
                }
                Derivation::Implicant(base_id) => {
                    let base = lookup(base_id)?;
                    check_implicant(&mut solver, &pt.id, t, &base)?;
                    Provenance::Implicant(base)
                }
                Derivation::Accelerate(seq) => {
                    let seq: Vec<Arc<Transition>> = seq.iter().map(|id| lookup(id)).collect::<Result<_, _>>()?;
                    check_acceleration(&pt.id, t, &seq, dim)?;
                    Provenance::Accelerated(seq)
                }
            };
            table.insert(&pt.id, Arc::new(t.restrict(t.cond.clone(), provenance)));
        }
        let resolve = |ids: &[String]| -> Result<Vec<Arc<Transition>>, ReplayError> {
            ids.iter()
                .map(|id| table.get(id.as_str()).cloned().ok_or_else(|| ReplayError::UnknownId(id.clone())))
                .collect()
        };
        let witness = NontermWitness {
            stem: resolve(&self.stem)?,
            loop_: resolve(&self.loop_)?,
            certificate: Arc::new(self.certificate.clone()),
        };
        if witness.loop_.is_empty() {
            return Err(ReplayError::Witness(WitnessError::Disconnected));
        }
        check_witness(&mut solver, config, &witness, dim)?;
        Ok(())
    }
}

fn field<'a>(n: usize, line: &'a str, kw: &str) -> Result<&'a str, ReplayError> {
    line.strip_prefix(kw)
        .map(str::trim)
        .ok_or_else(|| ReplayError::Syntax(n, format!("expected `{kw}`")))
}

fn parse_transition(n: usize, text: &str, names: &[String]) -> Result<Transition, ReplayError> {
    let (locs, cond) = text
        .split_once("::")
        .ok_or_else(|| ReplayError::Syntax(n, "expected `::`".into()))?;
    let (src, dst) = locs
        .split_once("->")
        .ok_or_else(|| ReplayError::Syntax(n, "expected `->`".into()))?;
    let cond = parse_formula(cond.trim(), names, true).map_err(|e| ReplayError::Syntax(n, e.to_string()))?;
    Transition::new(Location::new(src.trim()), Location::new(dst.trim()), cond, Provenance::Chained)
        .map_err(|e| ReplayError::Syntax(n, e.to_string()))
}

/// Literals are a subset of the base's and together imply its condition.
fn check_implicant(solver: &mut Solver, id: &str, t: &Transition, base: &Transition) -> Result<(), ReplayError> {
    let fail = |why: &str| Err(ReplayError::NotDerivable(id.to_string(), why.to_string()));
    if t.src != base.src || t.dst != base.dst {
        return fail("locations differ from the base transition");
    }
    if !t.is_conjunctive() {
        return fail("implicant is not conjunctive");
    }
    let base_lits = base.cond.literals();
    if let Some(l) = t.cond.literals().into_iter().find(|l| !base_lits.contains(l)) {
        return fail(&format!("literal {} does not occur in the base", Formula::Lit(l)));
    }
    match solver.entails(&t.cond, &base.cond)? {
        Entailment::Yes => Ok(()),
        _ => fail("implicant does not entail the base condition"),
    }
}

/// The claimed transition is the acceleration of the chained sequence, up
/// to the name of the iteration counter.
fn check_acceleration(id: &str, t: &Transition, seq: &[Arc<Transition>], dim: usize) -> Result<(), ReplayError> {
    let fail = |why: String| Err(ReplayError::NotDerivable(id.to_string(), why));
    let chained = match chain_seq(seq) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let acc = match accelerate(&chained, dim) {
        Ok(a) => a,
        Err(e) => return fail(format!("acceleration fails: {e}")),
    };
    let claimed = t.cond.params();
    let mut s = Subst::new();
    if let Some(p) = claimed.iter().next() {
        s.insert(acc.counter.clone(), Term::var(p.clone()));
    }
    let recomputed = acc.transition.cond.substitute(&s);
    if claimed.len() > 1 || acc.transition.src != t.src || acc.transition.dst != t.dst || recomputed != t.cond {
        return fail("does not match the recomputed acceleration".into());
    }
    Ok(())
}

struct Builder {
    ids: HashMap<*const Transition, String>,
    out: Vec<ProofTransition>,
}

impl Builder {
    fn visit(&mut self, t: &Arc<Transition>) -> String {
        if let Some(id) = self.ids.get(&Arc::as_ptr(t)) {
            return id.clone();
        }
        let derivation = match &t.provenance {
            Provenance::Original(i) => Derivation::Original(*i),
            Provenance::Implicant(base) => Derivation::Implicant(self.visit(base)),
            Provenance::Accelerated(seq) => Derivation::Accelerate(seq.iter().map(|u| self.visit(u)).collect()),
            Provenance::ErrCert { .. } | Provenance::Chained => {
                unreachable!("witness transitions are input implicants or accelerations")
            }
        };
        let id = format!("t{}", self.out.len());
        self.ids.insert(Arc::as_ptr(t), id.clone());
        self.out.push(ProofTransition {
            id: id.clone(),
            derivation,
            transition: (**t).clone(),
        });
        id
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("proof syntax (line {0}): {1}")]
    Syntax(usize, String),
    #[error("input-hash: proof was produced for a different input")]
    HashMismatch,
    #[error("input: {0}")]
    Input(ParseError),
    #[error("vars: proof variables differ from the input")]
    VarsMismatch,
    #[error("reference: unknown transition id {0}")]
    UnknownId(String),
    #[error("derivation of {0}: {1}")]
    NotDerivable(String, String),
    #[error("witness: {0}")]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Smt(#[from] SmtError),
}
