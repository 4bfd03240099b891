//! Front end for `adcl`: solve single files, replay proofs, and run a
//! directory of instances as a CSV benchmark.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use adcl_core::engine::{self, Budgets, EngineConfig, MaybeReason, RunOutcome, SeedOrder, Verdict};
use adcl_core::parser;
use adcl_core::proof::{ProofDocument, FORMAT};
use adcl_core::smt::SolverConfig;
use anyhow::{anyhow, bail, Context, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

pub const CSV_HEADER: &str = "name,verdict,wall_ms,learned,depth,smt_queries";

/// Options shared by `solve` and `bench`.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub smt: Option<PathBuf>,
    pub timeout: Option<f64>,
    pub depth: Option<usize>,
    pub seed_order: SeedOrder,
    pub proof: bool,
    pub log_derivation: bool,
}

impl SolveOptions {
    pub fn solver_config(&self) -> SolverConfig {
        let mut c = SolverConfig::default();
        if let Some(p) = &self.smt {
            c.path = p.clone();
        }
        c
    }

    pub fn engine_config(&self) -> EngineConfig {
        let mut budgets = Budgets::default();
        if let Some(t) = self.timeout {
            budgets.wall = Duration::from_secs_f64(t.max(0.0));
        }
        if let Some(d) = self.depth {
            budgets.max_depth = d;
        }
        EngineConfig {
            budgets,
            solver: self.solver_config(),
            seed_order: self.seed_order,
            log_derivation: self.log_derivation || self.proof,
        }
    }
}

/// `file` or `shuffle:<seed>`.
pub fn parse_seed_order(s: &str) -> Result<SeedOrder, String> {
    match s {
        "file" => Ok(SeedOrder::File),
        _ => s
            .strip_prefix("shuffle:")
            .and_then(|n| n.parse().ok())
            .map(SeedOrder::Shuffle)
            .ok_or_else(|| format!("expected `file` or `shuffle:<n>`, got `{s}`")),
    }
}

/// What a command printed and how it should exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn verdict_word(v: &Verdict) -> &'static str {
    match v {
        Verdict::NonTerminating(_) => "NO",
        Verdict::Maybe(_) => "MAYBE",
    }
}

fn reason_word(r: MaybeReason) -> &'static str {
    match r {
        MaybeReason::Exhausted => "exhausted",
        MaybeReason::Budget => "budget",
        MaybeReason::Unknowns => "unknowns",
    }
}

/// Result of solving one file.
pub struct Solved {
    pub text: String,
    pub ts: adcl_core::TransitionSystem,
    pub outcome: RunOutcome,
}

#[derive(Debug)]
pub enum SolveError {
    Input(String),
    Internal(String),
}

pub fn solve_file(path: &Path, opts: &SolveOptions) -> Result<Solved, SolveError> {
    let text = std::fs::read_to_string(path).map_err(|e| SolveError::Input(format!("{}: {e}", path.display())))?;
    let ts = parser::parse(&text).map_err(|e| SolveError::Input(format!("{}:{e}", path.display())))?;
    let outcome = engine::run(&ts, opts.engine_config()).map_err(|e| match e {
        engine::EngineError::Smt(e) => SolveError::Input(e.to_string()),
        other => SolveError::Internal(other.to_string()),
    })?;
    Ok(Solved { text, ts, outcome })
}

pub fn solve_command(path: &Path, opts: &SolveOptions) -> Output {
    let solved = match solve_file(path, opts) {
        Ok(s) => s,
        Err(SolveError::Input(msg)) => {
            return Output {
                code: EXIT_INPUT,
                stdout: "ERROR\n".into(),
                stderr: format!("{msg}\n"),
            }
        }
        Err(SolveError::Internal(msg)) => {
            return Output {
                code: EXIT_FAILED,
                stdout: "ERROR\n".into(),
                stderr: format!("{msg}\n"),
            }
        }
    };
    let out = &solved.outcome;
    let mut stdout = format!("{}\n", verdict_word(&out.verdict));
    match &out.verdict {
        Verdict::NonTerminating(w) if opts.proof => {
            let doc = ProofDocument::from_witness(&solved.text, &solved.ts, w, &out.derivation);
            stdout.push_str(&doc.render());
        }
        Verdict::NonTerminating(_) => {}
        Verdict::Maybe(r) => {
            let _ = writeln!(stdout, "reason {}", reason_word(*r));
        }
    }
    if opts.log_derivation && !opts.proof {
        for line in &out.derivation {
            let _ = writeln!(stdout, "derivation {line}");
        }
    }
    let s = &out.stats;
    Output {
        code: EXIT_OK,
        stdout,
        stderr: format!(
            "learned={} depth={} smt_queries={} rules={} wall_ms={}\n",
            s.learned,
            s.max_depth,
            s.smt_queries,
            s.rule_applications,
            s.wall.as_millis()
        ),
    }
}

/// The proof part of a `solve --proof` output (anything before the header
/// line is skipped).
fn proof_section(text: &str) -> Option<&str> {
    let start = text.lines().position(|l| l.trim() == FORMAT)?;
    let offset: usize = text.lines().take(start).map(|l| l.len() + 1).sum();
    text.get(offset..)
}

pub fn replay_texts(input: &str, proof: &str, solver: &SolverConfig) -> Result<()> {
    let section = proof_section(proof).ok_or_else(|| anyhow!("header: no `{FORMAT}` line"))?;
    let doc = ProofDocument::parse(section)?;
    doc.replay(input, solver)?;
    Ok(())
}

pub fn replay_command(input: &Path, proof: &Path, solver: &SolverConfig) -> Output {
    let read = |p: &Path| std::fs::read_to_string(p).with_context(|| format!("{}", p.display()));
    let (input_text, proof_text) = match (read(input), read(proof)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            return Output {
                code: EXIT_INPUT,
                stdout: "ERROR\n".into(),
                stderr: format!("{e:#}\n"),
            }
        }
    };
    match replay_texts(&input_text, &proof_text, solver) {
        Ok(()) => Output {
            code: EXIT_OK,
            stdout: "OK\n".into(),
            stderr: String::new(),
        },
        Err(e) => Output {
            code: EXIT_FAILED,
            stdout: format!("FAILED {e:#}\n"),
            stderr: String::new(),
        },
    }
}

/// `name.its VERDICT` per line; `#` comments.
pub fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let (Some(name), Some(verdict), None) = (words.next(), words.next(), words.next()) else {
            bail!("manifest line {}: expected `<file> <verdict>`", i + 1);
        };
        if !matches!(verdict, "NO" | "MAYBE" | "ERROR") {
            bail!("manifest line {}: unknown verdict {verdict}", i + 1);
        }
        out.insert(name.to_string(), verdict.to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub name: String,
    pub verdict: String,
    pub wall_ms: u128,
    pub learned: usize,
    pub depth: usize,
    pub smt_queries: u64,
    /// For `NO` rows: whether the emitted proof replayed.
    pub replayed: Option<bool>,
}

fn bench_one(path: &Path, opts: &SolveOptions) -> BenchRow {
    let name = path.file_name().unwrap().to_string_lossy().to_string();
    let started = Instant::now();
    match solve_file(path, opts) {
        Ok(s) => {
            let replayed = match &s.outcome.verdict {
                Verdict::NonTerminating(w) => {
                    let doc = ProofDocument::from_witness(&s.text, &s.ts, w, &[]);
                    Some(replay_texts(&s.text, &doc.render(), &opts.solver_config()).is_ok())
                }
                Verdict::Maybe(_) => None,
            };
            let st = &s.outcome.stats;
            BenchRow {
                name,
                verdict: verdict_word(&s.outcome.verdict).to_string(),
                wall_ms: st.wall.as_millis(),
                learned: st.learned,
                depth: st.max_depth,
                smt_queries: st.smt_queries,
                replayed,
            }
        }
        Err(_) => BenchRow {
            name,
            verdict: "ERROR".into(),
            wall_ms: started.elapsed().as_millis(),
            learned: 0,
            depth: 0,
            smt_queries: 0,
            replayed: None,
        },
    }
}

/// Solve every `.its` file in `dir` on `jobs` worker threads.
pub fn bench_rows(dir: &Path, opts: &SolveOptions, jobs: usize) -> Result<Vec<BenchRow>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("{}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "its"))
        .collect();
    files.sort();
    let next = AtomicUsize::new(0);
    let rows = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1).min(files.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(path) = files.get(i) else { break };
                let row = bench_one(path, opts);
                rows.lock().unwrap().push(row);
            });
        }
    });
    let mut rows = rows.into_inner().unwrap();
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(rows)
}

pub fn render_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.name, r.verdict, r.wall_ms, r.learned, r.depth, r.smt_queries
        );
    }
    if !rows.is_empty() {
        let solved = rows.iter().filter(|r| r.verdict == "NO").count();
        let _ = writeln!(
            out,
            "TOTAL,solved={solved}/{},{},{},{},{}",
            rows.len(),
            rows.iter().map(|r| r.wall_ms).sum::<u128>(),
            rows.iter().map(|r| r.learned).sum::<usize>(),
            rows.iter().map(|r| r.depth).max().unwrap_or(0),
            rows.iter().map(|r| r.smt_queries).sum::<u64>(),
        );
    }
    out
}

/// Compare rows against the manifest; every `NO` must also replay.
pub fn violations(rows: &[BenchRow], manifest: &BTreeMap<String, String>) -> Vec<String> {
    let mut out = Vec::new();
    for r in rows {
        if let Some(expected) = manifest.get(&r.name) {
            if *expected != r.verdict {
                out.push(format!("{}: expected {expected}, got {}", r.name, r.verdict));
            }
        }
        if r.replayed == Some(false) {
            out.push(format!("{}: proof does not replay", r.name));
        }
    }
    for name in manifest.keys() {
        if !rows.iter().any(|r| &r.name == name) {
            out.push(format!("{name}: listed in the manifest but missing"));
        }
    }
    out
}

pub fn bench_command(dir: &Path, manifest: Option<&Path>, jobs: usize, opts: &SolveOptions) -> Output {
    let default_manifest = dir.join("manifest.txt");
    let manifest_path = manifest.map(Path::to_path_buf).or_else(|| default_manifest.exists().then_some(default_manifest));
    let manifest = match manifest_path.map(|p| {
        std::fs::read_to_string(&p)
            .with_context(|| format!("{}", p.display()))
            .and_then(|t| parse_manifest(&t))
    }) {
        None => BTreeMap::new(),
        Some(Ok(m)) => m,
        Some(Err(e)) => {
            return Output {
                code: EXIT_INPUT,
                stdout: String::new(),
                stderr: format!("{e:#}\n"),
            }
        }
    };
    let rows = match bench_rows(dir, opts, jobs) {
        Ok(r) => r,
        Err(e) => {
            return Output {
                code: EXIT_INPUT,
                stdout: String::new(),
                stderr: format!("{e:#}\n"),
            }
        }
    };
    let problems = violations(&rows, &manifest);
    Output {
        code: if problems.is_empty() { EXIT_OK } else { EXIT_FAILED },
        stdout: render_csv(&rows),
        stderr: problems.iter().map(|p| format!("{p}\n")).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_orders() {
        assert_eq!(parse_seed_order("file"), Ok(SeedOrder::File));
        assert_eq!(parse_seed_order("shuffle:7"), Ok(SeedOrder::Shuffle(7)));
        assert!(parse_seed_order("shuffle").is_err());
    }

    #[test]
    fn manifests() {
        let m = parse_manifest("# expected\na.its NO\n\nb.its MAYBE # terminating\n").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m["b.its"], "MAYBE");
        assert!(parse_manifest("a.its YES").is_err());
    }

    #[test]
    fn proof_section_skips_the_verdict_line() {
        assert_eq!(proof_section("NO\nadcl-proof/1\nend\n"), Some("adcl-proof/1\nend\n"));
        assert_eq!(proof_section("NO\n"), None);
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(render_csv(&[]), format!("{CSV_HEADER}\n"));
    }
}
