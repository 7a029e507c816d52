//! REPL sessions. A session holds the comparison mode, stability assumptions
//! and the last certificate; every command is evaluated against a copy and
//! committed only on success.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use factor_calc_core::cert::{Certificate, State};
use factor_calc_core::error::EngineError;
use factor_calc_core::expr::{AssumptionSet, Expr, Mode};
use factor_calc_core::fdim::fdim;
use factor_calc_core::iso::{iso_verdict, normalize, Verdict};
use factor_calc_core::scalar::Rational;
use factor_calc_core::validate::{is_valid_name, well_formed};
use factor_calc_core::word::{rescale_word, to_word, trade_step, trade_to_target, Word};

use crate::json::{certificate_json, verdict_json};
use crate::parser::{ParseError, Parser};

/// Outcome class of a command, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Ok,
    /// Bad input: parse errors, ill-formed expressions, unknown commands or letters.
    Diagnostic,
    /// A rule's side condition failed or a case is unsupported.
    Engine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub text: String,
    /// The same reply as a JSON object.
    pub json: Value,
    pub severity: Severity,
    pub quit: bool,
}

enum Failure {
    Parse(ParseError),
    Diagnostic(String),
    Engine(EngineError),
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Parse(e)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::IllFormed(_) | EngineError::UnknownLetter(_) => Failure::Diagnostic(e.to_string()),
            other => Failure::Engine(other),
        }
    }
}

struct Done {
    text: String,
    json: Value,
    /// Initial states and certificates to remember (and replay under `--check`).
    certs: Vec<(State, Certificate)>,
}

impl Done {
    fn plain(text: String) -> Self {
        Done { json: Value::String(text.clone()), text, certs: vec![] }
    }
}

pub struct Session {
    pub assumptions: AssumptionSet,
    /// Replay every certificate before replying.
    pub check: bool,
    last: Vec<(State, Certificate)>,
    base_dir: PathBuf,
}

impl Default for Session {
    fn default() -> Self {
        Session::new(Mode::Distinct)
    }
}

impl Session {
    pub fn new(mode: Mode) -> Self {
        Session {
            assumptions: AssumptionSet::new(mode),
            check: false,
            last: vec![],
            base_dir: PathBuf::from("."),
        }
    }

    /// Directory that `:load` paths are relative to.
    pub fn set_base_dir(&mut self, dir: &Path) {
        self.base_dir = dir.to_path_buf();
    }

    pub fn last_certificates(&self) -> &[(State, Certificate)] {
        &self.last
    }

    /// Evaluates one input line. Blank lines and `#` comments give an empty reply.
    pub fn eval(&mut self, line: &str) -> Reply {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Reply { text: String::new(), json: Value::Null, severity: Severity::Ok, quit: false };
        }
        let (cmd, rest) = match line.strip_prefix(':') {
            Some(body) => {
                let end = body.find(char::is_whitespace).unwrap_or(body.len());
                (&body[..end], body[end..].trim())
            }
            None => ("nf", line),
        };
        if cmd == "quit" || cmd == "q" {
            return Reply { text: String::new(), json: json!({ "command": "quit" }), severity: Severity::Ok, quit: true };
        }
        if cmd == "load" {
            return self.load(rest);
        }
        match self.command(cmd, rest) {
            Ok(done) => {
                if !done.certs.is_empty() {
                    self.last = done.certs;
                }
                let json = json!({ "command": cmd, "input": rest, "result": done.json });
                Reply { text: done.text, json, severity: Severity::Ok, quit: false }
            }
            Err(f) => {
                let (severity, kind, msg) = match f {
                    Failure::Parse(e) => (Severity::Diagnostic, "parse error", e.to_string()),
                    Failure::Diagnostic(m) => (Severity::Diagnostic, "error", m),
                    Failure::Engine(e) => (Severity::Engine, "engine error", e.to_string()),
                };
                let json = json!({ "command": cmd, "input": rest, "error": kind, "message": msg });
                Reply { text: format!("{}: {}", kind, msg), json, severity, quit: false }
            }
        }
    }

    /// Evaluates a whole script; stops after `:quit`.
    pub fn eval_script(&mut self, src: &str) -> Vec<Reply> {
        let mut out = Vec::new();
        for line in src.lines() {
            let r = self.eval(line);
            let quit = r.quit;
            out.push(r);
            if quit {
                break;
            }
        }
        out
    }

    fn load(&mut self, path: &str) -> Reply {
        let full = self.base_dir.join(path);
        match fs::read_to_string(&full) {
            Ok(src) => {
                let replies = self.eval_script(&src);
                let severity = replies.iter().map(|r| r.severity).max().unwrap_or(Severity::Ok);
                let quit = replies.iter().any(|r| r.quit);
                let lines: Vec<&str> = replies.iter().map(|r| r.text.as_str()).filter(|t| !t.is_empty()).collect();
                let text = lines.join("\n");
                let json = json!({ "command": "load", "input": path, "replies": replies.iter().map(|r| r.json.clone()).collect::<Vec<_>>() });
                Reply { text, json, severity, quit }
            }
            Err(e) => Reply {
                text: format!("error: cannot read {}: {}", full.display(), e),
                json: json!({ "command": "load", "input": path, "error": "error", "message": e.to_string() }),
                severity: Severity::Diagnostic,
                quit: false,
            },
        }
    }

    fn command(&mut self, cmd: &str, rest: &str) -> Result<Done, Failure> {
        let done = match cmd {
            "fdim" => {
                let e = parse_one(rest)?;
                check_well_formed(&e)?;
                let v = fdim(&e)?;
                Done::plain(v.to_string())
            }
            "nf" => {
                let e = parse_one(rest)?;
                let (n, cert) = normalize(&e, &self.assumptions)?;
                Done {
                    text: n.to_string(),
                    json: json!({ "normal_form": n.to_string(), "certificate": certificate_json(&cert) }),
                    certs: vec![(State::Expr(e), cert)],
                }
            }
            "word" => {
                let e = parse_one(rest)?;
                let (w, cert) = to_word(&e, &self.assumptions)?;
                word_done(w, e, cert)
            }
            "rescale" => {
                let mut p = Parser::new(rest)?;
                let e = p.expr()?;
                p.eat_sym(',');
                let sq = p.scale()?;
                p.finish()?;
                self.rescale(e, sq)?
            }
            "trade" => {
                let mut p = Parser::new(rest)?;
                let e = p.expr()?;
                p.eat_sym(',');
                let target = letter_ref(&mut p)?;
                p.eat_sym(',');
                let sq = p.scale()?;
                p.finish()?;
                let (w, mut cert) = to_word(&e, &self.assumptions)?;
                let i = resolve(&w, &target, &[])?;
                let (out, steps) = trade_step(&w, i, &sq)?;
                cert.extend(steps);
                word_done(out, e, cert)
            }
            "tradeAll" => {
                let mut p = Parser::new(rest)?;
                let e = p.expr()?;
                let mut refs = Vec::new();
                while !p.at_end() {
                    p.eat_sym(',');
                    let target = letter_ref(&mut p)?;
                    if !p.eat_sym('=') {
                        return Err(Failure::Diagnostic(format!("expected '=' after letter {}", target)));
                    }
                    refs.push((target, p.scale()?));
                }
                if refs.is_empty() {
                    return Err(Failure::Diagnostic("no trade targets given".into()));
                }
                let (w, mut cert) = to_word(&e, &self.assumptions)?;
                let mut targets = Vec::new();
                for (r, sq) in refs {
                    let taken: Vec<usize> = targets.iter().map(|(i, _)| *i).collect();
                    targets.push((resolve(&w, &r, &taken)?, sq));
                }
                let (out, steps) = trade_to_target(&w, &targets)?;
                cert.extend(steps);
                word_done(out, e, cert)
            }
            "iso" => {
                let mut p = Parser::new(rest)?;
                let e1 = p.expr()?;
                p.eat_sym(',');
                let e2 = p.expr()?;
                p.finish()?;
                let v = iso_verdict(&e1, &e2, &self.assumptions)?;
                let certs = match &v {
                    Verdict::Isomorphic { left, right } => {
                        vec![(State::Expr(e1), left.clone()), (State::Expr(e2), right.clone())]
                    }
                    _ => vec![],
                };
                Done { text: v.to_string(), json: verdict_json(&v), certs }
            }
            "mode" => {
                let mode = match rest {
                    "distinct" => Mode::Distinct,
                    "collapsed" => Mode::Collapsed,
                    _ => return Err(Failure::Diagnostic(format!("unknown mode '{}' (distinct or collapsed)", rest))),
                };
                self.assumptions.mode = mode;
                Done::plain(format!("mode {}", rest))
            }
            "assume" => {
                let mut words = rest.split_whitespace();
                match (words.next(), words.next(), words.next()) {
                    (Some("stable"), Some(name), None) if is_valid_name(name) => {
                        self.assumptions.assume_stable(name);
                        Done::plain(format!("assuming {} ≅ {} * LF(inf)", name, name))
                    }
                    _ => return Err(Failure::Diagnostic("usage: :assume stable NAME".into())),
                }
            }
            "explain" => self.explain()?,
            other => return Err(Failure::Diagnostic(format!("unknown command :{}", other))),
        };
        if self.check {
            for (initial, cert) in &done.certs {
                cert.check_from(initial).map_err(|m| {
                    Failure::Engine(EngineError::MalformedCertificate(format!("replay failed: {}", m)))
                })?;
            }
        }
        Ok(done)
    }

    fn rescale(&self, e: Expr, sq: Rational) -> Result<Done, Failure> {
        if e.is_class_f() {
            let r = Expr::rescale(e, sq);
            let (n, cert) = normalize(&r, &self.assumptions)?;
            return Ok(Done {
                text: n.to_string(),
                json: json!({ "normal_form": n.to_string(), "certificate": certificate_json(&cert) }),
                certs: vec![(State::Expr(r), cert)],
            });
        }
        let (w, mut cert) = to_word(&e, &self.assumptions)?;
        let (out, steps) = rescale_word(&w, &sq)?;
        cert.extend(steps);
        Ok(word_done(out, e, cert))
    }

    fn explain(&self) -> Result<Done, Failure> {
        if self.last.is_empty() {
            return Ok(Done::plain("no certificate yet".into()));
        }
        let mut text = String::new();
        let mut js = Vec::new();
        for (initial, cert) in &self.last {
            let status = match cert.check_from(initial) {
                Ok(()) => "replays".to_string(),
                Err(m) => format!("REPLAY FAILED: {}", m),
            };
            text.push_str(&format!("from {}\n{}{}\n", initial, cert, status));
            js.push(json!({ "initial": initial.to_string(), "certificate": certificate_json(cert), "replay": status }));
        }
        Ok(Done { text: text.trim_end().to_string(), json: Value::Array(js), certs: vec![] })
    }
}

fn word_done(w: Word, e: Expr, cert: Certificate) -> Done {
    Done {
        text: w.to_string(),
        json: json!({ "word": w.to_string(), "certificate": certificate_json(&cert) }),
        certs: vec![(State::Expr(e), cert)],
    }
}

fn parse_one(src: &str) -> Result<Expr, Failure> {
    Ok(crate::parser::parse(src)?)
}

fn check_well_formed(e: &Expr) -> Result<(), Failure> {
    let r = well_formed(e);
    if r.is_ok() {
        Ok(())
    } else {
        Err(Failure::Diagnostic(format!("ill-formed expression: {}", r)))
    }
}

enum LetterRef {
    Name(String),
    Index(usize),
}

impl std::fmt::Display for LetterRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LetterRef::Name(n) => write!(f, "{}", n),
            LetterRef::Index(i) => write!(f, "#{}", i),
        }
    }
}

fn letter_ref(p: &mut Parser) -> Result<LetterRef, Failure> {
    if p.peek_int() {
        let n = p.integer()?;
        let i = usize::try_from(n).map_err(|_| Failure::Diagnostic("letter index out of range".into()))?;
        Ok(LetterRef::Index(i))
    } else {
        Ok(LetterRef::Name(p.ident()?))
    }
}

/// Letter position for a name (first occurrence not already taken) or index.
fn resolve(w: &Word, r: &LetterRef, taken: &[usize]) -> Result<usize, Failure> {
    let found = match r {
        LetterRef::Index(i) => (*i < w.letters.len() && !taken.contains(i)).then_some(*i),
        LetterRef::Name(n) => {
            (0..w.letters.len()).find(|i| !taken.contains(i) && w.letters[*i].body.name() == Some(n.as_str()))
        }
    };
    found.ok_or_else(|| Failure::Diagnostic(format!("unknown letter {} in {}", r, w)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(s: &mut Session, line: &str) -> String {
        let r = s.eval(line);
        assert_eq!(r.severity, Severity::Ok, "{}", r.text);
        r.text
    }

    #[test]
    fn worked_example() {
        let mut s = Session::default();
        assert_eq!(run(&mut s, ":nf dsum(1/2:LF(2),1/2:C)*LF(4)"), "LF(5)");
        assert_eq!(run(&mut s, ":fdim dsum(1/2:LF(2),1/2:C)*LF(4)"), "5");
        assert_eq!(run(&mut s, "dsum(1/2:LF(2),1/2:C)*LF(4)"), "LF(5)");
    }

    #[test]
    fn iso_and_modes() {
        let mut s = Session::default();
        assert_eq!(run(&mut s, ":iso LF(3)*LF(2) LF(5)"), "isomorphic (1 step: FGF additivity)");
        assert!(run(&mut s, ":iso LF(2) LF(3)").starts_with("not provable"));
        run(&mut s, ":mode collapsed");
        assert_eq!(run(&mut s, ":iso LF(2) LF(3)"), "isomorphic");
    }

    #[test]
    fn trades_by_name_and_index() {
        let mut s = Session::default();
        let a = run(&mut s, ":trade sub(N, [1/2, Q]) Q 1/4");
        let b = run(&mut s, ":trade sub(N, [1/2, Q]) 0 1/4");
        assert_eq!(a, b);
        assert_eq!(a, "word{N | [1/4, scale(Q, 1/2)] | tail 3/16}");
        let r = s.eval(":trade sub(N, [1/2, Q]) Q 1");
        assert_eq!(r.severity, Severity::Engine);
        assert!(r.text.contains("deficit 3/4"), "{}", r.text);
        assert_eq!(s.eval(":trade sub(N, [1/2, Q]) P 1").severity, Severity::Diagnostic);
    }

    #[test]
    fn errors_are_classified_and_transactional() {
        let mut s = Session::default();
        assert_eq!(s.eval(":nf dsum(1/2: C").severity, Severity::Diagnostic);
        assert_eq!(s.eval(":nf dsum(1/2: C, 1/3: C)").severity, Severity::Diagnostic);
        assert_eq!(s.eval(":fdim N").severity, Severity::Engine);
        assert_eq!(s.eval(":bogus").severity, Severity::Diagnostic);
        assert_eq!(s.eval(":mode sideways").severity, Severity::Diagnostic);
        assert_eq!(s.assumptions.mode, Mode::Distinct);
        assert!(s.eval(":quit").quit);
    }

    #[test]
    fn stable_assumption_lifts_letters() {
        let mut s = Session::default();
        run(&mut s, ":assume stable Q");
        assert_eq!(run(&mut s, ":word sub(N, [1/2, Q])"), "word{N | [1, scale(Q, 2)] | tail 0 | stable}");
    }

    #[test]
    fn explain_replays_last_certificate() {
        let mut s = Session::default();
        s.check = true;
        run(&mut s, ":iso sub(LF(2), fam(1/2,1/2,inf,LF(2))) LF(4)");
        let text = run(&mut s, ":explain");
        assert!(text.contains("class-F family absorption"));
        assert!(!text.contains("FAILED"));
    }

    #[test]
    fn json_replies() {
        let mut s = Session::default();
        let r = s.eval(":nf LF(2)*LF(3)");
        assert_eq!(r.json["result"]["normal_form"], "LF(5)");
        let r = s.eval(":nf (");
        assert_eq!(r.json["error"], "parse error");
    }
}
