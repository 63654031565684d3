//! Parser for PCTL queries.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Bound, Formula, PathFormula, RelOp, StateFormula};
use crate::gcl::lexer::{tokenize, Tok};
use crate::gcl::Pos;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{pos}: {msg}")]
pub struct FormulaError {
    pub pos: Pos,
    pub msg: String,
}

pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let toks = tokenize(text).map_err(|e| FormulaError {
        pos: Pos { line: 1, col: 1 },
        msg: e.to_string(),
    })?;
    let mut p = Parser { toks, at: 0 };
    let f = p.query()?;
    if p.peek() != &Tok::Eof {
        return p.error("end of formula");
    }
    Ok(f)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, FormulaError> {
        Err(FormulaError {
            pos: self.toks[self.at].1,
            msg: alloc::format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, t: Tok) -> Result<(), FormulaError> {
        if self.peek() == &t {
            self.bump();
            Ok(())
        } else {
            let what = t.describe();
            self.error(&what)
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    /// True at `P=?` or `R{..}=?` / `R=?`.
    fn at_query(&self) -> bool {
        if self.is_word("P") {
            return self.peek_at(1) == &Tok::Eq && self.peek_at(2) == &Tok::Question;
        }
        if self.is_word("R") {
            return match self.peek_at(1) {
                Tok::LBrace => true,
                Tok::Eq => self.peek_at(2) == &Tok::Question,
                _ => false,
            };
        }
        false
    }

    fn query(&mut self) -> Result<Formula, FormulaError> {
        if self.is_word("P") && self.at_query() {
            self.bump();
            self.bump();
            self.bump();
            self.expect(Tok::LBracket)?;
            let path = self.path()?;
            self.expect(Tok::RBracket)?;
            return Ok(Formula::ProbQuery(path));
        }
        if self.is_word("R") && self.at_query() {
            self.bump();
            let reward = if self.peek() == &Tok::LBrace {
                self.bump();
                let name = match self.bump() {
                    Tok::Str(s) => s,
                    _ => {
                        self.at -= 1;
                        return self.error("quoted reward name");
                    }
                };
                self.expect(Tok::RBrace)?;
                Some(name)
            } else {
                None
            };
            self.expect(Tok::Eq)?;
            self.expect(Tok::Question)?;
            self.expect(Tok::LBracket)?;
            if !self.is_word("F") {
                return self.error("`F` (only reachability rewards are supported)");
            }
            self.bump();
            let target = self.state()?;
            self.expect(Tok::RBracket)?;
            return Ok(Formula::RewardQuery { reward, target });
        }
        Ok(Formula::State(self.state()?))
    }

    fn state(&mut self) -> Result<StateFormula, FormulaError> {
        let lhs = self.or()?;
        if self.peek() == &Tok::Implies {
            self.bump();
            let rhs = self.state()?;
            return Ok(StateFormula::Or(
                Box::new(StateFormula::Not(Box::new(lhs))),
                Box::new(rhs),
            ));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<StateFormula, FormulaError> {
        let mut lhs = self.and()?;
        while self.peek() == &Tok::Bar {
            self.bump();
            let rhs = self.and()?;
            lhs = StateFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<StateFormula, FormulaError> {
        let mut lhs = self.unary()?;
        while self.peek() == &Tok::Amp {
            self.bump();
            let rhs = self.unary()?;
            lhs = StateFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<StateFormula, FormulaError> {
        if self.peek() == &Tok::Bang {
            self.bump();
            return Ok(StateFormula::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<StateFormula, FormulaError> {
        if self.at_query() {
            return Err(FormulaError {
                pos: self.toks[self.at].1,
                msg: "numerical queries are only allowed at the top level".to_string(),
            });
        }
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(StateFormula::Label(s))
            }
            Tok::LParen => {
                self.bump();
                let f = self.state()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(w) if w == "true" => {
                self.bump();
                Ok(StateFormula::True)
            }
            Tok::Ident(w) if w == "false" => {
                self.bump();
                Ok(StateFormula::False)
            }
            Tok::Ident(w) if w == "P" => {
                self.bump();
                let bound = match self.bump() {
                    Tok::Lt => Bound::Lt,
                    Tok::Le => Bound::Le,
                    Tok::Gt => Bound::Gt,
                    Tok::Ge => Bound::Ge,
                    _ => {
                        self.at -= 1;
                        return self.error("probability bound (`<`, `<=`, `>`, `>=`)");
                    }
                };
                let pos = self.toks[self.at].1;
                let p = self.number()?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(FormulaError {
                        pos,
                        msg: alloc::format!("probability bound {p} is outside [0,1]"),
                    });
                }
                self.expect(Tok::LBracket)?;
                let path = self.path()?;
                self.expect(Tok::RBracket)?;
                Ok(StateFormula::Prob {
                    bound,
                    p,
                    path: Box::new(path),
                })
            }
            Tok::Ident(var) if !is_path_keyword(&var) => {
                self.bump();
                let op = match self.bump() {
                    Tok::Eq => RelOp::Eq,
                    Tok::Ne => RelOp::Ne,
                    Tok::Lt => RelOp::Lt,
                    Tok::Le => RelOp::Le,
                    Tok::Gt => RelOp::Gt,
                    Tok::Ge => RelOp::Ge,
                    _ => {
                        self.at -= 1;
                        return self.error("comparison operator after variable");
                    }
                };
                let value = self.integer()?;
                Ok(StateFormula::Atom { var, op, value })
            }
            _ => self.error("state formula"),
        }
    }

    fn number(&mut self) -> Result<f64, FormulaError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(v as f64)
            }
            Tok::Real(s) => {
                self.bump();
                s.parse().map_err(|_| FormulaError {
                    pos: self.toks[self.at].1,
                    msg: alloc::format!("bad number `{s}`"),
                })
            }
            _ => self.error("number"),
        }
    }

    fn integer(&mut self) -> Result<i64, FormulaError> {
        let neg = self.peek() == &Tok::Minus;
        if neg {
            self.bump();
        }
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => self.error("integer"),
        }
    }

    fn step_bound(&mut self) -> Result<Option<u64>, FormulaError> {
        if self.peek() != &Tok::Le {
            return Ok(None);
        }
        self.bump();
        match self.peek().clone() {
            Tok::Int(v) if v >= 0 => {
                self.bump();
                Ok(Some(v as u64))
            }
            _ => self.error("non-negative step bound"),
        }
    }

    fn path(&mut self) -> Result<PathFormula, FormulaError> {
        if self.is_word("X") {
            self.bump();
            return Ok(PathFormula::Next(self.state()?));
        }
        if self.is_word("F") {
            self.bump();
            let bound = self.step_bound()?;
            let target = self.state()?;
            return Ok(match bound {
                Some(t) => PathFormula::BoundedUntil(StateFormula::True, target, t),
                None => PathFormula::Until(StateFormula::True, target),
            });
        }
        let lhs = self.state()?;
        if !self.is_word("U") {
            return self.error("`U`");
        }
        self.bump();
        let bound = self.step_bound()?;
        let rhs = self.state()?;
        Ok(match bound {
            Some(t) => PathFormula::BoundedUntil(lhs, rhs, t),
            None => PathFormula::Until(lhs, rhs),
        })
    }
}

fn is_path_keyword(w: &str) -> bool {
    matches!(w, "X" | "F" | "U" | "P" | "R")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(s: &str) -> StateFormula {
        StateFormula::Label(s.to_string())
    }

    #[test]
    fn eventually_query() {
        assert_eq!(
            parse_formula("P=? [ F \"goal\" ]").unwrap(),
            Formula::ProbQuery(PathFormula::Until(StateFormula::True, label("goal")))
        );
    }

    #[test]
    fn bounded_next() {
        assert_eq!(
            parse_formula("P>=0.5 [ X \"a\" ]").unwrap(),
            Formula::State(StateFormula::Prob {
                bound: Bound::Ge,
                p: 0.5,
                path: Box::new(PathFormula::Next(label("a")))
            })
        );
    }

    #[test]
    fn bounded_until() {
        assert_eq!(
            parse_formula("P=? [ \"a\" U<=3 \"b\" ]").unwrap(),
            Formula::ProbQuery(PathFormula::BoundedUntil(label("a"), label("b"), 3))
        );
    }

    #[test]
    fn reward_query_and_variable_atoms() {
        assert_eq!(
            parse_formula("R{\"mt\"}=? [ F (s=7) | s=6 ]").unwrap(),
            Formula::RewardQuery {
                reward: Some("mt".to_string()),
                target: StateFormula::Or(
                    Box::new(StateFormula::Atom {
                        var: "s".to_string(),
                        op: RelOp::Eq,
                        value: 7
                    }),
                    Box::new(StateFormula::Atom {
                        var: "s".to_string(),
                        op: RelOp::Eq,
                        value: 6
                    })
                )
            }
        );
    }

    #[test]
    fn nested_numerical_query_is_rejected() {
        let err = parse_formula("P=? [ F P=? [ X \"a\" ] ]").unwrap_err();
        assert!(err.msg.contains("top level"));
    }

    #[test]
    fn malformed_formulas() {
        assert!(parse_formula("P=? [ F ").is_err());
        assert!(parse_formula("P>=1.5 [ X \"a\" ]").is_err());
        assert!(parse_formula("P=? [ \"a\" \"b\" ]").is_err());
        assert!(parse_formula("R{mt}=? [ F \"a\" ]").is_err());
    }
}
