//! Recursive-descent parser for the guarded-command language.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{tokenize, Tok};
use super::{GclError, Pos};

pub fn parse(src: &str) -> Result<ModelAst, GclError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, at: 0 };
    p.model()
}

/// Parses a single expression, used for labels supplied on the command line.
pub fn parse_expr(src: &str) -> Result<Expr, GclError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
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
        let i = (self.at + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, GclError> {
        Err(GclError::Syntax {
            pos: self.pos(),
            msg: alloc::format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), GclError> {
        if self.eat(&t) {
            Ok(())
        } else {
            let what = t.describe();
            self.error(&what)
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), GclError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(&alloc::format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> Result<String, GclError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error("identifier"),
        }
    }

    fn string(&mut self) -> Result<String, GclError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error("quoted name"),
        }
    }

    fn model(&mut self) -> Result<ModelAst, GclError> {
        let mut m = ModelAst::default();
        if self.is_keyword("dtmc") || self.is_keyword("probabilistic") {
            self.bump();
        }
        loop {
            let pos = self.pos();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) => match kw.as_str() {
                    "const" => m.constants.push(self.constant()?),
                    "formula" => {
                        self.bump();
                        let name = self.ident()?;
                        self.expect(Tok::Eq)?;
                        let body = self.expr()?;
                        self.expect(Tok::Semi)?;
                        m.formulas.push(FormulaDecl { name, body, pos });
                    }
                    "label" => {
                        self.bump();
                        let name = self.string()?;
                        self.expect(Tok::Eq)?;
                        let expr = self.expr()?;
                        self.expect(Tok::Semi)?;
                        m.labels.push(LabelDecl { name, expr, pos });
                    }
                    "module" => m.modules.push(self.module()?),
                    "rewards" => m.rewards.push(self.rewards()?),
                    _ => return self.error("`const`, `formula`, `label`, `module` or `rewards`"),
                },
                _ => return self.error("`const`, `formula`, `label`, `module` or `rewards`"),
            }
        }
        Ok(m)
    }

    fn constant(&mut self) -> Result<ConstDecl, GclError> {
        let pos = self.pos();
        self.keyword("const")?;
        let ty = if self.is_keyword("int") {
            Some(ConstType::Int)
        } else if self.is_keyword("double") {
            Some(ConstType::Double)
        } else if self.is_keyword("bool") {
            Some(ConstType::Bool)
        } else {
            None
        };
        if ty.is_some() {
            self.bump();
        }
        let name = self.ident()?;
        if self.peek() == &Tok::Semi {
            return Err(GclError::Syntax {
                pos: self.pos(),
                msg: alloc::format!("constant `{name}` needs a value"),
            });
        }
        self.expect(Tok::Eq)?;
        let value = self.expr()?;
        self.expect(Tok::Semi)?;
        Ok(ConstDecl {
            name,
            ty,
            value,
            pos,
        })
    }

    fn module(&mut self) -> Result<ModuleAst, GclError> {
        let pos = self.pos();
        self.keyword("module")?;
        let name = self.ident()?;
        let mut variables = Vec::new();
        let mut commands = Vec::new();
        loop {
            if self.is_keyword("endmodule") {
                self.bump();
                break;
            }
            match self.peek() {
                Tok::LBracket => commands.push(self.command()?),
                Tok::Ident(_) if self.peek_at(1) == &Tok::Colon => variables.push(self.variable()?),
                _ => return self.error("variable declaration, command or `endmodule`"),
            }
        }
        Ok(ModuleAst {
            name,
            variables,
            commands,
            pos,
        })
    }

    fn variable(&mut self) -> Result<VarDeclAst, GclError> {
        let pos = self.pos();
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        let domain = if self.is_keyword("bool") {
            self.bump();
            Domain::Bool
        } else {
            self.expect(Tok::LBracket)?;
            let lo = self.expr()?;
            self.expect(Tok::DotDot)?;
            let hi = self.expr()?;
            self.expect(Tok::RBracket)?;
            Domain::Range(lo, hi)
        };
        let init = if self.is_keyword("init") {
            self.bump();
            Some(self.expr()?)
        } else {
            None
        };
        self.expect(Tok::Semi)?;
        Ok(VarDeclAst {
            name,
            domain,
            init,
            pos,
        })
    }

    fn action_label(&mut self) -> Result<Option<String>, GclError> {
        self.expect(Tok::LBracket)?;
        let action = if self.peek() == &Tok::RBracket {
            None
        } else {
            Some(self.ident()?)
        };
        self.expect(Tok::RBracket)?;
        Ok(action)
    }

    fn command(&mut self) -> Result<CommandAst, GclError> {
        let pos = self.pos();
        let action = self.action_label()?;
        let guard = self.expr()?;
        self.expect(Tok::Arrow)?;
        let mut updates = Vec::new();
        loop {
            updates.push(self.update()?);
            if !self.eat(&Tok::Plus) {
                break;
            }
        }
        self.expect(Tok::Semi)?;
        Ok(CommandAst {
            action,
            guard,
            updates,
            pos,
        })
    }

    fn starts_assignments(&self) -> bool {
        let assign = self.peek() == &Tok::LParen
            && matches!(self.peek_at(1), Tok::Ident(_))
            && self.peek_at(2) == &Tok::Prime;
        let skip = self.is_keyword("true") && matches!(self.peek_at(1), Tok::Semi | Tok::Plus);
        assign || skip
    }

    fn update(&mut self) -> Result<UpdateAst, GclError> {
        let pos = self.pos();
        let prob = if self.starts_assignments() {
            None
        } else {
            let p = self.expr()?;
            self.expect(Tok::Colon)?;
            Some(p)
        };
        let mut assignments = Vec::new();
        if self.is_keyword("true") {
            self.bump();
        } else {
            loop {
                let apos = self.pos();
                self.expect(Tok::LParen)?;
                let var = self.ident()?;
                self.expect(Tok::Prime)?;
                self.expect(Tok::Eq)?;
                let value = self.expr()?;
                self.expect(Tok::RParen)?;
                assignments.push(Assignment {
                    var,
                    value,
                    pos: apos,
                });
                if !self.eat(&Tok::Amp) {
                    break;
                }
            }
        }
        Ok(UpdateAst {
            prob,
            assignments,
            pos,
        })
    }

    fn rewards(&mut self) -> Result<RewardsDecl, GclError> {
        let pos = self.pos();
        self.keyword("rewards")?;
        let name = if let Tok::Str(_) = self.peek() {
            self.string()?
        } else {
            String::new()
        };
        let mut items = Vec::new();
        loop {
            if self.is_keyword("endrewards") {
                self.bump();
                break;
            }
            let ipos = self.pos();
            let target = if self.peek() == &Tok::LBracket {
                RewardTarget::Transition(self.action_label()?)
            } else {
                RewardTarget::State
            };
            let guard = self.expr()?;
            self.expect(Tok::Colon)?;
            let value = self.expr()?;
            self.expect(Tok::Semi)?;
            items.push(RewardItem {
                target,
                guard,
                value,
                pos: ipos,
            });
        }
        Ok(RewardsDecl { name, items, pos })
    }

    pub fn expr(&mut self) -> Result<Expr, GclError> {
        let cond = self.implies()?;
        if self.peek() == &Tok::Question {
            let pos = self.pos();
            self.bump();
            let then = self.expr()?;
            self.expect(Tok::Colon)?;
            let otherwise = self.expr()?;
            return Ok(Expr {
                kind: ExprKind::Ite(Box::new(cond), Box::new(then), Box::new(otherwise)),
                pos,
            });
        }
        Ok(cond)
    }

    fn binary(op: BinOp, l: Expr, r: Expr, pos: Pos) -> Expr {
        Expr {
            kind: ExprKind::Binary(op, Box::new(l), Box::new(r)),
            pos,
        }
    }

    fn implies(&mut self) -> Result<Expr, GclError> {
        let lhs = self.iff()?;
        if self.peek() == &Tok::Implies {
            let pos = self.pos();
            self.bump();
            let rhs = self.implies()?;
            return Ok(Self::binary(BinOp::Implies, lhs, rhs, pos));
        }
        Ok(lhs)
    }

    fn iff(&mut self) -> Result<Expr, GclError> {
        let mut lhs = self.or()?;
        while self.peek() == &Tok::Iff {
            let pos = self.pos();
            self.bump();
            let rhs = self.or()?;
            lhs = Self::binary(BinOp::Iff, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, GclError> {
        let mut lhs = self.and()?;
        while self.peek() == &Tok::Bar {
            let pos = self.pos();
            self.bump();
            let rhs = self.and()?;
            lhs = Self::binary(BinOp::Or, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, GclError> {
        let mut lhs = self.not()?;
        while self.peek() == &Tok::Amp {
            let pos = self.pos();
            self.bump();
            let rhs = self.not()?;
            lhs = Self::binary(BinOp::And, lhs, rhs, pos);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, GclError> {
        if self.peek() == &Tok::Bang {
            let pos = self.pos();
            self.bump();
            let inner = self.not()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnOp::Not, Box::new(inner)),
                pos,
            });
        }
        self.relation()
    }

    fn relation(&mut self) -> Result<Expr, GclError> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        let pos = self.pos();
        self.bump();
        let rhs = self.additive()?;
        Ok(Self::binary(op, lhs, rhs, pos))
    }

    fn additive(&mut self) -> Result<Expr, GclError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = self.pos();
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Self::binary(op, lhs, rhs, pos);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, GclError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let pos = self.pos();
            self.bump();
            let rhs = self.unary()?;
            lhs = Self::binary(op, lhs, rhs, pos);
        }
    }

    fn unary(&mut self) -> Result<Expr, GclError> {
        if self.peek() == &Tok::Minus {
            let pos = self.pos();
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnOp::Neg, Box::new(inner)),
                pos,
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, GclError> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                ExprKind::Int(v)
            }
            Tok::Real(s) => {
                self.bump();
                ExprKind::Real(s)
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                return Ok(e);
            }
            Tok::Ident(name) => match name.as_str() {
                "true" => {
                    self.bump();
                    ExprKind::Bool(true)
                }
                "false" => {
                    self.bump();
                    ExprKind::Bool(false)
                }
                _ => match Func::from_name(&name) {
                    Some(f) if self.peek_at(1) == &Tok::LParen => {
                        self.bump();
                        self.bump();
                        let mut args = Vec::new();
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                        self.expect(Tok::RParen)?;
                        let (lo, hi) = f.arity();
                        if args.len() < lo || args.len() > hi {
                            return Err(GclError::Type {
                                pos,
                                msg: alloc::format!(
                                    "`{name}` does not take {} argument(s)",
                                    args.len()
                                ),
                            });
                        }
                        ExprKind::Call(f, args)
                    }
                    _ => ExprKind::Ident(self.ident()?),
                },
            },
            _ => return self.error("expression"),
        };
        Ok(Expr { kind, pos })
    }
}

fn is_reserved(word: &str) -> bool {
    matches!(
        word,
        "module"
            | "endmodule"
            | "const"
            | "formula"
            | "label"
            | "rewards"
            | "endrewards"
            | "init"
            | "true"
            | "false"
            | "int"
            | "double"
            | "bool"
            | "dtmc"
            | "probabilistic"
    )
}
