//! Syntax tree produced by the parser, before name resolution.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
    Iff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Floor,
    Ceil,
    Round,
    Pow,
    Mod,
    Abs,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            "round" => Func::Round,
            "pow" => Func::Pow,
            "mod" => Func::Mod,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    /// Accepted argument counts as `(min, max)`.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Func::Min | Func::Max => (2, usize::MAX),
            Func::Pow | Func::Mod => (2, 2),
            _ => (1, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Real(String),
    Bool(bool),
    Ident(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstType {
    Int,
    Double,
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub ty: Option<ConstType>,
    pub value: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaDecl {
    pub name: String,
    pub body: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Range(Expr, Expr),
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDeclAst {
    pub name: String,
    pub domain: Domain,
    pub init: Option<Expr>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub var: String,
    pub value: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateAst {
    /// `None` stands for probability one.
    pub prob: Option<Expr>,
    pub assignments: Vec<Assignment>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandAst {
    pub action: Option<String>,
    pub guard: Expr,
    pub updates: Vec<UpdateAst>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleAst {
    pub name: String,
    pub variables: Vec<VarDeclAst>,
    pub commands: Vec<CommandAst>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelDecl {
    pub name: String,
    pub expr: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardTarget {
    State,
    /// Transition reward on commands with this action (`None` = unlabeled).
    Transition(Option<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardItem {
    pub target: RewardTarget,
    pub guard: Expr,
    pub value: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardsDecl {
    pub name: String,
    pub items: Vec<RewardItem>,
    pub pos: Pos,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelAst {
    pub constants: Vec<ConstDecl>,
    pub formulas: Vec<FormulaDecl>,
    pub modules: Vec<ModuleAst>,
    pub labels: Vec<LabelDecl>,
    pub rewards: Vec<RewardsDecl>,
}
