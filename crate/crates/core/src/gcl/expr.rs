//! Name resolution, type checking and evaluation of expressions.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::ast::{BinOp, Expr, ExprKind, FormulaDecl, Func, UnOp};
use super::{GclError, Pos};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Real,
    Bool,
}

impl Ty {
    fn numeric(self) -> bool {
        matches!(self, Ty::Int | Ty::Real)
    }

    fn name(self) -> &'static str {
        match self {
            Ty::Int => "int",
            Ty::Real => "double",
            Ty::Bool => "bool",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Int(v) => v as f64,
            Value::Real(v) => v,
            Value::Bool(b) => b as i64 as f64,
        }
    }

    pub fn as_bool(self) -> bool {
        matches!(self, Value::Bool(true))
    }
}

/// A resolved, typed expression.
#[derive(Debug, Clone, PartialEq)]
pub enum CExpr {
    Int(i64),
    Real(f64, Option<Rational>),
    Bool(bool),
    IntVar(u32),
    BoolVar(u32),
    Formula(u32),
    Not(Box<CExpr>),
    Neg(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    Ite(Box<CExpr>, Box<CExpr>, Box<CExpr>),
    Call(Func, Vec<CExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    Overflow,
    ModByZero,
    NegativeExponent,
    NotFinite,
    /// The expression uses an operation with no exact rational result.
    Inexact,
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            EvalError::Overflow => "integer overflow",
            EvalError::ModByZero => "mod by zero",
            EvalError::NegativeExponent => "negative integer exponent",
            EvalError::NotFinite => "non-finite value converted to int",
            EvalError::Inexact => "value is not an exact rational",
        })
    }
}

/// Per-state evaluation context: variable values and the formula memo.
pub struct Env<'a> {
    pub vals: &'a [i32],
    pub formulas: &'a [CExpr],
    pub cache: &'a mut [Option<Value>],
}

fn to_int(x: f64) -> Result<i64, EvalError> {
    if x.is_finite() && x.abs() < 9.0e18 {
        Ok(x as i64)
    } else {
        Err(EvalError::NotFinite)
    }
}

pub fn eval(e: &CExpr, env: &mut Env<'_>) -> Result<Value, EvalError> {
    use Value::*;
    Ok(match e {
        CExpr::Int(v) => Int(*v),
        CExpr::Real(v, _) => Real(*v),
        CExpr::Bool(b) => Bool(*b),
        CExpr::IntVar(i) => Int(env.vals[*i as usize] as i64),
        CExpr::BoolVar(i) => Bool(env.vals[*i as usize] != 0),
        CExpr::Formula(i) => {
            let i = *i as usize;
            if let Some(v) = env.cache[i] {
                return Ok(v);
            }
            let formulas = env.formulas;
            let v = eval(&formulas[i], env)?;
            env.cache[i] = Some(v);
            v
        }
        CExpr::Not(a) => Bool(!eval(a, env)?.as_bool()),
        CExpr::Neg(a) => match eval(a, env)? {
            Int(v) => Int(v.checked_neg().ok_or(EvalError::Overflow)?),
            other => Real(-other.as_f64()),
        },
        CExpr::Bin(op, a, b) => {
            match op {
                BinOp::And => return Ok(Bool(eval(a, env)?.as_bool() && eval(b, env)?.as_bool())),
                BinOp::Or => return Ok(Bool(eval(a, env)?.as_bool() || eval(b, env)?.as_bool())),
                BinOp::Implies => {
                    return Ok(Bool(!eval(a, env)?.as_bool() || eval(b, env)?.as_bool()))
                }
                _ => {}
            }
            let x = eval(a, env)?;
            let y = eval(b, env)?;
            match (op, x, y) {
                (BinOp::Iff, Bool(p), Bool(q)) => Bool(p == q),
                (BinOp::Eq, Bool(p), Bool(q)) => Bool(p == q),
                (BinOp::Ne, Bool(p), Bool(q)) => Bool(p != q),
                (BinOp::Add, Int(p), Int(q)) => Int(p.checked_add(q).ok_or(EvalError::Overflow)?),
                (BinOp::Sub, Int(p), Int(q)) => Int(p.checked_sub(q).ok_or(EvalError::Overflow)?),
                (BinOp::Mul, Int(p), Int(q)) => Int(p.checked_mul(q).ok_or(EvalError::Overflow)?),
                (BinOp::Eq, Int(p), Int(q)) => Bool(p == q),
                (BinOp::Ne, Int(p), Int(q)) => Bool(p != q),
                (BinOp::Lt, Int(p), Int(q)) => Bool(p < q),
                (BinOp::Le, Int(p), Int(q)) => Bool(p <= q),
                (BinOp::Gt, Int(p), Int(q)) => Bool(p > q),
                (BinOp::Ge, Int(p), Int(q)) => Bool(p >= q),
                _ => {
                    let (p, q) = (x.as_f64(), y.as_f64());
                    match op {
                        BinOp::Add => Real(p + q),
                        BinOp::Sub => Real(p - q),
                        BinOp::Mul => Real(p * q),
                        BinOp::Div => Real(p / q),
                        BinOp::Eq => Bool(p == q),
                        BinOp::Ne => Bool(p != q),
                        BinOp::Lt => Bool(p < q),
                        BinOp::Le => Bool(p <= q),
                        BinOp::Gt => Bool(p > q),
                        BinOp::Ge => Bool(p >= q),
                        _ => unreachable!("operator checked by the type checker"),
                    }
                }
            }
        }
        CExpr::Ite(c, a, b) => {
            if eval(c, env)?.as_bool() {
                eval(a, env)?
            } else {
                eval(b, env)?
            }
        }
        CExpr::Call(f, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval(a, env)?);
            }
            call(*f, &vals)?
        }
    })
}

fn call(f: Func, args: &[Value]) -> Result<Value, EvalError> {
    use Value::*;
    let all_int = args.iter().all(|v| matches!(v, Int(_)));
    Ok(match f {
        Func::Min | Func::Max => {
            if all_int {
                let it = args.iter().map(|v| match v {
                    Int(i) => *i,
                    _ => 0,
                });
                Int(if f == Func::Min { it.min() } else { it.max() }.unwrap_or(0))
            } else {
                let it = args.iter().map(|v| v.as_f64());
                Real(if f == Func::Min {
                    it.fold(f64::INFINITY, f64::min)
                } else {
                    it.fold(f64::NEG_INFINITY, f64::max)
                })
            }
        }
        Func::Floor => Int(to_int(libm::floor(args[0].as_f64()))?),
        Func::Ceil => Int(to_int(libm::ceil(args[0].as_f64()))?),
        Func::Round => Int(to_int(libm::floor(args[0].as_f64() + 0.5))?),
        Func::Abs => match args[0] {
            Int(v) => Int(v.checked_abs().ok_or(EvalError::Overflow)?),
            other => Real(libm::fabs(other.as_f64())),
        },
        Func::Pow => match (args[0], args[1]) {
            (Int(b), Int(e)) => {
                if e < 0 {
                    return Err(EvalError::NegativeExponent);
                }
                let e = u32::try_from(e).map_err(|_| EvalError::Overflow)?;
                Int(b.checked_pow(e).ok_or(EvalError::Overflow)?)
            }
            (b, e) => Real(libm::pow(b.as_f64(), e.as_f64())),
        },
        Func::Mod => match (args[0], args[1]) {
            (Int(_), Int(0)) => return Err(EvalError::ModByZero),
            (Int(a), Int(b)) => Int(a.rem_euclid(b)),
            _ => unreachable!("mod is typed int"),
        },
    })
}

/// Evaluates a numeric expression exactly. Boolean sub-expressions (the
/// condition of `?:`) are evaluated normally.
pub fn eval_exact(e: &CExpr, env: &mut Env<'_>) -> Result<Rational, EvalError> {
    Ok(match e {
        CExpr::Int(v) => Rational::from_int(*v),
        CExpr::Real(_, exact) => exact.ok_or(EvalError::Inexact)?,
        CExpr::IntVar(i) => Rational::from_int(env.vals[*i as usize] as i64),
        CExpr::Formula(i) => {
            let formulas = env.formulas;
            eval_exact(&formulas[*i as usize], env)?
        }
        CExpr::Neg(a) => -eval_exact(a, env)?,
        CExpr::Bin(op, a, b) => {
            let x = eval_exact(a, env)?;
            let y = eval_exact(b, env)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x.checked_div(y).ok_or(EvalError::Inexact)?,
                _ => return Err(EvalError::Inexact),
            }
        }
        CExpr::Ite(c, a, b) => {
            if eval(c, env)?.as_bool() {
                eval_exact(a, env)?
            } else {
                eval_exact(b, env)?
            }
        }
        CExpr::Call(f, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_exact(a, env)?);
            }
            match f {
                Func::Min => vals.into_iter().min().unwrap_or(Rational::ZERO),
                Func::Max => vals.into_iter().max().unwrap_or(Rational::ZERO),
                Func::Floor => Rational::new(vals[0].floor(), 1),
                Func::Ceil => Rational::new(vals[0].ceil(), 1),
                Func::Round => Rational::new((vals[0] + Rational::new(1, 2)).floor(), 1),
                Func::Abs => {
                    if vals[0] < Rational::ZERO {
                        -vals[0]
                    } else {
                        vals[0]
                    }
                }
                Func::Pow => {
                    if !vals[1].is_integer() {
                        return Err(EvalError::Inexact);
                    }
                    let e = i64::try_from(vals[1].numer()).map_err(|_| EvalError::Overflow)?;
                    vals[0].powi(e).ok_or(EvalError::Inexact)?
                }
                Func::Mod => {
                    let (a, b) = (vals[0].numer(), vals[1].numer());
                    if b == 0 {
                        return Err(EvalError::ModByZero);
                    }
                    Rational::new(a.rem_euclid(b), 1)
                }
            }
        }
        CExpr::Bool(_) | CExpr::BoolVar(_) | CExpr::Not(_) => return Err(EvalError::Inexact),
    })
}

/// True when the value of `e` can differ between states.
pub fn depends_on_state(e: &CExpr, formula_dep: &[bool]) -> bool {
    match e {
        CExpr::Int(_) | CExpr::Real(..) | CExpr::Bool(_) => false,
        CExpr::IntVar(_) | CExpr::BoolVar(_) => true,
        CExpr::Formula(i) => formula_dep[*i as usize],
        CExpr::Not(a) | CExpr::Neg(a) => depends_on_state(a, formula_dep),
        CExpr::Bin(_, a, b) => depends_on_state(a, formula_dep) || depends_on_state(b, formula_dep),
        CExpr::Ite(c, a, b) => [c, a, b].iter().any(|x| depends_on_state(x, formula_dep)),
        CExpr::Call(_, args) => args.iter().any(|x| depends_on_state(x, formula_dep)),
    }
}

/// A named constant after evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstValue {
    pub value: Value,
    pub exact: Option<Rational>,
}

/// Resolves identifiers against constants, variables and formulas and
/// assigns types.
pub struct Compiler<'a> {
    pub consts: BTreeMap<String, ConstValue>,
    /// Variable name → (slot, is boolean).
    pub vars: BTreeMap<String, (u32, bool)>,
    formula_index: BTreeMap<String, u32>,
    formula_asts: &'a [FormulaDecl],
    compiled: Vec<Option<(CExpr, Ty)>>,
    visiting: Vec<bool>,
    /// When false, only constants may be referenced.
    pub allow_state: bool,
}

impl<'a> Compiler<'a> {
    pub fn new(formula_asts: &'a [FormulaDecl]) -> Result<Self, GclError> {
        let mut formula_index = BTreeMap::new();
        for (i, f) in formula_asts.iter().enumerate() {
            if formula_index.insert(f.name.clone(), i as u32).is_some() {
                return Err(GclError::Duplicate {
                    pos: f.pos,
                    name: f.name.clone(),
                });
            }
        }
        Ok(Compiler {
            consts: BTreeMap::new(),
            vars: BTreeMap::new(),
            formula_index,
            formula_asts,
            compiled: vec![None; formula_asts.len()],
            visiting: vec![false; formula_asts.len()],
            allow_state: false,
        })
    }

    pub fn is_formula(&self, name: &str) -> bool {
        self.formula_index.contains_key(name)
    }

    /// Compiles every formula and returns their bodies in declaration order.
    pub fn finish_formulas(&mut self) -> Result<Vec<CExpr>, GclError> {
        for i in 0..self.formula_asts.len() {
            self.formula(i, self.formula_asts[i].pos)?;
        }
        Ok(self
            .compiled
            .iter()
            .map(|c| {
                c.as_ref()
                    .map(|(e, _)| e.clone())
                    .unwrap_or(CExpr::Bool(false))
            })
            .collect())
    }

    fn formula(&mut self, i: usize, used_at: Pos) -> Result<Ty, GclError> {
        if let Some((_, ty)) = &self.compiled[i] {
            return Ok(*ty);
        }
        if self.visiting[i] {
            return Err(GclError::CyclicFormula {
                pos: used_at,
                name: self.formula_asts[i].name.clone(),
            });
        }
        self.visiting[i] = true;
        let body = &self.formula_asts[i].body;
        let (e, ty) = self.compile(body)?;
        self.visiting[i] = false;
        self.compiled[i] = Some((e, ty));
        Ok(ty)
    }

    pub fn compile_typed(&mut self, e: &Expr, want: Ty) -> Result<CExpr, GclError> {
        let (c, ty) = self.compile(e)?;
        let ok = ty == want || (want == Ty::Real && ty == Ty::Int);
        if !ok {
            return Err(type_error(
                e.pos,
                alloc::format!("expected {} expression, found {}", want.name(), ty.name()),
            ));
        }
        Ok(c)
    }

    pub fn compile(&mut self, e: &Expr) -> Result<(CExpr, Ty), GclError> {
        Ok(match &e.kind {
            ExprKind::Int(v) => (CExpr::Int(*v), Ty::Int),
            ExprKind::Real(text) => {
                let exact = Rational::parse_decimal(text);
                let v: f64 = text.parse().map_err(|_| GclError::Syntax {
                    pos: e.pos,
                    msg: alloc::format!("bad number `{text}`"),
                })?;
                (CExpr::Real(v, exact), Ty::Real)
            }
            ExprKind::Bool(b) => (CExpr::Bool(*b), Ty::Bool),
            ExprKind::Ident(name) => self.ident(name, e.pos)?,
            ExprKind::Unary(UnOp::Not, a) => (
                CExpr::Not(Box::new(self.compile_typed(a, Ty::Bool)?)),
                Ty::Bool,
            ),
            ExprKind::Unary(UnOp::Neg, a) => {
                let (c, ty) = self.compile(a)?;
                if !ty.numeric() {
                    return Err(type_error(a.pos, "cannot negate a boolean".to_string()));
                }
                (CExpr::Neg(Box::new(c)), ty)
            }
            ExprKind::Binary(op, a, b) => {
                let (ca, ta) = self.compile(a)?;
                let (cb, tb) = self.compile(b)?;
                let ty = match op {
                    BinOp::And | BinOp::Or | BinOp::Implies | BinOp::Iff => {
                        if ta != Ty::Bool || tb != Ty::Bool {
                            return Err(type_error(
                                e.pos,
                                "logical operator needs booleans".to_string(),
                            ));
                        }
                        Ty::Bool
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if (ta == Ty::Bool) != (tb == Ty::Bool) {
                            return Err(type_error(
                                e.pos,
                                "cannot compare a boolean with a number".to_string(),
                            ));
                        }
                        Ty::Bool
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if !ta.numeric() || !tb.numeric() {
                            return Err(type_error(e.pos, "ordering needs numbers".to_string()));
                        }
                        Ty::Bool
                    }
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                        if !ta.numeric() || !tb.numeric() {
                            return Err(type_error(e.pos, "arithmetic needs numbers".to_string()));
                        }
                        if *op != BinOp::Div && ta == Ty::Int && tb == Ty::Int {
                            Ty::Int
                        } else {
                            Ty::Real
                        }
                    }
                };
                (CExpr::Bin(*op, Box::new(ca), Box::new(cb)), ty)
            }
            ExprKind::Ite(c, a, b) => {
                let cc = self.compile_typed(c, Ty::Bool)?;
                let (ca, ta) = self.compile(a)?;
                let (cb, tb) = self.compile(b)?;
                let ty = match (ta, tb) {
                    (Ty::Bool, Ty::Bool) => Ty::Bool,
                    (Ty::Int, Ty::Int) => Ty::Int,
                    (x, y) if x.numeric() && y.numeric() => Ty::Real,
                    _ => {
                        return Err(type_error(
                            e.pos,
                            "branches of `?:` have different types".to_string(),
                        ))
                    }
                };
                (CExpr::Ite(Box::new(cc), Box::new(ca), Box::new(cb)), ty)
            }
            ExprKind::Call(f, args) => {
                let mut cargs = Vec::with_capacity(args.len());
                let mut all_int = true;
                for a in args {
                    let (c, ty) = self.compile(a)?;
                    if !ty.numeric() {
                        return Err(type_error(
                            a.pos,
                            "function arguments must be numbers".to_string(),
                        ));
                    }
                    all_int &= ty == Ty::Int;
                    cargs.push(c);
                }
                let ty = match f {
                    Func::Floor | Func::Ceil | Func::Round => Ty::Int,
                    Func::Mod => {
                        if !all_int {
                            return Err(type_error(e.pos, "`mod` needs integers".to_string()));
                        }
                        Ty::Int
                    }
                    _ if all_int => Ty::Int,
                    _ => Ty::Real,
                };
                (CExpr::Call(*f, cargs), ty)
            }
        })
    }

    fn ident(&mut self, name: &str, pos: Pos) -> Result<(CExpr, Ty), GclError> {
        if let Some(c) = self.consts.get(name) {
            return Ok(match c.value {
                Value::Int(v) => (CExpr::Int(v), Ty::Int),
                Value::Real(v) => (CExpr::Real(v, c.exact), Ty::Real),
                Value::Bool(b) => (CExpr::Bool(b), Ty::Bool),
            });
        }
        let state_ref = self.vars.contains_key(name) || self.formula_index.contains_key(name);
        if state_ref && !self.allow_state {
            return Err(type_error(
                pos,
                alloc::format!("`{name}` is not a constant"),
            ));
        }
        if let Some(&(slot, is_bool)) = self.vars.get(name) {
            return Ok(if is_bool {
                (CExpr::BoolVar(slot), Ty::Bool)
            } else {
                (CExpr::IntVar(slot), Ty::Int)
            });
        }
        if let Some(&i) = self.formula_index.get(name) {
            let ty = self.formula(i as usize, pos)?;
            return Ok((CExpr::Formula(i), ty));
        }
        Err(GclError::Undeclared {
            pos,
            name: name.to_string(),
        })
    }

    /// Compiles and evaluates an expression that may only use constants.
    pub fn constant(&mut self, e: &Expr) -> Result<(ConstValue, Ty), GclError> {
        let saved = self.allow_state;
        self.allow_state = false;
        let compiled = self.compile(e);
        self.allow_state = saved;
        let (c, ty) = compiled?;
        let mut env = Env {
            vals: &[],
            formulas: &[],
            cache: &mut [],
        };
        let value = eval(&c, &mut env).map_err(|err| GclError::Eval {
            pos: e.pos,
            msg: err.to_string(),
        })?;
        let exact = if ty == Ty::Bool {
            None
        } else {
            eval_exact(&c, &mut env).ok()
        };
        Ok((ConstValue { value, exact }, ty))
    }
}

fn type_error(pos: Pos, msg: String) -> GclError {
    GclError::Type { pos, msg }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_expr;
    use super::*;

    fn compile_const(src: &str) -> Result<(ConstValue, Ty), GclError> {
        let mut c = Compiler::new(&[]).unwrap();
        c.consts.insert(
            "p".to_string(),
            ConstValue {
                value: Value::Real(0.1),
                exact: Some(Rational::new(1, 10)),
            },
        );
        c.constant(&parse_expr(src).unwrap())
    }

    #[test]
    fn integer_arithmetic_stays_integral() {
        let (v, ty) = compile_const("2 + 3 * 4 - mod(7, 3)").unwrap();
        assert_eq!((v.value, ty), (Value::Int(13), Ty::Int));
        let (v, ty) = compile_const("7 / 2").unwrap();
        assert_eq!((v.value, ty), (Value::Real(3.5), Ty::Real));
    }

    #[test]
    fn exact_values_follow_constants() {
        let (v, _) = compile_const("1 - p").unwrap();
        assert_eq!(v.exact, Some(Rational::new(9, 10)));
        let (v, _) = compile_const("pow(2, 0.5)").unwrap();
        assert_eq!(v.exact, None);
    }

    #[test]
    fn functions_and_conditionals() {
        assert_eq!(
            compile_const("min(3, 1, 2)").unwrap().0.value,
            Value::Int(1)
        );
        assert_eq!(
            compile_const("max(1, 2.5)").unwrap().0.value,
            Value::Real(2.5)
        );
        assert_eq!(
            compile_const("floor(-1.5)").unwrap().0.value,
            Value::Int(-2)
        );
        assert_eq!(compile_const("round(2.5)").unwrap().0.value, Value::Int(3));
        assert_eq!(
            compile_const("true => false ? 1 : 2").unwrap().0.value,
            Value::Int(2)
        );
        assert_eq!(compile_const("abs(-4)").unwrap().0.value, Value::Int(4));
    }

    #[test]
    fn type_errors_and_undeclared_names() {
        assert!(matches!(
            compile_const("1 + true"),
            Err(GclError::Type { .. })
        ));
        assert!(matches!(
            compile_const("mod(1.5, 2)"),
            Err(GclError::Type { .. })
        ));
        assert!(matches!(
            compile_const("q + 1"),
            Err(GclError::Undeclared { name, .. }) if name == "q"
        ));
    }
}
