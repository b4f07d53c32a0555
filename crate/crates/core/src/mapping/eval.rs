use super::{BinOp, Builtin, Expr, Var};

/// Variable bindings for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalEnv {
    pub x: f64,
    pub i: f64,
    pub n: f64,
    pub min: f64,
    pub max: f64,
}

impl EvalEnv {
    fn get(&self, v: Var) -> f64 {
        match v {
            Var::X => self.x,
            Var::I => self.i,
            Var::N => self.n,
            Var::Min => self.min,
            Var::Max => self.max,
        }
    }
}

pub fn apply_builtin(b: Builtin, args: &[f64]) -> f64 {
    match b {
        Builtin::Lin => {
            let (v, a, b, c, d) = (args[0], args[1], args[2], args[3], args[4]);
            if a == b {
                (c + d) / 2.0
            } else {
                c + (v - a) * (d - c) / (b - a)
            }
        }
        Builtin::Clamp => {
            // NaN input propagates; with crossed bounds the upper one wins
            let v = args[0];
            if v.is_nan() {
                v
            } else {
                v.max(args[1]).min(args[2])
            }
        }
        Builtin::Log => args[0].ln(),
        Builtin::Exp => args[0].exp(),
        Builtin::Pow => args[0].powf(args[1]),
        Builtin::Abs => args[0].abs(),
        Builtin::Floor => args[0].floor(),
        Builtin::Round => args[0].round(),
    }
}

fn apply_binary(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
        BinOp::Pow => a.powf(b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Push(f64),
    Load(Var),
    Neg,
    Binary(BinOp),
    Call(Builtin),
}

/// An expression flattened to postfix order for repeated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    max_depth: usize,
}

impl Program {
    pub fn compile(expr: &Expr) -> Program {
        let mut ops = Vec::new();
        emit(expr, &mut ops);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            match op {
                Op::Push(_) | Op::Load(_) => depth += 1,
                Op::Neg => {}
                Op::Binary(_) => depth -= 1,
                Op::Call(b) => depth = depth + 1 - b.arity(),
            }
            max_depth = max_depth.max(depth);
        }
        Program { ops, max_depth }
    }

    /// IEEE-754 evaluation; never panics, may return NaN or infinities.
    pub fn eval(&self, env: &EvalEnv) -> f64 {
        let mut stack: Vec<f64> = Vec::with_capacity(self.max_depth);
        for op in &self.ops {
            match *op {
                Op::Push(v) => stack.push(v),
                Op::Load(v) => stack.push(env.get(v)),
                Op::Neg => {
                    let top = stack.last_mut().expect("compiled program is balanced");
                    *top = -*top;
                }
                Op::Binary(op) => {
                    let b = stack.pop().expect("compiled program is balanced");
                    let a = stack.last_mut().expect("compiled program is balanced");
                    *a = apply_binary(op, *a, b);
                }
                Op::Call(builtin) => {
                    let at = stack.len() - builtin.arity();
                    let value = apply_builtin(builtin, &stack[at..]);
                    stack.truncate(at);
                    stack.push(value);
                }
            }
        }
        stack.pop().unwrap_or(f64::NAN)
    }
}

fn emit(expr: &Expr, ops: &mut Vec<Op>) {
    match expr {
        Expr::Num(v) => ops.push(Op::Push(*v)),
        Expr::Var(v) => ops.push(Op::Load(*v)),
        Expr::Neg(inner) => {
            emit(inner, ops);
            ops.push(Op::Neg);
        }
        Expr::Binary(op, a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Binary(*op));
        }
        Expr::Call(builtin, args) => {
            for a in args {
                emit(a, ops);
            }
            ops.push(Op::Call(*builtin));
        }
    }
}

/// Evaluates `expr` once. For per-row evaluation compile a [`Program`].
pub fn eval(expr: &Expr, env: &EvalEnv) -> f64 {
    Program::compile(expr).eval(env)
}
