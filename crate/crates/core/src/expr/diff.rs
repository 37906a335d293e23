use super::{add, div, mul, neg, pow, sub, unary, BinaryOp, Expr, UnaryOp};

impl Expr {
    /// Partial derivative with respect to the variable named `var`.
    ///
    /// `abs` differentiates to `sign` with `sign(0) = 0`. The result is not
    /// simplified beyond trivial identities.
    pub fn differentiate(&self, var: &str) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var { name, .. } => Expr::Const(if &**name == var { 1.0 } else { 0.0 }),
            Expr::Unary(op, a) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                let a = (**a).clone();
                match op {
                    UnaryOp::Neg => neg(da),
                    UnaryOp::Sin => mul(unary(UnaryOp::Cos, a), da),
                    UnaryOp::Cos => neg(mul(unary(UnaryOp::Sin, a), da)),
                    UnaryOp::Exp => mul(unary(UnaryOp::Exp, a), da),
                    UnaryOp::Abs => mul(unary(UnaryOp::Sign, a), da),
                    UnaryOp::Sqrt => div(da, mul(Expr::Const(2.0), unary(UnaryOp::Sqrt, a))),
                    UnaryOp::Sign => Expr::Const(0.0),
                }
            }
            Expr::Binary(op, a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinaryOp::Add => add(da, db),
                    BinaryOp::Sub => sub(da, db),
                    BinaryOp::Mul => add(mul(da, b), mul(a, db)),
                    BinaryOp::Div => {
                        if db.is_zero() {
                            div(da, b)
                        } else {
                            div(sub(mul(da, b.clone()), mul(a, db)), pow(b, 2))
                        }
                    }
                }
            }
            Expr::Pow(a, n) => {
                let da = a.differentiate(var);
                if *n == 0 || da.is_zero() {
                    return Expr::Const(0.0);
                }
                mul(mul(Expr::Const(*n as f64), pow((**a).clone(), n - 1)), da)
            }
        }
    }

    /// Gradient with respect to each name in `vars`, in order.
    pub fn gradient(&self, vars: &[String]) -> Vec<Expr> {
        vars.iter().map(|v| self.differentiate(v)).collect()
    }
}
