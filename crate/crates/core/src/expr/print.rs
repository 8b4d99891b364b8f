use super::{BinaryOp, Node, UnaryOp};

// Binding strength; higher binds tighter.
const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Const(c) if *c < 0.0 || c.is_sign_negative() => NEG,
        Node::Const(_) | Node::Var(_) => ATOM,
        Node::Unary(UnaryOp::Neg, _) => NEG,
        Node::Unary(..) => ATOM,
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => ADD,
        Node::Binary(..) => MUL,
        Node::Pow(..) => POW,
    }
}

pub(super) fn render(node: &Node, arity: usize) -> String {
    let mut out = String::new();
    write(node, arity, &mut out);
    out
}

fn write_child(node: &Node, arity: usize, paren: bool, out: &mut String) {
    if paren {
        out.push('(');
        write(node, arity, out);
        out.push(')');
    } else {
        write(node, arity, out);
    }
}

fn write(node: &Node, arity: usize, out: &mut String) {
    match node {
        Node::Const(c) => out.push_str(&format!("{c}")),
        Node::Var(i) => {
            if arity <= 3 {
                out.push(['x', 'y', 'z'][*i]);
            } else {
                out.push_str(&format!("x{}", i + 1));
            }
        }
        Node::Unary(UnaryOp::Neg, a) => {
            out.push('-');
            write_child(a, arity, precedence(a) < NEG, out);
        }
        Node::Unary(op, a) => {
            out.push_str(op.function_name().unwrap_or_default());
            write_child(a, arity, true, out);
        }
        Node::Binary(op, a, b) => {
            let p = precedence(node);
            write_child(a, arity, precedence(a) < p, out);
            out.push_str(match op {
                BinaryOp::Add => " + ",
                BinaryOp::Sub => " - ",
                BinaryOp::Mul => "*",
                BinaryOp::Div => "/",
            });
            // Parser is left-associative, so an equal-precedence right child
            // needs parentheses to keep its shape.
            write_child(b, arity, precedence(b) <= p, out);
        }
        Node::Pow(a, p) => {
            write_child(a, arity, precedence(a) <= POW, out);
            out.push('^');
            if *p < 0.0 {
                out.push_str(&format!("(-{})", -p));
            } else {
                out.push_str(&format!("{p}"));
            }
        }
    }
}
