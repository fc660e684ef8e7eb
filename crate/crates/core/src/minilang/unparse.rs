//! Canonical source printer. `parse(unparse(p))` is structurally `p`.

use super::ast::*;

pub fn unparse(program: &Program) -> String {
    let mut out = String::new();
    for g in &program.globals {
        out.push_str(&format!("global {};\n", g.name));
    }
    if !program.globals.is_empty() {
        out.push('\n');
    }
    for (i, f) in program.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        unparse_function(f, &mut out);
    }
    out
}

fn unparse_function(f: &FunctionDef, out: &mut String) {
    let params = f.params.join(", ");
    if f.body.is_empty() {
        out.push_str(&format!("fn {}({params}){{}}\n", f.name));
        return;
    }
    out.push_str(&format!("fn {}({params}) {{\n", f.name));
    for stmt in &f.body {
        unparse_stmt(stmt, 1, out);
    }
    out.push_str("}\n");
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn unparse_stmt(stmt: &Stmt, depth: usize, out: &mut String) {
    indent(depth, out);
    match stmt {
        Stmt::Assign { lhs, expr, .. } => {
            out.push_str(&format!("{lhs} = {};\n", unparse_expr(expr)));
        }
        Stmt::Call { call, .. } => {
            out.push_str(&format!("{};\n", unparse_expr(call)));
        }
        Stmt::Return { expr, .. } => match expr {
            Some(e) => out.push_str(&format!("return {};\n", unparse_expr(e))),
            None => out.push_str("return;\n"),
        },
        Stmt::If {
            cond,
            then_body,
            else_body,
            ..
        } => {
            out.push_str(&format!("if ({}) {{\n", unparse_expr(cond)));
            for s in then_body {
                unparse_stmt(s, depth + 1, out);
            }
            indent(depth, out);
            if else_body.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                for s in else_body {
                    unparse_stmt(s, depth + 1, out);
                }
                indent(depth, out);
                out.push_str("}\n");
            }
        }
        Stmt::While { cond, body, .. } => {
            out.push_str(&format!("while ({}) {{\n", unparse_expr(cond)));
            for s in body {
                unparse_stmt(s, depth + 1, out);
            }
            indent(depth, out);
            out.push_str("}\n");
        }
    }
}

pub fn unparse_expr(expr: &Expr) -> String {
    match expr {
        Expr::StrLit { text, .. } => quote(text),
        Expr::Var { name, .. } => name.clone(),
        Expr::Concat { lhs, rhs, .. } => {
            format!("{} + {}", unparse_expr(lhs), unparse_expr(rhs))
        }
        Expr::Format { template, args, .. } => {
            let mut s = format!("format({}", quote(template));
            for a in args {
                s.push_str(", ");
                s.push_str(&unparse_expr(a));
            }
            s.push(')');
            s
        }
        Expr::Call { callee, args, .. } => call_text(callee, args),
        Expr::IndirectCall { var, args, .. } => call_text(var, args),
    }
}

fn call_text(name: &str, args: &[Expr]) -> String {
    let args: Vec<String> = args.iter().map(unparse_expr).collect();
    format!("{name}({})", args.join(", "))
}

fn quote(text: &str) -> String {
    let mut s = String::with_capacity(text.len() + 2);
    s.push('"');
    for c in text.chars() {
        match c {
            '"' => s.push_str("\\\""),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            '\t' => s.push_str("\\t"),
            other => s.push(other),
        }
    }
    s.push('"');
    s
}
