//! Parser, AST and printer for the mini imperative source language that
//! target programs are written in.

pub mod ast;
pub mod parse;
pub mod unparse;

pub use ast::{Expr, FunctionDef, GlobalDecl, Loc, Program, Stmt};
pub use parse::{parse, parse_with, ParseError};
pub use unparse::{unparse, unparse_expr};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::BuiltinSet;

    #[test]
    fn parses_trivial_sink_call() {
        let p = parse(r#"fn main(){ system("ls"); }"#, "t.mpl").unwrap();
        assert_eq!(p.functions.len(), 1);
        let body = &p.functions[0].body;
        assert_eq!(body.len(), 1);
        match &body[0] {
            Stmt::Call {
                call: Expr::Call { callee, args, .. },
                ..
            } => {
                assert_eq!(callee, "system");
                assert!(matches!(&args[0], Expr::StrLit { text, .. } if text == "ls"));
            }
            other => panic!("unexpected stmt {other:?}"),
        }
    }

    #[test]
    fn resolves_indirect_calls_through_variables() {
        let src = r#"
            fn pick(){ return "helper"; }
            fn helper(x){ return x; }
            fn main(){
                f = pick();
                f("data");
            }
        "#;
        let p = parse(src, "t.mpl").unwrap();
        let main = p.function("main").unwrap();
        match &main.body[1] {
            Stmt::Call {
                call: Expr::IndirectCall { var, args, .. },
                ..
            } => {
                assert_eq!(var, "f");
                assert_eq!(args.len(), 1);
            }
            other => panic!("expected indirect call, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_function_rejected() {
        let err = parse("fn a(){} fn a(){} fn main(){}", "t.mpl").unwrap_err();
        assert!(err.message.contains("duplicate function"));
    }

    #[test]
    fn duplicate_param_rejected() {
        assert!(parse("fn f(a, a){} fn main(){}", "t.mpl").is_err());
    }

    #[test]
    fn missing_main_rejected() {
        assert!(parse("fn helper(){}", "t.mpl").is_err());
    }

    #[test]
    fn format_placeholder_arity_checked() {
        assert!(parse(r#"fn main(){ x = format("%s %s", "a"); }"#, "t.mpl").is_err());
        assert!(parse(r#"fn main(){ x = format("100%", "a"); }"#, "t.mpl").is_err());
        assert!(parse(r#"fn main(){ x = format("%s-%s", "a", "b"); }"#, "t.mpl").is_ok());
    }

    #[test]
    fn syntax_error_carries_location() {
        let err = parse("fn main(){\n  x = ;\n}", "prog.mpl").unwrap_err();
        assert_eq!(err.loc.line, 2);
        assert_eq!(&*err.loc.file, "prog.mpl");
    }

    #[test]
    fn globals_parse_and_roundtrip() {
        let src = "global TMPOUTNAME;\n\nfn main() {\n    TMPOUTNAME = \"x\";\n}\n";
        let p = parse(src, "t.mpl").unwrap();
        assert_eq!(p.globals.len(), 1);
        assert_eq!(p.canonical_text(), src);
    }

    #[test]
    fn empty_body_prints_compact() {
        let p = parse("fn f(){} fn main(){}", "t.mpl").unwrap();
        assert!(p.canonical_text().starts_with("fn f(){}\n"));
    }

    #[test]
    fn string_escapes_roundtrip() {
        let src = r#"fn main(){ x = "a\"b\\c\nd\te"; }"#;
        let p = parse(src, "t.mpl").unwrap();
        let again = parse(&p.canonical_text(), "t.mpl").unwrap();
        assert!(p.structurally_eq(&again));
        match &p.functions[0].body[0] {
            Stmt::Assign {
                expr: Expr::StrLit { text, .. },
                ..
            } => {
                assert_eq!(text, "a\"b\\c\nd\te");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unparse_parse_identity_on_nested_control_flow() {
        let src = r#"
            global G;
            fn helper(a, b){ return a + b; }
            fn main(){
                x = "start";
                while (x) {
                    if (x) {
                        x = helper(x, getenv("HOME"));
                    } else {
                        x = "";
                    }
                }
                system(format("run %s now", x));
            }
        "#;
        let p = parse(src, "t.mpl").unwrap();
        let text = p.canonical_text();
        let again = parse(&text, "t.mpl").unwrap();
        assert!(p.structurally_eq(&again));
        assert_eq!(text, again.canonical_text());
    }

    #[test]
    fn locations_stay_within_input_bounds() {
        let src = "fn main() {\n    a = \"x\";\n    system(a);\n}\n";
        let p = parse(src, "t.mpl").unwrap();
        let line_count = src.lines().count() as u32;
        let mut locs = Vec::new();
        for f in &p.functions {
            locs.push(f.loc.clone());
            fn visit_stmt(s: &Stmt, locs: &mut Vec<Loc>) {
                locs.push(s.loc().clone());
                match s {
                    Stmt::If {
                        then_body,
                        else_body,
                        ..
                    } => {
                        then_body.iter().for_each(|s| visit_stmt(s, locs));
                        else_body.iter().for_each(|s| visit_stmt(s, locs));
                    }
                    Stmt::While { body, .. } => body.iter().for_each(|s| visit_stmt(s, locs)),
                    _ => {}
                }
            }
            f.body.iter().for_each(|s| visit_stmt(s, &mut locs));
        }
        for loc in locs {
            assert!(loc.line >= 1 && loc.line <= line_count);
        }
    }

    #[test]
    fn custom_builtin_set_changes_resolution() {
        let mut builtins = BuiltinSet::default();
        builtins.add_input_api("fetch_remote");
        let src = "fn main(){ x = fetch_remote(); }";
        let p = parse_with(src, "t.mpl", &builtins).unwrap();
        match &p.functions[0].body[0] {
            Stmt::Assign {
                expr: Expr::Call { callee, .. },
                ..
            } => {
                assert_eq!(callee, "fetch_remote");
            }
            other => panic!("unexpected {other:?}"),
        }
        // Without the registration the same call is indirect.
        let p = parse(src, "t.mpl").unwrap();
        assert!(matches!(
            &p.functions[0].body[0],
            Stmt::Assign {
                expr: Expr::IndirectCall { .. },
                ..
            }
        ));
    }
}
