//! Seeded program generator for analysis/runtime agreement sweeps.
//!
//! Each generated program composes shell commands from a mix of trusted
//! literals, neutral argument strings and remote inputs, routing the flows
//! through assignment chains, helper functions, globals and indirect calls
//! before they reach a sink. The generator also emits the matching spec and
//! input queue so a scenario can run as-is.

use crate::prng::Prng;

#[derive(Debug)]
pub struct GeneratedProgram {
    pub source: String,
    pub spec_text: String,
    pub inputs: Vec<String>,
    pub shell_fixture: String,
}

const TRUSTED_COMMANDS: &[&str] = &["wget ", "ls ", "curl ", "tar "];
const NEUTRAL_ARGS: &[&str] = &["-q", "--long", "/srv/data", "out.bin", "-x -y"];
const BENIGN_INPUTS: &[&str] = &["http://example.com/a", "payload.txt", "10.0.0.7"];

pub const SHELL_FIXTURE: &str = "\
internal cd
internal echo
binary /bin/wget
binary /bin/ls
binary /bin/curl
binary /bin/tar
";

/// One deterministic program per seed. Statement count stays under 60;
/// chains run up to 12 hops and cross at least three functions when the
/// seed's layout allows it.
pub fn generate(seed: u64) -> GeneratedProgram {
    let mut rng = Prng::seeded(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let mut inputs = Vec::new();
    let mut helpers = String::new();
    let mut main_body = String::new();
    let mut helper_count = 0usize;
    let mut var_count = 0usize;
    let mut globals = String::new();
    let mut global_count = 0usize;

    let fresh_var = |var_count: &mut usize| {
        *var_count += 1;
        format!("v{var_count}")
    };

    let sink_count = 1 + rng.below(3) as usize;
    let mut sink_lines = Vec::new();
    // Keep the whole program under the 60-statement bound regardless of
    // how the hop dice land.
    let mut stmt_budget: i64 = 44;

    for _ in 0..sink_count {
        let command = *rng.pick(TRUSTED_COMMANDS);
        // Seed value: mostly a trusted literal, sometimes fully dynamic.
        let dynamic_seed = rng.below(5) == 0;
        let mut current = if dynamic_seed {
            inputs.push((*rng.pick(BENIGN_INPUTS)).to_owned());
            "input()".to_owned()
        } else {
            format!("{:?}", command)
        };

        // Route through a chain of hops.
        let hops = 1 + rng.below(12) as usize;
        for _ in 0..hops {
            if stmt_budget < 4 {
                break;
            }
            match rng.below(5) {
                // Plain assignment link.
                0 | 1 => {
                    let v = fresh_var(&mut var_count);
                    main_body.push_str(&format!("    {v} = {current};\n"));
                    current = v;
                    stmt_budget -= 1;
                }
                // Helper function pass-through (one more relay inside).
                2 => {
                    helper_count += 1;
                    let name = format!("relay{helper_count}");
                    helpers.push_str(&format!(
                        "fn {name}(x){{\n    y = x;\n    return y;\n}}\n\n"
                    ));
                    let v = fresh_var(&mut var_count);
                    main_body.push_str(&format!("    {v} = {name}({current});\n"));
                    current = v;
                    stmt_budget -= 3;
                }
                // Global hop: assign then read back.
                3 => {
                    global_count += 1;
                    let g = format!("G{global_count}");
                    globals.push_str(&format!("global {g};\n"));
                    main_body.push_str(&format!("    {g} = {current};\n"));
                    let v = fresh_var(&mut var_count);
                    main_body.push_str(&format!("    {v} = {g};\n"));
                    current = v;
                    stmt_budget -= 2;
                }
                // Indirect call through a function-name variable.
                _ => {
                    helper_count += 1;
                    let name = format!("pass{helper_count}");
                    helpers.push_str(&format!("fn {name}(x){{\n    return x;\n}}\n\n"));
                    let fv = fresh_var(&mut var_count);
                    let v = fresh_var(&mut var_count);
                    main_body.push_str(&format!("    {fv} = {:?};\n", name));
                    main_body.push_str(&format!("    {v} = {fv}({current});\n"));
                    current = v;
                    stmt_budget -= 3;
                }
            }
        }

        // Optionally wrap the last hop in control flow that executes it.
        if rng.below(3) == 0 && stmt_budget >= 5 {
            let v = fresh_var(&mut var_count);
            main_body.push_str(&format!(
                "    flag = \"go\";\n    while (flag) {{\n        {v} = {current};\n        flag = \"\";\n    }}\n"
            ));
            current = v;
            stmt_budget -= 4;
        }

        // Compose the final command line with an untrusted or neutral tail.
        let tail = match rng.below(3) {
            0 => {
                inputs.push((*rng.pick(BENIGN_INPUTS)).to_owned());
                "input()".to_owned()
            }
            1 => format!("{:?}", format!(" {}", rng.pick(NEUTRAL_ARGS))),
            _ => {
                inputs.push((*rng.pick(BENIGN_INPUTS)).to_owned());
                format!("{:?} + input()", " ")
            }
        };
        let cmd_var = fresh_var(&mut var_count);
        main_body.push_str(&format!("    {cmd_var} = {current} + {tail};\n"));
        sink_lines.push(format!("    system({cmd_var});\n"));
    }

    // Unrelated effect noise on non-command strings.
    if rng.below(2) == 0 {
        main_body.push_str("    scratch = \"notes.txt\";\n    fopen(scratch);\n");
    }
    for line in sink_lines {
        main_body.push_str(&line);
    }

    let source = format!("{globals}\n{helpers}fn main(){{\n{main_body}}}\n");
    let spec_text = TRUSTED_COMMANDS
        .iter()
        .map(|c| format!("const:{}\n", c.trim()))
        .collect();

    GeneratedProgram {
        source,
        spec_text,
        inputs,
        shell_fixture: SHELL_FIXTURE.to_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;

    #[test]
    fn generated_programs_parse_and_stay_small() {
        for seed in 0..50 {
            let g = generate(seed);
            let program = parse(&g.source, "gen.mpl")
                .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", g.source));
            let stmt_count = g.source.matches(';').count();
            assert!(
                stmt_count <= 60,
                "seed {seed} grew to {stmt_count} statements"
            );
            assert!(program.function("main").is_some());
        }
    }

    #[test]
    fn generated_flows_agree_with_the_taint_oracle() {
        use crate::runtime::{run_with_taint_oracle, Scenario};
        use crate::tcs::TrustedSpec;
        for seed in 0..20 {
            let g = generate(seed);
            let spec =
                TrustedSpec::parse(&g.spec_text, std::path::Path::new("."), "gen.tcs").unwrap();
            let inputs: Vec<&str> = g.inputs.iter().map(String::as_str).collect();
            let scenario = Scenario::inline(&g.source, spec, seed)
                .with_inputs(&inputs)
                .with_shell_fixture(&g.shell_fixture);
            let out = run_with_taint_oracle(&scenario)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", g.source));
            for taint in &out.trace.sink_taints {
                assert_eq!(
                    taint.trusted_positions(),
                    taint.marked_positions(),
                    "seed {seed} disagreement\n{}",
                    g.source
                );
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(7).source, generate(7).source);
        assert_ne!(generate(7).source, generate(8).source);
    }
}
