use super::{Expr, GateRef, Process, ProcessKind, Program};

fn exprs(items: &[Expr]) -> String {
    let last = items.len().saturating_sub(1);
    items
        .iter()
        .enumerate()
        .map(|(i, e)| match e {
            // a trailing measure would swallow the names that follow it
            Expr::Measure(_) if i != last => format!("({})", expr(e)),
            _ => expr(e),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn expr(e: &Expr) -> String {
    match e {
        Expr::Var(x) => x.clone(),
        Expr::Bit(b) => b.to_string(),
        Expr::Measure(qs) => format!("measure {}", qs.join(",")),
        Expr::Tuple(items) => format!("({})", exprs(items)),
    }
}

/// Renders a term in the surface syntax; `parse ∘ pretty_print` is the identity.
pub fn pretty_print(term: &Process) -> String {
    match &term.kind {
        ProcessKind::Nil => "0".to_string(),
        ProcessKind::Input { channel, binders, cont } => {
            format!("{channel}?[{}] . {}", binders.join(","), pretty_print(cont))
        }
        ProcessKind::Output { channel, payload, cont } => {
            format!("{channel}![{}] . {}", exprs(payload), pretty_print(cont))
        }
        ProcessKind::Action { targets, gate, cont } => {
            let gate = match gate {
                GateRef::Fixed(g) => g.to_string(),
                GateRef::Sigma(r) => format!("sigma[{r}]"),
            };
            format!("{{{} *= {gate}}} . {}", targets.join(","), pretty_print(cont))
        }
        ProcessKind::Qbit { binders, cont } => {
            format!("(qbit {}) {}", binders.join(","), pretty_print(cont))
        }
        ProcessKind::New { binder, cont } => format!("(new {binder}) {}", pretty_print(cont)),
        ProcessKind::Par(l, r) => format!("({} | {})", pretty_print(l), pretty_print(r)),
        ProcessKind::Call { process, args } => format!("{process}({})", args.join(",")),
    }
}

pub fn pretty_print_program(program: &Program) -> String {
    let mut out = String::new();
    for s in &program.sidecars {
        out.push_str(&format!("//: {}\n", s.text));
    }
    for d in &program.definitions {
        out.push_str(&format!(
            "{}({}) = {}\n",
            d.name,
            d.params.join(","),
            pretty_print(&d.body)
        ));
    }
    if let Some(main) = &program.main {
        out.push_str(&format!("{}({})\n", main.process, main.args.join(",")));
    }
    out
}
