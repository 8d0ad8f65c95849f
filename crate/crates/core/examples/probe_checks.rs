use hysim::catalog::{self, CheckKind};
use hysim::checker::{self, CheckConfig, FiMode};

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    for id in catalog::IDS {
        if !which.is_empty() && !which.iter().any(|w| id.contains(w.as_str())) {
            continue;
        }
        let entry = catalog::load_example(id).unwrap();
        let cfg = CheckConfig::default().with_ambient(&entry.ambient);
        println!("=============== {id}");
        let mut kinds: Vec<(CheckKind, &str, Option<&str>)> = Vec::new();
        for e in &entry.expected {
            if !kinds.iter().any(|(k, s, v)| *k == e.kind && *s == e.set && *v == e.variant) {
                kinds.push((e.kind, e.set, e.variant));
            }
        }
        for (kind, set_name, variant) in kinds {
            let k = entry.set(set_name).unwrap();
            let report = match kind {
                CheckKind::Weak => checker::check_weak_forward_invariance(
                    entry.system(variant).unwrap(), k, &cfg).unwrap(),
                CheckKind::Forward => checker::check_forward_invariance(
                    entry.system(variant).unwrap(), k, &cfg, FiMode::Standard).unwrap(),
                CheckKind::ForwardAlt => checker::check_forward_invariance(
                    entry.system(variant).unwrap(), k, &cfg, FiMode::AltCondition2Prime).unwrap(),
                CheckKind::RobustWeak => checker::check_robust_weak(
                    entry.disturbed.as_ref().unwrap(), k, &cfg).unwrap(),
                CheckKind::RobustForward => checker::check_robust_forward(
                    entry.disturbed.as_ref().unwrap(), k, &cfg).unwrap(),
                CheckKind::Lyapunov => checker::check_lyapunov_sublevel(
                    entry.system(variant).unwrap(), entry.lyapunov.as_ref().unwrap(), &cfg).unwrap(),
            };
            println!("--- {kind:?} on {set_name} (variant {variant:?})");
            print!("{}", report.to_text());
        }
    }
}
