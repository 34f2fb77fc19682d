mod common;

use std::collections::HashMap;

use tilemux::cli::{preset_arms, run_sweep, write_run, Arm, RunOutcome, Settings};
use tilemux::metrics::mean_std;

use common::{audit_trace, definition_one_case, steiner_sweep};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Gate {
    lines: Vec<String>,
    failed: Vec<u32>,
}

impl Gate {
    fn record(&mut self, n: u32, ok: bool, detail: String) {
        let line = format!("criterion {n:>2}: {} {detail}", if ok { "PASS" } else { "FAIL" });
        self.lines.push(line);
        if !ok {
            self.failed.push(n);
        }
    }
}

struct Runs<'a> {
    by_label: HashMap<&'a str, Vec<&'a RunOutcome>>,
}

impl<'a> Runs<'a> {
    fn stat(&self, label: &str, f: impl Fn(&RunOutcome) -> f64) -> (f64, f64) {
        let xs: Vec<f64> = self.by_label[label].iter().map(|r| f(r)).collect();
        assert_eq!(xs.len(), SEEDS.len(), "{label} is missing runs");
        mean_std(&xs)
    }

    fn eta(&self, label: &str) -> f64 {
        self.stat(label, |r| r.summary.metrics.eta).0
    }

    fn slowdown(&self, label: &str) -> (f64, f64) {
        self.stat(label, |r| r.summary.metrics.mean_slowdown)
    }

    fn wait_secondary(&self, label: &str) -> f64 {
        self.stat(label, |r| r.summary.metrics.waits.wait_secondary).0
    }
}

fn trace_files(outcome: &RunOutcome) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), outcome).unwrap();
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn acceptance() {
    let base = Settings::default();
    let mut arms: Vec<Arm> = Vec::new();
    for preset in ["rq1", "rq2-ablation", "rq3", "rq4"] {
        arms.extend(preset_arms(preset, &base).unwrap());
    }
    let results = run_sweep(&arms, &SEEDS);
    let mut errors = Vec::new();
    let mut by_label: HashMap<&str, Vec<&RunOutcome>> = HashMap::new();
    for (label, seed, r) in &results {
        match r {
            Ok(o) => by_label.entry(label.as_str()).or_default().push(o),
            Err(e) => errors.push(format!("{label} seed {seed}: {e}")),
        }
    }
    assert!(errors.is_empty(), "{errors:?}");
    let runs = Runs { by_label };
    let mut gate = Gate {
        lines: Vec::new(),
        failed: Vec::new(),
    };

    let (p, n, r) = (runs.eta("proposed"), runs.eta("naive"), runs.eta("random"));
    gate.record(
        1,
        p > n && n > r && p / r >= 1.3,
        format!("eta proposed {p:.3} > naive {n:.3} > random {r:.3}, proposed/random {:.2} >= 1.3", p / r),
    );

    gate.record(2, (2.0..=4.5).contains(&p), format!("eta proposed {p:.3} in [2.0, 4.5]"));

    let c: Vec<f64> = ["C0", "C1", "C2", "C3"].iter().map(|l| runs.eta(l)).collect();
    let steps: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = steps.iter().all(|&s| s > 0.0);
    let first_largest = steps[0] > steps[1] && steps[0] > steps[2];
    gate.record(
        3,
        monotone && first_largest,
        format!(
            "eta C0..C3 {:.3} {:.3} {:.3} {:.3}, steps {:+.3} {:+.3} {:+.3}",
            c[0], c[1], c[2], c[3], steps[0], steps[1], steps[2]
        ),
    );

    let (s_bal, s_bal_std) = runs.slowdown("balanced-n100");
    let (s_big, _) = runs.slowdown("big-n100");
    gate.record(
        4,
        (1.0..=1.5).contains(&s_bal) && s_big >= s_bal && s_bal_std < 0.1,
        format!("slowdown balanced {s_bal:.3} (std {s_bal_std:.3}) in [1, 1.5], big {s_big:.3} >= balanced"),
    );

    let ws: Vec<f64> = [25, 50, 75, 100]
        .iter()
        .map(|n| runs.wait_secondary(&format!("balanced-n{n}")))
        .collect();
    let ws_ok = ws.windows(2).all(|w| w[1] >= w[0]) && ws[3] >= 2.0 * ws[0];
    gate.record(
        5,
        ws_ok,
        format!(
            "wait_secondary % at 25/50/75/100: {:.3} {:.3} {:.3} {:.3}, ratio {:.2}",
            ws[0],
            ws[1],
            ws[2],
            ws[3],
            ws[3] / ws[0]
        ),
    );

    let (eta_p, eta_c) = (runs.eta("ports"), runs.eta("cultivation"));
    let (s_p, s_c) = (runs.slowdown("ports").0, runs.slowdown("cultivation").0);
    gate.record(
        6,
        eta_c >= eta_p && s_c <= s_p,
        format!("cultivation eta {eta_c:.3} >= ports {eta_p:.3}, slowdown {s_c:.3} <= {s_p:.3}"),
    );

    let sweep = steiner_sweep();
    gate.record(
        7,
        sweep.mismatched.is_empty() && sweep.over_ancilla_bound.is_empty(),
        format!(
            "{} instances, {} over the ancilla bound (e.g. {}), {} over the edge bound",
            sweep.checked,
            sweep.over_ancilla_bound.len(),
            sweep.over_ancilla_bound.first().map_or("-", String::as_str),
            sweep.over_edge_bound.len()
        ),
    );

    let breaches: Vec<String> = (0..1000u64).filter_map(|s| definition_one_case(s).err()).collect();
    gate.record(
        8,
        breaches.is_empty(),
        format!("1000 partition instances, {} breaches {:?}", breaches.len(), breaches.first()),
    );

    let mut bad = Vec::new();
    for (label, seed, r) in &results {
        let o = r.as_ref().unwrap();
        let solo: Vec<Option<u64>> = o.summary.workloads.iter().map(|w| w.solo).collect();
        for v in audit_trace(&o.trace, &solo) {
            bad.push(format!("{label} s{seed}: {v}"));
        }
        if o.trace.horizon_reached {
            bad.push(format!("{label} s{seed}: horizon reached"));
        }
    }
    gate.record(
        9,
        bad.is_empty(),
        format!("{} runs audited, {} violations {:?}", results.len(), bad.len(), bad.first()),
    );

    let picks: Vec<Arm> = ["proposed", "random", "C0", "balanced-n100", "cultivation"]
        .iter()
        .map(|l| arms.iter().find(|a| a.label == *l).unwrap().clone())
        .collect();
    let again = run_sweep(&picks, &[2]);
    let mut differing = Vec::new();
    for (label, seed, r) in &again {
        let first = runs.by_label[label.as_str()]
            .iter()
            .find(|o| o.seed == *seed)
            .unwrap();
        if trace_files(first) != trace_files(r.as_ref().unwrap()) {
            differing.push(label.clone());
        }
    }
    gate.record(
        10,
        differing.is_empty(),
        format!("{} reruns compared byte for byte, differing: {differing:?}", again.len()),
    );

    println!("\n{}", gate.lines.join("\n"));
    assert!(gate.failed.is_empty(), "failed criteria: {:?}", gate.failed);
}
