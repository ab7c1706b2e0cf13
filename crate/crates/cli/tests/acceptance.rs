//! One PASS/FAIL line per acceptance criterion.
//!
//! Exits 0 after printing unless `DEFT_ACCEPTANCE_STRICT=1`, in which case
//! any FAIL gives exit status 1.

use std::path::Path;
use std::time::Instant;

use deft_cli::bench::{run_bench, BenchSpec};
use deft_cli::config::{RankValue, RunConfig};
use deft_cli::run::train;
use deft_cli::sweep::rank_sweep;
use deft_cli::verify::{run_verify, VerifyReport};
use deft_core::Method;

struct Line {
    id: u8,
    title: &'static str,
    passed: bool,
    observed: String,
    seconds: f64,
    budget: f64,
}

impl Line {
    fn print(&self) {
        let ok = self.passed && self.seconds < self.budget;
        println!(
            "{} [{:>2}] {:<38} {}  ({:.1} s / {:.0} s)",
            if ok { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.observed,
            self.seconds,
            self.budget
        );
    }

    fn ok(&self) -> bool {
        self.passed && self.seconds < self.budget
    }
}

fn from_report(report: &VerifyReport, id: u8, title: &'static str, budget: f64) -> Line {
    let props: Vec<_> = report.properties.iter().filter(|p| p.criterion == id).collect();
    let observed = props
        .iter()
        .map(|p| format!("{}={:.2e}", p.name, p.worst))
        .collect::<Vec<_>>()
        .join(" ");
    Line {
        id,
        title,
        passed: !props.is_empty() && props.iter().all(|p| p.passed),
        observed,
        seconds: props.iter().map(|p| p.seconds).sum(),
        budget,
    }
}

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn convergence() -> Line {
    let t = Instant::now();
    let final_loss = |name: &str| train(&config(name), |_| Ok(())).map(|s| s.final_loss);
    let (dense, deft, svd) = match (
        final_loss("mlp_blobs_dense.toml"),
        final_loss("mlp_blobs_deft.toml"),
        final_loss("mlp_blobs_svd.toml"),
    ) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        _ => {
            return Line {
                id: 8,
                title: "convergence vs dense, rank sweep",
                passed: false,
                observed: "a run diverged".into(),
                seconds: t.elapsed().as_secs_f64(),
                budget: 300.0,
            }
        }
    };
    let gap = (deft - dense) / dense;

    let ranks = [RankValue::Fixed(2), RankValue::Fixed(8), RankValue::Fixed(32), RankValue::Min];
    let sweep = rank_sweep(&config("mlp_blobs_deft.toml"), &ranks, |_| {}).expect("sweep runs");
    let losses: Vec<f64> = sweep[..ranks.len()].iter().map(|r| r.final_loss).collect();
    let monotone = losses.windows(2).all(|w| w[1] <= w[0] * 1.05);
    let full_gap = (losses[3] - dense) / dense;

    let sweep_text = sweep
        .iter()
        .map(|r| format!("{}:{:.4}", r.rank, r.final_loss))
        .collect::<Vec<_>>()
        .join(",");
    Line {
        id: 8,
        title: "convergence vs dense, rank sweep",
        passed: gap <= 0.10 && monotone,
        observed: format!(
            "dense={dense:.4} deft(k=4)={deft:.4} svd(k=4)={svd:.4} gap={:.1}% (tol 10%) \
             sweep[{sweep_text}] monotone={monotone} full-rank gap={:.1}%",
            100.0 * gap,
            100.0 * full_gap
        ),
        seconds: t.elapsed().as_secs_f64(),
        budget: 300.0,
    }
}

fn speed() -> Line {
    let t = Instant::now();
    let spec = BenchSpec {
        methods: vec![Method::Deft, Method::Svd],
        ..BenchSpec::default()
    };
    let rows = run_bench(&spec, |_| {}).expect("bench runs");
    let median = |m: Method| rows.iter().find(|r| r.method == m).map(|r| r.median_seconds).unwrap();
    let (deft, svd) = (median(Method::Deft), median(Method::Svd));
    Line {
        id: 9,
        title: "deft_build faster than svd_build",
        passed: deft < svd,
        observed: format!(
            "2048x2048 k=128 reps=10: deft median {deft:.3} s, svd median {svd:.3} s, ratio {:.1}x (target >= 2x)",
            svd / deft
        ),
        seconds: t.elapsed().as_secs_f64(),
        budget: 300.0,
    }
}

fn main() {
    let start = Instant::now();
    let report = run_verify();
    let mut lines = vec![
        from_report(&report, 1, "kernel oracles (fft, qr, svd)", 60.0),
        from_report(&report, 2, "parseval", 10.0),
        from_report(&report, 3, "projector orthonormality, determinism", 120.0),
        from_report(&report, 4, "eckart-young ordering", 120.0),
        from_report(&report, 5, "exact low-rank recovery", 30.0),
        from_report(&report, 6, "optimizer equivalence", 10.0),
        from_report(&report, 7, "cadence and closed forms", 10.0),
    ];
    for l in &lines {
        l.print();
    }
    let c8 = convergence();
    c8.print();
    let c9 = speed();
    c9.print();
    let c10 = from_report(&report, 10, "finite-difference gradient checks", 30.0);
    c10.print();
    lines.extend([c8, c9, c10]);

    let failed: Vec<u8> = lines.iter().filter(|l| !l.ok()).map(|l| l.id).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s{}",
        lines.len() - failed.len(),
        lines.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed {failed:?}")
        }
    );
    if !failed.is_empty() && std::env::var("DEFT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
