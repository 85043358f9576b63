//! Level-refinement study on mixed Ishigami, printed as CSV.
//!
//! Usage: `cargo run --example convergence -- [seeds] [starts]`

use std::time::Instant;

use mvgsa::gsa::{convergence_study, ConvergenceConfig, TestFamily};

fn main() -> mvgsa::Result<()> {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<u64>().unwrap_or(1));
    let seeds = args.next().unwrap_or(1);
    let starts = args.next().unwrap_or(2) as usize;
    let mut cfg = ConvergenceConfig::new(TestFamily::Ishigami, vec![2, 5, 10, 20]);
    cfg.seeds = (0..seeds).collect();
    cfg.fit.starts = starts;
    let t = Instant::now();
    let report = convergence_study(&cfg)?;
    report.write_csv(std::io::stdout())?;
    report.write_summary_csv(std::io::stdout())?;
    eprintln!(
        "agreement {:.3} in {:.1}s",
        report.agreement_fraction(0.05, 0.10),
        t.elapsed().as_secs_f64()
    );
    Ok(())
}
