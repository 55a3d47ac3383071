//! Result files written by `neass run`.
//!
//! ```text
//! results.json        full RunResult, schema_version 1
//! drift.csv           one row per grid point and observable
//! fits.csv            one row per fitted series
//! timings.csv         wall time per grid point (kept out of results.json)
//! plot/<id>.dat       columns: x y fit
//! plot/plot.gp        gnuplot script, one log-log panel per series group
//! summary.txt         human-readable digest
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so files
//! from identical runs are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::run::{PointStatus, RunResult};

pub fn write_all(dir: &Path, result: &RunResult) -> std::io::Result<()> {
    fs::create_dir_all(dir.join("plot"))?;
    fs::write(dir.join("results.json"), serde_json::to_vec_pretty(result).map_err(std::io::Error::other)?)?;
    fs::write(dir.join("drift.csv"), drift_csv(result))?;
    fs::write(dir.join("fits.csv"), fits_csv(result))?;
    fs::write(dir.join("timings.csv"), timings_csv(result))?;
    for f in &result.fits {
        let mut s = format!("# {} vs {}; columns: x y fit\n", f.observable, f.x_label);
        for &(x, y) in &f.points {
            let fit = f.fit.as_ref().map(|fit| format!("{}", fit.predict(x))).unwrap_or_else(|| "NaN".into());
            let _ = writeln!(s, "{x} {y} {fit}");
        }
        fs::write(dir.join("plot").join(format!("{}.dat", f.id)), s)?;
    }
    fs::write(dir.join("plot").join("plot.gp"), gnuplot(result))?;
    fs::write(dir.join("summary.txt"), summary(result))?;
    Ok(())
}

fn status_name(s: PointStatus) -> &'static str {
    match s {
        PointStatus::Ok => "ok",
        PointStatus::GapError => "gap_error",
        PointStatus::Stiffness => "stiffness",
        PointStatus::Error => "error",
    }
}

pub fn drift_csv(result: &RunResult) -> String {
    let mut s = String::from("index,sites,order,eps,eta,observable,drift_final,drift_sup,dressed,gap,status\n");
    for r in &result.records {
        let p = &r.point;
        let gap = r.gap.map(|g| g.to_string()).unwrap_or_default();
        if r.observables.is_empty() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},,,,,{},{}",
                p.index,
                p.sites,
                p.order,
                p.eps,
                p.eta,
                gap,
                status_name(r.status)
            );
        }
        for o in &r.observables {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                p.index,
                p.sites,
                p.order,
                p.eps,
                p.eta,
                o.name,
                o.drift_final,
                o.drift_sup,
                o.dressed,
                gap,
                status_name(r.status)
            );
        }
    }
    s
}

pub fn fits_csv(result: &RunResult) -> String {
    let mut s =
        String::from("id,sites,order,eps,observable,x,slope,ci_low,ci_high,used,floor_limited,min_slope,passed\n");
    for f in &result.fits {
        let eps = f.eps.map(|e| e.to_string()).unwrap_or_default();
        let min = f.min_slope.map(|m| m.to_string()).unwrap_or_default();
        let passed = f.passed().map(|p| p.to_string()).unwrap_or_default();
        match &f.fit {
            Some(fit) => {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    f.id,
                    f.sites,
                    f.order,
                    eps,
                    f.observable,
                    f.x_label,
                    fit.slope,
                    fit.ci[0],
                    fit.ci[1],
                    fit.used,
                    fit.floor_limited.len(),
                    min,
                    passed
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},,,,0,,{},{}",
                    f.id, f.sites, f.order, eps, f.observable, f.x_label, min, passed
                );
            }
        }
    }
    s
}

fn timings_csv(result: &RunResult) -> String {
    let mut s = String::from("index,wall_seconds\n");
    for r in &result.records {
        let _ = writeln!(s, "{},{:.3}", r.point.index, r.wall_seconds);
    }
    s
}

pub fn gnuplot(result: &RunResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} ({})", result.scenario_name, result.scenario_hash);
    s.push_str("set terminal pngcairo size 900,600\nset logscale xy\nset key left top\n");
    let mut groups: Vec<String> = Vec::new();
    for f in &result.fits {
        if !groups.contains(&f.group) {
            groups.push(f.group.clone());
        }
    }
    for g in groups {
        let members: Vec<_> = result.fits.iter().filter(|f| f.group == g).collect();
        let Some(first) = members.first() else { continue };
        let _ = writeln!(s, "\nset output '{g}.png'\nset xlabel '{}'\nset ylabel 'drift'", first.x_label);
        let plots: Vec<String> = members
            .iter()
            .flat_map(|f| {
                [
                    format!("'{}.dat' using 1:2 with points title '{}'", f.id, f.observable),
                    format!("'{}.dat' using 1:3 with lines notitle", f.id),
                ]
            })
            .collect();
        let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    }
    s
}

pub fn summary(result: &RunResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {} ({})", result.scenario_name, &result.scenario_hash[..12]);
    let ok = result.records.iter().filter(|r| r.status == PointStatus::Ok).count();
    let _ = writeln!(s, "grid points: {ok} of {} evaluated", result.records.len());
    for r in result.records.iter().filter(|r| r.status != PointStatus::Ok) {
        let _ = writeln!(
            s,
            "  point {} (n={}, eps={}, eta={}): {}",
            r.point.index,
            r.point.order,
            r.point.eps,
            r.point.eta,
            r.message.as_deref().unwrap_or("failed")
        );
    }
    s.push_str("\nfits:\n");
    for f in &result.fits {
        match &f.fit {
            Some(fit) => {
                let _ = writeln!(
                    s,
                    "  {:<36} slope {:>7.3}  95% [{:.3}, {:.3}]  points {}{}",
                    f.id,
                    fit.slope,
                    fit.ci[0],
                    fit.ci[1],
                    fit.used,
                    if fit.floor_limited.is_empty() {
                        String::new()
                    } else {
                        format!(" (+{} floor-limited)", fit.floor_limited.len())
                    }
                );
            }
            None => {
                let _ = writeln!(s, "  {:<36} {}", f.id, f.fit_error.as_deref().unwrap_or("no fit"));
            }
        }
    }
    s.push_str("\ncriteria:\n");
    for c in &result.criteria {
        let _ = writeln!(s, "  {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let _ = writeln!(s, "\n{}", if result.passed { "all criteria passed" } else { "some criteria failed" });
    s
}
