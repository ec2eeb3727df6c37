//! CSV, COO and JSON writers.
//!
//! Floats use Rust's shortest round-trip formatting, so every value reads back
//! bit-for-bit.

use std::io::{self, Write};

use rxnet_core::master::MasterSample;
use rxnet_core::{EnsembleStats, FockSeries, Generator, Report, SpeciesTable, Trajectory};

fn header(w: &mut (impl Write + ?Sized), first: &str, cols: impl IntoIterator<Item = String>) -> io::Result<()> {
    write!(w, "{first}")?;
    for c in cols {
        write!(w, ",{c}")?;
    }
    writeln!(w)
}

fn row(w: &mut (impl Write + ?Sized), first: f64, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    write!(w, "{first:?}")?;
    for v in values {
        write!(w, ",{v:?}")?;
    }
    writeln!(w)
}

/// `t,<species…>` per integration step.
pub fn write_trajectory_csv(
    w: &mut (impl Write + ?Sized),
    species: &SpeciesTable,
    traj: &Trajectory,
) -> io::Result<()> {
    header(w, "t", species.names().iter().cloned())?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        row(w, *t, x.values().iter().copied())?;
    }
    Ok(())
}

/// `t,<species…>,tail_mass` per sample time.
pub fn write_master_csv(
    w: &mut (impl Write + ?Sized),
    species: &SpeciesTable,
    samples: &[MasterSample],
) -> io::Result<()> {
    header(
        w,
        "t",
        species.names().iter().cloned().chain(["tail_mass".to_string()]),
    )?;
    for s in samples {
        row(w, s.time, s.mean.iter().copied().chain([s.tail_mass]))?;
    }
    Ok(())
}

/// `t,mean_<species>…,var_<species>…` per sample time.
pub fn write_ensemble_csv(
    w: &mut (impl Write + ?Sized),
    species: &SpeciesTable,
    stats: &EnsembleStats,
) -> io::Result<()> {
    let names = species.names();
    header(
        w,
        "t",
        names
            .iter()
            .map(|n| format!("mean_{n}"))
            .chain(names.iter().map(|n| format!("var_{n}"))),
    )?;
    for (i, t) in stats.times.iter().enumerate() {
        row(
            w,
            *t,
            stats.mean[i].iter().chain(&stats.variance[i]).copied(),
        )?;
    }
    Ok(())
}

/// `<species…>,coeff` per stored term, in index order.
pub fn write_series_csv(
    w: &mut (impl Write + ?Sized),
    species: &SpeciesTable,
    series: &FockSeries,
) -> io::Result<()> {
    writeln!(w, "{},coeff", species.names().join(","))?;
    for (l, c) in series.iter() {
        for n in l.entries() {
            write!(w, "{n},")?;
        }
        writeln!(w, "{c:?}")?;
    }
    Ok(())
}

/// One `row col value` line per stored generator entry, 0-based ordinals.
pub fn write_generator_coo(w: &mut (impl Write + ?Sized), generator: &Generator) -> io::Result<()> {
    for (r, c, v) in generator.triplets() {
        writeln!(w, "{r} {c} {v:?}")?;
    }
    Ok(())
}

/// Pretty JSON for a batch of verification reports.
pub fn reports_json(reports: &[Report]) -> String {
    let passed = reports.iter().all(|r| r.passed);
    let doc = serde_json::json!({ "passed": passed, "reports": reports });
    serde_json::to_string_pretty(&doc).expect("reports serialize")
}
