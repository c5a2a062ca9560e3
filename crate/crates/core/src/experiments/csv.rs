//! CSV emission. Every file opens with `#` provenance lines, then a fixed
//! header row; floats carry 17 significant digits.

use std::io::{self, Write};

use super::{DivergenceRow, Provenance, ThemeStep};
use crate::fast_mix::{kind_name, BenchRow};
use crate::machine::FidelityReport;

/// Scientific notation with 17 significant digits, enough to round-trip
/// any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_provenance<W: Write + ?Sized>(w: &mut W, provenance: &Provenance) -> io::Result<()> {
    for (key, value) in provenance.lines() {
        writeln!(w, "# {key}: {value}")?;
    }
    Ok(())
}

/// Columns `t,error,delta_hat,uniformity_dev,wall_ms`. Without `timing`
/// the wall-clock column is written as zero so the file is reproducible.
pub fn write_fidelity_csv<W: Write + ?Sized>(
    w: &mut W,
    provenance: &Provenance,
    report: &FidelityReport,
    timing: bool,
) -> io::Result<()> {
    write_provenance(w, provenance)?;
    writeln!(w, "t,error,delta_hat,uniformity_dev,wall_ms")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.t,
            fmt_float(r.error),
            fmt_float(r.delta_hat),
            fmt_float(r.uniformity_dev),
            fmt_float(if timing { r.wall_ms } else { 0.0 })
        )?;
    }
    Ok(())
}

/// Columns `t,theme,projected,quotient`: `Ξ_β pₜ` against `qₜ`.
pub fn write_trajectory_csv<W: Write + ?Sized>(
    w: &mut W,
    provenance: &Provenance,
    steps: &[ThemeStep],
) -> io::Result<()> {
    write_provenance(w, provenance)?;
    writeln!(w, "t,theme,projected,quotient")?;
    for s in steps {
        for (k, (a, b)) in s.projected.iter().zip(&s.quotient).enumerate() {
            writeln!(w, "{},{k},{},{}", s.t, fmt_float(*a), fmt_float(*b))?;
        }
    }
    Ok(())
}

/// Columns `length,kind,mutation_rate,path,mean_seconds,stddev_seconds`.
pub fn write_bench_csv<W: Write + ?Sized>(w: &mut W, provenance: &Provenance, rows: &[BenchRow]) -> io::Result<()> {
    write_provenance(w, provenance)?;
    writeln!(w, "length,kind,mutation_rate,path,mean_seconds,stddev_seconds")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.length,
            kind_name(r.kind),
            fmt_float(r.mutation_rate),
            r.path.as_str(),
            fmt_float(r.mean_seconds),
            fmt_float(r.stddev_seconds)
        )?;
    }
    Ok(())
}

/// Columns `theme,class_size,mass,mean_fitness,f_star,divergence`; the
/// mean and divergence are empty for unpopulated classes.
pub fn write_divergence_csv<W: Write + ?Sized>(
    w: &mut W,
    provenance: &Provenance,
    rows: &[DivergenceRow],
) -> io::Result<()> {
    write_provenance(w, provenance)?;
    writeln!(w, "theme,class_size,mass,mean_fitness,f_star,divergence")?;
    let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.theme,
            r.class_size,
            fmt_float(r.mass),
            opt(r.mean_fitness),
            fmt_float(r.f_star),
            opt(r.divergence)
        )?;
    }
    Ok(())
}
