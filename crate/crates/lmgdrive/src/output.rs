//! CSV writers for scans, schedules, bath expansions and trajectories.

use std::io::Write;

use lmgdrive_core::bath::ExpansionTerm;
use lmgdrive_core::driving::{geometric_speed_at, DriveSchedule};
use lmgdrive_core::observables::ObservableRow;
use lmgdrive_core::spin::{ScanRow, SpinSystem};

use crate::config::SolverKind;
use crate::error::Result;

fn row<W: Write>(w: &mut csv::Writer<W>, fields: impl IntoIterator<Item = String>) -> Result<()> {
    w.write_record(fields.into_iter().collect::<Vec<_>>())?;
    Ok(())
}

fn num(x: f64) -> String {
    x.to_string()
}

/// `s, lambda, chi, E_0 … E_N, gap10[, parity_0 … parity_N]`.
pub fn write_spectrum<W: Write>(out: W, rows: &[ScanRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let levels = rows.first().map_or(0, |r| r.energies.len());
    let with_parity = rows.first().is_some_and(|r| r.parities.is_some());
    let mut header: Vec<String> = ["s", "lambda", "chi"].map(String::from).to_vec();
    header.extend((0..levels).map(|k| format!("E_{k}")));
    header.push("gap10".into());
    if with_parity {
        header.extend((0..levels).map(|k| format!("parity_{k}")));
    }
    row(&mut w, header)?;
    for r in rows {
        let mut f = vec![num(r.s), num(r.point.lambda), num(r.point.chi)];
        f.extend(r.energies.iter().map(|&e| num(e)));
        f.push(num(r.gap10));
        if let Some(p) = &r.parities {
            f.extend(p.iter().map(|x| x.to_string()));
        }
        row(&mut w, f)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `t, s, lambda, chi, u, v` with planar speed `u` and geometric speed `v`.
pub fn write_schedule<W: Write>(out: W, sys: &SpinSystem, schedule: &DriveSchedule, samples: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    row(&mut w, ["t", "s", "lambda", "chi", "u", "v"].map(String::from))?;
    let n = samples.max(2);
    for i in 0..n {
        let t = schedule.t_final() * i as f64 / (n - 1) as f64;
        let s = schedule.s_at(t)?;
        let p = schedule.path().point(s);
        let u = schedule.planar_speed(t)?;
        let v = geometric_speed_at(sys, schedule, t)?;
        row(&mut w, [t, s, p.lambda, p.chi, u, v].map(num))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `k, Re(c), Im(c), nu`.
pub fn write_expansion<W: Write>(out: W, terms: &[ExpansionTerm]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    row(&mut w, ["k", "Re(c)", "Im(c)", "nu"].map(String::from))?;
    for (k, term) in terms.iter().enumerate() {
        row(&mut w, [k.to_string(), num(term.c.re), num(term.c.im), num(term.nu)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `t, s, lambda, chi, trace, purity, P_0 … P_N, solver`.
pub fn write_trajectory<W: Write>(out: W, rows: &[ObservableRow], solver: SolverKind) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let levels = rows.first().map_or(0, |r| r.occupations.len());
    let mut header: Vec<String> = ["t", "s", "lambda", "chi", "trace", "purity"].map(String::from).to_vec();
    header.extend((0..levels).map(|k| format!("P_{k}")));
    header.push("solver".into());
    row(&mut w, header)?;
    for r in rows {
        let mut f = vec![num(r.t), num(r.s), num(r.point.lambda), num(r.point.chi), num(r.trace), num(r.purity)];
        f.extend(r.occupations.iter().map(|&p| num(p)));
        f.push(solver.to_string());
        row(&mut w, f)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use lmgdrive_core::driving::{build_schedule, DrivePath, Protocol};
    use lmgdrive_core::spin::{spectrum_scan, ControlPoint};

    fn text(bytes: Vec<u8>) -> String {
        String::from_utf8(bytes).unwrap()
    }

    #[test]
    fn spectrum_header_carries_parity_on_the_symmetric_axis() {
        let sys = SpinSystem::new(2).unwrap();
        let rows = spectrum_scan(&sys, ControlPoint::new(0.0, 0.0), ControlPoint::new(2.0, 0.0), 3).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &rows).unwrap();
        let s = text(buf);
        assert_eq!(s.lines().next().unwrap(), "s,lambda,chi,E_0,E_1,E_2,gap10,parity_0,parity_1,parity_2");
        assert_eq!(s.lines().count(), 4);
    }

    #[test]
    fn schedule_rows_span_the_drive() {
        let sys = SpinSystem::new(4).unwrap();
        let sched = build_schedule(&sys, DrivePath::second_order(), Protocol::B, 10.0, 256).unwrap();
        let mut buf = Vec::new();
        write_schedule(&mut buf, &sys, &sched, 5).unwrap();
        let s = text(buf);
        let last: Vec<f64> = s.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(last[0], 10.0);
        assert!((last[1] - 1.0).abs() < 1e-12 && (last[2] - 2.0).abs() < 1e-12);
    }
}
