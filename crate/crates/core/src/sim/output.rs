use std::io::{self, Write};

use super::{EventLog, Trajectory};

/// 12 significant digits.
fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn push_vec(cols: &mut Vec<String>, prefix: &str, len: usize) {
    for k in 0..len {
        cols.push(format!("{prefix}[{k}]"));
    }
}

/// Writes the trajectory as CSV, one row per sample; followers are 1-based.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let mut header = vec!["t".to_string()];
    push_vec(&mut header, "v", traj.v.first().map_or(0, |v| v.len()));
    for (i, a) in traj.agents.iter().enumerate() {
        let p = format!("agent{}", i + 1);
        push_vec(
            &mut header,
            &format!("{p}.x"),
            a.x.first().map_or(0, |v| v.len()),
        );
        push_vec(
            &mut header,
            &format!("{p}.xhat"),
            a.x_hat.first().map_or(0, |v| v.len()),
        );
        push_vec(
            &mut header,
            &format!("{p}.e"),
            a.e.first().map_or(0, |v| v.len()),
        );
        push_vec(
            &mut header,
            &format!("{p}.u"),
            a.u.first().map_or(0, |v| v.len()),
        );
        header.push(format!("{p}.Serr"));
        header.push(format!("{p}.verr"));
    }
    writeln!(w, "{}", header.join(","))?;

    let mut row = Vec::with_capacity(header.len());
    for (k, t) in traj.times.iter().enumerate() {
        row.clear();
        row.push(num(t.seconds()));
        row.extend(traj.v[k].iter().map(|&x| num(x)));
        for a in &traj.agents {
            for sig in [&a.x[k], &a.x_hat[k], &a.e[k], &a.u[k]] {
                row.extend(sig.iter().map(|&x| num(x)));
            }
            row.push(num(a.s_err[k]));
            row.push(num(a.v_err[k]));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes the event log as CSV with 1-based agent ids, in emission order.
pub fn write_events_csv<W: Write>(log: &EventLog, mut w: W) -> io::Result<()> {
    writeln!(w, "channel,agent,src_agent,t")?;
    for r in &log.records {
        writeln!(
            w,
            "{},{},{},{}",
            r.channel.as_str(),
            r.agent + 1,
            r.src_agent + 1,
            num(r.at.seconds())
        )?;
    }
    Ok(())
}
