//! CSV output for the experiment runners.

use std::io::{self, Write};

use rtv_core::sim::{RobustnessRow, StabilityRow};

pub const ROBUSTNESS_HEADER: &str = "experiment,seed,method,noise_px,n_noisy_views,mpjpe_mm,skipped_points";
pub const STABILITY_HEADER: &str = "experiment,seed,alpha,step,loss,mpjpe_mm,center_drift_px";

/// Formats `x` with 9 significant digits in the style of C's `%.9g`.
pub fn fmt_g9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..DIGITS).contains(&exp) {
        trim_zeros(format!("{:.*}", (DIGITS - 1 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_robustness<W: Write + ?Sized>(out: &mut W, rows: &[RobustnessRow]) -> io::Result<()> {
    writeln!(out, "{ROBUSTNESS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.experiment,
            r.seed,
            r.method,
            fmt_g9(r.noise_px),
            r.n_noisy_views,
            fmt_g9(r.mpjpe_mm),
            r.skipped_points
        )?;
    }
    out.flush()
}

pub fn write_stability<W: Write + ?Sized>(out: &mut W, rows: &[StabilityRow]) -> io::Result<()> {
    writeln!(out, "{STABILITY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.experiment,
            r.seed,
            fmt_g9(r.alpha),
            r.step,
            fmt_g9(r.loss),
            fmt_g9(r.mpjpe_mm),
            fmt_g9(r.center_drift_px)
        )?;
    }
    out.flush()
}
