use std::fmt::Write as _;

use anyhow::{ensure, Context, Result};

use kepap_sim::{compare_grid, read_csv, summarize, write_csv, CellSummary, GridConfig};

use crate::{read, write_out, PlotArgs, SimulateArgs};

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut grid = match &a.config {
        Some(p) => GridConfig::parse(&read(p)?).with_context(|| format!("in {}", p.display()))?,
        None => GridConfig::default(),
    };
    if let Some(r) = a.reps {
        grid.base.repetitions = r;
    }
    let source = grid.base.population.clone();
    log::info!(
        "{} cells x {} repetitions",
        grid.cells().len(),
        grid.base.repetitions
    );
    let rows = compare_grid(&grid, &source, a.threads)?;
    let mut echo = vec![
        ("arrival_rates".to_string(), format!("{:?}", grid.arrival_rates)),
        (
            "match_run_intervals".to_string(),
            format!("{:?}", grid.match_run_intervals),
        ),
    ];
    // Per-cell values come from the grid lines above.
    if let serde_json::Value::Object(fields) = serde_json::to_value(&grid.base)? {
        for (k, v) in fields {
            if k != "arrival_rate_days" && k != "match_run_interval_days" {
                echo.push((k, v.to_string()));
            }
        }
    }
    let mut buf = Vec::new();
    write_csv(&mut buf, &echo, &rows)?;
    write_out(a.out.as_ref(), std::str::from_utf8(&buf)?)
}

pub fn plot(a: PlotArgs) -> Result<()> {
    let text = read(&a.csv)?;
    let (_, rows) = read_csv(text.as_bytes()).with_context(|| format!("in {}", a.csv.display()))?;
    ensure!(!rows.is_empty(), "{} holds no result rows", a.csv.display());
    let cells = summarize(&rows);
    let (rates, intervals) = axes(&cells);

    let mut out = String::from("arrival_rate_days");
    for i in &intervals {
        write!(out, ",{i}")?;
    }
    out.push('\n');
    for r in &rates {
        write!(out, "{r}")?;
        for i in &intervals {
            match find(&cells, *r, *i) {
                Some(c) => write!(out, ",{:.2}", 100.0 * c.mean_ratio)?,
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    write_out(a.out.as_ref(), &out)?;
    if let Some(p) = &a.svg {
        std::fs::write(p, svg(&cells, &rates, &intervals))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn axes(cells: &[CellSummary]) -> (Vec<f64>, Vec<f64>) {
    let mut rates: Vec<f64> = cells.iter().map(|c| c.arrival_rate_days).collect();
    let mut intervals: Vec<f64> = cells.iter().map(|c| c.match_run_interval_days).collect();
    for v in [&mut rates, &mut intervals] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    (rates, intervals)
}

fn find(cells: &[CellSummary], rate: f64, interval: f64) -> Option<&CellSummary> {
    cells
        .iter()
        .find(|c| c.arrival_rate_days == rate && c.match_run_interval_days == interval)
}

/// Heat map: rows are arrival rates, columns match-run intervals, cell
/// colour from red (low ratio) to green (100%).
fn svg(cells: &[CellSummary], rates: &[f64], intervals: &[f64]) -> String {
    const W: usize = 70;
    const H: usize = 36;
    const LEFT: usize = 110;
    const TOP: usize = 50;
    let lo = cells.iter().map(|c| c.mean_ratio).fold(f64::INFINITY, f64::min).min(0.999);
    let width = LEFT + W * intervals.len() + 20;
    let height = TOP + H * rates.len() + 50;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">match-run interval (days)</text>"#,
        LEFT + W * intervals.len() / 2
    );
    let _ = writeln!(
        s,
        r#"<text x="10" y="{}" >arrival (days)</text>"#,
        TOP + H * rates.len() + 30
    );
    for (col, i) in intervals.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{i}</text>"#,
            LEFT + col * W + W / 2,
            TOP - 8
        );
    }
    for (row, r) in rates.iter().enumerate() {
        let y = TOP + row * H;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{r}</text>"#,
            LEFT - 8,
            y + H / 2 + 4
        );
        for (col, i) in intervals.iter().enumerate() {
            let x = LEFT + col * W;
            let Some(c) = find(cells, *r, *i) else {
                continue;
            };
            let t = ((c.mean_ratio - lo) / (1.0 - lo)).clamp(0.0, 1.0);
            let (red, green) = ((255.0 * (1.0 - t)) as u8, (200.0 * t + 55.0) as u8);
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{W}" height="{H}" fill="rgb({red},{green},80)" stroke="white"/>"#
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{:.1}%</text>"#,
                x + W / 2,
                y + H / 2 + 4,
                100.0 * c.mean_ratio
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
