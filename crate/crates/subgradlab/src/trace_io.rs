//! CSV/JSON renderings of traces and trajectories.
//!
//! One CSV schema serves methods and flows: a header row, then iterate rows
//! `k, x_0..x_{n-1}, f, dproxy, C` with empty cells where an oracle is
//! absent. Floats are printed with the shortest representation that parses
//! back to the same bits, so a re-parsed trace replays bit-for-bit and
//! identical runs produce byte-identical files.

use serde::Serialize;

use crate::error::Error;
use crate::flow::TrajectorySample;
use crate::methods::{IterateTrace, MethodParams};
use crate::oracles::ObjectiveSpec;
use crate::rng::RNG_ID;
use crate::Point;

/// Rows recovered from a trace CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTrace {
    pub points: Vec<Point>,
    pub f_values: Vec<f64>,
    /// Per-row d(0, ∂f) proxy; None where the emitting run had no generators.
    pub dproxy: Vec<Option<f64>>,
    /// Per-row Chetaev value; None where the entry carries no bundle.
    pub chetaev: Vec<Option<f64>>,
}

fn csv_header(n: usize) -> String {
    let mut h = String::from("k");
    for i in 0..n {
        h.push_str(&format!(",x_{i}"));
    }
    h.push_str(",f,dproxy,C\n");
    h
}

fn push_row(
    out: &mut String,
    k: usize,
    x: &[f64],
    f: f64,
    dproxy: Option<f64>,
    c: Option<f64>,
) {
    out.push_str(&format!("{k}"));
    for xi in x {
        out.push_str(&format!(",{xi}"));
    }
    out.push_str(&format!(",{f}"));
    match dproxy {
        Some(d) => out.push_str(&format!(",{d}")),
        None => out.push(','),
    }
    match c {
        Some(c) => out.push_str(&format!(",{c}")),
        None => out.push(','),
    }
    out.push('\n');
}

/// CSV rendering of a method trace.
pub fn trace_to_csv(trace: &IterateTrace, spec: &ObjectiveSpec) -> String {
    let n = trace.points[0].len();
    let bundle = spec.chetaev();
    let mut out = csv_header(n);
    for (k, x) in trace.points.iter().enumerate() {
        let dproxy = trace
            .min_norm_proxy
            .as_ref()
            .map(|p| p[k])
            .filter(|d| !d.is_nan());
        let c = bundle.as_ref().map(|b| b.c(x));
        push_row(&mut out, k, x, trace.f_values[k], dproxy, c);
    }
    out
}

/// CSV rendering of an integrated trajectory on the same schema; `k` is the
/// grid index (time = k·h, recorded in the metadata).
pub fn flow_to_csv(sample: &TrajectorySample, spec: &ObjectiveSpec) -> String {
    let n = sample.states[0].len();
    let bundle = spec.chetaev();
    let mut out = csv_header(n);
    for (k, x) in sample.states.iter().enumerate() {
        let dproxy = spec.min_norm_subgradient(x).ok().map(|(_, d)| d);
        let c = bundle.as_ref().map(|b| b.c(x));
        push_row(&mut out, k, x, sample.f_values[k], dproxy, c);
    }
    out
}

/// Parses a trace CSV produced by [`trace_to_csv`] or [`flow_to_csv`].
pub fn parse_trace_csv(text: &str) -> Result<CsvTrace, Error> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV".to_string()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let n = cols
        .iter()
        .filter(|c| c.starts_with("x_"))
        .count();
    if n == 0 || cols.len() != n + 4 {
        return Err(Error::Parse(format!("unrecognized header '{header}'")));
    }

    let mut trace = CsvTrace {
        points: Vec::new(),
        f_values: Vec::new(),
        dproxy: Vec::new(),
        chetaev: Vec::new(),
    };
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n + 4 {
            return Err(Error::Parse(format!(
                "row {row}: expected {} cells, got {}",
                n + 4,
                cells.len()
            )));
        }
        let k: usize = cells[0]
            .parse()
            .map_err(|_| Error::Parse(format!("row {row}: bad index '{}'", cells[0])))?;
        if k != row {
            return Err(Error::Parse(format!("row {row}: out-of-order index {k}")));
        }
        let parse_f = |cell: &str| -> Result<f64, Error> {
            cell.parse()
                .map_err(|_| Error::Parse(format!("row {row}: bad float '{cell}'")))
        };
        let mut x = Vec::with_capacity(n);
        for cell in &cells[1..=n] {
            x.push(parse_f(cell)?);
        }
        trace.points.push(x);
        trace.f_values.push(parse_f(cells[n + 1])?);
        let optional = |cell: &str| -> Result<Option<f64>, Error> {
            if cell.is_empty() {
                Ok(None)
            } else {
                parse_f(cell).map(Some)
            }
        };
        trace.dproxy.push(optional(cells[n + 2])?);
        trace.chetaev.push(optional(cells[n + 3])?);
    }
    if trace.points.is_empty() {
        return Err(Error::Parse("CSV has no data rows".to_string()));
    }
    Ok(trace)
}

/// Rebuilds a full subgradient-method trace from parsed points by
/// re-deriving the selections, so `replay_check` applies to re-parsed
/// artifacts.
pub fn rebuild_subgradient_trace(
    spec: &ObjectiveSpec,
    params: MethodParams,
    points: Vec<Point>,
) -> IterateTrace {
    let subgrads = points[..points.len() - 1]
        .iter()
        .map(|x| spec.subgrad(x, params.selection))
        .collect();
    IterateTrace {
        method_id: "sg",
        params,
        points,
        f_values: Vec::new(),
        selected_subgrads: subgrads,
        min_norm_proxy: None,
        pre_point: None,
        permutations: Vec::new(),
    }
}

/// Sidecar metadata identifying a run: objective, method, parameters, RNG
/// stream family, and the structures a replay needs but the CSV omits.
#[derive(Serialize)]
struct RunMetadata<'a> {
    objective: &'a str,
    method: &'a str,
    rng_id: &'static str,
    params: &'a MethodParams,
    pre_point: &'a Option<Point>,
    permutations: &'a Vec<Vec<usize>>,
}

/// JSON metadata line for a method trace.
pub fn trace_metadata_json(trace: &IterateTrace, spec: &ObjectiveSpec) -> String {
    serde_json::to_string_pretty(&RunMetadata {
        objective: spec.id(),
        method: trace.method_id,
        rng_id: RNG_ID,
        params: &trace.params,
        pre_point: &trace.pre_point,
        permutations: &trace.permutations,
    })
    .expect("metadata serializes")
}

/// CSV of a synthetic robust-PCA data matrix, one row of M per line.
pub fn rpca_matrix_csv(spec: &ObjectiveSpec) -> Option<String> {
    let inst = spec.rpca()?;
    let cols = inst.m.len() / crate::oracles::rpca::RPCA_ROWS;
    let mut out = String::new();
    for row in inst.m.chunks(cols) {
        let cells: Vec<String> = row.iter().map(|e| format!("{e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::{replay_check, run_subgradient};
    use crate::oracles::catalog_get;

    #[test]
    fn csv_round_trips_bit_for_bit() {
        let spec = catalog_get("global_l1").unwrap();
        let trace =
            run_subgradient(&spec, &[1.37, -0.52], MethodParams::new(1e-2), 200).unwrap();
        let csv = trace_to_csv(&trace, &spec);
        let parsed = parse_trace_csv(&csv).unwrap();
        assert_eq!(parsed.points, trace.points);
        assert_eq!(parsed.f_values, trace.f_values);
        let rebuilt = rebuild_subgradient_trace(&spec, trace.params, parsed.points);
        assert!(replay_check(&rebuilt));
    }

    #[test]
    fn csv_is_deterministic() {
        let spec = catalog_get("abs1d").unwrap();
        let a = run_subgradient(&spec, &[1.0], MethodParams::new(0.3), 4).unwrap();
        let b = run_subgradient(&spec, &[1.0], MethodParams::new(0.3), 4).unwrap();
        assert_eq!(trace_to_csv(&a, &spec), trace_to_csv(&b, &spec));
    }

    #[test]
    fn methods_example_rows() {
        let spec = catalog_get("abs1d").unwrap();
        let trace = run_subgradient(&spec, &[1.0], MethodParams::new(0.3), 4).unwrap();
        let csv = trace_to_csv(&trace, &spec);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0], "k,x_0,f,dproxy,C");
        assert!(rows[1].starts_with("0,1,1,"));
        assert!(rows[5].starts_with("4,-0.2"), "row {}", rows[5]);
    }

    #[test]
    fn chetaev_column_filled_for_relu() {
        let spec = catalog_get("relu_net").unwrap();
        let trace =
            run_subgradient(&spec, &[1.0, 1.0, 0.01], MethodParams::new(0.05), 10).unwrap();
        let csv = trace_to_csv(&trace, &spec);
        let parsed = parse_trace_csv(&csv).unwrap();
        assert!(parsed.chetaev.iter().all(|c| c.is_some()));
        assert!((parsed.chetaev[0].unwrap() - 0.0).abs() <= 1e-15);
    }

    #[test]
    fn flow_csv_shares_the_schema() {
        let spec = catalog_get("quad").unwrap();
        let sample = crate::flow::integrate(
            &spec,
            &[1.0],
            crate::flow::FlowParams::new(1.0, 1e-2, 0.1),
        )
        .unwrap();
        let csv = flow_to_csv(&sample, &spec);
        let parsed = parse_trace_csv(&csv).unwrap();
        assert_eq!(parsed.points.len(), sample.states.len());
        assert!(parsed.dproxy.iter().all(|d| d.is_some()));
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert!(parse_trace_csv("").is_err());
        assert!(parse_trace_csv("k,x_0,f,dproxy,C\n").is_err());
        assert!(parse_trace_csv("k,x_0,f,dproxy,C\n0,1,1\n").is_err());
        assert!(parse_trace_csv("k,x_0,f,dproxy,C\n1,1,1,,\n").is_err());
        assert!(parse_trace_csv("nonsense\n0,1\n").is_err());
    }

    #[test]
    fn metadata_names_the_rng() {
        let spec = catalog_get("abs1d").unwrap();
        let trace = run_subgradient(&spec, &[1.0], MethodParams::new(0.3), 2).unwrap();
        let json = trace_metadata_json(&trace, &spec);
        assert!(json.contains("splitmix64/v1"));
        assert!(json.contains("\"method\": \"sg\""));
    }

    #[test]
    fn rpca_matrix_export() {
        let spec = catalog_get("rpca_l1").unwrap();
        let csv = rpca_matrix_csv(&spec).unwrap();
        assert_eq!(csv.lines().count(), 20);
        assert!(csv.lines().next().unwrap().split(',').count() == 12);
        assert!(rpca_matrix_csv(&catalog_get("quad").unwrap()).is_none());
    }
}
